use std::borrow::Cow;

use super::model::LanguageModel;
use super::policy::Sampler;
use super::DecodeError;
use crate::fsm::{StateId, StateLabel, TokenFsm};
use crate::mask::TokenMask;
use crate::vocab::TokenId;

/// Step limit used when none is given.
pub const DEFAULT_STEP_LIMIT: usize = 512;

/// Zeroes every probability outside `mask` and rescales the rest to sum
/// to 1.
pub fn mask_distribution(p: &[f64], mask: &TokenMask) -> Result<Vec<f64>, DecodeError> {
    let mut out = vec![0.0; p.len()];
    mask_distribution_into(p, mask, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`mask_distribution`].
pub fn mask_distribution_into(p: &[f64], mask: &TokenMask, out: &mut [f64]) -> Result<(), DecodeError> {
    if p.len() != mask.len() || out.len() != p.len() {
        return Err(DecodeError::DimensionMismatch { expected: mask.len(), got: p.len().min(out.len()) });
    }
    let total = masked_sum(p, mask);
    if !(total > 0.0 && total.is_finite()) {
        return Err(DecodeError::ZeroMassSupport);
    }
    let scale = 1.0 / total;
    for ((o, x), &w) in out.chunks_mut(64).zip(p.chunks(64)).zip(mask.words()) {
        if w == u64::MAX {
            for (o, &x) in o.iter_mut().zip(x) {
                *o = x * scale;
            }
        } else if w == 0 {
            o.fill(0.0);
        } else {
            for (i, (o, &x)) in o.iter_mut().zip(x).enumerate() {
                *o = if w >> i & 1 == 1 { x * scale } else { 0.0 };
            }
        }
    }
    Ok(())
}

/// Sum over the mask with eight independent accumulators, combined in a
/// fixed order so the result does not depend on the machine.
fn masked_sum(p: &[f64], mask: &TokenMask) -> f64 {
    let mut lanes = [0.0f64; 8];
    mask.for_each_range(|r| {
        let chunks = p[r].chunks_exact(8);
        for (i, &x) in chunks.remainder().iter().enumerate() {
            lanes[i] += x;
        }
        for c in chunks {
            for (l, &x) in lanes.iter_mut().zip(c) {
                *l += x;
            }
        }
    });
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
}

fn uniform_into(mask: &TokenMask, out: &mut [f64]) {
    out.fill(0.0);
    let w = 1.0 / mask.count() as f64;
    for i in mask.iter() {
        out[i] = w;
    }
}

/// Result of one engine step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub token: TokenId,
    pub finished: bool,
    /// The permitted tokens carried no probability and a uniform
    /// distribution over them was used instead.
    pub fallback: bool,
}

/// One generation run against a shared automaton.
///
/// Besides the automaton's own mask, a length guard keeps the run
/// completable: once the remaining step budget gets tight, only tokens from
/// which the final state is still reachable in time are permitted.
#[derive(Debug, Clone)]
pub struct DecodeSession<'f> {
    fsm: &'f TokenFsm,
    state: StateId,
    prefix: Vec<TokenId>,
    step_limit: usize,
    length_guard: bool,
    fallbacks: usize,
    probs: Vec<f64>,
    masked: Vec<f64>,
    guard: TokenMask,
}

impl<'f> DecodeSession<'f> {
    pub fn new(fsm: &'f TokenFsm, step_limit: usize) -> Result<Self, DecodeError> {
        let needed = fsm.distance_to_final(fsm.start()) as usize;
        if needed > step_limit {
            return Err(DecodeError::StepLimitTooSmall { needed, limit: step_limit });
        }
        let n = fsm.vocab_size();
        Ok(DecodeSession {
            fsm,
            state: fsm.start(),
            prefix: Vec::new(),
            step_limit,
            length_guard: true,
            fallbacks: 0,
            probs: vec![0.0; n],
            masked: vec![0.0; n],
            guard: TokenMask::empty(n),
        })
    }

    /// Turns off the length guard; runs may then hit the step limit.
    pub fn without_length_guard(mut self) -> Self {
        self.length_guard = false;
        self
    }

    pub fn fsm(&self) -> &'f TokenFsm {
        self.fsm
    }

    pub fn state(&self) -> StateId {
        self.state
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }

    pub fn steps(&self) -> usize {
        self.prefix.len()
    }

    pub fn step_limit(&self) -> usize {
        self.step_limit
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn is_finished(&self) -> bool {
        self.fsm.is_accepting(self.state)
    }

    /// Distribution used for the most recent sampled step.
    pub fn last_distribution(&self) -> &[f64] {
        &self.masked
    }

    /// `(phase, matched anchor bytes)` while inside free text.
    pub fn anchor_progress(&self) -> Option<(u16, u16)> {
        self.fsm.labels(self.state).iter().find_map(|l| match *l {
            StateLabel::FreeText { phase, progress } => Some((phase, progress)),
            _ => None,
        })
    }

    /// Tokens permitted now, after the length guard.
    pub fn current_mask(&self) -> Cow<'f, TokenMask> {
        let remaining = self.remaining();
        if !self.guard_applies(remaining) {
            return Cow::Borrowed(self.fsm.mask(self.state));
        }
        let mut m = TokenMask::empty(self.fsm.vocab_size());
        fill_guard(self.fsm, self.state, remaining, &mut m);
        Cow::Owned(m)
    }

    /// Masks and renormalizes `p` for the current state without advancing,
    /// for callers that sample on their own and report back via
    /// [`advance`](Self::advance).
    pub fn mask_into(&self, p: &[f64], out: &mut [f64]) -> Result<(), DecodeError> {
        self.check_can_step()?;
        mask_distribution_into(p, &self.current_mask(), out)
    }

    fn remaining(&self) -> u32 {
        (self.step_limit - self.prefix.len()) as u32
    }

    fn guard_applies(&self, remaining: u32) -> bool {
        self.length_guard && self.fsm.max_successor_distance(self.state) + 1 > remaining
    }

    fn check_can_step(&self) -> Result<(), DecodeError> {
        if self.is_finished() {
            return Err(DecodeError::Finished);
        }
        if self.prefix.len() >= self.step_limit {
            return Err(DecodeError::StepLimitExceeded { partial: self.prefix.clone() });
        }
        Ok(())
    }

    /// Queries `model`, masks and renormalizes its distribution, samples
    /// with `sampler` and advances.
    pub fn step(&mut self, model: &mut dyn LanguageModel, sampler: &mut Sampler) -> Result<TokenId, DecodeError> {
        self.check_can_step()?;
        if model.vocab_size() != self.probs.len() {
            return Err(DecodeError::DimensionMismatch { expected: self.probs.len(), got: model.vocab_size() });
        }
        model.next_distribution(&self.prefix, &mut self.probs);
        Ok(self.sample_step(sampler)?.token)
    }

    /// Like [`step`](Self::step) with a caller-supplied distribution.
    pub fn step_with_distribution(&mut self, p: &[f64], sampler: &mut Sampler) -> Result<StepOutcome, DecodeError> {
        self.check_can_step()?;
        if p.len() != self.probs.len() {
            return Err(DecodeError::DimensionMismatch { expected: self.probs.len(), got: p.len() });
        }
        self.sample_from(p, sampler)
    }

    fn sample_step(&mut self, sampler: &mut Sampler) -> Result<StepOutcome, DecodeError> {
        let probs = std::mem::take(&mut self.probs);
        let out = self.sample_from(&probs, sampler);
        self.probs = probs;
        out
    }

    fn sample_from(&mut self, p: &[f64], sampler: &mut Sampler) -> Result<StepOutcome, DecodeError> {
        let remaining = self.remaining();
        let mask = if self.guard_applies(remaining) {
            fill_guard(self.fsm, self.state, remaining, &mut self.guard);
            &self.guard
        } else {
            self.fsm.mask(self.state)
        };
        let fallback = match mask_distribution_into(p, mask, &mut self.masked) {
            Ok(()) => false,
            Err(DecodeError::ZeroMassSupport) => {
                uniform_into(mask, &mut self.masked);
                true
            }
            Err(e) => return Err(e),
        };
        let token = sampler.sample(&self.masked, mask);
        if fallback {
            self.fallbacks += 1;
            log::debug!("zero mass on permitted tokens at step {}; sampled uniformly", self.prefix.len());
        }
        self.push(token);
        Ok(StepOutcome { token, finished: self.is_finished(), fallback })
    }

    /// Applies a token chosen outside the engine. Returns whether the
    /// session is now finished.
    pub fn advance(&mut self, token: TokenId) -> Result<bool, DecodeError> {
        self.check_can_step()?;
        if !self.current_mask().contains(token as usize) {
            return Err(DecodeError::InvalidToken(token));
        }
        self.push(token);
        Ok(self.is_finished())
    }

    fn push(&mut self, token: TokenId) {
        self.state = self.fsm.next(self.state, token).expect("sampled token is permitted");
        self.prefix.push(token);
    }

    /// Steps until the final state. The returned tokens end with the
    /// end-of-sequence token.
    pub fn run(&mut self, model: &mut dyn LanguageModel, sampler: &mut Sampler) -> Result<Vec<TokenId>, DecodeError> {
        while !self.is_finished() {
            self.step(model, sampler)?;
        }
        Ok(self.prefix.clone())
    }
}

fn fill_guard(fsm: &TokenFsm, s: StateId, remaining: u32, out: &mut TokenMask) {
    out.clear();
    for &(tok, t) in fsm.transitions(s) {
        if fsm.distance_to_final(t) < remaining {
            out.insert(tok as usize);
        }
    }
}

/// Runs a fresh session to completion.
pub fn run_to_completion(
    fsm: &TokenFsm,
    model: &mut dyn LanguageModel,
    sampler: &mut Sampler,
    step_limit: usize,
) -> Result<Vec<TokenId>, DecodeError> {
    DecodeSession::new(fsm, step_limit)?.run(model, sampler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{AdversarialStub, RandomLogit, SamplingPolicy, ScriptedStub};
    use crate::fsm::{build_tool_call_dfa, compile_token_fsm};
    use crate::schema::fixtures::flight_search;
    use crate::schema::ToolSchema;
    use crate::vocab::Vocabulary;

    fn byte_vocab() -> Vocabulary {
        let mut exp: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        exp.push(b"<EOS>".to_vec());
        Vocabulary::new(exp, 256).unwrap()
    }

    fn call_fsm(schema: &ToolSchema) -> (Vocabulary, TokenFsm) {
        let v = byte_vocab();
        let fsm = compile_token_fsm(&build_tool_call_dfa(schema).unwrap(), &v).unwrap();
        (v, fsm)
    }

    fn mask_of(n: usize, ids: &[usize]) -> TokenMask {
        let mut m = TokenMask::empty(n);
        ids.iter().for_each(|&i| m.insert(i));
        m
    }

    fn greedy() -> Sampler {
        Sampler::new(SamplingPolicy::Greedy)
    }

    #[test]
    fn renormalizes_over_the_mask() {
        let out = mask_distribution(&[0.5, 0.3, 0.2], &mask_of(3, &[0, 2])).unwrap();
        assert!((out[0] - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(out[1], 0.0);
        assert!((out[2] - 2.0 / 7.0).abs() < 1e-12);

        let out = mask_distribution(&[0.125; 8], &mask_of(8, &[3, 6])).unwrap();
        assert_eq!(out, [0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0]);

        let p = [0.1, 0.2, 0.3, 0.4];
        let out = mask_distribution(&p, &TokenMask::full(4)).unwrap();
        assert!(out.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn zero_mass_and_dimension_errors() {
        let m = mask_of(3, &[1]);
        assert_eq!(mask_distribution(&[1.0, 0.0, 0.0], &m), Err(DecodeError::ZeroMassSupport));
        assert_eq!(mask_distribution(&[f64::NAN, 1.0, 0.0], &mask_of(3, &[0, 1])), Err(DecodeError::ZeroMassSupport));
        assert!(matches!(mask_distribution(&[1.0], &m), Err(DecodeError::DimensionMismatch { expected: 3, .. })));
    }

    #[test]
    fn forbidden_mass_is_removed_after_an_integer_digit() {
        let (v, fsm) = call_fsm(&flight_search());
        let mut s = DecodeSession::new(&fsm, 512).unwrap();
        for t in v.tokenize_greedy(br#"{"from": "LAX", "to": "JFK", "adult": 2"#).unwrap() {
            s.advance(t).unwrap();
        }
        let n = fsm.vocab_size();
        let mut p = vec![0.1 / (n - 1) as f64; n];
        p[b'a' as usize] = 0.9;
        let mut out = vec![0.0; n];
        s.mask_into(&p, &mut out).unwrap();
        assert_eq!(out[b'a' as usize], 0.0);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let permitted: Vec<u8> = (0..n).filter(|&i| out[i] > 0.0).map(|i| i as u8).collect();
        assert!(permitted.contains(&b'7') && permitted.contains(&b',') && permitted.contains(&b'}'));
        let out2 = s.step_with_distribution(&p, &mut greedy()).unwrap();
        assert_ne!(out2.token, b'a' as TokenId);
        assert_eq!(s.last_distribution(), &out[..]);
    }

    #[test]
    fn greedy_follows_a_singleton_mask() {
        let (_, fsm) = call_fsm(&flight_search());
        let mut s = DecodeSession::new(&fsm, 512).unwrap();
        let n = fsm.vocab_size();
        let mut p = vec![0.0; n];
        p[b'x' as usize] = 0.99;
        p[b'{' as usize] = 0.01;
        let out = s.step_with_distribution(&p, &mut greedy()).unwrap();
        assert_eq!(out, StepOutcome { token: b'{' as TokenId, finished: false, fallback: false });
    }

    #[test]
    fn zero_parameter_tool_decodes_to_empty_object() {
        let (v, fsm) = call_fsm(&ToolSchema { tool_name: "ping".into(), description: String::new(), params: vec![] });
        let ids = run_to_completion(&fsm, &mut RandomLogit::new(fsm.vocab_size(), 1), &mut greedy(), 8).unwrap();
        assert_eq!(ids, [b'{' as TokenId, b'}' as TokenId, v.eos()]);
    }

    #[test]
    fn seeded_runs_are_reproducible_and_valid() {
        let (v, fsm) = call_fsm(&flight_search());
        let policy = SamplingPolicy::Temperature { t: 0.7, seed: 7 };
        let run = || {
            run_to_completion(&fsm, &mut RandomLogit::new(fsm.vocab_size(), 3), &mut Sampler::new(policy), 512).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(fsm.accepts(&a));
        let text = v.detokenize(&a[..a.len() - 1]);
        let report = crate::schema::validate_call_text(&flight_search(), std::str::from_utf8(&text).unwrap());
        assert!(report.is_valid(), "{}", String::from_utf8_lossy(&text));
    }

    #[test]
    fn scripted_replay_reproduces_the_script() {
        let (v, fsm) = call_fsm(&flight_search());
        let mut script = v.tokenize_greedy(br#"{"from": "LAX", "to": "JFK", "adult": 2}"#).unwrap();
        script.push(v.eos());
        let mut model = ScriptedStub::new(fsm.vocab_size(), script.clone(), v.eos());
        let ids = run_to_completion(&fsm, &mut model, &mut greedy(), 512).unwrap();
        assert_eq!(ids, script);
    }

    #[test]
    fn adversarial_model_only_causes_fallbacks() {
        let (_, fsm) = call_fsm(&flight_search());
        let mut model = AdversarialStub::new(&fsm, 5);
        let mut s = DecodeSession::new(&fsm, 512).unwrap();
        let ids = s.run(&mut model, &mut Sampler::new(SamplingPolicy::TopK { k: 4, seed: 5 })).unwrap();
        assert!(fsm.accepts(&ids));
        assert!(s.fallbacks() > 0);
        assert!(s.fallbacks() <= ids.len());
    }

    #[test]
    fn length_guard_finishes_within_the_limit() {
        let (_, fsm) = call_fsm(&flight_search());
        let min = fsm.distance_to_final(fsm.start()) as usize;
        assert_eq!(
            DecodeSession::new(&fsm, min - 1).unwrap_err(),
            DecodeError::StepLimitTooSmall { needed: min, limit: min - 1 }
        );
        for seed in 0..50 {
            for limit in [min, min + 1, min + 7] {
                let mut model = RandomLogit::new(fsm.vocab_size(), seed);
                let mut sampler = Sampler::new(SamplingPolicy::Temperature { t: 1.0, seed });
                let ids = run_to_completion(&fsm, &mut model, &mut sampler, limit).unwrap();
                assert!(ids.len() <= limit && fsm.accepts(&ids));
            }
        }
    }

    #[test]
    fn unguarded_session_can_run_out_of_steps() {
        let (_, fsm) = call_fsm(&flight_search());
        let min = fsm.distance_to_final(fsm.start()) as usize;
        let hit = (0..50).any(|seed| {
            let mut s = DecodeSession::new(&fsm, min).unwrap().without_length_guard();
            let mut sampler = Sampler::new(SamplingPolicy::Temperature { t: 1.0, seed });
            matches!(s.run(&mut RandomLogit::new(fsm.vocab_size(), seed), &mut sampler), Err(DecodeError::StepLimitExceeded { .. }))
        });
        assert!(hit);
    }

    #[test]
    fn session_errors() {
        let (v, fsm) = call_fsm(&ToolSchema { tool_name: "ping".into(), description: String::new(), params: vec![] });
        let mut s = DecodeSession::new(&fsm, 8).unwrap();
        assert_eq!(s.advance(b'}' as TokenId), Err(DecodeError::InvalidToken(b'}' as TokenId)));
        let bad = s.step_with_distribution(&[1.0], &mut greedy());
        assert!(matches!(bad, Err(DecodeError::DimensionMismatch { expected: 257, got: 1 })));
        assert_eq!(s.advance(b'{' as TokenId), Ok(false));
        assert_eq!(s.advance(b'}' as TokenId), Ok(false));
        assert_eq!(s.advance(v.eos()), Ok(true));
        assert!(s.is_finished());
        assert_eq!(s.advance(v.eos()), Err(DecodeError::Finished));
        let p = vec![1.0 / 257.0; 257];
        assert_eq!(s.step_with_distribution(&p, &mut greedy()), Err(DecodeError::Finished));
        assert_eq!(s.mask_into(&p, &mut vec![0.0; 257]), Err(DecodeError::Finished));
    }

    #[test]
    fn zero_mass_step_falls_back_to_uniform() {
        let (_, fsm) = call_fsm(&flight_search());
        let mut s = DecodeSession::new(&fsm, 512).unwrap();
        let mut p = vec![0.0; fsm.vocab_size()];
        p[b'x' as usize] = 1.0;
        let out = s.step_with_distribution(&p, &mut greedy()).unwrap();
        assert!(out.fallback);
        assert_eq!(out.token, b'{' as TokenId);
        assert_eq!(s.fallbacks(), 1);
    }
}
