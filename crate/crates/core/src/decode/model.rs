use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::fsm::{StateId, TokenFsm};
use crate::vocab::TokenId;

/// Source of next-token distributions.
///
/// `next_distribution` fills `out` (length [`vocab_size`](Self::vocab_size))
/// with non-negative values summing to 1, given the tokens generated so far.
pub trait LanguageModel {
    fn vocab_size(&self) -> usize;
    fn next_distribution(&mut self, prefix: &[TokenId], out: &mut [f64]);
}

/// Converts logits to probabilities in place.
pub fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in logits.iter_mut() {
        *x /= total;
    }
}

/// A fresh flat-Dirichlet draw at every step.
#[derive(Debug, Clone)]
pub struct RandomLogit {
    vocab_size: usize,
    rng: ChaCha8Rng,
}

impl RandomLogit {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        RandomLogit { vocab_size, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl LanguageModel for RandomLogit {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&mut self, _prefix: &[TokenId], out: &mut [f64]) {
        let mut total = 0.0;
        for x in out.iter_mut() {
            *x = self.rng.sample::<f64, _>(Exp1);
            total += *x;
        }
        for x in out.iter_mut() {
            *x /= total;
        }
    }
}

/// Replays a fixed token list with probability 1 on the scripted token.
/// Past the end of the script all mass goes to `eos`.
#[derive(Debug, Clone)]
pub struct ScriptedStub {
    vocab_size: usize,
    script: Vec<TokenId>,
    eos: TokenId,
}

impl ScriptedStub {
    pub fn new(vocab_size: usize, script: Vec<TokenId>, eos: TokenId) -> Self {
        ScriptedStub { vocab_size, script, eos }
    }
}

impl LanguageModel for ScriptedStub {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&mut self, prefix: &[TokenId], out: &mut [f64]) {
        out.fill(0.0);
        let tok = self.script.get(prefix.len()).copied().unwrap_or(self.eos);
        if let Some(x) = out.get_mut(tok as usize) {
            *x = 1.0;
        } else {
            out.fill(1.0 / self.vocab_size as f64);
        }
    }
}

/// Puts all mass on one uniformly chosen token the automaton forbids in the
/// current state, so every step exercises the zero-mass fallback. When no
/// token is forbidden the choice is uniform over the whole vocabulary.
#[derive(Debug, Clone)]
pub struct AdversarialStub<'f> {
    fsm: &'f TokenFsm,
    rng: ChaCha8Rng,
    seen: usize,
    state: Option<StateId>,
}

impl<'f> AdversarialStub<'f> {
    pub fn new(fsm: &'f TokenFsm, seed: u64) -> Self {
        AdversarialStub { fsm, rng: ChaCha8Rng::seed_from_u64(seed), seen: 0, state: Some(fsm.start()) }
    }

    fn track(&mut self, prefix: &[TokenId]) {
        if prefix.len() < self.seen {
            self.seen = 0;
            self.state = Some(self.fsm.start());
        }
        for &t in &prefix[self.seen..] {
            self.state = self.state.and_then(|s| self.fsm.next(s, t));
        }
        self.seen = prefix.len();
    }
}

impl LanguageModel for AdversarialStub<'_> {
    fn vocab_size(&self) -> usize {
        self.fsm.vocab_size()
    }

    fn next_distribution(&mut self, prefix: &[TokenId], out: &mut [f64]) {
        self.track(prefix);
        out.fill(0.0);
        let n = out.len();
        let forbidden = match self.state {
            Some(s) => n - self.fsm.mask(s).count(),
            None => n,
        };
        let pick = if forbidden == 0 {
            self.rng.random_range(0..n)
        } else {
            let k = self.rng.random_range(0..forbidden);
            match self.state {
                Some(s) => {
                    let mask = self.fsm.mask(s);
                    (0..n).filter(|&i| !mask.contains(i)).nth(k).expect("k < forbidden")
                }
                None => k,
            }
        };
        out[pick] = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_logit_is_a_seeded_distribution() {
        let mut a = RandomLogit::new(50, 9);
        let mut b = RandomLogit::new(50, 9);
        let (mut x, mut y) = (vec![0.0; 50], vec![0.0; 50]);
        for _ in 0..3 {
            a.next_distribution(&[], &mut x);
            b.next_distribution(&[], &mut y);
            assert_eq!(x, y);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn scripted_stub_replays_then_ends() {
        let mut m = ScriptedStub::new(4, vec![2, 1], 3);
        let mut out = vec![0.0; 4];
        m.next_distribution(&[], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 1.0, 0.0]);
        m.next_distribution(&[2], &mut out);
        assert_eq!(out, vec![0.0, 1.0, 0.0, 0.0]);
        m.next_distribution(&[2, 1], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_normalizes() {
        let mut l = vec![1.0, 2.0, 3.0];
        softmax(&mut l);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(l[2] > l[1] && l[1] > l[0]);
        assert!((l[1] / l[0] - std::f64::consts::E).abs() < 1e-9);
    }
}
