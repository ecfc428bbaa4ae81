use std::collections::VecDeque;
use std::time::Instant;

use super::dfa::ByteDfa;
use super::{FsmError, StateId, StateLabel};
use crate::mask::TokenMask;
use crate::vocab::{TokenId, Vocabulary};

/// Token-level automaton with a precomputed permitted-token mask per state.
///
/// States come from byte-DFA states that some token walk can land on, plus a
/// single final state entered by the end-of-sequence token from any accepting
/// byte state. The final state is the only accepting state.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFsm {
    vocab_size: usize,
    eos: TokenId,
    start: StateId,
    final_state: StateId,
    /// Sorted by token id.
    trans: Vec<Vec<(TokenId, StateId)>>,
    masks: Vec<TokenMask>,
    /// Byte-DFA state each token state was lifted from; `None` for the final
    /// state.
    origin: Vec<Option<StateId>>,
    labels: Vec<Vec<StateLabel>>,
    /// Fewest tokens needed to reach the final state.
    dist: Vec<u32>,
    /// Largest `dist` over the successors of each state.
    max_succ_dist: Vec<u32>,
    build_millis: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FsmStats {
    pub state_count: usize,
    pub transition_count: usize,
    pub mask_bytes: usize,
    pub build_millis: u64,
}

pub fn fsm_stats(f: &TokenFsm) -> FsmStats {
    FsmStats {
        state_count: f.state_count(),
        transition_count: f.transition_count(),
        mask_bytes: f.state_count() * f.vocab_size.div_ceil(8),
        build_millis: f.build_millis,
    }
}

/// Lifts `dfa` to token level over `v`.
///
/// Each reachable state does one depth-first traversal of the vocabulary's
/// expansion trie in lockstep with the DFA, so shared token prefixes are
/// walked once. Fails when some reachable state has no token path to the
/// final state.
pub fn compile_token_fsm(dfa: &ByteDfa, v: &Vocabulary) -> Result<TokenFsm, FsmError> {
    let started = Instant::now();
    let trie = v.trie();
    let mut token_of: Vec<Option<StateId>> = vec![None; dfa.state_count()];
    let mut origin: Vec<Option<StateId>> = vec![Some(dfa.start())];
    token_of[dfa.start() as usize] = Some(0);
    let mut trans: Vec<Vec<(TokenId, StateId)>> = Vec::new();
    let mut queue = VecDeque::from([dfa.start()]);
    const FINAL: StateId = StateId::MAX;

    let mut stack: Vec<(u32, StateId)> = Vec::new();
    while let Some(q) = queue.pop_front() {
        let mut out: Vec<(TokenId, StateId)> = Vec::new();
        stack.clear();
        // The root node spells the empty string; it holds no tokens.
        for &(b, child) in trie.nodes[0].children.iter().rev() {
            if let Some(nq) = dfa.next(q, b) {
                stack.push((child, nq));
            }
        }
        while let Some((node, dq)) = stack.pop() {
            let n = &trie.nodes[node as usize];
            if !n.tokens.is_empty() {
                let target = match token_of[dq as usize] {
                    Some(t) => t,
                    None => {
                        let t = origin.len() as StateId;
                        token_of[dq as usize] = Some(t);
                        origin.push(Some(dq));
                        queue.push_back(dq);
                        t
                    }
                };
                out.extend(n.tokens.iter().map(|&tok| (tok, target)));
            }
            for &(b, child) in n.children.iter().rev() {
                if let Some(nq) = dfa.next(dq, b) {
                    stack.push((child, nq));
                }
            }
        }
        if dfa.is_accepting(q) {
            out.push((v.eos(), FINAL));
        }
        out.sort_unstable_by_key(|&(tok, _)| tok);
        trans.push(out);
    }

    let final_state = origin.len() as StateId;
    origin.push(None);
    trans.push(Vec::new());
    for row in &mut trans {
        for t in row.iter_mut() {
            if t.1 == FINAL {
                t.1 = final_state;
            }
        }
    }
    let labels = origin
        .iter()
        .map(|o| o.map_or_else(Vec::new, |q| dfa.labels(q).to_vec()))
        .collect();
    let masks = trans
        .iter()
        .map(|row| {
            let mut m = TokenMask::empty(v.len());
            for &(tok, _) in row {
                m.insert(tok as usize);
            }
            m
        })
        .collect();
    let fsm = TokenFsm::assemble(v.len(), v.eos(), 0, final_state, trans, masks, origin, labels)
        .map_err(|state| {
            let sample = dfa_sample(dfa, &state);
            FsmError::InexpressibleGrammar { state: state.0, sample }
        })?;
    Ok(TokenFsm { build_millis: started.elapsed().as_millis() as u64, ..fsm })
}

fn dfa_sample(dfa: &ByteDfa, dead: &(StateId, Option<StateId>)) -> Vec<u8> {
    dead.1.and_then(|q| dfa.shortest_completion(q)).unwrap_or_default()
}

impl TokenFsm {
    /// Builds the derived tables. On failure returns the first token state
    /// (and its byte origin) that cannot reach the final state.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        vocab_size: usize,
        eos: TokenId,
        start: StateId,
        final_state: StateId,
        trans: Vec<Vec<(TokenId, StateId)>>,
        masks: Vec<TokenMask>,
        origin: Vec<Option<StateId>>,
        labels: Vec<Vec<StateLabel>>,
    ) -> Result<Self, (StateId, Option<StateId>)> {
        let n = trans.len();
        let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, row) in trans.iter().enumerate() {
            for &(_, t) in row {
                rev[t as usize].push(s as StateId);
            }
        }
        let mut dist = vec![u32::MAX; n];
        dist[final_state as usize] = 0;
        let mut queue = VecDeque::from([final_state]);
        while let Some(s) = queue.pop_front() {
            for &p in &rev[s as usize] {
                if dist[p as usize] == u32::MAX {
                    dist[p as usize] = dist[s as usize] + 1;
                    queue.push_back(p);
                }
            }
        }
        // Report a stuck state (no transitions at all) when there is one,
        // since that is where a missing token shows up.
        let dead = (0..n)
            .find(|&s| dist[s] == u32::MAX && trans[s].is_empty())
            .or_else(|| dist.iter().position(|&d| d == u32::MAX));
        if let Some(dead) = dead {
            return Err((dead as StateId, origin[dead]));
        }
        let max_succ_dist = trans
            .iter()
            .map(|row| row.iter().map(|&(_, t)| dist[t as usize]).max().unwrap_or(0))
            .collect();
        Ok(TokenFsm {
            vocab_size,
            eos,
            start,
            final_state,
            trans,
            masks,
            origin,
            labels,
            dist,
            max_succ_dist,
            build_millis: 0,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn final_state(&self) -> StateId {
        self.final_state
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        s == self.final_state
    }

    pub fn state_count(&self) -> usize {
        self.trans.len()
    }

    pub fn transition_count(&self) -> usize {
        self.trans.iter().map(Vec::len).sum()
    }

    pub fn mask(&self, s: StateId) -> &TokenMask {
        &self.masks[s as usize]
    }

    pub fn transitions(&self, s: StateId) -> &[(TokenId, StateId)] {
        &self.trans[s as usize]
    }

    #[inline]
    pub fn next(&self, s: StateId, tok: TokenId) -> Option<StateId> {
        let row = &self.trans[s as usize];
        row.binary_search_by_key(&tok, |&(t, _)| t).ok().map(|i| row[i].1)
    }

    pub fn walk(&self, mut s: StateId, tokens: &[TokenId]) -> Option<StateId> {
        for &t in tokens {
            s = self.next(s, t)?;
        }
        Some(s)
    }

    /// True iff every token has a transition and the walk ends accepting.
    pub fn accepts(&self, tokens: &[TokenId]) -> bool {
        self.walk(self.start, tokens).is_some_and(|s| self.is_accepting(s))
    }

    pub fn origin(&self, s: StateId) -> Option<StateId> {
        self.origin[s as usize]
    }

    pub fn labels(&self, s: StateId) -> &[StateLabel] {
        &self.labels[s as usize]
    }

    /// States inside a free-text phase.
    pub fn is_free_text(&self, s: StateId) -> bool {
        self.labels[s as usize].iter().any(|l| matches!(l, StateLabel::FreeText { .. }))
    }

    pub fn free_text_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.state_count() as StateId).filter(|&s| self.is_free_text(s))
    }

    /// Fewest tokens from `s` to the final state.
    pub fn distance_to_final(&self, s: StateId) -> u32 {
        self.dist[s as usize]
    }

    pub(crate) fn max_successor_distance(&self, s: StateId) -> u32 {
        self.max_succ_dist[s as usize]
    }

    pub fn stats(&self) -> FsmStats {
        fsm_stats(self)
    }
}
