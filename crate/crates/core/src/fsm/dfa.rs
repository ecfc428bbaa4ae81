use std::collections::{HashMap, VecDeque};

use super::nfa::Nfa;
use super::{FsmError, StateId, StateLabel};

/// Deterministic byte-level automaton. Transitions are stored as sorted,
/// non-overlapping inclusive byte ranges per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteDfa {
    trans: Vec<Vec<(u8, u8, StateId)>>,
    start: StateId,
    accepting: Vec<bool>,
    labels: Vec<Vec<StateLabel>>,
}

impl ByteDfa {
    /// Subset construction from `start`, followed by dead-state pruning.
    pub(crate) fn from_nfa(nfa: &Nfa, start: u32) -> Result<Self, FsmError> {
        let mut index: HashMap<Vec<u32>, StateId> = HashMap::new();
        let mut sets: Vec<Vec<u32>> = Vec::new();
        let mut queue = VecDeque::new();
        let mut dfa = ByteDfa { trans: Vec::new(), start: 0, accepting: Vec::new(), labels: Vec::new() };

        let first = closure(nfa, &[start]);
        index.insert(first.clone(), 0);
        sets.push(first);
        queue.push_back(0u32);
        while let Some(id) = queue.pop_front() {
            let set = sets[id as usize].clone();
            let mut bounds: Vec<u16> = vec![0, 256];
            for &s in &set {
                for &(lo, hi, _) in &nfa.states[s as usize].edges {
                    bounds.push(lo as u16);
                    bounds.push(hi as u16 + 1);
                }
            }
            bounds.sort_unstable();
            bounds.dedup();

            let mut ranges: Vec<(u8, u8, StateId)> = Vec::new();
            for w in bounds.windows(2) {
                let (lo, hi) = (w[0], w[1] - 1);
                let mut targets: Vec<u32> = set
                    .iter()
                    .flat_map(|&s| nfa.states[s as usize].edges.iter())
                    .filter(|&&(elo, ehi, _)| elo as u16 <= lo && hi <= ehi as u16)
                    .map(|&(_, _, t)| t)
                    .collect();
                if targets.is_empty() {
                    continue;
                }
                targets.sort_unstable();
                targets.dedup();
                let target_set = closure(nfa, &targets);
                let target = match index.get(&target_set) {
                    Some(&t) => t,
                    None => {
                        let t = sets.len() as StateId;
                        index.insert(target_set.clone(), t);
                        sets.push(target_set);
                        queue.push_back(t);
                        t
                    }
                };
                match ranges.last_mut() {
                    Some(last) if last.2 == target && last.1 as u16 + 1 == lo => last.1 = hi as u8,
                    _ => ranges.push((lo as u8, hi as u8, target)),
                }
            }
            dfa.trans.push(ranges);
        }
        for set in &sets {
            dfa.accepting.push(set.iter().any(|&s| nfa.states[s as usize].accept));
            let mut labels: Vec<StateLabel> =
                set.iter().filter_map(|&s| nfa.states[s as usize].label).collect();
            labels.sort_unstable();
            labels.dedup();
            dfa.labels.push(labels);
        }
        dfa.prune()
    }

    /// Drops states that cannot reach acceptance and states unreachable from
    /// the start, renumbering the rest in breadth-first order.
    pub fn prune(&self) -> Result<Self, FsmError> {
        let n = self.trans.len();
        let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, ranges) in self.trans.iter().enumerate() {
            for &(_, _, t) in ranges {
                rev[t as usize].push(s as StateId);
            }
        }
        let mut live = self.accepting.clone();
        let mut stack: Vec<StateId> = (0..n as StateId).filter(|&s| live[s as usize]).collect();
        while let Some(s) = stack.pop() {
            for &p in &rev[s as usize] {
                if !live[p as usize] {
                    live[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        if !live[self.start as usize] {
            return Err(FsmError::UnsupportedType("grammar accepts no strings".into()));
        }

        let mut renum: Vec<Option<StateId>> = vec![None; n];
        let mut order = vec![self.start];
        renum[self.start as usize] = Some(0);
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            for &(_, _, t) in &self.trans[s as usize] {
                if live[t as usize] && renum[t as usize].is_none() {
                    renum[t as usize] = Some(order.len() as StateId);
                    order.push(t);
                }
            }
            i += 1;
        }
        let trans = order
            .iter()
            .map(|&s| {
                self.trans[s as usize]
                    .iter()
                    .filter_map(|&(lo, hi, t)| renum[t as usize].map(|nt| (lo, hi, nt)))
                    .collect()
            })
            .collect();
        Ok(ByteDfa {
            trans,
            start: 0,
            accepting: order.iter().map(|&s| self.accepting[s as usize]).collect(),
            labels: order.iter().map(|&s| self.labels[s as usize].clone()).collect(),
        })
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn state_count(&self) -> usize {
        self.trans.len()
    }

    /// Number of (state, byte) pairs with a defined transition.
    pub fn transition_count(&self) -> usize {
        self.trans
            .iter()
            .flatten()
            .map(|&(lo, hi, _)| hi as usize - lo as usize + 1)
            .sum()
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.accepting[s as usize]
    }

    pub fn labels(&self, s: StateId) -> &[StateLabel] {
        &self.labels[s as usize]
    }

    pub fn ranges(&self, s: StateId) -> &[(u8, u8, StateId)] {
        &self.trans[s as usize]
    }

    #[inline]
    pub fn next(&self, s: StateId, b: u8) -> Option<StateId> {
        let ranges = &self.trans[s as usize];
        let i = ranges.partition_point(|&(_, hi, _)| hi < b);
        ranges.get(i).filter(|&&(lo, _, _)| lo <= b).map(|&(_, _, t)| t)
    }

    pub fn walk(&self, mut s: StateId, bytes: &[u8]) -> Option<StateId> {
        for &b in bytes {
            s = self.next(s, b)?;
        }
        Some(s)
    }

    pub fn accepts(&self, bytes: &[u8]) -> bool {
        self.walk(self.start, bytes).is_some_and(|s| self.is_accepting(s))
    }

    /// Shortest (then smallest) byte string leading from `s` to acceptance.
    pub fn shortest_completion(&self, s: StateId) -> Option<Vec<u8>> {
        let mut prev: Vec<Option<(StateId, u8)>> = vec![None; self.trans.len()];
        let mut seen = vec![false; self.trans.len()];
        let mut queue = VecDeque::from([s]);
        seen[s as usize] = true;
        while let Some(q) = queue.pop_front() {
            if self.accepting[q as usize] {
                let mut out = Vec::new();
                let mut cur = q;
                while cur != s {
                    let (p, b) = prev[cur as usize].unwrap();
                    out.push(b);
                    cur = p;
                }
                out.reverse();
                return Some(out);
            }
            for &(lo, _, t) in &self.trans[q as usize] {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    prev[t as usize] = Some((q, lo));
                    queue.push_back(t);
                }
            }
        }
        None
    }

    /// All accepted strings of at most `max_len` bytes whose bytes are drawn
    /// from `alphabet`, in lexicographic order. Exponential; for tests.
    pub fn enumerate(&self, alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
        let mut alphabet = alphabet.to_vec();
        alphabet.sort_unstable();
        alphabet.dedup();
        let mut out = Vec::new();
        let mut buf = Vec::new();
        self.enumerate_from(self.start, &alphabet, max_len, &mut buf, &mut out);
        out.sort();
        out
    }

    fn enumerate_from(&self, s: StateId, alphabet: &[u8], left: usize, buf: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if self.is_accepting(s) {
            out.push(buf.clone());
        }
        if left == 0 {
            return;
        }
        for &b in alphabet {
            if let Some(t) = self.next(s, b) {
                buf.push(b);
                self.enumerate_from(t, alphabet, left - 1, buf, out);
                buf.pop();
            }
        }
    }
}

fn closure(nfa: &Nfa, seeds: &[u32]) -> Vec<u32> {
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<u32> = seeds.to_vec();
    let mut out = Vec::new();
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        out.push(s);
        stack.extend(nfa.states[s as usize].eps.iter().copied());
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfa_of(build: impl FnOnce(&mut Nfa) -> super::super::nfa::Frag) -> ByteDfa {
        let mut nfa = Nfa::default();
        let f = build(&mut nfa);
        nfa.states[f.end as usize].accept = true;
        ByteDfa::from_nfa(&nfa, f.start).unwrap()
    }

    #[test]
    fn alternation_is_determinized() {
        let dfa = dfa_of(|n| {
            let a = n.literal(b"ab");
            let b = n.literal(b"ac");
            n.alt(&[a, b])
        });
        assert!(dfa.accepts(b"ab"));
        assert!(dfa.accepts(b"ac"));
        assert!(!dfa.accepts(b"a"));
        // start, after `a`, after `ab`, after `ac`
        assert_eq!(dfa.state_count(), 4);
        assert_eq!(dfa.enumerate(b"abc", 3), vec![b"ab".to_vec(), b"ac".to_vec()]);
    }

    #[test]
    fn ranges_are_merged() {
        let dfa = dfa_of(|n| {
            let d = n.class(&[(b'0', b'4'), (b'5', b'9')]);
            n.star(d)
        });
        assert_eq!(dfa.state_count(), 2);
        assert_eq!(dfa.ranges(0), &[(b'0', b'9', 1)]);
        assert_eq!(dfa.transition_count(), 20);
        assert_eq!(dfa.next(0, b'/'), None);
        assert_eq!(dfa.next(0, b':'), None);
    }

    #[test]
    fn dead_branches_are_pruned() {
        let mut nfa = Nfa::default();
        let good = nfa.literal(b"ok");
        let dead = nfa.literal(b"no");
        let f = nfa.alt(&[good, dead]);
        nfa.states[good.end as usize].accept = true;
        let dfa = ByteDfa::from_nfa(&nfa, f.start).unwrap();
        assert_eq!(dfa.state_count(), 3);
        assert_eq!(dfa.next(0, b'n'), None);
        assert_eq!(dfa.shortest_completion(0), Some(b"ok".to_vec()));
    }

    #[test]
    fn empty_language_is_an_error() {
        let mut nfa = Nfa::default();
        let f = nfa.literal(b"x");
        assert!(ByteDfa::from_nfa(&nfa, f.start).is_err());
    }
}
