//! Thompson-style byte NFA builder.

use super::StateLabel;

#[derive(Debug, Clone, Default)]
pub(crate) struct NState {
    pub(crate) eps: Vec<u32>,
    /// Inclusive byte ranges.
    pub(crate) edges: Vec<(u8, u8, u32)>,
    pub(crate) label: Option<StateLabel>,
    pub(crate) accept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Frag {
    pub(crate) start: u32,
    pub(crate) end: u32,
}

#[derive(Debug, Default)]
pub(crate) struct Nfa {
    pub(crate) states: Vec<NState>,
}

impl Nfa {
    pub(crate) fn state(&mut self) -> u32 {
        self.states.push(NState::default());
        (self.states.len() - 1) as u32
    }

    pub(crate) fn eps(&mut self, from: u32, to: u32) {
        self.states[from as usize].eps.push(to);
    }

    pub(crate) fn edge(&mut self, from: u32, lo: u8, hi: u8, to: u32) {
        debug_assert!(lo <= hi);
        self.states[from as usize].edges.push((lo, hi, to));
    }

    pub(crate) fn label(&mut self, s: u32, label: StateLabel) {
        self.states[s as usize].label = Some(label);
    }

    pub(crate) fn empty(&mut self) -> Frag {
        let s = self.state();
        Frag { start: s, end: s }
    }

    pub(crate) fn literal(&mut self, bytes: &[u8]) -> Frag {
        let start = self.state();
        let mut cur = start;
        for &b in bytes {
            let next = self.state();
            self.edge(cur, b, b, next);
            cur = next;
        }
        Frag { start, end: cur }
    }

    pub(crate) fn class(&mut self, ranges: &[(u8, u8)]) -> Frag {
        let start = self.state();
        let end = self.state();
        for &(lo, hi) in ranges {
            self.edge(start, lo, hi, end);
        }
        Frag { start, end }
    }

    /// Sequence of byte classes, one byte each.
    pub(crate) fn classes(&mut self, seq: &[&[(u8, u8)]]) -> Frag {
        let start = self.state();
        let mut cur = start;
        for ranges in seq {
            let next = self.state();
            for &(lo, hi) in *ranges {
                self.edge(cur, lo, hi, next);
            }
            cur = next;
        }
        Frag { start, end: cur }
    }

    pub(crate) fn seq(&mut self, frags: &[Frag]) -> Frag {
        match frags {
            [] => self.empty(),
            [first, rest @ ..] => {
                let mut end = first.end;
                for f in rest {
                    self.eps(end, f.start);
                    end = f.end;
                }
                Frag { start: first.start, end }
            }
        }
    }

    pub(crate) fn alt(&mut self, frags: &[Frag]) -> Frag {
        let start = self.state();
        let end = self.state();
        for f in frags {
            self.eps(start, f.start);
            self.eps(f.end, end);
        }
        Frag { start, end }
    }

    pub(crate) fn opt(&mut self, f: Frag) -> Frag {
        let start = self.state();
        let end = self.state();
        self.eps(start, f.start);
        self.eps(f.end, end);
        self.eps(start, end);
        Frag { start, end }
    }

    pub(crate) fn star(&mut self, f: Frag) -> Frag {
        let hub = self.state();
        self.eps(hub, f.start);
        self.eps(f.end, hub);
        Frag { start: hub, end: hub }
    }
}
