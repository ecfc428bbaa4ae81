//! Byte-level grammars of parameter values and argument lists.
//!
//! The value languages mirror the call validator exactly: strings with the
//! two escapes `\"` and `\\` and valid UTF-8 content, integers without
//! leading zeros, decimal numbers with optional fraction and exponent, and
//! structural recursion for objects and arrays. One optional space may follow
//! each `:` and `,`.

use super::dfa::ByteDfa;
use super::nfa::{Frag, Nfa};
use super::{FsmError, StateLabel};
use crate::schema::validate::ArgStyle;
use crate::schema::{ParamSpec, ParamType, ToolSchema, MAX_NESTING_DEPTH};

const CONT: (u8, u8) = (0x80, 0xBF);

/// Accepted language of a single value of type `t`.
pub fn build_value_dfa(t: &ParamType) -> Result<ByteDfa, FsmError> {
    finish(|nfa| value(nfa, t, 0))
}

/// `"<name>":` followed by an optional space and a value of the parameter's
/// type.
pub fn build_param_machine(p: &ParamSpec) -> Result<ByteDfa, FsmError> {
    finish(|nfa| member(nfa, p, 0))
}

/// The complete argument object of `schema`: parameters in documentation
/// order, optional ones skippable, separated by `,`.
pub fn build_tool_call_dfa(schema: &ToolSchema) -> Result<ByteDfa, FsmError> {
    finish(|nfa| object(nfa, &schema.params, 0))
}

pub(crate) fn finish(build: impl FnOnce(&mut Nfa) -> Result<Frag, FsmError>) -> Result<ByteDfa, FsmError> {
    let mut nfa = Nfa::default();
    let f = build(&mut nfa)?;
    nfa.states[f.end as usize].accept = true;
    ByteDfa::from_nfa(&nfa, f.start)
}

pub(crate) fn arguments(nfa: &mut Nfa, params: &[ParamSpec], style: ArgStyle) -> Result<Frag, FsmError> {
    match style {
        ArgStyle::Object => object(nfa, params, 0),
        ArgStyle::Positional => positional(nfa, params),
    }
}

fn value(nfa: &mut Nfa, t: &ParamType, depth: usize) -> Result<Frag, FsmError> {
    if depth > MAX_NESTING_DEPTH {
        return Err(FsmError::UnsupportedType(format!("nesting deeper than {MAX_NESTING_DEPTH}")));
    }
    match t {
        ParamType::String => Ok(string(nfa)),
        ParamType::Integer => Ok(integer(nfa)),
        ParamType::Number => Ok(number(nfa)),
        ParamType::Boolean => {
            let t = nfa.literal(b"true");
            let f = nfa.literal(b"false");
            Ok(nfa.alt(&[t, f]))
        }
        ParamType::Enum(lits) => {
            if lits.is_empty() {
                return Err(FsmError::UnsupportedType("empty enum".into()));
            }
            let mut alts = Vec::with_capacity(lits.len());
            for lit in lits {
                if lit.bytes().any(|b| b < 0x20 || b == 0x7f) {
                    return Err(FsmError::UnsupportedType(format!("control byte in enum literal {lit:?}")));
                }
                alts.push(nfa.literal(&quote(lit)));
            }
            Ok(nfa.alt(&alts))
        }
        ParamType::Object(children) => {
            if children.is_empty() {
                return Err(FsmError::UnsupportedType("object without properties".into()));
            }
            object(nfa, children, depth + 1)
        }
        ParamType::Array(elem) => {
            let open = nfa.literal(b"[");
            let first = value(nfa, elem, depth + 1)?;
            let sep = separator(nfa);
            let next = value(nfa, elem, depth + 1)?;
            let more = nfa.seq(&[sep, next]);
            let more = nfa.star(more);
            let items = nfa.seq(&[first, more]);
            let items = nfa.opt(items);
            let close = nfa.literal(b"]");
            Ok(nfa.seq(&[open, items, close]))
        }
    }
}

/// JSON-style quoting with the two supported escapes.
pub fn quote(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len() + 2);
    out.push(b'"');
    for b in s.bytes() {
        if b == b'"' || b == b'\\' {
            out.push(b'\\');
        }
        out.push(b);
    }
    out.push(b'"');
    out
}

fn string(nfa: &mut Nfa) -> Frag {
    let plain = nfa.class(&[(0x20, 0x21), (0x23, 0x5B), (0x5D, 0x7E)]);
    let escape = nfa.classes(&[&[(b'\\', b'\\')], &[(b'"', b'"'), (b'\\', b'\\')]]);
    let mut alts = vec![plain, escape];
    alts.extend(utf8_multibyte(nfa));
    let ch = nfa.alt(&alts);
    let body = nfa.star(ch);
    let open = nfa.literal(b"\"");
    let close = nfa.literal(b"\"");
    nfa.seq(&[open, body, close])
}

/// Well-formed UTF-8 sequences of two to four bytes.
fn utf8_multibyte(nfa: &mut Nfa) -> Vec<Frag> {
    vec![
        nfa.classes(&[&[(0xC2, 0xDF)], &[CONT]]),
        nfa.classes(&[&[(0xE0, 0xE0)], &[(0xA0, 0xBF)], &[CONT]]),
        nfa.classes(&[&[(0xE1, 0xEC), (0xEE, 0xEF)], &[CONT], &[CONT]]),
        nfa.classes(&[&[(0xED, 0xED)], &[(0x80, 0x9F)], &[CONT]]),
        nfa.classes(&[&[(0xF0, 0xF0)], &[(0x90, 0xBF)], &[CONT], &[CONT]]),
        nfa.classes(&[&[(0xF1, 0xF3)], &[CONT], &[CONT], &[CONT]]),
        nfa.classes(&[&[(0xF4, 0xF4)], &[(0x80, 0x8F)], &[CONT], &[CONT]]),
    ]
}

fn digits(nfa: &mut Nfa) -> Frag {
    let d = nfa.class(&[(b'0', b'9')]);
    let rest = nfa.class(&[(b'0', b'9')]);
    let rest = nfa.star(rest);
    nfa.seq(&[d, rest])
}

fn integer(nfa: &mut Nfa) -> Frag {
    let minus = nfa.literal(b"-");
    let minus = nfa.opt(minus);
    let zero = nfa.literal(b"0");
    let lead = nfa.class(&[(b'1', b'9')]);
    let tail = nfa.class(&[(b'0', b'9')]);
    let tail = nfa.star(tail);
    let nonzero = nfa.seq(&[lead, tail]);
    let magnitude = nfa.alt(&[zero, nonzero]);
    nfa.seq(&[minus, magnitude])
}

fn number(nfa: &mut Nfa) -> Frag {
    let int = integer(nfa);
    let dot = nfa.literal(b".");
    let frac_digits = digits(nfa);
    let frac = nfa.seq(&[dot, frac_digits]);
    let frac = nfa.opt(frac);
    let e = nfa.class(&[(b'e', b'e'), (b'E', b'E')]);
    let sign = nfa.class(&[(b'+', b'+'), (b'-', b'-')]);
    let sign = nfa.opt(sign);
    let exp_digits = digits(nfa);
    let exp = nfa.seq(&[e, sign, exp_digits]);
    let exp = nfa.opt(exp);
    nfa.seq(&[int, frac, exp])
}

fn optional_space(nfa: &mut Nfa) -> Frag {
    let sp = nfa.literal(b" ");
    nfa.opt(sp)
}

fn separator(nfa: &mut Nfa) -> Frag {
    let comma = nfa.literal(b",");
    let sp = optional_space(nfa);
    nfa.seq(&[comma, sp])
}

fn member(nfa: &mut Nfa, p: &ParamSpec, depth: usize) -> Result<Frag, FsmError> {
    let mut key = quote(&p.name);
    key.push(b':');
    let key = nfa.literal(&key);
    let sp = optional_space(nfa);
    let v = value(nfa, &p.ty, depth)?;
    Ok(nfa.seq(&[key, sp, v]))
}

/// `{` members `}`. Two spines of states track whether any member has been
/// written yet, so separators appear only between present members and each
/// optional member gets a skip edge.
fn object(nfa: &mut Nfa, params: &[ParamSpec], depth: usize) -> Result<Frag, FsmError> {
    let open = nfa.literal(b"{");
    let mut none_yet = open.end;
    let mut some: Option<u32> = None;
    for p in params {
        let join = nfa.state();
        nfa.eps(none_yet, join);
        if let Some(s) = some {
            let sep = separator(nfa);
            nfa.eps(s, sep.start);
            nfa.eps(sep.end, join);
        }
        let m = member(nfa, p, depth)?;
        nfa.eps(join, m.start);
        let after = nfa.state();
        nfa.eps(m.end, after);
        if !p.required {
            let skip = nfa.state();
            nfa.eps(none_yet, skip);
            none_yet = skip;
            if let Some(s) = some {
                nfa.eps(s, after);
            }
        } else {
            none_yet = nfa.state();
        }
        some = Some(after);
    }
    let close = nfa.literal(b"}");
    nfa.eps(none_yet, close.start);
    if let Some(s) = some {
        nfa.eps(s, close.start);
    }
    Ok(Frag { start: open.start, end: close.end })
}

/// Comma-separated values in documentation order; the list may stop after
/// any prefix that covers every required parameter.
fn positional(nfa: &mut Nfa, params: &[ParamSpec]) -> Result<Frag, FsmError> {
    let min = params.iter().rposition(|p| p.required).map_or(0, |i| i + 1);
    let start = nfa.state();
    let end = nfa.state();
    let mut cur = start;
    for (k, p) in params.iter().enumerate() {
        if k >= min {
            nfa.eps(cur, end);
        }
        let v = value(nfa, &p.ty, 0)?;
        if k == 0 {
            nfa.eps(cur, v.start);
        } else {
            let sep = separator(nfa);
            nfa.eps(cur, sep.start);
            nfa.eps(sep.end, v.start);
        }
        cur = v.end;
    }
    nfa.eps(cur, end);
    Ok(Frag { start, end })
}

/// Free text terminated by the first occurrence of `anchor`. The text must be
/// valid UTF-8. States are labelled with the anchor progress.
pub(crate) fn free_text(nfa: &mut Nfa, anchor: &[u8], phase: u16) -> Frag {
    debug_assert!(!anchor.is_empty());
    let len = anchor.len();
    // KMP failure function.
    let mut fail = vec![0usize; len];
    let mut k = 0;
    for i in 1..len {
        while k > 0 && anchor[i] != anchor[k] {
            k = fail[k - 1];
        }
        if anchor[i] == anchor[k] {
            k += 1;
        }
        fail[i] = k;
    }
    let kmp = |mut q: usize, b: u8| loop {
        if anchor[q] == b {
            break q + 1;
        }
        if q == 0 {
            break 0;
        }
        q = fail[q - 1];
    };

    let mut ids: std::collections::HashMap<(usize, Utf8), u32> = std::collections::HashMap::new();
    let end = nfa.state();
    let start = nfa.state();
    nfa.label(start, StateLabel::FreeText { phase, progress: 0 });
    ids.insert((0, Utf8::Boundary), start);
    let mut queue = std::collections::VecDeque::from([(0usize, Utf8::Boundary)]);
    while let Some((q, u)) = queue.pop_front() {
        let from = ids[&(q, u)];
        for b in 0..=255u8 {
            let Some(u2) = u.step(b) else { continue };
            let q2 = kmp(q, b);
            let to = if q2 == len {
                end
            } else {
                *ids.entry((q2, u2)).or_insert_with(|| {
                    let s = nfa.state();
                    nfa.label(s, StateLabel::FreeText { phase, progress: q2 as u16 });
                    queue.push_back((q2, u2));
                    s
                })
            };
            match nfa.states[from as usize].edges.last_mut() {
                Some(last) if last.2 == to && last.1 as u16 + 1 == b as u16 => last.1 = b,
                _ => nfa.edge(from, b, b, to),
            }
        }
    }
    Frag { start, end }
}

/// UTF-8 validation state: what the next byte must be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Utf8 {
    Boundary,
    Cont(u8),
    /// Second byte after E0, ED, F0 or F4 has a narrowed range.
    Narrow { lo: u8, hi: u8, then: u8 },
}

impl Utf8 {
    fn step(self, b: u8) -> Option<Utf8> {
        match self {
            Utf8::Boundary => match b {
                0x00..=0x7F => Some(Utf8::Boundary),
                0xC2..=0xDF => Some(Utf8::Cont(1)),
                0xE0 => Some(Utf8::Narrow { lo: 0xA0, hi: 0xBF, then: 1 }),
                0xED => Some(Utf8::Narrow { lo: 0x80, hi: 0x9F, then: 1 }),
                0xE1..=0xEC | 0xEE..=0xEF => Some(Utf8::Cont(2)),
                0xF0 => Some(Utf8::Narrow { lo: 0x90, hi: 0xBF, then: 2 }),
                0xF1..=0xF3 => Some(Utf8::Cont(3)),
                0xF4 => Some(Utf8::Narrow { lo: 0x80, hi: 0x8F, then: 2 }),
                _ => None,
            },
            Utf8::Cont(n) => (0x80..=0xBF).contains(&b).then(|| if n == 1 { Utf8::Boundary } else { Utf8::Cont(n - 1) }),
            Utf8::Narrow { lo, hi, then } => (lo..=hi).contains(&b).then_some(Utf8::Cont(then)),
        }
    }
}
