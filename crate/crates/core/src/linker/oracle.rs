//! Reference parser for complete session text.
//!
//! Walks the scaffold segments over the text directly: literals must match,
//! free text runs to the first occurrence of its anchor and must be valid
//! UTF-8, the tool name is the longest run of name characters, and arguments
//! are checked with the argument-level reference parser. It shares no code
//! with the automaton builders.

use super::scaffold::{ScaffoldSpec, Segment};
use crate::schema::validate::{parse_arguments_at, ErrorClass, ValidationReport, Violation};
use crate::schema::ToolInventory;

/// Where the pieces of a valid session text sit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionParse {
    pub tool: usize,
    /// Byte range of the tool name.
    pub name: (usize, usize),
    /// Byte range of the argument text.
    pub args: (usize, usize),
}

pub fn validate_session_text(inv: &ToolInventory, scaffold: &ScaffoldSpec, text: &[u8]) -> ValidationReport {
    parse_session_text(inv, scaffold, text).map(|_| ()).into()
}

pub fn parse_session_text(inv: &ToolInventory, scaffold: &ScaffoldSpec, text: &[u8]) -> Result<SessionParse, Violation> {
    let format = |at: usize, msg: String| Violation::new(ErrorClass::FormatError, at, msg);
    let mut pos = 0usize;
    let mut tool = None;
    let mut name = (0, 0);
    let mut args = (0, 0);
    for seg in scaffold.segments() {
        match seg {
            Segment::Literal(lit) => {
                let lit = lit.as_bytes();
                let have = &text[pos..];
                let common = have.iter().zip(lit).take_while(|(a, b)| a == b).count();
                if common < lit.len() {
                    return Err(format(pos + common, format!("expected {:?}", String::from_utf8_lossy(lit))));
                }
                pos += lit.len();
            }
            Segment::FreeText { anchor } => {
                let anchor = anchor.as_bytes();
                let Some(at) = find(&text[pos..], anchor) else {
                    return Err(format(text.len(), format!("missing {:?}", String::from_utf8_lossy(anchor))));
                };
                if let Err(e) = std::str::from_utf8(&text[pos..pos + at]) {
                    return Err(format(pos + e.valid_up_to(), "free text is not valid UTF-8".into()));
                }
                pos += at + anchor.len();
            }
            Segment::ToolSelect => {
                let len = text[pos..]
                    .iter()
                    .take_while(|&&b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
                    .count();
                let n = std::str::from_utf8(&text[pos..pos + len]).expect("ascii");
                let Some(i) = inv.position(n) else {
                    return Err(Violation::new(ErrorClass::NameError, pos, format!("no tool named {n:?}")));
                };
                tool = Some(i);
                name = (pos, pos + len);
                pos += len;
            }
            Segment::ArgObject | Segment::ArgList => {
                let i = tool.expect("arguments follow tool selection");
                let end = parse_arguments_at(&inv.tools[i].params, text, pos, scaffold.arg_style())?;
                args = (pos, end);
                pos = end;
            }
            Segment::Terminal => {
                if pos != text.len() {
                    return Err(format(pos, "text after the end of the call".into()));
                }
            }
        }
    }
    Ok(SessionParse { tool: tool.expect("scaffold has a tool segment"), name, args })
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::{flight_search, param};
    use crate::schema::{ParamType, ToolSchema};

    fn inventory() -> ToolInventory {
        let ping = ToolSchema { tool_name: "ping".into(), description: String::new(), params: vec![] };
        let add = ToolSchema {
            tool_name: "add".into(),
            description: String::new(),
            params: vec![param("a", ParamType::Integer, true), param("b", ParamType::Integer, false)],
        };
        ToolInventory { tools: vec![flight_search(), ping, add] }
    }

    fn check(scaffold: &ScaffoldSpec, text: &str) -> ValidationReport {
        validate_session_text(&inventory(), scaffold, text.as_bytes())
    }

    #[test]
    fn react_valid() {
        let s = ScaffoldSpec::react();
        let text = "Thought: need flights\nAction: flight_search\nAction Input: {\"from\": \"LAX\", \"to\": \"JFK\", \"adult\": 2}\n";
        assert!(check(&s, text).is_valid());
        let p = parse_session_text(&inventory(), &s, text.as_bytes()).unwrap();
        assert_eq!(p.tool, 0);
        assert_eq!(&text[p.name.0..p.name.1], "flight_search");
        assert!(check(&s, "Thought: \nAction: ping\nAction Input: {}\n").is_valid());
    }

    #[test]
    fn react_errors() {
        let s = ScaffoldSpec::react();
        let r = check(&s, "Thought: hm\nAction: fly\nAction Input: {}\n");
        assert_eq!((r.class(), r.offset()), (Some(ErrorClass::NameError), Some(20)));
        let r = check(&s, "Thought: hm\nAction: ping\nAction Input: {\n");
        assert_eq!(r.class(), Some(ErrorClass::FormatError));
        let r = check(&s, "Thought: hm\nAction: add\nAction Input: {\"a\": \"x\"}\n");
        assert_eq!(r.class(), Some(ErrorClass::ArgumentError));
        let r = check(&s, "Thought: no action here");
        assert_eq!((r.class(), r.offset()), (Some(ErrorClass::FormatError), Some(23)));
        let r = check(&s, "Thought: hm\nAction: ping\nAction Input: {}\nmore");
        assert_eq!((r.class(), r.offset()), (Some(ErrorClass::FormatError), Some(42)));
        let r = validate_session_text(&inventory(), &s, b"Thought: \xff\nAction: ping\nAction Input: {}\n");
        assert_eq!((r.class(), r.offset()), (Some(ErrorClass::FormatError), Some(9)));
        let r = check(&s, "Thinking: hm");
        assert_eq!((r.class(), r.offset()), (Some(ErrorClass::FormatError), Some(2)));
    }

    #[test]
    fn free_text_ends_at_first_anchor() {
        let s = ScaffoldSpec::react();
        let r = check(&s, "Thought: a\nAction: b\nAction: ping\nAction Input: {}\n");
        assert_eq!(r.class(), Some(ErrorClass::NameError));
    }

    #[test]
    fn bare_call() {
        let s = ScaffoldSpec::bare_call();
        assert!(check(&s, "add(1)").is_valid());
        assert!(check(&s, "add(1, 2)").is_valid());
        assert!(check(&s, "ping()").is_valid());
        assert_eq!(check(&s, "add()").class(), Some(ErrorClass::ArgumentError));
        assert_eq!(check(&s, "sub(1)").class(), Some(ErrorClass::NameError));
        assert_eq!(check(&s, "add(1").class(), Some(ErrorClass::FormatError));
    }
}
