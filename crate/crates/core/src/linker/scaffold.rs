use serde_json::{json, Map, Value};

use super::LinkError;
use crate::schema::validate::ArgStyle;

/// One piece of the generation template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    /// Fixed text the model is forced to emit.
    Literal(String),
    /// Unconstrained UTF-8 text ending at the first occurrence of `anchor`
    /// (the anchor is part of the emitted text).
    FreeText { anchor: String },
    /// The name of one inventory tool.
    ToolSelect,
    /// The selected tool's arguments as an object.
    ArgObject,
    /// The selected tool's arguments as a bare comma-separated value list.
    ArgList,
    /// End of generation.
    Terminal,
}

/// Ordered segments describing the full text a session must produce.
///
/// Rules: exactly one `ToolSelect`, directly followed by a non-empty
/// `Literal` (the name terminator) and then exactly one argument segment;
/// `Terminal` exactly once, as the last segment; every `FreeText` anchor is
/// non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaffoldSpec {
    segments: Vec<Segment>,
    select: usize,
}

/// Bytes that could extend a bare value, so may not directly follow one.
fn continues_value(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b',' | b' ' | b'.' | b'+' | b'-' | b'"' | b'[' | b'{')
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-')
}

impl ScaffoldSpec {
    pub fn new(segments: Vec<Segment>) -> Result<Self, LinkError> {
        let bad = |msg: &str| Err(LinkError::InvalidScaffold(msg.to_string()));
        let selects: Vec<usize> = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Segment::ToolSelect)
            .map(|(i, _)| i)
            .collect();
        let [select] = selects[..] else {
            return bad("scaffold needs exactly one tool_select segment");
        };
        match segments.get(select + 1) {
            Some(Segment::Literal(t)) if !t.is_empty() => {
                if is_name_byte(t.as_bytes()[0]) {
                    return bad("name terminator must not start with a tool-name character");
                }
            }
            _ => return bad("tool_select must be followed by a non-empty literal name terminator"),
        }
        if !matches!(segments.get(select + 2), Some(Segment::ArgObject | Segment::ArgList)) {
            return bad("name terminator must be followed by arg_object or arg_list");
        }
        let arg_segments = segments.iter().filter(|s| matches!(s, Segment::ArgObject | Segment::ArgList)).count();
        if arg_segments != 1 {
            return bad("scaffold needs exactly one argument segment");
        }
        let terminals = segments.iter().filter(|s| **s == Segment::Terminal).count();
        if terminals != 1 || segments.last() != Some(&Segment::Terminal) {
            return bad("terminal must appear exactly once, as the last segment");
        }
        if segments.iter().any(|s| matches!(s, Segment::FreeText { anchor } if anchor.is_empty())) {
            return bad("free_text_until anchor must be non-empty");
        }
        if segments.iter().filter(|s| matches!(s, Segment::FreeText { .. })).count() > u16::MAX as usize {
            return bad("too many free-text segments");
        }
        if segments[select + 2] == Segment::ArgList {
            let follow = segments[select + 3..]
                .iter()
                .find(|s| !matches!(s, Segment::Literal(t) if t.is_empty()));
            match follow {
                Some(Segment::Terminal) => {}
                Some(Segment::Literal(t)) if !continues_value(t.as_bytes()[0]) => {}
                _ => return bad("arg_list must be followed by terminal or a literal that cannot continue a value"),
            }
        }
        Ok(ScaffoldSpec { segments, select })
    }

    /// `Thought: <text>\nAction: <tool>\nAction Input: <object>\n`
    pub fn react() -> Self {
        ScaffoldSpec::new(vec![
            Segment::Literal("Thought: ".into()),
            Segment::FreeText { anchor: "\nAction: ".into() },
            Segment::ToolSelect,
            Segment::Literal("\nAction Input: ".into()),
            Segment::ArgObject,
            Segment::Literal("\n".into()),
            Segment::Terminal,
        ])
        .expect("built-in scaffold")
    }

    /// `<tool>(<value>, ...)`
    pub fn bare_call() -> Self {
        ScaffoldSpec::new(vec![
            Segment::Literal(String::new()),
            Segment::ToolSelect,
            Segment::Literal("(".into()),
            Segment::ArgList,
            Segment::Literal(")".into()),
            Segment::Terminal,
        ])
        .expect("built-in scaffold")
    }

    /// Built-in scaffold by name: `react` or `bare-call`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "react" => Some(Self::react()),
            "bare-call" => Some(Self::bare_call()),
            _ => None,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn select_index(&self) -> usize {
        self.select
    }

    pub fn name_terminator(&self) -> &[u8] {
        match &self.segments[self.select + 1] {
            Segment::Literal(t) => t.as_bytes(),
            _ => unreachable!("checked in new"),
        }
    }

    pub fn arg_style(&self) -> ArgStyle {
        match self.segments[self.select + 2] {
            Segment::ArgList => ArgStyle::Positional,
            _ => ArgStyle::Object,
        }
    }

    pub fn from_json(document: &[u8]) -> Result<Self, LinkError> {
        let value: Value =
            serde_json::from_slice(document).map_err(|e| LinkError::InvalidScaffold(e.to_string()))?;
        let Value::Array(items) = value else {
            return Err(LinkError::InvalidScaffold("scaffold must be a list of segments".into()));
        };
        let mut segments = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let bad = |msg: &str| LinkError::InvalidScaffold(format!("segment {i}: {msg}"));
            let obj = item.as_object().filter(|o| o.len() == 1).ok_or_else(|| bad("expected an object with one key"))?;
            let (key, v) = obj.iter().next().unwrap();
            let flag = || match v {
                Value::Bool(true) => Ok(()),
                _ => Err(bad("flag segments take the value true")),
            };
            let text = || v.as_str().map(str::to_string).ok_or_else(|| bad("expected a string"));
            segments.push(match key.as_str() {
                "literal" => Segment::Literal(text()?),
                "free_text_until" => Segment::FreeText { anchor: text()? },
                "tool_select" => flag().map(|()| Segment::ToolSelect)?,
                "arg_object" => flag().map(|()| Segment::ArgObject)?,
                "arg_list" => flag().map(|()| Segment::ArgList)?,
                "terminal" => flag().map(|()| Segment::Terminal)?,
                other => return Err(bad(&format!("unknown segment kind `{other}`"))),
            });
        }
        ScaffoldSpec::new(segments)
    }

    pub fn to_json(&self) -> String {
        let items: Vec<Value> = self
            .segments
            .iter()
            .map(|s| {
                let (k, v) = match s {
                    Segment::Literal(t) => ("literal", json!(t)),
                    Segment::FreeText { anchor } => ("free_text_until", json!(anchor)),
                    Segment::ToolSelect => ("tool_select", json!(true)),
                    Segment::ArgObject => ("arg_object", json!(true)),
                    Segment::ArgList => ("arg_list", json!(true)),
                    Segment::Terminal => ("terminal", json!(true)),
                };
                let mut m = Map::new();
                m.insert(k.to_string(), v);
                Value::Object(m)
            })
            .collect();
        serde_json::to_string(&items).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn react_round_trips_through_json() {
        let doc = r#"[{"literal": "Thought: "}, {"free_text_until": "\nAction: "}, {"tool_select": true},
            {"literal": "\nAction Input: "}, {"arg_object": true}, {"literal": "\n"}, {"terminal": true}]"#;
        let s = ScaffoldSpec::from_json(doc.as_bytes()).unwrap();
        assert_eq!(s, ScaffoldSpec::react());
        assert_eq!(ScaffoldSpec::from_json(s.to_json().as_bytes()).unwrap(), s);
        assert_eq!(s.name_terminator(), b"\nAction Input: ");
        assert_eq!(s.arg_style(), ArgStyle::Object);
    }

    #[test]
    fn bare_call_is_positional() {
        let s = ScaffoldSpec::bare_call();
        assert_eq!(s.name_terminator(), b"(");
        assert_eq!(s.arg_style(), ArgStyle::Positional);
    }

    #[test]
    fn structural_rules() {
        use Segment::*;
        let lit = |t: &str| Literal(t.into());
        let cases = vec![
            vec![ToolSelect, ArgObject, Terminal],
            vec![ToolSelect, lit("x"), ArgObject, Terminal],
            vec![ToolSelect, lit(" "), ArgObject],
            vec![ToolSelect, lit(" "), ArgObject, Terminal, Terminal],
            vec![ToolSelect, lit(" "), ArgObject, ArgObject, Terminal],
            vec![FreeText { anchor: String::new() }, ToolSelect, lit(" "), ArgObject, Terminal],
            vec![ToolSelect, lit("("), ArgList, lit(", "), Terminal],
            vec![ToolSelect, lit("("), ArgList, lit("1"), Terminal],
        ];
        for segs in cases {
            assert!(ScaffoldSpec::new(segs.clone()).is_err(), "{segs:?}");
        }
        assert!(ScaffoldSpec::new(vec![ToolSelect, lit(" "), ArgObject, Terminal]).is_ok());
        assert!(ScaffoldSpec::new(vec![ToolSelect, lit("("), ArgList, lit(""), Terminal]).is_ok());
    }

    #[test]
    fn json_errors() {
        for doc in [r#"{}"#, r#"[{"literal": 3}]"#, r#"[{"tool_select": false}]"#, r#"[{"bogus": true}]"#, "nope"] {
            assert!(ScaffoldSpec::from_json(doc.as_bytes()).is_err(), "{doc}");
        }
    }
}
