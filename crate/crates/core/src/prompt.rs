//! Tool documentation for the prompt.
//!
//! Once the automaton enforces call syntax, the prompt only needs to say
//! what each tool and parameter is for. [`render_compressed`] writes a
//! numbered plain-text list with one line per parameter and no types or
//! braces; [`render_raw`] writes the conventional JSON-schema form for
//! comparison.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::schema::{ParamSpec, ParamType, ToolInventory, ToolSchema};
use crate::vocab::{VocabError, Vocabulary};

pub fn render_compressed(inv: &ToolInventory) -> String {
    let mut out = String::new();
    for (i, tool) in inv.tools.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_entry(i + 1, tool));
    }
    out
}

fn render_entry(number: usize, tool: &ToolSchema) -> String {
    let mut out = format!("{number}. {}\n\n", tool.tool_name);
    let desc = first_sentence(&tool.description);
    if !desc.is_empty() {
        let stop = if desc.ends_with(['!', '?']) { "" } else { "." };
        let _ = writeln!(out, "   Description: {desc}{stop}");
    }
    if tool.params.is_empty() {
        out.push_str("   Parameters: (none)\n");
    } else {
        out.push_str("   Parameters:\n");
        for p in &tool.params {
            param_lines(&mut out, "", p);
        }
    }
    out
}

fn param_lines(out: &mut String, parent: &str, p: &ParamSpec) {
    let path = if parent.is_empty() { p.name.clone() } else { format!("{parent}.{}", p.name) };
    let mut line = format!("   - {path}");
    let desc = first_sentence(&p.description);
    if !desc.is_empty() {
        let _ = write!(line, ": {desc}");
    }
    if !p.required {
        line.push_str(" (Optional)");
    }
    if let Some(ex) = &p.example {
        let _ = write!(line, " (Example: {ex})");
    }
    let _ = writeln!(out, "{line}.");
    let mut ty = &p.ty;
    while let ParamType::Array(elem) = ty {
        ty = elem;
    }
    if let ParamType::Object(children) = ty {
        for c in children {
            param_lines(out, &path, c);
        }
    }
}

/// Leading sentence of `text` without its final period. A sentence ends at
/// `.`, `!` or `?` followed by whitespace and an uppercase letter, or at a
/// line break.
fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    let bytes = text.as_bytes();
    let mut end = text.find('\n').unwrap_or(text.len());
    for (i, &b) in bytes.iter().enumerate().take(end) {
        if matches!(b, b'.' | b'!' | b'?')
            && bytes.get(i + 1).is_some_and(|c| c.is_ascii_whitespace())
            && bytes.get(i + 2).is_some_and(|c| c.is_ascii_uppercase())
        {
            end = if b == b'.' { i } else { i + 1 };
            break;
        }
    }
    text[..end].trim_end().trim_end_matches('.')
}

/// JSON-schema rendering of one tool in the style of public tool-use
/// benchmarks: type names, required/optional lists and example values.
pub fn render_raw_tool(tool: &ToolSchema) -> String {
    let v = json!({
        "name": tool.tool_name,
        "description": tool.description,
        "parameters": object_schema(&tool.params, true),
    });
    spaced_json(&v)
}

pub fn render_raw(inv: &ToolInventory) -> String {
    let tools: Vec<String> = inv.tools.iter().map(render_raw_tool).collect();
    format!("[{}]", tools.join(", "))
}

fn object_schema(params: &[ParamSpec], top: bool) -> Value {
    let mut props = Map::new();
    for p in params {
        let mut s = type_schema(&p.ty);
        if let Value::Object(m) = &mut s {
            m.insert("description".into(), json!(p.description));
            if let Some(ex) = &p.example {
                m.insert("example_value".into(), json!(ex));
            }
        }
        props.insert(p.name.clone(), s);
    }
    let required: Vec<&str> = params.iter().filter(|p| p.required).map(|p| p.name.as_str()).collect();
    let mut m = Map::new();
    m.insert("type".into(), json!("object"));
    m.insert("properties".into(), Value::Object(props));
    m.insert("required".into(), json!(required));
    if top {
        let optional: Vec<&str> = params.iter().filter(|p| !p.required).map(|p| p.name.as_str()).collect();
        m.insert("optional".into(), json!(optional));
    }
    Value::Object(m)
}

fn type_schema(ty: &ParamType) -> Value {
    match ty {
        ParamType::Enum(lits) => json!({"type": "string", "enum": lits}),
        ParamType::Object(children) => object_schema(children, false),
        ParamType::Array(elem) => json!({"type": "array", "items": type_schema(elem)}),
        other => json!({"type": other.keyword()}),
    }
}

/// Single-line JSON with a space after every `:` and `,`.
fn spaced_json(v: &Value) -> String {
    struct Spaced;
    impl serde_json::ser::Formatter for Spaced {
        fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            if first {
                Ok(())
            } else {
                w.write_all(b", ")
            }
        }
        fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            if first {
                Ok(())
            } else {
                w.write_all(b", ")
            }
        }
        fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            w.write_all(b": ")
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Spaced);
    v.serialize(&mut ser).expect("in-memory write");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolTokenCount {
    pub tool_name: String,
    pub raw: usize,
    pub compressed: usize,
}

impl ToolTokenCount {
    pub fn ratio(&self) -> f64 {
        if self.raw == 0 {
            0.0
        } else {
            self.compressed as f64 / self.raw as f64
        }
    }
}

/// Compressed prompt text with per-tool token counts for both renderings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressedPrompt {
    pub text: String,
    pub per_tool: Vec<ToolTokenCount>,
}

impl CompressedPrompt {
    pub fn mean_raw(&self) -> f64 {
        mean(self.per_tool.iter().map(|c| c.raw))
    }

    pub fn mean_compressed(&self) -> f64 {
        mean(self.per_tool.iter().map(|c| c.compressed))
    }

    /// Mean compressed count over mean raw count.
    pub fn ratio(&self) -> f64 {
        let raw = self.mean_raw();
        if raw == 0.0 {
            0.0
        } else {
            self.mean_compressed() / raw
        }
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("tool_name\traw_tokens\tcompressed_tokens\tratio\n");
        for c in &self.per_tool {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.4}", c.tool_name, c.raw, c.compressed, c.ratio());
        }
        out
    }
}

fn mean(xs: impl ExactSizeIterator<Item = usize>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<usize>() as f64 / n as f64
    }
}

/// Token counts under `v`'s greedy tokenizer.
pub fn token_stats(inv: &ToolInventory, v: &Vocabulary) -> Result<CompressedPrompt, VocabError> {
    let per_tool = inv
        .tools
        .iter()
        .enumerate()
        .map(|(i, tool)| {
            Ok(ToolTokenCount {
                tool_name: tool.tool_name.clone(),
                raw: v.tokenize_greedy(render_raw_tool(tool).as_bytes())?.len(),
                compressed: v.tokenize_greedy(render_entry(i + 1, tool).as_bytes())?.len(),
            })
        })
        .collect::<Result<_, VocabError>>()?;
    Ok(CompressedPrompt { text: render_compressed(inv), per_tool })
}
