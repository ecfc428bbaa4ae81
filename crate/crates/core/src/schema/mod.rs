//! Tool documentation model.
//!
//! A [`ToolInventory`] is the canonical, validated form of machine-readable
//! tool documentation. Both the grammar compiler and the prompt renderer work
//! from this model only, never from the source documents.

mod openapi;
mod simple_json;
pub mod validate;

use std::collections::HashSet;

use thiserror::Error;

pub use simple_json::to_simple_json;
pub use validate::{validate_call_text, ErrorClass, ValidationReport, Verdict};

/// Maximum nesting depth accepted for object/array parameter types.
pub const MAX_NESTING_DEPTH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported feature `{feature}` at {path}")]
    UnsupportedFeature { path: String, feature: String },
    #[error("duplicate name at {path}")]
    DuplicateName { path: String },
    #[error("invalid name {name:?} at {path}")]
    InvalidName { path: String, name: String },
    #[error("example {example:?} at {path} is not a value of the declared type")]
    InvalidExample { path: String, example: String },
}

/// Source document formats understood by [`parse_inventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocFormat {
    SimpleJson,
    OpenApiSubset,
}

impl std::str::FromStr for DocFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple-json" => Ok(DocFormat::SimpleJson),
            "openapi-subset" => Ok(DocFormat::OpenApiSubset),
            other => Err(format!("unknown document format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Enum(Vec<String>),
    Object(Vec<ParamSpec>),
    Array(Box<ParamType>),
}

impl ParamType {
    /// Nesting depth: scalars are 0, each object or array level adds one.
    pub fn depth(&self) -> usize {
        match self {
            ParamType::Object(children) => {
                1 + children.iter().map(|c| c.ty.depth()).max().unwrap_or(0)
            }
            ParamType::Array(elem) => 1 + elem.depth(),
            _ => 0,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::Boolean => "boolean",
            ParamType::Enum(_) => "enum",
            ParamType::Object(_) => "object",
            ParamType::Array(_) => "array",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
    pub example: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSchema {
    pub tool_name: String,
    pub description: String,
    /// Documentation order; this is also the canonical argument order.
    pub params: Vec<ParamSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolInventory {
    pub tools: Vec<ToolSchema>,
}

impl ToolInventory {
    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ToolSchema> {
        self.tools.iter().find(|t| t.tool_name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.tools.iter().position(|t| t.tool_name == name)
    }

    /// Checks every model invariant. Parsers call this before returning, and
    /// programmatically built inventories should too.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = HashSet::new();
        for (i, tool) in self.tools.iter().enumerate() {
            let path = format!("tools[{i}]");
            check_identifier(&path, &tool.tool_name)?;
            if !seen.insert(tool.tool_name.as_str()) {
                return Err(SchemaError::DuplicateName { path: format!("{path}.{}", tool.tool_name) });
            }
            check_params(&format!("{path}.{}", tool.tool_name), &tool.params, 0)?;
        }
        Ok(())
    }
}

/// Parses a tool documentation document into a canonical inventory.
pub fn parse_inventory(document: &[u8], format: DocFormat) -> Result<ToolInventory, SchemaError> {
    let value: serde_json::Value = serde_json::from_slice(document)
        .map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
    let inv = match format {
        DocFormat::SimpleJson => simple_json::from_value(&value)?,
        DocFormat::OpenApiSubset => openapi::from_value(&value)?,
    };
    inv.validate()?;
    Ok(inv)
}

/// Names are restricted so they can be embedded in quoted keys and in the
/// scaffold text without escaping.
pub fn is_identifier(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn check_identifier(path: &str, name: &str) -> Result<(), SchemaError> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(SchemaError::InvalidName { path: path.to_string(), name: name.to_string() })
    }
}

fn check_params(path: &str, params: &[ParamSpec], depth: usize) -> Result<(), SchemaError> {
    let mut seen = HashSet::new();
    for p in params {
        let ppath = format!("{path}.{}", p.name);
        check_identifier(&ppath, &p.name)?;
        if !seen.insert(p.name.as_str()) {
            return Err(SchemaError::DuplicateName { path: ppath });
        }
        check_type(&ppath, &p.ty, depth)?;
        if let Some(example) = &p.example {
            if !validate::is_example_of(&p.ty, example) {
                return Err(SchemaError::InvalidExample { path: ppath, example: example.clone() });
            }
        }
    }
    Ok(())
}

fn check_type(path: &str, ty: &ParamType, depth: usize) -> Result<(), SchemaError> {
    if depth > MAX_NESTING_DEPTH {
        return Err(SchemaError::UnsupportedFeature {
            path: path.to_string(),
            feature: format!("nesting deeper than {MAX_NESTING_DEPTH}"),
        });
    }
    match ty {
        ParamType::Enum(lits) => {
            if lits.is_empty() {
                return Err(SchemaError::MalformedDocument(format!("{path}: empty enum")));
            }
            let mut seen = HashSet::new();
            for lit in lits {
                if !seen.insert(lit.as_str()) {
                    return Err(SchemaError::DuplicateName { path: format!("{path}.enum({lit})") });
                }
                if lit.chars().any(|c| c < ' ' || c == '\u{7f}') {
                    return Err(SchemaError::UnsupportedFeature {
                        path: path.to_string(),
                        feature: "control character in enum literal".into(),
                    });
                }
            }
            Ok(())
        }
        ParamType::Object(children) => {
            if children.is_empty() {
                return Err(SchemaError::UnsupportedFeature {
                    path: path.to_string(),
                    feature: "object without declared properties".into(),
                });
            }
            check_params(path, children, depth + 1)
        }
        ParamType::Array(elem) => check_type(&format!("{path}[]"), elem, depth + 1),
        _ => Ok(()),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn param(name: &str, ty: ParamType, required: bool) -> ParamSpec {
        ParamSpec { name: name.into(), ty, required, description: String::new(), example: None }
    }

    pub fn flight_search() -> ToolSchema {
        ToolSchema {
            tool_name: "flight_search".into(),
            description: "Search for flights".into(),
            params: vec![
                param("from", ParamType::String, true),
                param("to", ParamType::String, true),
                param("adult", ParamType::Integer, true),
                param("type", ParamType::String, false),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLIGHT: &str = r#"[{"tool_name": "flight_search", "description": "Search for flights",
        "params": [
          {"name": "from", "type": "string", "required": true, "description": "Departure airport"},
          {"name": "to", "type": "string", "required": true, "description": "Arrival airport"},
          {"name": "adult", "type": "integer", "required": true, "description": "Number of adults"},
          {"name": "type", "type": "string", "required": false, "description": "Cabin class"}
        ]}]"#;

    #[test]
    fn flight_search_keeps_documented_order() {
        let inv = parse_inventory(FLIGHT.as_bytes(), DocFormat::SimpleJson).unwrap();
        assert_eq!(inv.len(), 1);
        let names: Vec<_> = inv.tools[0].params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["from", "to", "adult", "type"]);
        assert_eq!(inv.tools[0].params[2].ty, ParamType::Integer);
        assert!(!inv.tools[0].params[3].required);
    }

    #[test]
    fn zero_param_tool() {
        let doc = r#"[{"tool_name": "ping", "description": "", "params": []}]"#;
        let inv = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap();
        assert_eq!(inv.len(), 1);
        assert!(inv.tools[0].params.is_empty());
    }

    #[test]
    fn duplicate_sibling_params() {
        let doc = r#"[{"tool_name": "t", "description": "", "params": [
            {"name": "from", "type": "string", "required": true, "description": ""},
            {"name": "from", "type": "string", "required": true, "description": ""}]}]"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateName { .. }), "{err:?}");
    }

    #[test]
    fn duplicate_tool_names() {
        let doc = r#"[{"tool_name": "t", "description": "", "params": []},
                      {"tool_name": "t", "description": "", "params": []}]"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateName { .. }));
    }

    #[test]
    fn malformed_input() {
        let err = parse_inventory(b"[{", DocFormat::SimpleJson).unwrap_err();
        assert!(matches!(err, SchemaError::MalformedDocument(_)));
    }

    #[test]
    fn example_must_match_type() {
        let doc = r#"[{"tool_name": "t", "description": "", "params": [
            {"name": "n", "type": "integer", "required": true, "description": "", "example": "two"}]}]"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap_err();
        assert!(matches!(err, SchemaError::InvalidExample { .. }));

        let doc = r#"[{"tool_name": "t", "description": "", "params": [
            {"name": "n", "type": "integer", "required": true, "description": "", "example": 12}]}]"#;
        let inv = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap();
        assert_eq!(inv.tools[0].params[0].example.as_deref(), Some("12"));
    }

    #[test]
    fn depth_is_recorded() {
        let ty = ParamType::Object(vec![fixtures::param(
            "x",
            ParamType::Array(Box::new(ParamType::Integer)),
            true,
        )]);
        assert_eq!(ty.depth(), 2);
        assert_eq!(ParamType::Boolean.depth(), 0);
    }

    #[test]
    fn rejects_bad_identifiers() {
        let doc = r#"[{"tool_name": "has space", "description": "", "params": []}]"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap_err();
        assert!(matches!(err, SchemaError::InvalidName { .. }));
    }
}
