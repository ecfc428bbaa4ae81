//! The `simple-json` documentation format.
//!
//! ```text
//! [{"tool_name": "...", "description": "...",
//!   "params": [{"name": "...", "type": <type>, "required": true,
//!               "description": "...", "example": "..."}]}]
//! ```
//!
//! where `<type>` is one of `"string"`, `"integer"`, `"number"`, `"boolean"`,
//! `{"enum": [...]}`, `{"object": [<param>...]}` or `{"array": <type>}`.

use serde_json::{json, Map, Value};

use super::{ParamSpec, ParamType, SchemaError, ToolInventory, ToolSchema};

pub(super) fn from_value(value: &Value) -> Result<ToolInventory, SchemaError> {
    let tools = value
        .as_array()
        .ok_or_else(|| malformed("$", "expected a list of tools"))?;
    let tools = tools
        .iter()
        .enumerate()
        .map(|(i, t)| parse_tool(&format!("$[{i}]"), t))
        .collect::<Result<_, _>>()?;
    Ok(ToolInventory { tools })
}

fn malformed(path: &str, msg: &str) -> SchemaError {
    SchemaError::MalformedDocument(format!("{path}: {msg}"))
}

fn object<'a>(path: &str, v: &'a Value) -> Result<&'a Map<String, Value>, SchemaError> {
    v.as_object().ok_or_else(|| malformed(path, "expected an object"))
}

fn check_keys(path: &str, obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), SchemaError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(SchemaError::UnsupportedFeature { path: path.to_string(), feature: k.clone() }),
        None => Ok(()),
    }
}

fn string_field(path: &str, obj: &Map<String, Value>, key: &str, default: Option<&str>) -> Result<String, SchemaError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(malformed(path, &format!("`{key}` must be a string"))),
        None => default
            .map(str::to_string)
            .ok_or_else(|| malformed(path, &format!("missing `{key}`"))),
    }
}

fn parse_tool(path: &str, v: &Value) -> Result<ToolSchema, SchemaError> {
    let obj = object(path, v)?;
    check_keys(path, obj, &["tool_name", "description", "params"])?;
    let tool_name = string_field(path, obj, "tool_name", None)?;
    let description = string_field(path, obj, "description", Some(""))?;
    let params = match obj.get("params") {
        None => Vec::new(),
        Some(p) => parse_params(&format!("{path}.params"), p)?,
    };
    Ok(ToolSchema { tool_name, description, params })
}

fn parse_params(path: &str, v: &Value) -> Result<Vec<ParamSpec>, SchemaError> {
    let list = v.as_array().ok_or_else(|| malformed(path, "expected a list of params"))?;
    list.iter()
        .enumerate()
        .map(|(i, p)| parse_param(&format!("{path}[{i}]"), p))
        .collect()
}

fn parse_param(path: &str, v: &Value) -> Result<ParamSpec, SchemaError> {
    let obj = object(path, v)?;
    check_keys(path, obj, &["name", "type", "required", "description", "example"])?;
    let name = string_field(path, obj, "name", None)?;
    let ty = parse_type(&format!("{path}.type"), obj.get("type").ok_or_else(|| malformed(path, "missing `type`"))?)?;
    let required = match obj.get("required") {
        Some(Value::Bool(b)) => *b,
        None => true,
        Some(_) => return Err(malformed(path, "`required` must be a boolean")),
    };
    let description = string_field(path, obj, "description", Some(""))?;
    let example = match obj.get("example") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => Some(v.to_string()),
        Some(v @ (Value::Array(_) | Value::Object(_))) => Some(v.to_string()),
    };
    Ok(ParamSpec { name, ty, required, description, example })
}

fn parse_type(path: &str, v: &Value) -> Result<ParamType, SchemaError> {
    match v {
        Value::String(s) => match s.as_str() {
            "string" => Ok(ParamType::String),
            "integer" => Ok(ParamType::Integer),
            "number" => Ok(ParamType::Number),
            "boolean" => Ok(ParamType::Boolean),
            other => Err(SchemaError::UnsupportedFeature {
                path: path.to_string(),
                feature: format!("type `{other}`"),
            }),
        },
        Value::Object(obj) if obj.len() == 1 => {
            let (key, inner) = obj.iter().next().unwrap();
            match key.as_str() {
                "enum" => {
                    let lits = inner
                        .as_array()
                        .ok_or_else(|| malformed(path, "`enum` must be a list"))?
                        .iter()
                        .map(|l| match l {
                            Value::String(s) => Ok(s.clone()),
                            _ => Err(malformed(path, "enum literals must be strings")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(ParamType::Enum(lits))
                }
                "object" => Ok(ParamType::Object(parse_params(&format!("{path}.object"), inner)?)),
                "array" => Ok(ParamType::Array(Box::new(parse_type(&format!("{path}.array"), inner)?))),
                other => Err(SchemaError::UnsupportedFeature { path: path.to_string(), feature: other.to_string() }),
            }
        }
        _ => Err(malformed(path, "unrecognized type declaration")),
    }
}

/// Serializes an inventory back into `simple-json`. Parsing the output yields
/// an identical model.
pub fn to_simple_json(inv: &ToolInventory) -> String {
    let tools: Vec<Value> = inv
        .tools
        .iter()
        .map(|t| {
            json!({
                "tool_name": t.tool_name,
                "description": t.description,
                "params": t.params.iter().map(param_value).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(tools)).expect("serializing a json value")
}

fn param_value(p: &ParamSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("name".into(), json!(p.name));
    obj.insert("type".into(), type_value(&p.ty));
    obj.insert("required".into(), json!(p.required));
    obj.insert("description".into(), json!(p.description));
    if let Some(example) = &p.example {
        obj.insert("example".into(), json!(example));
    }
    Value::Object(obj)
}

fn type_value(ty: &ParamType) -> Value {
    match ty {
        ParamType::Enum(lits) => json!({ "enum": lits }),
        ParamType::Object(children) => json!({ "object": children.iter().map(param_value).collect::<Vec<_>>() }),
        ParamType::Array(elem) => json!({ "array": type_value(elem) }),
        scalar => json!(scalar.keyword()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_inventory, DocFormat};
    use super::*;

    #[test]
    fn unknown_keys_are_reported() {
        let doc = r#"[{"tool_name": "t", "params": [
            {"name": "a", "type": "string", "oneOf": []}]}]"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap_err();
        assert_eq!(
            err,
            SchemaError::UnsupportedFeature { path: "$[0].params[0]".into(), feature: "oneOf".into() }
        );
    }

    #[test]
    fn nested_types_round_trip() {
        let doc = r#"[{"tool_name": "book", "description": "Book a trip", "params": [
            {"name": "trip", "type": {"object": [
                {"name": "legs", "type": {"array": {"object": [
                    {"name": "from", "type": "string", "description": "origin"},
                    {"name": "cabin", "type": {"enum": ["economy", "business"]}, "required": false}
                ]}}},
                {"name": "budget", "type": "number", "required": false, "example": 120.5}
            ]}, "required": true, "description": "trip"}]}]"#;
        let inv = parse_inventory(doc.as_bytes(), DocFormat::SimpleJson).unwrap();
        let again = parse_inventory(to_simple_json(&inv).as_bytes(), DocFormat::SimpleJson).unwrap();
        assert_eq!(inv, again);
    }
}
