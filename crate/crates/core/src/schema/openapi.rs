//! A restricted reader for OpenAPI 3 documents.
//!
//! Every operation under `paths` with an `operationId` becomes one tool. Its
//! parameters are the path-level and operation-level `parameters` followed by
//! the properties of an `application/json` request body. Schemas may use
//! `$ref` into `components/schemas` and `components/parameters`. Keywords
//! outside the supported subset are reported as `UnsupportedFeature`.

use serde_json::{Map, Value};

use super::{ParamSpec, ParamType, SchemaError, ToolInventory, ToolSchema};

const METHODS: [&str; 7] = ["get", "put", "post", "delete", "options", "head", "patch"];
const SCHEMA_KEYS: [&str; 11] = [
    "type", "description", "enum", "properties", "required", "items", "example", "format", "title",
    "default", "$ref",
];
const PARAM_KEYS: [&str; 7] = ["name", "in", "required", "description", "schema", "example", "$ref"];

struct Resolver<'a> {
    root: &'a Value,
    stack: Vec<String>,
}

pub(super) fn from_value(value: &Value) -> Result<ToolInventory, SchemaError> {
    let root = value
        .as_object()
        .ok_or_else(|| malformed("$", "expected an OpenAPI document object"))?;
    let mut resolver = Resolver { root: value, stack: Vec::new() };
    let mut tools = Vec::new();
    let Some(paths) = root.get("paths") else {
        return Ok(ToolInventory { tools });
    };
    let paths = paths.as_object().ok_or_else(|| malformed("$.paths", "expected an object"))?;
    for (route, item) in paths {
        let item_path = format!("$.paths.{route}");
        let item = item.as_object().ok_or_else(|| malformed(&item_path, "expected an object"))?;
        let shared = match item.get("parameters") {
            Some(p) => resolver.parameters(&format!("{item_path}.parameters"), p)?,
            None => Vec::new(),
        };
        for (method, op) in item {
            if !METHODS.contains(&method.as_str()) {
                continue;
            }
            let op_path = format!("{item_path}.{method}");
            tools.push(resolver.operation(&op_path, op, &shared)?);
        }
    }
    Ok(ToolInventory { tools })
}

fn malformed(path: &str, msg: &str) -> SchemaError {
    SchemaError::MalformedDocument(format!("{path}: {msg}"))
}

fn unsupported(path: &str, feature: impl Into<String>) -> SchemaError {
    SchemaError::UnsupportedFeature { path: path.to_string(), feature: feature.into() }
}

fn text(obj: &Map<String, Value>, key: &str) -> String {
    obj.get(key).and_then(Value::as_str).unwrap_or_default().to_string()
}

fn example_text(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

impl<'a> Resolver<'a> {
    fn lookup(&self, path: &str, reference: &str) -> Result<&'a Value, SchemaError> {
        let pointer = reference
            .strip_prefix('#')
            .ok_or_else(|| unsupported(path, format!("external $ref `{reference}`")))?;
        self.root
            .pointer(pointer)
            .ok_or_else(|| malformed(path, &format!("dangling $ref `{reference}`")))
    }

    /// Follows a `$ref` chain, tracking the stack of references under
    /// expansion so recursive schemas are reported instead of looping.
    fn with_ref<T>(
        &mut self,
        path: &str,
        v: &'a Value,
        f: impl FnOnce(&mut Self, &'a Value) -> Result<T, SchemaError>,
    ) -> Result<T, SchemaError> {
        match v.get("$ref").and_then(Value::as_str) {
            None => f(self, v),
            Some(reference) => {
                if v.as_object().is_some_and(|o| o.len() > 1) {
                    return Err(unsupported(path, "$ref with sibling keywords"));
                }
                if self.stack.iter().any(|r| r == reference) {
                    return Err(unsupported(path, format!("recursive $ref `{reference}`")));
                }
                let target = self.lookup(path, reference)?;
                self.stack.push(reference.to_string());
                let out = self.with_ref(path, target, f);
                self.stack.pop();
                out
            }
        }
    }

    fn operation(&mut self, path: &str, op: &'a Value, shared: &[ParamSpec]) -> Result<ToolSchema, SchemaError> {
        let obj = op.as_object().ok_or_else(|| malformed(path, "expected an operation object"))?;
        let tool_name = obj
            .get("operationId")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(path, "operation without operationId"))?
            .to_string();
        let description = match text(obj, "description") {
            d if d.is_empty() => text(obj, "summary"),
            d => d,
        };
        let mut params = shared.to_vec();
        if let Some(p) = obj.get("parameters") {
            params.extend(self.parameters(&format!("{path}.parameters"), p)?);
        }
        if let Some(body) = obj.get("requestBody") {
            params.extend(self.request_body(&format!("{path}.requestBody"), body)?);
        }
        Ok(ToolSchema { tool_name, description, params })
    }

    fn parameters(&mut self, path: &str, v: &'a Value) -> Result<Vec<ParamSpec>, SchemaError> {
        let list = v.as_array().ok_or_else(|| malformed(path, "expected a list"))?;
        let mut out = Vec::with_capacity(list.len());
        for (i, p) in list.iter().enumerate() {
            let ppath = format!("{path}[{i}]");
            out.push(self.with_ref(&ppath, p, |r, p| r.parameter(&ppath, p))?);
        }
        Ok(out)
    }

    fn parameter(&mut self, path: &str, v: &'a Value) -> Result<ParamSpec, SchemaError> {
        let obj = v.as_object().ok_or_else(|| malformed(path, "expected a parameter object"))?;
        if let Some(k) = obj.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
            return Err(unsupported(path, k.clone()));
        }
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(path, "parameter without name"))?
            .to_string();
        let schema = obj.get("schema").ok_or_else(|| malformed(path, "parameter without schema"))?;
        let spath = format!("{path}.schema");
        let (ty, schema_example) = self.with_ref(&spath, schema, |r, s| r.schema(&spath, s))?;
        let in_path = obj.get("in").and_then(Value::as_str) == Some("path");
        let required = obj.get("required").and_then(Value::as_bool).unwrap_or(in_path);
        Ok(ParamSpec {
            name,
            ty,
            required,
            description: text(obj, "description"),
            example: example_text(obj.get("example")).or(schema_example),
        })
    }

    fn request_body(&mut self, path: &str, v: &'a Value) -> Result<Vec<ParamSpec>, SchemaError> {
        let content = v
            .get("content")
            .and_then(Value::as_object)
            .ok_or_else(|| malformed(path, "requestBody without content"))?;
        if let Some(other) = content.keys().find(|k| *k != "application/json") {
            return Err(unsupported(path, format!("content type `{other}`")));
        }
        let Some(media) = content.get("application/json") else {
            return Ok(Vec::new());
        };
        let schema = media.get("schema").ok_or_else(|| malformed(path, "media type without schema"))?;
        let spath = format!("{path}.schema");
        let (ty, _) = self.with_ref(&spath, schema, |r, s| r.schema(&spath, s))?;
        match ty {
            ParamType::Object(children) => Ok(children),
            other => Err(unsupported(path, format!("non-object request body ({})", other.keyword()))),
        }
    }

    /// Returns the parameter type and the schema-level example, if any.
    fn schema(&mut self, path: &str, v: &'a Value) -> Result<(ParamType, Option<String>), SchemaError> {
        let obj = v.as_object().ok_or_else(|| malformed(path, "expected a schema object"))?;
        if let Some(k) = obj.keys().find(|k| !SCHEMA_KEYS.contains(&k.as_str())) {
            return Err(unsupported(path, k.clone()));
        }
        let example = example_text(obj.get("example"));
        let declared = obj.get("type").map(|t| {
            t.as_str().ok_or_else(|| unsupported(path, "type list"))
        });
        let declared = match declared {
            Some(t) => Some(t?),
            None if obj.contains_key("properties") => Some("object"),
            None => None,
        };
        if let Some(lits) = obj.get("enum") {
            if declared.is_some_and(|t| t != "string") {
                return Err(unsupported(path, "non-string enum"));
            }
            let lits = lits
                .as_array()
                .ok_or_else(|| malformed(path, "`enum` must be a list"))?
                .iter()
                .map(|l| l.as_str().map(str::to_string).ok_or_else(|| unsupported(path, "non-string enum")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((ParamType::Enum(lits), example));
        }
        let ty = match declared {
            Some("string") => ParamType::String,
            Some("integer") => ParamType::Integer,
            Some("number") => ParamType::Number,
            Some("boolean") => ParamType::Boolean,
            Some("array") => {
                let items = obj.get("items").ok_or_else(|| unsupported(path, "array without items"))?;
                let ipath = format!("{path}.items");
                let (elem, _) = self.with_ref(&ipath, items, |r, s| r.schema(&ipath, s))?;
                ParamType::Array(Box::new(elem))
            }
            Some("object") => ParamType::Object(self.properties(path, obj)?),
            Some(other) => return Err(unsupported(path, format!("type `{other}`"))),
            None => return Err(unsupported(path, "untyped schema")),
        };
        Ok((ty, example))
    }

    fn properties(&mut self, path: &str, obj: &'a Map<String, Value>) -> Result<Vec<ParamSpec>, SchemaError> {
        let props = obj
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| unsupported(path, "free-form object"))?;
        let required: Vec<&str> = match obj.get("required") {
            None => Vec::new(),
            Some(r) => r
                .as_array()
                .ok_or_else(|| malformed(path, "`required` must be a list"))?
                .iter()
                .filter_map(Value::as_str)
                .collect(),
        };
        let mut out = Vec::with_capacity(props.len());
        for (name, schema) in props {
            let ppath = format!("{path}.properties.{name}");
            let (ty, example) = self.with_ref(&ppath, schema, |r, s| r.schema(&ppath, s))?;
            let description = self.with_ref(&ppath, schema, |_, s| {
                Ok(s.get("description").and_then(Value::as_str).unwrap_or_default().to_string())
            })?;
            out.push(ParamSpec {
                name: name.clone(),
                ty,
                required: required.contains(&name.as_str()),
                description,
                example,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_inventory, DocFormat};
    use super::*;

    const DOC: &str = r##"{
      "openapi": "3.0.0",
      "paths": {
        "/flights": {
          "get": {
            "operationId": "flight_search",
            "summary": "Search for flights",
            "parameters": [
              {"name": "from", "in": "query", "required": true, "schema": {"type": "string"}},
              {"name": "to", "in": "query", "required": true, "schema": {"type": "string"}},
              {"name": "adult", "in": "query", "required": true, "schema": {"type": "integer"}, "example": 2},
              {"$ref": "#/components/parameters/Cabin"}
            ]
          }
        },
        "/bookings": {
          "post": {
            "operationId": "book",
            "description": "Book a seat",
            "requestBody": {"content": {"application/json": {"schema": {"$ref": "#/components/schemas/Booking"}}}}
          }
        }
      },
      "components": {
        "parameters": {
          "Cabin": {"name": "type", "in": "query", "schema": {"type": "string", "enum": ["economy", "business"]}}
        },
        "schemas": {
          "Booking": {
            "type": "object",
            "required": ["flight"],
            "properties": {
              "flight": {"type": "string", "description": "Flight number"},
              "seats": {"type": "array", "items": {"type": "integer"}}
            }
          }
        }
      }
    }"##;

    #[test]
    fn reads_operations_and_refs() {
        let inv = parse_inventory(DOC.as_bytes(), DocFormat::OpenApiSubset).unwrap();
        assert_eq!(inv.len(), 2);
        let fs = &inv.tools[0];
        assert_eq!(fs.tool_name, "flight_search");
        assert_eq!(fs.description, "Search for flights");
        let names: Vec<_> = fs.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["from", "to", "adult", "type"]);
        assert_eq!(fs.params[2].example.as_deref(), Some("2"));
        assert!(!fs.params[3].required);
        assert_eq!(fs.params[3].ty, ParamType::Enum(vec!["economy".into(), "business".into()]));

        let book = &inv.tools[1];
        assert_eq!(book.params.len(), 2);
        assert!(book.params[0].required);
        assert_eq!(book.params[0].description, "Flight number");
        assert_eq!(book.params[1].ty, ParamType::Array(Box::new(ParamType::Integer)));
    }

    #[test]
    fn conditional_schemas_are_rejected() {
        let doc = r#"{"paths": {"/x": {"get": {"operationId": "x", "parameters": [
            {"name": "a", "in": "query", "schema": {"oneOf": [{"type": "string"}, {"type": "integer"}]}}]}}}}"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::OpenApiSubset).unwrap_err();
        assert_eq!(
            err,
            SchemaError::UnsupportedFeature {
                path: "$.paths./x.get.parameters[0].schema".into(),
                feature: "oneOf".into()
            }
        );
    }

    #[test]
    fn recursive_refs_are_rejected() {
        let doc = r##"{"paths": {"/x": {"post": {"operationId": "x",
            "requestBody": {"content": {"application/json": {"schema": {"$ref": "#/components/schemas/Node"}}}}}}},
          "components": {"schemas": {"Node": {"type": "object", "properties": {
              "next": {"$ref": "#/components/schemas/Node"}}}}}}"##;
        let err = parse_inventory(doc.as_bytes(), DocFormat::OpenApiSubset).unwrap_err();
        assert!(matches!(err, SchemaError::UnsupportedFeature { ref feature, .. } if feature.contains("recursive")));
    }

    #[test]
    fn value_bounds_are_reported() {
        let doc = r#"{"paths": {"/x": {"get": {"operationId": "x", "parameters": [
            {"name": "a", "in": "query", "schema": {"type": "integer", "minimum": 1}}]}}}}"#;
        let err = parse_inventory(doc.as_bytes(), DocFormat::OpenApiSubset).unwrap_err();
        assert!(matches!(err, SchemaError::UnsupportedFeature { ref feature, .. } if feature == "minimum"));
    }
}
