//! JSON Schema generation from struct declarations, response validation, and
//! compile-time absorption of external API descriptions.

mod openapi;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map as JsonMap, Value as Json};
use thiserror::Error;

use crate::frontend::ast::Span;

pub use openapi::{
    absorb_openapi, expand_schemas, upper_camel, FileFetcher, SchemaFetcher, StaticFetcher,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeTag {
    Num,
    Str,
    Bool,
    List,
    Map,
    StructRef(String),
}

impl TypeTag {
    /// Resolve a field type name. `Pid`, `Identity` and `Vec` are rejected
    /// because they have no JSON Schema counterpart.
    pub fn from_name(name: &str) -> Result<Self, SchemaError> {
        Ok(match name {
            "Num" => TypeTag::Num,
            "Str" => TypeTag::Str,
            "Bool" => TypeTag::Bool,
            "List" => TypeTag::List,
            "Map" => TypeTag::Map,
            "Pid" | "Identity" | "Vec" => {
                return Err(SchemaError::UnsupportedFieldType(name.to_string()))
            }
            other => TypeTag::StructRef(other.to_string()),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            TypeTag::Num => "Num",
            TypeTag::Str => "Str",
            TypeTag::Bool => "Bool",
            TypeTag::List => "List",
            TypeTag::Map => "Map",
            TypeTag::StructRef(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<(String, TypeTag)>,
}

impl StructDef {
    pub fn new(name: impl Into<String>, fields: Vec<(&str, TypeTag)>) -> Self {
        Self {
            name: name.into(),
            fields: fields.into_iter().map(|(f, t)| (f.to_string(), t)).collect(),
        }
    }

    pub fn field_type(&self, field: &str) -> Option<&TypeTag> {
        self.fields.iter().find(|(f, _)| f == field).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("recursive struct reference: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unsupported field type {0} (no JSON Schema mapping)")]
    UnsupportedFieldType(String),
    #[error("unknown struct {0}")]
    UnknownStruct(String),
    #[error("duplicate field {field} in struct {strukt}")]
    DuplicateField { strukt: String, field: String },
    #[error("{span}: schema fetch failed for {url}: {message}")]
    Fetch {
        span: Span,
        url: String,
        message: String,
    },
    #[error("{span}: invalid schema document {url}: {message}")]
    Parse {
        span: Span,
        url: String,
        message: String,
    },
    #[error("{span}: unsupported schema protocol: {protocol} (adapters in development)")]
    UnsupportedProtocol { span: Span, protocol: String },
}

/// Struct definitions by name, in registration order.
#[derive(Debug, Clone, Default)]
pub struct StructRegistry {
    defs: Vec<StructDef>,
    index: HashMap<String, usize>,
}

impl StructRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` (and leaves the registry unchanged) on a duplicate name.
    pub fn insert(&mut self, def: StructDef) -> bool {
        if self.index.contains_key(&def.name) {
            return false;
        }
        self.index.insert(def.name.clone(), self.defs.len());
        self.defs.push(def);
        true
    }

    pub fn get(&self, name: &str) -> Option<&StructDef> {
        self.index.get(name).map(|&i| &self.defs[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn defs(&self) -> &[StructDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }
}

impl FromIterator<StructDef> for StructRegistry {
    fn from_iter<I: IntoIterator<Item = StructDef>>(iter: I) -> Self {
        let mut reg = StructRegistry::new();
        for d in iter {
            reg.insert(d);
        }
        reg
    }
}

/// A generated schema. Keys keep insertion order, so the canonical text has
/// `type`, `properties`, `required` in that order and properties in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonSchema(pub Json);

impl JsonSchema {
    pub fn as_json(&self) -> &Json {
        &self.0
    }

    /// Compact canonical text (no whitespace).
    pub fn canonical(&self) -> String {
        serde_json::to_string(&self.0).expect("schema serializes")
    }
}

fn type_schema(tag: &TypeTag, registry: &StructRegistry, path: &mut Vec<String>) -> Result<Json, SchemaError> {
    Ok(match tag {
        TypeTag::Num => json!({"type": "number"}),
        TypeTag::Str => json!({"type": "string"}),
        TypeTag::Bool => json!({"type": "boolean"}),
        TypeTag::List => json!({"type": "array"}),
        TypeTag::Map => json!({"type": "object"}),
        TypeTag::StructRef(name) => {
            let def = registry
                .get(name)
                .ok_or_else(|| SchemaError::UnknownStruct(name.clone()))?;
            object_schema(def, registry, path)?
        }
    })
}

fn object_schema(def: &StructDef, registry: &StructRegistry, path: &mut Vec<String>) -> Result<Json, SchemaError> {
    if let Some(start) = path.iter().position(|n| n == &def.name) {
        let mut cycle = path[start..].to_vec();
        cycle.push(def.name.clone());
        return Err(SchemaError::Cycle(cycle));
    }
    path.push(def.name.clone());
    let mut properties = JsonMap::new();
    let mut required = Vec::with_capacity(def.fields.len());
    for (field, tag) in &def.fields {
        if properties.contains_key(field) {
            return Err(SchemaError::DuplicateField {
                strukt: def.name.clone(),
                field: field.clone(),
            });
        }
        properties.insert(field.clone(), type_schema(tag, registry, path)?);
        required.push(Json::String(field.clone()));
    }
    path.pop();
    let mut schema = JsonMap::new();
    schema.insert("type".into(), Json::String("object".into()));
    schema.insert("properties".into(), Json::Object(properties));
    schema.insert("required".into(), Json::Array(required));
    Ok(Json::Object(schema))
}

/// Build the JSON Schema for `def`, recursing into struct-typed fields.
pub fn generate_schema(def: &StructDef, registry: &StructRegistry) -> Result<JsonSchema, SchemaError> {
    object_schema(def, registry, &mut Vec::new()).map(JsonSchema)
}

fn json_type_name(v: &Json) -> &'static str {
    match v {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "array",
        Json::Object(_) => "object",
    }
}

fn validate_at(value: &Json, schema: &Json, path: &str) -> Result<(), String> {
    let expected = schema.get("type").and_then(Json::as_str).unwrap_or("object");
    let ok = match expected {
        "number" => value.is_number(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "array" => value.is_array(),
        "object" => value.is_object(),
        _ => true,
    };
    if !ok {
        return Err(if path.is_empty() {
            format!("expected {expected}, got {}", json_type_name(value))
        } else {
            format!("{path}: expected {expected}")
        });
    }
    let (Some(obj), Some(required)) = (value.as_object(), schema.get("required").and_then(Json::as_array)) else {
        return Ok(());
    };
    let properties = schema.get("properties").and_then(Json::as_object);
    for key in required.iter().filter_map(Json::as_str) {
        let child_path = if path.is_empty() {
            key.to_string()
        } else {
            format!("{path}.{key}")
        };
        let Some(child) = obj.get(key) else {
            return Err(format!("missing required field {child_path}"));
        };
        if let Some(child_schema) = properties.and_then(|p| p.get(key)) {
            validate_at(child, child_schema, &child_path)?;
        }
    }
    Ok(())
}

/// Check a model response against a generated schema. Extra keys are allowed.
/// The error names the first missing or mistyped field.
pub fn validate(response: &Json, schema: &JsonSchema) -> Result<(), String> {
    validate_at(response, &schema.0, "")
}
