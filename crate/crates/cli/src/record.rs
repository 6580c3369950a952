//! Single-record JSON documents: an object from column name to a label,
//! a number or `null`.

use anyhow::{bail, Context, Result};
use indexmap::IndexMap;
use mixbn_core::{ColumnKind, Schema, Value};
use serde_json::value::RawValue;

/// A parsed record that remembers its original field text and order.
pub struct RecordDoc {
    fields: IndexMap<String, Box<RawValue>>,
    pub values: Vec<Value>,
}

impl RecordDoc {
    pub fn parse(text: &str, schema: &Schema, source: &str) -> Result<Self> {
        let fields: IndexMap<String, Box<RawValue>> =
            serde_json::from_str(text).with_context(|| format!("{source}: expected a JSON object"))?;
        for key in fields.keys() {
            if !schema.columns.iter().any(|c| &c.name == key) {
                bail!("{source}: field `{key}` is not in the schema");
            }
        }
        let mut values = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let raw = fields
                .get(&col.name)
                .with_context(|| format!("{source}: field `{}` is absent; use null for a gap", col.name))?;
            let v: Value = serde_json::from_str(raw.get())
                .with_context(|| format!("{source}: field `{}` is not a label, number or null", col.name))?;
            let v = match (col.kind, v) {
                (_, Value::Missing) => Value::Missing,
                (ColumnKind::Categorical, Value::Category(s)) => Value::Category(s),
                (ColumnKind::Continuous, Value::Number(x)) => Value::Number(x),
                (kind, other) => bail!("{source}: field `{}` should be {kind}, found {other}", col.name),
            };
            values.push(v);
        }
        Ok(Self { fields, values })
    }

    pub fn load(path: &std::path::Path, schema: &Schema) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, schema, &path.display().to_string())
    }

    /// Writes the record back with only its `null` fields replaced.
    pub fn fill(&self, schema: &Schema, restored: &[Value]) -> Result<String> {
        let mut out: IndexMap<&str, Box<RawValue>> = IndexMap::new();
        for (key, raw) in &self.fields {
            let col = schema.columns.iter().position(|c| &c.name == key).expect("checked at parse");
            let v = if self.values[col].is_missing() {
                RawValue::from_string(serde_json::to_string(&restored[col])?)?
            } else {
                raw.clone()
            };
            out.insert(key, v);
        }
        Ok(serde_json::to_string_pretty(&out)? + "\n")
    }
}
