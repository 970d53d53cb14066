//! Run files: a bare model object or a run object around one, checked
//! against the shipped JSON schema before deserialization.

use std::path::Path;
use std::sync::OnceLock;

use cvmaps::config::{ModelSpec, StateSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub sum: f64,
    pub half_width: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    pub model: ModelSpec,
    /// Second model for profiles, written as the `ideal` column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl RunFile {
    pub fn bare(model: ModelSpec) -> Self {
        RunFile {
            schema_version: None,
            model,
            reference: None,
            theta: None,
            grid: None,
            profile: None,
            state: None,
            format: None,
        }
    }
}

/// Schema or content error in a run file; maps to exit code 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Validators for the whole schema and for each branch, so errors point at
/// the branch the document was aiming for.
fn validators() -> &'static [jsonschema::Validator; 3] {
    static V: OnceLock<[jsonschema::Validator; 3]> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("shipped schema is valid JSON");
        let branch = |name: &str| {
            let mut s = schema.clone();
            let obj = s.as_object_mut().expect("schema is an object");
            obj.remove("oneOf");
            obj.insert("$ref".into(), Value::String(format!("#/$defs/{name}")));
            jsonschema::validator_for(&s).expect("shipped schema compiles")
        };
        [jsonschema::validator_for(&schema).expect("shipped schema compiles"), branch("model"), branch("run")]
    })
}

pub fn validate(value: &Value) -> Result<(), SchemaError> {
    let [whole, model, run] = validators();
    if whole.is_valid(value) {
        return Ok(());
    }
    let target = match value.get("model") {
        Some(Value::String(_)) => model,
        Some(Value::Object(_)) => run,
        _ => whole,
    };
    let mut errors: Vec<String> = target.iter_errors(value).map(|e| format!("{} at `{}`", e, e.instance_path())).collect();
    if errors.is_empty() {
        errors.push("document matches neither a model nor a run object".into());
    }
    Err(SchemaError(errors.join("; ")))
}

pub fn parse(text: &str) -> Result<RunFile, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SchemaError(format!("invalid JSON: {e}")))?;
    validate(&value)?;
    let run = if value.get("model").is_some_and(Value::is_string) {
        RunFile::bare(serde_json::from_value(value).map_err(|e| SchemaError(e.to_string()))?)
    } else {
        serde_json::from_value(value).map_err(|e| SchemaError(e.to_string()))?
    };
    for m in std::iter::once(&run.model).chain(run.reference.as_ref()) {
        m.check_keys().map_err(|e| SchemaError(e.to_string()))?;
    }
    Ok(run)
}

pub fn load(path: &Path) -> Result<RunFile, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// A state given inline as JSON or as a path to a JSON file.
pub fn parse_state(arg: &str) -> Result<StateSpec, SchemaError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| SchemaError(format!("cannot read state {arg}: {e}")))?
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| SchemaError(format!("invalid state JSON: {e}")))?;
    let wrapped = serde_json::json!({ "model": { "model": "identity" }, "state": value });
    validate(&wrapped)?;
    serde_json::from_value(value).map_err(|e| SchemaError(format!("invalid state: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_and_wrapped_models() {
        let a = parse(r#"{"model":"ideal_amplifier","g":2}"#).unwrap();
        let b = parse(r#"{"schema_version":"1","model":{"model":"ideal_amplifier","g":2},"theta":[0]}"#).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(b.theta, Some(vec![0.0]));
    }

    #[test]
    fn schema_rejects_bad_files() {
        for bad in [
            r#"{"model":"amplifier","bogus":1}"#,
            r#"{"model":"amplifier","R":1.5}"#,
            r#"{"model":"amplifier","R":0.2,"g":2}"#,
            r#"{"model":{"model":"identity"},"grid":{"min":0,"max":1}}"#,
            r#"{"model":"warp_drive"}"#,
            r#"[1,2]"#,
            "not json",
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn per_model_keys_checked_after_schema() {
        assert!(parse(r#"{"model":"addition","R":0.2}"#).is_err());
    }

    #[test]
    fn states_inline() {
        assert!(parse_state(r#"{"kind":"coherent","alpha":[0.3,0]}"#).is_ok());
        assert!(parse_state(r#"{"kind":"fock","n":-1}"#).is_err());
        assert!(parse_state(r#"{"kind":"squeezed"}"#).is_err());
    }
}
