//! JSON documents: instances, mechanisms, adversary configs and reports.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use truthlab_core::adversary::AdversaryConfig;
use truthlab_core::mechanism::AllocationOracle;
use truthlab_core::{Allocation, ExactValue, Instance, MechanismSpec};

use crate::{CliError, CliResult};

/// Test oracles that are deliberately not truthful.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum Fixture {
    /// Endpoint `a` gets a task exactly when its value lies in `[lo, hi]`.
    WinInterval { lo: ExactValue, hi: ExactValue },
}

impl AllocationOracle for Fixture {
    fn allocate(&self, instance: &Instance) -> truthlab_core::Result<Allocation> {
        match self {
            Fixture::WinInterval { lo, hi } => {
                let ms = instance
                    .tasks()
                    .iter()
                    .map(|t| if &t.va >= lo && &t.va <= hi { t.a } else { t.b })
                    .collect();
                Ok(Allocation::from_machines(instance, ms))
            }
        }
    }
}

/// Anything a mechanism document can describe.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(untagged)]
pub enum Oracle {
    Spec(MechanismSpec),
    Fixture(Fixture),
}

impl AllocationOracle for Oracle {
    fn allocate(&self, instance: &Instance) -> truthlab_core::Result<Allocation> {
        match self {
            Oracle::Spec(s) => s.allocate(instance),
            Oracle::Fixture(f) => f.allocate(instance),
        }
    }
}

const FIXTURE_VARIANTS: &[&str] = &["WinInterval"];

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Parses JSON, reporting the path of the offending field.
pub fn parse_str<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_str(&read(path)?, &path.display().to_string())
}

pub fn load_instance(path: &Path) -> CliResult<Instance> {
    load(path)
}

/// Loads a mechanism document, or a built-in by name (`vcg`).
pub fn load_mechanism(arg: &str) -> CliResult<Oracle> {
    if arg.eq_ignore_ascii_case("vcg") {
        return Ok(Oracle::Spec(MechanismSpec::Vcg));
    }
    let path = Path::new(arg);
    let text = read(path)?;
    parse_mechanism(&text, arg)
}

pub fn parse_mechanism(text: &str, origin: &str) -> CliResult<Oracle> {
    let value: serde_json::Value = parse_str(text, origin)?;
    let variant = value.get("variant").and_then(|v| v.as_str()).unwrap_or("");
    if FIXTURE_VARIANTS.contains(&variant) {
        return Ok(Oracle::Fixture(parse_str(text, origin)?));
    }
    let spec = match variant {
        "AffineMinimizer" => MechanismSpec::AffineMinimizer(payload(value, origin)?),
        "TaskIndependent" => MechanismSpec::TaskIndependent(payload(value, origin)?),
        "Bundling" => MechanismSpec::Bundling(payload(value, origin)?),
        "Constant" => MechanismSpec::Constant(payload(value, origin)?),
        // unit variants and unknown tags get serde's own message
        _ => parse_str(text, origin)?,
    };
    spec.validate()?;
    Ok(Oracle::Spec(spec))
}

/// Deserializes the fields of a tagged document without its tag. Going
/// through the enum directly buffers the content and loses error paths.
fn payload<T: DeserializeOwned>(mut value: serde_json::Value, origin: &str) -> CliResult<T> {
    if let Some(map) = value.as_object_mut() {
        map.remove("variant");
    }
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

pub fn load_config(path: &Path) -> CliResult<AdversaryConfig> {
    load(path)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Envelope of every emitted report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report<T> {
    /// File name of the manifest describing the run.
    pub manifest: Option<String>,
    pub command: String,
    pub passed: bool,
    pub body: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs_and_fixtures() {
        let o = parse_mechanism(r#"{"variant": "Vcg"}"#, "x").unwrap();
        assert_eq!(o, Oracle::Spec(MechanismSpec::Vcg));
        let o =
            parse_mechanism(r#"{"variant": "WinInterval", "lo": "1", "hi": "2"}"#, "x").unwrap();
        assert!(matches!(o, Oracle::Fixture(_)));
        let e = parse_mechanism(
            r#"{"variant": "AffineMinimizer", "multipliers": [1, "x"]}"#,
            "m.json",
        )
        .unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("m.json") && msg.contains("multipliers"),
            "{msg}"
        );
        assert_eq!(
            load_mechanism("VCG").unwrap(),
            Oracle::Spec(MechanismSpec::Vcg)
        );
    }

    #[test]
    fn fixture_is_not_monotone() {
        use truthlab_core::Task;
        let f = Fixture::WinInterval {
            lo: ExactValue::one(),
            hi: ExactValue::from_int(2),
        };
        let mk = |v| Instance::new(2, vec![Task::new(0, 0, 1, v, ExactValue::one())]).unwrap();
        assert_eq!(
            f.allocate(&mk(ExactValue::ratio(1, 2)))
                .unwrap()
                .machine_of(0),
            Some(1)
        );
        assert_eq!(
            f.allocate(&mk(ExactValue::ratio(3, 2)))
                .unwrap()
                .machine_of(0),
            Some(0)
        );
    }
}
