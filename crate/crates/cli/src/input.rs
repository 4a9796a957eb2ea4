//! Reading command inputs: JSON given inline, as a file path, or through `--config`.

use std::path::Path;

use berkdyn::berkovich::parse_point;
use berkdyn::graph::GraphJson;
use berkdyn::maps::parse_map;
use berkdyn::valued_fields::parse_place;
use berkdyn::{BerkPoint, Error, HomogeneousLift, MetricGraph, Place, Q, Result};
use num_complex::Complex64;
use serde_json::Value;

/// Inline JSON when the argument looks like JSON, otherwise the contents of the named file.
pub fn json_text(arg: &str) -> Result<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') || t.starts_with('"') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(Path::new(arg)).map_err(|e| Error::Io(format!("{arg}: {e}")))
}

/// Keys of a `--config` file used to fill in missing arguments.
#[derive(Debug, Default)]
pub struct ConfigValues(Option<Value>);

impl ConfigValues {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ConfigValues(None)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                Ok(ConfigValues(Some(serde_json::from_str(&text)?)))
            }
        }
    }

    /// The argument, or the JSON stored under `key` in the config.
    pub fn pick(&self, arg: &Option<String>, key: &str) -> Result<String> {
        if let Some(a) = arg {
            return json_text(a);
        }
        match self.0.as_ref().and_then(|v| v.get(key)) {
            Some(Value::String(s)) => json_text(s),
            Some(v) => Ok(v.to_string()),
            None => Err(Error::Domain(format!("missing --{key} (give it on the command line or in --config)"))),
        }
    }

    pub fn place(&self, arg: &Option<String>) -> Result<Place> {
        parse_place(&self.pick(arg, "place")?)
    }

    pub fn map(&self, arg: &Option<String>, key: &str) -> Result<HomogeneousLift> {
        parse_map(&self.pick(arg, key)?)
    }

    pub fn skeleton(&self, arg: &Option<String>) -> Result<Option<MetricGraph<Q>>> {
        if arg.is_none() && self.0.as_ref().and_then(|v| v.get("skeleton")).is_none() {
            return Ok(None);
        }
        graph(&self.pick(arg, "skeleton")?).map(Some)
    }

    /// A list of points or of `{"id": .., "point": ..}` objects.
    pub fn points(&self, arg: &Option<String>) -> Result<Vec<(String, BerkPoint)>> {
        let v: Value = serde_json::from_str(&self.pick(arg, "points")?)?;
        let Value::Array(items) = v else {
            return Err(Error::Parse("points must be a JSON list".into()));
        };
        items
            .iter()
            .enumerate()
            .map(|(i, item)| match item.get("point") {
                Some(p) => {
                    let id = item.get("id").map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())).unwrap_or_else(|| i.to_string());
                    Ok((id, parse_point(&p.to_string())?))
                }
                None => Ok((i.to_string(), parse_point(&item.to_string())?)),
            })
            .collect()
    }
}

pub fn graph(text: &str) -> Result<MetricGraph<Q>> {
    let g: GraphJson = serde_json::from_str(text)?;
    MetricGraph::from_json(&g)
}

pub fn complex(s: &str) -> Result<Complex64> {
    s.trim().parse::<Complex64>().map_err(|_| Error::Parse(format!("not a complex number: {s:?}")))
}
