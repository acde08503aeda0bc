//! Text formats: series CSV, model JSON and experiment configuration JSON.
//!
//! Series CSV has the header `k,y`, one row per observation and provenance
//! as `# key=value` comment lines.

use serde::{Deserialize, Serialize};

use crate::carma_model::{CarmaSpec, FamilyId, ParamFamily};
use crate::error::{Error, Result};
use crate::mc_harness::ExperimentConfig;
use crate::pathsim::{Provenance, SampledSeries};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Writes a series with LF line endings.
pub fn write_series_csv(series: &SampledSeries) -> String {
    let p = &series.provenance;
    let mut out = String::new();
    out.push_str(&format!("# delta={}\n", series.delta));
    let mut meta = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            out.push_str(&format!("# {key}={v}\n"));
        }
    };
    meta("seed", p.seed.map(|v| v.to_string()));
    meta("stream_id", p.stream_id.map(|v| v.to_string()));
    meta("step", p.step.map(|v| v.to_string()));
    meta("burn_in", p.burn_in.map(|v| v.to_string()));
    meta("scheme", p.scheme.clone());
    meta("family", p.family.clone());
    meta(
        "theta",
        p.theta
            .as_ref()
            .map(|t| serde_json::to_string(t).expect("floats serialize")),
    );
    meta("alpha", p.alpha.map(|v| v.to_string()));
    meta("sigma", p.sigma.map(|v| v.to_string()));
    out.push_str("k,y\n");
    for (k, y) in series.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k + 1, y));
    }
    out
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse_err(format!("bad value '{v}' for '{key}'")))
}

fn apply_meta(key: &str, v: &str, delta: &mut Option<f64>, p: &mut Provenance) -> Result<()> {
    match key {
        "delta" => *delta = Some(number(key, v)?),
        "seed" => p.seed = Some(number(key, v)?),
        "stream_id" => p.stream_id = Some(number(key, v)?),
        "step" => p.step = Some(number(key, v)?),
        "burn_in" => p.burn_in = Some(number(key, v)?),
        "alpha" => p.alpha = Some(number(key, v)?),
        "sigma" => p.sigma = Some(number(key, v)?),
        "scheme" => p.scheme = Some(v.to_string()),
        "family" => p.family = Some(v.to_string()),
        "theta" => p.theta = Some(serde_json::from_str(v).map_err(|e| parse_err(format!("theta: {e}")))?),
        _ => {}
    }
    Ok(())
}

/// Parses series CSV. The `k` column must count up by one from its first
/// value; `delta` defaults to 1 when no `# delta=` line is present.
pub fn parse_series_csv(text: &str) -> Result<SampledSeries> {
    let mut delta = None;
    let mut prov = Provenance::default();
    let mut header_seen = false;
    let mut values = Vec::new();
    let mut next_k: Option<i64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((key, v)) = c.split_once('=') {
                apply_meta(key.trim(), v.trim(), &mut delta, &mut prov)?;
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["k", "y"] {
                return Err(parse_err(format!("line {}: expected header 'k,y'", i + 1)));
            }
            header_seen = true;
            continue;
        }
        let (k, y) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("line {}: expected two fields", i + 1)))?;
        let k: i64 = k
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("line {}: bad index '{k}'", i + 1)))?;
        let y: f64 = y
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("line {}: bad value '{y}'", i + 1)))?;
        if let Some(expect) = next_k {
            if k != expect {
                return Err(parse_err(format!("line {}: index {k}, expected {expect}", i + 1)));
            }
        }
        next_k = Some(k.checked_add(1).ok_or_else(|| parse_err("index overflow"))?);
        values.push(y);
    }
    if !header_seen {
        return Err(parse_err("missing header 'k,y'"));
    }
    let mut s = SampledSeries::from_values(values, delta.unwrap_or(1.0))?;
    s.provenance = prov;
    Ok(s)
}

fn default_delta() -> f64 {
    1.0
}

/// A model given as `{"family": ..., "theta": [...], "delta": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub family: FamilyId,
    pub theta: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl ModelFile {
    /// The parameter family; GENERIC requires `bounds`.
    pub fn family(&self) -> Result<ParamFamily> {
        match (self.family, &self.bounds) {
            (FamilyId::Generic, Some(b)) => ParamFamily::generic(b.len() / 2, b.clone()),
            (FamilyId::Generic, None) => Err(Error::InvalidConfig("GENERIC family needs bounds".into())),
            (id, Some(b)) => ParamFamily::from_id(id)?.with_bounds(b.clone()),
            (id, None) => ParamFamily::from_id(id),
        }
    }

    /// The model at `theta`, checked for stability and identifiability.
    pub fn spec(&self) -> Result<CarmaSpec> {
        let spec = match self.family {
            FamilyId::Generic => {
                if self.theta.is_empty() || !self.theta.len().is_multiple_of(2) {
                    return Err(Error::InvalidModel(
                        "GENERIC theta must hold a_1..a_p, c_0..c_{p-1}".into(),
                    ));
                }
                let p = self.theta.len() / 2;
                CarmaSpec::new(self.theta[..p].to_vec(), self.theta[p..].to_vec(), self.delta)?
            }
            id => ParamFamily::from_id(id)?.spec(&self.theta, self.delta)?,
        };
        spec.validate().into_result()?;
        Ok(spec)
    }
}

pub fn parse_model_json(text: &str) -> Result<ModelFile> {
    let m: ModelFile = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if !(m.delta > 0.0 && m.delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "delta must be positive, got {}",
            m.delta
        )));
    }
    Ok(m)
}

pub fn write_model_json(m: &ModelFile) -> String {
    serde_json::to_string_pretty(m).expect("model serializes")
}

/// Parses an experiment configuration. Validation is separate so that
/// command-line overrides can be applied first.
pub fn parse_config_json(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

pub fn write_config_json(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn series_round_trip() {
        let mut s = SampledSeries::from_values(vec![0.5, -1.25, 3e-9], 0.5)
            .unwrap()
            .with_model("OU", &[-1.0]);
        s.provenance.seed = Some(7);
        s.provenance.alpha = Some(1.5);
        let text = write_series_csv(&s);
        assert!(text.contains("\nk,y\n1,0.5\n"));
        assert_eq!(parse_series_csv(&text).unwrap(), s);
    }

    #[test]
    fn series_errors() {
        assert!(parse_series_csv("").is_err());
        assert!(parse_series_csv("k,y\n").is_err());
        assert!(parse_series_csv("k,y\n1,2\n3,4\n").is_err());
        assert!(parse_series_csv("x,y\n1,2\n").is_err());
        assert!(parse_series_csv("k,y\n1,abc\n").is_err());
        assert!(parse_series_csv("k,y\n1,NaN\n").is_err());
        assert!(parse_series_csv("# delta=-1\nk,y\n1,2\n").is_err());
        let s = parse_series_csv("# note\r\nk, y\r\n0,1.5\r\n1,2\r\n").unwrap();
        assert_eq!(s.values, vec![1.5, 2.0]);
        assert_eq!(s.delta, 1.0);
    }

    #[test]
    fn model_json() {
        let m = parse_model_json(r#"{"family":"CARMA21_EX48","theta":[1.9647,0.0893,0.1761],"delta":1.0}"#)
            .unwrap();
        assert_eq!(m.spec().unwrap().p(), 2);
        assert_eq!(parse_model_json(&write_model_json(&m)).unwrap(), m);
        let g = parse_model_json(r#"{"family":"GENERIC","theta":[1.0,1.0]}"#).unwrap();
        assert_eq!(g.spec().unwrap().ar(), &[1.0]);
        assert!(g.family().is_err());
        assert!(parse_model_json(r#"{"family":"OU","theta":[0.5]}"#)
            .unwrap()
            .spec()
            .is_err());
        assert!(parse_model_json(r#"{"family":"XX","theta":[1]}"#).is_err());
        assert!(parse_model_json(r#"{"family":"OU","theta":[-1],"delta":0}"#).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = parse_config_json(r#"{"family":"CARMA20_EX47","theta0":[-3],"alpha":1.5,"replications":10,"estimators":["garcia"]}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(parse_config_json(&write_config_json(&c)).unwrap(), c);
    }

    proptest! {
        #[test]
        fn parsers_never_panic(s in ".{0,200}") {
            let _ = parse_series_csv(&s);
            let _ = parse_model_json(&s);
            let _ = parse_config_json(&s).map(|c| c.validate());
        }

        #[test]
        fn series_csv_like_input_never_panics(rows in prop::collection::vec((any::<i64>(), any::<f64>()), 0..20)) {
            let mut s = String::from("k,y\n");
            for (k, y) in rows {
                s.push_str(&format!("{k},{y}\n"));
            }
            let _ = parse_series_csv(&s);
        }

        #[test]
        fn series_round_trip_any(values in prop::collection::vec(-1e12f64..1e12, 1..50)) {
            let s = SampledSeries::from_values(values, 1.0).unwrap();
            prop_assert_eq!(parse_series_csv(&write_series_csv(&s)).unwrap(), s);
        }
    }
}
