//! JSON schema for spaces, variables, partitions, filtrations, stopping
//! times, and Markov chains, shared by the CLI and the verification
//! reports.
//!
//! All measure data is carried as exact rational strings (`"1/2"`, `"3"`);
//! p-adic values additionally accept the explicit form `"5^2*3"` (base
//! `p`, valuation, unit), with a literal `p` allowed for the base. Numbers
//! are emitted in explicit form.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use num::{BigInt, BigRational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::martingale::MarkovChain;
use crate::padic::{Magnitude, PadicNumber};
use crate::space::{Filtration, FiniteProbSpace, Partition, StoppingTime};

/// Schema or validation failure in an input document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error: {0}")]
pub struct SchemaError(pub String);

fn err(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

/// Parse an exact rational literal `"a/b"` or `"a"`.
pub fn parse_rational(s: &str) -> Result<BigRational, SchemaError> {
    let s = s.trim();
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n = BigInt::from_str(numer).map_err(|_| err(format!("bad rational numerator in {s:?}")))?;
    let d = BigInt::from_str(denom).map_err(|_| err(format!("bad rational denominator in {s:?}")))?;
    if d == BigInt::from(0) {
        return Err(err(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

fn parse_base(base: &str, p: u64, s: &str) -> Result<(), SchemaError> {
    if base == "p" || base.parse::<u64>() == Ok(p) {
        Ok(())
    } else {
        Err(err(format!("base in {s:?} does not match the space prime {p}")))
    }
}

/// Parse a p-adic value literal: rational `"a/b"` or explicit `"p^v*u"`.
pub fn parse_value(s: &str, p: u64, precision: u32) -> Result<PadicNumber, SchemaError> {
    let s = s.trim();
    if let Some((head, unit)) = s.split_once('*') {
        let (base, v) = head
            .split_once('^')
            .ok_or_else(|| err(format!("explicit form {s:?} needs base^valuation*unit")))?;
        parse_base(base.trim(), p, s)?;
        let v: i64 = v.trim().parse().map_err(|_| err(format!("bad valuation in {s:?}")))?;
        let u: i64 = unit.trim().parse().map_err(|_| err(format!("bad unit in {s:?}")))?;
        if u == 0 {
            return Err(err(format!("unit must be nonzero in {s:?}")));
        }
        let unit = PadicNumber::from_integer(u, p, precision).map_err(|e| err(e.to_string()))?;
        let scale = PadicNumber::p_power(v, p, precision).map_err(|e| err(e.to_string()))?;
        return unit.mul(&scale).map_err(|e| err(e.to_string()));
    }
    if let Some((base, v)) = s.split_once('^') {
        parse_base(base.trim(), p, s)?;
        let v: i64 = v.trim().parse().map_err(|_| err(format!("bad valuation in {s:?}")))?;
        return PadicNumber::p_power(v, p, precision).map_err(|e| err(e.to_string()));
    }
    let q = parse_rational(s)?;
    PadicNumber::from_big_rational(&q, p, precision).map_err(|e| err(e.to_string()))
}

/// Parse a magnitude literal `"0"` or `"p^m"` (value `p^m`).
pub fn parse_magnitude(s: &str, p: u64) -> Result<Magnitude, SchemaError> {
    let s = s.trim();
    if s == "0" {
        return Ok(Magnitude::Zero);
    }
    let (base, m) = s
        .split_once('^')
        .ok_or_else(|| err(format!("magnitude {s:?} must be 0 or p^m")))?;
    parse_base(base.trim(), p, s)?;
    let m: i64 = m.trim().parse().map_err(|_| err(format!("bad exponent in {s:?}")))?;
    Ok(Magnitude::Finite(-m))
}

/// Explicit string form of a value, with its valuation annotation.
pub fn value_json(x: &PadicNumber) -> serde_json::Value {
    serde_json::json!({
        "value": x.to_string(),
        "valuation": x.valuation(),
    })
}

/// One outcome row: id plus exact rational weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDef {
    /// Outcome identifier.
    pub id: String,
    /// Exact rational weight string.
    pub prob: String,
}

/// A Markov chain in schema form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDef {
    /// State names.
    pub states: Vec<String>,
    /// Row-stochastic transition matrix of rational strings.
    #[serde(rename = "P")]
    pub transition: Vec<Vec<String>>,
    /// Initial distribution of rational strings.
    pub initial: Vec<String>,
}

/// A probability-space document.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    /// The prime of the ambient field.
    pub p: u64,
    /// Working precision in significant base-p digits.
    pub precision: u32,
    /// Outcomes with exact weights.
    pub outcomes: Vec<OutcomeDef>,
    /// Named `Q_p`-valued variables: outcome id to value string.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vars: BTreeMap<String, BTreeMap<String, String>>,
    /// Named partitions as lists of atoms (lists of outcome ids).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub partitions: BTreeMap<String, Vec<Vec<String>>>,
    /// Filtration levels, coarsest first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filtration: Vec<Vec<Vec<String>>>,
    /// Named stopping times: outcome id to time index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stopping: BTreeMap<String, BTreeMap<String, usize>>,
    /// Optional Markov chain extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainDef>,
}

/// A space document resolved into domain objects.
#[derive(Debug, Clone)]
pub struct LoadedSpace {
    /// The prime.
    pub p: u64,
    /// Working precision.
    pub precision: u32,
    /// The sample space.
    pub space: Arc<FiniteProbSpace>,
    /// Resolved variables.
    pub vars: BTreeMap<String, crate::space::RandomVariableK>,
    /// Resolved partitions.
    pub partitions: BTreeMap<String, Partition>,
    /// Resolved filtration, when present.
    pub filtration: Option<Filtration>,
    /// Resolved stopping times (requires a filtration).
    pub stopping: BTreeMap<String, StoppingTime>,
    /// Resolved chain, when present.
    pub chain: Option<MarkovChain>,
}

impl SpaceFile {
    /// Validate and resolve the document.
    pub fn load(&self) -> Result<LoadedSpace, SchemaError> {
        if self.outcomes.is_empty() {
            return Err(err("no outcomes"));
        }
        let entries = self
            .outcomes
            .iter()
            .map(|o| Ok((o.id.clone(), parse_rational(&o.prob)?)))
            .collect::<Result<Vec<_>, SchemaError>>()?;
        let space = FiniteProbSpace::new(entries).map_err(|e| err(e.to_string()))?;

        let mut vars = BTreeMap::new();
        for (name, table) in &self.vars {
            let mut values = Vec::with_capacity(space.len());
            for id in space.outcome_ids() {
                let s = table.get(id).ok_or_else(|| {
                    err(format!("variable {name} is missing a value for outcome {id}"))
                })?;
                values.push(parse_value(s, self.p, self.precision)?);
            }
            if table.len() != space.len() {
                return Err(err(format!("variable {name} names unknown outcomes")));
            }
            let var = crate::space::RandomVariableK::new(space.clone(), values)
                .map_err(|e| err(e.to_string()))?;
            vars.insert(name.clone(), var);
        }

        let mut partitions = BTreeMap::new();
        for (name, atoms) in &self.partitions {
            let partition =
                Partition::from_ids(space.clone(), atoms).map_err(|e| err(e.to_string()))?;
            partitions.insert(name.clone(), partition);
        }

        let filtration = if self.filtration.is_empty() {
            None
        } else {
            let levels = self
                .filtration
                .iter()
                .map(|atoms| Partition::from_ids(space.clone(), atoms))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            Some(Filtration::new(levels).map_err(|e| err(e.to_string()))?)
        };

        let mut stopping = BTreeMap::new();
        if !self.stopping.is_empty() {
            let filtration = filtration
                .as_ref()
                .ok_or_else(|| err("stopping times require a filtration"))?;
            for (name, table) in &self.stopping {
                let mut values = Vec::with_capacity(space.len());
                for id in space.outcome_ids() {
                    let t = table.get(id).ok_or_else(|| {
                        err(format!("stopping time {name} is missing outcome {id}"))
                    })?;
                    values.push(*t);
                }
                if table.len() != space.len() {
                    return Err(err(format!("stopping time {name} names unknown outcomes")));
                }
                let t = filtration
                    .stopping_time(values)
                    .map_err(|e| err(e.to_string()))?;
                stopping.insert(name.clone(), t);
            }
        }

        let chain = match &self.chain {
            None => None,
            Some(def) => Some(load_chain(def)?),
        };

        Ok(LoadedSpace {
            p: self.p,
            precision: self.precision,
            space,
            vars,
            partitions,
            filtration,
            stopping,
            chain,
        })
    }
}

fn load_chain(def: &ChainDef) -> Result<MarkovChain, SchemaError> {
    let transition = def
        .transition
        .iter()
        .map(|row| row.iter().map(|s| parse_rational(s)).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let initial = def
        .initial
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>, _>>()?;
    MarkovChain::new(def.states.clone(), transition, initial).map_err(|e| err(e.to_string()))
}

/// How a stopping time is specified in a martingale configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSpec {
    /// Constant stopping time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#const: Option<usize>,
    /// First time the running value's magnitude is at or below this bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_abs_below: Option<String>,
}

/// One independent factor of a sum or product martingale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDef {
    /// Factor outcome set.
    pub outcomes: Vec<OutcomeDef>,
    /// Factor variable: outcome id to value string.
    pub values: BTreeMap<String, String>,
}

/// A martingale-run configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartConfig {
    /// The prime.
    pub p: u64,
    /// Working precision.
    pub precision: u32,
    /// Independent factors for `sum` and `prod` runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorDef>,
    /// Chain for `markov` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainDef>,
    /// Harmonic state function for `markov` runs: state to value string.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub f: BTreeMap<String, String>,
    /// Horizon for `markov` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Named stopping times to report optional-sampling checks for.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stopping: BTreeMap<String, StoppingSpec>,
}

impl MartConfig {
    /// Resolve the factor list into per-factor variables.
    pub fn load_factors(&self) -> Result<Vec<crate::space::RandomVariableK>, SchemaError> {
        self.factors
            .iter()
            .enumerate()
            .map(|(k, def)| {
                let entries = def
                    .outcomes
                    .iter()
                    .map(|o| Ok((o.id.clone(), parse_rational(&o.prob)?)))
                    .collect::<Result<Vec<_>, SchemaError>>()?;
                let space = FiniteProbSpace::new(entries)
                    .map_err(|e| err(format!("factor {k}: {e}")))?;
                let mut values = Vec::with_capacity(space.len());
                for id in space.outcome_ids() {
                    let s = def.values.get(id).ok_or_else(|| {
                        err(format!("factor {k} is missing a value for outcome {id}"))
                    })?;
                    values.push(parse_value(s, self.p, self.precision)?);
                }
                crate::space::RandomVariableK::new(space, values)
                    .map_err(|e| err(format!("factor {k}: {e}")))
            })
            .collect()
    }

    /// Resolve the chain and state function for a `markov` run.
    pub fn load_chain(&self) -> Result<(MarkovChain, Vec<PadicNumber>), SchemaError> {
        let def = self
            .chain
            .as_ref()
            .ok_or_else(|| err("markov run needs a chain section"))?;
        let chain = load_chain(def)?;
        let f = chain
            .states()
            .iter()
            .map(|s| {
                let value = self
                    .f
                    .get(s)
                    .ok_or_else(|| err(format!("state function is missing state {s}")))?;
                parse_value(value, self.p, self.precision)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((chain, f))
    }
}

/// Serialize a ball as `{"center": "...", "radius": "..."}` strings.
pub fn ball_json(ball: &crate::padic::Ball) -> serde_json::Value {
    let p = ball.center().prime();
    serde_json::json!({
        "center": ball.center().to_string(),
        "radius": ball.radius().repr(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rational_and_explicit_values() {
        let x = parse_value("50", 5, 6).unwrap();
        assert_eq!(x.valuation(), Some(2));
        assert_eq!(x.mantissa(), Some(2));
        let y = parse_value("5^2*2", 5, 6).unwrap();
        assert_eq!(x, y);
        let z = parse_value("p^2*2", 5, 6).unwrap();
        assert_eq!(x, z);
        let q = parse_value("1/3", 5, 2).unwrap();
        assert_eq!(q.mantissa(), Some(17));
        let zero = parse_value("0", 5, 6).unwrap();
        assert!(zero.is_zero());
        assert!(parse_value("7^1*1", 5, 6).is_err());
    }

    #[test]
    fn parses_magnitudes() {
        assert_eq!(parse_magnitude("0", 5).unwrap(), Magnitude::Zero);
        assert_eq!(parse_magnitude("5^-2", 5).unwrap(), Magnitude::Finite(2));
        assert_eq!(parse_magnitude("p^3", 5).unwrap(), Magnitude::Finite(-3));
    }

    #[test]
    fn space_file_roundtrip() {
        let text = r#"{
            "p": 5,
            "precision": 8,
            "outcomes": [
                {"id": "a", "prob": "1/2"},
                {"id": "b", "prob": "1/4"},
                {"id": "c", "prob": "1/4"}
            ],
            "vars": {"X": {"a": "1", "b": "0", "c": "0"}},
            "partitions": {"G": [["a", "b"], ["c"]]},
            "filtration": [[["a", "b", "c"]], [["a", "b"], ["c"]]],
            "stopping": {"T": {"a": 1, "b": 1, "c": 1}}
        }"#;
        let file: SpaceFile = serde_json::from_str(text).unwrap();
        let loaded = file.load().unwrap();
        assert_eq!(loaded.space.len(), 3);
        assert!(loaded.vars.contains_key("X"));
        let g = &loaded.partitions["G"];
        assert_eq!(g.atoms_as_ids(), vec![vec!["a", "b"], vec!["c"]]);
        assert!(loaded.stopping.contains_key("T"));

        // partitions survive a serialize/parse cycle unchanged
        let again = Partition::from_ids(loaded.space.clone(), &g.atoms_as_ids()).unwrap();
        assert_eq!(&again, g);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_sums() {
        let bad: Result<SpaceFile, _> =
            serde_json::from_str(r#"{"p": 5, "precision": 8, "outcomes": [], "bogus": 1}"#);
        assert!(bad.is_err());
        let file: SpaceFile = serde_json::from_str(
            r#"{"p": 5, "precision": 8,
                "outcomes": [{"id": "a", "prob": "1/2"}, {"id": "b", "prob": "1/3"}]}"#,
        )
        .unwrap();
        assert!(file.load().is_err());
    }

    #[test]
    fn rejects_nonmeasurable_stopping_time() {
        let text = r#"{
            "p": 5, "precision": 8,
            "outcomes": [
                {"id": "a", "prob": "1/2"},
                {"id": "b", "prob": "1/4"},
                {"id": "c", "prob": "1/4"}
            ],
            "filtration": [[["a", "b", "c"]], [["a", "b"], ["c"]]],
            "stopping": {"T": {"a": 1, "b": 0, "c": 0}}
        }"#;
        let file: SpaceFile = serde_json::from_str(text).unwrap();
        assert!(file.load().is_err());
    }
}
