//! Scenario configuration documents (TOML).

use serde::{Deserialize, Serialize};

use crate::blom::{RekeyRule, Variant};
use crate::gfmat::{Matrix, PrimeModulus};

use super::{NetsimError, SETUP_COMPLETE_TIME};

/// Matrices injected in place of generated ones. Entries are reduced mod q,
/// so printed unreduced values can be pasted verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureMatrices {
    #[serde(default)]
    pub public: Option<Vec<Vec<u64>>>,
    #[serde(default)]
    pub secret: Option<Vec<Vec<u64>>>,
    /// Secrets for epochs 2, 3, ... in order; later epochs fall back to the
    /// configured rekey rule.
    #[serde(default)]
    pub secret_overrides: Vec<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub node: usize,
    pub time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub i: usize,
    pub j: usize,
    pub time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub src: usize,
    pub dst: usize,
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub q: u64,
    pub t: usize,
    pub node_count: usize,
    pub variant: Variant,
    pub probe_interval: u64,
    pub seed: u64,
    /// Display names for nodes 1..=node_count.
    #[serde(default)]
    pub names: Vec<String>,
    /// Extra join candidates presenting forged credentials.
    #[serde(default)]
    pub impostors: usize,
    #[serde(default)]
    pub rekey_rule: RekeyRule,
    /// Last time a probe round may start. Defaults to the latest scripted time.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub fixture_matrices: Option<FixtureMatrices>,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    /// Key requests from node `i` for a session with node `j`.
    #[serde(default)]
    pub requests: Vec<PairSpec>,
    /// Session attempts using whatever private rows the nodes already hold.
    #[serde(default)]
    pub sessions: Vec<PairSpec>,
    #[serde(default)]
    pub data: Vec<DataSpec>,
}

fn field(field: impl Into<String>, message: impl Into<String>) -> NetsimError {
    NetsimError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, NetsimError> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let span = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "document".into());
            field(span, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn modulus(&self) -> Result<PrimeModulus, NetsimError> {
        PrimeModulus::new(self.q).map_err(|e| field("q", e.to_string()))
    }

    /// Latest time at which a probe round may start.
    pub fn effective_horizon(&self) -> u64 {
        self.horizon.unwrap_or_else(|| {
            let scripted = self
                .requests
                .iter()
                .chain(&self.sessions)
                .map(|p| p.time)
                .chain(self.data.iter().map(|d| d.time))
                .chain(self.adversaries.iter().map(|a| a.time));
            scripted.max().unwrap_or(SETUP_COMPLETE_TIME)
        })
    }

    pub fn name_of(&self, index: usize) -> String {
        self.names
            .get(index - 1)
            .cloned()
            .unwrap_or_else(|| format!("node{index}"))
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let q = self.modulus()?;
        if self.t < 1 {
            return Err(field("t", "must be at least 1"));
        }
        if self.node_count < 2 {
            return Err(field("node_count", "must be at least 2"));
        }
        if self.variant == Variant::Original && self.node_count as u64 > q.get() - 1 {
            return Err(field("node_count", "original variant needs node_count <= q - 1"));
        }
        if self.probe_interval == 0 {
            return Err(field("probe_interval", "must be at least 1"));
        }
        if !self.names.is_empty() && self.names.len() != self.node_count {
            return Err(field("names", "must list exactly node_count names"));
        }
        let node_ok = |n: usize| (1..=self.node_count).contains(&n);
        let scripted = |t: u64| t > SETUP_COMPLETE_TIME;
        for (idx, a) in self.adversaries.iter().enumerate() {
            if !node_ok(a.node) {
                return Err(field(format!("adversaries[{idx}].node"), "no such node"));
            }
        }
        for (name, list) in [("requests", &self.requests), ("sessions", &self.sessions)] {
            for (idx, r) in list.iter().enumerate() {
                if !node_ok(r.i) {
                    return Err(field(format!("{name}[{idx}].i"), "no such node"));
                }
                if !node_ok(r.j) || r.i == r.j {
                    return Err(field(format!("{name}[{idx}].j"), "must be a different existing node"));
                }
                if !scripted(r.time) {
                    return Err(field(
                        format!("{name}[{idx}].time"),
                        format!("must be after setup completes at t={SETUP_COMPLETE_TIME}"),
                    ));
                }
            }
        }
        for (idx, d) in self.data.iter().enumerate() {
            if !node_ok(d.src) {
                return Err(field(format!("data[{idx}].src"), "no such node"));
            }
            if !node_ok(d.dst) || d.src == d.dst {
                return Err(field(format!("data[{idx}].dst"), "must be a different existing node"));
            }
            if !scripted(d.time) {
                return Err(field(
                    format!("data[{idx}].time"),
                    format!("must be after setup completes at t={SETUP_COMPLETE_TIME}"),
                ));
            }
        }
        if let Some(fx) = &self.fixture_matrices {
            let order = self.t + 1;
            let check = |name: &str, rows: &Vec<Vec<u64>>, dims: (usize, usize)| {
                let m = Matrix::from_rows_reduced(rows, q).map_err(|e| field(name, e.to_string()))?;
                if m.dims() != dims {
                    return Err(field(
                        name,
                        format!("is {}x{}, expected {}x{}", m.rows(), m.cols(), dims.0, dims.1),
                    ));
                }
                Ok(m)
            };
            if let Some(p) = &fx.public {
                check("fixture_matrices.public", p, (order, self.node_count))?;
            }
            if let Some(s) = &fx.secret {
                let s = check("fixture_matrices.secret", s, (order, order))?;
                if !crate::gfmat::is_symmetric(&s) {
                    return Err(field("fixture_matrices.secret", "must be symmetric"));
                }
            }
            for (idx, s) in fx.secret_overrides.iter().enumerate() {
                let name = format!("fixture_matrices.secret_overrides[{idx}]");
                let s = check(&name, s, (order, order))?;
                if !crate::gfmat::is_symmetric(&s) {
                    return Err(field(name, "must be symmetric"));
                }
            }
        }
        Ok(())
    }
}
