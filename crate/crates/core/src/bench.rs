//! Setup-cost comparison of the two scheme variants, and mesh step counts.
//!
//! Costs are counted, not timed: every field multiplication, addition and
//! exponentiation step performed while building `P`, `S` and `A` goes through
//! an [`OpCounter`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blom::{BlomError, SchemeParams, SchemeState, Variant};
use crate::gfmat::{OpCounter, PrimeModulus};
use crate::mesharray;
use crate::rng;

pub const DEFAULT_SIZES: [usize; 11] = [2, 4, 6, 8, 10, 20, 30, 40, 50, 100, 200];
/// Large enough for a 200-node Vandermonde matrix.
pub const DEFAULT_Q: u64 = 257;
pub const DEFAULT_SEED: u64 = 1;

pub const CSV_HEADER: &str = "n,t,q,scheme,field_mults,field_adds,exps,total_ops";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("sweep config: {0}")]
    Config(String),
    #[error(transparent)]
    Scheme(#[from] BlomError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights {
    pub mult: u64,
    pub add: u64,
    pub exp: u64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { mult: 1, add: 1, exp: 1 }
    }
}

impl Weights {
    pub fn total(&self, c: &OpCounter) -> u64 {
        self.mult * c.mults + self.add * c.adds + self.exp * c.exps
    }
}

/// How the security parameter is chosen for each network size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TRule {
    /// `t = n - 1`, so `P` is square.
    #[default]
    NMinusOne,
    Fixed(usize),
}

impl TRule {
    pub fn t_for(&self, n: usize) -> usize {
        match *self {
            TRule::NMinusOne => n.saturating_sub(1),
            TRule::Fixed(t) => t,
        }
    }
}

impl fmt::Display for TRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TRule::NMinusOne => f.write_str("n-1"),
            TRule::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for TRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n-1" => Ok(TRule::NMinusOne),
            _ => s
                .parse()
                .map(TRule::Fixed)
                .map_err(|_| format!("t rule must be `n-1` or an integer, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub t: usize,
    pub q: u64,
    pub scheme: Variant,
    pub field_mults: u64,
    pub field_adds: u64,
    pub exps: u64,
    pub total_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub t_rule: TRule,
    pub q: u64,
    pub seed: u64,
    pub weights: Weights,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: DEFAULT_SIZES.to_vec(),
            t_rule: TRule::default(),
            q: DEFAULT_Q,
            seed: DEFAULT_SEED,
            weights: Weights::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<PrimeModulus, BenchError> {
        if self.sizes.is_empty() {
            return Err(BenchError::Config("sizes must not be empty".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::Config("sizes must be strictly increasing".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| self.t_rule.t_for(n) < 1) {
            return Err(BenchError::Config(format!("t rule gives t < 1 at n={n}")));
        }
        PrimeModulus::new(self.q).map_err(|e| BenchError::Config(format!("q: {e}")))
    }

    pub fn metadata(&self) -> String {
        let w = self.weights;
        format!(
            "# seed={} generator={} weights=mult:{};add:{};exp:{} t_rule={} q={}",
            self.seed,
            rng::GENERATOR_ID,
            w.mult,
            w.add,
            w.exp,
            self.t_rule,
            self.q
        )
    }
}

fn point_seed(seed: u64, n: usize, variant: Variant) -> u64 {
    rng::derive_seed(seed, &format!("bench-{variant}"), n as u64)
}

/// Counts the operations needed to build `P`, `S` and `A` for one network.
pub fn cost_setup(
    variant: Variant,
    n: usize,
    t: usize,
    q: PrimeModulus,
    seed: u64,
    weights: Weights,
) -> Result<BenchRow, BenchError> {
    let params = SchemeParams::new(t, q, n, variant)?;
    let mut counter = OpCounter::new();
    SchemeState::generate_counted(params, seed, Some(&mut counter))?;
    Ok(BenchRow {
        n,
        t,
        q: q.get(),
        scheme: variant,
        field_mults: counter.mults,
        field_adds: counter.adds,
        exps: counter.exps,
        total_ops: weights.total(&counter),
    })
}

/// One row per (size, variant), original first, in size order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<BenchRow>, BenchError> {
    let q = config.validate()?;
    let points: Vec<(usize, Variant)> = config
        .sizes
        .iter()
        .flat_map(|&n| [(n, Variant::Original), (n, Variant::Modified)])
        .collect();
    points
        .par_iter()
        .map(|&(n, variant)| {
            let t = config.t_rule.t_for(n);
            cost_setup(variant, n, t, q, point_seed(config.seed, n, variant), config.weights)
        })
        .collect()
}

pub fn sweep_csv(config: &SweepConfig, rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("ascii csv");
    let body = if rows.is_empty() {
        format!("{CSV_HEADER}\n")
    } else {
        body
    };
    format!("{}\n{body}", config.metadata())
}

/// Reads a sweep CSV back, skipping `#` comment lines.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != CSV_HEADER {
        return Err(BenchError::Config(format!("unexpected header `{headers}`")));
    }
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

pub fn mesh_comparison(n_values: &[usize]) -> Result<String, BenchError> {
    if n_values.is_empty() {
        return Err(BenchError::Config("n values must not be empty".into()));
    }
    Ok(mesharray::step_count_csv(&mesharray::step_count_table(n_values)))
}
