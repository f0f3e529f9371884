//! Blom's key predistribution and the random-public-matrix variant with a
//! rotating secret matrix.
//!
//! Orientation: the public matrix `P` is `(t+1)×N`, the secret `S` is a
//! symmetric `(t+1)×(t+1)` matrix held by the authority, and the private
//! matrix `A = (S·P)ᵀ` is `N×(t+1)`. Node `i` (0-based) holds row `i` of `A`;
//! its public key is column `i` of `P`. Because `S` is symmetric,
//! `A·P = Pᵀ·S·P` is symmetric and any two nodes derive the same key.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfmat::{
    self, is_symmetric, mat_add, mat_mul, reverse_rows, transpose, GfError, Matrix, OpCounter,
    PrimeModulus, VandermondeSeeds,
};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlomError {
    #[error(transparent)]
    Field(#[from] GfError),
    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),
    #[error("cannot draw {nodes} distinct nonzero seeds mod {modulus}")]
    TooManyNodes { nodes: usize, modulus: u64 },
    #[error("secret matrix is not symmetric")]
    AsymmetricSecret,
    #[error("private row has {row} entries but public column has {col}")]
    LengthMismatch { row: usize, col: usize },
    #[error("node index {index} out of range for {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
    #[error("state document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, BlomError>;

/// Which public matrix the scheme uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Vandermonde public matrix from distinct nonzero seeds.
    Original,
    /// Uniform random public matrix.
    Modified,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Modified => "modified",
        })
    }
}

impl FromStr for Variant {
    type Err = BlomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "modified" => Ok(Variant::Modified),
            other => Err(BlomError::InvalidParams(format!(
                "unknown variant `{other}` (expected original|modified)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeParams {
    pub t: usize,
    pub modulus: PrimeModulus,
    pub nodes: usize,
    pub variant: Variant,
}

impl SchemeParams {
    pub fn new(t: usize, modulus: PrimeModulus, nodes: usize, variant: Variant) -> Result<Self> {
        let params = Self {
            t,
            modulus,
            nodes,
            variant,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 1 {
            return Err(BlomError::InvalidParams("t must be at least 1".into()));
        }
        if self.nodes < 2 {
            return Err(BlomError::InvalidParams("network needs at least 2 nodes".into()));
        }
        let q = self.modulus.get();
        if self.variant == Variant::Original {
            if self.nodes as u64 > q - 1 {
                return Err(BlomError::TooManyNodes {
                    nodes: self.nodes,
                    modulus: q,
                });
            }
            if self.t as u64 + 1 > q {
                return Err(BlomError::Field(GfError::TooManyPowers {
                    rows: self.t + 1,
                    modulus: q,
                }));
            }
        }
        Ok(())
    }

    /// Dimension of the secret matrix and of every key vector.
    pub fn order(&self) -> usize {
        self.t + 1
    }
}

/// Draws `N` distinct nonzero Vandermonde seeds from `seed`.
pub fn draw_vandermonde_seeds(params: &SchemeParams, seed: u64) -> Result<VandermondeSeeds> {
    let q = params.modulus.get();
    let n = params.nodes;
    if n as u64 > q - 1 {
        return Err(BlomError::TooManyNodes { nodes: n, modulus: q });
    }
    let mut gen = rng::seeded(seed);
    let seeds = if (n as u64) * 2 > q - 1 {
        let mut all: Vec<u64> = (1..q).collect();
        all.shuffle(&mut gen);
        all.truncate(n);
        all
    } else {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let s = gen.gen_range(1..q);
            if seen.insert(s) {
                out.push(s);
            }
        }
        out
    };
    Ok(VandermondeSeeds::new(seeds, params.modulus)?)
}

/// Builds the `(t+1)×N` public matrix. Only the original variant spends
/// exponentiation steps; random generation costs no field operations.
pub fn setup_public(
    params: &SchemeParams,
    seed: u64,
    counter: Option<&mut OpCounter>,
) -> Result<Matrix> {
    params.validate()?;
    match params.variant {
        Variant::Original => {
            let seeds = draw_vandermonde_seeds(params, seed)?;
            Ok(gfmat::vandermonde(&seeds, params.t, params.modulus, counter)?)
        }
        Variant::Modified => Ok(gfmat::random_matrix(
            params.order(),
            params.nodes,
            params.modulus,
            seed,
        )?),
    }
}

/// `S = M·Mᵀ` for a seeded random `(t+1)×(t+1)` matrix `M`.
pub fn generate_secret(
    params: &SchemeParams,
    seed: u64,
    counter: Option<&mut OpCounter>,
) -> Result<Matrix> {
    let factor = gfmat::random_matrix(params.order(), params.order(), params.modulus, seed)?;
    Ok(gfmat::symmetric_from_random(&factor, counter)?)
}

/// `A = (S·P)ᵀ`, the `N×(t+1)` matrix of private rows.
pub fn derive_private_matrix(
    secret: &Matrix,
    public: &Matrix,
    counter: Option<&mut OpCounter>,
) -> Result<Matrix> {
    if !is_symmetric(secret) {
        return Err(BlomError::AsymmetricSecret);
    }
    Ok(transpose(&mat_mul(secret, public, counter)?))
}

/// Full `N×N` key matrix `A·P`.
pub fn key_matrix(private: &Matrix, public: &Matrix, counter: Option<&mut OpCounter>) -> Result<Matrix> {
    Ok(mat_mul(private, public, counter)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateRow {
    /// 0-based node index.
    pub owner: usize,
    pub row: Vec<u64>,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicColumn {
    /// 0-based node index.
    pub owner: usize,
    pub col: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedKey {
    pub value: u64,
    pub epoch: u64,
    /// Unordered pair stored as (min, max).
    pub pair: (usize, usize),
}

impl SharedKey {
    /// A zero key is returned like any other; callers may choose to treat it
    /// as weak.
    pub fn is_weak(&self) -> bool {
        self.value == 0
    }
}

/// Dot product of a node's private row with its peer's public column.
pub fn shared_key(row: &PrivateRow, col: &PublicColumn, modulus: PrimeModulus) -> Result<SharedKey> {
    if row.row.len() != col.col.len() {
        return Err(BlomError::LengthMismatch {
            row: row.row.len(),
            col: col.col.len(),
        });
    }
    let value = row
        .row
        .iter()
        .zip(&col.col)
        .fold(0, |acc, (&a, &p)| modulus.add(acc, modulus.mul(a, p)));
    Ok(SharedKey {
        value,
        epoch: row.epoch,
        pair: (row.owner.min(col.owner), row.owner.max(col.owner)),
    })
}

/// Ways of deriving the next symmetric secret from the current one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateRule {
    /// `S·Sᵀ`.
    SelfTransposeProduct,
    /// `S + R` for a symmetric `R`.
    AddSymmetric(Matrix),
    /// `S·J·S` where `J` reverses row order.
    ReversalProduct,
}

pub fn update_secret(secret: &Matrix, rule: &UpdateRule) -> Result<Matrix> {
    if !is_symmetric(secret) {
        return Err(BlomError::AsymmetricSecret);
    }
    let next = match rule {
        UpdateRule::SelfTransposeProduct => mat_mul(secret, &transpose(secret), None)?,
        UpdateRule::AddSymmetric(r) => {
            if !is_symmetric(r) {
                return Err(BlomError::AsymmetricSecret);
            }
            mat_add(secret, r)?
        }
        UpdateRule::ReversalProduct => mat_mul(secret, &reverse_rows(secret), None)?,
    };
    debug_assert!(is_symmetric(&next));
    Ok(next)
}

/// Seed-driven rekey policy, as configured for a running authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RekeyRule {
    #[default]
    ReversalProduct,
    SelfTransposeProduct,
    /// Adds a freshly generated `M·Mᵀ`.
    AddRandomSymmetric,
    /// Replaces the secret with a freshly generated one.
    Fresh,
}

impl FromStr for RekeyRule {
    type Err = BlomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reversal-product" => Ok(Self::ReversalProduct),
            "self-transpose-product" => Ok(Self::SelfTransposeProduct),
            "add-random-symmetric" => Ok(Self::AddRandomSymmetric),
            "fresh" => Ok(Self::Fresh),
            other => Err(BlomError::InvalidParams(format!("unknown rekey rule `{other}`"))),
        }
    }
}

/// Snapshot of the authority's key material at one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeState {
    params: SchemeParams,
    public: Matrix,
    secret: Matrix,
    private: Matrix,
    epoch: u64,
    seed: u64,
}

/// Epoch number of a freshly set-up scheme.
pub const INITIAL_EPOCH: u64 = 1;

impl SchemeState {
    /// Generates `P` and `S` from sub-streams of `seed` and derives `A`.
    pub fn generate(params: SchemeParams, seed: u64) -> Result<Self> {
        Self::generate_counted(params, seed, None)
    }

    pub fn generate_counted(
        params: SchemeParams,
        seed: u64,
        mut counter: Option<&mut OpCounter>,
    ) -> Result<Self> {
        let public = setup_public(&params, rng::derive_seed(seed, "public", 0), counter.as_deref_mut())?;
        let secret = generate_secret(&params, rng::derive_seed(seed, "secret", 0), counter.as_deref_mut())?;
        let private = derive_private_matrix(&secret, &public, counter)?;
        Ok(Self {
            params,
            public,
            secret,
            private,
            epoch: INITIAL_EPOCH,
            seed,
        })
    }

    /// Assembles a state from given `P` and `S` (used for fixtures and imports).
    pub fn from_parts(
        params: SchemeParams,
        public: Matrix,
        secret: Matrix,
        epoch: u64,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let order = params.order();
        if public.dims() != (order, params.nodes) {
            return Err(BlomError::InvalidParams(format!(
                "public matrix is {}x{}, expected {}x{}",
                public.rows(),
                public.cols(),
                order,
                params.nodes
            )));
        }
        if secret.dims() != (order, order) {
            return Err(BlomError::InvalidParams(format!(
                "secret matrix is {}x{}, expected {order}x{order}",
                secret.rows(),
                secret.cols()
            )));
        }
        if public.modulus() != params.modulus || secret.modulus() != params.modulus {
            return Err(BlomError::InvalidParams("matrix modulus differs from q".into()));
        }
        let private = derive_private_matrix(&secret, &public, None)?;
        Ok(Self {
            params,
            public,
            secret,
            private,
            epoch,
            seed,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn public(&self) -> &Matrix {
        &self.public
    }

    pub fn secret(&self) -> &Matrix {
        &self.secret
    }

    pub fn private(&self) -> &Matrix {
        &self.private
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_node(&self, index: usize) -> Result<()> {
        if index >= self.params.nodes {
            return Err(BlomError::NodeOutOfRange {
                index,
                nodes: self.params.nodes,
            });
        }
        Ok(())
    }

    pub fn private_row(&self, index: usize) -> Result<PrivateRow> {
        self.check_node(index)?;
        Ok(PrivateRow {
            owner: index,
            row: self.private.row(index).to_vec(),
            epoch: self.epoch,
        })
    }

    pub fn public_column(&self, index: usize) -> Result<PublicColumn> {
        self.check_node(index)?;
        Ok(PublicColumn {
            owner: index,
            col: self.public.column(index),
        })
    }

    /// Key node `i` derives for talking to node `j`.
    pub fn key(&self, i: usize, j: usize) -> Result<SharedKey> {
        shared_key(&self.private_row(i)?, &self.public_column(j)?, self.params.modulus)
    }

    pub fn key_matrix(&self) -> Result<Matrix> {
        key_matrix(&self.private, &self.public, None)
    }

    /// Next epoch under `rule`. `seed` feeds the rules that draw fresh
    /// randomness; `P` is unchanged.
    pub fn rekey(&self, rule: RekeyRule, seed: u64) -> Result<Self> {
        let next = match rule {
            RekeyRule::ReversalProduct => update_secret(&self.secret, &UpdateRule::ReversalProduct)?,
            RekeyRule::SelfTransposeProduct => {
                update_secret(&self.secret, &UpdateRule::SelfTransposeProduct)?
            }
            RekeyRule::AddRandomSymmetric => {
                let r = generate_secret(&self.params, seed, None)?;
                update_secret(&self.secret, &UpdateRule::AddSymmetric(r))?
            }
            RekeyRule::Fresh => generate_secret(&self.params, seed, None)?,
        };
        self.rekey_with_secret(next)
    }

    /// Next epoch with an externally supplied secret.
    pub fn rekey_with_secret(&self, secret: Matrix) -> Result<Self> {
        if secret.dims() != self.secret.dims() || secret.modulus() != self.params.modulus {
            return Err(BlomError::InvalidParams(
                "replacement secret has the wrong shape or modulus".into(),
            ));
        }
        let private = derive_private_matrix(&secret, &self.public, None)?;
        Ok(Self {
            params: self.params,
            public: self.public.clone(),
            secret,
            private,
            epoch: self.epoch + 1,
            seed: self.seed,
        })
    }

    /// Structured text export with a fixed field order. The secret is only
    /// written when `include_secret` is set (authority-side exports).
    pub fn to_document(&self, include_secret: bool) -> String {
        let doc = StateDocument {
            format: STATE_FORMAT.into(),
            generator: rng::GENERATOR_ID.into(),
            seed: self.seed,
            variant: self.params.variant,
            t: self.params.t,
            q: self.params.modulus.get(),
            nodes: self.params.nodes,
            epoch: self.epoch,
            public: self.public.to_rows(),
            secret: include_secret.then(|| self.secret.to_rows()),
            private: self.private.to_rows(),
        };
        toml::to_string(&doc).expect("state document serializes")
    }
}

const STATE_FORMAT: &str = "blom-state/1";

#[derive(Debug, Serialize, Deserialize)]
struct StateDocument {
    format: String,
    generator: String,
    seed: u64,
    variant: Variant,
    t: usize,
    q: u64,
    nodes: usize,
    epoch: u64,
    public: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    secret: Option<Vec<Vec<u64>>>,
    private: Vec<Vec<u64>>,
}

/// Parsed state document. Node-side exports carry no secret and therefore
/// cannot be turned back into a full [`SchemeState`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportedState {
    pub params: SchemeParams,
    pub public: Matrix,
    pub secret: Option<Matrix>,
    pub private: Matrix,
    pub epoch: u64,
    pub seed: u64,
    pub generator: String,
}

impl ImportedState {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: StateDocument =
            toml::from_str(text).map_err(|e| BlomError::Document(e.to_string()))?;
        if doc.format != STATE_FORMAT {
            return Err(BlomError::Document(format!("unsupported format `{}`", doc.format)));
        }
        let modulus = PrimeModulus::new(doc.q)?;
        let params = SchemeParams::new(doc.t, modulus, doc.nodes, doc.variant)?;
        let public = Matrix::from_rows(&doc.public, modulus)?;
        let private = Matrix::from_rows(&doc.private, modulus)?;
        let secret = doc
            .secret
            .map(|rows| Matrix::from_rows(&rows, modulus))
            .transpose()?;
        if private.dims() != (params.nodes, params.order()) {
            return Err(BlomError::Document("private matrix has the wrong shape".into()));
        }
        if let Some(s) = &secret {
            let expected = derive_private_matrix(s, &public, None)?;
            if expected != private {
                return Err(BlomError::Document(
                    "private matrix is inconsistent with the secret and public matrices".into(),
                ));
            }
        }
        Ok(Self {
            params,
            public,
            secret,
            private,
            epoch: doc.epoch,
            seed: doc.seed,
            generator: doc.generator,
        })
    }

    pub fn into_state(self) -> Result<SchemeState> {
        let secret = self
            .secret
            .ok_or_else(|| BlomError::Document("document carries no secret matrix".into()))?;
        SchemeState::from_parts(self.params, self.public, secret, self.epoch, self.seed)
    }
}

/// Outcome of checking that every `(t+1)`-column subset of `P` is independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TSecurityReport {
    pub t: usize,
    pub subset_size: usize,
    pub exhaustive: bool,
    pub subsets_checked: u64,
    pub first_failure: Option<Vec<usize>>,
}

impl TSecurityReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

impl fmt::Display for TSecurityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.exhaustive { "exhaustive" } else { "sampled" };
        match &self.first_failure {
            None => write!(
                f,
                "t-security structure: pass ({} {}-column subsets, {mode})",
                self.subsets_checked, self.subset_size
            ),
            Some(s) => write!(
                f,
                "t-security structure: fail (dependent columns {s:?} after {} subsets, {mode})",
                self.subsets_checked
            ),
        }
    }
}

/// Subset budget above which the check switches to sampling.
pub const EXHAUSTIVE_SUBSET_LIMIT: u64 = 20_000;
pub const SAMPLED_SUBSETS: u64 = 2_000;

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Checks column independence of `P` for every subset of size
/// `min(t+1, N)`: exhaustively when there are at most
/// [`EXHAUSTIVE_SUBSET_LIMIT`] subsets, otherwise on [`SAMPLED_SUBSETS`]
/// subsets drawn from `seed`.
pub fn verify_t_security_structure(public: &Matrix, t: usize, seed: u64) -> TSecurityReport {
    let n = public.cols();
    let k = (t + 1).min(n);
    let total = binomial(n, k);
    let mut report = TSecurityReport {
        t,
        subset_size: k,
        exhaustive: total <= EXHAUSTIVE_SUBSET_LIMIT,
        subsets_checked: 0,
        first_failure: None,
    };
    let check = |subset: &[usize], report: &mut TSecurityReport| -> bool {
        report.subsets_checked += 1;
        let ok = gfmat::columns_independent(public, subset).unwrap_or(false);
        if !ok {
            report.first_failure = Some(subset.to_vec());
        }
        ok
    };
    if report.exhaustive {
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            if !check(&subset, &mut report) {
                break;
            }
            // advance to the next combination in lexicographic order
            let Some(pos) = (0..k).rev().find(|&p| subset[p] < n - k + p) else {
                break;
            };
            subset[pos] += 1;
            for p in pos + 1..k {
                subset[p] = subset[p - 1] + 1;
            }
        }
    } else {
        let mut gen = rng::seeded(seed);
        let all: Vec<usize> = (0..n).collect();
        for _ in 0..SAMPLED_SUBSETS {
            let mut subset: Vec<usize> = all.choose_multiple(&mut gen, k).copied().collect();
            subset.sort_unstable();
            if !check(&subset, &mut report) {
                break;
            }
        }
    }
    report
}
