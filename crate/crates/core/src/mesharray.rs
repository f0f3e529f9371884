//! Step-accurate simulation of processor-array matrix multiplication.
//!
//! An `n×n` array of nodes computes `C = A·B`; node `(i, j)` owns `c_ij` and
//! performs one multiply-accumulate `a_ik·b_kj` per active step. A
//! [`Schedule`] says which term `k` each node handles at each step. Two
//! schedules are built in:
//!
//! * the standard systolic array, `step = i + j + k − 2`, finishing at `3n−2`;
//! * the mesh schedule, where `a` operands circulate rightward and `b`
//!   operands downward with wraparound on two separate transport planes and
//!   node `(i, j)` starts at step `max(i, j)`, finishing at `2n−1`.
//!
//! All indices here (rows, columns, terms, steps) are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::gfmat::{Matrix, PrimeModulus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error("array order must be at least 1")]
    EmptyArray,
    #[error("operand is {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch { rows: usize, cols: usize, n: usize },
    #[error("schedule is for order {schedule}, operands have order {operands}")]
    OrderMismatch { schedule: usize, operands: usize },
    #[error("schedule incomplete: node ({0}, {1}) never processes term {2}")]
    IncompleteSchedule(usize, usize, usize),
    #[error("schedule assigns term {k} more than once at node ({i}, {j})")]
    DuplicateTerm { i: usize, j: usize, k: usize },
    #[error("integer overflow at node ({0}, {1})")]
    Overflow(usize, usize),
    #[error("arrangement has no rows")]
    EmptyArrangement,
    #[error("arrangement row {row} has {len} entries, expected {expected}")]
    RaggedArrangement { row: usize, len: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    pub n: usize,
    /// `None` means exact integer arithmetic.
    pub modulus: Option<PrimeModulus>,
}

/// Assignment of term indices to `(node, step)` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    n: usize,
    /// `(i, j, step) -> k`
    assignment: BTreeMap<(usize, usize, usize), usize>,
}

impl Schedule {
    pub fn from_assignments(
        n: usize,
        assignments: impl IntoIterator<Item = ((usize, usize, usize), usize)>,
    ) -> Self {
        Self {
            n,
            assignment: assignments.into_iter().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn term_at(&self, i: usize, j: usize, step: usize) -> Option<usize> {
        self.assignment.get(&(i, j, step)).copied()
    }

    pub fn assignments(&self) -> impl Iterator<Item = ((usize, usize, usize), usize)> + '_ {
        self.assignment.iter().map(|(&key, &k)| (key, k))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Drops one assignment, returning the term it held.
    pub fn remove(&mut self, i: usize, j: usize, step: usize) -> Option<usize> {
        self.assignment.remove(&(i, j, step))
    }

    pub fn insert(&mut self, i: usize, j: usize, step: usize, k: usize) -> Option<usize> {
        self.assignment.insert((i, j, step), k)
    }

    /// Last step with any assignment (0 for an empty schedule).
    pub fn makespan(&self) -> usize {
        self.assignment.keys().map(|&(_, _, t)| t).max().unwrap_or(0)
    }

    /// Steps at which node `(i, j)` is active, ascending.
    pub fn active_steps(&self, i: usize, j: usize) -> Vec<usize> {
        self.assignment
            .range((i, j, 0)..=(i, j, usize::MAX))
            .map(|(&(_, _, t), _)| t)
            .collect()
    }
}

/// Standard systolic array: node `(i, j)` handles term `k` at `i + j + k − 2`.
pub fn standard_schedule(n: usize) -> Schedule {
    let mut assignment = BTreeMap::new();
    for i in 1..=n {
        for j in 1..=n {
            for k in 1..=n {
                assignment.insert((i, j, i + j + k - 2), k);
            }
        }
    }
    Schedule { n, assignment }
}

/// Mesh schedule: node `(i, j)` is active for steps `max(i,j) ..= max(i,j)+n−1`
/// and at step `t` handles the `k ∈ [1, n]` with `k ≡ t − i − j + 2 (mod n)`.
pub fn mesh_schedule(n: usize) -> Schedule {
    let mut assignment = BTreeMap::new();
    for i in 1..=n {
        for j in 1..=n {
            let start = i.max(j);
            for t in start..start + n {
                let k = match (t + 2 + 2 * n - i - j) % n {
                    0 => n,
                    r => r,
                };
                assignment.insert((i, j, t), k);
            }
        }
    }
    Schedule { n, assignment }
}

/// Square integer operand for the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl IntMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, MeshError> {
        let n = rows.len();
        if n == 0 {
            return Err(MeshError::EmptyArray);
        }
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(MeshError::DimensionMismatch {
                    rows: n,
                    cols: r.len(),
                    n,
                });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { n, entries })
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self, MeshError> {
        if !m.is_square() {
            return Err(MeshError::DimensionMismatch {
                rows: m.rows(),
                cols: m.cols(),
                n: m.rows(),
            });
        }
        Ok(Self {
            n: m.rows(),
            entries: m.entries().iter().map(|&e| e as i64).collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 1-based access.
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[(i - 1) * self.n + (j - 1)]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.n).map(<[i64]>::to_vec).collect()
    }
}

/// One multiply-accumulate: node `(i, j)` added term `k` at `step`, leaving
/// `partial_sum` in its accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub partial_sum: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationTrace {
    pub n: usize,
    /// Records ordered by step, then node.
    pub records: Vec<TraceRecord>,
    /// `snapshots[s]` holds all `n²` accumulators (row-major) after step `s+1`.
    pub snapshots: Vec<Vec<i64>>,
    /// Number of terms each node has accumulated after each step, same layout.
    pub term_counts: Vec<Vec<usize>>,
    pub product: IntMatrix,
    pub steps_used: usize,
}

impl SimulationTrace {
    /// The node's multiply-accumulates in step order.
    pub fn node_history(&self, i: usize, j: usize) -> Vec<TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.i == i && r.j == j)
            .copied()
            .collect()
    }

    /// Accumulator of node `(i, j)` after its `active`-th active step (1-based).
    pub fn accumulator_after_active_step(&self, i: usize, j: usize, active: usize) -> Option<i64> {
        self.node_history(i, j)
            .get(active.checked_sub(1)?)
            .map(|r| r.partial_sum)
    }

    /// One `step i j k partial_sum` line per multiply-accumulate.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# step i j k partial_sum\n");
        for r in &self.records {
            let _ = writeln!(out, "{} {} {} {} {}", r.step, r.i, r.j, r.k, r.partial_sum);
        }
        out
    }
}

/// Runs the array for `schedule.makespan()` steps.
pub fn simulate(
    a: &IntMatrix,
    b: &IntMatrix,
    schedule: &Schedule,
    config: ArrayConfig,
) -> Result<SimulationTrace, MeshError> {
    let n = config.n;
    if n == 0 {
        return Err(MeshError::EmptyArray);
    }
    for m in [a, b] {
        if m.n != n {
            return Err(MeshError::DimensionMismatch {
                rows: m.n,
                cols: m.n,
                n,
            });
        }
    }
    if schedule.n != n {
        return Err(MeshError::OrderMismatch {
            schedule: schedule.n,
            operands: n,
        });
    }
    let report = validate_schedule(schedule);
    if let Some(&(i, j, k)) = report.duplicates.first() {
        return Err(MeshError::DuplicateTerm { i, j, k });
    }
    if let Some(&(i, j, k)) = report.missing.first() {
        return Err(MeshError::IncompleteSchedule(i, j, k));
    }

    let reduce = |x: i64| match config.modulus {
        Some(q) => x.rem_euclid(q.get() as i64),
        None => x,
    };
    let steps = schedule.makespan();
    let mut acc = vec![0i64; n * n];
    let mut counts = vec![0usize; n * n];
    let mut records = Vec::with_capacity(n * n * n);
    let mut snapshots = Vec::with_capacity(steps);
    let mut term_counts = Vec::with_capacity(steps);

    let mut by_step: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
    for ((i, j, t), k) in schedule.assignments() {
        by_step.entry(t).or_default().push((i, j, k));
    }
    for step in 1..=steps {
        for &(i, j, k) in by_step.get(&step).map(Vec::as_slice).unwrap_or(&[]) {
            let cell = (i - 1) * n + (j - 1);
            let prod = reduce(a.get(i, k))
                .checked_mul(reduce(b.get(k, j)))
                .ok_or(MeshError::Overflow(i, j))?;
            let sum = acc[cell]
                .checked_add(reduce(prod))
                .ok_or(MeshError::Overflow(i, j))?;
            acc[cell] = reduce(sum);
            counts[cell] += 1;
            records.push(TraceRecord {
                step,
                i,
                j,
                k,
                partial_sum: acc[cell],
            });
        }
        snapshots.push(acc.clone());
        term_counts.push(counts.clone());
    }
    Ok(SimulationTrace {
        n,
        records,
        snapshots,
        term_counts,
        product: IntMatrix { n, entries: acc },
        steps_used: steps,
    })
}

/// Plain triple-loop product, used to check simulator output.
pub fn direct_product(a: &IntMatrix, b: &IntMatrix, modulus: Option<PrimeModulus>) -> IntMatrix {
    let n = a.n;
    let mut entries = vec![0i64; n * n];
    for i in 1..=n {
        for j in 1..=n {
            let mut s: i128 = 0;
            for k in 1..=n {
                s += a.get(i, k) as i128 * b.get(k, j) as i128;
            }
            if let Some(q) = modulus {
                s = s.rem_euclid(q.get() as i128);
            }
            entries[(i - 1) * n + (j - 1)] = s as i64;
        }
    }
    IntMatrix { n, entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScheduleReport {
    pub makespan: usize,
    /// `(i, j, k)` never assigned.
    pub missing: Vec<(usize, usize, usize)>,
    /// `(i, j, k)` assigned more than once.
    pub duplicates: Vec<(usize, usize, usize)>,
    /// Assignments naming a node or term outside `1..=n`.
    pub out_of_range: Vec<((usize, usize, usize), usize)>,
    /// Nodes whose active steps have an idle gap.
    pub gaps: Vec<(usize, usize)>,
    /// `(i, j, step)` slots whose successor on the a- or b-plane received a
    /// different term one step later.
    pub movement_violations: Vec<(usize, usize, usize)>,
}

impl ScheduleReport {
    pub fn coverage_ok(&self) -> bool {
        self.missing.is_empty() && self.duplicates.is_empty() && self.out_of_range.is_empty()
    }

    pub fn contiguity_ok(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn movement_ok(&self) -> bool {
        self.movement_violations.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.coverage_ok() && self.contiguity_ok() && self.movement_ok()
    }
}

/// Checks coverage (each node sees every term once), contiguity (no idle
/// step inside a node's active window) and movement consistency: the `a_ik`
/// used at `(i, j)` on step `t` is the one used at `(i, j+1 mod n)` on step
/// `t+1`, and likewise `b_kj` moving down to `(i+1 mod n, j)`, whenever
/// those neighbours are active at `t+1`.
pub fn validate_schedule(schedule: &Schedule) -> ScheduleReport {
    let n = schedule.n;
    let mut report = ScheduleReport {
        makespan: schedule.makespan(),
        ..Default::default()
    };
    let mut seen: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for ((i, j, t), k) in schedule.assignments() {
        let in_range = |x: usize| (1..=n).contains(&x);
        if !(in_range(i) && in_range(j) && in_range(k)) || t == 0 {
            report.out_of_range.push(((i, j, t), k));
            continue;
        }
        if !seen.entry((i, j)).or_default().insert(k) {
            report.duplicates.push((i, j, k));
        }
    }
    let wrap = |x: usize| if x == n { 1 } else { x + 1 };
    for i in 1..=n {
        for j in 1..=n {
            let terms = seen.get(&(i, j));
            for k in 1..=n {
                if !terms.is_some_and(|s| s.contains(&k)) {
                    report.missing.push((i, j, k));
                }
            }
            let steps = schedule.active_steps(i, j);
            if steps.windows(2).any(|w| w[1] != w[0] + 1) {
                report.gaps.push((i, j));
            }
            for t in steps {
                let k = schedule.term_at(i, j, t).expect("active step has a term");
                let right = schedule.term_at(i, wrap(j), t + 1);
                let down = schedule.term_at(wrap(i), j, t + 1);
                if right.is_some_and(|k2| k2 != k) || down.is_some_and(|k2| k2 != k) {
                    report.movement_violations.push((i, j, t));
                }
            }
        }
    }
    report
}

/// Boundary feed order, one sequence per array row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputArrangement {
    pub rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MirrorCheck {
    /// 1-based row numbers; `upper == lower` for a self-symmetric middle row.
    pub upper: usize,
    pub lower: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryReport {
    pub checks: Vec<MirrorCheck>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<(usize, usize)> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| (c.upper, c.lower))
            .collect()
    }
}

/// Row-mirror properties of an arrangement with `n` rows (1-based):
/// row `r` must equal row `n+2−r` reversed for `r` in `2..=(n+1)/2` (odd `n`)
/// or `2..=n/2` (even `n`); for even `n` the middle row `n/2+1` must be a
/// palindrome. Row 1 is unconstrained.
pub fn check_arrangement_symmetry(arr: &InputArrangement) -> Result<SymmetryReport, MeshError> {
    let n = arr.rows.len();
    let width = arr.rows.first().ok_or(MeshError::EmptyArrangement)?.len();
    for (idx, row) in arr.rows.iter().enumerate() {
        if row.len() != width {
            return Err(MeshError::RaggedArrangement {
                row: idx + 1,
                len: row.len(),
                expected: width,
            });
        }
    }
    let row = |r: usize| &arr.rows[r - 1];
    let mirrors = |x: &[u64], y: &[u64]| x.iter().eq(y.iter().rev());
    let last_upper = if n % 2 == 1 { n.div_ceil(2) } else { n / 2 };
    let mut checks: Vec<MirrorCheck> = (2..=last_upper)
        .map(|r| MirrorCheck {
            upper: r,
            lower: n + 2 - r,
            passed: mirrors(row(r), row(n + 2 - r)),
        })
        .collect();
    if n.is_multiple_of(2) {
        let mid = n / 2 + 1;
        checks.push(MirrorCheck {
            upper: mid,
            lower: mid,
            passed: mirrors(row(mid), row(mid)),
        });
    }
    Ok(SymmetryReport { checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCount {
    pub n: usize,
    pub standard_steps: usize,
    pub mesh_steps: usize,
}

/// Closed-form makespans `(n, 3n−2, 2n−1)`.
pub fn step_count_table(n_values: &[usize]) -> Vec<StepCount> {
    n_values
        .iter()
        .map(|&n| StepCount {
            n,
            standard_steps: 3 * n - 2,
            mesh_steps: 2 * n - 1,
        })
        .collect()
}

pub fn step_count_csv(rows: &[StepCount]) -> String {
    let mut out = String::from("n,standard_steps,mesh_steps\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.n, r.standard_steps, r.mesh_steps);
    }
    out
}
