//! Acceptance suite: one PASS/FAIL line per criterion, each with a runtime
//! budget. Expected values are literals or come from the small oracles
//! below, which use plain integer arithmetic rather than the library.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blom_core::bench::{self, SweepConfig};
use blom_core::blom::{self, SchemeParams, SchemeState, UpdateRule, Variant};
use blom_core::gfmat::{self, Matrix, PrimeModulus, VandermondeSeeds};
use blom_core::mesharray::{self, ArrayConfig, IntMatrix};
use blom_core::netsim::{self, Addr, Disposition, Event, EventLog, MessageKind, Payload, SessionFailure};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(v: u64) -> PrimeModulus {
    PrimeModulus::new(v).unwrap()
}

// ---- oracles ----

fn naive_mul(a: &[Vec<u64>], b: &[Vec<u64>], p: u64) -> Vec<Vec<u64>> {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| (0..c).map(|j| (0..k).map(|x| a[i][x] * b[x][j]).sum::<u64>() % p).collect())
        .collect()
}

fn naive_transpose(a: &[Vec<u64>]) -> Vec<Vec<u64>> {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Rank mod p with Fermat inverses.
fn naive_rank(mut m: Vec<Vec<u64>>, p: u64) -> usize {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| m[r][c] % p != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = pow_mod(m[rank][c], p - 2, p);
        for r in 0..rows {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c] * inv % p;
                for x in 0..cols {
                    m[r][x] = (m[r][x] + p * p - f * m[rank][x] % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn naive_int_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

// ---- fixtures, as literals ----

const P: [[u64; 4]; 4] = [[1, 2, 3, 4], [1, 0, 1, 1], [2, 1, 3, 1], [4, 0, 9, 5]];
const M: [[u64; 4]; 4] = [[1, 0, 1, 1], [1, 2, 0, 1], [0, 0, 1, 1], [0, 2, 3, 1]];
const S: [[u64; 4]; 4] = [[3, 2, 2, 4], [2, 6, 1, 5], [2, 1, 2, 4], [4, 5, 4, 14]];
const S2_PRINTED: [[u64; 4]; 4] = [[36, 37, 26, 76], [37, 32, 31, 77], [26, 31, 20, 58], [76, 77, 58, 152]];
const A: [[u64; 4]; 4] = [[25, 30, 23, 11], [8, 5, 6, 12], [22, 29, 18, 0], [5, 9, 0, 2]];
const A2: [[u64; 4]; 4] = [[26, 5, 19, 9], [5, 12, 10, 24], [8, 30, 9, 18], [29, 7, 11, 21]];
/// Directed pairs (1-based) in printed order, with their keys.
const KEY_TABLE: [(usize, usize, u64); 12] = [
    (1, 2, 11),
    (2, 1, 11),
    (1, 3, 25),
    (3, 1, 25),
    (1, 4, 22),
    (4, 1, 22),
    (2, 3, 0),
    (3, 2, 0),
    (2, 4, 10),
    (4, 2, 10),
    (3, 4, 11),
    (4, 3, 11),
];

fn rows<const N: usize>(m: &[[u64; N]]) -> Vec<Vec<u64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn fixture_state(secret: &[[u64; 4]; 4], modulus: u64) -> SchemeState {
    let p = q(modulus);
    let params = SchemeParams::new(3, p, 4, Variant::Modified).unwrap();
    SchemeState::from_parts(
        params,
        Matrix::from_rows_reduced(&P, p).unwrap(),
        Matrix::from_rows_reduced(secret, p).unwrap(),
        1,
        0,
    )
    .unwrap()
}

// ---- criteria ----

fn key_table() -> Check {
    let state = fixture_state(&S, 31);
    let oracle_a = naive_transpose(&naive_mul(&rows(&S), &rows(&P), 31));
    ensure(oracle_a == rows(&A), || format!("oracle A {oracle_a:?}"))?;
    ensure(state.private().to_rows() == rows(&A), || {
        format!("A = {:?}", state.private().to_rows())
    })?;
    for (i, j, expected) in KEY_TABLE {
        let oracle: u64 = (0..4).map(|x| A[i - 1][x] * P[x][j - 1]).sum::<u64>() % 31;
        let got = state.key(i - 1, j - 1).map_err(|e| e.to_string())?.value;
        ensure(oracle == expected && got == expected, || {
            format!("K({i},{j}) = {got}, oracle {oracle}, expected {expected}")
        })?;
    }
    Ok(())
}

fn epoch2() -> Check {
    let state = fixture_state(&S, 31);
    let next = state
        .rekey_with_secret(Matrix::from_rows_reduced(&S2_PRINTED, q(31)).unwrap())
        .map_err(|e| e.to_string())?;
    ensure(next.epoch() == 2, || format!("epoch {}", next.epoch()))?;
    ensure(next.private().to_rows() == rows(&A2), || {
        format!("A' = {:?}", next.private().to_rows())
    })?;
    let oracle = naive_transpose(&naive_mul(&rows(&S2_PRINTED), &rows(&P), 31));
    ensure(oracle == rows(&A2), || format!("oracle A' {oracle:?}"))?;
    let bc = next.key(1, 2).map_err(|e| e.to_string())?.value;
    let cb = next.key(2, 1).map_err(|e| e.to_string())?.value;
    ensure(bc == 25 && cb == 25, || format!("K(Bob,Charlie)={bc} K(Charlie,Bob)={cb}"))
}

fn secret_generation() -> Check {
    let m = Matrix::from_rows(&M, q(31)).unwrap();
    let s = gfmat::symmetric_from_random(&m, None).map_err(|e| e.to_string())?;
    ensure(s.to_rows() == rows(&S), || format!("M·Mᵀ = {:?}", s.to_rows()))?;
    let oracle = naive_mul(&rows(&M), &naive_transpose(&rows(&M)), 31);
    ensure(oracle == rows(&S), || format!("oracle M·Mᵀ {oracle:?}"))?;

    // 257 exceeds every entry, so nothing reduces
    let s257 = Matrix::from_rows(&S, q(257)).unwrap();
    let s2 = blom::update_secret(&s257, &UpdateRule::ReversalProduct).map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    for (i, row) in S2_PRINTED.iter().enumerate() {
        for (j, &printed) in row.iter().enumerate() {
            if s2.get(i, j) != printed {
                differing.push((i, j, s2.get(i, j)));
            }
        }
    }
    ensure(differing == vec![(0, 0, 32)], || format!("differences from printed S': {differing:?}"))?;
    let reversed: Vec<Vec<u64>> = rows(&S).into_iter().rev().collect();
    let oracle = naive_mul(&rows(&S), &reversed, 257);
    ensure(oracle == s2.to_rows(), || "oracle S·J·S disagrees".into())
}

fn key_agreement() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let moduli = [31, 101, 257];
    let mut trials = 0;
    for trial in 0..1200u64 {
        let t = rng.gen_range(1..=8);
        let n = rng.gen_range(2..=12);
        let p = q(moduli[rng.gen_range(0..3)]);
        let variant = if trial % 2 == 0 { Variant::Original } else { Variant::Modified };
        let params = SchemeParams::new(t, p, n, variant).map_err(|e| e.to_string())?;
        let state = SchemeState::generate(params, rng.gen()).map_err(|e| e.to_string())?;
        let km = state.key_matrix().map_err(|e| e.to_string())?;
        ensure(km == gfmat::transpose(&km), || format!("trial {trial}: key matrix not symmetric"))?;
        let a = state.private().to_rows();
        let pub_rows = state.public().to_rows();
        let oracle = naive_mul(&a, &pub_rows, p.get());
        for i in 0..n {
            for j in 0..n {
                let kij = state.key(i, j).map_err(|e| e.to_string())?.value;
                let kji = state.key(j, i).map_err(|e| e.to_string())?.value;
                ensure(kij == kji && kij == oracle[i][j], || {
                    format!("trial {trial} (t={t}, N={n}, q={}): K({i},{j})={kij} K({j},{i})={kji}", p.get())
                })?;
            }
        }
        trials += 1;
    }
    ensure(trials >= 1000, || format!("only {trials} trials"))
}

fn mesh_array() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3E5);
    for n in 1..=8 {
        let schedules = [
            ("mesh", mesharray::mesh_schedule(n), 2 * n - 1),
            ("standard", mesharray::standard_schedule(n), 3 * n - 2),
        ];
        for (name, sched, makespan) in &schedules {
            let report = mesharray::validate_schedule(sched);
            ensure(report.coverage_ok() && report.contiguity_ok() && report.movement_ok(), || {
                format!("n={n} {name}: {report:?}")
            })?;
            ensure(sched.makespan() == *makespan, || {
                format!("n={n} {name}: makespan {}", sched.makespan())
            })?;
        }
        for pair in 0..100 {
            let mut draw = || -> Vec<Vec<i64>> {
                (0..n).map(|_| (0..n).map(|_| rng.gen_range(-50..=50)).collect()).collect()
            };
            let (a, b) = (draw(), draw());
            let oracle = naive_int_mul(&a, &b);
            let (ia, ib) = (IntMatrix::from_rows(&a).unwrap(), IntMatrix::from_rows(&b).unwrap());
            for (name, sched, makespan) in &schedules {
                let trace = mesharray::simulate(&ia, &ib, sched, ArrayConfig { n, modulus: None })
                    .map_err(|e| e.to_string())?;
                ensure(trace.product.to_rows() == oracle && trace.steps_used == *makespan, || {
                    format!("n={n} pair {pair} {name}: product or step count wrong")
                })?;
            }
        }
    }
    Ok(())
}

fn node_accumulator() -> Check {
    let a = vec![vec![3, 1, 4, 1], vec![5, 9, 2, 6], vec![5, 3, 5, 8], vec![9, 7, 9, 3]];
    let b = vec![vec![2, 7, 1, 8], vec![2, 8, 1, 8], vec![2, 8, 4, 5], vec![9, 0, 4, 5]];
    let trace = mesharray::simulate(
        &IntMatrix::from_rows(&a).unwrap(),
        &IntMatrix::from_rows(&b).unwrap(),
        &mesharray::mesh_schedule(4),
        ArrayConfig { n: 4, modulus: None },
    )
    .map_err(|e| e.to_string())?;
    let expected = a[0][0] * b[0][0] + a[0][1] * b[1][0];
    let got = trace.accumulator_after_active_step(1, 1, 2);
    ensure(got == Some(expected), || format!("node (1,1) after step 2: {got:?}, expected {expected}"))
}

fn bench_sweep() -> Check {
    let config = SweepConfig::default();
    ensure(config.sizes == [2, 4, 6, 8, 10, 20, 30, 40, 50, 100, 200], || "default sizes".into())?;
    let rows = bench::run_sweep(&config).map_err(|e| e.to_string())?;
    ensure(rows.len() == 22, || format!("{} rows", rows.len()))?;
    let mut by_n: BTreeMap<usize, BTreeMap<Variant, u64>> = BTreeMap::new();
    for r in &rows {
        // closed-form oracle: S = M·Mᵀ, then S·P, plus N·(t−1) exps for Vandermonde
        let (k, n) = (r.t as u64 + 1, r.n as u64);
        let mults = k * k * k + k * k * n;
        let adds = k * k * (k - 1) + k * n * (k - 1);
        let exps = if r.scheme == Variant::Original { n * (r.t as u64 - 1) } else { 0 };
        ensure(
            (r.field_mults, r.field_adds, r.exps, r.total_ops) == (mults, adds, exps, mults + adds + exps),
            || format!("counts at n={} {}: {r:?}", r.n, r.scheme),
        )?;
        by_n.entry(r.n).or_default().insert(r.scheme, r.total_ops);
    }
    for (n, totals) in &by_n {
        let (o, m) = (totals[&Variant::Original], totals[&Variant::Modified]);
        ensure(m <= o, || format!("n={n}: modified {m} > original {o}"))?;
        if *n >= 4 {
            ensure(m < o, || format!("n={n}: modified {m} not below original {o}"))?;
        }
    }
    let csv = bench::sweep_csv(&config, &rows);
    let again = bench::sweep_csv(&config, &bench::run_sweep(&config).map_err(|e| e.to_string())?);
    ensure(csv == again, || "sweep CSV differs between runs".into())?;
    let parsed = bench::parse_sweep_csv(&csv).map_err(|e| e.to_string())?;
    ensure(parsed == rows, || "CSV does not parse back to the same rows".into())
}

/// Replays a log and returns every invariant it breaks.
fn replay_violations(log: &EventLog, node_count: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut marked_at: BTreeMap<usize, u64> = BTreeMap::new();
    let mut markings: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    let mut notices: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut expected_rekeys = 0u64;
    let mut rekeys = 0u64;
    let mut pending = false;
    let mut last_epoch = None;
    for r in log.iter() {
        match &r.event {
            Event::SessionEstablished { i, j, key_i, key_j, .. } if key_i != key_j => {
                out.push(format!("session {i}-{j}: {key_i} vs {key_j}"));
            }
            Event::Marked { node, first, .. } => {
                expected_rekeys += 1;
                if *first {
                    marked_at.insert(*node, r.time);
                    let trusted = (1..=node_count).filter(|n| !marked_at.contains_key(n)).collect();
                    markings.push((*node, trusted));
                }
            }
            Event::PairServed { .. } => pending = true,
            Event::Rekey { epoch, .. } => {
                rekeys += 1;
                if let Some(prev) = last_epoch {
                    if *epoch != prev + 1 {
                        out.push(format!("epoch jumped {prev} -> {epoch}"));
                    }
                }
                last_epoch = Some(*epoch);
            }
            Event::Setup { epoch, .. } => last_epoch = Some(*epoch),
            Event::Message { msg, disposition } => {
                for (&v, &since) in &marked_at {
                    if !msg.involves(v) || r.time < since {
                        continue;
                    }
                    if *disposition == Disposition::Delivered {
                        out.push(format!("t={} {} delivered with marked node {v}", r.time, msg.kind()));
                    }
                    if msg.kind() == MessageKind::KeyReply {
                        out.push(format!("t={} KeyReply involving marked node {v}", r.time));
                    }
                }
                if *disposition == Disposition::Delivered {
                    match (&msg.payload, msg.dst) {
                        (Payload::MaliciousNotice { node, .. }, Addr::Node(to)) => {
                            notices.entry(*node).or_default().push(to);
                        }
                        (Payload::KeyRequest { .. }, Addr::Ca) if pending => {
                            pending = false;
                            expected_rekeys += 1;
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }
    for (node, trusted) in markings {
        let mut got = notices.remove(&node).unwrap_or_default();
        got.sort_unstable();
        let want: Vec<usize> = trusted.into_iter().collect();
        if got != want {
            out.push(format!("notices for node {node}: {got:?}, expected {want:?}"));
        }
    }
    if rekeys != expected_rekeys {
        out.push(format!("{rekeys} rekeys, triggers say {expected_rekeys}"));
    }
    out
}

fn netsim_invariants() -> Check {
    for name in netsim::BUNDLED_SCENARIOS {
        let config = netsim::ScenarioConfig::parse(netsim::bundled_scenario(name).unwrap())
            .map_err(|e| format!("{name}: {e}"))?;
        let out = netsim::run_scenario(&config, config.seed).map_err(|e| format!("{name}: {e}"))?;
        let again = netsim::run_scenario(&config, config.seed).map_err(|e| format!("{name}: {e}"))?;
        ensure(out.log.to_text() == again.log.to_text(), || format!("{name}: log not deterministic"))?;
        let v = replay_violations(&out.log, config.node_count);
        ensure(v.is_empty(), || format!("{name}: {v:?}"))?;
        ensure(out.metrics.violations == 0, || format!("{name}: in-run audit flagged violations"))?;
    }

    let run = |name: &str| {
        let config = netsim::ScenarioConfig::parse(netsim::bundled_scenario(name).unwrap()).unwrap();
        netsim::run_scenario(&config, config.seed).unwrap()
    };
    let demo = run("paper_demo");
    let keys: Vec<(u64, u64, u64)> = demo
        .log
        .iter()
        .filter_map(|r| match r.event {
            Event::SessionEstablished { key_i, key_j, epoch, .. } => Some((key_i, key_j, epoch)),
            _ => None,
        })
        .collect();
    ensure(keys == vec![(0, 0, 1), (25, 25, 2)], || format!("paper_demo sessions {keys:?}"))?;

    let intrusion = run("intrusion");
    let marks: Vec<(String, bool)> = intrusion
        .log
        .iter()
        .filter_map(|r| match &r.event {
            Event::Marked { label, first, .. } => Some((label.clone(), *first)),
            _ => None,
        })
        .collect();
    ensure(marks.first() == Some(&("MN1".to_string(), true)), || format!("intrusion markings {marks:?}"))?;
    let table = &intrusion.intrusion_table;
    ensure(
        table.count_for_label("MN1") == Some(1) && table.count_for_label("MN2") == Some(2),
        || format!("intrusion table:\n{table}"),
    )?;

    let stale = run("stale_epoch");
    let failed: Vec<SessionFailure> = stale
        .log
        .iter()
        .filter_map(|r| match &r.event {
            Event::SessionFailed { failure, .. } => Some(failure.clone()),
            _ => None,
        })
        .collect();
    let mismatch = matches!(
        failed.as_slice(),
        [SessionFailure::StaleEpoch { key_i, key_j, .. }]
            if BTreeSet::from([*key_i, *key_j]) == BTreeSet::from([0, 25])
    );
    ensure(mismatch, || format!("stale_epoch failures {failed:?}"))
}

fn vandermonde_t_security() -> Check {
    let p = 31;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7EC);
    let mut subsets = 0u64;
    for t in 1..=3 {
        for n in 2..=8 {
            for draw in 0..40 {
                let mut pool: Vec<u64> = (1..p).collect();
                for i in 0..n {
                    let j = rng.gen_range(i..pool.len());
                    pool.swap(i, j);
                }
                let seeds = pool[..n].to_vec();
                let vs = VandermondeSeeds::new(seeds.clone(), q(p)).map_err(|e| e.to_string())?;
                let m = gfmat::vandermonde(&vs, t, q(p), None).map_err(|e| e.to_string())?;
                let oracle: Vec<Vec<u64>> =
                    (0..=t).map(|r| seeds.iter().map(|&s| pow_mod(s, r as u64, p)).collect()).collect();
                ensure(m.to_rows() == oracle, || format!("Vandermonde mismatch, seeds {seeds:?}"))?;
                let k = (t + 1).min(n);
                for subset in combinations(n, k) {
                    let cols: Vec<Vec<u64>> = oracle.iter().map(|row| subset.iter().map(|&c| row[c]).collect()).collect();
                    ensure(naive_rank(cols, p) == k, || format!("t={t} seeds {seeds:?} subset {subset:?} dependent"))?;
                    subsets += 1;
                }
                let report = blom::verify_t_security_structure(&m, t, draw);
                ensure(report.passed() && report.exhaustive, || format!("t={t} seeds {seeds:?}: {report}"))?;
            }
        }
    }
    ensure(subsets > 0, || "no subsets checked".into())
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, fn() -> Check); 9] = [
        (1, "key table reproduction", Duration::from_secs(1), key_table),
        (2, "epoch-2 reproduction", Duration::from_secs(1), epoch2),
        (3, "secret generation and reversal product", Duration::from_secs(1), secret_generation),
        (4, "key agreement, randomized", Duration::from_secs(10), key_agreement),
        (5, "mesh array schedules and products", Duration::from_secs(10), mesh_array),
        (6, "mesh node (1,1) after two steps", Duration::from_secs(1), node_accumulator),
        (7, "setup cost sweep", Duration::from_secs(30), bench_sweep),
        (8, "network simulation invariants", Duration::from_secs(10), netsim_invariants),
        (9, "Vandermonde column independence", Duration::from_secs(10), vandermonde_t_security),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(()) if elapsed <= budget => Ok(()),
            Ok(()) => Err(format!("over budget of {budget:?}")),
            Err(e) => Err(e),
        };
        match verdict {
            Ok(()) => println!("PASS {id} {name} ({:.3}s, budget {}s)", elapsed.as_secs_f64(), budget.as_secs()),
            Err(e) => {
                failed += 1;
                println!("FAIL {id} {name} ({:.3}s, budget {}s): {e}", elapsed.as_secs_f64(), budget.as_secs());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
