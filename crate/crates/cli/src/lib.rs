//! `blom` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification or in-run invariant failed,
//! 2 usage error (bad flags, unreadable input, unwritable output).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blom_core::bench::{self, SweepConfig, TRule, Weights};
use blom_core::blom::{self, SchemeParams, SchemeState, Variant};
use blom_core::fixtures;
use blom_core::gfmat::{self, Matrix, PrimeModulus};
use blom_core::mesharray::{self, ArrayConfig, IntMatrix};
use blom_core::netsim::{self, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "blom", version, about = "Blom key predistribution toolkit and simulators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recompute the four-node worked example and check every value.
    Demo,
    /// Generate a scheme and write its state document.
    Keygen(KeygenArgs),
    /// Run a network scenario.
    Simulate(SimulateArgs),
    /// Write setup-cost or mesh step-count CSVs.
    Bench(BenchArgs),
    /// Simulate the mesh array on one matrix pair.
    Mesh(MeshArgs),
    /// Run the fast self-checks.
    Verify,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub q: u64,
    #[arg(long)]
    pub nodes: usize,
    #[arg(long, default_value = "modified")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Leave the secret matrix out of the document.
    #[arg(long)]
    pub public_only: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    pub scenario: String,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["sweep", "mesh"])))]
pub struct BenchArgs {
    #[arg(long)]
    pub sweep: bool,
    #[arg(long)]
    pub mesh: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated network sizes (sweep) or array orders (mesh).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// `n-1` or a fixed integer.
    #[arg(long, default_value = "n-1")]
    pub t_rule: TRule,
    #[arg(long, default_value_t = bench::DEFAULT_Q)]
    pub q: u64,
    #[arg(long, default_value_t = bench::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub w_mult: u64,
    #[arg(long, default_value_t = 1)]
    pub w_add: u64,
    #[arg(long, default_value_t = 1)]
    pub w_exp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    Standard,
    Mesh,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "mesh")]
    pub schedule: ScheduleKind,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Operand files in matrix text format; both or neither.
    #[arg(long, requires = "b")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Seed for random operands when no files are given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult = Result<String, CliError>;

/// Parses `args` and runs the command, printing its output.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, msg) = match &e {
                CliError::Usage(m) => (e.code(), format!("error: {m}")),
                CliError::Failed(m) => (e.code(), m.clone()),
            };
            if matches!(e, CliError::Failed(_)) {
                print!("{msg}");
            } else {
                eprintln!("{msg}");
            }
            ExitCode::from(code)
        }
    }
}

pub fn execute(command: Command) -> CliResult {
    match command {
        Command::Demo => {
            let (text, ok) = demo_report(&DemoFixture::builtin());
            if ok {
                Ok(text)
            } else {
                Err(CliError::Failed(text))
            }
        }
        Command::Keygen(a) => keygen(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Bench(a) => run_bench(&a),
        Command::Mesh(a) => mesh(&a),
        Command::Verify => {
            let report = verify(&DemoFixture::builtin());
            let text = report.to_string();
            if report.passed() {
                Ok(text)
            } else {
                Err(CliError::Failed(text))
            }
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

// ---- demo ----

/// Inputs and expected outputs of the worked example.
#[derive(Debug, Clone)]
pub struct DemoFixture {
    pub names: Vec<String>,
    pub public: Matrix,
    pub secret: Matrix,
    pub secret_epoch2: Matrix,
    pub expected_private: Vec<Vec<u64>>,
    /// `(from, to, key)` with 1-based node numbers, in table order.
    pub expected_keys: Vec<(usize, usize, u64)>,
    pub expected_private_epoch2: Vec<Vec<u64>>,
    pub expected_key_epoch2: u64,
}

impl DemoFixture {
    pub fn builtin() -> Self {
        DemoFixture {
            names: fixtures::NAMES.iter().map(|s| s.to_string()).collect(),
            public: fixtures::public(),
            secret: fixtures::secret(),
            secret_epoch2: fixtures::secret_epoch2_printed(),
            expected_private: fixtures::PRIVATE.iter().map(|r| r.to_vec()).collect(),
            expected_keys: fixtures::KEY_TABLE.iter().map(|r| (r.from, r.to, r.key)).collect(),
            expected_private_epoch2: fixtures::PRIVATE_EPOCH2.iter().map(|r| r.to_vec()).collect(),
            expected_key_epoch2: fixtures::BOB_CHARLIE_EPOCH2,
        }
    }
}

fn matrix_block(out: &mut String, title: &str, rows: &[Vec<u64>]) {
    let width = rows
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .max()
        .unwrap_or(1);
    let _ = writeln!(out, "{title}");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:>width$}")).collect();
        let _ = writeln!(out, "  {}", cells.join(" "));
    }
}

fn vec_text(v: &[u64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:>2}")).collect();
    format!("[{}]", cells.join(" "))
}

fn first_difference(what: &str, got: &[Vec<u64>], want: &[Vec<u64>]) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!("{what} has {} rows, expected {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        for (j, (a, b)) in g.iter().zip(w).enumerate() {
            if a != b {
                return Some(format!("{what}[{i}][{j}] = {a}, expected {b}"));
            }
        }
    }
    None
}

/// Renders the worked example and reports whether it matched the fixture.
pub fn demo_report(fx: &DemoFixture) -> (String, bool) {
    let mut out = String::new();
    let mismatch = demo_into(fx, &mut out);
    match &mismatch {
        Ok(None) => out.push_str("result: all values match\n"),
        Ok(Some(m)) => {
            let _ = writeln!(out, "result: MISMATCH {m}");
        }
        Err(e) => {
            let _ = writeln!(out, "result: MISMATCH {e}");
        }
    }
    (out, matches!(mismatch, Ok(None)))
}

fn demo_into(fx: &DemoFixture, out: &mut String) -> Result<Option<String>, blom::BlomError> {
    let q = fx.public.modulus();
    let n = fx.public.cols();
    let t = fx.public.rows() - 1;
    let params = SchemeParams::new(t, q, n, Variant::Modified)?;
    let _ = writeln!(out, "q = {}, t = {t}, N = {n}", q.get());
    for (i, name) in fx.names.iter().enumerate() {
        let _ = writeln!(out, "  node {} = {name}", i + 1);
    }
    matrix_block(out, "public matrix P", &fx.public.to_rows());
    matrix_block(out, "secret matrix S", &fx.secret.to_rows());
    let sp = gfmat::mat_mul(&fx.secret, &fx.public, None)?;
    matrix_block(out, "S·P mod q", &sp.to_rows());
    let state = SchemeState::from_parts(params, fx.public.clone(), fx.secret.clone(), blom::INITIAL_EPOCH, 0)?;
    let a = state.private().to_rows();
    matrix_block(out, "private matrix A = (S·P)ᵀ", &a);
    let mut first = first_difference("A", &a, &fx.expected_private);

    let _ = writeln!(out, "key table (epoch {})", state.epoch());
    let _ = writeln!(out, "  {:<8} {:<15} {:<15} {:>3}", "pair", "public column", "private row", "key");
    for &(from, to, want) in &fx.expected_keys {
        let row = state.private_row(from - 1)?;
        let col = state.public_column(to - 1)?;
        let key = blom::shared_key(&row, &col, q)?.value;
        let _ = writeln!(
            out,
            "  {:<8} {:<15} {:<15} {key:>3}",
            format!("K({from},{to})"),
            vec_text(&col.col),
            vec_text(&row.row)
        );
        if key != want && first.is_none() {
            first = Some(format!("K({from},{to}) = {key}, expected {want}"));
        }
    }

    let next = state.rekey_with_secret(fx.secret_epoch2.clone())?;
    let _ = writeln!(out, "epoch {}", next.epoch());
    matrix_block(out, "secret matrix S' mod q", &next.secret().to_rows());
    let a2 = next.private().to_rows();
    matrix_block(out, "private matrix A'", &a2);
    if first.is_none() {
        first = first_difference("A'", &a2, &fx.expected_private_epoch2);
    }
    let (bob, charlie) = (1, 2);
    let names = |i: usize| fx.names.get(i).cloned().unwrap_or_else(|| format!("node{}", i + 1));
    for (i, j) in [(bob, charlie), (charlie, bob)] {
        let key = next.key(i, j)?.value;
        let _ = writeln!(out, "  K({},{}) = {key:>3}", names(i), names(j));
        if key != fx.expected_key_epoch2 && first.is_none() {
            first = Some(format!(
                "epoch-2 K({},{}) = {key}, expected {}",
                names(i),
                names(j),
                fx.expected_key_epoch2
            ));
        }
    }
    Ok(first)
}

// ---- verify ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failure.is_none())
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            match &c.failure {
                None => writeln!(f, "pass  {}", c.name)?,
                Some(why) => writeln!(f, "FAIL  {}: {why}", c.name)?,
            }
        }
        let failed = self.checks.iter().filter(|c| c.failure.is_some()).count();
        writeln!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

const VERIFY_TRIALS: u64 = 200;

pub fn verify(fx: &DemoFixture) -> VerifyReport {
    let table = || -> Option<String> {
        let (text, ok) = demo_report(fx);
        (!ok).then(|| text.lines().last().unwrap_or_default().trim_start_matches("result: ").to_string())
    };
    let agreement = || -> Option<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        for trial in 0..VERIFY_TRIALS {
            let t = rng.gen_range(1..=8);
            let n = rng.gen_range(2..=12);
            let q = PrimeModulus::new([31, 101, 257][rng.gen_range(0..3)]).expect("prime");
            let variant = if trial % 2 == 0 { Variant::Original } else { Variant::Modified };
            let state = match SchemeParams::new(t, q, n, variant).and_then(|p| SchemeState::generate(p, rng.gen())) {
                Ok(s) => s,
                Err(e) => return Some(format!("trial {trial}: {e}")),
            };
            match state.key_matrix() {
                Ok(k) if k == gfmat::transpose(&k) => {}
                Ok(_) => return Some(format!("trial {trial}: key matrix not symmetric")),
                Err(e) => return Some(format!("trial {trial}: {e}")),
            }
        }
        None
    };
    let schedules = || -> Option<String> {
        for n in 1..=6 {
            for (name, s, span) in [
                ("mesh", mesharray::mesh_schedule(n), 2 * n - 1),
                ("standard", mesharray::standard_schedule(n), 3 * n - 2),
            ] {
                let report = mesharray::validate_schedule(&s);
                if !report.passed() || report.makespan != span {
                    return Some(format!("{name} schedule at n={n}: {report:?}"));
                }
            }
        }
        None
    };
    let checks: [(&'static str, &dyn Fn() -> Option<String>); 3] = [
        ("key table reproduction", &table),
        ("key agreement", &agreement),
        ("mesh schedules n<=6", &schedules),
    ];
    VerifyReport {
        checks: checks
            .into_iter()
            .map(|(name, f)| CheckOutcome { name, failure: f() })
            .collect(),
    }
}

// ---- keygen ----

fn keygen(a: &KeygenArgs) -> CliResult {
    let q = PrimeModulus::new(a.q).map_err(|e| usage(format!("--q: {e}")))?;
    let params = SchemeParams::new(a.t, q, a.nodes, a.variant).map_err(usage)?;
    let state = SchemeState::generate(params, a.seed).map_err(usage)?;
    write_file(&a.out, &state.to_document(!a.public_only))?;
    let report = blom::verify_t_security_structure(state.public(), a.t, a.seed);
    Ok(format!(
        "wrote {} (t={}, q={}, N={}, variant={}, epoch={})\n{report}\n",
        a.out.display(),
        a.t,
        a.q,
        a.nodes,
        a.variant,
        state.epoch()
    ))
}

// ---- simulate ----

fn simulate(a: &SimulateArgs) -> CliResult {
    let text = match netsim::bundled_scenario(&a.scenario) {
        Some(t) if !Path::new(&a.scenario).exists() => t.to_string(),
        _ => read_file(Path::new(&a.scenario))?,
    };
    let config = ScenarioConfig::parse(&text).map_err(usage)?;
    let seed = a.seed.unwrap_or(config.seed);
    let outcome = netsim::run_scenario(&config, seed).map_err(usage)?;
    if let Some(p) = &a.log {
        write_file(p, &outcome.log.to_text())?;
    }
    if let Some(p) = &a.metrics {
        write_file(p, &outcome.metrics.to_csv())?;
    }
    let m = &outcome.metrics;
    let mut out = format!(
        "scenario {} seed {seed}: {} sessions, {} detections, {} rekeys, final epoch {}\n",
        a.scenario, m.sessions_established, m.detections, m.rekeys, m.final_epoch
    );
    if !outcome.intrusion_table.is_empty() {
        let _ = write!(out, "{}", outcome.intrusion_table);
    }
    if m.violations > 0 {
        let _ = writeln!(out, "{} invariant violations", m.violations);
        return Err(CliError::Failed(out));
    }
    Ok(out)
}

// ---- bench ----

fn run_bench(a: &BenchArgs) -> CliResult {
    if a.mesh {
        let sizes = a.sizes.clone().unwrap_or_else(|| (1..=10).collect());
        let csv = bench::mesh_comparison(&sizes).map_err(usage)?;
        write_file(&a.out, &csv)?;
        return Ok(format!("wrote {} ({} rows)\n", a.out.display(), sizes.len()));
    }
    let config = SweepConfig {
        sizes: a.sizes.clone().unwrap_or_else(|| bench::DEFAULT_SIZES.to_vec()),
        t_rule: a.t_rule,
        q: a.q,
        seed: a.seed,
        weights: Weights {
            mult: a.w_mult,
            add: a.w_add,
            exp: a.w_exp,
        },
    };
    let rows = bench::run_sweep(&config).map_err(usage)?;
    write_file(&a.out, &bench::sweep_csv(&config, &rows))?;
    Ok(format!("wrote {} ({} rows)\n", a.out.display(), rows.len()))
}

// ---- mesh ----

fn load_operand(path: &Path) -> Result<(IntMatrix, PrimeModulus), CliError> {
    let m = Matrix::parse_text(&read_file(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let q = m.modulus();
    Ok((IntMatrix::from_matrix(&m).map_err(|e| usage(format!("{}: {e}", path.display())))?, q))
}

fn mesh(a: &MeshArgs) -> CliResult {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let (x, y, modulus) = match (&a.a, &a.b) {
        (Some(pa), Some(pb)) => {
            let (x, qa) = load_operand(pa)?;
            let (y, qb) = load_operand(pb)?;
            if qa != qb {
                return Err(usage(format!("operands use moduli {} and {}", qa.get(), qb.get())));
            }
            for (m, p) in [(&x, pa), (&y, pb)] {
                if m.n() != a.n {
                    return Err(usage(format!("{} is {}x{}, expected {n}x{n}", p.display(), m.n(), m.n(), n = a.n)));
                }
            }
            (x, y, Some(qa))
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut draw = || -> Vec<Vec<i64>> {
                (0..a.n).map(|_| (0..a.n).map(|_| rng.gen_range(0..10)).collect()).collect()
            };
            let (x, y) = (draw(), draw());
            (
                IntMatrix::from_rows(&x).map_err(usage)?,
                IntMatrix::from_rows(&y).map_err(usage)?,
                None,
            )
        }
    };
    let schedule = match a.schedule {
        ScheduleKind::Mesh => mesharray::mesh_schedule(a.n),
        ScheduleKind::Standard => mesharray::standard_schedule(a.n),
    };
    let trace = mesharray::simulate(&x, &y, &schedule, ArrayConfig { n: a.n, modulus }).map_err(usage)?;
    if let Some(p) = &a.trace {
        write_file(p, &trace.to_text())?;
    }
    let correct = trace.product == mesharray::direct_product(&x, &y, modulus);
    let name = match a.schedule {
        ScheduleKind::Mesh => "mesh",
        ScheduleKind::Standard => "standard",
    };
    let mut out = format!(
        "n {} schedule {name}\nsteps_used {}\nproduct matches direct multiplication: {}\n",
        a.n,
        trace.steps_used,
        if correct { "yes" } else { "no" }
    );
    for row in trace.product.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
        let _ = writeln!(out, "{}", cells.join(""));
    }
    if correct {
        Ok(out)
    } else {
        Err(CliError::Failed(out))
    }
}
