//! Command dispatch for the `fk-hetero` binary.

pub mod config;
mod profile;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fk_hetero::energy::{j1_window, jk_window};
use fk_hetero::lattice::GapPair;
use fk_hetero::solve::{
    detect_gaps0, force_gap, gap_probe, minimize_periodic, solve_hetero, translate_pair, Direction, GapDetection,
    GapReport,
};
use fk_hetero::verify::{check_solution_suite, VerifyReport};
use fk_hetero::{make_fk_potential, LocalPotential, PotentialSpec, SolveResult};
use serde::{Deserialize, Serialize};

use config::Run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<fk_hetero::Error> for CliError {
    fn from(e: fk_hetero::Error) -> CliError {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fk-hetero", version, about = "Ground states and heteroclinic minimizers of lattice FK energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Dir {
    Fwd,
    Rev,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Periodic ground state.
    Ground(Common),
    /// Level-0 gap pairs.
    Gaps(Common),
    /// Heteroclinic minimizer at a given level.
    Hetero {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: usize,
        /// Index of the gap pair (level 1).
        #[arg(long, default_value_t = 0)]
        pair: usize,
        #[arg(long, value_enum, default_value = "fwd")]
        direction: Dir,
        /// Perturb the potential so that the level-1 gap holds (level 2).
        #[arg(long)]
        force_gap: bool,
        #[arg(long, default_value_t = 1e-2)]
        delta2: f64,
    },
    /// Constrained re-solves probing the gap between a stored solution and
    /// its translate.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Probe values for `u(0)`; defaults to the midpoint.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        force_gap: bool,
        #[arg(long, default_value_t = 1e-2)]
        delta2: f64,
    },
    /// Property suite on a stored solution.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Renormalized energy of a stored solution over a slab range.
    Energy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<i64>,
    },
    /// CSV profile of a stored solution.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ground(_) => "ground",
            Command::Gaps(_) => "gaps",
            Command::Hetero { .. } => "hetero",
            Command::Probe { .. } => "probe",
            Command::Verify { .. } => "verify",
            Command::Energy { .. } => "energy",
            Command::Export { .. } => "export",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Ground(c) | Command::Gaps(c) => c,
            Command::Hetero { common, .. }
            | Command::Probe { common, .. }
            | Command::Verify { common, .. }
            | Command::Energy { common, .. }
            | Command::Export { common, .. } => common,
        }
    }
}

/// Stored heteroclinic solve: the potential it was computed with, the gap
/// pair it connects and the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredSolve {
    pub potential: PotentialSpec,
    pub gap: GapPair,
    pub result: SolveResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredGround {
    pub potential: PotentialSpec,
    pub result: SolveResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredGaps {
    pub potential: PotentialSpec,
    pub detection: GapDetection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredProbe {
    pub potential: PotentialSpec,
    pub level: usize,
    pub report: GapReport,
}

/// File name of the stored level-`level` solve.
pub fn kink_file(level: usize) -> String {
    if level == 1 {
        "kink.json".to_string()
    } else {
        format!("kink{}.json", level)
    }
}

fn profile_file(level: usize) -> String {
    if level == 1 {
        "profile.csv".to_string()
    } else {
        format!("profile{}.csv", level)
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let name = cli.command.name();
    let out_hint = out_dir_hint(cli.command.common());
    let code = match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    };
    if let Some(dir) = out_hint {
        log_run(&dir, name, code);
    }
    code
}

fn configure_threads() {
    if let Some(n) = std::env::var("FK_HETERO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn out_dir_hint(common: &Common) -> Option<PathBuf> {
    if let Some(out) = &common.out {
        return Some(out.clone());
    }
    let path = common.config.as_ref()?;
    let text = fs::read_to_string(path).ok()?;
    let cfg: config::RunConfig = toml::from_str(&text).ok()?;
    Some(cfg.output.dir)
}

fn log_run(dir: &Path, command: &str, code: i32) {
    if !dir.is_dir() {
        return;
    }
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    if let Ok(mut f) = fs::OpenOptions::new().create(true).append(true).open(dir.join("run.log")) {
        let _ = writeln!(f, "{} {} exit={}", stamp, command, code);
    }
}

fn load_run(common: &Common) -> CliResult<Run> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs --config"))?;
    let mut run = config::load(path)?;
    if let Some(out) = &common.out {
        run.out_dir = out.clone();
    }
    Ok(run)
}

fn out_dir(common: &Common) -> CliResult<PathBuf> {
    if let Some(out) = &common.out {
        return Ok(out.clone());
    }
    Ok(load_run(common)?.out_dir)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {}", dir.display(), e)))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::config(format!("cannot write {}: {}", path.display(), e)))?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {}", dir.display(), e)))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::config(format!("cannot write {}: {}", path.display(), e)))?;
    Ok(path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, producer: &str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|_| {
        CliError::config(format!("missing {}; run `fk-hetero {}` first", path.display(), producer))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e)))
}

fn stored_input(common: &Common, input: &Option<PathBuf>) -> CliResult<(PathBuf, StoredSolve)> {
    let path = match input {
        Some(p) => p.clone(),
        None => out_dir(common)?.join(kink_file(1)),
    };
    let stored: StoredSolve = read_json(&path, "hetero --level 1")?;
    Ok((path, stored))
}

fn potential_of(spec: &PotentialSpec) -> CliResult<LocalPotential> {
    make_fk_potential(spec).map_err(|e| CliError::config(e.to_string()))
}

fn spec_of(base: &PotentialSpec, p: &LocalPotential) -> PotentialSpec {
    PotentialSpec { perturbations: p.perturbations().to_vec(), ..base.clone() }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Ground(common) => ground(&load_run(&common)?),
        Command::Gaps(common) => {
            let run = load_run(&common)?;
            let detection = gaps(&run)?;
            if detection.foliation {
                return Err(fk_hetero::Error::Foliation.into());
            }
            Ok(())
        }
        Command::Hetero { common, level, pair, direction, force_gap, delta2 } => {
            let direction = match direction {
                Dir::Fwd => Direction::Forward,
                Dir::Rev => Direction::Reverse,
            };
            hetero(&load_run(&common)?, level, pair, direction, force_gap, delta2).map(|_| ())
        }
        Command::Probe { common, level, values, force_gap, delta2 } => {
            probe(&common, level, &values, force_gap, delta2)
        }
        Command::Verify { common, input } => verify(&common, &input),
        Command::Energy { common, input, lo, hi } => energy(&common, &input, lo, hi),
        Command::Export { common, input, output } => export(&common, &input, &output),
    }
}

fn ground(run: &Run) -> CliResult<()> {
    let result = minimize_periodic(&run.potential, &run.periods, run.alpha.as_deref(), &run.opts)?;
    println!("c0 = {}", result.critical_value);
    println!("residual = {:e}", result.residual_sup);
    println!("values = {:?}", result.minimizer.values());
    let stored = StoredGround { potential: run.spec.clone(), result };
    let path = write_json(&run.out_dir, "ground.json", &stored)?;
    println!("wrote {}", path.display());
    if !stored.result.converged {
        return Err(CliError::numerical("ground state residual above grad_tol"));
    }
    Ok(())
}

fn gaps(run: &Run) -> CliResult<GapDetection> {
    let detection = detect_gaps0(&run.potential, run.gaps.grid_size, run.gaps.refine_tol, run.opts.value_tol)?;
    let origin = vec![0; run.spec.dimension];
    if detection.foliation {
        println!("foliation: minimizers are dense at value tolerance {:e}", run.opts.value_tol);
    } else {
        println!("c0 = {}", detection.c0);
        for (k, pair) in detection.pairs.iter().enumerate() {
            println!("pair {}: ({}, {})", k, pair.v.lookup(&origin), pair.w.lookup(&origin));
        }
    }
    let stored = StoredGaps { potential: run.spec.clone(), detection };
    let path = write_json(&run.out_dir, "gaps.json", &stored)?;
    println!("wrote {}", path.display());
    Ok(stored.detection)
}

fn report_solve(run: &Run, level: usize, potential: &LocalPotential, gap: GapPair, result: SolveResult) -> CliResult<StoredSolve> {
    println!("level {} critical value = {}", level, result.critical_value);
    println!("residual = {:e}", result.residual_sup);
    println!(
        "monotone = {}, birkhoff = {}, asymptotics = {}",
        result.flags.monotone_ok, result.flags.birkhoff_ok, result.flags.asymptotics_ok
    );
    let stored = StoredSolve { potential: spec_of(&run.spec, potential), gap, result };
    let path = write_json(&run.out_dir, &kink_file(level), &stored)?;
    println!("wrote {}", path.display());
    let csv = profile::profile_csv(potential, &stored)?;
    let path = write_text(&run.out_dir, &profile_file(level), &csv)?;
    println!("wrote {}", path.display());
    if !stored.result.converged {
        return Err(CliError::numerical(format!(
            "residual {:e} above grad_tol {:e}",
            stored.result.residual_sup, run.opts.grad_tol
        )));
    }
    Ok(stored)
}

fn level1(run: &Run, pair: usize, direction: Direction) -> CliResult<StoredSolve> {
    let detection = gaps(run)?;
    if detection.foliation {
        return Err(fk_hetero::Error::Foliation.into());
    }
    let gap = detection.pairs.get(pair).cloned().ok_or_else(|| {
        CliError::config(format!("pair {} requested, {} gap pairs found", pair, detection.pairs.len()))
    })?;
    let result = solve_hetero(&run.potential, &gap, 1, direction, &run.opts_for(1))?;
    report_solve(run, 1, &run.potential, gap, result)
}

fn probe_midpoint(result: &SolveResult, level: usize) -> f64 {
    let n = result.minimizer.dim();
    let origin = vec![0; n];
    let mut next = origin.clone();
    next[level - 1] = 1;
    0.5 * (result.minimizer.lookup(&origin) + result.minimizer.lookup(&next))
}

fn print_probe(report: &GapReport) {
    for o in &report.probes {
        println!("probe u(0) = {}: constrained value {} (excess {:e}, converged {})", o.value, o.constrained_value, o.excess, o.converged);
    }
    println!(
        "gap evidence: {} ({} probes, value tolerance {:e})",
        if report.gap { "gap" } else { "no gap" },
        report.probes.len(),
        report.value_tol
    );
}

fn hetero(run: &Run, level: usize, pair: usize, direction: Direction, force: bool, delta2: f64) -> CliResult<StoredSolve> {
    if level == 0 || level > run.spec.dimension {
        return Err(CliError::config(format!("--level must lie in 1..={}", run.spec.dimension)));
    }
    if force && level != 2 {
        return Err(CliError::config("--force-gap applies to level 2 only"));
    }
    if level == 1 {
        return level1(run, pair, direction);
    }
    let (potential, lower) = if force {
        let base = level1(run, pair, Direction::Forward)?;
        let forced = force_gap(&run.potential, &base.result, delta2)?;
        (forced, base)
    } else {
        let path = run.out_dir.join(kink_file(level - 1));
        let producer = format!("hetero --level {}", level - 1);
        let lower: StoredSolve = read_json(&path, &producer)?;
        (run.potential.clone(), lower)
    };
    let m = probe_midpoint(&lower.result, level - 1);
    let report = gap_probe(&potential, level - 1, &lower.result, &[m], &run.opts_for(level - 1))?;
    print_probe(&report);
    let stored = StoredProbe { potential: spec_of(&run.spec, &potential), level: level - 1, report };
    write_json(&run.out_dir, "probe.json", &stored)?;
    if !stored.report.gap {
        let hint = if force { "" } else { "; rerun with --force-gap" };
        return Err(fk_hetero::Error::NoGap(format!("no level-{} gap at the probed value{}", level - 1, hint)).into());
    }
    let gap = translate_pair(&lower.result)?;
    let result = solve_hetero(&potential, &gap, level, direction, &run.opts_for(level))?;
    report_solve(run, level, &potential, gap, result)
}

fn probe(common: &Common, level: usize, values: &[f64], force: bool, delta2: f64) -> CliResult<()> {
    let run = load_run(common)?;
    if level == 0 {
        return Err(CliError::config("--level must be at least 1"));
    }
    let path = run.out_dir.join(kink_file(level));
    let stored: StoredSolve = read_json(&path, &format!("hetero --level {}", level))?;
    let mut potential = potential_of(&stored.potential)?;
    if force {
        potential = force_gap(&potential, &stored.result, delta2)?;
    }
    let values = if values.is_empty() { vec![probe_midpoint(&stored.result, level)] } else { values.to_vec() };
    let report = gap_probe(&potential, level, &stored.result, &values, &run.opts_for(level))?;
    print_probe(&report);
    let out = StoredProbe { potential: spec_of(&stored.potential, &potential), level, report };
    let path = write_json(&run.out_dir, "probe.json", &out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_report(report: &VerifyReport) {
    println!("{:<24} {:<6} {:>24} {:>24}", "check", "pass", "measured", "threshold");
    for c in &report.checks {
        println!(
            "{:<24} {:<6} {:>24e} {:>24e}",
            c.name,
            if c.pass { "ok" } else { "FAIL" },
            c.measured,
            c.threshold
        );
        if let Some(w) = &c.witness {
            println!("    {}", w);
        }
    }
    println!("overall: {}", if report.overall { "pass" } else { "fail" });
}

fn verify(common: &Common, input: &Option<PathBuf>) -> CliResult<()> {
    let (path, stored) = stored_input(common, input)?;
    let potential = potential_of(&stored.potential)?;
    let report = check_solution_suite(&potential, &stored.result, &stored.gap)?;
    print_report(&report);
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    write_json(&dir, "verify.json", &report)?;
    if !report.overall {
        return Err(CliError::numerical("verification failed"));
    }
    Ok(())
}

fn energy(common: &Common, input: &Option<PathBuf>, lo: Option<i64>, hi: Option<i64>) -> CliResult<()> {
    let (_, stored) = stored_input(common, input)?;
    let potential = potential_of(&stored.potential)?;
    let u = &stored.result.minimizer;
    let level = stored.result.level;
    let r = potential.range() as i64;
    let (wlo, whi) = u.domain().axis(level - 1).range();
    let (lo, hi) = (lo.unwrap_or(wlo - r), hi.unwrap_or(whi + r));
    let report = if level == 1 {
        j1_window(&potential, u, lo, hi, stored.gap.c_level)?
    } else {
        jk_window(&potential, u, level, lo, hi, &[(stored.gap.c_level, stored.gap.v.clone())])?
    };
    println!("J_{}[{}, {}] = {}", level, lo, hi, report.value);
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::config(e.to_string()))?);
    Ok(())
}

fn export(common: &Common, input: &Option<PathBuf>, output: &Option<PathBuf>) -> CliResult<()> {
    let (path, stored) = stored_input(common, input)?;
    let potential = potential_of(&stored.potential)?;
    let csv = profile::profile_csv(&potential, &stored)?;
    let target = match output {
        Some(p) => p.clone(),
        None => path.with_file_name(profile_file(stored.result.level)),
    };
    fs::write(&target, csv).map_err(|e| CliError::config(format!("cannot write {}: {}", target.display(), e)))?;
    println!("wrote {}", target.display());
    Ok(())
}
