//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 1 runtime failure or failed check, 2 usage or
//! config error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;
use log::{error, info, warn};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::domain::{Field, SpectralBasis};
use crate::error::Error;
use crate::flow::{level_basis, run_flow, Flow, FlowConfig};
use crate::ground_state::{
    cross_validate, lambda_search, linear_ground_state, solve_by_flow, GroundStateResult, LambdaSearchOptions,
};
use crate::lab::{positivity_check, run_suite, Positivity};
use crate::operators::s_functional;
use crate::snapshot::write_snapshot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sphereflow", version, about = "Sphere-constrained damped heat flow experiments")]
pub struct Args {
    /// Run this command instead of the one named in the config.
    #[arg(value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed, overriding the top-level `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
    Checks(Vec<String>),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) | Failure::Checks(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parse `argv`, run the command, and return the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if args.quiet {
        logger.filter_level(log::LevelFilter::Warn);
    }
    let _ = logger.format_target(false).try_init();
    match run(&args) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => error!("{msg}"),
                Failure::Runtime(e) => error!("{e}"),
                Failure::Checks(failed) => {
                    for c in failed {
                        error!("check failed: {c}");
                    }
                }
            }
            f.exit_code()
        }
    }
}

/// Load the config with command-line overrides applied.
pub fn resolve_config(args: &Args) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(c) = args.command {
        cfg.command = c;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = resolve_config(args)?;
    run_config(&cfg)
}

/// Run `cfg.command`, writing into `cfg.output.dir`.
pub fn run_config(cfg: &ExperimentConfig) -> CmdResult {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Usage(format!("output directory {} is not writable: {e}", dir.display())))?;
    let ctx = Context { cfg, hash: cfg.hash(), dir: dir.clone() };
    ctx.write_config()?;
    info!("{} (config {})", cfg.command.name(), ctx.hash);
    match cfg.command {
        Command::Flow => cmd_flow(&ctx),
        Command::GroundState => cmd_ground_state(&ctx),
        Command::Asymptotics => cmd_asymptotics(&ctx),
        Command::Properties => cmd_properties(&ctx),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    dir: PathBuf,
}

impl Context<'_> {
    fn create(&self, name: &str) -> std::result::Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Runtime(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
    }

    fn header(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.hash), format!("command={}", self.cfg.command.name())]
    }

    fn write_config(&self) -> CmdResult {
        let mut w = self.create("config.toml")?;
        writeln!(w, "# config_hash={}", self.hash).map_err(Error::from)?;
        w.write_all(self.cfg.to_toml().as_bytes()).map_err(Error::from)?;
        Ok(())
    }

    fn write_json(&self, name: &str, mut value: Value) -> CmdResult {
        value["config_hash"] = json!(self.hash);
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &value).map_err(|e| Error::Io(e.into()))?;
        writeln!(w).map_err(Error::from)?;
        Ok(())
    }

    fn write_field(&self, name: &str, field: &Field, t: Option<f64>, extra: &[String]) -> CmdResult {
        let mut lines = self.header();
        lines.extend_from_slice(extra);
        write_snapshot(self.create(name)?, field, t, &lines)?;
        Ok(())
    }

    fn basis(&self) -> std::result::Result<Arc<SpectralBasis>, Failure> {
        Ok(Arc::new(SpectralBasis::new(self.cfg.domain_spec()?)?))
    }

    fn initial(&self, basis: &Arc<SpectralBasis>) -> std::result::Result<Field, Failure> {
        Ok(self.cfg.initial.preset.build(basis, self.cfg.initial_seed())?)
    }

    fn flow_config(&self, basis: &SpectralBasis) -> std::result::Result<FlowConfig, Failure> {
        let fc = self.cfg.flow_config()?;
        fc.validate(basis).map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(fc)
    }
}

fn checks_outcome(failed: Vec<String>) -> CmdResult {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn cmd_flow(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let basis = ctx.basis()?;
    let fc = ctx.flow_config(&basis)?;
    let u0 = ctx.initial(&basis)?;
    let run = run_flow(&u0, &fc)?;
    let ledger = &run.ledger;

    let mut header = ctx.header();
    header.push(format!(
        "p={} d={} m={} dt={} T={} integrator={} renormalize={} preset={} seed={}",
        fc.params.p,
        basis.domain().dimension(),
        fc.level,
        fc.dt,
        fc.horizon,
        fc.integrator.name(),
        fc.renormalize,
        cfg.initial.preset,
        cfg.initial_seed()
    ));
    ledger.write_csv(ctx.create("ledger.csv")?, &header)?;
    fs::create_dir_all(ctx.dir.join("snapshots")).map_err(Error::from)?;
    for s in &run.trajectory {
        ctx.write_field(&format!("snapshots/u_{:08}.csv", s.steps), &s.u, Some(s.t), &[format!("step={}", s.steps)])?;
    }

    let mut failed = Vec::new();
    let e0 = ledger.rows[0].energy;
    let rise = ledger.max_energy_increase();
    let rise_limit = cfg.checks.energy_increase * e0.abs().max(1.0);
    if ledger.len() > 1 && rise > rise_limit {
        failed.push(format!("energy increased by {rise:e} (limit {rise_limit:e})"));
    }
    let norm_error = ledger.max_norm_error();
    if fc.renormalize && norm_error > cfg.checks.norm_error {
        failed.push(format!("norm error {norm_error:e} after renormalization (limit {:e})", cfg.checks.norm_error));
    }
    let positivity = positivity_check(&run.trajectory);
    let ledger_min = ledger.min_value();
    if cfg.checks.positivity && matches!(positivity, Positivity::Pass { .. }) && ledger_min < crate::lab::POSITIVITY_FLOOR {
        failed.push(format!("minimum grid value {ledger_min:e} below the positivity floor"));
    }
    if cfg.checks.positivity {
        if let Positivity::Fail { min, t } = positivity {
            failed.push(format!("minimum grid value {min:e} at t = {t}"));
        }
    }
    let last = ledger.last().expect("ledger has the initial row");
    let summary = json!({
        "steps": run.final_state().steps,
        "t": run.final_state().t,
        "stationary": run.stationary,
        "energy_initial": e0,
        "energy_final": last.energy,
        "S_final": last.s,
        "max_energy_increase": if ledger.len() > 1 { rise } else { 0.0 },
        "dissipation_residual": ledger.dissipation_residual()?,
        "max_sphere_drift": ledger.max_sphere_drift(),
        "max_norm_error": norm_error,
        "min_value": ledger_min,
        "positivity": positivity,
        "failed_checks": failed,
    });
    ctx.write_json("summary.json", summary)?;
    ctx.write_field("final.csv", &run.final_state().u, Some(run.final_state().t), &[])?;
    info!(
        "flow: {} steps to t = {}, energy {:.12} -> {:.12}, dissipation residual {:e}",
        run.final_state().steps,
        run.final_state().t,
        e0,
        last.energy,
        ledger.dissipation_residual()?
    );
    checks_outcome(failed)
}

fn result_json(r: &GroundStateResult) -> Value {
    json!({
        "method": r.method.name(),
        "lambda": r.lambda,
        "energy": r.energy,
        "residual": r.residual,
        "iterations": r.iterations,
        "min_value": r.profile.min_sample(),
    })
}

/// Reference ground state: the eigenfunction for `p = 2`, mass shooting for
/// `p ≥ 3`, and the flow minimizer in between.
fn reference_ground_state(
    ctx: &Context,
    basis: &Arc<SpectralBasis>,
    u0: &Field,
) -> std::result::Result<GroundStateResult, Failure> {
    let p = ctx.cfg.operator.p;
    if p == 2.0 {
        Ok(linear_ground_state(basis)?)
    } else if p >= 3.0 {
        Ok(lambda_search(p, basis, &LambdaSearchOptions::default())?.result)
    } else {
        Ok(solve_by_flow(u0, &ground_state_flow(ctx, basis)?)?)
    }
}

fn ground_state_flow(ctx: &Context, basis: &SpectralBasis) -> std::result::Result<FlowConfig, Failure> {
    let g = &ctx.cfg.ground_state;
    let mut fc = ctx.flow_config(basis)?.with_stationarity_tol(g.stationarity_tol);
    fc.horizon = g.max_time;
    Ok(fc)
}

fn cmd_ground_state(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    if cfg.operator.radius != 1.0 {
        return Err(Failure::Usage("ground-state solvers need operator.radius = 1".into()));
    }
    let basis = ctx.basis()?;
    let u0 = ctx.initial(&basis)?;
    let p = cfg.operator.p;
    let by_flow = solve_by_flow(&u0, &ground_state_flow(ctx, &basis)?)?;
    let other = if p == 2.0 {
        Some(linear_ground_state(&basis)?)
    } else if p >= 3.0 {
        Some(lambda_search(p, &basis, &LambdaSearchOptions::default())?.result)
    } else {
        warn!("2 < p < 3: mass shooting needs p >= 3, reporting the flow minimizer only");
        None
    };

    let mut failed = Vec::new();
    let mut results = Vec::new();
    for r in std::iter::once(&by_flow).chain(other.as_ref()) {
        if r.residual >= cfg.ground_state.residual_tol {
            failed.push(format!("{} residual {:e}", r.method.name(), r.residual));
        }
        if r.profile.min_sample() < crate::lab::POSITIVITY_FLOOR {
            failed.push(format!("{} profile has minimum {:e}", r.method.name(), r.profile.min_sample()));
        }
        ctx.write_field(
            &format!("ground_state_{}.csv", r.method.name()),
            &r.profile,
            None,
            &[format!("p={p} method={} lambda={:e} residual={:e} energy={:e}", r.method.name(), r.lambda, r.residual, r.energy)],
        )?;
        info!("{}: lambda = {:.12}, residual {:e}, energy {:.12}", r.method.name(), r.lambda, r.residual, r.energy);
        results.push(result_json(r));
    }
    let cross = match &other {
        Some(o) => {
            let cv = cross_validate(&by_flow, o)?;
            if !cv.pass {
                failed.push(format!(
                    "cross-validation gaps L2 {:e}, lambda {:e}, energy {:e}",
                    cv.l2_gap, cv.lambda_gap, cv.energy_gap
                ));
            }
            serde_json::to_value(cv).expect("numeric")
        }
        None => Value::Null,
    };
    ctx.write_json(
        "ground_state.json",
        json!({ "p": p, "results": results, "cross_validation": cross, "failed_checks": failed }),
    )?;
    checks_outcome(failed)
}

/// Checkpoints `τ₀ 2ⁿ`, `n = 0..count`.
pub fn checkpoint_schedule(tau0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|n| tau0 * 2f64.powi(n as i32)).collect()
}

fn cmd_asymptotics(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let a = &cfg.asymptotics;
    if !cfg.initial.preset.is_positive() {
        return Err(Failure::Usage(format!(
            "asymptotics needs positive initial data; preset '{}' changes sign",
            cfg.initial.preset
        )));
    }
    if cfg.operator.radius != 1.0 {
        return Err(Failure::Usage("asymptotics needs operator.radius = 1".into()));
    }
    let basis = ctx.basis()?;
    let u0 = ctx.initial(&basis)?;
    let reference = reference_ground_state(ctx, &basis, &u0)?;
    let schedule = checkpoint_schedule(a.tau0, a.checkpoints);
    let mut fc = ctx.flow_config(&basis)?.with_stationarity_tol(0.0);
    fc.horizon = *schedule.last().expect("at least one checkpoint");
    let mut flow = Flow::new(&u0, &fc)?;
    let target = reference.profile.transfer_to(&level_basis(&basis, fc.level)?)?;

    let mut rows = Vec::new();
    let mut out = ctx.create("convergence.csv")?;
    let mut header = ctx.header();
    header.push(format!("p={} reference={} lambda={:e}", cfg.operator.p, reference.method.name(), reference.lambda));
    for line in &header {
        writeln!(out, "# {line}").map_err(Error::from)?;
    }
    writeln!(out, "tau,l2_error,h1_error,proxy_error,S_error").map_err(Error::from)?;
    for &tau in &schedule {
        flow.advance_to(tau)?;
        let u = &flow.state().u;
        let e = u - &target;
        let (l2, h1) = (e.l2_norm(), e.h1_seminorm_sq().sqrt());
        let s_err = (s_functional(u, cfg.operator.p)? - reference.lambda).abs();
        writeln!(out, "{tau:e},{l2:e},{h1:e},{:e},{s_err:e}", l2.max(h1)).map_err(Error::from)?;
        rows.push((tau, l2.max(h1), s_err));
    }
    out.flush().map_err(Error::from)?;

    let mut failed = Vec::new();
    let tail = &rows[rows.len() - a.monotone_window..];
    if tail.windows(2).any(|w| w[1].1 >= w[0].1) {
        failed.push(format!("error not decreasing over the last {} checkpoints", a.monotone_window));
    }
    let &(tau_last, err_last, s_last) = rows.last().expect("nonempty schedule");
    if err_last >= a.tolerance {
        failed.push(format!("final error {err_last:e} at tau = {tau_last} (limit {:e})", a.tolerance));
    }
    if s_last >= a.s_tolerance {
        failed.push(format!("final |S - lambda| {s_last:e} (limit {:e})", a.s_tolerance));
    }
    info!("asymptotics: error {err_last:e}, |S - lambda| {s_last:e} at tau = {tau_last}");
    ctx.write_json(
        "asymptotics.json",
        json!({
            "reference": result_json(&reference),
            "checkpoints": rows.iter().map(|r| json!({"tau": r.0, "proxy_error": r.1, "S_error": r.2})).collect::<Vec<_>>(),
            "failed_checks": failed,
        }),
    )?;
    checks_outcome(failed)
}

fn cmd_properties(ctx: &Context) -> CmdResult {
    let report = run_suite(&ctx.cfg.suite_config()?)?;
    let mut failed = Vec::new();
    for c in &report.checks {
        if c.cases == 0 {
            continue;
        }
        info!("{} {}: {}/{} (worst margin {:e})", if c.failed == 0 { "PASS" } else { "FAIL" }, c.name, c.passed, c.cases, c.worst_margin);
        if c.failed > 0 {
            failed.push(format!("{}: {} of {} cases", c.name, c.failed, c.cases));
        }
    }
    ctx.write_json("properties.json", serde_json::to_value(&report).expect("finite report"))?;
    checks_outcome(failed)
}

/// Write `text` as a config file under `dir` and return its path.
pub fn write_config_file(dir: &Path, name: &str, text: &str) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}
