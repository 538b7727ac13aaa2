//! Command-line front end: flat key=value config files with flag overrides,
//! deterministic CSV/JSON emission, and exit codes that distinguish
//! validation errors (1), resource limits (2), and audit failures (3).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::kernel::{heat_kernel, KernelBox};
use crate::lattice::{BoxRegion, LatticeParams, Site, DEFAULT_SITE_BUDGET};
use crate::metric::{rho, rho_ball, rho_profile, rho_profile_inverse, v_rho_closed_form};
use crate::verify::{registry, run_check};
use crate::walk::{run, RngStream, StopRule, DEFAULT_STEP_BUDGET};
use crate::collide::{annulus_collision_experiment, zk_census, AnnulusExperimentConfig};

const VERSION: &str = concat!("latwalk-", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "latwalk", version, about = "Variable-speed random walk laboratory")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Numerical tolerance for kernel computations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Site budget for region construction and metric searches.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker thread count (also env LATWALK_THREADS); reserved, must be >= 1.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Intrinsic distances, profiles, and intrinsic balls.
    Metric(MetricArgs),
    /// Weighted volumes and their closed forms.
    Volume(VolumeArgs),
    /// Exact heat-kernel values on a time grid with exit-mass certificates.
    Kernel(KernelArgs),
    /// Event-driven trajectories with exit/hitting statistics.
    Simulate(SimulateArgs),
    /// Two-walk collision experiments.
    Collide(CollideArgs),
    /// Named audits; `verify all` runs the full acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Start site, comma-separated coordinates.
    #[arg(long)]
    from: Option<String>,
    /// End site, comma-separated coordinates.
    #[arg(long)]
    to: Option<String>,
    /// Optional intrinsic radius: also report the ball around `from`.
    #[arg(long)]
    ball: Option<f64>,
}

#[derive(Args)]
struct VolumeArgs {
    #[arg(long)]
    center: Option<String>,
    /// Euclidean radius.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct KernelArgs {
    /// Box radius around the origin.
    #[arg(long)]
    radius: Option<i64>,
    #[arg(long)]
    x0: Option<String>,
    /// Target site; defaults to x0.
    #[arg(long)]
    y: Option<String>,
    /// Comma-separated strictly increasing time grid.
    #[arg(long)]
    t: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// Stop at this time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Stop on leaving the box of this radius around x0.
    #[arg(long)]
    exit_radius: Option<i64>,
    /// Stop on hitting this site.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    step_budget: Option<u64>,
}

#[derive(Args)]
struct CollideArgs {
    /// Experiment: annulus (d=2) or zk (d>=3).
    #[arg(long)]
    experiment: Option<String>,
    /// Comma-separated annulus/census indices k.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    lambda: Option<i64>,
    /// Horizon multiplier for the zk census.
    #[arg(long)]
    hm: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    step_budget: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check name, `all`, or `list`.
    check: Option<String>,
}

/// Config file values plus common-flag overrides, with defaults applied at
/// lookup time. Also doubles as the provenance echo for JSON output.
struct Cfg {
    file: BTreeMap<String, String>,
}

impl Cfg {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::InvalidParam(format!(
                        "config line {}: expected key=value, got {line:?}",
                        lineno + 1
                    ))
                })?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self { file })
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::InvalidParam(format!("config key {key}: bad value {raw:?}"))),
            None => Ok(None),
        }
    }

    fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.get(key, flag)?
            .ok_or_else(|| Error::InvalidParam(format!("missing required parameter: {key}")))
    }
}

fn parse_site(raw: &str, d: usize) -> Result<Site> {
    let coords: SmallVec<[i64; 4]> = raw
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidParam(format!("bad coordinate {c:?} in site {raw:?}")))
        })
        .collect::<Result<_>>()?;
    if coords.len() != d {
        return Err(Error::InvalidParam(format!(
            "site {raw:?} has {} coordinates, expected d = {d}",
            coords.len()
        )));
    }
    Ok(Site::new(coords))
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParam(format!("bad number {c:?} in list {raw:?}")))
        })
        .collect()
}

fn parse_u32_list(raw: &str) -> Result<Vec<u32>> {
    raw.split(',')
        .map(|c| {
            c.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidParam(format!("bad index {c:?} in list {raw:?}")))
        })
        .collect()
}

/// Print to stdout, ignoring broken pipes (e.g. output piped to `head`).
fn out_line(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}");
}

fn out_raw(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{text}");
}

fn fmt_site(x: &Site) -> String {
    x.coords()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Column-ordered output rows; serialized to CSV or JSON without any
/// environment-dependent state so identical configs give identical bytes.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(extra: &[&'static str]) -> Self {
        let mut columns = vec!["d", "alpha", "seed", "tol", "version"];
        columns.extend_from_slice(extra);
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, provenance: &[String; 4], rest: Vec<String>) {
        let mut row = provenance.to_vec();
        row.push(VERSION.to_string());
        row.extend(rest);
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let quote = |field: &str| -> String {
            if field.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", field.replace('"', "\"\""))
            } else {
                field.to_string()
            }
        };
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|f| quote(f)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self, config_echo: &BTreeMap<String, String>) -> String {
        let records: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(&c, v)| (c.to_string(), serde_json::Value::String(v.clone())))
                    .collect::<serde_json::Map<_, _>>()
                    .into()
            })
            .collect();
        let doc = serde_json::json!({
            "config": config_echo,
            "records": records,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("string-only document");
        text.push('\n');
        text
    }
}

/// Shared, resolved parameters every subcommand needs.
struct Resolved {
    params: LatticeParams,
    seed: u64,
    tol: f64,
    budget: u64,
    format: String,
    out: Option<PathBuf>,
    echo: BTreeMap<String, String>,
}

impl Resolved {
    fn provenance(&self) -> [String; 4] {
        [
            self.params.d().to_string(),
            self.params.alpha().to_string(),
            self.seed.to_string(),
            self.tol.to_string(),
        ]
    }

    fn emit(&self, table: &Table, summary: &str) -> Result<()> {
        let body = match self.format.as_str() {
            "csv" => table.to_csv(),
            "json" => table.to_json(&self.echo),
            other => {
                return Err(Error::InvalidParam(format!(
                    "format must be csv or json, got {other:?}"
                )))
            }
        };
        match &self.out {
            Some(path) => fs::write(path, body)?,
            None => out_raw(&body),
        }
        out_line(summary);
        Ok(())
    }
}

fn resolve_common(common: &CommonArgs, cfg: &Cfg) -> Result<Resolved> {
    let d: usize = cfg.require("d", common.d)?;
    let alpha: f64 = cfg.require("alpha", common.alpha)?;
    let params = LatticeParams::new(d, alpha)?;
    let seed = cfg.get("seed", common.seed)?.unwrap_or(1);
    let tol = cfg.get("tol", common.tol)?.unwrap_or(1e-10);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParam(format!("tol must be in (0, 1), got {tol}")));
    }
    let budget = cfg
        .get("budget", common.budget)?
        .unwrap_or(DEFAULT_SITE_BUDGET);
    let threads = cfg
        .get("threads", common.threads)?
        .or_else(|| {
            std::env::var("LATWALK_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1);
    if threads == 0 {
        return Err(Error::InvalidParam("threads must be >= 1".into()));
    }
    let format = cfg
        .get("format", common.format.clone())?
        .unwrap_or_else(|| "csv".to_string());
    let out = cfg
        .get("out", common.out.clone())?
        .map(PathBuf::from);
    let mut echo = cfg.file.clone();
    echo.insert("d".into(), d.to_string());
    echo.insert("alpha".into(), alpha.to_string());
    echo.insert("seed".into(), seed.to_string());
    echo.insert("tol".into(), tol.to_string());
    echo.insert("budget".into(), budget.to_string());
    echo.insert("format".into(), format.clone());
    echo.insert("version".into(), VERSION.to_string());
    Ok(Resolved {
        params,
        seed,
        tol,
        budget,
        format,
        out,
        echo,
    })
}

fn cmd_metric(r: &Resolved, a: &MetricArgs, cfg: &Cfg) -> Result<String> {
    let d = r.params.d();
    let from = parse_site(&cfg.require::<String>("from", a.from.clone())?, d)?;
    let to = parse_site(&cfg.require::<String>("to", a.to.clone())?, d)?;
    let ball_r: Option<f64> = cfg.get("ball", a.ball)?;
    let m = rho(&r.params, &from, &to, r.budget)?;
    let linf = from.linf_distance(&to).max(1) as f64;
    let mut table = Table::new(&[
        "from",
        "to",
        "distance",
        "profile",
        "profile_inverse",
        "geodesic_len",
        "search_radius",
        "converged",
        "ball_radius",
        "ball_sites",
        "ball_mass",
    ]);
    let (ball_sites, ball_mass, ball_radius) = match ball_r {
        Some(radius) => {
            let b = rho_ball(&r.params, &from, radius, r.budget)?;
            (
                b.sites.len().to_string(),
                b.mass.to_string(),
                radius.to_string(),
            )
        }
        None => (String::new(), String::new(), String::new()),
    };
    table.push(
        &r.provenance(),
        vec![
            fmt_site(&from),
            fmt_site(&to),
            m.distance.to_string(),
            rho_profile(&r.params, &from, linf)?.to_string(),
            rho_profile_inverse(&r.params, &from, linf)?.to_string(),
            m.geodesic.len().to_string(),
            m.search_radius_used.to_string(),
            m.converged.to_string(),
            ball_radius,
            ball_sites,
            ball_mass,
        ],
    );
    let summary = format!(
        "metric: rho({}, {}) = {}",
        fmt_site(&from),
        fmt_site(&to),
        m.distance
    );
    r.emit(&table, &summary)?;
    Ok(summary)
}

fn cmd_volume(r: &Resolved, a: &VolumeArgs, cfg: &Cfg) -> Result<String> {
    let d = r.params.d();
    let center = parse_site(&cfg.require::<String>("center", a.center.clone())?, d)?;
    let radius: f64 = cfg.require("r", a.r)?;
    let exact = r.params.volume_exact(&center, radius, r.budget)?;
    let closed = r.params.volume_closed_form(&center, radius.max(1.0))?;
    let r_int = rho_profile(&r.params, &center, radius.max(1.0))?;
    let v_rho = v_rho_closed_form(&r.params, &center, r_int)?;
    let mut table = Table::new(&[
        "center",
        "r",
        "volume",
        "volume_closed_form",
        "r_intrinsic",
        "v_rho_closed_form",
    ]);
    table.push(
        &r.provenance(),
        vec![
            fmt_site(&center),
            radius.to_string(),
            exact.to_string(),
            closed.to_string(),
            r_int.to_string(),
            v_rho.to_string(),
        ],
    );
    let summary = format!("volume: V({}, {radius}) = {exact}", fmt_site(&center));
    r.emit(&table, &summary)?;
    Ok(summary)
}

fn cmd_kernel(r: &Resolved, a: &KernelArgs, cfg: &Cfg) -> Result<String> {
    let d = r.params.d();
    let radius: i64 = cfg.require("radius", a.radius)?;
    let x0 = parse_site(&cfg.require::<String>("x0", a.x0.clone())?, d)?;
    let y = match cfg.get::<String>("y", a.y.clone())? {
        Some(raw) => parse_site(&raw, d)?,
        None => x0.clone(),
    };
    let ts = parse_f64_list(&cfg.require::<String>("t", a.t.clone())?)?;
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) || ts.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidParam(
            "t grid must be positive and strictly increasing".into(),
        ));
    }
    let region = BoxRegion::new(Site::origin(d), radius, r.budget)?;
    let kbox = KernelBox::new(&r.params, &region)?;
    let mut table = Table::new(&["radius", "x", "y", "t", "p", "escaped_mass"]);
    let mut last_p = 0.0;
    for &t in &ts {
        let s = heat_kernel(&kbox, &x0, &y, t, r.tol)?;
        last_p = s.p;
        table.push(
            &r.provenance(),
            vec![
                radius.to_string(),
                fmt_site(&x0),
                fmt_site(&y),
                t.to_string(),
                s.p.to_string(),
                s.escaped_mass.to_string(),
            ],
        );
    }
    let summary = format!(
        "kernel: {} rows, p at t = {} is {last_p}",
        ts.len(),
        ts.last().expect("nonempty grid")
    );
    r.emit(&table, &summary)?;
    Ok(summary)
}

fn cmd_simulate(r: &Resolved, a: &SimulateArgs, cfg: &Cfg) -> Result<String> {
    let d = r.params.d();
    let x0 = parse_site(&cfg.require::<String>("x0", a.x0.clone())?, d)?;
    let trials = cfg.get("trials", a.trials)?.unwrap_or(1);
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be positive".into()));
    }
    let step_budget = cfg
        .get("step_budget", a.step_budget)?
        .unwrap_or(DEFAULT_STEP_BUDGET);
    let horizon: Option<f64> = cfg.get("horizon", a.horizon)?;
    let exit_radius: Option<i64> = cfg.get("exit_radius", a.exit_radius)?;
    let target: Option<String> = cfg.get("target", a.target.clone())?;
    let stop = match (horizon, exit_radius, &target) {
        (Some(h), None, None) => StopRule::Horizon(h),
        (None, Some(radius), None) => StopRule::ExitBox {
            center: x0.clone(),
            radius,
        },
        (None, None, Some(raw)) => StopRule::HitSite(parse_site(raw, d)?),
        _ => {
            return Err(Error::InvalidParam(
                "exactly one of horizon, exit_radius, target must be set".into(),
            ))
        }
    };
    let mut table = Table::new(&["trial", "end_time", "end_reason", "jumps", "final"]);
    let mut total_time = 0.0;
    for trial in 0..trials {
        let traj = run(&r.params, &x0, &stop, RngStream::new(r.seed, trial), step_budget)?;
        total_time += traj.end_time;
        table.push(
            &r.provenance(),
            vec![
                trial.to_string(),
                traj.end_time.to_string(),
                format!("{:?}", traj.end_reason),
                traj.events.len().to_string(),
                fmt_site(&traj.final_site()),
            ],
        );
    }
    let summary = format!(
        "simulate: {trials} trials from {}, mean end time {}",
        fmt_site(&x0),
        total_time / trials as f64
    );
    r.emit(&table, &summary)?;
    Ok(summary)
}

fn cmd_collide(r: &Resolved, a: &CollideArgs, cfg: &Cfg) -> Result<String> {
    let experiment = cfg.require::<String>("experiment", a.experiment.clone())?;
    let ks = parse_u32_list(&cfg.require::<String>("k", a.k.clone())?)?;
    if ks.is_empty() {
        return Err(Error::InvalidParam("k list must be nonempty".into()));
    }
    let trials = cfg.require("trials", a.trials)?;
    let step_budget = cfg
        .get("step_budget", a.step_budget)?
        .unwrap_or(DEFAULT_STEP_BUDGET);
    let mut table = Table::new(&["experiment", "k", "trials", "freq", "stat"]);
    let mut last = (0.0, 0.0);
    match experiment.as_str() {
        "annulus" => {
            let lambda = cfg.get("lambda", a.lambda)?.unwrap_or(4);
            for &k in &ks {
                let out = annulus_collision_experiment(&AnnulusExperimentConfig {
                    params: r.params,
                    k,
                    lambda,
                    trials,
                    seed: r.seed,
                    step_budget,
                })?;
                last = out;
                table.push(
                    &r.provenance(),
                    vec![
                        experiment.clone(),
                        k.to_string(),
                        trials.to_string(),
                        out.0.to_string(),
                        out.1.to_string(),
                    ],
                );
            }
        }
        "zk" => {
            let hm = cfg.get("hm", a.hm)?.unwrap_or(10.0);
            for &k in &ks {
                let out = zk_census(&r.params, k, hm, trials, r.seed, step_budget)?;
                last = out;
                table.push(
                    &r.provenance(),
                    vec![
                        experiment.clone(),
                        k.to_string(),
                        trials.to_string(),
                        out.0.to_string(),
                        out.1.to_string(),
                    ],
                );
            }
        }
        other => {
            return Err(Error::InvalidParam(format!(
                "experiment must be annulus or zk, got {other:?}"
            )))
        }
    }
    let summary = format!(
        "collide: {experiment}, k up to {}, last freq {}",
        ks.iter().max().expect("nonempty"),
        last.0
    );
    r.emit(&table, &summary)?;
    Ok(summary)
}

/// Runs checks; `Ok(false)` means the run completed but a check failed
/// (exit code 3).
fn cmd_verify(r: &Resolved, a: &VerifyArgs, cfg: &Cfg) -> Result<bool> {
    let which = cfg
        .get("check", a.check.clone())?
        .unwrap_or_else(|| "all".to_string());
    if which == "list" {
        for c in registry() {
            out_line(&format!("{}: {}", c.name(), c.description()));
        }
        return Ok(true);
    }
    let mut table = Table::new(&["check", "pass", "detail"]);
    let mut all_pass = true;
    if which == "all" {
        for c in registry() {
            let out = c.run()?;
            out_line(&format!("{}: {}  {}", out.name, if out.pass { "PASS" } else { "FAIL" }, out.detail));
            all_pass &= out.pass;
            table.push(
                &r.provenance(),
                vec![out.name.to_string(), out.pass.to_string(), out.detail],
            );
        }
    } else {
        let out = run_check(&which)
            .ok_or_else(|| Error::InvalidParam(format!("unknown check {which:?}")))??;
        out_line(&format!("{}: {}  {}", out.name, if out.pass { "PASS" } else { "FAIL" }, out.detail));
        all_pass = out.pass;
        table.push(
            &r.provenance(),
            vec![out.name.to_string(), out.pass.to_string(), out.detail],
        );
    }
    let mut summary = String::new();
    write!(
        summary,
        "verify: {} check(s), {}",
        table.rows.len(),
        if all_pass { "all passed" } else { "FAILURES" }
    )
    .expect("write to string");
    r.emit(&table, &summary)?;
    Ok(all_pass)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParam(_) | Error::Domain(_) => 1,
        Error::Validity(_) => 3,
        _ => 2,
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let cfg = Cfg::load(cli.common.config.as_ref())?;
    let r = resolve_common(&cli.common, &cfg)?;
    match &cli.command {
        Command::Metric(a) => cmd_metric(&r, a, &cfg).map(|_| true),
        Command::Volume(a) => cmd_volume(&r, a, &cfg).map(|_| true),
        Command::Kernel(a) => cmd_kernel(&r, a, &cfg).map(|_| true),
        Command::Simulate(a) => cmd_simulate(&r, a, &cfg).map(|_| true),
        Command::Collide(a) => cmd_collide(&r, a, &cfg).map(|_| true),
        Command::Verify(a) => cmd_verify(&r, a, &cfg),
    }
}

pub fn main_from_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
