//! The `bexcl` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 blocked
//! dynamics. Options may also be given in a JSON file passed with `--config`
//! (keys are the long option names); options on the command line win.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constraints::GradientForm;
use crate::error::Error;
use crate::exact::{parse_rational, rat, to_f64};
use crate::graph;
use crate::hydro::{self, HydroConfig};
use crate::identities::{self as id, IdentityReport, Mode};
use crate::model::ModelSpec;
use crate::simulate::{self, Engine, ProfileSpec, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOCKED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bexcl",
    version,
    about = "Bernstein and reduced porous media exclusion processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check algebraic identities exhaustively or on random configurations.
    Verify(VerifyArgs),
    /// Communicating classes and blocked states of the chain on a small torus.
    Graph(GraphArgs),
    /// Simulate replicas and write coarse-grained density profiles.
    Simulate(SimulateArgs),
    /// Solve the hydrodynamic equation.
    Hydro(HydroArgs),
    /// Simulate, solve and compare the profiles.
    Compare(CompareArgs),
    /// Monte Carlo estimate of the equilibrium rate.
    Expectation(ExpectationArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct Common {
    /// Model, e.g. `ssep`, `pmm:n=4`, `bernstein:n=2,L=4`, `rpmm:l=2,L=4`.
    #[arg(long)]
    pub model: Option<String>,
    /// Number of lattice sites.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_sites: Option<usize>,
    /// Box parameter.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with default option values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Run the whole suite for `--L`.
    #[arg(long)]
    pub all: bool,
    /// gradient, inversion, decomposition, inequality, partition, symmetry,
    /// interpolation, monotonicity, threshold, threshold-binomial, monomial,
    /// rate-properties, telescoping, expectation, negativity.
    #[arg(long)]
    pub identity: Option<String>,
    /// Replace `h` or `g` by a wrong form: h, h-indicator, g.
    #[arg(long)]
    pub mutate: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    /// Order of the alternating sum for `negativity`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Check this many random configurations instead of all of them.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Also run the mobile-cluster and blocked-family checks.
    #[arg(long)]
    pub checks: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsArgs {
    /// `constant:ρ`, `step:ρ_left,ρ_right` or `cosine:mean,amplitude,k`.
    #[arg(long)]
    pub profile: Option<String>,
    /// Final macroscopic time.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Output times, comma separated (default 0, tmax/5, tmax/2, tmax).
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationArgs {
    /// Number of coarse-graining boxes.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub boxes: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// uniformized or direct.
    #[arg(long)]
    pub engine: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimulationArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct HydroArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    /// Grid cells.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub grid: Option<usize>,
    /// CFL safety factor in (0, 1).
    #[arg(long)]
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimulationArgs,
    /// Grid cells (a multiple of K).
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub grid: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpectationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Density, as a decimal or a fraction `p/q`.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
}

/// A failed command: the exit code and a message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(format!("i/o error: {e}"))
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Verify(a) => cmd_verify(merge_config(a, |a| &a.common)?),
        Command::Graph(a) => cmd_graph(merge_config(a, |a| &a.common)?),
        Command::Simulate(a) => cmd_simulate(merge_config(a, |a| &a.common)?),
        Command::Hydro(a) => cmd_hydro(merge_config(a, |a| &a.common)?),
        Command::Compare(a) => cmd_compare(merge_config(a, |a| &a.common)?),
        Command::Expectation(a) => cmd_expectation(merge_config(a, |a| &a.common)?),
    }
}

/// Fills options missing on the command line from the `--config` file and
/// sets up the thread pool.
fn merge_config<T>(args: T, common: impl Fn(&T) -> &Common) -> std::result::Result<T, Failure>
where
    T: Serialize + DeserializeOwned + Default,
{
    let config_path = common(&args).config.clone();
    let merged = match &config_path {
        None => args,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            let Value::Object(mut base) = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("invalid JSON in {}: {e}", path.display())))?
            else {
                return Err(Failure::usage("config file must hold a JSON object"));
            };
            let Value::Object(known) = serde_json::to_value(T::default()).expect("serializable") else {
                unreachable!("argument structs serialize to objects")
            };
            if let Some(key) = base.keys().find(|k| !known.contains_key(*k)) {
                return Err(Failure::usage(format!("unknown key {key:?} in config file")));
            }
            let Value::Object(cli) = serde_json::to_value(&args).expect("serializable") else {
                unreachable!("argument structs serialize to objects")
            };
            for (key, value) in cli {
                if !(value.is_null() || value == Value::Bool(false)) {
                    base.insert(key, value);
                }
            }
            let mut merged: T = serde_json::from_value(Value::Object(base))
                .map_err(|e| Failure::usage(format!("invalid config file: {e}")))?;
            let _ = &mut merged;
            merged
        }
    };
    if let Some(threads) = common(&merged).threads {
        if threads == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(merged)
}

fn metadata<T: Serialize>(command: &str, args: &T) -> Value {
    let mut args = serde_json::to_value(args).expect("serializable");
    if let Value::Object(map) = &mut args {
        map.retain(|k, v| !v.is_null() && k != "threads" && k != "out");
    }
    json!({ "build": crate::BUILD_ID, "command": command, "args": args })
}

fn open_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: &Option<PathBuf>, value: &Value) -> io::Result<()> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_sidecar(out: &Option<PathBuf>, value: &Value) -> io::Result<()> {
    match out {
        Some(path) => write_json(&Some(sidecar_path(path)), value),
        None => Ok(()),
    }
}

fn parse_model(text: &Option<String>) -> std::result::Result<Option<ModelSpec>, Failure> {
    text.as_deref().map(str::parse).transpose().map_err(Failure::from)
}

fn require_model(common: &Common) -> std::result::Result<ModelSpec, Failure> {
    parse_model(&common.model)?.ok_or_else(|| Failure::usage("--model is required"))
}

fn gradient_models(l: usize) -> Vec<ModelSpec> {
    (0..=l)
        .map(|n| ModelSpec::Bernstein { n, l })
        .chain((0..=l).map(|ell| ModelSpec::ReducedPmm { ell, l }))
        .collect()
}

fn cmd_verify(args: VerifyArgs) -> Outcome {
    let model = parse_model(&args.common.model)?;
    let l = match (model, args.common.l) {
        (Some(m), Some(l)) if m.window_len() != l && m != ModelSpec::Ssep => {
            return Err(Failure::usage(format!("--L {l} contradicts model {m}")));
        }
        (Some(m), _) if m != ModelSpec::Ssep => m.window_len(),
        (_, Some(l)) => l,
        _ => 4,
    };
    if l == 0 {
        return Err(Failure::usage("--L must be positive"));
    }
    let identity = match (&args.identity, args.all) {
        (Some(_), true) => return Err(Failure::usage("--all and --identity are exclusive")),
        (None, false) => return Err(Failure::usage("give --all or --identity")),
        (Some(name), false) => name.as_str(),
        (None, true) => "all",
    };
    let form = match args.mutate.as_deref() {
        None => GradientForm::Standard,
        Some(_) if identity != "gradient" => {
            return Err(Failure::usage("--mutate only applies to the gradient identity"))
        }
        Some("h") => GradientForm::ShiftedThreshold,
        Some("h-indicator") => GradientForm::IndicatorReducedH,
        Some("g") => GradientForm::BackwardAnchors,
        Some(other) => return Err(Failure::usage(format!("unknown mutation {other:?}"))),
    };
    let n_sites = args.common.n_sites.unwrap_or(2 * l + 4);
    let seed = args.common.seed.unwrap_or(0);
    let mode = match args.samples {
        Some(count) => Mode::Randomized { count, seed },
        None => Mode::default_for(n_sites, seed),
    };
    let orders: Vec<usize> = match args.n.or(args.ell) {
        Some(n) if n > l => return Err(Failure::usage(format!("order {n} exceeds L = {l}"))),
        Some(n) => vec![n],
        None => (0..=l).collect(),
    };
    let models = match model {
        Some(m) => vec![m],
        None => gradient_models(l),
    };
    let mut reports: Vec<IdentityReport> = Vec::new();
    let mut extra = Value::Null;
    match identity {
        "all" => reports = id::run_suite(l, n_sites, mode)?,
        "gradient" => {
            for m in &models {
                reports.push(id::check_gradient_with(m, n_sites, mode, form)?);
            }
        }
        "inversion" => reports.push(id::check_inversion(l, n_sites, mode)?),
        "decomposition" => reports.push(id::check_decomposition(l, n_sites, mode)?),
        "partition" => reports.push(id::check_partition(l, n_sites, mode)?),
        "monotonicity" => reports.push(id::check_monotonicity(l, n_sites, mode)?),
        "monomial" => reports.push(id::check_monomial(l, n_sites, mode)?),
        "inequality" | "symmetry" | "threshold" | "threshold-binomial" | "interpolation" => {
            for &n in &orders {
                reports.push(match identity {
                    "inequality" => id::check_inequality(n, l, n_sites, mode)?,
                    "symmetry" => id::check_symmetry(n, l, n_sites, mode)?,
                    "threshold" => id::check_threshold_identity(n, l, n_sites, mode)?,
                    "threshold-binomial" => id::check_threshold_binomial(n, l, n_sites, mode)?,
                    _ if n == 0 => continue,
                    _ => id::check_interpolation(n, l, n_sites)?,
                });
            }
        }
        "rate-properties" | "telescoping" => {
            for m in &models {
                reports.push(if identity == "telescoping" {
                    id::check_current_telescoping(m, n_sites, mode)?
                } else {
                    id::check_rate_properties(m, n_sites, mode)?
                });
            }
        }
        "expectation" => {
            for m in &models {
                let points = id::uniform_density_points(m.window_len() + 1);
                reports.push(id::check_expectation(m, &points)?);
            }
        }
        "negativity" => {
            let n = args.n.unwrap_or(1);
            let k = args.k.unwrap_or(2);
            let n_sites = args.common.n_sites.unwrap_or(2 * (n + k) + 2);
            let result = id::negativity_search(n, k, n_sites)?;
            let passed = k % 2 == 1 || result.exact <= rat(-1, (n + k + 1) as i64);
            extra = json!({ "negativity": result, "n": n, "k": k, "N": n_sites, "passed": passed });
        }
        other => return Err(Failure::usage(format!("unknown identity {other:?}"))),
    }
    let passed = reports.iter().all(|r| r.passed) && extra.get("passed").is_none_or(|p| p == &Value::Bool(true));
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!("{}", r.summary_line());
    }
    let mut doc = json!({
        "metadata": metadata("verify", &args),
        "passed": passed,
        "reports": reports,
    });
    if !extra.is_null() {
        doc["result"] = extra;
    }
    write_json(&args.common.out, &doc)?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_graph(args: GraphArgs) -> Outcome {
    let model = require_model(&args.common)?;
    let n_sites = args.common.n_sites.ok_or_else(|| Failure::usage("--N is required"))?;
    let g = graph::build_transition_graph(&model, n_sites)?;
    let classes = graph::communicating_classes(&g);
    let summary = classes.summary(&model);
    let mut doc = json!({
        "metadata": metadata("graph", &args),
        "summary": summary,
        "edges": g.edge_count(),
    });
    let mut passed = true;
    if args.checks {
        let family = graph::blocked_family(&model, n_sites)?;
        let missing = family.iter().filter(|&&s| !classes.is_blocked(s)).count();
        passed &= missing == 0;
        doc["blocked_family"] = json!({ "size": family.len(), "not_blocked": missing });
        if model != ModelSpec::Ssep {
            let mut reports = Vec::new();
            for check in [
                graph::mobility_check,
                graph::mass_transport_check,
                graph::cluster_connectivity_check,
            ] {
                match check(&model, n_sites) {
                    Ok(r) => reports.push(r),
                    Err(e @ (Error::TorusTooSmall { .. } | Error::TooLarge { .. })) => {
                        doc["notes"] = json!(format!("cluster checks skipped: {e}"));
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            passed &= reports.iter().all(|r| r.passed);
            doc["reports"] = json!(reports);
        }
        doc["passed"] = json!(passed);
    }
    match &args.common.out {
        Some(_) => {
            let mut out = open_out(&args.common.out)?;
            classes.write_membership_csv(&mut out)?;
            out.flush()?;
            write_sidecar(&args.common.out, &doc)?;
            write_json(&None, &doc)?;
        }
        None => write_json(&None, &doc)?,
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

fn dynamics(d: &DynamicsArgs) -> std::result::Result<(ProfileSpec, f64, Vec<f64>), Failure> {
    let profile: ProfileSpec = d.profile.as_deref().unwrap_or("step:0.8,0.2").parse()?;
    let t_max = d.tmax.unwrap_or(0.1);
    let times = d
        .times
        .clone()
        .unwrap_or_else(|| vec![0.0, t_max / 5.0, t_max / 2.0, t_max]);
    Ok((profile, t_max, times))
}

fn simulation_config(
    common: &Common,
    d: &DynamicsArgs,
    s: &SimulationArgs,
) -> std::result::Result<SimulationConfig, Failure> {
    let model = require_model(common)?;
    let (profile, t_max, output_times) = dynamics(d)?;
    let config = SimulationConfig {
        model,
        n_sites: common.n_sites.ok_or_else(|| Failure::usage("--N is required"))?,
        profile,
        t_max,
        output_times,
        boxes: s.boxes.unwrap_or(32),
        seed: common.seed.unwrap_or(0),
        replicas: s.replicas.unwrap_or(1),
        engine: s
            .engine
            .as_deref()
            .map(str::parse)
            .transpose()?
            .unwrap_or(Engine::default()),
    };
    config.validate()?;
    Ok(config)
}

fn blocked_note(traj: &simulate::Trajectory) -> i32 {
    if traj.blocked() {
        for r in traj.replicas.iter().filter(|r| r.blocked_at.is_some()) {
            eprintln!(
                "replica {} blocked at t = {}",
                r.replica,
                r.blocked_at.unwrap_or_default()
            );
        }
        EXIT_BLOCKED
    } else {
        EXIT_OK
    }
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let config = simulation_config(&args.common, &args.dynamics, &args.sim)?;
    let traj = simulate::run_trajectory(&config)?;
    let mut out = open_out(&args.common.out)?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    let mut meta = traj.metadata();
    meta["invocation"] = metadata("simulate", &args);
    write_sidecar(&args.common.out, &meta)?;
    Ok(blocked_note(&traj))
}

fn hydro_config(
    model: ModelSpec,
    d: &DynamicsArgs,
    grid: usize,
    cfl: Option<f64>,
) -> std::result::Result<HydroConfig, Failure> {
    let (profile, t_max, output_times) = dynamics(d)?;
    let config = HydroConfig {
        model,
        grid,
        t_max,
        output_times,
        profile,
        cfl: cfl.unwrap_or(hydro::DEFAULT_CFL),
    };
    config.validate()?;
    Ok(config)
}

fn cmd_hydro(args: HydroArgs) -> Outcome {
    let model = require_model(&args.common)?;
    let config = hydro_config(model, &args.dynamics, args.grid.unwrap_or(256), args.cfl)?;
    let solution = hydro::solve_pde(&config)?;
    let mut out = open_out(&args.common.out)?;
    solution.write_csv(&mut out)?;
    out.flush()?;
    let meta = json!({
        "metadata": metadata("hydro", &args),
        "config": config,
        "steps": solution.steps,
        "dt_max": solution.dt_max,
    });
    write_sidecar(&args.common.out, &meta)?;
    Ok(EXIT_OK)
}

fn cmd_compare(args: CompareArgs) -> Outcome {
    let sim = simulation_config(&args.common, &args.dynamics, &args.sim)?;
    let grid = args.grid.unwrap_or(sim.boxes * 256usize.div_ceil(sim.boxes));
    if !grid.is_multiple_of(sim.boxes) {
        return Err(Failure::usage(format!(
            "M = {grid} must be a multiple of K = {}",
            sim.boxes
        )));
    }
    let pde_config = hydro_config(sim.model, &args.dynamics, grid, args.cfl)?;
    let traj = simulate::run_trajectory(&sim)?;
    let pde = hydro::solve_pde(&pde_config)?;
    let comparison = hydro::compare_profiles(&traj, &pde)?;
    let doc = json!({
        "metadata": metadata("compare", &args),
        "generator": simulate::GENERATOR,
        "events": traj.replicas.iter().map(|r| r.events).collect::<Vec<_>>(),
        "comparison": comparison,
    });
    write_json(&args.common.out, &doc)?;
    Ok(blocked_note(&traj))
}

fn cmd_expectation(args: ExpectationArgs) -> Outcome {
    let model = require_model(&args.common)?;
    let text = args.rho.as_deref().ok_or_else(|| Failure::usage("--rho is required"))?;
    let exact = parse_rational(text).ok_or_else(|| Failure::usage(format!("cannot parse density {text:?}")))?;
    let rho = to_f64(exact);
    let samples = args.samples.unwrap_or(100_000);
    let seed = args.common.seed.unwrap_or(0);
    let estimate = simulate::monte_carlo_expectation(&model, rho, samples, seed)?;
    let target = crate::constraints::diffusivity_exact(&model, exact)?;
    let deviation = (estimate.estimate - to_f64(target)).abs();
    let doc = json!({
        "metadata": metadata("expectation", &args),
        "generator": simulate::GENERATOR,
        "model": model.to_string(),
        "rho": text,
        "estimate": estimate.estimate,
        "stderr": estimate.stderr,
        "samples": estimate.samples,
        "exact": target.to_string(),
        "within_3_stderr": deviation <= 3.0 * estimate.stderr,
    });
    write_json(&args.common.out, &doc)?;
    Ok(EXIT_OK)
}
