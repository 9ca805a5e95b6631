//! Command-line front end: every library module behind one subcommand, with
//! JSON config files, flag overrides, deterministic seeding, and JSON/CSV
//! output that echoes the fully-resolved configuration it ran under.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ruinkit::cascade::{self, CascadeConfig, CascadeModel, EdgeModel};
use ruinkit::distributions::{DistributionSpec, SampleSeries};
use ruinkit::fragility::{self, CorrelationModel, HarmForm, HarmFunction, PortfolioSpec};
use ruinkit::inference::{self, Pairing};
use ruinkit::ruin::{self, ExposurePolicy, WalkSpec};
use ruinkit::sensitivity::{self, SweepConfig};
use ruinkit::tail_diagnostics::{
    self, MaxToSumPoint, Scope, TailClass, TailInput, DEFAULT_EPSILONS,
};

#[derive(Parser)]
#[command(
    name = "ruinkit",
    version,
    about = "Ruin, tail, fragility, and cascade analysis under thin- and fat-tailed uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    globals: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates for simulating subcommands.
    #[arg(long, global = true)]
    replicates: Option<u64>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated-exposure, gambler's-ruin, and absorbing-walk ruin.
    Ruin(RuinArgs),
    /// Tail diagnostics on a distribution or a data file.
    Tails(TailsArgs),
    /// Ruin probability swept over uncertainty scale or information ratio.
    Sweep(SweepArgs),
    /// Harm convexity, expected harm under spread, and 1/n portfolios.
    Fragility(FragilityArgs),
    /// Branching and network-contagion cascade sizes.
    Cascade(CascadeArgs),
    /// Correct-versus-naive statistics of differences.
    Compare(CompareArgs),
    /// Tail-by-scope policy quadrant lookup.
    Quadrant(QuadrantArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ruin(_) => "ruin",
            Command::Tails(_) => "tails",
            Command::Sweep(_) => "sweep",
            Command::Fragility(_) => "fragility",
            Command::Cascade(_) => "cascade",
            Command::Compare(_) => "compare",
            Command::Quadrant(_) => "quadrant",
        }
    }
}

enum CliError {
    /// Usage or configuration problem; exit 2.
    Usage(String),
    /// The computation itself failed; exit 1.
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parameter and configuration errors are the caller's fault (exit 2);
/// everything the data or the mathematics refuses is a runtime error.
fn map_err(e: ruinkit::Error) -> CliError {
    use ruinkit::Error::*;
    match e {
        InvalidParameter(_) | Config(_) | Domain(_) => CliError::Usage(format!("error: {e}")),
        other => CliError::Runtime(format!("error: {other}")),
    }
}

fn first_line(s: &str) -> String {
    s.lines().next().unwrap_or("error").to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", first_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

/// Config-file schema. Flags override any value given here.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    subcommand: Option<String>,
    parameters: Option<Value>,
    seed: Option<u64>,
    replicates: Option<u64>,
    format: Option<Format>,
    output: Option<String>,
}

struct Globals {
    seed: u64,
    replicates: u64,
    format: Format,
    output: Option<PathBuf>,
}

/// The fully-resolved run configuration, echoed at the head of every output.
#[derive(Serialize)]
struct EchoConfig {
    subcommand: String,
    parameters: Value,
    seed: u64,
    replicates: u64,
    format: Format,
    output: String,
}

enum Rendered {
    Json(Value),
    Csv { header: &'static str, rows: Vec<String> },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file: FileConfig = match &cli.globals.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("error: cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("config error: {}", first_line(&e.to_string()))))?
        }
        None => FileConfig::default(),
    };
    let command = match (cli.command, file.subcommand.as_deref()) {
        (Some(cmd), Some(name)) if cmd.name() != name => {
            return Err(usage(format!(
                "error: config file names subcommand `{name}` but the command line says `{}`",
                cmd.name()
            )));
        }
        (Some(cmd), _) => cmd,
        (None, Some(name)) => command_from_name(name)?,
        (None, None) => return Err(usage("error: no subcommand given (argv or config file)")),
    };
    let globals = Globals {
        seed: cli.globals.seed.or(file.seed).unwrap_or(0),
        replicates: cli.globals.replicates.or(file.replicates).unwrap_or(100_000),
        format: cli.globals.format.or(file.format).unwrap_or(Format::Json),
        output: cli
            .globals
            .output
            .or_else(|| file.output.as_ref().map(PathBuf::from)),
    };
    let name = command.name();
    let (parameters, rendered) = dispatch(command, &file.parameters, &globals)?;
    let echo = EchoConfig {
        subcommand: name.to_string(),
        parameters,
        seed: globals.seed,
        replicates: globals.replicates,
        format: globals.format,
        output: globals
            .output
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "-".to_string()),
    };
    let bytes = render(&echo, rendered)?;
    match &globals.output {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Runtime(format!("error: cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Runtime(format!("error: cannot write output: {e}")))
        }
    }
}

fn command_from_name(name: &str) -> Result<Command, CliError> {
    Ok(match name {
        "ruin" => Command::Ruin(RuinArgs::default()),
        "tails" => Command::Tails(TailsArgs::default()),
        "sweep" => Command::Sweep(SweepArgs::default()),
        "fragility" => Command::Fragility(FragilityArgs::default()),
        "cascade" => Command::Cascade(CascadeArgs::default()),
        "compare" => Command::Compare(CompareArgs::default()),
        "quadrant" => Command::Quadrant(QuadrantArgs::default()),
        other => {
            return Err(usage(format!(
                "config error: unknown subcommand `{other}`, expected one of ruin, tails, sweep, fragility, cascade, compare, quadrant"
            )));
        }
    })
}

fn dispatch(
    command: Command,
    params: &Option<Value>,
    g: &Globals,
) -> Result<(Value, Rendered), CliError> {
    match command {
        Command::Ruin(args) => run_ruin(args, params, g),
        Command::Tails(args) => run_tails(args, params, g),
        Command::Sweep(args) => run_sweep(args, params, g),
        Command::Fragility(args) => run_fragility(args, params, g),
        Command::Cascade(args) => run_cascade(args, params, g),
        Command::Compare(args) => run_compare(args, params, g),
        Command::Quadrant(args) => run_quadrant(args, params, g),
    }
}

fn parse_params<T: serde::de::DeserializeOwned + Default>(
    params: &Option<Value>,
) -> Result<T, CliError> {
    match params {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| usage(format!("config error: {}", first_line(&e.to_string())))),
    }
}

fn render(echo: &EchoConfig, rendered: Rendered) -> Result<Vec<u8>, CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a EchoConfig,
        report: Value,
    }
    Ok(match rendered {
        Rendered::Json(report) => {
            let mut bytes = serde_json::to_vec_pretty(&Doc { config: echo, report })
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            bytes.push(b'\n');
            bytes
        }
        Rendered::Csv { header, rows } => {
            let config_line = serde_json::to_string(echo)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            let mut text = format!("# ruinkit config: {config_line}\n{header}\n");
            for row in rows {
                text.push_str(&row);
                text.push('\n');
            }
            text.into_bytes()
        }
    })
}

/// Plain decimal for mid-range magnitudes, scientific elsewhere, so CSV
/// columns stay readable without losing tiny tail probabilities.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e15) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn no_csv(op: &str) -> CliError {
    usage(format!(
        "error: csv output is not defined for {op}; use --format json"
    ))
}

fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("error: cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|_| {
            usage(format!(
                "error: {} line {}: expected a number, got `{t}`",
                path.display(),
                i + 1
            ))
        })?);
    }
    Ok(values)
}

// ---------------------------------------------------------------- distargs

/// Distribution selection shared by several subcommands.
#[derive(Args, Default)]
struct DistArgs {
    /// Family: gaussian, exponential, bernoulli, lognormal, pareto,
    /// student_t, cauchy.
    #[arg(long)]
    family: Option<String>,
    /// Location.
    #[arg(long)]
    loc: Option<f64>,
    /// Scale.
    #[arg(long)]
    scale: Option<f64>,
    /// Tail index (pareto, student_t) or success probability (bernoulli).
    #[arg(long)]
    alpha: Option<f64>,
    /// Support minimum (pareto).
    #[arg(long)]
    xmin: Option<f64>,
}

impl DistArgs {
    fn any(&self) -> bool {
        self.family.is_some()
            || self.loc.is_some()
            || self.scale.is_some()
            || self.alpha.is_some()
            || self.xmin.is_some()
    }

    /// Overlay these flags on an optional config-file spec.
    fn resolve(&self, from_config: Option<DistributionSpec>) -> Result<Option<DistributionSpec>, CliError> {
        if from_config.is_none() && !self.any() {
            return Ok(None);
        }
        if from_config.is_none() && self.family.is_none() {
            return Err(usage(
                "error: --family is required when giving distribution parameters",
            ));
        }
        let mut v = match from_config {
            Some(spec) => serde_json::to_value(spec).expect("spec serializes"),
            None => json!({ "family": self.family.clone().unwrap() }),
        };
        let obj = v.as_object_mut().expect("spec is an object");
        if let Some(f) = &self.family {
            obj.insert("family".into(), json!(f));
        }
        if let Some(x) = self.loc {
            obj.insert("loc".into(), json!(x));
        }
        if let Some(x) = self.scale {
            obj.insert("scale".into(), json!(x));
        }
        if let Some(x) = self.alpha {
            obj.insert("alpha".into(), json!(x));
        }
        if let Some(x) = self.xmin {
            obj.insert("xmin".into(), json!(x));
        }
        let spec: DistributionSpec = serde_json::from_value(v)
            .map_err(|e| usage(format!("error: {}", first_line(&e.to_string()))))?;
        spec.validate().map_err(map_err)?;
        Ok(Some(spec))
    }
}

// -------------------------------------------------------------------- ruin

#[derive(Args, Default)]
struct RuinArgs {
    /// Per-exposure ruin probability (repeated-exposure mode).
    #[arg(long)]
    p: Option<f64>,
    /// Number of independent exposures.
    #[arg(long)]
    n: Option<u64>,
    /// Also report the smallest exposure count reaching this ruin level.
    #[arg(long)]
    target: Option<f64>,
    /// Starting bankroll (gambler mode, integer units).
    #[arg(long)]
    a: Option<u64>,
    /// Absorbing upper bankroll (gambler mode; omit for no upper barrier).
    #[arg(long)]
    upper: Option<u64>,
    /// Per-round win probability (gambler mode).
    #[arg(long)]
    p_up: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RuinParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_up: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    walk: Option<WalkSpec>,
}

fn run_ruin(args: RuinArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    let mut p: RuinParams = parse_params(params)?;
    p.p = args.p.or(p.p);
    p.n = args.n.or(p.n);
    p.target = args.target.or(p.target);
    p.a = args.a.or(p.a);
    p.upper = args.upper.or(p.upper);
    p.p_up = args.p_up.or(p.p_up);

    let inferred = match (&p.walk, p.p.is_some() || p.n.is_some(), p.a.is_some() || p.p_up.is_some()) {
        (Some(_), false, false) => "walk",
        (None, true, false) => "exposure",
        (None, false, true) => "gambler",
        (None, false, false) => {
            return Err(usage(
                "error: ruin needs --p/--n (exposure), --a/--p-up (gambler), or a walk in the config file",
            ));
        }
        _ => return Err(usage("error: ruin modes are mutually exclusive; give exposure, gambler, or walk parameters, not a mixture")),
    };
    if let Some(mode) = &p.mode {
        if mode != inferred {
            return Err(usage(format!(
                "error: config names mode `{mode}` but the parameters describe `{inferred}`"
            )));
        }
    }
    p.mode = Some(inferred.to_string());

    match inferred {
        "exposure" => {
            let (prob, n) = (
                p.p.ok_or_else(|| usage("error: exposure mode needs --p"))?,
                p.n.ok_or_else(|| usage("error: exposure mode needs --n"))?,
            );
            let policy = ExposurePolicy { p: prob, n };
            let ruin_probability = ruin::repeated_exposure_ruin(policy).map_err(map_err)?;
            let mut report = json!({
                "ruin_probability": ruin_probability,
                "survival_probability": 1.0 - ruin_probability,
            });
            if let Some(target) = p.target {
                let needed = ruin::exposures_to_ruin_level(prob, target).map_err(map_err)?;
                report
                    .as_object_mut()
                    .unwrap()
                    .insert("exposures_to_target".into(), json!(needed));
            }
            if g.format == Format::Csv {
                return Err(no_csv("the ruin report"));
            }
            Ok((serde_json::to_value(&p).unwrap(), Rendered::Json(report)))
        }
        "gambler" => {
            let a = p.a.ok_or_else(|| usage("error: gambler mode needs --a"))?;
            let p_up = p.p_up.ok_or_else(|| usage("error: gambler mode needs --p-up"))?;
            let prob = ruin::gambler_ruin_closed_form(a, p.upper, p_up).map_err(map_err)?;
            if g.format == Format::Csv {
                return Err(no_csv("the ruin report"));
            }
            Ok((
                serde_json::to_value(&p).unwrap(),
                Rendered::Json(json!({ "ruin_probability": prob })),
            ))
        }
        _ => {
            let walk = p.walk.clone().expect("walk mode");
            walk.validate().map_err(map_err)?;
            let report = ruin::simulate_absorbing_walk(&walk, g.replicates, g.seed)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            if g.format == Format::Csv {
                return Err(no_csv("the ruin report"));
            }
            Ok((
                serde_json::to_value(&p).unwrap(),
                Rendered::Json(serde_json::to_value(&report).unwrap()),
            ))
        }
    }
}

// ------------------------------------------------------------------- tails

#[derive(Args, Default)]
struct TailsArgs {
    /// Diagnostic to run.
    #[arg(long, value_parser = ["diagnose", "conv", "summax", "maxsum", "hill", "probe"])]
    op: Option<String>,
    #[command(flatten)]
    dist: DistArgs,
    /// Data file, one value per line (sample input).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic sample size drawn from the distribution.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Tail evaluation point; repeat for several.
    #[arg(long = "x", action = ArgAction::Append)]
    x: Vec<f64>,
    /// Number of summands for the sum-versus-max ratios.
    #[arg(long)]
    n: Option<usize>,
    /// Moment order for the max-to-sum ratio.
    #[arg(long)]
    p: Option<u32>,
    /// Hill order-statistic count.
    #[arg(long)]
    k: Option<usize>,
    /// Exponential-moment epsilon; repeat for several.
    #[arg(long = "epsilon", action = ArgAction::Append)]
    epsilons: Vec<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TailsParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<DistributionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilons: Option<Vec<f64>>,
}

/// Log2-spaced prefix points (plus the endpoint) so emitted paths stay
/// bounded; the library itself returns every prefix.
fn thin_log2(points: &[MaxToSumPoint]) -> Vec<MaxToSumPoint> {
    let mut out = Vec::new();
    let mut next = 1usize;
    for p in points {
        if p.n == next {
            out.push(*p);
            next = next.saturating_mul(2);
        }
    }
    if let (Some(last), true) = (points.last(), !points.is_empty()) {
        if out.last().map(|p| p.n) != Some(last.n) {
            out.push(*last);
        }
    }
    out
}

/// Empirical quantile ladder for convolution points on a folded sample:
/// each level keeps at least 100 exceedances above it.
fn empirical_ladder(folded: &mut Vec<f64>) -> Vec<f64> {
    folded.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = folded.len();
    let cap = n.saturating_sub(101);
    let mut xs: Vec<f64> = Vec::new();
    for q in [0.95, 0.99, 0.999] {
        let idx = ((n as f64 * q).ceil() as usize).min(cap);
        let x = folded[idx];
        let exceed = n - folded.partition_point(|v| *v <= x);
        if exceed >= 100 && (exceed as f64 / n as f64) <= 0.1 && xs.last().copied() != Some(x) {
            xs.push(x);
        }
    }
    xs
}

fn run_tails(args: TailsArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    let mut p: TailsParams = parse_params(params)?;
    let config_dist = p.dist.take();
    p.dist = args.dist.resolve(config_dist)?;
    p.op = args.op.or(p.op);
    p.data = args.data.as_ref().map(|d| d.display().to_string()).or(p.data);
    p.sample_size = args.sample_size.or(p.sample_size);
    if !args.x.is_empty() {
        p.x = Some(args.x.clone());
    }
    p.n = args.n.or(p.n);
    p.p = args.p.or(p.p);
    p.k = args.k.or(p.k);
    if !args.epsilons.is_empty() {
        p.epsilons = Some(args.epsilons.clone());
    }
    let op = p.op.clone().unwrap_or_else(|| "diagnose".to_string());
    p.op = Some(op.clone());
    if p.data.is_some() && p.dist.is_some() {
        return Err(usage("error: give either --data or a distribution, not both"));
    }

    // A concrete sample: from the data file, or synthesized from the spec.
    let sample = |p: &mut TailsParams| -> Result<Vec<f64>, CliError> {
        if let Some(path) = &p.data {
            p.sample_size = None;
            return read_series(Path::new(path));
        }
        let spec = p
            .dist
            .ok_or_else(|| usage("error: this diagnostic needs --data or a distribution"))?;
        let size = p.sample_size.unwrap_or(100_000);
        p.sample_size = Some(size);
        Ok(spec.sample(size, g.seed).map_err(map_err)?.values)
    };

    match op.as_str() {
        "diagnose" => {
            if g.format == Format::Csv {
                return Err(no_csv("the combined diagnostics report"));
            }
            let values = sample(&mut p)?;
            let mut report = tail_diagnostics::diagnose_sample(&values, g.seed)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            for path in &mut report.max_to_sum {
                path.path = thin_log2(&path.path);
            }
            Ok((
                serde_json::to_value(&p).unwrap(),
                Rendered::Json(serde_json::to_value(&report).unwrap()),
            ))
        }
        "conv" => {
            let points = if let Some(spec) = p.dist {
                let xs = match p.x.clone() {
                    Some(xs) => xs,
                    None => [0.95, 0.99, 0.999]
                        .iter()
                        .map(|&q| spec.quantile(q))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(map_err)?,
                };
                p.x = Some(xs.clone());
                tail_diagnostics::convolution_ratio(
                    TailInput::Spec(&spec),
                    &xs,
                    g.replicates,
                    g.seed,
                )
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?
            } else {
                let values = sample(&mut p)?;
                let xs = match p.x.clone() {
                    Some(xs) => xs,
                    None => {
                        let mut folded: Vec<f64> = values.iter().map(|v| v.abs()).collect();
                        empirical_ladder(&mut folded)
                    }
                };
                p.x = Some(xs.clone());
                tail_diagnostics::convolution_ratio(
                    TailInput::Sample(&values),
                    &xs,
                    g.replicates,
                    g.seed,
                )
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?
            };
            let rendered = match g.format {
                Format::Json => Rendered::Json(json!({ "points": points })),
                Format::Csv => Rendered::Csv {
                    header: "x,ratio,stderr",
                    rows: points
                        .iter()
                        .map(|pt| {
                            format!("{},{},{}", fmt_f64(pt.x), fmt_f64(pt.ratio), fmt_f64(pt.stderr))
                        })
                        .collect(),
                },
            };
            Ok((serde_json::to_value(&p).unwrap(), rendered))
        }
        "summax" => {
            let spec = p
                .dist
                .ok_or_else(|| usage("error: summax needs a distribution (positive support)"))?;
            let n = p.n.unwrap_or(10);
            p.n = Some(n);
            let xs = match p.x.clone() {
                Some(xs) => xs,
                None => vec![tail_diagnostics::estimate_sum_quantile(
                    &spec,
                    n,
                    0.99,
                    g.replicates,
                    g.seed,
                )
                .map_err(map_err)?],
            };
            p.x = Some(xs.clone());
            let points = tail_diagnostics::sum_max_ratio(&spec, n, &xs, g.replicates, g.seed)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            let rendered = match g.format {
                Format::Json => Rendered::Json(json!({ "points": points })),
                Format::Csv => Rendered::Csv {
                    header: "n,x,ratio_a,ratio_b",
                    rows: points
                        .iter()
                        .map(|pt| {
                            format!(
                                "{},{},{},{}",
                                pt.n,
                                fmt_f64(pt.x),
                                fmt_f64(pt.ratio_a),
                                fmt_f64(pt.ratio_b)
                            )
                        })
                        .collect(),
                },
            };
            Ok((serde_json::to_value(&p).unwrap(), rendered))
        }
        "maxsum" => {
            let values = sample(&mut p)?;
            let order = p.p.unwrap_or(1);
            p.p = Some(order);
            let path = tail_diagnostics::max_to_sum(&values, order)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            let thinned = thin_log2(&path);
            let rendered = match g.format {
                Format::Json => Rendered::Json(json!({ "p": order, "points": thinned })),
                Format::Csv => Rendered::Csv {
                    header: "n,r_np",
                    rows: thinned
                        .iter()
                        .map(|pt| format!("{},{}", pt.n, fmt_f64(pt.r)))
                        .collect(),
                },
            };
            Ok((serde_json::to_value(&p).unwrap(), rendered))
        }
        "hill" => {
            if g.format == Format::Csv {
                return Err(no_csv("the hill estimate"));
            }
            let values = sample(&mut p)?;
            let positive = values.iter().filter(|v| v.abs() > 0.0).count();
            let k = p.k.unwrap_or_else(|| tail_diagnostics::default_hill_k(positive));
            p.k = Some(k);
            let est = tail_diagnostics::hill_estimator(&values, k)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            Ok((
                serde_json::to_value(&p).unwrap(),
                Rendered::Json(serde_json::to_value(est).unwrap()),
            ))
        }
        "probe" => {
            if g.format == Format::Csv {
                return Err(no_csv("the moment probe"));
            }
            let values = sample(&mut p)?;
            let epsilons = p.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
            p.epsilons = Some(epsilons.clone());
            let points = tail_diagnostics::exp_moment_probe(&values, &epsilons)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            Ok((
                serde_json::to_value(&p).unwrap(),
                Rendered::Json(json!({ "points": points })),
            ))
        }
        other => Err(usage(format!(
            "error: unknown tails op `{other}`, expected diagnose, conv, summax, maxsum, hill, or probe"
        ))),
    }
}

// ------------------------------------------------------------------- sweep

#[derive(Args, Default)]
struct SweepArgs {
    /// Sweep kind: scale, ir, or skepticism.
    #[arg(long, value_parser = ["scale", "ir", "skepticism"])]
    kind: Option<String>,
    /// Single-period loss level counted as ruin.
    #[arg(long)]
    k: Option<f64>,
    /// Number of periods the per-period ruin compounds over.
    #[arg(long)]
    horizon: Option<u64>,
    /// Benefit per period (location of the scale sweep).
    #[arg(long)]
    benefit: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    families: Option<Vec<DistributionSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    benefit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncertainty_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ir_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
}

fn run_sweep(args: SweepArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    let mut p: SweepParams = parse_params(params)?;
    p.kind = args.kind.or(p.kind);
    p.k = args.k.or(p.k);
    p.horizon = args.horizon.or(p.horizon);
    p.benefit = args.benefit.or(p.benefit);
    let kind = p.kind.clone().unwrap_or_else(|| "scale".to_string());
    p.kind = Some(kind.clone());

    let mut config = SweepConfig::default();
    if let Some(f) = &p.families {
        config.families = f.clone();
    }
    if let Some(b) = p.benefit {
        config.benefit = b;
    }
    if let Some(grid) = &p.uncertainty_grid {
        config.uncertainty_grid = grid.clone();
    }
    if let Some(grid) = &p.ir_grid {
        config.ir_grid = grid.clone();
    }
    if let Some(k) = p.k {
        config.k = k;
    }
    if let Some(h) = p.horizon {
        config.horizon = h;
    }
    config.validate().map_err(map_err)?;
    // Echo the fully-resolved sweep, defaults included.
    let echo = {
        let mut v = serde_json::to_value(&config).unwrap();
        v.as_object_mut().unwrap().insert("kind".into(), json!(kind));
        v
    };

    match kind.as_str() {
        "skepticism" => {
            if g.format == Format::Csv {
                return Err(no_csv("the skepticism report"));
            }
            let report = sensitivity::skepticism_report(&config)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            Ok((echo, Rendered::Json(serde_json::to_value(&report).unwrap())))
        }
        _ => {
            let result = if kind == "scale" {
                sensitivity::scale_sweep(&config)
            } else {
                sensitivity::information_ratio_sweep(&config)
            }
            .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            let rendered = match g.format {
                Format::Json => Rendered::Json(serde_json::to_value(&result).unwrap()),
                Format::Csv => Rendered::Csv {
                    header: "family,mu,sigma,ir,k,per_period_ruin,horizon_ruin",
                    rows: result
                        .rows
                        .iter()
                        .map(|r| {
                            format!(
                                "{},{},{},{},{},{},{}",
                                r.family,
                                fmt_f64(r.mu),
                                fmt_f64(r.sigma),
                                fmt_f64(r.ir),
                                fmt_f64(r.k),
                                fmt_f64(r.per_period_ruin),
                                fmt_f64(r.horizon_ruin)
                            )
                        })
                        .collect(),
                },
            };
            Ok((echo, rendered))
        }
    }
}

// --------------------------------------------------------------- fragility

#[derive(Args, Default)]
struct FragilityArgs {
    /// Operation: probe, compare, harm, measure, or portfolio.
    #[arg(long, value_parser = ["probe", "compare", "harm", "measure", "portfolio"])]
    op: Option<String>,
    /// Harm form: power:P, linear:A, threshold:T, or table:FILE (CSV x,h).
    #[arg(long)]
    harm: Option<String>,
    /// Harm saturation point (destruction threshold).
    #[arg(long)]
    domain_max: Option<f64>,
    #[command(flatten)]
    dist: DistArgs,
    /// Probe center.
    #[arg(long)]
    x: Option<f64>,
    /// Probe half-width.
    #[arg(long)]
    delta: Option<f64>,
    /// Total stressor dose for the concentration comparison.
    #[arg(long)]
    total: Option<f64>,
    /// Number of equal pieces to split the dose into.
    #[arg(long)]
    pieces: Option<u64>,
    /// Narrow uncertainty scale.
    #[arg(long)]
    sigma_lo: Option<f64>,
    /// Widened uncertainty scale.
    #[arg(long)]
    sigma_hi: Option<f64>,
    /// Quadrature resolution.
    #[arg(long)]
    resolution: Option<usize>,
    /// Portfolio size (1/n mode).
    #[arg(long)]
    n: Option<u64>,
    /// Per-source failure probability.
    #[arg(long)]
    q: Option<f64>,
    /// Failed fraction that counts as ruin.
    #[arg(long)]
    theta: Option<f64>,
    /// Common-shock weight; omit for independent sources.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FragilityParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    harm: Option<HarmFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<DistributionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pieces: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    portfolio: Option<PortfolioSpec>,
}

fn parse_harm_form(s: &str) -> Result<HarmForm, CliError> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| {
        usage(format!(
            "error: harm form must look like power:2, linear:0.5, threshold:1, or table:FILE, got `{s}`"
        ))
    })?;
    let num = |what: &str| -> Result<f64, CliError> {
        rest.parse::<f64>()
            .map_err(|_| usage(format!("error: {what} must be a number, got `{rest}`")))
    };
    Ok(match kind {
        "power" => HarmForm::Power { p: num("power exponent")? },
        "linear" => HarmForm::Linear { a: num("linear slope")? },
        "threshold" => HarmForm::Threshold { t: num("threshold")? },
        "table" => {
            let path = Path::new(rest);
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("error: cannot read {}: {e}", path.display())))?;
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') || t == "x,h" {
                    continue;
                }
                let (xs, hs) = t.split_once(',').ok_or_else(|| {
                    usage(format!(
                        "error: {} line {}: expected `x,h`, got `{t}`",
                        path.display(),
                        i + 1
                    ))
                })?;
                let parse = |v: &str| {
                    v.trim().parse::<f64>().map_err(|_| {
                        usage(format!(
                            "error: {} line {}: expected a number, got `{v}`",
                            path.display(),
                            i + 1
                        ))
                    })
                };
                points.push((parse(xs)?, parse(hs)?));
            }
            HarmForm::Table { points }
        }
        other => {
            return Err(usage(format!(
                "error: unknown harm form `{other}`, expected power, linear, threshold, or table"
            )));
        }
    })
}

fn run_fragility(args: FragilityArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    if g.format == Format::Csv {
        return Err(no_csv("fragility reports"));
    }
    let mut p: FragilityParams = parse_params(params)?;
    p.op = args.op.or(p.op);
    if let Some(s) = &args.harm {
        let form = parse_harm_form(s)?;
        let domain_max = args.domain_max.or(p.harm.as_ref().and_then(|h| h.domain_max));
        p.harm = Some(HarmFunction { form, domain_max });
    } else if let Some(d) = args.domain_max {
        if let Some(h) = &mut p.harm {
            h.domain_max = Some(d);
        }
    }
    let config_dist = p.dist.take();
    p.dist = args.dist.resolve(config_dist)?;
    p.x = args.x.or(p.x);
    p.delta = args.delta.or(p.delta);
    p.total = args.total.or(p.total);
    p.pieces = args.pieces.or(p.pieces);
    p.sigma_lo = args.sigma_lo.or(p.sigma_lo);
    p.sigma_hi = args.sigma_hi.or(p.sigma_hi);
    p.resolution = args.resolution.or(p.resolution);
    if args.n.is_some() || args.q.is_some() || args.theta.is_some() || args.rho.is_some() {
        let base = p.portfolio;
        let n = args.n.or(base.map(|b| b.n)).ok_or_else(|| usage("error: portfolio needs --n"))?;
        let q = args.q.or(base.map(|b| b.q)).ok_or_else(|| usage("error: portfolio needs --q"))?;
        let theta = args
            .theta
            .or(base.map(|b| b.theta))
            .ok_or_else(|| usage("error: portfolio needs --theta"))?;
        let correlation = match args.rho {
            Some(rho) => CorrelationModel::CommonShock { rho },
            None => base.map(|b| b.correlation).unwrap_or_default(),
        };
        p.portfolio = Some(PortfolioSpec { n, q, correlation, theta });
    }

    let op = p
        .op
        .clone()
        .ok_or_else(|| usage("error: fragility needs --op probe|compare|harm|measure|portfolio"))?;
    let harm = |p: &FragilityParams| -> Result<HarmFunction, CliError> {
        p.harm
            .clone()
            .ok_or_else(|| usage("error: this operation needs --harm (e.g. power:2)"))
    };
    let report = match op.as_str() {
        "probe" => {
            let h = harm(&p)?;
            let x = p.x.ok_or_else(|| usage("error: probe needs --x"))?;
            let delta = p.delta.ok_or_else(|| usage("error: probe needs --delta"))?;
            let v = fragility::convexity_probe(&h, x, delta).map_err(map_err)?;
            json!({ "second_difference": v, "convex": v > 0.0 })
        }
        "compare" => {
            let h = harm(&p)?;
            let total = p.total.ok_or_else(|| usage("error: compare needs --total"))?;
            let pieces = p.pieces.ok_or_else(|| usage("error: compare needs --pieces"))?;
            let (concentrated, split) =
                fragility::concentration_compare(&h, total, pieces).map_err(map_err)?;
            json!({ "concentrated": concentrated, "split": split })
        }
        "harm" => {
            let h = harm(&p)?;
            let spec = p.dist.ok_or_else(|| usage("error: harm needs a distribution"))?;
            let resolution = p.resolution.unwrap_or(4096);
            p.resolution = Some(resolution);
            let v = fragility::expected_harm(&h, &spec, resolution)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            json!({ "expected_harm": v })
        }
        "measure" => {
            let h = harm(&p)?;
            let spec = p.dist.ok_or_else(|| usage("error: measure needs a distribution"))?;
            let lo = p.sigma_lo.ok_or_else(|| usage("error: measure needs --sigma-lo"))?;
            let hi = p.sigma_hi.ok_or_else(|| usage("error: measure needs --sigma-hi"))?;
            let resolution = p.resolution.unwrap_or(4096);
            p.resolution = Some(resolution);
            let v = fragility::fragility_measure(&h, &spec, lo, hi, resolution)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            json!({ "fragility": v })
        }
        "portfolio" => {
            let spec = p
                .portfolio
                .ok_or_else(|| usage("error: portfolio needs --n, --q, and --theta"))?;
            spec.validate().map_err(map_err)?;
            let v = fragility::one_over_n_ruin(&spec).map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            json!({ "ruin_probability": v })
        }
        other => {
            return Err(usage(format!(
                "error: unknown fragility op `{other}`, expected probe, compare, harm, measure, or portfolio"
            )));
        }
    };
    Ok((serde_json::to_value(&p).unwrap(), Rendered::Json(report)))
}

// ----------------------------------------------------------------- cascade

#[derive(Args, Default)]
struct CascadeArgs {
    /// Poisson offspring mean (branching model).
    #[arg(long)]
    m: Option<f64>,
    /// Node count (network model).
    #[arg(long)]
    nodes: Option<usize>,
    /// Edge layout: ring or complete (lattice and random need a config file).
    #[arg(long, value_parser = ["ring", "complete"])]
    edges: Option<String>,
    /// Per-edge transmission probability (network model).
    #[arg(long)]
    transmission: Option<f64>,
    /// Append the tail-diagnostics battery to the JSON report.
    #[arg(long)]
    tail_report: bool,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CascadeParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offspring_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transmission: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    barriers: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_report: Option<bool>,
}

#[derive(Serialize)]
struct SizeBin {
    bin_lo: u64,
    bin_hi: u64,
    count: u64,
}

fn log2_size_bins(sizes: &[u64]) -> Vec<SizeBin> {
    let mut counts = std::collections::BTreeMap::new();
    for &s in sizes {
        let b = 63 - s.max(1).leading_zeros();
        *counts.entry(b).or_insert(0u64) += 1;
    }
    counts
        .into_iter()
        .map(|(b, count)| SizeBin {
            bin_lo: 1u64 << b,
            bin_hi: 1u64 << (b + 1),
            count,
        })
        .collect()
}

fn run_cascade(args: CascadeArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    let mut p: CascadeParams = parse_params(params)?;
    p.offspring_mean = args.m.or(p.offspring_mean);
    p.nodes = args.nodes.or(p.nodes);
    p.edges = args.edges.or(p.edges);
    p.transmission = args.transmission.or(p.transmission);
    if args.tail_report {
        p.tail_report = Some(true);
    }
    let tail_report = p.tail_report.unwrap_or(false);
    p.tail_report = Some(tail_report);
    let model_name = match &p.model {
        Some(m) => m.clone(),
        None if p.offspring_mean.is_some() && p.nodes.is_none() => "branching".to_string(),
        None if p.nodes.is_some() && p.offspring_mean.is_none() => "network".to_string(),
        _ => {
            return Err(usage(
                "error: cascade needs a model: --m (branching) or --nodes/--edges/--transmission (network)",
            ));
        }
    };
    p.model = Some(model_name.clone());

    let model = match model_name.as_str() {
        "branching" => {
            for (key, given) in [
                ("nodes", p.nodes.is_some()),
                ("edges", p.edges.is_some()),
                ("transmission", p.transmission.is_some()),
                ("barriers", p.barriers.is_some()),
            ] {
                if given {
                    return Err(usage(format!(
                        "error: `{key}` does not apply to a branching cascade"
                    )));
                }
            }
            let m = p
                .offspring_mean
                .ok_or_else(|| usage("error: branching needs --m (offspring mean)"))?;
            CascadeModel::Branching { offspring_mean: m }
        }
        "network" => {
            if p.offspring_mean.is_some() {
                return Err(usage("error: `offspring_mean` does not apply to a network cascade"));
            }
            let nodes = p.nodes.ok_or_else(|| usage("error: network needs --nodes"))?;
            let edges = p.edges.clone().ok_or_else(|| usage("error: network needs an edge layout"))?;
            let transmission = p
                .transmission
                .ok_or_else(|| usage("error: network needs --transmission"))?;
            let edge_model = match edges.as_str() {
                "ring" => EdgeModel::Ring,
                "complete" => EdgeModel::Complete,
                "lattice" => EdgeModel::Lattice {
                    rows: p.rows.ok_or_else(|| usage("error: lattice edges need `rows`"))?,
                    cols: p.cols.ok_or_else(|| usage("error: lattice edges need `cols`"))?,
                },
                "random" => {
                    let graph_seed = p.graph_seed.unwrap_or(g.seed);
                    p.graph_seed = Some(graph_seed);
                    EdgeModel::Random {
                        edge_prob: p
                            .edge_prob
                            .ok_or_else(|| usage("error: random edges need `edge_prob`"))?,
                        graph_seed,
                    }
                }
                other => {
                    return Err(usage(format!(
                        "error: unknown edge layout `{other}`, expected ring, lattice, complete, or random"
                    )));
                }
            };
            CascadeModel::Network {
                nodes,
                edge_model,
                transmission,
                barriers: p.barriers.clone(),
            }
        }
        other => {
            return Err(usage(format!(
                "error: unknown cascade model `{other}`, expected branching or network"
            )));
        }
    };
    let config = CascadeConfig {
        model,
        replicates: g.replicates,
        seed: g.seed,
    };
    config.validate().map_err(map_err)?;
    let sample = match &config.model {
        CascadeModel::Branching { .. } => cascade::run_branching(&config),
        CascadeModel::Network { .. } => cascade::run_network_contagion(&config),
    }
    .map_err(|e| CliError::Runtime(format!("error: {e}")))?;

    let rendered = match g.format {
        Format::Csv => Rendered::Csv {
            header: "size",
            rows: sample.sizes.iter().map(|s| s.to_string()).collect(),
        },
        Format::Json => {
            let n = sample.sizes.len() as f64;
            let mean = sample.sizes.iter().map(|&s| s as f64).sum::<f64>() / n;
            let max = sample.sizes.iter().copied().max().unwrap_or(0);
            let tail = if tail_report {
                let mut report = cascade::aggregate_tail_report(&sample)
                    .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
                for path in &mut report.max_to_sum {
                    path.path = thin_log2(&path.path);
                }
                Some(report)
            } else {
                None
            };
            let mut report = json!({
                "replicates": sample.sizes.len(),
                "mean_size": mean,
                "max_size": max,
                "capped": sample.capped,
                "size_histogram": log2_size_bins(&sample.sizes),
            });
            if let Some(t) = tail {
                report
                    .as_object_mut()
                    .unwrap()
                    .insert("tail".into(), serde_json::to_value(&t).unwrap());
            }
            Rendered::Json(report)
        }
    };
    Ok((serde_json::to_value(&p).unwrap(), rendered))
}

// ----------------------------------------------------------------- compare

#[derive(Args, Default)]
struct CompareArgs {
    /// Operation: diff, twotest, or luck.
    #[arg(long, value_parser = ["diff", "twotest", "luck"])]
    op: Option<String>,
    /// First sample, one value per line.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Second sample, one value per line.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Pairing: paired or resampled.
    #[arg(long, value_parser = ["paired", "resampled"])]
    pairing: Option<String>,
    /// Resampled pair count (defaults to --replicates).
    #[arg(long)]
    pairs: Option<u64>,
    /// True effect behind the first experiment.
    #[arg(long)]
    effect_x: Option<f64>,
    /// True effect behind the second experiment.
    #[arg(long)]
    effect_y: Option<f64>,
    /// Subjects per experimental arm.
    #[arg(long)]
    n_per_group: Option<u64>,
    /// Two-sided significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Probability that a draw is lucky.
    #[arg(long)]
    p_luck: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CompareParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effect_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effect_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_per_group: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_luck: Option<f64>,
}

fn run_compare(args: CompareArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    if g.format == Format::Csv {
        return Err(no_csv("comparison reports"));
    }
    let mut p: CompareParams = parse_params(params)?;
    p.op = args.op.or(p.op);
    p.x = args.x.as_ref().map(|v| v.display().to_string()).or(p.x);
    p.y = args.y.as_ref().map(|v| v.display().to_string()).or(p.y);
    p.pairing = args.pairing.or(p.pairing);
    p.pairs = args.pairs.or(p.pairs);
    p.effect_x = args.effect_x.or(p.effect_x);
    p.effect_y = args.effect_y.or(p.effect_y);
    p.n_per_group = args.n_per_group.or(p.n_per_group);
    p.alpha = args.alpha.or(p.alpha);
    p.p_luck = args.p_luck.or(p.p_luck);
    let op = p
        .op
        .clone()
        .ok_or_else(|| usage("error: compare needs --op diff|twotest|luck"))?;

    let report = match op.as_str() {
        "diff" => {
            let x_path = p.x.clone().ok_or_else(|| usage("error: diff needs --x FILE"))?;
            let y_path = p.y.clone().ok_or_else(|| usage("error: diff needs --y FILE"))?;
            let x = SampleSeries::from_values(read_series(Path::new(&x_path))?);
            let y = SampleSeries::from_values(read_series(Path::new(&y_path))?);
            let pairing = match p.pairing.clone().unwrap_or_else(|| "paired".to_string()).as_str() {
                "paired" => {
                    p.pairing = Some("paired".into());
                    Pairing::Paired
                }
                "resampled" => {
                    let pairs = p.pairs.unwrap_or(g.replicates);
                    p.pairs = Some(pairs);
                    p.pairing = Some("resampled".into());
                    Pairing::Resampled { pairs, seed: g.seed }
                }
                other => {
                    return Err(usage(format!(
                        "error: unknown pairing `{other}`, expected paired or resampled"
                    )));
                }
            };
            let report = inference::difference_stats(&x, &y, pairing)
                .map_err(|e| CliError::Runtime(format!("error: {e}")))?;
            serde_json::to_value(&report).unwrap()
        }
        "twotest" => {
            let effect_x = p.effect_x.unwrap_or(0.0);
            let effect_y = p.effect_y.unwrap_or(0.0);
            let n = p
                .n_per_group
                .ok_or_else(|| usage("error: twotest needs --n-per-group"))?;
            let alpha = p.alpha.unwrap_or(0.05);
            p.effect_x = Some(effect_x);
            p.effect_y = Some(effect_y);
            p.alpha = Some(alpha);
            let report =
                inference::two_test_fallacy_sim(effect_x, effect_y, n, alpha, g.replicates, g.seed)
                    .map_err(map_err)?;
            serde_json::to_value(report).unwrap()
        }
        "luck" => {
            let p_luck = p.p_luck.unwrap_or(0.5);
            p.p_luck = Some(p_luck);
            let report = inference::luck_quadrant_sim(p_luck, g.replicates, g.seed).map_err(map_err)?;
            serde_json::to_value(&report).unwrap()
        }
        other => {
            return Err(usage(format!(
                "error: unknown compare op `{other}`, expected diff, twotest, or luck"
            )));
        }
    };
    Ok((serde_json::to_value(&p).unwrap(), Rendered::Json(report)))
}

// ---------------------------------------------------------------- quadrant

#[derive(Args, Default)]
struct QuadrantArgs {
    /// Tail class: thin, subexponential, infinite-variance, infinite-mean,
    /// or fat (any heavy class).
    #[arg(long)]
    tail: Option<String>,
    /// Exposure scope: local or systemic.
    #[arg(long)]
    scope: Option<String>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QuadrantParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    tail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scope: Option<String>,
}

fn parse_tail(s: &str) -> Result<TailClass, CliError> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "thin" => Ok(TailClass::Thin),
        "subexp" | "subexponential" | "fat" => Ok(TailClass::Subexponential),
        "infinite_variance" | "inf_var" => Ok(TailClass::InfiniteVariance),
        "infinite_mean" | "inf_mean" => Ok(TailClass::InfiniteMean),
        other => Err(usage(format!(
            "error: unknown tail class `{other}`, expected thin, subexponential, infinite-variance, infinite-mean, or fat"
        ))),
    }
}

fn parse_scope(s: &str) -> Result<Scope, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "local" => Ok(Scope::Local),
        "systemic" => Ok(Scope::Systemic),
        other => Err(usage(format!(
            "error: unknown scope `{other}`, expected local or systemic"
        ))),
    }
}

fn run_quadrant(args: QuadrantArgs, params: &Option<Value>, g: &Globals) -> Result<(Value, Rendered), CliError> {
    if g.format == Format::Csv {
        return Err(no_csv("the quadrant verdict"));
    }
    let mut p: QuadrantParams = parse_params(params)?;
    p.tail = args.tail.or(p.tail);
    p.scope = args.scope.or(p.scope);
    let tail = parse_tail(&p.tail.clone().ok_or_else(|| usage("error: quadrant needs --tail"))?)?;
    let scope = parse_scope(&p.scope.clone().ok_or_else(|| usage("error: quadrant needs --scope"))?)?;
    p.tail = Some(tail.name().to_string());
    p.scope = Some(match scope {
        Scope::Local => "local".to_string(),
        Scope::Systemic => "systemic".to_string(),
    });
    let verdict = tail_diagnostics::classify_quadrant(tail, scope);
    Ok((
        serde_json::to_value(&p).unwrap(),
        Rendered::Json(serde_json::to_value(verdict).unwrap()),
    ))
}
