//! Command-line front end. Every command writes JSON or CSV carrying the
//! tool version and an echo of the parsed command.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cqstates::{AuxiliaryModel, CqBroadcastChannel, CqEnsemble};
use crate::error::{Error, Result};
use crate::example1;
use crate::quantum::{binary_convolution, binary_entropy, validate, von_neumann_entropy, CMatrix};
use crate::regions::search::{search_region, FamilySpec};
use crate::regions::{stepii_system, stepiii_system, thm1_system, InequalitySystem, RatePoint, Theorem};
use crate::sim::{self, SimConfig};
use crate::srm::{toy_spec, SumDecoderSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 12;

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_SPEC: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "cqbc", version, about = "Coset-code inner bounds for three-user classical-quantum broadcast channels")]
pub struct Cli {
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum TheoremArg {
    Thm1,
    Step2,
    Step3,
}

impl From<TheoremArg> for Theorem {
    fn from(t: TheoremArg) -> Self {
        match t {
            TheoremArg::Thm1 => Theorem::Thm1,
            TheoremArg::Step2 => Theorem::StepII,
            TheoremArg::Step3 => Theorem::StepIII,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Von Neumann entropy of a state, or a cq entropy of a model.
    Entropy(EntropyArgs),
    /// Feasibility of rate points under one model's system.
    RegionEval(RegionEvalArgs),
    /// Support points and hull over a family of models.
    RegionSearch(RegionSearchArgs),
    ExampleCommutative(CommutativeArgs),
    /// Angles in degrees.
    ExampleNoncommuting(NoncommutingArgs),
    /// Square-root measurement sum decoder; the built-in toy without --spec.
    SrmLab(SrmArgs),
    /// Block-error rates of the commutative example.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    /// JSON matrix `[[[re, im], ...], ...]`.
    #[arg(long, conflicts_with_all = ["channel", "model"])]
    pub state: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub channel: Option<PathBuf>,
    #[arg(long, requires = "channel")]
    pub model: Option<PathBuf>,
    /// Classical variables, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Receivers 1..3, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rx: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionEvalArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "thm1")]
    pub theorem: TheoremArg,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, requires_all = ["r2", "r3"], conflicts_with = "points")]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long)]
    pub r3: Option<f64>,
    /// CSV with columns R1,R2,R3.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Also write the inequality system as JSON.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionSearchArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub family: PathBuf,
    /// Also write the hull and excluded models as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Emit {
    #[arg(long)]
    pub emit_channel: Option<PathBuf>,
    #[arg(long)]
    pub emit_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CommutativeArgs {
    #[arg(long, default_value_t = 0.01)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.10)]
    pub delta: f64,
    #[command(flatten)]
    pub emit: Emit,
}

#[derive(Debug, Args, Serialize)]
pub struct NoncommutingArgs {
    #[arg(long, default_value_t = 0.01)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 40.0)]
    pub phi2: f64,
    #[arg(long, default_value_t = 45.0)]
    pub phi3: f64,
    #[command(flatten)]
    pub emit: Emit,
}

#[derive(Debug, Args, Serialize)]
pub struct SrmArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Block lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "12,16,20,24")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.10)]
    pub delta: f64,
    /// Rx1 rate in bits; `scale1 · (h(τ∗δ1) − h(δ1))` when absent.
    #[arg(long)]
    pub r1: Option<f64>,
    /// Shared-code rate in bits; `scale · (1 − h(δ))` when absent.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 0.6)]
    pub scale1: f64,
    #[arg(long, default_value_t = 0.6)]
    pub scale: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            *v = json!(round_sig(n.as_f64().expect("f64 number")));
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

fn fmt(x: f64) -> String {
    format!("{}", round_sig(x))
}

struct Ctx<'a> {
    cli: &'a Cli,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn echo(&self) -> Value {
        serde_json::to_value(self.cli).expect("arguments serialize")
    }

    fn envelope(&self, result: impl Serialize) -> Result<String> {
        let mut v = json!({ "tool": "cqbc", "version": VERSION, "spec": self.echo(), "result": result });
        round_value(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    fn csv_header(&self) -> String {
        format!("# cqbc {VERSION}\n# spec: {}\n", self.echo())
    }

    fn emit(&mut self, text: &str) -> Result<()> {
        match &self.cli.out {
            Some(p) => std::fs::write(p, text)?,
            None => self.stdout.write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn side(&self, path: &Option<PathBuf>, result: impl Serialize) -> Result<()> {
        if let Some(p) = path {
            std::fs::write(p, self.envelope(result)?)?;
        }
        Ok(())
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
}

fn build_system(theorem: Theorem, model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<InequalitySystem> {
    match theorem {
        Theorem::Thm1 => thm1_system(model, ch),
        Theorem::StepII => stepii_system(model, ch),
        Theorem::StepIII => stepiii_system(model, ch),
    }
}

fn csv_text<T: Serialize>(header: String, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(header.into_bytes());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct PointRow {
    model_id: usize,
    #[serde(rename = "R1")]
    r1: String,
    #[serde(rename = "R2")]
    r2: String,
    #[serde(rename = "R3")]
    r3: String,
    feasible: bool,
    boundary: bool,
}

fn entropy(ctx: &mut Ctx, a: &EntropyArgs) -> Result<()> {
    let value = match (&a.state, &a.channel, &a.model) {
        (Some(p), _, _) => {
            let m: CMatrix = serde_json::from_str(&read(p)?)?;
            von_neumann_entropy(&validate(m)?)
        }
        (None, Some(c), Some(m)) => {
            let ch = CqBroadcastChannel::from_json(&read(c)?)?;
            let model = AuxiliaryModel::from_json(&read(m)?)?;
            if let Some(r) = a.rx.iter().find(|&&r| !(1..=3).contains(&r)) {
                return Err(Error::Parameter(format!("receiver {r} outside 1..3")));
            }
            let names: Vec<&str> = model.vars.iter().map(|v| v.name.as_str()).collect();
            let e = CqEnsemble::build(&model, &ch, &names, vec![])?;
            let vars: Vec<&str> = a.vars.iter().map(|s| s.as_str()).collect();
            let rx: Vec<usize> = a.rx.iter().map(|r| r - 1).collect();
            e.entropy_names(&vars, &rx)?
        }
        _ => return Err(Error::Parameter("entropy needs --state or --channel with --model".into())),
    };
    let text = ctx.envelope(json!({ "entropy": value }))?;
    ctx.emit(&text)
}

fn read_points(p: &Path) -> Result<Vec<[f64; 3]>> {
    let text = read(p)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.deserialize::<std::collections::HashMap<String, f64>>() {
        let row = row.map_err(|e| Error::Parameter(format!("{}: {e}", p.display())))?;
        let get = |k: &str| row.get(k).copied().ok_or_else(|| Error::Parameter(format!("points need column {k}")));
        out.push([get("R1")?, get("R2")?, get("R3")?]);
    }
    Ok(out)
}

fn region_eval(ctx: &mut Ctx, a: &RegionEvalArgs) -> Result<()> {
    let ch = CqBroadcastChannel::from_json(&read(&a.channel)?)?;
    let model = AuxiliaryModel::from_json(&read(&a.model)?)?;
    let points = match (&a.points, a.r1, a.r2, a.r3) {
        (Some(p), ..) => read_points(p)?,
        (None, Some(r1), Some(r2), Some(r3)) => vec![[r1, r2, r3]],
        _ => return Err(Error::Parameter("give --r1 --r2 --r3 or --points".into())),
    };
    let sys = build_system(a.theorem.into(), &model, &ch)?;
    let mut rows = Vec::new();
    for r in points {
        let p = RatePoint::new(r[0], r[1], r[2], a.tau)?;
        rows.push(PointRow {
            model_id: 0,
            r1: fmt(r[0]),
            r2: fmt(r[1]),
            r3: fmt(r[2]),
            feasible: sys.admits(&p)?,
            boundary: sys.on_boundary(&p)?,
        });
    }
    ctx.side(&a.system, &sys)?;
    let text = csv_text(ctx.csv_header(), &rows)?;
    ctx.emit(&text)
}

fn region_search(ctx: &mut Ctx, a: &RegionSearchArgs) -> Result<()> {
    let ch = CqBroadcastChannel::from_json(&read(&a.channel)?)?;
    let spec = FamilySpec::from_json(&read(&a.family)?)?;
    let res = search_region(&ch, &spec, ctx.cli.seed)?;
    let rows: Vec<PointRow> = res
        .samples
        .iter()
        .map(|s| PointRow {
            model_id: s.model_id,
            r1: fmt(s.r[0]),
            r2: fmt(s.r[1]),
            r3: fmt(s.r[2]),
            feasible: s.feasible,
            boundary: s.boundary,
        })
        .collect();
    ctx.side(&a.summary, json!({ "seed": res.seed, "models": res.models, "over_budget": res.over_budget, "hull": res.hull }))?;
    let text = csv_text(ctx.csv_header(), &rows)?;
    ctx.emit(&text)
}

fn emit_inputs(e: &Emit, ch: &CqBroadcastChannel, model: &AuxiliaryModel) -> Result<()> {
    if let Some(p) = &e.emit_channel {
        std::fs::write(p, ch.to_json())?;
    }
    if let Some(p) = &e.emit_model {
        std::fs::write(p, model.to_json())?;
    }
    Ok(())
}

fn example_commutative(ctx: &mut Ctx, a: &CommutativeArgs) -> Result<()> {
    let r = example1::example_commutative(a.delta1, a.tau, a.delta)?;
    emit_inputs(&a.emit, &example1::commutative_channel(a.delta1, a.delta)?, &example1::thm1_model(a.tau)?)?;
    let text = ctx.envelope(&r)?;
    ctx.emit(&text)
}

fn example_noncommuting(ctx: &mut Ctx, a: &NoncommutingArgs) -> Result<()> {
    let (phi2, phi3) = (a.phi2.to_radians(), a.phi3.to_radians());
    let r = example1::example_noncommuting(a.delta1, a.tau, phi2, phi3)?;
    emit_inputs(&a.emit, &example1::noncommuting_channel(a.delta1, phi2, phi3)?, &example1::thm1_model(a.tau)?)?;
    let text = ctx.envelope(&r)?;
    ctx.emit(&text)
}

fn srm_lab(ctx: &mut Ctx, a: &SrmArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => SumDecoderSpec::from_json(&read(p)?)?,
        None => toy_spec()?,
    };
    let r = spec.run()?;
    let text = ctx.envelope(&r)?;
    ctx.emit(&text)
}

#[derive(Serialize)]
struct SimRow {
    n: usize,
    #[serde(rename = "R1")]
    r1: String,
    #[serde(rename = "R2")]
    r2: String,
    #[serde(rename = "R3")]
    r3: String,
    err1: String,
    err2: String,
    err3: String,
    ci_lo1: String,
    ci_hi1: String,
    ci_lo2: String,
    ci_hi2: String,
    ci_lo3: String,
    ci_hi3: String,
    seed: u64,
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<()> {
    let h = binary_entropy;
    let r1 = a.r1.unwrap_or(a.scale1 * (h(binary_convolution(a.tau, a.delta1)) - h(a.delta1)));
    let r = a.r.unwrap_or(a.scale * (1.0 - h(a.delta)));
    let mut rows = Vec::new();
    for &n in &a.n {
        let cfg = SimConfig::at_rates(n, a.delta1, a.delta, a.tau, r1, r, a.trials, ctx.cli.seed);
        let res = sim::run(&cfg)?;
        let [s1, s2, s3] = res.receivers;
        rows.push(SimRow {
            n,
            r1: fmt(res.rates[0]),
            r2: fmt(res.rates[1]),
            r3: fmt(res.rates[2]),
            err1: fmt(s1.rate),
            err2: fmt(s2.rate),
            err3: fmt(s3.rate),
            ci_lo1: fmt(s1.ci_lo),
            ci_hi1: fmt(s1.ci_hi),
            ci_lo2: fmt(s2.ci_lo),
            ci_hi2: fmt(s2.ci_hi),
            ci_lo3: fmt(s3.ci_lo),
            ci_hi3: fmt(s3.ci_hi),
            seed: cfg.seed,
        });
    }
    let text = csv_text(ctx.csv_header(), &rows)?;
    ctx.emit(&text)
}

/// Errors in the request itself, as opposed to failures while computing.
pub fn is_spec_error(e: &Error) -> bool {
    !matches!(
        e,
        Error::Numerical(_) | Error::Unbounded | Error::Infeasible(_) | Error::Povm(_) | Error::InvalidState(_) | Error::NotHermitian(_)
    )
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let mut ctx = Ctx { cli: &cli, stdout };
    let res = match &cli.command {
        Command::Entropy(a) => entropy(&mut ctx, a),
        Command::RegionEval(a) => region_eval(&mut ctx, a),
        Command::RegionSearch(a) => region_search(&mut ctx, a),
        Command::ExampleCommutative(a) => example_commutative(&mut ctx, a),
        Command::ExampleNoncommuting(a) => example_noncommuting(&mut ctx, a),
        Command::SrmLab(a) => srm_lab(&mut ctx, a),
        Command::Simulate(a) => simulate(&mut ctx, a),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if is_spec_error(&e) {
                EXIT_SPEC
            } else {
                EXIT_COMPUTATION
            }
        }
    }
}
