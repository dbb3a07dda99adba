//! Command-line front end. Every command writes its output plus a
//! [`RunManifest`] describing the run.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::curve::{PolyCurve, segment_distance};
use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, FlowTrace, Metric, StopReason};
use crate::io::{self, fmt_f64, RunManifest};
use crate::minkowski::{self, MinkVector};
use crate::moebius::{self, ExtPoint, MoebiusMap, SphereInversion};
use crate::quadrature::SmoothArcs;
use crate::{conformal, energy, symplectic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ABORT: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Json(_) => EXIT_PARSE,
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::FlowAbort { .. } => EXIT_ABORT,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "mobius-knot", version, about = "Möbius-invariant knot energies and sphere geometry")]
pub struct Cli {
    /// Worker threads for pair sums.
    #[arg(long, env = "KNOT_THREADS", global = true)]
    pub threads: Option<usize>,
    /// Deterministic mode: one worker thread.
    #[arg(long, global = true)]
    pub det: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Output file; standard output if omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json`, or
    /// `<command>.manifest.json` when writing to standard output.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaArg {
    Renorm,
    Cosine,
    Sphere,
    Open,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an energy.
    Energy {
        /// Knot file or `gen:name:key=value,...`.
        input: String,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = FormulaArg::Renorm)]
        formula: FormulaArg,
        /// Resample to this many vertices first.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Compare the energy before and after a chain of sphere inversions.
    Invariance {
        input: String,
        /// Inversion `cx,cy,cz,r`; repeat to compose, applied in order.
        #[arg(long = "invert")]
        inversions: Vec<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Cross-ratio densities on a grid of vertex pairs, as CSV.
    CrossratioGrid {
        input: String,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Sphere-space (Plücker) utilities.
    Spheres {
        #[command(subcommand)]
        op: SpheresOp,
    },
    /// Compare the pulled-back canonical form with Re of the cross ratio, as CSV.
    SymplecticCheck {
        input: String,
        #[arg(long, default_value_t = 8)]
        stride: usize,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the descent flow, writing a run directory.
    Relax(RelaxArgs),
    /// Write a built-in curve or link to disk.
    Generate {
        /// `gen:name:key=value,...`
        spec: String,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SpheresOp {
    /// Wedge of Minkowski vectors, as a blade JSON.
    Wedge {
        /// Vector as comma-separated coordinates; repeat for each factor.
        #[arg(long = "vector")]
        vectors: Vec<String>,
        /// CSV file whose rows are the vectors.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Pseudonorm of a blade.
    Pnorm {
        blade: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Plücker relation residual of a blade.
    PluckerCheck {
        blade: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Minor matrix of a square matrix acting on (q+2)-blades, as CSV.
    Psi {
        /// CSV file holding an (n+2)×(n+2) matrix.
        matrix: PathBuf,
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Point-pair sphere of two curve vertices lifted to the 3-sphere.
    Smap {
        input: String,
        #[arg(long)]
        i: usize,
        #[arg(long)]
        j: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Signed-area integral between the components of a link.
    Area {
        /// Link manifest or `gen:hopf`, `gen:torus-link`.
        link: String,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct RelaxArgs {
    pub input: String,
    /// Run directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// JSON flow config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub step_init: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub resample_every: Option<usize>,
    #[arg(long)]
    pub min_self_dist_factor: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Checkpoint interval in steps.
    #[arg(long, default_value_t = 100)]
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MetricArg {
    L2,
    Sobolev,
}

struct Ctx {
    threads: usize,
    det: bool,
    started: Instant,
}

impl Ctx {
    fn manifest(&self, command: &str, inputs: Vec<String>, parameters: serde_json::Value, outputs: Vec<String>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            inputs,
            parameters,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs,
            threads: self.threads,
            deterministic: self.det,
        }
    }

    /// Writes `body` to the requested place and the manifest next to it.
    fn emit(&self, command: &str, inputs: Vec<String>, parameters: serde_json::Value, output: &Output, body: &str) -> Result<()> {
        let outputs = match &output.out {
            Some(p) => {
                std::fs::write(p, body)?;
                vec![p.display().to_string()]
            }
            None => {
                print!("{body}");
                vec!["<stdout>".to_string()]
            }
        };
        let manifest_path = match (&output.manifest, &output.out) {
            (Some(m), _) => m.clone(),
            (None, Some(out)) => {
                let mut s = out.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
            (None, None) => PathBuf::from(format!("{command}.manifest.json")),
        };
        self.manifest(command, inputs, parameters, outputs).write(&manifest_path)
    }
}

fn load(input: &str, n: Option<usize>) -> Result<PolyCurve> {
    let c = io::load_curve(input)?;
    match n {
        Some(n) => c.resample_uniform(n),
        None => Ok(c),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn parse_vector(s: &str) -> Result<MinkVector> {
    let coords = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("vector '{s}': {e}")))?;
    Ok(MinkVector::new(coords))
}

fn read_blade(path: &Path) -> Result<minkowski::Blade> {
    io::blade_from_json(&std::fs::read_to_string(path)?, &path.display().to_string())
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    io::matrix_from_csv(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Distance from a point to a closed or open polyline.
fn distance_to_curve(c: &PolyCurve, p: &nalgebra::Vector3<f64>) -> f64 {
    let n = c.len();
    (0..c.segment_count())
        .map(|k| segment_distance(c.vertex(k), c.vertex((k + 1) % n), *p, *p))
        .fold(f64::INFINITY, f64::min)
}

fn cmd_energy(ctx: &Ctx, input: &str, alpha: f64, formula: FormulaArg, n: Option<usize>, output: &Output) -> Result<()> {
    let c = load(input, n)?;
    let report = match formula {
        FormulaArg::Renorm => energy::energy_alpha(&c, alpha)?,
        FormulaArg::Cosine | FormulaArg::Open if alpha != 2.0 => {
            return Err(Error::InvalidParameter(format!("formula {formula:?} is only defined for alpha = 2")));
        }
        FormulaArg::Cosine => energy::energy_cosine(&c)?,
        FormulaArg::Open => energy::energy_open(&c)?,
        FormulaArg::Sphere => energy::energy_sphere(&moebius::lift_curve_to_sphere(&c)?, alpha)?,
    };
    let params = json!({"alpha": alpha, "formula": formula, "n": n});
    ctx.emit("energy", vec![input.to_string()], params, output, &to_json(&report)?)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct InvarianceReport {
    before: f64,
    after: f64,
    /// |after − before| / max(|before|, 1).
    rel_diff: f64,
    tolerance: f64,
    pass: bool,
    inversions: Vec<[f64; 4]>,
}

fn cmd_invariance(ctx: &Ctx, input: &str, specs: &[String], n: Option<usize>, alpha: f64, tol: f64, output: &Output) -> Result<()> {
    let c = load(input, n)?;
    let inversions = specs.iter().map(|s| s.parse()).collect::<Result<Vec<SphereInversion>>>()?;
    let mut image = c.clone();
    for inv in &inversions {
        // a centre on the curve sends part of it to infinity
        if distance_to_curve(&image, &inv.center) <= 1e-9 * image.total_length() {
            return Err(Error::PointAtInfinity);
        }
        image = moebius::apply_map(&MoebiusMap::new(vec![*inv]), &image)?;
    }
    let before = energy::energy_alpha(&c, alpha)?.value;
    let after = energy::energy_alpha(&image, alpha)?.value;
    let rel_diff = (after - before).abs() / before.abs().max(1.0);
    let report = InvarianceReport {
        before,
        after,
        rel_diff,
        tolerance: tol,
        pass: rel_diff <= tol,
        inversions: inversions.iter().map(|i| [i.center.x, i.center.y, i.center.z, i.radius]).collect(),
    };
    let params = json!({"inversions": specs, "n": n, "alpha": alpha, "tol": tol});
    ctx.emit("invariance", vec![input.to_string()], params, output, &to_json(&report)?)
}

fn cmd_crossratio(ctx: &Ctx, input: &str, stride: usize, n: Option<usize>, output: &Output) -> Result<()> {
    let c = load(input, n)?;
    let grid = conformal::cross_ratio_grid(&c, stride)?;
    let arcs = SmoothArcs::new(&c);
    let mut s = String::from("i,j,arclen_i,arclen_j,abs,theta,re,im\n");
    for g in &grid {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            g.i,
            g.j,
            fmt_f64(arcs.positions[g.i]),
            fmt_f64(arcs.positions[g.j]),
            fmt_f64(g.abs_density),
            fmt_f64(g.theta),
            fmt_f64(g.re_density),
            fmt_f64(g.im_density)
        );
    }
    // coarse grids stand in for stride² fine cells each
    let sum = conformal::energy_from_grid(&c, &grid) * (stride * stride) as f64;
    let _ = writeln!(s, "# energy,{}", fmt_f64(sum));
    let params = json!({"stride": stride, "n": n});
    ctx.emit("crossratio-grid", vec![input.to_string()], params, output, &s)
}

fn cmd_symplectic(ctx: &Ctx, input: &str, stride: usize, n: Option<usize>, output: &Output) -> Result<()> {
    let c = load(input, n)?;
    let rows = symplectic::symplectic_check(&c, stride)?;
    let mut s = String::from("i,j,pullback_density,re_density,rel_err\n");
    let mut worst: f64 = 0.0;
    for r in &rows {
        worst = worst.max(r.rel_err);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.i,
            r.j,
            fmt_f64(r.pullback_density),
            fmt_f64(r.re_density),
            fmt_f64(r.rel_err)
        );
    }
    let _ = writeln!(s, "# max_rel_err,{}", fmt_f64(worst));
    let params = json!({"stride": stride, "n": n});
    ctx.emit("symplectic-check", vec![input.to_string()], params, output, &s)
}

fn cmd_spheres(ctx: &Ctx, op: &SpheresOp) -> Result<()> {
    match op {
        SpheresOp::Wedge { vectors, input, output } => {
            let mut vs = vectors.iter().map(|s| parse_vector(s)).collect::<Result<Vec<_>>>()?;
            let mut inputs = Vec::new();
            if let Some(path) = input {
                let m = read_matrix(path)?;
                vs.extend(m.row_iter().map(|r| MinkVector::new(r.iter().copied().collect())));
                inputs.push(path.display().to_string());
            }
            let blade = minkowski::wedge(&vs)?;
            let params = json!({"vectors": vectors});
            ctx.emit("spheres-wedge", inputs, params, output, &(io::blade_to_json(&blade)? + "\n"))
        }
        SpheresOp::Pnorm { blade, output } => {
            let b = read_blade(blade)?;
            let body = to_json(&json!({"pnorm": minkowski::blade_inner(&b, &b)?}))?;
            ctx.emit("spheres-pnorm", vec![blade.display().to_string()], json!({}), output, &body)
        }
        SpheresOp::PluckerCheck { blade, tol, output } => {
            let b = read_blade(blade)?;
            let residual = minkowski::plucker_residual(&b);
            let body = to_json(&json!({"residual": residual, "tolerance": tol, "decomposable": residual <= *tol}))?;
            ctx.emit("spheres-plucker-check", vec![blade.display().to_string()], json!({"tol": tol}), output, &body)
        }
        SpheresOp::Psi { matrix, q, output } => {
            let a = read_matrix(matrix)?;
            if a.nrows() < 2 {
                return Err(Error::InvalidParameter("matrix must be at least 2×2".into()));
            }
            let psi = minkowski::psi_matrix(&a, *q, a.nrows() - 2)?;
            ctx.emit("spheres-psi", vec![matrix.display().to_string()], json!({"q": q}), output, &io::matrix_to_csv(&psi))
        }
        SpheresOp::Smap { input, i, j, output } => {
            let c = io::load_curve(input)?;
            for &k in [i, j] {
                if k >= c.len() {
                    return Err(Error::IndexOutOfRange { index: k, len: c.len() });
                }
            }
            let lift = |k: usize| moebius::lift_to_sphere(ExtPoint::Finite(c.vertex(k)));
            let s = minkowski::s_map(&lift(*i), &lift(*j))?;
            let body = io::blade_to_json(&s.blade)? + "\n";
            ctx.emit("spheres-smap", vec![input.clone()], json!({"i": i, "j": j}), output, &body)
        }
        SpheresOp::Area { link, output } => {
            let l = io::load_link(link)?;
            let comps = l.components();
            let mut pairs = Vec::new();
            let (mut signed, mut absolute) = (0.0, 0.0);
            for a in 0..comps.len() {
                for b in a + 1..comps.len() {
                    let (s, abs) = minkowski::signed_area_integral(&comps[a], &comps[b])?;
                    signed += s;
                    absolute += abs;
                    pairs.push(json!({"a": a, "b": b, "signed": s, "absolute": abs}));
                }
            }
            let body = to_json(&json!({
                "signed": signed,
                "absolute": absolute,
                "ratio": signed.abs() / absolute,
                "pairs": pairs,
            }))?;
            ctx.emit("spheres-area", vec![link.clone()], json!({}), output, &body)
        }
    }
}

fn flow_config(args: &RelaxArgs) -> Result<FlowConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                line: e.line(),
                msg: e.to_string(),
            })?
        }
        None => FlowConfig::default(),
    };
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.step_init {
        cfg.step_init = v;
    }
    if let Some(v) = args.max_steps {
        cfg.max_steps = v;
    }
    if let Some(v) = args.grad_tol {
        cfg.grad_tol = v;
    }
    if let Some(v) = args.resample_every {
        cfg.resample_every = v;
    }
    if let Some(v) = args.min_self_dist_factor {
        cfg.min_self_dist_factor = v;
    }
    if let Some(m) = args.metric {
        cfg.metric = match m {
            MetricArg::L2 => Metric::L2,
            MetricArg::Sobolev => Metric::Sobolev,
        };
    }
    Ok(cfg)
}

fn trace_csv(trace: &FlowTrace) -> String {
    let mut s = String::from("step,energy,stepsize,gradnorm,minselfdist,resampled\n");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.energy),
            fmt_f64(r.step_size),
            fmt_f64(r.grad_norm),
            fmt_f64(r.min_self_dist),
            u8::from(r.resampled)
        );
    }
    s
}

fn cmd_relax(ctx: &Ctx, args: &RelaxArgs) -> Result<()> {
    let cfg = flow_config(args)?;
    if args.checkpoint_every == 0 {
        return Err(Error::InvalidParameter("checkpoint interval must be positive".into()));
    }
    let start = load(&args.input, args.n)?;
    let dir = &args.out;
    let checkpoints = dir.join("checkpoints");
    std::fs::create_dir_all(&checkpoints)?;
    std::fs::write(dir.join("config.json"), to_json(&cfg)?)?;
    let mut outputs = vec![dir.join("config.json")];

    let trace = if cfg.max_steps == 0 {
        // nothing to run: report the starting state
        flow::initial_state(&start, &FlowConfig { max_steps: 1, ..cfg.clone() })?
    } else {
        let mut failed = None;
        let trace = flow::relax_with(&start, &cfg, |rec, curve| {
            if rec.step % args.checkpoint_every == 0 {
                let path = checkpoints.join(format!("step_{:06}.knot", rec.step));
                if let Err(e) = io::write_knot(&path, curve) {
                    failed = Some(e);
                    return false;
                }
                outputs.push(path);
            }
            true
        })?;
        if let Some(e) = failed {
            return Err(e);
        }
        trace
    };

    std::fs::write(dir.join("trace.csv"), trace_csv(&trace))?;
    io::write_knot(&dir.join("final.knot"), &trace.curve)?;
    let summary = json!({
        "stop": trace.stop,
        "steps": trace.records.last().map_or(0, |r| r.step),
        "initialEnergy": trace.records[0].energy,
        "finalEnergy": trace.final_energy(),
        "threshold": trace.threshold,
    });
    std::fs::write(dir.join("summary.json"), to_json(&summary)?)?;
    outputs.extend(["trace.csv", "final.knot", "summary.json"].map(|f| dir.join(f)));
    let manifest = ctx.manifest(
        "relax",
        vec![args.input.clone()],
        serde_json::to_value(args)?,
        outputs.iter().map(|p| p.display().to_string()).collect(),
    );
    manifest.write(&dir.join("manifest.json"))?;
    if trace.stop == StopReason::Aborted {
        return Err(trace.abort_error().expect("aborted trace"));
    }
    Ok(())
}

fn cmd_generate(ctx: &Ctx, spec: &str, out: &Path) -> Result<()> {
    let Some(g) = io::GenSpec::parse(spec) else {
        return Err(Error::InvalidParameter(format!("'{spec}' is not a gen: spec")));
    };
    let g = g?;
    let written = if g.is_link() {
        io::write_link(out, &g.link()?)?
    } else {
        io::write_knot(out, &g.curve()?)?;
        vec![out.to_path_buf()]
    };
    let mut m = out.to_path_buf().into_os_string();
    m.push(".manifest.json");
    ctx.manifest(
        "generate",
        vec![spec.to_string()],
        json!({}),
        written.iter().map(|p| p.display().to_string()).collect(),
    )
    .write(Path::new(&m))
}

fn execute(ctx: &Ctx, cmd: &Command) -> Result<()> {
    match cmd {
        Command::Energy { input, alpha, formula, n, output } => cmd_energy(ctx, input, *alpha, *formula, *n, output),
        Command::Invariance { input, inversions, n, alpha, tol, output } => {
            cmd_invariance(ctx, input, inversions, *n, *alpha, *tol, output)
        }
        Command::CrossratioGrid { input, stride, n, output } => cmd_crossratio(ctx, input, *stride, *n, output),
        Command::Spheres { op } => cmd_spheres(ctx, op),
        Command::SymplecticCheck { input, stride, n, output } => cmd_symplectic(ctx, input, *stride, *n, output),
        Command::Relax(args) => cmd_relax(ctx, args),
        Command::Generate { spec, out } => cmd_generate(ctx, spec, out),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let threads = if cli.det {
        1
    } else {
        cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let ctx = Ctx {
        threads,
        det: cli.det,
        started: Instant::now(),
    };
    match pool.install(|| execute(&ctx, &cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
