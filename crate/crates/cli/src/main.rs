mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use aniso_lp_core::frame::{
    self, build_frame, frame_derivatives, random_smooth_path, ConstantFrame, FrameProvider, FrameSample,
    RotatingFrame, SampledFrame, UnitPath, DERIVATIVE_RATIO_BOUND, FRAME_TOL,
};
use aniso_lp_core::gronwall::{self, GronwallProblem, SampledFn, SigmaSpec};
use aniso_lp_core::ineq::{self, IneqKind};
use aniso_lp_core::lp::{self, NormRow, NormSpec};
use aniso_lp_core::monitor::{self, CriterionLog};
use aniso_lp_core::ns::{self, FlowState, InitKind};
use aniso_lp_core::{make_grid, snapshot, Rank};

use config::{usage, Settings, UsageError};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ERROR: u8 = 3;

/// Residual ceiling applied by `monitor`.
const MONITOR_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "aniso-lp", version, about = "Anisotropic Littlewood-Paley toolkit")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with top-level settings and one parameter object per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an orthonormal frame from a unit path, or run the random-path suite.
    Frame(FrameArgs),
    /// Anisotropic Sobolev or Besov norms of a snapshot or a random field.
    Norms(NormsArgs),
    /// Randomized checks of the registered inequalities.
    BenchInequalities(BenchArgs),
    /// Segment-wise Gronwall certification.
    Gronwall {
        #[command(subcommand)]
        action: GronwallAction,
    },
    /// Pseudo-spectral Navier-Stokes run with snapshots.
    Simulate(SimulateArgs),
    /// Criterion integral, identity residuals and the a priori constant along a run.
    Monitor(MonitorArgs),
}

#[derive(Args, Debug)]
struct FrameArgs {
    /// Unit-path CSV (t,b1,b2,b3,jump); a random path is drawn when absent.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Number of random paths to check instead of writing one frame.
    #[arg(long)]
    suite: Option<usize>,
    /// Samples per smooth piece of a random path.
    #[arg(long)]
    samples: Option<usize>,
    /// Jumps in a random path.
    #[arg(long)]
    jumps: Option<usize>,
}

#[derive(Args, Debug)]
struct NormsArgs {
    /// ALP1 snapshot; a random scalar field is drawn when absent.
    #[arg(long)]
    field: Option<PathBuf>,
    /// sobolev or besov.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    s1: Option<f64>,
    #[arg(long)]
    s2: Option<f64>,
    /// 1, 2 or inf.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q1: Option<String>,
    #[arg(long)]
    q2: Option<String>,
    /// Direction `b1,b2,b3` (normalized).
    #[arg(long)]
    beta: Option<String>,
    /// Largest |k_i| of the random field.
    #[arg(long)]
    kmax: Option<i64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// bernstein, duality, interp, product, embed or all (the reference sweep).
    #[arg(long)]
    ineq: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Parameter overrides `k=v,...`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Subcommand, Debug)]
enum GronwallAction {
    /// Certify the iteration bound for one problem.
    Certify(CertifyArgs),
    /// Certify a batch of random problems.
    Suite(SuiteArgs),
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// `const:c` or a CSV with columns t,value.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Samples of a constant φ.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// abc, taylor-green, random-seeded or file:PATH.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Kinematic viscosity.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args, Debug)]
struct MonitorArgs {
    /// Run directory written by `simulate`.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Frame CSV, `const:b1,b2,b3` or `rotating:omega`.
    #[arg(long)]
    frame: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
}

/// Outcome of a subcommand that ran to completion.
enum Verdict {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() || is_core_usage(&e) {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_ERROR)
            }
        }
    }
}

fn is_core_usage(e: &anyhow::Error) -> bool {
    use aniso_lp_core::Error as E;
    matches!(
        e.downcast_ref::<E>(),
        Some(E::Config(_) | E::Domain(_) | E::Unsupported(_) | E::InvalidGrid(_))
    )
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Frame(_) => "frame",
        Command::Norms(_) => "norms",
        Command::BenchInequalities(_) => "bench-inequalities",
        Command::Gronwall { .. } => "gronwall",
        Command::Simulate(_) => "simulate",
        Command::Monitor(_) => "monitor",
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let mut s = Settings::load(cli.config.as_deref(), subcommand_name(&cli.command))?;
    let threads = s.global("threads", cli.threads)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    s.run.threads = threads;
    s.run.seed = s.global("seed", cli.seed)?.unwrap_or(0);
    s.run.grid = s.global("grid", cli.grid)?;
    let out = s.global::<PathBuf>("out", cli.out)?;
    match cli.command {
        Command::Frame(a) => cmd_frame(&mut s, a, out),
        Command::Norms(a) => cmd_norms(&mut s, a, out),
        Command::BenchInequalities(a) => cmd_bench(&mut s, a, out),
        Command::Gronwall { action } => match action {
            GronwallAction::Certify(a) => cmd_certify(&mut s, a, out),
            GronwallAction::Suite(a) => cmd_gronwall_suite(&mut s, a, out),
        },
        Command::Simulate(a) => cmd_simulate(&mut s, a, out),
        Command::Monitor(a) => cmd_monitor(&mut s, a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn parse_extended(name: &str, v: &str) -> Result<f64> {
    match v.trim() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| usage(format!("`--{name}`: cannot parse `{v}`"))),
    }
}

fn parse_vec3(name: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("`--{name}`: expected b1,b2,b3, got `{v}`")))?;
    let [a, b, c] = parts[..] else {
        return Err(usage(format!("`--{name}`: expected three components, got `{v}`")));
    };
    let n = (a * a + b * b + c * c).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(usage(format!("`--{name}`: direction must be nonzero")));
    }
    Ok([a / n, b / n, c / n])
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// frame

#[derive(Serialize)]
struct FrameSuiteRow {
    path: usize,
    samples: usize,
    segments: usize,
    max_defect: f64,
    max_ratio: f64,
    pass: bool,
}

fn cmd_frame(s: &mut Settings, a: FrameArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let path_in = s.opt_param::<PathBuf>("path", a.path)?;
    let suite = s.opt_param("suite", a.suite)?;
    let samples = s.param("samples", a.samples, 400usize)?;
    let jumps = s.param("jumps", a.jumps, 2usize)?;
    s.tolerance("frame", FRAME_TOL);
    s.tolerance("derivative_ratio", DERIVATIVE_RATIO_BOUND);
    s.finish()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.run.seed);

    if let Some(count) = suite {
        let out = out.unwrap_or_else(|| "frame_suite.csv".into());
        let mut rows = Vec::with_capacity(count);
        for i in 0..count {
            let p = random_smooth_path(&mut rng, samples, jumps);
            let fr = build_frame(&p)?;
            let d = frame_derivatives(&fr)?;
            rows.push(FrameSuiteRow {
                path: i,
                samples: p.len(),
                segments: fr.segments().len(),
                max_defect: fr.max_defect(),
                max_ratio: d.max_ratio(1e-12),
                pass: fr.max_defect() <= FRAME_TOL && d.ratio_excess(DERIVATIVE_RATIO_BOUND) <= 1e-8,
            });
        }
        write_rows(&out, &rows)?;
        s.output("suite", &out);
        s.echo(&out, false)?;
        let failed = rows.iter().filter(|r| !r.pass).count();
        let worst = rows.iter().map(|r| r.max_defect).fold(0.0, f64::max);
        let ratio = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
        println!("paths={count} failed={failed} max_defect={worst:.3e} max_ratio={ratio:.4}");
        return Ok(if failed == 0 { Verdict::Pass } else { Verdict::Fail });
    }

    let path = match &path_in {
        Some(p) => {
            s.input("path", p);
            UnitPath::read_csv(open(p)?)?
        }
        None => random_smooth_path(&mut rng, samples, jumps),
    };
    let fr = build_frame(&path)?;
    let d = frame_derivatives(&fr)?;
    let out = out.unwrap_or_else(|| "frame.csv".into());
    fr.write_csv(create(&out)?)?;
    s.output("frame", &out);
    if path_in.is_none() {
        let stem = out.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
        let path_out = out.with_file_name(format!("{stem}.path.csv"));
        path.write_csv(create(&path_out)?)?;
        s.output("path", &path_out);
    }
    s.echo(&out, false)?;
    let (dmin, dmax) = fr.determinant_range();
    println!(
        "samples={} segments={} max_defect={:.3e} det=[{dmin:.15}, {dmax:.15}] max_ratio={:.4}",
        fr.len(),
        fr.segments().len(),
        fr.max_defect(),
        d.max_ratio(1e-12)
    );
    let ok = fr.max_defect() <= FRAME_TOL && d.ratio_excess(DERIVATIVE_RATIO_BOUND) <= 1e-8;
    Ok(if ok { Verdict::Pass } else { Verdict::Fail })
}

// ---------------------------------------------------------------------------
// norms

fn cmd_norms(s: &mut Settings, a: NormsArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let field = s.opt_param::<PathBuf>("field", a.field)?;
    let kind = s.param("kind", a.kind, "sobolev".to_string())?;
    let s1 = s.param("s1", a.s1, 0.0)?;
    let s2 = s.param("s2", a.s2, 0.0)?;
    let p = parse_extended("p", &s.param("p", a.p, "2".into())?)?;
    let q1 = parse_extended("q1", &s.param("q1", a.q1, "2".into())?)?;
    let q2 = parse_extended("q2", &s.param("q2", a.q2, "2".into())?)?;
    let beta = parse_vec3("beta", &s.param("beta", a.beta, "0,0,1".into())?)?;
    let kmax = s.param("kmax", a.kmax, 4i64)?;
    s.finish()?;
    let spec = match kind.as_str() {
        "sobolev" => NormSpec::sobolev(s1, s2),
        "besov" => NormSpec::besov(s1, s2, p, q1, q2),
        other => return Err(usage(format!("`--kind` must be sobolev or besov, got `{other}`"))),
    };
    spec.validate()?;
    let frame = FrameSample::for_beta(beta);

    let (id, f) = match &field {
        Some(path) => {
            s.input("field", path);
            let grid = s.run.grid.map(make_grid).transpose()?;
            (path.display().to_string(), snapshot::load(path, grid.as_ref())?)
        }
        None => {
            let grid = make_grid(s.run.grid.unwrap_or(32))?;
            s.run.grid = Some(grid.n());
            let f = ineq::FieldSampler::new(s.run.seed).with_cube(kmax).sample(&grid, beta, 0)?;
            (format!("random:{}", s.run.seed), f)
        }
    };
    let parts: Vec<(String, _)> = match f.rank() {
        Rank::Scalar => vec![(id, f)],
        Rank::Vector3 => (0..3).map(|c| (format!("{id}#{c}"), f.component_field(c))).collect(),
    };
    let mut rows = Vec::new();
    for (name, g) in &parts {
        let mut g = g.clone();
        g.remove_mean();
        let report = lp::aniso_norm(&g, &spec, &frame)?;
        println!("{name}: value={:.12e} excluded_mass={:.3e}", report.value, report.excluded_mass);
        rows.push(NormRow::new(name.clone(), &spec, &report));
    }
    let out = out.unwrap_or_else(|| "norms.csv".into());
    lp::write_norm_csv(create(&out)?, &rows)?;
    s.output("norms", &out);
    s.echo(&out, false)?;
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------------------
// bench-inequalities

fn cmd_bench(s: &mut Settings, a: BenchArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let which = s.param("ineq", a.ineq, "all".to_string())?;
    let trials = s.param("trials", a.trials, 200usize)?;
    let params = s.param("params", a.params, String::new())?;
    s.finish()?;
    let n = s.run.grid.unwrap_or(32);
    s.run.grid = Some(n);
    let grid = make_grid(n)?;
    let overrides = if params.trim().is_empty() {
        ineq::Params::new()
    } else {
        ineq::parse_params(&params)?
    };
    let points: Vec<(IneqKind, ineq::Params)> = if which == "all" {
        if !overrides.is_empty() {
            return Err(usage("`--params` needs a single `--ineq`"));
        }
        ineq::reference_points()
    } else {
        vec![(which.parse::<IneqKind>()?, overrides)]
    };
    let mut reports = Vec::with_capacity(points.len());
    for (kind, p) in &points {
        let r = ineq::run_named(*kind, p, &grid, trials, s.run.seed)?;
        println!(
            "{:<10} {:<40} max_ratio={:.6e} ceiling={:.6e} {}",
            r.inequality_id,
            format!("{:?}", r.params),
            r.max_ratio,
            r.ceiling,
            if r.pass { "PASS" } else { "FAIL" }
        );
        reports.push(r);
    }
    let out = out.unwrap_or_else(|| "inequalities.csv".into());
    ineq::write_reports_csv(create(&out)?, &reports)?;
    s.output("report", &out);
    s.echo(&out, false)?;
    Ok(if reports.iter().all(|r| r.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    })
}

// ---------------------------------------------------------------------------
// gronwall

fn cmd_certify(s: &mut Settings, a: CertifyArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let f0 = s.require("f0", a.f0)?;
    let m = s.require("M", a.m)?;
    let delta = s.require("delta", a.delta)?;
    let t_end = s.require("T", a.t_end)?;
    let phi_spec = s.require::<String>("phi", a.phi)?;
    let samples = s.param("samples", a.samples, 1025usize)?;
    s.tolerance("closed_form", gronwall::CLOSED_FORM_TOL);
    s.finish()?;
    if !phi_spec.starts_with("const:") {
        s.input("phi", Path::new(&phi_spec));
    }
    let phi = SampledFn::from_spec(&phi_spec, t_end, samples)?;
    if (phi.end() - t_end).abs() > 1e-12 * t_end.abs().max(1.0) {
        return Err(usage(format!("φ covers [{}, {}] but --T is {t_end}", phi.start(), phi.end())));
    }
    let problem = GronwallProblem::new(f0, m, SigmaSpec::Delta(delta), phi)?;
    let cert = gronwall::certify_bound(&problem)?;
    let out = out.unwrap_or_else(|| "certificate.csv".into());
    cert.write_csv(create(&out)?)?;
    s.output("certificate", &out);
    s.echo(&out, false)?;
    println!("{}", cert.summary_line());
    let ok = cert.min_margin() >= 0.0 && cert.log2_a.is_none_or(|a| cert.max_log2_envelope <= a);
    Ok(if ok { Verdict::Pass } else { Verdict::Fail })
}

#[derive(Serialize)]
struct SuiteSummary {
    seed: u64,
    problems: usize,
    passed: usize,
    min_margin: f64,
    max_segments: usize,
    max_closed_form_w_err: f64,
}

fn cmd_gronwall_suite(s: &mut Settings, a: SuiteArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let count = s.param("count", a.count, 1000usize)?;
    s.finish()?;
    let r = gronwall::random_certification_suite(s.run.seed, count);
    for f in &r.failures {
        eprintln!("failure: problem {} {}", f.0, f.1);
    }
    let out = out.unwrap_or_else(|| "gronwall_suite.csv".into());
    write_rows(
        &out,
        &[SuiteSummary {
            seed: s.run.seed,
            problems: r.problems,
            passed: r.passed,
            min_margin: r.min_margin,
            max_segments: r.max_segments,
            max_closed_form_w_err: r.max_closed_form_w_err,
        }],
    )?;
    s.output("summary", &out);
    s.echo(&out, false)?;
    println!(
        "problems={} passed={} min_margin={:.3e} max_segments={}",
        r.problems, r.passed, r.min_margin, r.max_segments
    );
    Ok(if r.passed == r.problems {
        Verdict::Pass
    } else {
        Verdict::Fail
    })
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(s: &mut Settings, a: SimulateArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let tmax = s.param("tmax", a.tmax, 0.1)?;
    let dt_flag = s.opt_param("dt", a.dt)?;
    let init: InitKind = s.param("init", a.init, "abc".to_string())?.parse()?;
    let every = s.param("snapshot-every", a.snapshot_every, 10usize)?;
    let nu = s.param("nu", a.nu, 1.0)?;
    s.finish()?;
    let n = s.run.grid.unwrap_or(32);
    s.run.grid = Some(n);
    let grid = make_grid(n)?;
    if let InitKind::File(p) = &init {
        s.input("init", p);
    }
    let state = FlowState::new(ns::initial_field(&grid, &init, s.run.seed)?, nu)?;
    let dt = match dt_flag {
        Some(dt) => dt,
        None => {
            let dt = state.default_dt().unwrap_or(tmax).min(tmax);
            s.run.params.insert("dt".into(), serde_json::to_value(dt)?);
            dt
        }
    };
    if !(dt > 0.0 && tmax >= 0.0) {
        return Err(usage("`--dt` must be positive and `--tmax` nonnegative"));
    }
    let steps = (tmax / dt).round() as usize;
    if ((steps as f64) * dt - tmax).abs() > 1e-9 * tmax.max(1.0) {
        log::warn!("tmax {tmax} is not a multiple of dt {dt}; running {steps} steps to t = {}", steps as f64 * dt);
    }
    let dir = out.unwrap_or_else(|| "run".into());
    let e0 = state.energy();
    let last = ns::run_to_dir(state, dt, steps, every, &dir)?;
    s.output("dir", &dir);
    s.echo(&dir, true)?;
    println!(
        "steps={steps} t={:.6} energy={:.12e} energy_ratio={:.12e} max_div={:.3e}",
        last.t,
        last.energy(),
        last.energy() / e0,
        last.max_divergence()
    );
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------------------
// monitor

enum FrameSource {
    Constant(ConstantFrame),
    Rotating(RotatingFrame),
    Sampled(Box<SampledFrame>),
}

impl FrameSource {
    fn provider(&self) -> &dyn FrameProvider {
        match self {
            FrameSource::Constant(f) => f,
            FrameSource::Rotating(f) => f,
            FrameSource::Sampled(f) => f.as_ref(),
        }
    }
}

fn parse_frame(s: &mut Settings, spec: &str) -> Result<FrameSource> {
    if let Some(v) = spec.strip_prefix("const:") {
        return Ok(FrameSource::Constant(ConstantFrame(FrameSample::for_beta(parse_vec3("frame", v)?))));
    }
    if let Some(v) = spec.strip_prefix("rotating:") {
        let omega = parse_extended("frame", v)?;
        return Ok(FrameSource::Rotating(RotatingFrame { omega }));
    }
    let path = Path::new(spec);
    s.input("frame", path);
    Ok(FrameSource::Sampled(Box::new(frame::SampledFrame::read_csv(open(path)?)?)))
}

#[derive(Serialize)]
struct Prop1Row {
    sigma: f64,
    c_min: f64,
    c_r1: f64,
    c_r2: f64,
    c_r3: f64,
    t_worst: Option<f64>,
    active_nodes: usize,
}

fn cmd_monitor(s: &mut Settings, a: MonitorArgs, out: Option<PathBuf>) -> Result<Verdict> {
    let traj = s.require::<PathBuf>("traj", a.traj)?;
    let frame_spec = s.param("frame", a.frame, "const:0,0,1".to_string())?;
    let sigma = s.param("sigma", a.sigma, 0.1)?;
    s.tolerance("residual", MONITOR_RESIDUAL_TOL);
    s.finish()?;
    s.input("traj", &traj);
    let source = parse_frame(s, &frame_spec)?;
    let grid = s.run.grid.map(make_grid).transpose()?;
    let states = ns::load_dir(&traj, grid.as_ref())?;
    s.run.grid = Some(states[0].grid().n());
    let log: CriterionLog = monitor::accumulate(&states, source.provider())?;
    let est = monitor::prop1_constant_estimate(&log, sigma)?;

    let out = out.unwrap_or_else(|| "log.csv".into());
    log.write_csv(create(&out)?)?;
    s.output("log", &out);
    let stem = out.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
    let prop_out = out.with_file_name(format!("{stem}.prop1.csv"));
    write_rows(
        &prop_out,
        &[Prop1Row {
            sigma,
            c_min: est.c_min,
            c_r1: est.per_term[0],
            c_r2: est.per_term[1],
            c_r3: est.per_term[2],
            t_worst: est.t_worst,
            active_nodes: est.active_nodes,
        }],
    )?;
    s.output("prop1", &prop_out);
    s.echo(&out, false)?;
    let res = log.max_residual();
    println!(
        "nodes={} criterion_integral={:.12e} max_residual={res:.3e} C(sigma={sigma})={:.6e}",
        log.rows.len(),
        log.final_integral(),
        est.c_min
    );
    Ok(if res <= MONITOR_RESIDUAL_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    })
}
