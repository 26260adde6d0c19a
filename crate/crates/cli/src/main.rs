use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use synspec_core::geometry::{brick_cover, region_topology, BrickSet, PlanarRegion};
use synspec_core::obstruction::{
    bott_index_of, certified_distance_bound, index_hypothesis_check, joint_diagonalize,
    spin_triple, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
use synspec_core::spectrum::{
    hausdorff_distance, synthetic_spectrum_with, BallUnion, FactorOrder, SpectrumOptions,
    DEFAULT_GRID_CAP,
};
use synspec_core::symbol::{quasicentral_family, RampShape, SymbolOperator, TruncationFamily};
use synspec_core::verify::{run_suite, Suite};
use synspec_core::{json, AlmostCommutingGenerator, Error, OperatorTuple};

#[derive(Parser)]
#[command(
    name = "synspec",
    version,
    about = "Synthetic spectra and index obstructions for almost-commuting tuples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a tuple or a symbol.
    Gen(GenArgs),
    /// Synthetic spectrum of a tuple.
    Sspec(SspecArgs),
    /// Hausdorff distance between two ball unions.
    Hausdorff(HausdorffArgs),
    /// Components and holes of a planar region.
    Holes(HolesArgs),
    /// Index test at every hole of a symbol's synthetic spectrum.
    IndexCheck(IndexCheckArgs),
    /// Bott certificate of a triple.
    Bott(BottArgs),
    /// Commuting approximant by joint diagonalization.
    Approx(ApproxArgs),
    /// Run a property suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InputArg {
    #[arg(value_name = "FILE")]
    file: Option<PathBuf>,
    #[arg(long, conflicts_with = "file")]
    input: Option<PathBuf>,
}

impl InputArg {
    fn path(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .or(self.file.as_deref())
            .ok_or_else(|| CliError::Usage("an input file is required".into()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    SpinTriple,
    AlmostCommuting,
    Quasicentral,
    Symbol,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// s(z) = z
    Shift,
    /// s(z) = z²
    Square,
    /// s(z) = (z + 1/z)/2
    Laurent,
    /// s(z) = z + 0.3 z²
    Cubic,
}

impl Preset {
    fn symbol(self) -> SymbolOperator {
        let coeffs: &[(i32, f64)] = match self {
            Preset::Shift => &[(1, 1.0)],
            Preset::Square => &[(2, 1.0)],
            Preset::Laurent => &[(-1, 0.5), (1, 0.5)],
            Preset::Cubic => &[(1, 1.0), (2, 0.3)],
        };
        SymbolOperator::from_real(coeffs).expect("presets are valid")
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 20.0)]
    j: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Absolute perturbation norm; defaults to delta/5.
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "N", default_value_t = 400)]
    size: usize,
    #[arg(long, default_value_t = 10)]
    w: usize,
    #[arg(long, default_value_t = 10)]
    n0: usize,
    #[arg(long)]
    step: bool,
    /// Symbol JSON for the quasicentral family.
    #[arg(long)]
    symbol: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Shift)]
    preset: Preset,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the exactly commuting tuple behind an almost-commuting one.
    #[arg(long)]
    commuting_out: Option<PathBuf>,
}

#[derive(Args)]
struct SspecArgs {
    #[command(flatten)]
    input: InputArg,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Factor order as 1-based indices, e.g. "3,2,1".
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    no_prefilter: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_CAP as u64)]
    grid_cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HausdorffArgs {
    a: PathBuf,
    b: PathBuf,
    /// Raster pitch; defaults to a twentieth of the smaller radius.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HolesArgs {
    #[command(flatten)]
    input: InputArg,
    /// Raster pitch; defaults to a twentieth of the radius or brick side.
    #[arg(long)]
    resolution: Option<f64>,
    /// Analyze the 1/k-brick cover of a ball union's centers instead of the balls.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IndexCheckArgs {
    #[arg(long, conflicts_with = "preset")]
    symbol: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BottArgs {
    #[command(flatten)]
    input: InputArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    #[command(flatten)]
    input: InputArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn report(&self) -> (&'static str, String) {
        match self {
            CliError::Core(e) => (e.name(), e.to_string()),
            CliError::Io(path, e) => ("io", format!("{}: {e}", path.display())),
            CliError::Usage(msg) => ("invalid-input", msg.clone()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_resource_limit() => 3,
            _ => 2,
        }
    }
}

/// Whether the command's own check held.
enum Verdict {
    Ok,
    CheckFailed,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read(path)?;
    json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// The artifact goes to `out` with the summary on stdout, or to stdout
/// with the summary on stderr.
fn emit<T: Serialize + ?Sized>(
    value: &T,
    out: Option<&Path>,
    summary: &str,
) -> Result<(), CliError> {
    let text = json::to_string(value)?;
    match out {
        Some(path) => {
            write_file(path, &text)?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<Verdict, CliError> {
    let out = args.out.as_deref();
    match args.kind {
        GenKind::SpinTriple => {
            let t = spin_triple(args.j)?;
            let c = t.max_commutator_norm();
            emit(
                &t,
                out,
                &format!(
                    "spin triple j={}: dim {}, max commutator {c:.6e}",
                    args.j,
                    t.dim()
                ),
            )?;
        }
        GenKind::AlmostCommuting => {
            let mut g = AlmostCommutingGenerator::new(args.n, args.dim, args.delta);
            if let Some(p) = args.perturbation {
                g = g.with_perturbation(p);
            }
            let pair = g.generate(args.seed)?;
            if let Some(path) = &args.commuting_out {
                write_file(path, &json::to_string(&pair.commuting)?)?;
            }
            let c = pair.perturbed.max_commutator_norm();
            emit(
                &pair.perturbed,
                out,
                &format!(
                    "almost-commuting n={} dim={}: max commutator {c:.6e}",
                    args.n, args.dim
                ),
            )?;
        }
        GenKind::Quasicentral => {
            let base = match &args.symbol {
                Some(path) => load(path)?,
                None => args.preset.symbol(),
            };
            let ramp = if args.step {
                RampShape::Step
            } else {
                RampShape::Linear
            };
            let fam = TruncationFamily::new(base, args.size, args.n0, args.w, ramp)?;
            let q = quasicentral_family(&fam)?;
            let bound = synspec_core::op_norm(&q.t1)
                .max(synspec_core::op_norm(&q.t2))
                .max(1.0);
            let pair = OperatorTuple::new(vec![q.t1, q.t2], bound)?;
            let d = q.diagnostics;
            emit(
                &pair,
                out,
                &format!(
                    "quasicentral N={} w={}: commutator {:.6e}, ramp commutator {:.6e}",
                    args.size, args.w, d.commutator_norm, d.ramp_commutator
                ),
            )?;
        }
        GenKind::Symbol => {
            let s = args.preset.symbol();
            emit(&s, out, &format!("symbol with bandwidth {}", s.bandwidth()))?;
        }
    }
    Ok(Verdict::Ok)
}

fn parse_order(text: &str, n: usize) -> Result<FactorOrder, CliError> {
    let idx: Result<Vec<usize>, _> = text.split(',').map(|s| s.trim().parse::<usize>()).collect();
    let idx = idx.map_err(|_| CliError::Usage(format!("bad factor order {text:?}")))?;
    if idx.len() != n || idx.contains(&0) {
        return Err(CliError::Usage(format!("factor order must list 1..={n}")));
    }
    Ok(FactorOrder::custom(
        idx.into_iter().map(|i| i - 1).collect(),
    )?)
}

fn sspec(args: &SspecArgs) -> Result<Verdict, CliError> {
    let t: OperatorTuple = load(args.input.path()?)?;
    let order = args
        .order
        .as_deref()
        .map(|o| parse_order(o, t.n()))
        .transpose()?;
    let opts = SpectrumOptions {
        prefilter: !args.no_prefilter,
        order,
        cap: args.grid_cap as u128,
    };
    let s = synthetic_spectrum_with(&t, args.eta, &opts)?;
    emit(
        &s,
        args.out.as_deref(),
        &format!(
            "sSp^{}: {} centers on the 1/{} lattice (n={})",
            args.eta,
            s.len(),
            s.k(),
            s.n()
        ),
    )?;
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct HausdorffOut {
    distance: f64,
    resolution: f64,
    error_bound: f64,
}

fn hausdorff(args: &HausdorffArgs) -> Result<Verdict, CliError> {
    let a: BallUnion = load(&args.a)?;
    let b: BallUnion = load(&args.b)?;
    let resolution = match args.resolution {
        Some(r) => r,
        None => {
            let r = a.radius().min(b.radius()) / 20.0;
            if r <= 0.0 {
                return Err(CliError::Usage("zero radius: pass --resolution".into()));
            }
            r
        }
    };
    let distance = hausdorff_distance(&a, &b, resolution)?;
    let error_bound = (a.n() as f64).sqrt() * resolution;
    emit(
        &HausdorffOut {
            distance,
            resolution,
            error_bound,
        },
        args.out.as_deref(),
        &format!("hausdorff distance {distance:.6e} (within {error_bound:.3e})"),
    )?;
    Ok(Verdict::Ok)
}

fn holes(args: &HolesArgs) -> Result<Verdict, CliError> {
    let path = args.input.path()?;
    let text = read(path)?;
    let topo = match json::from_str::<BallUnion>(&text) {
        Ok(b) => match args.k {
            Some(k) => {
                let cover = brick_cover(&b.centers(), k)?;
                region_topology(
                    PlanarRegion::Bricks(&cover),
                    args.resolution.unwrap_or(cover.side() / 20.0),
                )?
            }
            None => region_topology(
                PlanarRegion::Balls(&b),
                args.resolution.unwrap_or(b.radius() / 20.0),
            )?,
        },
        Err(e) if args.k.is_some() => {
            return Err(CliError::Usage(format!(
                "--k needs a ball union input ({e})"
            )));
        }
        Err(ball_err) => match json::from_str::<BrickSet>(&text) {
            Ok(b) => region_topology(
                PlanarRegion::Bricks(&b),
                args.resolution.unwrap_or(b.side() / 20.0),
            )?,
            Err(_) => {
                return Err(CliError::Usage(format!(
                    "{}: neither a ball union nor a brick set ({ball_err})",
                    path.display()
                )))
            }
        },
    };
    emit(
        &topo,
        args.out.as_deref(),
        &format!(
            "{} components, {} holes",
            topo.component_count,
            topo.holes.len()
        ),
    )?;
    Ok(Verdict::Ok)
}

fn index_check(args: &IndexCheckArgs) -> Result<Verdict, CliError> {
    let op = match (&args.symbol, args.preset) {
        (Some(path), _) => load(path)?,
        (None, Some(p)) => p.symbol(),
        (None, None) => return Err(CliError::Usage("pass --symbol or --preset".into())),
    };
    let report = index_hypothesis_check(&op, args.eta)?;
    let indices: Vec<i64> = report.holes.iter().map(|h| h.index).collect();
    let verdict = if report.pass { "pass" } else { "fail" };
    emit(
        &report,
        args.out.as_deref(),
        &format!(
            "index check at eta={}: {verdict} ({} holes, indices {indices:?})",
            args.eta,
            report.holes.len()
        ),
    )?;
    Ok(if report.pass {
        Verdict::Ok
    } else {
        Verdict::CheckFailed
    })
}

#[derive(Serialize)]
struct BottOut {
    value: i64,
    gap: f64,
    certified_lower_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    excludes_singular_commuting: Option<bool>,
}

fn bott(args: &BottArgs) -> Result<Verdict, CliError> {
    let t: OperatorTuple = load(args.input.path()?)?;
    let r = bott_index_of(&t)?;
    let caveat = if r.value != 0 {
        Some(certified_distance_bound(&t)?.excludes_singular_commuting)
    } else {
        None
    };
    emit(
        &BottOut {
            value: r.value,
            gap: r.gap,
            certified_lower_bound: r.certified_lower_bound,
            excludes_singular_commuting: caveat,
        },
        args.out.as_deref(),
        &format!(
            "bott value {}, gap {:.6e}, certified bound {:.6e}",
            r.value, r.gap, r.certified_lower_bound
        ),
    )?;
    Ok(Verdict::Ok)
}

fn approx(args: &ApproxArgs) -> Result<Verdict, CliError> {
    let t: OperatorTuple = load(args.input.path()?)?;
    let r = joint_diagonalize(&t, args.tol, args.max_sweeps)?;
    emit(
        &r,
        args.out.as_deref(),
        &format!(
            "max distance {:.6e} after {} sweeps (residual {:.3e})",
            r.max_distance, r.sweeps, r.off_diag_residual
        ),
    )?;
    Ok(Verdict::Ok)
}

fn verify(args: &VerifyArgs) -> Result<Verdict, CliError> {
    let suite: Suite = args.suite.parse()?;
    let report = run_suite(suite, args.trials, args.seed)?;
    let passed = report.properties.iter().filter(|p| p.pass).count();
    let verdict = if report.pass { "pass" } else { "fail" };
    emit(
        &report,
        args.out.as_deref(),
        &format!(
            "suite {suite}: {verdict} ({passed}/{} properties)",
            report.properties.len()
        ),
    )?;
    Ok(if report.pass {
        Verdict::Ok
    } else {
        Verdict::CheckFailed
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SYNSPEC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "SYNSPEC_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> Result<Verdict, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Sspec(a) => sspec(a),
        Command::Hausdorff(a) => hausdorff(a),
        Command::Holes(a) => holes(a),
        Command::IndexCheck(a) => index_check(a),
        Command::Bott(a) => bott(a),
        Command::Approx(a) => approx(a),
        Command::Verify(a) => verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            let (name, msg) = e.report();
            eprintln!("error[{name}]: {msg}");
            ExitCode::from(e.exit_code())
        }
    }
}
