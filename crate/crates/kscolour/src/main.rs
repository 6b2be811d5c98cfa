//! Command-line entry point. Every pipeline is a subcommand producing a JSON
//! report with a reproducibility header; randomized subcommands require an
//! explicit `--seed` and replay byte-identically (modulo the timestamp) at
//! any `--threads` value.
//!
//! Exit codes: 0 success, 1 usage (bad flags or inconsistent parameters),
//! 2 data (missing or malformed inputs), 3 internal (failed cross-checks).
//! Failures print a machine-readable `{"error": {...}}` object to stderr.

use clap::{Args, Parser, Subcommand};
use kscolour::colouring::{
    builtin_colouring, domain_measure, validate_ks_conditions, DomainMeasure, KsConditionReport,
    POLAR_CAP_DOMAIN_MEASURE,
};
use kscolour::deficit::{deficit_summary, BoundsSummary, DeficitProblem, DeficitReport};
use kscolour::error::KsError;
use kscolour::pheno::{
    classify_phenomenological, density_profile, DensityProfile, PhenoMeasures,
};
use kscolour::precision::{
    random_polar_interior_targets, random_rational_targets, KnowabilityReport, MeasurementModel,
    MisalignmentLaw,
};
use kscolour::report::{Report, RunConfig};
use kscolour::sets::{
    brute_force_colourability, decide_colourability, enumerate_colourings, Colourability,
};
use kscolour::{ParityClass, RandomStream, Ray, RaySet, RationalRay, UnitVec};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "kscolour",
    version,
    about = "Kochen-Specker sphere colourings: uncolourable sets, exact rational colourings, deficit bounds, finite-precision statistics"
)]
struct Cli {
    /// Cap the rayon worker count (results are identical at any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide KS-colourability of a ray set by complete search.
    VerifySet(VerifySetArgs),
    /// Sample random triads against a colouring's defining conditions.
    CheckColouring(CheckColouringArgs),
    /// Classify a grid into U0 / U1 / D at resolution delta.
    Classify(ClassifyArgs),
    /// Density profile of the discontinuity region around a center.
    Density(DensityArgs),
    /// Monte Carlo lower bound from the rotation-map Jacobians of a set.
    Deficit(DeficitArgs),
    /// Finite-precision measurement probe of p(k, epsilon).
    Measure(MeasureArgs),
    /// Bounds table from a previously written deficit report.
    Report(ReportArgs),
}

#[derive(Args)]
struct VerifySetArgs {
    /// Ray-set file path or bundled name (e.g. conway-kochen).
    #[arg(long)]
    set: String,
    /// Count all satisfying assignments instead of stopping at the first.
    #[arg(long)]
    enumerate: bool,
    /// Re-check the verdict with the exhaustive oracle on small subsets.
    #[arg(long)]
    oracle_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckColouringArgs {
    #[arg(long)]
    colouring: String,
    #[arg(long, default_value_t = 1_000_000)]
    triads: usize,
    #[arg(long)]
    seed: u64,
    /// Samples for the Monte Carlo domain-measure estimate.
    #[arg(long, default_value_t = 1_000_000)]
    measure_samples: usize,
    /// Parity class coloured 0 by the rational colouring.
    #[arg(long, default_value = "Z")]
    zero_class: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    colouring: String,
    /// Cap radius (radians) used to probe each grid point.
    #[arg(long)]
    delta: f64,
    /// Number of Fibonacci grid points.
    #[arg(long)]
    grid: usize,
    /// Domain samples per cap.
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "Z")]
    zero_class: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a plot-ready x,y,z,class CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    colouring: String,
    /// Center direction "x,y,z".
    #[arg(long)]
    center: String,
    /// Strictly decreasing radii, comma separated.
    #[arg(long)]
    radii: String,
    /// Monte Carlo samples per radius.
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Resolution of the backing classification.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 4000)]
    grid: usize,
    #[arg(long, default_value_t = 100)]
    samples_per_cap: usize,
    #[arg(long, default_value = "Z")]
    zero_class: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeficitArgs {
    #[arg(long)]
    set: String,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long, default_value = "meyer")]
    colouring: String,
    /// Target direction; integers "x,y,z[,n]" are exact, floats are real.
    /// Repeatable.
    #[arg(long)]
    target: Vec<String>,
    /// Generate this many random targets instead of --target.
    #[arg(long)]
    random_targets: Option<usize>,
    /// Strictly decreasing precisions, comma separated.
    #[arg(long)]
    epsilons: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "uniform")]
    law: String,
    #[arg(long, default_value = "Z")]
    zero_class: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A deficit report produced by the deficit subcommand.
    #[arg(long)]
    deficit: PathBuf,
    /// Measure covered by the reference regular colouring.
    #[arg(long, default_value_t = POLAR_CAP_DOMAIN_MEASURE)]
    regular_measure: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<KsError> for CliError {
    fn from(e: KsError) -> Self {
        match e {
            KsError::Domain(_) => CliError::Usage(e.to_string()),
            KsError::Parse(_)
            | KsError::Io(_)
            | KsError::Json(_)
            | KsError::NotOnRationalSphere { .. } => CliError::Data(e.to_string()),
            KsError::Inconsistency(_) | KsError::Internal(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's rendered help/version output goes to stdout with code 0
            if e.use_stderr() {
                let err = CliError::Usage(e.to_string());
                emit_error(&err);
                std::process::exit(err.exit_code());
            }
            let _ = e.print();
            std::process::exit(0);
        }
    };
    let threads = cli.threads;
    let outcome = run_in_pool(threads, || dispatch(cli.command));
    if let Err(err) = outcome {
        emit_error(&err);
        std::process::exit(err.exit_code());
    }
}

fn emit_error(err: &CliError) {
    let obj = serde_json::json!({
        "error": { "kind": err.kind(), "message": err.message() }
    });
    eprintln!("{obj}");
}

fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::VerifySet(args) => verify_set(args),
        Command::CheckColouring(args) => check_colouring(args),
        Command::Classify(args) => classify(args),
        Command::Density(args) => density(args),
        Command::Deficit(args) => deficit(args),
        Command::Measure(args) => measure(args),
        Command::Report(args) => bounds_report(args),
    }
}


fn parse_zero_class(s: &str) -> Result<ParityClass, CliError> {
    s.parse::<ParityClass>()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad {what} entry '{t}': {e}")))
        })
        .collect()
}

fn parse_center(s: &str) -> Result<UnitVec, CliError> {
    let parts = parse_f64_list(s, "center")?;
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "center must be x,y,z (got {} components)",
            parts.len()
        )));
    }
    UnitVec::new(parts[0], parts[1], parts[2]).map_err(|e| CliError::Usage(e.to_string()))
}

/// Integer triples/quadruples become exact rational targets, anything else a
/// floating direction.
fn parse_target(s: &str) -> Result<Ray, CliError> {
    let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
    if tokens.len() != 3 && tokens.len() != 4 {
        return Err(CliError::Usage(format!(
            "target '{s}' must have 3 or 4 comma-separated components"
        )));
    }
    if let Ok(ints) = tokens
        .iter()
        .map(|t| t.parse::<i64>())
        .collect::<Result<Vec<i64>, _>>()
    {
        let ray = RationalRay::from_i64(ints[0], ints[1], ints[2])
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if ints.len() == 4 {
            use num_traits::ToPrimitive;
            let n = ray.n().to_i64().unwrap_or(-1);
            if n != ints[3] {
                return Err(CliError::Usage(format!(
                    "target '{s}': |({},{},{})| = {n}, not {}",
                    ints[0], ints[1], ints[2], ints[3]
                )));
            }
        }
        return Ok(Ray::Rational(ray));
    }
    let floats = parse_f64_list(s, "target")?;
    UnitVec::new(floats[0], floats[1], floats[2])
        .map(Ray::Real)
        .map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct OracleCheck {
    subsets_checked: usize,
    agreements: usize,
    disagreements: usize,
}

#[derive(Serialize)]
struct VerifySetResult {
    set_name: String,
    source: String,
    num_rays: usize,
    num_pairs: usize,
    num_triads: usize,
    status: Colourability,
    min_angle_rad: f64,
    min_angle_deg: f64,
    attained_by: [[i64; 3]; 2],
    witness: Option<Vec<u8>>,
    witness_count: Option<u64>,
    nodes: u64,
    propagations: u64,
}

fn verify_set(args: VerifySetArgs) -> Result<(), CliError> {
    let resolved = kscolour::data::resolve_ray_set_with_source(&args.set).map_err(CliError::from)?;
    let set = resolved.set.clone();
    let graph = set.build_graph();
    let result = if args.enumerate {
        enumerate_colourings(&graph)
    } else {
        decide_colourability(&graph)
    };
    let (min_angle, (i, j)) = set.min_angle_attained().map_err(CliError::from)?;
    let oracle = if args.oracle_check {
        Some(run_oracle_check(&set, result.status)?)
    } else {
        None
    };
    eprintln!(
        "{}: {:?} ({} rays, min angle {:.4} deg, {} nodes, {:.1} ms)",
        set.name(),
        result.status,
        set.len(),
        min_angle.to_degrees(),
        result.stats.nodes,
        result.stats.wall.as_secs_f64() * 1e3
    );
    let payload = serde_json::json!({
        "verify": VerifySetResult {
            set_name: set.name().into(),
            source: set.source().into(),
            num_rays: set.len(),
            num_pairs: graph.pairs.len(),
            num_triads: graph.triads.len(),
            status: result.status,
            min_angle_rad: min_angle,
            min_angle_deg: min_angle.to_degrees(),
            attained_by: [set.rays()[i], set.rays()[j]],
            witness: result.witness,
            witness_count: result.witness_count,
            nodes: result.stats.nodes,
            propagations: result.stats.propagations,
        },
        "oracle_check": oracle,
    });
    let config = RunConfig::new("verify-set")
        .digest_bytes(&resolved.label, &resolved.bytes)
        .flag("set", &args.set)
        .flag("enumerate", args.enumerate)
        .flag("oracle-check", args.oracle_check)
        .output(args.out.as_deref());
    Report::new(config, payload)
        .write(args.out.as_deref())
        .map_err(CliError::from)
}

/// Deterministic small-subset comparison of the search against the `2^n`
/// oracle, plus the whole set when it is small enough.
fn run_oracle_check(
    set: &RaySet,
    full_status: Colourability,
) -> Result<OracleCheck, CliError> {
    use rand::seq::SliceRandom;
    let mut rng = RandomStream::new(1).rng();
    let mut checked = 0usize;
    let mut agreements = 0usize;
    let all: Vec<usize> = (0..set.len()).collect();
    if set.len() <= 20 {
        let g = set.build_graph();
        let (oracle_status, _) = brute_force_colourability(&g).map_err(CliError::from)?;
        checked += 1;
        if oracle_status == full_status {
            agreements += 1;
        }
    }
    for k in [4usize, 8, 12, 16, 20] {
        if k > set.len() {
            break;
        }
        for _ in 0..3 {
            let idx: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
            let sub = set.subset(&idx).map_err(CliError::from)?;
            let g = sub.build_graph();
            let fast = decide_colourability(&g);
            let (oracle_status, _) = brute_force_colourability(&g).map_err(CliError::from)?;
            checked += 1;
            if fast.status == oracle_status {
                agreements += 1;
            }
        }
    }
    Ok(OracleCheck {
        subsets_checked: checked,
        agreements,
        disagreements: checked - agreements,
    })
}

#[derive(Serialize)]
struct CheckColouringResult {
    conditions: KsConditionReport,
    domain_measure: DomainMeasure,
}

fn check_colouring(args: CheckColouringArgs) -> Result<(), CliError> {
    let zero = parse_zero_class(&args.zero_class)?;
    let colouring = builtin_colouring(&args.colouring, zero).map_err(CliError::from)?;
    let stream = RandomStream::new(args.seed);
    let conditions =
        validate_ks_conditions(colouring.as_ref(), &stream, args.triads).map_err(CliError::from)?;
    let measure = domain_measure(
        colouring.as_ref(),
        &stream.substream(1_000_000),
        args.measure_samples,
    );
    eprintln!(
        "{}: {} fully-defined triads, {} triad violations, {} pair violations",
        colouring.name(),
        conditions.fully_defined_triads,
        conditions.triad_violations,
        conditions.pair_violations
    );
    let config = RunConfig::new("check-colouring")
        .flag("colouring", &args.colouring)
        .flag("triads", args.triads)
        .flag("measure-samples", args.measure_samples)
        .flag("zero-class", zero)
        .seed(args.seed)
        .output(args.out.as_deref());
    Report::new(
        config,
        CheckColouringResult {
            conditions,
            domain_measure: measure,
        },
    )
    .write(args.out.as_deref())
    .map_err(CliError::from)
}

fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let zero = parse_zero_class(&args.zero_class)?;
    let colouring = builtin_colouring(&args.colouring, zero).map_err(CliError::from)?;
    let stream = RandomStream::new(args.seed);
    let map = classify_phenomenological(
        colouring.as_ref(),
        args.delta,
        args.grid,
        args.samples,
        &stream,
    )
    .map_err(CliError::from)?;
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, map.to_csv()).map_err(|e| CliError::Data(e.to_string()))?;
    }
    eprintln!(
        "{}: mu(U0) = {:.4}, mu(U1) = {:.4}, mu(D) = {:.4}, undefined cells = {:.4}",
        map.colouring, map.measures.u0, map.measures.u1, map.measures.d, map.measures.undefined
    );
    let config = RunConfig::new("classify")
        .flag("colouring", &args.colouring)
        .flag("delta", args.delta)
        .flag("grid", args.grid)
        .flag("samples", args.samples)
        .flag("zero-class", zero)
        .opt_flag("csv", args.csv.as_ref().map(|p| p.display().to_string()))
        .seed(args.seed)
        .output(args.out.as_deref());
    Report::new(config, map)
        .write(args.out.as_deref())
        .map_err(CliError::from)
}

#[derive(Serialize)]
struct DensityResult {
    map_delta: f64,
    map_grid: usize,
    map_measures: PhenoMeasures,
    profile: DensityProfile,
}

fn density(args: DensityArgs) -> Result<(), CliError> {
    let zero = parse_zero_class(&args.zero_class)?;
    let colouring = builtin_colouring(&args.colouring, zero).map_err(CliError::from)?;
    let center = parse_center(&args.center)?;
    let radii = parse_f64_list(&args.radii, "radii")?;
    let stream = RandomStream::new(args.seed);
    let map = classify_phenomenological(
        colouring.as_ref(),
        args.delta,
        args.grid,
        args.samples_per_cap,
        &stream,
    )
    .map_err(CliError::from)?;
    let profile = density_profile(
        &map,
        &center,
        &radii,
        args.samples,
        &stream.substream(50_000_000),
    )
    .map_err(CliError::from)?;
    eprintln!(
        "{}: fractions {:?} -> {:?}",
        map.colouring, profile.fractions, profile.verdict
    );
    let config = RunConfig::new("density")
        .flag("colouring", &args.colouring)
        .flag("center", &args.center)
        .flag("radii", &args.radii)
        .flag("samples", args.samples)
        .flag("delta", args.delta)
        .flag("grid", args.grid)
        .flag("samples-per-cap", args.samples_per_cap)
        .flag("zero-class", zero)
        .seed(args.seed)
        .output(args.out.as_deref());
    Report::new(
        config,
        DensityResult {
            map_delta: map.delta,
            map_grid: map.grid.len(),
            map_measures: map.measures.clone(),
            profile,
        },
    )
    .write(args.out.as_deref())
    .map_err(CliError::from)
}

fn deficit(args: DeficitArgs) -> Result<(), CliError> {
    let resolved = kscolour::data::resolve_ray_set_with_source(&args.set).map_err(CliError::from)?;
    let set = resolved.set.clone();
    let problem = DeficitProblem::new(&set).map_err(CliError::from)?;
    let stream = RandomStream::new(args.seed);
    let report = problem.estimate(args.samples, &stream).map_err(CliError::from)?;
    eprintln!(
        "{}: estimate {:.6e} +- {:.2e} (ceiling {:.6e}, {} samples)",
        report.set_name, report.estimate, report.std_error, report.covering_ceiling, args.samples
    );
    let config = RunConfig::new("deficit")
        .digest_bytes(&resolved.label, &resolved.bytes)
        .flag("set", &args.set)
        .flag("samples", args.samples)
        .seed(args.seed)
        .output(args.out.as_deref());
    Report::new(config, report)
        .write(args.out.as_deref())
        .map_err(CliError::from)
}

#[derive(Serialize)]
struct MeasureResult {
    colouring: String,
    law: MisalignmentLaw,
    epsilons: Vec<f64>,
    trials: usize,
    targets: usize,
    verdict_counts: BTreeMap<String, usize>,
    reports: Vec<KnowabilityReport>,
}

fn measure(args: MeasureArgs) -> Result<(), CliError> {
    let zero = parse_zero_class(&args.zero_class)?;
    let colouring = builtin_colouring(&args.colouring, zero).map_err(CliError::from)?;
    let law: MisalignmentLaw = args.law.parse().map_err(|e: KsError| CliError::Usage(e.to_string()))?;
    let epsilons = parse_f64_list(&args.epsilons, "epsilons")?;
    let stream = RandomStream::new(args.seed);
    let targets: Vec<Ray> = match (args.random_targets, args.target.is_empty()) {
        (Some(n), true) => {
            let mut rng = stream.substream(9_000_000).rng();
            match args.colouring.as_str() {
                "polar-cap" => {
                    let max_eps = epsilons.iter().cloned().fold(0.0, f64::max);
                    let margin = (max_eps * 1.25 + 0.005).min(0.08);
                    random_polar_interior_targets(n, margin, &mut rng)
                        .map_err(CliError::from)?
                }
                _ => random_rational_targets(n, &mut rng).map_err(CliError::from)?,
            }
        }
        (None, false) => args
            .target
            .iter()
            .map(|t| parse_target(t))
            .collect::<Result<Vec<_>, _>>()?,
        (Some(_), false) => {
            return Err(CliError::Usage(
                "--target and --random-targets are mutually exclusive".into(),
            ))
        }
        (None, true) => {
            return Err(CliError::Usage(
                "provide --target (repeatable) or --random-targets N".into(),
            ))
        }
    };
    let model = MeasurementModel::new(colouring, law);
    let reports = model
        .probe(&targets, &epsilons, args.trials, &stream)
        .map_err(CliError::from)?;
    let mut verdict_counts = BTreeMap::new();
    for r in &reports {
        let key = serde_json::to_value(r.verdict)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_else(|| format!("{:?}", r.verdict));
        *verdict_counts.entry(key).or_insert(0usize) += 1;
    }
    eprintln!(
        "{}: {} targets, verdicts {:?}",
        args.colouring,
        targets.len(),
        verdict_counts
    );
    let config = RunConfig::new("measure")
        .flag("colouring", &args.colouring)
        .flag("epsilons", &args.epsilons)
        .flag("trials", args.trials)
        .flag("law", &args.law)
        .flag("zero-class", zero)
        .opt_flag("random-targets", args.random_targets)
        .opt_flag(
            "target",
            (!args.target.is_empty()).then(|| args.target.join(";")),
        )
        .seed(args.seed)
        .output(args.out.as_deref());
    Report::new(
        config,
        MeasureResult {
            colouring: args.colouring.clone(),
            law,
            epsilons,
            trials: args.trials,
            targets: targets.len(),
            verdict_counts,
            reports,
        },
    )
    .write(args.out.as_deref())
    .map_err(CliError::from)
}

fn bounds_report(args: ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.deficit)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.deficit.display())))?;
    let parsed: Report<DeficitReport> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(e.to_string()))?;
    let summary: BoundsSummary =
        deficit_summary(&parsed.result, args.regular_measure).map_err(CliError::from)?;
    eprintln!(
        "{}: lower {:.6e} (-3se {:.6e}) < upper {:.6e}",
        summary.set_name, summary.lower_bound_estimate, summary.lower_minus_3se, summary.upper_bound
    );
    let config = RunConfig::new("report")
        .digest_file("deficit", &args.deficit)
        .map_err(CliError::from)?
        .flag("deficit", args.deficit.display())
        .flag("regular-measure", args.regular_measure)
        .output(args.out.as_deref());
    Report::new(config, summary)
        .write(args.out.as_deref())
        .map_err(CliError::from)
}
