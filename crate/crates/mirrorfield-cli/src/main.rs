//! Command-line surface for the mirrorfield library: renormalized profiles,
//! pairings of smearing-function files, the invariant verification suites,
//! and kernel singularity probes.
//!
//! Output contract: CSV for profiles and probes (every `#` header line
//! records one resolved configuration entry), pretty-printed JSON for
//! pairing records and verification reports.  All outputs are byte-identical
//! across repeated runs with the same arguments and seed, including under
//! different `MIRRORFIELD_THREADS` settings: every parallel reduction in the
//! library merges in a fixed order.
//!
//! Exit codes: `0` success, `1` verification found a failing invariant,
//! `2` invalid request (precondition violation), `3` numerical
//! non-convergence.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mirrorfield::casimir::{CouplingXi, ProfileRequest};
use mirrorfield::error::{Error, Result};
use mirrorfield::geometry::{reflected_causally_disjoint, Region, SpacetimePoint};
use mirrorfield::propagators::{
    pair_e, pair_e_boundary, PairingBackend, PairingBackendConfig, PairingOutcome,
};
use mirrorfield::states::{log_spaced_deltas, singularity_probe, TwoPointPairing};
use mirrorfield::testfields::TestFunction;
use mirrorfield::verify::{run_suites, SuiteScale, SUITE_NAMES};

const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "mirrorfield",
    version,
    about = "Massless scalar field with Dirichlet mirrors: profiles, pairings, probes, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Renormalized <phi^2> and <T00> over interior heights (CSV).
    Profile(ProfileArgs),
    /// Pairings and two-point values of two smearing-function files (JSON).
    Pair(PairArgs),
    /// Run the library's seeded invariant suites (human summary + JSON).
    Verify(VerifyArgs),
    /// Sample the boundary part of the two-point kernel along a path
    /// approaching a reflected light cone and fit its growth exponent (CSV).
    Probe(ProbeArgs),
}

/// Region selection shared by all subcommands.
#[derive(Args)]
struct RegionArgs {
    /// Geometry: "minkowski", "halfspace", or "slab".
    #[arg(long)]
    region: String,
    /// Plate separation; slab region only.
    #[arg(long)]
    d: Option<f64>,
}

impl RegionArgs {
    fn resolve(&self) -> Result<Region> {
        match self.region.as_str() {
            "minkowski" | "halfspace" => {
                if self.d.is_some() {
                    return Err(Error::Validation(format!(
                        "--d sets the plate separation of the slab; the {} region has no \
                         second plate",
                        self.region
                    )));
                }
                Ok(if self.region == "minkowski" {
                    Region::Minkowski
                } else {
                    Region::HalfSpace
                })
            }
            "slab" => Region::slab(self.d.unwrap_or(1.0)),
            other => Err(Error::Validation(format!(
                "unknown region {other:?}; expected minkowski, halfspace, or slab"
            ))),
        }
    }

    fn d_header(&self) -> String {
        match self.region.as_str() {
            "slab" => format!("{}", self.d.unwrap_or(1.0)),
            _ => "n/a".to_string(),
        }
    }
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    region: RegionArgs,
    /// Curvature coupling xi; 1/6 is the conformal value.
    #[arg(long)]
    xi: Option<f64>,
    /// Comma-separated interior heights to evaluate.
    #[arg(long)]
    z: String,
    /// Override the point-splitting step (default: chosen per height).
    #[arg(long)]
    step: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    #[command(flatten)]
    region: RegionArgs,
    /// JSON file with the first smearing function.
    #[arg(long)]
    f: PathBuf,
    /// JSON file with the second smearing function.
    #[arg(long)]
    g: PathBuf,
    /// Pairing backend: "both" (default) cross-checks the momentum-space and
    /// position-space routes against each other; "momentum" or "position"
    /// runs a single route.
    #[arg(long, default_value = "both")]
    backend: String,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the random geometry of the suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run only this suite (pairing, causality, propagator, state, algebra,
    /// casimir, or singularity).
    #[arg(long)]
    suite: Option<String>,
    /// Run the full advertised sample counts instead of the compact ones.
    #[arg(long)]
    full: bool,
    /// Slab width used by the walled suites.  The massless theory is
    /// scale-invariant, so the suites are calibrated at width 1; any other
    /// finite positive value is redundant and rejected.
    #[arg(long)]
    d: Option<f64>,
    /// Write the JSON report here (the human summary always goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    region: RegionArgs,
    /// Base point "t,x,y,z" of the kernel; must lie strictly inside the region.
    #[arg(long)]
    point: String,
    /// Path endpoint "t,x,y,z": the probe approaches this point as the path
    /// parameter goes to zero.
    #[arg(long)]
    end: String,
    /// Path direction "t,x,y,z": the probe samples end + delta * dir.
    #[arg(long)]
    dir: String,
    /// Path parameters "hi,lo,count": log-spaced deltas from hi down to lo.
    #[arg(long, default_value = "0.1,0.004,10")]
    deltas: String,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = init_threads() {
        eprintln!("error: validation: {message}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Validation(_) => 2,
                Error::Numerics(_) => 3,
            })
        }
    }
}

/// Cap the worker pool from `MIRRORFIELD_THREADS` before any kernel runs.
/// Thread count never changes results — reductions merge in fixed order —
/// only how many cores compute them.
#[cfg(feature = "parallel")]
fn init_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("MIRRORFIELD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("MIRRORFIELD_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("MIRRORFIELD_THREADS must be at least 1".to_string());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("could not size the worker pool: {e}"))
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> std::result::Result<(), String> {
    // Sequential build: the env var is an upper bound and one thread obeys it.
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Profile(args) => cmd_profile(args),
        Command::Pair(args) => cmd_pair(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Probe(args) => cmd_probe(args),
    }
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

fn cmd_profile(args: ProfileArgs) -> Result<u8> {
    let region = args.region.resolve()?;
    let xi_value = args.xi.unwrap_or(1.0 / 6.0);
    let xi = CouplingXi::new(xi_value)?;
    let heights = parse_f64_list(&args.z, "--z")?;
    let request = match args.step {
        Some(h) => ProfileRequest::with_step(region, heights.clone(), xi, h)?,
        None => ProfileRequest::new(region, heights.clone(), xi)?,
    };
    let rows = request.evaluate()?;

    let mut out = String::new();
    let _ = writeln!(out, "# command: profile");
    let _ = writeln!(out, "# library_version: {LIBRARY_VERSION}");
    let _ = writeln!(out, "# region: {}", args.region.region);
    let _ = writeln!(out, "# d: {}", args.region.d_header());
    let _ = writeln!(out, "# xi: {xi_value}");
    let _ = writeln!(out, "# z_samples: {}", args.z);
    let _ = writeln!(
        out,
        "# step: {}",
        args.step.map_or("auto".to_string(), |h| format!("{h}"))
    );
    let _ = writeln!(
        out,
        "# columns: z,phi2,phi2_residual,t00,t00_residual,oracle_t00,oracle_residual"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt(row.z),
            fmt(row.phi2),
            fmt(row.phi2_residual),
            fmt(row.t00),
            fmt(row.t00_residual),
            row.oracle_t00.map_or(String::new(), |v| fmt(v)),
            row.oracle_residual.map_or(String::new(), |v| fmt(v)),
        );
    }
    emit(args.out.as_deref(), &out)?;
    Ok(0)
}

/// Fixed-width scientific notation: deterministic and precise enough to
/// round-trip every observable the profile reports.
fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn parse_f64_list(raw: &str, flag: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|piece| {
            piece.trim().parse::<f64>().map_err(|_| {
                Error::Validation(format!(
                    "{flag} expects comma-separated numbers, could not parse {piece:?}"
                ))
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// pair
// ---------------------------------------------------------------------------

fn cmd_pair(args: PairArgs) -> Result<u8> {
    let region = args.region.resolve()?;
    let f = load_test_function(&args.f)?;
    let g = load_test_function(&args.g)?;
    let cfg = PairingBackendConfig {
        backend: match args.backend.as_str() {
            "both" => PairingBackend::Both,
            "momentum" => PairingBackend::Momentum,
            "position" => PairingBackend::Position,
            other => {
                return Err(Error::Validation(format!(
                    "unknown backend {other:?}; expected both, momentum, or position"
                )))
            }
        },
        ..PairingBackendConfig::default()
    };

    let bulk = pair_e(&f, &g, &cfg)?;
    let boundary = match region {
        Region::Minkowski => None,
        _ => Some(pair_e_boundary(&region, &f, &g, &cfg)?),
    };

    let state = TwoPointPairing::with_config(region.clone(), cfg.clone())?;
    let two_point = state.vacuum_two_point(&f, &g)?;
    let image_two_point = state.image_two_point(&f, &g)?;
    let image_reversed = state.image_two_point(&g, &f)?;

    // The commutation-relation defect of the region's own kernel against the
    // region's own commutator pairing.
    let region_pair = boundary.as_ref().map_or(bulk.value, |b| b.value);
    let defect = image_two_point - image_reversed
        - num_complex_i() * num_complex::Complex64::new(region_pair, 0.0);
    let ccr_residual = defect.norm();

    // Whether every image of either support is causally disjoint from the
    // other support — the regime where the walls are invisible and the
    // boundary pairing provably equals the bulk one.
    let boundary_invisible = match region {
        Region::Minkowski => None,
        _ => Some(match (f.support_box(), g.support_box()) {
            (Some(fb), Some(gb)) => {
                reflected_causally_disjoint(&region, &fb, &gb)?
                    && reflected_causally_disjoint(&region, &gb, &fb)?
            }
            _ => true,
        }),
    };

    let doc = serde_json::json!({
        "config": {
            "command": "pair",
            "library_version": LIBRARY_VERSION,
            "region": args.region.region,
            "d": args.region.d_header(),
            "f": args.f.display().to_string(),
            "g": args.g.display().to_string(),
            "backend": {
                "mode": args.backend,
                "outer_order": cfg.outer_order,
                "radial_order": cfg.radial_order,
                "angular_order": cfg.angular_order,
                "momentum_count_scale": cfg.momentum_count_scale,
                "momentum_reach_scale": cfg.momentum_reach_scale,
                "tolerance": cfg.tolerance,
            },
        },
        "pair_E": outcome_json(&bulk),
        "pair_E_boundary": boundary.as_ref().map(outcome_json),
        "two_point": complex_json(two_point),
        "image_two_point": complex_json(image_two_point),
        "ccr_residual": ccr_residual,
        "boundary_invisible": boundary_invisible,
    });
    emit(
        args.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")),
    )?;
    Ok(0)
}

fn num_complex_i() -> num_complex::Complex64 {
    num_complex::Complex64::new(0.0, 1.0)
}

fn outcome_json(o: &PairingOutcome) -> serde_json::Value {
    serde_json::json!({
        "value": o.value,
        "momentum_value": o.momentum_value,
        "position_value": o.position_value,
        "agreement_gap": o.agreement_gap,
        "refined": o.refined,
    })
}

fn complex_json(v: num_complex::Complex64) -> serde_json::Value {
    serde_json::json!({ "re": v.re, "im": v.im })
}

fn load_test_function(path: &std::path::Path) -> Result<TestFunction> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        Error::Validation(format!("could not read test function file {}: {e}", path.display()))
    })?;
    let f: TestFunction = serde_json::from_str(&raw).map_err(|e| {
        Error::Validation(format!(
            "test function file {} is not a valid smearing record: {e}",
            path.display()
        ))
    })?;
    for term in &f.terms {
        term.validate()?;
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    if let Some(d) = args.d {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Validation(format!(
                "slab width must be positive and finite, got {d}"
            )));
        }
        if (d - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "the verification suites are calibrated at unit slab width; the massless \
                 theory is scale-invariant, so width {d} would verify nothing new — rescale \
                 lengths instead"
            )));
        }
    }
    let scale = if args.full { SuiteScale::Full } else { SuiteScale::Compact };
    let report = run_suites(args.seed, scale, args.suite.as_deref())?;

    let doc = serde_json::json!({
        "config": {
            "command": "verify",
            "library_version": LIBRARY_VERSION,
            "seed": args.seed,
            "scale": scale.label(),
            "suite": args.suite.clone().unwrap_or_else(|| "all".to_string()),
            "available_suites": SUITE_NAMES,
            "d": args.d.unwrap_or(1.0),
        },
        "report": report,
    });
    let json = format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"));

    // Human summary on stdout always; JSON follows it there unless routed to
    // a file.
    print!("{}", report.human_summary());
    match args.out.as_deref() {
        Some(path) => emit(Some(path), &json)?,
        None => print!("{json}"),
    }
    Ok(if report.passed { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

fn cmd_probe(args: ProbeArgs) -> Result<u8> {
    let region = args.region.resolve()?;
    let point = parse_point(&args.point, "--point")?;
    let end = parse_point(&args.end, "--end")?;
    let dir = parse_point(&args.dir, "--dir")?;
    let spec = parse_f64_list(&args.deltas, "--deltas")?;
    if spec.len() != 3 {
        return Err(Error::Validation(format!(
            "--deltas expects \"hi,lo,count\", got {} values",
            spec.len()
        )));
    }
    let count = spec[2];
    if !(count.fract() == 0.0 && count >= 4.0) {
        return Err(Error::Validation(format!(
            "--deltas count must be an integer of at least 4, got {count}"
        )));
    }
    let deltas = log_spaced_deltas(spec[0], spec[1], count as usize)?;

    let fit = singularity_probe(
        &region,
        &point,
        |delta| {
            SpacetimePoint::new(
                end.coords()[0] + delta * dir.coords()[0],
                end.coords()[1] + delta * dir.coords()[1],
                end.coords()[2] + delta * dir.coords()[2],
                end.coords()[3] + delta * dir.coords()[3],
            )
        },
        &deltas,
    )?;

    let mut out = String::new();
    let _ = writeln!(out, "# command: probe");
    let _ = writeln!(out, "# library_version: {LIBRARY_VERSION}");
    let _ = writeln!(out, "# region: {}", args.region.region);
    let _ = writeln!(out, "# d: {}", args.region.d_header());
    let _ = writeln!(out, "# point: {}", args.point);
    let _ = writeln!(out, "# end: {}", args.end);
    let _ = writeln!(out, "# dir: {}", args.dir);
    let _ = writeln!(out, "# deltas: {}", args.deltas);
    let _ = writeln!(out, "# columns: delta,w_abs");
    for sample in &fit.samples {
        let _ = writeln!(out, "{},{}", fmt(sample.delta), fmt(sample.magnitude));
    }
    let _ = writeln!(out, "# fitted_exponent: {}", fmt(fit.exponent));
    emit(args.out.as_deref(), &out)?;
    Ok(0)
}

fn parse_point(raw: &str, flag: &str) -> Result<SpacetimePoint> {
    let v = parse_f64_list(raw, flag)?;
    if v.len() != 4 {
        return Err(Error::Validation(format!(
            "{flag} expects \"t,x,y,z\", got {} values",
            v.len()
        )));
    }
    Ok(SpacetimePoint::new(v[0], v[1], v[2], v[3]))
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn emit(path: Option<&std::path::Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| {
            Error::Validation(format!("could not write output file {}: {e}", p.display()))
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
