use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use magflow::contact;
use magflow::cz;
use magflow::error::{Error, Result};
use magflow::flow::{self, FlowOptions, PhasePoint};
use magflow::hopf::{self, KnotPolyline, Quaternion};
use magflow::io::{self as mio, ProfileSpec};
use magflow::reduced;
use magflow::repro;

/// Contact property and dynamics of magnetic flows on surfaces of revolution.
#[derive(Parser)]
#[command(name = "magflow", version)]
struct Cli {
    /// Worker threads (MAGFLOW_JOBS takes precedence)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for sampled checks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build or validate profile functions
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Contact bounds of a profile
    #[command(subcommand)]
    Contact(ContactCmd),
    /// Birkhoff actions of the invariant tori
    #[command(subcommand)]
    Action(ActionCmd),
    /// Integrate the magnetic flow
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Conley-Zehnder indices and dynamical convexity
    #[command(subcommand)]
    Cz(CzCmd),
    /// Quaternionic double cover and linking numbers
    #[command(subcommand)]
    Hopf(HopfCmd),
    /// Reproduction runs with a verdict
    #[command(subcommand)]
    Repro(ReproCmd),
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Write a profile as JSON (spec form, or tabulated with --samples)
    Make {
        profile: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the pole conditions and normalization
    Check {
        profile: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum ContactCmd {
    /// m_gamma, certified intervals and the K_m threshold
    Bounds { profile: String },
    /// Contact verdict at one strength
    Verdict {
        profile: String,
        #[arg(long)]
        m: f64,
    },
}

#[derive(Subcommand)]
enum ActionCmd {
    /// A(I) over a uniform grid of levels, as CSV
    Scan {
        profile: String,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 100)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Trajectory samples as CSV
    Trace {
        profile: String,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        t0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta0: f64,
        #[arg(long = "T", alias = "duration", allow_hyphen_values = true)]
        duration: f64,
        /// Sampling step (default: accepted integrator steps)
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CzCmd {
    /// Index of a latitude (the fiber when m = 0)
    Latitude {
        profile: String,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 2)]
        covers: u32,
        /// Latitude with sin(phi) = sign; default +1
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        sign: i8,
        /// All latitudes, as a JSON array
        #[arg(long)]
        all: bool,
    },
    /// Period criterion for dynamical convexity
    Report {
        profile: String,
        #[arg(long)]
        m: f64,
    },
}

#[derive(Subcommand)]
enum HopfCmd {
    /// Pullback identity, antipodal invariance, Hopf linking and Q_rho convexity
    Verify {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Gauss linking number of two knots (JSON arrays of 4-vectors)
    Link { knot1: PathBuf, knot2: PathBuf },
    /// Lift a path of frames (CSV) to S^3
    Lift {
        path: PathBuf,
        /// Profile for paths given as t,phi,theta
        #[arg(long)]
        profile: Option<String>,
        /// Write the lifted knot as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReproCmd {
    /// Sign of A(I) on ellipsoids of revolution
    Ellipsoids(EllipsoidArgs),
    /// Normalized profile with a latitude of negative action
    Noncon {
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.9)]
        eps: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Convex normalized profile with m_gamma above a target
    Bigm {
        #[arg(long, default_value_t = 10.0)]
        target: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EllipsoidArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0, 4.0])]
    ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0])]
    m: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    levels: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Whether the command's verdict (if it has one) held.
enum Outcome {
    Done,
    Verdict(bool),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = configure_pool(cli.jobs) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(Outcome::Done | Outcome::Verdict(true)) => ExitCode::SUCCESS,
        Ok(Outcome::Verdict(false)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn configure_pool(jobs: Option<usize>) -> Result<()> {
    let env = match std::env::var("MAGFLOW_JOBS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("MAGFLOW_JOBS must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(jobs) {
        if n == 0 {
            return Err(Error::InvalidParameter("jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn emit_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    Ok(())
}

/// Opens `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn verdict_line(v: &str) {
    println!("verdict: {v}");
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.cmd {
        Cmd::Profile(c) => profile_cmd(c),
        Cmd::Contact(c) => contact_cmd(c),
        Cmd::Action(c) => action_cmd(c),
        Cmd::Flow(c) => flow_cmd(c),
        Cmd::Cz(c) => cz_cmd(c),
        Cmd::Hopf(c) => hopf_cmd(c, cli.seed),
        Cmd::Repro(c) => repro_cmd(c),
    }
}

fn profile_cmd(c: &ProfileCmd) -> Result<Outcome> {
    match c {
        ProfileCmd::Make { profile, samples, out } => {
            let spec = ProfileSpec::resolve(profile)?;
            let p = spec.build()?;
            let spec = match samples {
                Some(n) => ProfileSpec::tabulate(&p, *n),
                None => spec,
            };
            match out {
                Some(path) => write_json_file(path, &spec)?,
                None => emit_json(&spec)?,
            }
            eprintln!("ell = {:.12}, area = {:.12}", p.ell(), p.area());
            Ok(Outcome::Done)
        }
        ProfileCmd::Check { profile, tol } => {
            let p = mio::load_profile(profile)?;
            let report = p.validate(*tol);
            let ok = report.all_passed();
            emit_json(&json!({
                "profile": p.describe(),
                "ell": p.ell(),
                "area": p.area(),
                "validation": report,
            }))?;
            verdict_line(if ok { "valid" } else { "invalid" });
            Ok(Outcome::Verdict(ok))
        }
    }
}

fn contact_cmd(c: &ContactCmd) -> Result<Outcome> {
    match c {
        ContactCmd::Bounds { profile } => {
            let p = mio::load_profile(profile)?;
            let report = contact::contact_interval(&p);
            emit_json(&report)?;
            eprint!("{}", report.summary());
            Ok(Outcome::Done)
        }
        ContactCmd::Verdict { profile, m } => {
            let p = mio::load_profile(profile)?;
            let v = reduced::contact_verdict(&p, *m);
            emit_json(&v)?;
            verdict_line(v.name());
            let ok = matches!(v, reduced::Verdict::CertifiedContact { .. } | reduced::Verdict::NumericallyContact { .. });
            Ok(Outcome::Verdict(ok))
        }
    }
}

fn action_cmd(c: &ActionCmd) -> Result<Outcome> {
    let ActionCmd::Scan { profile, m, levels, out } = c;
    let p = mio::load_profile(profile)?;
    let rows = reduced::action_scan(&p, *m, *levels)?;
    reduced::write_scan_csv(&rows, sink(out.as_deref())?)?;
    let min = rows.iter().map(|r| r.action).fold(f64::INFINITY, f64::min);
    eprintln!("{} levels, min action {min:.10}", rows.len());
    Ok(Outcome::Done)
}

fn flow_cmd(c: &FlowCmd) -> Result<Outcome> {
    let FlowCmd::Trace { profile, m, t0, phi0, theta0, duration, dt, out } = c;
    let p = mio::load_profile(profile)?;
    let opts = FlowOptions { sample_dt: *dt, ..Default::default() };
    let tr = flow::integrate(&p, *m, PhasePoint::new(*t0, *phi0, *theta0), *duration, opts)?;
    tr.write_csv(sink(out.as_deref())?)?;
    eprintln!("{} samples, I_hat drift {:.3e}", tr.samples.len(), tr.i_drift);
    Ok(Outcome::Done)
}

fn cz_cmd(c: &CzCmd) -> Result<Outcome> {
    match c {
        CzCmd::Latitude { profile, m, covers, sign, all } => {
            let p = mio::load_profile(profile)?;
            let rows = cz::latitude_indices(&p, *m, *covers)?;
            let summary = |o: &cz::OrbitCz| {
                json!({
                    "orbit": o.orbit,
                    "covers": o.covers,
                    "interval": o.interval,
                    "index": o.index,
                    "degenerate": o.degenerate,
                    "contractible": o.contractible,
                    "det_defect": o.det_defect,
                })
            };
            if *all {
                emit_json(&rows.iter().map(summary).collect::<Vec<_>>())?;
                return Ok(Outcome::Done);
            }
            let pick = rows.iter().find(|o| match o.orbit.kind {
                cz::OrbitKind::Latitude { sign: s, .. } => s == *sign,
                _ => true,
            });
            let Some(o) = pick else {
                return Err(Error::InvalidParameter(format!("no latitude with sign {sign} at m = {m}")));
            };
            emit_json(&summary(o))?;
            Ok(Outcome::Done)
        }
        CzCmd::Report { profile, m } => {
            let p = mio::load_profile(profile)?;
            let r = cz::dynamical_convexity_report(&p, *m)?;
            emit_json(&r)?;
            eprintln!("lhs 2pi/T0 = {:.6}, rhs 1 - rho = {:.6}", r.lhs, r.rhs);
            verdict_line(if r.verdict { "dynamically_convex_evidence" } else { "criterion_not_met" });
            Ok(Outcome::Verdict(r.verdict))
        }
    }
}

fn hopf_cmd(c: &HopfCmd, seed: u64) -> Result<Outcome> {
    match c {
        HopfCmd::Verify { samples } => {
            let residual = hopf::pullback_residual(*samples, seed)?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let mut antipodal_exact = true;
            for _ in 0..*samples {
                let u = Quaternion::random_unit(&mut rng);
                antipodal_exact &= hopf::p0(u)? == hopf::p0(-u)?;
            }
            let fa = KnotPolyline::from_fn(400, Quaternion::exp_i)?;
            let fb = KnotPolyline::from_fn(400, |t| Quaternion::exp_i(t) * Quaternion::J)?;
            let hopf_lk = hopf::gauss_linking(&fa, &fb)?;
            let hess = hopf::hessian_convexity(&|_| 2.0, (*samples).min(200), seed)?;
            let ok = residual < 1e-10 && antipodal_exact && hopf_lk.abs() == 1 && (hess.min_eigenvalue - 1.0).abs() < 1e-6;
            emit_json(&json!({
                "samples": samples,
                "pullback_residual": residual,
                "antipodal_invariance": antipodal_exact,
                "hopf_fiber_linking": hopf_lk,
                "round_hessian_min_eigenvalue": hess.min_eigenvalue,
            }))?;
            verdict_line(if ok { "verified" } else { "failed" });
            Ok(Outcome::Verdict(ok))
        }
        HopfCmd::Link { knot1, knot2 } => {
            let a = mio::read_knot(knot1)?;
            let b = mio::read_knot(knot2)?;
            emit_json(&hopf::gauss_linking_with(&a, &b)?)?;
            Ok(Outcome::Done)
        }
        HopfCmd::Lift { path, profile, out } => {
            let p = profile.as_deref().map(mio::load_profile).transpose()?;
            let frames = mio::read_path(path, p.as_ref())?;
            let lift = hopf::lift_path(&frames)?;
            let knot = if lift.closes_once {
                let mut pts = lift.points.clone();
                pts.pop();
                Some(KnotPolyline::new(pts)?)
            } else {
                None
            };
            let antipodal = knot.as_ref().map(hopf::antipodal_link_parity).transpose()?;
            if let (Some(k), Some(o)) = (&knot, out) {
                std::fs::write(o, mio::knot_to_json(k)?)?;
            }
            emit_json(&json!({
                "points": lift.points.len(),
                "closed_path": lift.closed_path,
                "closes_once": lift.closes_once,
                "closes_twice": lift.closes_twice,
                "antipodal": antipodal,
            }))?;
            Ok(Outcome::Done)
        }
    }
}

fn prepare_dir(dir: &Option<PathBuf>) -> Result<()> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    Ok(())
}

fn repro_cmd(c: &ReproCmd) -> Result<Outcome> {
    match c {
        ReproCmd::Ellipsoids(a) => {
            prepare_dir(&a.out_dir)?;
            let r = repro::ellipsoids(&a.ratios, &a.m, a.levels)?;
            if let Some(d) = &a.out_dir {
                write_json_file(&d.join("ellipsoids.json"), &r)?;
                repro::write_ellipsoid_csv(&r, File::create(d.join("ellipsoid_actions.csv"))?)?;
            }
            emit_json(&r)?;
            verdict_line(r.verdict);
            Ok(Outcome::Verdict(r.all_positive))
        }
        ReproCmd::Noncon { delta, eps, out_dir } => {
            prepare_dir(out_dir)?;
            let r = repro::noncon(*delta, *eps)?;
            if let Some(d) = out_dir {
                write_json_file(&d.join("noncon.json"), &r)?;
                write_json_file(&d.join("profile.json"), &ProfileSpec::NegativeAction { delta: *delta, eps: *eps })?;
                write_json_file(&d.join("profile_samples.json"), &ProfileSpec::tabulate(&r.profile, 4000))?;
            }
            emit_json(&r)?;
            verdict_line(r.verdict);
            Ok(Outcome::Verdict(r.verdict == "not_contact_witness"))
        }
        ReproCmd::Bigm { target, out_dir } => {
            prepare_dir(out_dir)?;
            let r = repro::bigm(*target)?;
            if let Some(d) = out_dir {
                write_json_file(&d.join("bigm.json"), &r)?;
                write_json_file(&d.join("profile.json"), &ProfileSpec::Spindle { delta: r.delta, eps: r.eps })?;
                write_json_file(&d.join("profile_samples.json"), &ProfileSpec::tabulate(&r.profile, 4000))?;
                write_json_file(&d.join("contact_bounds.json"), &contact::contact_interval(&r.profile))?;
            }
            emit_json(&r)?;
            verdict_line(r.verdict);
            Ok(Outcome::Verdict(r.verdict == "convex_large_bound"))
        }
    }
}
