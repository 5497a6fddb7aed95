//! Command-line front end for raycert.
//!
//! Exit codes: 0 found or passed, 2 search exhausted, 3 verification
//! failed, 4 input error. Errors go to stderr as `raycert: CODE: message`.

pub mod files;
pub mod generate;
pub mod plot;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use raycert_core::arrangements::{find_hyperplane_partition, hyperplane_multiplicity, verify_hyperplane_partition};
use raycert_core::certificates::{ball_clearance, check_theorem1};
use raycert_core::coverage::covering_multiplicity;
use raycert_core::invariant_body::projection_closure;
use raycert_core::rational::{parse_rational, rat, to_f64};
use raycert_core::search::{
    find_center_point, find_certificate, hypothesis_check, verify_center_point, CenterEvidence, HypothesisReport,
    SearchConfig,
};
use raycert_core::{Mode, SearchOutcome, VPolytope};
use serde::Serialize;

use files::{CertificateFile, Claim, InstanceFile, InstanceKind, Tolerances, FORMAT_VERSION};
use generate::{generate_instance, GenParams, Style};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Exhausted = 2,
    VerificationFailed = 3,
    InputError = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub exit: Exit,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { exit: Exit::InputError, code: "E_INPUT", message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { exit: Exit::InputError, code: "E_IO", message: message.into() }
    }

    fn verify(message: impl Into<String>) -> Self {
        CliError { exit: Exit::VerificationFailed, code: "E_VERIFY", message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message.replace('\n', " "))
    }
}

impl From<raycert_core::Error> for CliError {
    fn from(e: raycert_core::Error) -> Self {
        use raycert_core::Error as E;
        let code = match e {
            E::CapExceeded { .. } => "E_CAP",
            E::Unsupported(_) => "E_UNSUPPORTED",
            E::OnHyperplane { .. } => "E_ON_HYPERPLANE",
            E::Hull(_) => "E_HULL",
            _ => "E_INPUT",
        };
        CliError { exit: Exit::InputError, code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "raycert", version, about = "Search and verify ray-escape partitions and hyperplane partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct InArg {
    /// Instance file (JSON).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Print machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    io: InArg,
    /// Certificate output file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Search tolerance, as a decimal or fraction.
    #[arg(long, value_name = "DECIMAL")]
    tol: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report n, d, c and the size bound for a given r.
    CheckHypothesis {
        #[command(flatten)]
        io: InArg,
        #[arg(long)]
        r: usize,
    },
    /// Covering multiplicity of a body family, or hyperplane multiplicity.
    Multiplicity {
        #[command(flatten)]
        io: InArg,
    },
    /// Find r disjoint subfamilies escaping at a common point.
    FindTverberg(SearchArgs),
    /// Find a point from which every ray misses at least r bodies.
    FindCenter(SearchArgs),
    /// Find r disjoint hyperplane subfamilies whose almost bounded cells meet.
    FindHpPartition(SearchArgs),
    /// Build a body mapped into itself by every hyperplane projection.
    InvariantBody {
        #[command(flatten)]
        io: InArg,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "DECIMAL", default_value = "1e-9")]
        tol: String,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Half side of the starting cube.
        #[arg(long, default_value_t = 1)]
        seed_size: i64,
    },
    /// Re-check a certificate against its instance.
    Verify {
        #[command(flatten)]
        io: InArg,
        #[arg(long, value_name = "FILE")]
        cert: PathBuf,
    },
    /// Write a seeded instance.
    Generate {
        #[arg(long)]
        style: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Target covering multiplicity (overlapping-squares).
        #[arg(long)]
        c: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Dump planar plot data (polygons, circles, lines, cells, witness).
    ExportPlot {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        cert: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// Runs with the process streams; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return Exit::Ok as i32;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "raycert: E_USAGE: {line}");
            return Exit::InputError as i32;
        }
    };
    let result = match thread_count() {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => {
                let (mut o, mut e) = (Vec::new(), Vec::new());
                let result = pool.install(|| dispatch(cli.command, &mut o, &mut e));
                let _ = out.write_all(&o);
                let _ = err.write_all(&e);
                result
            }
            Err(e) => Err(CliError::input(format!("thread pool: {e}"))),
        },
        Ok(None) => dispatch(cli.command, out, err),
        Err(e) => Err(e),
    };
    match result {
        Ok(exit) => exit as i32,
        Err(e) => {
            let _ = writeln!(err, "raycert: {e}");
            e.exit as i32
        }
    }
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var("RT_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::input(format!("RT_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    writeln!(out, "{text}").map_err(|e| CliError::io(e.to_string()))
}

fn say(out: &mut dyn Write, line: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io(e.to_string()))
}

fn search_config(inst: &InstanceFile, args: &SearchArgs) -> Result<SearchConfig, CliError> {
    let mut cfg = match inst.kind {
        InstanceKind::Bodies => SearchConfig::default_for(&inst.family()?),
        InstanceKind::Hyperplanes => SearchConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = args.grid {
        cfg.grid_steps = grid;
    }
    if let Some(tol) = &args.tol {
        cfg.tolerance = parse_rational(tol)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_r(r: usize) -> Result<(), CliError> {
    if r == 0 {
        return Err(CliError::input("--r must be at least 1"));
    }
    Ok(())
}

fn finish_search(
    inst: &InstanceFile,
    args: &SearchArgs,
    cfg: &SearchConfig,
    outcome: SearchOutcome<Claim>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Exit, CliError> {
    match outcome {
        SearchOutcome::Found(claim) => {
            let mode = match &claim {
                Claim::TverbergRays(c) => c.mode(),
                Claim::CenterPoint(cp) => match &cp.evidence {
                    CenterEvidence::Certificate { certificate } => certificate.mode(),
                    CenterEvidence::ArcSweep { .. } => inst.family()?.mode(),
                },
                Claim::TverbergHyperplanes(_) => Mode::Exact,
            };
            let cert = CertificateFile {
                version: FORMAT_VERSION,
                instance_hash: inst.hash(),
                r: args.r,
                claim,
                mode,
                tolerances: Tolerances { tau: ball_clearance(), search: cfg.tolerance.clone() },
            };
            if let Some(path) = &args.out {
                files::write_json(path, &cert)?;
            }
            if args.io.json {
                emit(out, &cert)?;
            } else {
                let summary = match &cert.claim {
                    Claim::TverbergRays(c) => format!(
                        "found p = {:?} with subfamilies {:?}",
                        c.p,
                        c.subfamilies.iter().map(|s| &s.member_indices).collect::<Vec<_>>()
                    ),
                    Claim::CenterPoint(cp) => format!("found p = {:?}", cp.p),
                    Claim::TverbergHyperplanes(h) => {
                        format!("found partition {:?} with witness {:?}", h.partition, h.witness)
                    }
                };
                say(out, format_args!("{summary} ({:?})", cert.mode))?;
            }
            Ok(Exit::Ok)
        }
        SearchOutcome::Exhausted(e) => {
            let _ = writeln!(err, "raycert: E_EXHAUSTED: {} (examined {} candidates)", e.detail, e.candidates_examined);
            if args.io.json {
                emit(out, &SearchOutcome::<()>::Exhausted(e))?;
            }
            Ok(Exit::Exhausted)
        }
    }
}

fn map_outcome<T>(o: SearchOutcome<T>, f: impl FnOnce(T) -> Claim) -> SearchOutcome<Claim> {
    match o {
        SearchOutcome::Found(t) => SearchOutcome::Found(f(t)),
        SearchOutcome::Exhausted(e) => SearchOutcome::Exhausted(e),
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<Exit, CliError> {
    match command {
        Command::CheckHypothesis { io, r } => {
            check_r(r)?;
            let inst = InstanceFile::load(&io.input)?;
            let report = match inst.kind {
                InstanceKind::Bodies => hypothesis_check(&inst.family()?, r)?,
                InstanceKind::Hyperplanes => {
                    let planes = inst.planes()?;
                    let c = hyperplane_multiplicity(planes)?;
                    HypothesisReport::from_counts(planes.len(), inst.dimension, c, Mode::Exact, r)?
                }
            };
            if io.json {
                emit(out, &report)?;
            } else {
                say(
                    out,
                    format_args!(
                        "n = {}, d = {}, c = {} ({:?}), r = {}: bound {} {}; r prime power: {}",
                        report.n,
                        report.d,
                        report.c,
                        report.c_mode,
                        report.r,
                        report.bound_value,
                        if report.bound_satisfied { "satisfied" } else { "NOT satisfied" },
                        report.r_prime_power
                    ),
                )?;
            }
            Ok(Exit::Ok)
        }
        Command::Multiplicity { io } => {
            let inst = InstanceFile::load(&io.input)?;
            let (c, mode) = match inst.kind {
                InstanceKind::Bodies => {
                    let m = covering_multiplicity(&inst.family()?)?;
                    (m.c, m.mode)
                }
                InstanceKind::Hyperplanes => (hyperplane_multiplicity(inst.planes()?)?, Mode::Exact),
            };
            if io.json {
                emit(out, &serde_json::json!({ "c": c, "mode": mode }))?;
            } else {
                say(out, format_args!("c = {c} ({mode:?})"))?;
            }
            Ok(Exit::Ok)
        }
        Command::FindTverberg(args) => {
            check_r(args.r)?;
            let inst = InstanceFile::load(&args.io.input)?;
            let family = inst.family()?;
            let cfg = search_config(&inst, &args)?;
            let outcome = map_outcome(find_certificate(&family, args.r, &cfg)?, Claim::TverbergRays);
            finish_search(&inst, &args, &cfg, outcome, out, err)
        }
        Command::FindCenter(args) => {
            check_r(args.r)?;
            let inst = InstanceFile::load(&args.io.input)?;
            let family = inst.family()?;
            let cfg = search_config(&inst, &args)?;
            let outcome = map_outcome(find_center_point(&family, args.r, &cfg)?, Claim::CenterPoint);
            finish_search(&inst, &args, &cfg, outcome, out, err)
        }
        Command::FindHpPartition(args) => {
            check_r(args.r)?;
            let inst = InstanceFile::load(&args.io.input)?;
            let cfg = search_config(&inst, &args)?;
            let outcome = map_outcome(find_hyperplane_partition(inst.planes()?, args.r, &cfg)?, Claim::TverbergHyperplanes);
            finish_search(&inst, &args, &cfg, outcome, out, err)
        }
        Command::InvariantBody { io, out: out_path, tol, max_iter, seed_size } => {
            let inst = InstanceFile::load(&io.input)?;
            let planes = inst.planes()?;
            let tau = to_f64(&parse_rational(&tol)?);
            if seed_size <= 0 {
                return Err(CliError::input("--seed-size must be positive"));
            }
            let seed = VPolytope::cube(inst.dimension, &rat(-seed_size), &rat(seed_size));
            let res = projection_closure(planes, &seed, tau, max_iter)?;
            if let Some(path) = &out_path {
                files::write_json(path, &res)?;
            }
            if io.json {
                emit(out, &res)?;
            } else {
                say(
                    out,
                    format_args!(
                        "{} after {} iterations: {} vertices, residual {:e}",
                        if res.converged { "converged" } else { "not converged" },
                        res.iterations,
                        res.body.vertices().len(),
                        res.residual
                    ),
                )?;
            }
            if !res.converged {
                let _ = writeln!(err, "raycert: E_EXHAUSTED: no convergence within {max_iter} iterations");
                return Ok(Exit::Exhausted);
            }
            Ok(Exit::Ok)
        }
        Command::Verify { io, cert } => {
            let inst = InstanceFile::load(&io.input)?;
            let cert = CertificateFile::load(&cert)?;
            let verdict = verify(&inst, &cert);
            if io.json {
                let (passed, detail) = match &verdict {
                    Ok(()) => (true, String::new()),
                    Err(e) => (false, e.to_string()),
                };
                emit(out, &serde_json::json!({ "passed": passed, "detail": detail }))?;
            }
            verdict?;
            if !io.json {
                say(out, "certificate verified")?;
            }
            Ok(Exit::Ok)
        }
        Command::Generate { style, n, d, c, seed, out: out_path } => {
            let style: Style = style.parse()?;
            let inst = generate_instance(&GenParams { style, n, d, c_target: c, seed })?;
            match out_path {
                Some(path) => files::write_json(&path, &inst)?,
                None => emit(out, &inst)?,
            }
            Ok(Exit::Ok)
        }
        Command::ExportPlot { input, cert, out: out_path } => {
            let inst = InstanceFile::load(&input)?;
            let cert = cert.as_deref().map(CertificateFile::load).transpose()?;
            let data = plot::export_plot(&inst, cert.as_ref())?;
            match out_path {
                Some(path) => files::write_json(&path, &data)?,
                None => emit(out, &data)?,
            }
            Ok(Exit::Ok)
        }
    }
}

/// Independent re-check of a certificate file against an instance.
pub fn verify(inst: &InstanceFile, cert: &CertificateFile) -> Result<(), CliError> {
    let hash = inst.hash();
    if cert.instance_hash != hash {
        return Err(CliError {
            exit: Exit::VerificationFailed,
            code: "E_HASH_MISMATCH",
            message: format!("certificate is for instance {}, not {hash}", cert.instance_hash),
        });
    }
    check_r(cert.r)?;
    let (passed, mode, detail) = match &cert.claim {
        Claim::TverbergRays(c) => {
            let report = check_theorem1(c, &inst.family()?, cert.r)?;
            let detail = report.failures().map(|f| format!("{} {}", f.name, f.detail)).collect::<Vec<_>>().join("; ");
            (report.passed(), report.mode, detail)
        }
        Claim::CenterPoint(cp) => {
            let family = inst.family()?;
            let mode = match &cp.evidence {
                CenterEvidence::Certificate { certificate } => certificate.mode(),
                CenterEvidence::ArcSweep { .. } => family.mode(),
            };
            (verify_center_point(cp, &family, cert.r)?, mode, "some ray misses fewer than r bodies".into())
        }
        Claim::TverbergHyperplanes(h) => {
            let report = verify_hyperplane_partition(inst.planes()?, h, cert.r)?;
            let detail = report.failures().map(|f| format!("{} {}", f.name, f.detail)).collect::<Vec<_>>().join("; ");
            (report.passed(), report.mode, detail)
        }
    };
    if !passed {
        return Err(CliError::verify(detail));
    }
    if cert.mode == Mode::Exact && mode != Mode::Exact {
        return Err(CliError::verify("certificate claims exact mode but the check is approximate"));
    }
    Ok(())
}

/// Loads and verifies a pair of files.
pub fn verify_files(instance: &Path, cert: &Path) -> Result<(), CliError> {
    verify(&InstanceFile::load(instance)?, &CertificateFile::load(cert)?)
}
