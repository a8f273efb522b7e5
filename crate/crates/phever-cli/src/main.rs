use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use phever::classify::{congruence_optics, petrov_from_coefficients, ClassifyError, PetrovType};
use phever::expr;
use phever::families::{Family, FamilyId, FamilySpec};
use phever::geometry::{calibrate, frame_curvature, ConventionSet, GeometryError, MetricField};
use phever::jets::JetPoint;
use phever::verify::{run_all, run_suite, SuiteConfig, Verdict, VerificationReport, VerifyError};

// a closed stdout (`phever ... | head`) ends the process quietly
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

type C64 = Complex64;

const CALIBRATION_ENV: &str = "PHEVER_CALIBRATION";

#[derive(Parser, Debug)]
#[command(name = "phever", version, about = "Verify para-Hermite Einstein metrics: curvature, Petrov-Penrose types, optics and symmetries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List catalog families with their parameters.
    ListFamilies,
    /// Select curvature conventions from the reference space and print them.
    Calibrate {
        /// Write the calibration file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite for one family.
    Verify(VerifyArgs),
    /// Run every catalog row with default parameters.
    VerifyAll {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Petrov-Penrose types at a single point.
    Classify(PointArgs),
    /// Congruence optics at a single point.
    Optics(PointArgs),
    /// Killing residuals and the symmetry algebra of a family.
    Symmetries {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct FamilyArgs {
    /// Family id, see `list-families`.
    #[arg(long)]
    family: String,
    /// Parameter override `name=expr`; repeatable.
    #[arg(long = "set", value_name = "NAME=EXPR")]
    set: Vec<String>,
    /// Calibration file; defaults to $PHEVER_CALIBRATION, then the built-in one.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Family id; may come from `--config` instead.
    #[arg(long, required_unless_present = "config")]
    family: Option<String>,
    #[arg(long = "set", value_name = "NAME=EXPR")]
    set: Vec<String>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_einstein: Option<f64>,
    #[arg(long)]
    tol_classify: Option<f64>,
    /// TOML suite description; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Four comma-separated coordinates in the family's chart, e.g. `0.4,0.2+0.1i,1.1,0.6`.
    #[arg(long)]
    point: String,
    #[arg(long, default_value_t = 1e-6)]
    tol_classify: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_nonvanish: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Failure {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn fail(message: impl ToString) -> Failure {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Failure {
        match e {
            VerifyError::Config(_) | VerifyError::ConfigParse(_) | VerifyError::Family(_) => Failure::usage(e),
            _ => Failure::fail(e),
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Failure {
        match e {
            GeometryError::CalibrationFile { .. } | GeometryError::CalibrationIo { .. } => Failure::usage(e),
            GeometryError::CalibrationAmbiguous { .. } => Failure {
                code: 3,
                message: e.to_string(),
            },
            _ => Failure::fail(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::ListFamilies => {
            for id in FamilyId::ALL {
                out!("{}", id.signature());
            }
            Ok(0)
        }
        Command::Calibrate { out } => {
            let conv = calibrate(&ConventionSet::candidates())?;
            out!("conventions: {conv}");
            out!("fingerprint: {}", conv.fingerprint());
            let same = conv == ConventionSet::embedded();
            out!("matches built-in calibration: {}", if same { "yes" } else { "no" });
            if let Some(path) = out {
                std::fs::write(&path, conv.to_text()).map_err(|e| Failure::fail(format!("{}: {e}", path.display())))?;
                out!("written: {}", path.display());
            }
            Ok(0)
        }
        Command::Verify(args) => verify(args),
        Command::VerifyAll { seed, out, calibration } => {
            let conv = load_calibration(calibration.as_deref())?;
            let reports = run_all(seed, &conv)?;
            out!("{:<16} {:<24} {:<48} verdict", "family", "algebra", "claim");
            for r in &reports {
                let algebra = r.symmetry.algebra.as_ref().map(|a| a.to_string()).unwrap_or_else(|| "-".into());
                out!("{:<16} {:<24} {:<48} {}", r.family.as_str(), algebra, r.claim, r.verdict);
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
                write(&path, &text)?;
            }
            let ok = reports
                .iter()
                .all(|r| matches!(r.verdict, Verdict::Pass | Verdict::Nonexistent));
            let ambiguous = reports.iter().any(|r| r.verdict == Verdict::Ambiguous);
            Ok(if ok {
                0
            } else if ambiguous {
                3
            } else {
                1
            })
        }
        Command::Classify(args) => {
            let (family, pt, conv) = at_point(&args)?;
            let wd = frame_curvature(&family, &pt)?.weyl_data(&conv);
            let sd = petrov_label(&wd.c, args.tol_classify)?;
            let asd = petrov_label(&wd.cdot, args.tol_classify)?;
            out!("SD: {sd}, ASD: {asd}");
            Ok(if sd == "AMBIGUOUS" || asd == "AMBIGUOUS" { 3 } else { 0 })
        }
        Command::Optics(args) => {
            let (family, pt, _) = at_point(&args)?;
            let ed = if family.is_type_d() {
                family.ed_jets(&pt, 4)?
            } else {
                None
            };
            let rep = congruence_optics(&family, &pt, ed.as_ref(), args.tol_nonvanish).map_err(Failure::fail)?;
            out!("optics: {}", rep.symbol());
            out!("theta1 = {}, rho1 = {}", fmt_c(rep.theta1), fmt_c(rep.rho1));
            out!("theta3 = {}, rho3 = {}", fmt_c(rep.theta3), fmt_c(rep.rho3));
            Ok(0)
        }
        Command::Symmetries { family, points, seed } => {
            let conv = load_calibration(family.calibration.as_deref())?;
            let mut cfg = SuiteConfig::new(family_spec(&family)?);
            cfg.points = points;
            cfg.seed = seed;
            let report = run_suite(&cfg, &conv)?;
            let sym = &report.symmetry;
            for g in &sym.generators {
                let master = g.master_max.map(|m| format!("{m:.2e}")).unwrap_or_else(|| "-".into());
                out!("{}: {}  killing {:.2e}  reduced {}", g.name, g.vector, g.killing_max, master);
                if let Some(h) = g.proper_homothety {
                    out!("    proper homothety: {}", if h { "yes" } else { "no (requires Λ = 0)" });
                }
            }
            if let Some(err) = &sym.error {
                out!("algebra: not identified ({err})");
            }
            if let Some(a) = &sym.algebra {
                let expected = sym.expected.as_ref().map(|e| e.to_string()).unwrap_or_else(|| "-".into());
                out!("algebra: {a} (expected {expected})");
            }
            out!("symmetry: {}", if sym.passed { "PASS" } else { "FAIL" });
            Ok(if sym.passed { 0 } else { 1 })
        }
    }
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let conv = load_calibration(args.calibration.as_deref())?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let mut cfg = SuiteConfig::from_toml(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            if let Some(family) = &args.family {
                let id: FamilyId = family.parse().map_err(Failure::usage)?;
                if cfg.family.family != id {
                    cfg.family = FamilySpec::new(id);
                }
            }
            apply_sets(&mut cfg.family, &args.set)?;
            cfg
        }
        None => {
            let family = args.family.as_deref().expect("clap requires --family without --config");
            SuiteConfig::new(parse_family(family, &args.set)?)
        }
    };
    if let Some(n) = args.points {
        cfg.points = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tol_einstein {
        cfg.tolerances.einstein = t;
    }
    if let Some(t) = args.tol_classify {
        cfg.tolerances.classify = t;
    }
    let report = run_suite(&cfg, &conv)?;
    print_summary(&report);
    if let Some(path) = &args.out {
        let text = match args.format {
            Format::Json => report.to_json(),
            Format::Csv => csv_records(&report)?,
        };
        write(path, &text)?;
    }
    Ok(match report.verdict {
        Verdict::Pass | Verdict::Nonexistent => 0,
        Verdict::Fail => 1,
        Verdict::Ambiguous => 3,
    })
}

fn print_summary(r: &VerificationReport) {
    out!("family: {}", r.family.as_str());
    out!("claim: {}", r.claim);
    let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    out!("params: {}", params.join(", "));
    out!("seed: {}, points: {} ({} draws)", r.seed, r.points_requested, r.draws);
    out!("calibration: {}", r.calibration_fingerprint);
    for c in &r.checks {
        let mark = if c.passed { "ok" } else { "FAIL" };
        out!("  {:<32} {:>10.2e} <= {:.0e}  {mark}", c.name, c.worst, c.tolerance);
    }
    for l in &r.labels {
        let mark = if l.passed { "ok" } else { "FAIL" };
        out!("  {:<32} expected {} observed {}  {mark}", l.name, l.expected, l.observed.join(" "));
    }
    if let Some(a) = &r.symmetry.algebra {
        let expected = r.symmetry.expected.as_ref().map(|e| e.to_string()).unwrap_or_else(|| "-".into());
        out!("  algebra {a} (expected {expected})  {}", if r.symmetry.passed { "ok" } else { "FAIL" });
    } else if let Some(e) = &r.symmetry.error {
        out!("  algebra not identified: {e}");
    }
    out!("verdict: {}", r.verdict);
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_records(r: &VerificationReport) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "draw",
        "c1",
        "c2",
        "c3",
        "c4",
        "einstein_scalar",
        "traceless_ricci",
        "sd_residual",
        "asd_max",
        "sd_type",
        "asd_type",
        "asd_table",
        "hh_residual",
        "middle_triplet",
        "reduced_1",
        "reduced_2",
        "abel",
        "nullstring",
        "optics",
        "killing_max",
    ];
    let err = |e: csv::Error| Failure::fail(e);
    w.write_record(header).map_err(err)?;
    let t = |v: Option<PetrovType>| v.map(|t| t.to_string()).unwrap_or_else(|| "AMBIGUOUS".into());
    for p in &r.records {
        let mut row = vec![p.draw.to_string()];
        row.extend(p.point.iter().map(|z| fmt_c(*z)));
        row.extend([
            format!("{:e}", p.einstein_scalar),
            format!("{:e}", p.traceless_ricci),
            format!("{:e}", p.sd_residual),
            format!("{:e}", p.asd_max),
            t(p.sd_type),
            t(p.asd_type),
            p.asd_table.map(|t| t.to_string()).unwrap_or_default(),
            opt(p.hh_residual),
            opt(p.middle_triplet),
            opt(p.reduced.map(|v| v[0])),
            opt(p.reduced.map(|v| v[1])),
            opt(p.abel),
            format!("{:e}", p.nullstring),
            p.optics.clone().unwrap_or_default(),
            format!("{:e}", p.killing.iter().copied().fold(0.0, f64::max)),
        ]);
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::fail(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::fail(format!("{}: {e}", path.display())))?;
    out!("written: {}", path.display());
    Ok(())
}

fn load_calibration(flag: Option<&Path>) -> Result<ConventionSet, Failure> {
    let env = std::env::var_os(CALIBRATION_ENV).map(PathBuf::from);
    match flag.map(Path::to_path_buf).or(env) {
        Some(path) => Ok(ConventionSet::load(&path)?),
        None => Ok(ConventionSet::embedded()),
    }
}

fn family_spec(args: &FamilyArgs) -> Result<FamilySpec, Failure> {
    parse_family(&args.family, &args.set)
}

fn parse_family(family: &str, sets: &[String]) -> Result<FamilySpec, Failure> {
    let id: FamilyId = family.parse().map_err(Failure::usage)?;
    let mut spec = FamilySpec::new(id);
    apply_sets(&mut spec, sets)?;
    Ok(spec)
}

fn apply_sets(spec: &mut FamilySpec, sets: &[String]) -> Result<(), Failure> {
    for item in sets {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects NAME=EXPR, got `{item}`")))?;
        spec.set(name.trim(), value).map_err(Failure::usage)?;
    }
    Ok(())
}

fn parse_point(text: &str) -> Result<[C64; 4], Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(Failure::usage(format!("--point expects four coordinates, got {}", parts.len())));
    }
    let mut out = [C64::new(0.0, 0.0); 4];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = expr::parse(part)
            .and_then(|e| e.constant_value())
            .map_err(|e| Failure::usage(format!("coordinate `{part}`: {e}")))?;
    }
    Ok(out)
}

fn at_point(args: &PointArgs) -> Result<(Family, JetPoint, ConventionSet), Failure> {
    let conv = load_calibration(args.family.calibration.as_deref())?;
    let family = family_spec(&args.family)?.build().map_err(Failure::usage)?;
    let pt = JetPoint::new(family.chart(), parse_point(&args.point)?).map_err(Failure::usage)?;
    // denominators only: a point may sit where a nonvanishing claim fails
    family.check_point(&pt, 0.0)?;
    Ok((family, pt, conv))
}

fn petrov_label(cf: &[C64; 5], tol: f64) -> Result<String, Failure> {
    match petrov_from_coefficients(cf, tol) {
        Ok(p) => Ok(p.kind.to_string()),
        Err(ClassifyError::Ambiguous { .. }) => Ok("AMBIGUOUS".into()),
        Err(e) => Err(Failure::fail(e)),
    }
}
