//! `kgamma` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use kgamma::algebra::{closed_form, gram_expand_q, reduce, AWord};
use kgamma::jacobi::{jacobi_coefficients_with, limit_profile, JacobiOptions};
use kgamma::numeric::parse_float;
use kgamma::oracle::{compare_jacobi, MomentQuadrature};
use kgamma::presets::{load_preset, PRESET_NAMES};
use kgamma::tower::{basic_intervals, chebyshev_nodes};
use kgamma::widom::{widom_dyadic_closed, widom_from_table, WidomSeries};
use kgamma::{Error, Float, GammaSpec, DEFAULT_PRECISION};

mod output;

pub use output::{Cell, Format, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_PRECISION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "kgamma",
    version,
    about = "Orthogonal polynomials, Jacobi parameters and Widom factors on weakly equilibrium Cantor sets"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Inline gamma sequence: const:<v>, periodic:<v1,...>, list:<v1,...>;tail=const:<v>
    #[arg(long, global = true, conflicts_with_all = ["config", "preset"])]
    gamma: Option<String>,
    /// TOML file with prefix, [tail] kind/values and optional precision_bits
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in sequence (see `kgamma presets`)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Levels s_1 < s_2 < ... for example4-sparse, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    sparse: Vec<u32>,
    /// Working precision in bits
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(64..=8192))]
    precision: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of standard output
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Logarithmic capacity of K(gamma)
    Capacity,
    /// Basic intervals I_{j,s} of the level-s set
    Intervals {
        #[arg(long)]
        level: u32,
    },
    /// Zeros of Q_{2^s}, the support of the counting measure
    Nodes {
        #[arg(long)]
        level: u32,
    },
    /// Jacobi parameters a_1..a_N
    Jacobi {
        #[arg(long)]
        n: usize,
        /// Resume from and periodically save to this file
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Ceiling for automatic precision doubling
        #[arg(long)]
        max_precision: Option<u32>,
    },
    /// Widom factors W_n, or the dyadic closed form with --dyadic
    Widom {
        #[arg(long, required_unless_present = "dyadic")]
        n: Option<usize>,
        #[arg(long, requires = "smax")]
        dyadic: bool,
        #[arg(long)]
        smax: Option<u32>,
    },
    /// Expansion of Q_n over products of Q_{2^k}
    Qpoly {
        #[arg(long)]
        n: u64,
        /// Evaluate Q_n at this point instead
        #[arg(long)]
        at: Option<String>,
    },
    /// Integral of a product of Q_{2^k}, given as level:exponent pairs
    Moment {
        #[arg(long)]
        aword: String,
        /// Also integrate against the counting measure at this level
        #[arg(long)]
        quadrature: Option<u32>,
    },
    /// Samples a_{j*2^s+n} and their distance from a_n
    Limits {
        #[arg(long)]
        j: usize,
        #[arg(long)]
        nn: usize,
        #[arg(long, default_value_t = 1)]
        smin: u32,
        #[arg(long)]
        smax: u32,
    },
    /// Compares the recursion with the Stieltjes oracle; exits 1 on failure
    Check {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Lists the built-in sequences
    Presets,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::NoClosedForm | Error::Internal(_) => EXIT_DOMAIN,
        Error::PrecisionExhausted { .. } => EXIT_PRECISION,
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

fn load_spec(args: &RunArgs) -> Result<GammaSpec, Error> {
    let precision = args.precision;
    let spec = match (&args.gamma, &args.config, &args.preset) {
        (Some(inline), None, None) => {
            GammaSpec::parse_inline(inline, precision.unwrap_or(DEFAULT_PRECISION))?
        }
        (None, Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let spec = GammaSpec::from_toml_str(&text)?;
            match precision {
                Some(p) => spec.with_precision(p)?,
                None => spec,
            }
        }
        (None, None, Some(name)) => {
            load_preset(name, &args.sparse, precision.unwrap_or(DEFAULT_PRECISION))?
        }
        _ => {
            return Err(Error::Config(
                "give exactly one of --gamma, --config or --preset".into(),
            ))
        }
    };
    if !(64..=8192).contains(&spec.precision()) {
        return Err(Error::Config(format!(
            "precision {} is outside 64..=8192",
            spec.precision()
        )));
    }
    Ok(spec)
}

fn header(report: &mut Report, spec: &GammaSpec) {
    report.meta("gamma", spec.canonical());
    report.meta("precision_bits", spec.precision().to_string());
    if let Some(note) = spec.note() {
        report.meta("note", note);
    }
}

fn execute(command: &Command, args: &RunArgs) -> Result<Report, Error> {
    if let Command::Presets = command {
        let mut report = Report::new("presets", &["name", "gamma", "note"]);
        let default_levels = [10, 20, 40];
        for name in PRESET_NAMES {
            let levels: &[u32] = if args.sparse.is_empty() { &default_levels } else { &args.sparse };
            let spec = load_preset(name, levels, DEFAULT_PRECISION)?;
            report.row(vec![
                Cell::Text(name.into()),
                Cell::Text(spec.canonical()),
                Cell::Text(spec.note().unwrap_or("").into()),
            ]);
        }
        return Ok(report);
    }
    let spec = load_spec(args)?;
    let prec = spec.precision();
    let report = match command {
        Command::Presets => unreachable!(),
        Command::Capacity => {
            let mut r = Report::new("capacity", &["quantity", "value", "log2_value"]);
            header(&mut r, &spec);
            let cap = spec.capacity()?;
            r.row(vec![Cell::Text("capacity".into()), Cell::value(&cap), Cell::log2(&cap)]);
            r
        }
        Command::Intervals { level } => {
            let mut r = Report::new("intervals", &["j", "left", "right", "length"]);
            header(&mut r, &spec);
            r.meta("level", level.to_string());
            for (j, iv) in basic_intervals(&spec, *level)?.iter().enumerate() {
                r.row(vec![
                    Cell::Int(j as u64 + 1),
                    Cell::real(&iv.left),
                    Cell::real(&iv.right),
                    Cell::real(&iv.length()),
                ]);
            }
            r
        }
        Command::Nodes { level } => {
            let mut r = Report::new("nodes", &["k", "x_k"]);
            header(&mut r, &spec);
            r.meta("level", level.to_string());
            let mut nodes = chebyshev_nodes(&spec, *level)?.nodes;
            nodes.sort_by(|a, b| a.partial_cmp(b).expect("nodes are finite"));
            for (k, x) in nodes.iter().enumerate() {
                r.row(vec![Cell::Int(k as u64 + 1), Cell::real(x)]);
            }
            r
        }
        Command::Jacobi { n, checkpoint, max_precision } => {
            let mut r = Report::new("jacobi", &["n", "a_n", "log2_a_n"]);
            header(&mut r, &spec);
            let options = JacobiOptions {
                max_precision_bits: *max_precision,
                checkpoint: checkpoint.clone(),
            };
            let table = jacobi_coefficients_with(&spec, *n, &options)?;
            r.meta("loss_high_water_bits", format!("{:.3}", table.loss_high_water()));
            for i in 1..=table.len() {
                let a = table.log_a(i);
                r.row(vec![Cell::Int(i as u64), Cell::value(&a), Cell::log2(&a)]);
            }
            r
        }
        Command::Widom { n, dyadic, smax } => {
            if *dyadic {
                let smax = smax.expect("clap enforces --smax");
                let mut r = Report::new("widom", &["s", "n", "W_n", "log2_W_n"]);
                header(&mut r, &spec);
                r.meta("form", "dyadic closed form, s = 1..smax");
                for s in 1..=smax {
                    let w = widom_dyadic_closed(&spec, s)?;
                    let idx = 1u64.checked_shl(s).map_or_else(|| format!("2^{s}"), |v| v.to_string());
                    r.row(vec![Cell::Int(s as u64), Cell::Text(idx), Cell::value(&w), Cell::log2(&w)]);
                }
                r
            } else {
                let n = n.ok_or_else(|| Error::Config("widom needs --n or --dyadic".into()))?;
                let mut r = Report::new("widom", &["n", "W_n", "log2_W_n", "is_dyadic"]);
                header(&mut r, &spec);
                let table = jacobi_coefficients_with(&spec, n, &JacobiOptions::default())?;
                let series = widom_from_table(&spec, &table)?;
                for i in 1..=series.len() {
                    let w = series.w(i);
                    r.row(vec![
                        Cell::Int(i as u64),
                        Cell::value(&w),
                        Cell::log2(&w),
                        Cell::Bool(WidomSeries::is_dyadic(i)),
                    ]);
                }
                r
            }
        }
        Command::Qpoly { n, at } => {
            let expansion = gram_expand_q(&spec, *n)?;
            if let Some(at) = at {
                let x = parse_float(at, prec)?;
                let mut r = Report::new("qpoly", &["x", "Q_n(x)", "log2_abs"]);
                header(&mut r, &spec);
                r.meta("n", n.to_string());
                let v = expansion.eval(&spec, &x);
                r.row(vec![Cell::real(&x), Cell::real(&v), Cell::log2_abs(&v)]);
                r
            } else {
                let mut r = Report::new("qpoly", &["j", "degree", "coefficient", "log2_abs"]);
                header(&mut r, &spec);
                r.meta("n", n.to_string());
                r.meta("norm_sq", kgamma::numeric::format_decimal(&expansion.norm_sq.value()));
                r.meta("basis", "B_m = prod Q_{2^k}^{i_k} over the binary digits of m");
                for (j, (deg, c)) in expansion.terms().iter().enumerate() {
                    r.row(vec![Cell::Int(j as u64), Cell::Int(*deg), Cell::real(c), Cell::log2_abs(c)]);
                }
                r
            }
        }
        Command::Moment { aword, quadrature } => {
            let word = AWord::parse(aword)?;
            let mut r = Report::new("moment", &["method", "value", "log2_value"]);
            header(&mut r, &spec);
            r.meta("aword", word.to_string());
            let mut push = |name: &str, v: Float| {
                let log2 = Cell::log2_abs(&v);
                r.row(vec![Cell::Text(name.into()), Cell::real(&v), log2]);
            };
            push("closed", closed_form(&word).to_float(&spec));
            push("reduce", reduce(&word)?.to_float(&spec));
            if let Some(level) = quadrature {
                let top = word.top_level().unwrap_or(0);
                let quad = MomentQuadrature::new(&spec, *level, top)?;
                push("quadrature", quad.moment(&word)?);
            }
            r
        }
        Command::Limits { j, nn, smin, smax } => {
            if smin > smax {
                return Err(Error::Config("--smin exceeds --smax".into()));
            }
            let mut r = Report::new("limits", &["s", "index", "a", "deviation"]);
            header(&mut r, &spec);
            r.meta("j", j.to_string());
            r.meta("nn", nn.to_string());
            r.meta("horizon", format!("s = {smin}..{smax}"));
            for sample in limit_profile(&spec, *j, *nn, *smin..=*smax)? {
                r.row(vec![
                    Cell::Int(sample.s as u64),
                    Cell::Int(sample.index as u64),
                    Cell::real(&sample.a),
                    Cell::real(&sample.deviation),
                ]);
            }
            r
        }
        Command::Check { level, m, tol } => {
            let c = compare_jacobi(&spec, *level, *m, *tol)?;
            let mut r = Report::new(
                "check",
                &[
                    "level",
                    "m",
                    "tol",
                    "max_deviation",
                    "worst_index",
                    "b_max_deviation",
                    "cauchy_level",
                    "cauchy_max",
                    "pass",
                ],
            );
            header(&mut r, &spec);
            r.row(vec![
                Cell::Int(*level as u64),
                Cell::Int(*m as u64),
                Cell::Real(format!("{tol:e}")),
                Cell::real(&c.max_deviation),
                Cell::Int(c.worst_index as u64),
                Cell::real(&c.b_max_deviation),
                c.cauchy_level.map_or(Cell::Text(String::new()), |l| Cell::Int(l as u64)),
                c.cauchy_max.as_ref().map_or(Cell::Text(String::new()), Cell::real),
                Cell::Bool(c.pass),
            ]);
            r
        }
    };
    Ok(report)
}

fn emit(report: &Report, args: &RunArgs, out: &mut dyn Write) -> Result<(), Error> {
    match &args.output {
        Some(path) => {
            let mut buf = Vec::new();
            report.write(args.format, &mut buf)?;
            fs::write(path, buf)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => Ok(report.write(args.format, out)?),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = execute(&cli.command, &cli.run).and_then(|report| {
        emit(&report, &cli.run, out)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            if let Command::Check { .. } = cli.command {
                let passed = matches!(report.rows[0].last(), Some(Cell::Bool(true)));
                if !passed {
                    let _ = writeln!(err, "kgamma: check failed");
                    return EXIT_DOMAIN;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "kgamma: {e}");
            exit_code(&e)
        }
    }
}
