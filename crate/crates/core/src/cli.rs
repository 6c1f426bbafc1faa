//! Command-line front end.
//!
//! Every artifact starts with the tool version, the command line, and the
//! master seed. JSON wraps the result as
//! `{"tool", "version", "command_line", "master_seed", "result"}`; CSV writes
//! the same three facts as `# key: value` lines before a fixed header row.
//! Exit codes: 0 success, 1 bound violation or failed check, 2 invalid input.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::approx::{
    bound_check, plan, ApproxReport, ApproximationPlan, CoefficientMethod, ErrorMethod,
};
use crate::checks::{run_all, CheckOutcome};
use crate::concepts::{gns_mc, gsa_mc, Concept, GsaEstimate};
use crate::error::{Error, Result};
use crate::learner::{learn, LearnConfig, LearnResult, DEFAULT_DEGREE_CAP};
use crate::sign::{
    appendix_integral_checks, hermite_envelope, hermite_zero_scaled, log_log_slope,
    plancherel_rotach_remainder, sign_study_row, AppendixReport, RemainderSample, SignStudyRow,
};
use crate::stats::{derive_seed, EstimateWithError};

pub const THREADS_ENV: &str = "HERMITE_L1_THREADS";

/// Seed used by `check` when none is given.
pub const DEFAULT_CHECK_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "hermite-l1",
    version,
    about = "Gaussian L1 polynomial approximation experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: $HERMITE_L1_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoefficientChoice {
    Auto,
    Exact,
    Quadrature,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise rate and degree for (epsilon, Gamma).
    ///
    /// CSV: epsilon,gamma,rho,d,tail_term
    Plan {
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
    },
    /// Build the smoothed truncation and check its L1 error against the bound.
    ///
    /// CSV: epsilon,gamma,rho,d,error,stderr,bound,pass
    Approx {
        #[arg(long)]
        concept: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        /// Surface-area bound (default: the concept's closed form).
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long, value_enum, default_value_t = CoefficientChoice::Auto)]
        coefficients: CoefficientChoice,
        /// Quadrature points per axis.
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Monte-Carlo budget for every sampled quantity.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// L1 error of the degree-d truncation of sign, for odd d.
    ///
    /// CSV: d,l1_error,parseval_residual
    SignStudy {
        /// Every odd degree up to this value.
        #[arg(long, conflicts_with = "degrees")]
        dmax: Option<usize>,
        /// Explicit odd degrees, comma separated.
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<usize>>,
    },
    /// Plancherel–Rotach remainders, envelopes, and tail integrals.
    ///
    /// CSV: record,d,x,value,bound,pass
    Asymptotics {
        #[arg(long, value_delimiter = ',', default_values_t = vec![201usize, 2001])]
        degrees: Vec<usize>,
        /// Grid points on [0, 1] for the remainder.
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Split point for the tail integrals.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
    /// Monte-Carlo Gaussian noise sensitivity.
    ///
    /// CSV: delta,mean,stderr,samples,seed,closed_form
    Gns {
        #[arg(long)]
        concept: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Monte-Carlo Gaussian surface area from shell volumes.
    ///
    /// CSV: delta,mean,stderr,hits (delta 0 is the extrapolation)
    Gsa {
        #[arg(long)]
        concept: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.01])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// L1 polynomial regression on noisy labels, then thresholding.
    ///
    /// CSV: epsilon,gamma,eta,degree,basis_size,train_l1_loss,train_error,test_error,stderr,opt_upper_bound,excess
    Learn {
        #[arg(long)]
        concept: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Surface-area bound (default: the concept's closed form).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value_t = 20_000)]
        mtrain: usize,
        #[arg(long, default_value_t = 100_000)]
        mtest: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
        degree_cap: usize,
    },
    /// Run the invariant suite; exit 1 on any failure.
    ///
    /// CSV: group,name,value,limit,pass
    Check {
        #[arg(long, default_value_t = DEFAULT_CHECK_SEED)]
        seed: u64,
    },
}

/// A rendered artifact and whether the command's checks passed.
struct Artifact {
    text: String,
    pass: bool,
}

struct Header<'a> {
    command_line: &'a [String],
    master_seed: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command_line: &'a [String],
    master_seed: Option<u64>,
    result: T,
}

fn render<T: Serialize>(
    format: Format,
    header: &Header<'_>,
    result: &T,
    csv_header: &str,
    rows: Vec<String>,
) -> Result<String> {
    match format {
        Format::Json => {
            let env = Envelope {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command_line: header.command_line,
                master_seed: header.master_seed,
                result,
            };
            let mut s = serde_json::to_string_pretty(&env)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# tool: {} {}",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION")
            );
            let _ = writeln!(s, "# command_line: {}", header.command_line.join(" "));
            match header.master_seed {
                Some(seed) => {
                    let _ = writeln!(s, "# master_seed: {seed}");
                }
                None => s.push_str("# master_seed: none\n"),
            }
            s.push_str(csv_header);
            s.push('\n');
            for r in rows {
                s.push_str(&r);
                s.push('\n');
            }
            Ok(s)
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn load_concept(path: &PathBuf) -> Result<Concept> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("concept", format!("cannot read {}: {e}", path.display())))?;
    Concept::from_json(&text)
}

fn resolve_gamma(c: &Concept, gamma: Option<f64>) -> Result<f64> {
    gamma.or_else(|| c.gsa_closed_form()).ok_or(Error::invalid(
        "gamma",
        "no closed-form surface area for this concept; pass --gamma",
    ))
}

#[derive(Serialize)]
struct PlanOut {
    #[serde(flatten)]
    plan: ApproximationPlan,
    tail_term: f64,
}

#[derive(Serialize)]
struct ApproxOut {
    epsilon: f64,
    gamma: f64,
    /// `measured_l1_error <= epsilon + statistical_slack + coefficient_slack`.
    within_epsilon: bool,
    report: ApproxReport,
}

#[derive(Serialize)]
struct SignStudyOut {
    rows: Vec<SignStudyRow>,
    log_log_slope: Option<f64>,
}

#[derive(Serialize)]
struct EnvelopeRow {
    d: usize,
    argmax_t: f64,
    max: f64,
    bound: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SupRow {
    d: usize,
    sup_abs_r: f64,
    /// Ratio to the previous degree's supremum.
    ratio_to_previous: Option<f64>,
}

#[derive(Serialize)]
struct AsymptoticsOut {
    remainder: Vec<RemainderSample>,
    sup: Vec<SupRow>,
    envelope: Vec<EnvelopeRow>,
    zero_scaled: Vec<(usize, f64)>,
    appendix: Vec<AppendixReport>,
}

#[derive(Serialize)]
struct GnsOut {
    delta: f64,
    estimate: EstimateWithError,
    closed_form: Option<f64>,
}

#[derive(Serialize)]
struct GsaOut {
    #[serde(flatten)]
    estimate: GsaEstimate,
    closed_form: Option<f64>,
}

#[derive(Serialize)]
struct CheckOut {
    all_pass: bool,
    checks: Vec<CheckOutcome>,
}

fn execute(command: &Command, format: Format, command_line: &[String]) -> Result<Artifact> {
    match command {
        Command::Plan { epsilon, gamma } => {
            let p = plan(*epsilon, *gamma)?;
            let out = PlanOut {
                plan: p,
                tail_term: p.tail_term(),
            };
            let row = format!("{epsilon},{gamma},{},{},{}", p.rho, p.degree, out.tail_term);
            let header = Header {
                command_line,
                master_seed: None,
            };
            Ok(Artifact {
                text: render(
                    format,
                    &header,
                    &out,
                    "epsilon,gamma,rho,d,tail_term",
                    vec![row],
                )?,
                pass: true,
            })
        }
        Command::Approx {
            concept,
            epsilon,
            gamma,
            coefficients,
            points,
            samples,
            seed,
        } => {
            let c = load_concept(concept)?;
            let gamma = resolve_gamma(&c, *gamma)?;
            let p = plan(*epsilon, gamma)?;
            let mc = CoefficientMethod::MonteCarlo {
                samples: *samples,
                seed: derive_seed(*seed, 1),
            };
            let method = match coefficients {
                CoefficientChoice::Auto => CoefficientMethod::default_for(&c).unwrap_or(mc),
                CoefficientChoice::Exact => CoefficientMethod::Exact,
                CoefficientChoice::Quadrature => CoefficientMethod::Quadrature {
                    points_per_axis: *points,
                },
                CoefficientChoice::Mc => mc,
            };
            let error_method = ErrorMethod::default_for(&c, *samples, derive_seed(*seed, 2));
            let gns = match c.gns_closed_form(1.0 - p.rho) {
                Some(_) => None,
                None => Some(gns_mc(&c, 1.0 - p.rho, *samples, derive_seed(*seed, 3))?),
            };
            let report = bound_check(&c, &p, method, error_method, gns)?;
            let within_epsilon = report.measured_l1_error.mean
                <= epsilon + report.statistical_slack + report.coefficient_slack;
            let row = format!(
                "{epsilon},{gamma},{},{},{},{},{},{}",
                p.rho,
                p.degree,
                report.measured_l1_error.mean,
                report.measured_l1_error.stderr,
                report.bound,
                report.pass
            );
            let pass = report.pass;
            let out = ApproxOut {
                epsilon: *epsilon,
                gamma,
                within_epsilon,
                report,
            };
            let header = Header {
                command_line,
                master_seed: Some(*seed),
            };
            Ok(Artifact {
                text: render(
                    format,
                    &header,
                    &out,
                    "epsilon,gamma,rho,d,error,stderr,bound,pass",
                    vec![row],
                )?,
                pass,
            })
        }
        Command::SignStudy { dmax, degrees } => {
            let degrees: Vec<usize> = match (dmax, degrees) {
                (_, Some(list)) => list.clone(),
                (Some(m), None) => (1..=*m).step_by(2).collect(),
                (None, None) => return Err(Error::invalid("dmax", "pass --dmax or --degrees")),
            };
            if degrees.is_empty() {
                return Err(Error::invalid("degrees", "empty degree list"));
            }
            let rows: Vec<SignStudyRow> = degrees
                .iter()
                .map(|&d| sign_study_row(d))
                .collect::<Result<_>>()?;
            let slope = (rows.len() >= 2).then(|| {
                let xs: Vec<f64> = rows.iter().map(|r| r.d as f64).collect();
                let ys: Vec<f64> = rows.iter().map(|r| r.l1_error).collect();
                log_log_slope(&xs, &ys)
            });
            let lines = rows
                .iter()
                .map(|r| format!("{},{},{}", r.d, r.l1_error, r.parseval_residual))
                .collect();
            let out = SignStudyOut {
                rows,
                log_log_slope: slope,
            };
            let header = Header {
                command_line,
                master_seed: None,
            };
            Ok(Artifact {
                text: render(format, &header, &out, "d,l1_error,parseval_residual", lines)?,
                pass: true,
            })
        }
        Command::Asymptotics {
            degrees,
            points,
            tau,
        } => {
            if degrees.is_empty() || *points < 2 {
                return Err(Error::invalid(
                    "degrees",
                    "need at least one degree and two grid points",
                ));
            }
            let mut out = AsymptoticsOut {
                remainder: Vec::new(),
                sup: Vec::new(),
                envelope: Vec::new(),
                zero_scaled: Vec::new(),
                appendix: Vec::new(),
            };
            let mut lines = Vec::new();
            let mut pass = true;
            let mut previous: Option<f64> = None;
            for &d in degrees {
                let mut sup = 0.0f64;
                for i in 0..*points {
                    let x = i as f64 / (*points - 1) as f64;
                    let s = plancherel_rotach_remainder(d, x)?;
                    sup = sup.max(s.r.abs());
                    lines.push(format!("remainder,{d},{x},{},{},", s.r, s.bound));
                    out.remainder.push(s);
                }
                let ratio = previous.map(|p| sup / p);
                lines.push(format!("sup_abs_remainder,{d},,{sup},{},", opt(ratio)));
                out.sup.push(SupRow {
                    d,
                    sup_abs_r: sup,
                    ratio_to_previous: ratio,
                });
                previous = Some(sup);

                let tmax = (d as f64).powf(1.0 / 6.0);
                let (argmax_t, max) = (0..=400)
                    .map(|i| {
                        let t = tmax * i as f64 / 400.0;
                        (t, hermite_envelope(d, t))
                    })
                    .fold(
                        (0.0, f64::NEG_INFINITY),
                        |a, b| if b.1 > a.1 { b } else { a },
                    );
                let ok = max <= 2.0;
                pass &= ok;
                lines.push(format!("envelope_max,{d},{argmax_t},{max},2,{ok}"));
                out.envelope.push(EnvelopeRow {
                    d,
                    argmax_t,
                    max,
                    bound: 2.0,
                    pass: ok,
                });
                let even = d - d % 2;
                if even > 0 {
                    let z = hermite_zero_scaled(even);
                    lines.push(format!("zero_scaled,{even},0,{z},1,"));
                    out.zero_scaled.push((even, z));
                }
                let a = appendix_integral_checks(d, *tau)?;
                lines.push(format!(
                    "small_t_integral,{d},{},{},{},{}",
                    a.tau,
                    a.small_t,
                    opt(a.small_t_bound),
                    a.small_t_pass.map(|b| b.to_string()).unwrap_or_default()
                ));
                lines.push(format!(
                    "large_t_integral,{d},{},{},{},{}",
                    a.tau, a.large_t, a.large_t_bound, a.large_t_pass
                ));
                pass &= a.large_t_pass && a.small_t_pass.unwrap_or(true);
                out.appendix.push(a);
            }
            let header = Header {
                command_line,
                master_seed: None,
            };
            Ok(Artifact {
                text: render(format, &header, &out, "record,d,x,value,bound,pass", lines)?,
                pass,
            })
        }
        Command::Gns {
            concept,
            delta,
            samples,
            seed,
        } => {
            let c = load_concept(concept)?;
            let estimate = gns_mc(&c, *delta, *samples, *seed)?;
            let closed_form = c.gns_closed_form(*delta);
            let row = format!(
                "{delta},{},{},{},{},{}",
                estimate.mean,
                estimate.stderr,
                estimate.samples,
                estimate.seed,
                opt(closed_form)
            );
            let out = GnsOut {
                delta: *delta,
                estimate,
                closed_form,
            };
            let header = Header {
                command_line,
                master_seed: Some(*seed),
            };
            Ok(Artifact {
                text: render(
                    format,
                    &header,
                    &out,
                    "delta,mean,stderr,samples,seed,closed_form",
                    vec![row],
                )?,
                pass: true,
            })
        }
        Command::Gsa {
            concept,
            deltas,
            samples,
            seed,
        } => {
            let c = load_concept(concept)?;
            let estimate = gsa_mc(&c, deltas, *samples, *seed)?;
            let mut lines: Vec<String> = estimate
                .shells
                .iter()
                .map(|s| {
                    format!(
                        "{},{},{},{}",
                        s.delta, s.estimate.mean, s.estimate.stderr, s.hits
                    )
                })
                .collect();
            lines.push(format!(
                "0,{},{},",
                estimate.estimate.mean, estimate.estimate.stderr
            ));
            let out = GsaOut {
                estimate,
                closed_form: c.gsa_closed_form(),
            };
            let header = Header {
                command_line,
                master_seed: Some(*seed),
            };
            Ok(Artifact {
                text: render(format, &header, &out, "delta,mean,stderr,hits", lines)?,
                pass: true,
            })
        }
        Command::Learn {
            concept,
            epsilon,
            gamma,
            eta,
            mtrain,
            mtest,
            seed,
            degree_cap,
        } => {
            let c = load_concept(concept)?;
            let gamma = resolve_gamma(&c, *gamma)?;
            let mut config = LearnConfig::new(*epsilon, gamma, *eta, *mtrain, *mtest, *seed);
            config.degree_cap = *degree_cap;
            let r: LearnResult = learn(&c, &config)?;
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
            let row = format!(
                "{epsilon},{gamma},{eta},{},{},{},{},{},{},{},{}",
                r.degree,
                r.basis_size,
                r.train_l1_loss,
                r.train_error,
                r.test_error.mean,
                r.test_error.stderr,
                r.opt_upper_bound,
                r.excess
            );
            let header = Header {
                command_line,
                master_seed: Some(*seed),
            };
            Ok(Artifact {
                text: render(
                    format,
                    &header,
                    &r,
                    "epsilon,gamma,eta,degree,basis_size,train_l1_loss,train_error,test_error,stderr,opt_upper_bound,excess",
                    vec![row],
                )?,
                pass: true,
            })
        }
        Command::Check { seed } => {
            let checks = run_all(*seed)?;
            let all_pass = checks.iter().all(|c| c.pass);
            let lines = checks
                .iter()
                .map(|c| format!("{},{},{},{},{}", c.group, c.name, c.value, c.limit, c.pass))
                .collect();
            let out = CheckOut { all_pass, checks };
            let header = Header {
                command_line,
                master_seed: Some(*seed),
            };
            Ok(Artifact {
                text: render(format, &header, &out, "group,name,value,limit,pass", lines)?,
                pass: all_pass,
            })
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::invalid("threads", format!("{THREADS_ENV}={v} is not a count"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::invalid("threads", "must be positive"));
        }
        // Fails only if a pool already exists, which keeps the existing one.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command_line: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = configure_threads(cli.global.threads)
        .and_then(|()| execute(&cli.command, cli.global.format, &command_line))
        .and_then(|artifact| {
            match &cli.global.output {
                Some(path) => std::fs::write(path, &artifact.text)?,
                None => print!("{}", artifact.text),
            }
            Ok(artifact.pass)
        });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
