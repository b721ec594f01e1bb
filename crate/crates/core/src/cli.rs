//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::copula::{cdf, UnitPoint};
use crate::cpower::{axiom_witness, c_power, cpower_trace, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::generator::{Archimedean, Family, Generator};
use crate::margins::{certify_df_axioms, pmf_table, StepDistribution};
use crate::output::{fmt_sig17, to_json};
use crate::verify::{verify_all, PhiShift};
use crate::volume::{
    d_increasing_check, h_volume, partition_volume_sum, sample_unit_boxes, CopulaFn, HyperBox,
    Partition2D,
};

/// Environment variable overriding the default iteration budget.
pub const N_MAX_ENV: &str = "ARCHVOL_NMAX";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "archvol",
    version,
    about = "Archimedean copulas, H-volumes, C-powers and Archimedean-axiom witnesses"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,

    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate C at a point, e.g. --point '[0.5, 0.5]'.
    Eval {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        #[arg(long)]
        point: String,
    },
    /// H-volume of one box, or a d-increasing check over boxes.
    Volume {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        /// Lower corner as a JSON array.
        #[arg(long, requires = "upper")]
        lower: Option<String>,
        /// Upper corner as a JSON array.
        #[arg(long, requires = "lower")]
        upper: Option<String>,
        /// JSON array of {"lower": [...], "upper": [...]} boxes to check.
        #[arg(long, conflicts_with_all = ["lower", "random"])]
        boxes: Option<String>,
        /// Number of seeded random boxes in [0,1]^dim to check.
        #[arg(long, conflicts_with = "lower")]
        random: Option<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Sum of cell volumes over a grid partition of [0,u] x [0,v].
    Partition {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        /// u-grid as a JSON array starting at 0.
        #[arg(long)]
        u_cuts: String,
        /// v-grid as a JSON array starting at 0.
        #[arg(long)]
        v_cuts: String,
    },
    /// f_n(u) for a given n, or a trace down to --epsilon.
    Power {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        #[arg(long)]
        u: f64,
        #[arg(long, conflicts_with = "epsilon")]
        n: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Minimal N with f_N(u) < v.
    Witness {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        v: f64,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Joint pmf table from discrete margins (CSV `x,F` or JSON `{"jumps": ...}` files).
    Margins {
        #[arg(long, value_parser = parse_generator)]
        generator: Generator,
        /// Margin file; repeat once per axis.
        #[arg(long = "margin", required = true, num_args = 1)]
        margins: Vec<PathBuf>,
        /// Random boxes sampled by the d.f. certification.
        #[arg(long, default_value_t = 10_000)]
        certify_boxes: usize,
        /// Also write the JSON summary here (csv format only).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run every invariant suite over a family/theta grid.
    Verify {
        /// Comma-separated families (default: all).
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        /// Comma-separated theta values replacing the per-family default grids.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thetas: Vec<f64>,
        /// Shift every generator's phi by 0.01 (negative control).
        #[arg(long)]
        inject_fault: bool,
    },
}

fn parse_generator(s: &str) -> std::result::Result<Generator, String> {
    Generator::from_json(s).map_err(|e| e.to_string())
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    VerificationFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::VerificationFailed => 2,
        }
    }
}

/// Exit code for an error: 2 for failed mathematical checks, 1 otherwise.
pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_verification_failure() {
        2
    } else {
        1
    }
}

/// `ARCHVOL_NMAX` if set and valid, else [`DEFAULT_N_MAX`].
pub fn default_n_max() -> Result<u64> {
    match std::env::var(N_MAX_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| {
            Error::Parse(format!("{N_MAX_ENV} must be a positive integer, got '{s}'"))
        }),
        Err(_) => Ok(DEFAULT_N_MAX),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(flag: &str, s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(format!("--{flag}: {e}")))
}

struct Emitter<'w> {
    out: &'w mut dyn Write,
    format: OutputFormat,
}

impl Emitter<'_> {
    /// JSON: the whole value. CSV: a header and rows.
    fn emit<T: Serialize>(
        &mut self,
        value: &T,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<()> {
        match self.format {
            OutputFormat::Json => writeln!(self.out, "{}", to_json(value)?)?,
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(&mut *self.out);
                w.write_record(header)?;
                for row in rows {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn f(x: f64) -> String {
    fmt_sig17(x)
}

#[derive(Serialize)]
struct ValueReport<'a> {
    point: &'a [f64],
    value: f64,
}

#[derive(Serialize)]
struct VolumeReport<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
    volume: f64,
}

#[derive(Serialize)]
struct CheckReport<'a> {
    checked: usize,
    tol: f64,
    violations: &'a [crate::volume::Violation],
}

#[derive(Serialize)]
struct PartitionReport {
    u: f64,
    v: f64,
    cells: usize,
    partition_sum: f64,
    corner_value: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct PowerReport {
    u: f64,
    n: u64,
    value: f64,
}

/// Executes one command, writing its report to `out`.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let mut em = Emitter {
        out,
        format: config.format,
    };
    match &config.command {
        Command::Eval { generator, point } => {
            let p: UnitPoint = parse_json("point", point)?;
            let value = cdf(generator, &p);
            let mut row: Vec<String> = p.coords().iter().map(|&x| f(x)).collect();
            row.push(f(value));
            let header: Vec<String> = (1..=p.dim()).map(|k| format!("u{k}")).collect();
            let mut header: Vec<&str> = header.iter().map(String::as_str).collect();
            header.push("value");
            em.emit(
                &ValueReport {
                    point: p.coords(),
                    value,
                },
                &header,
                &[row],
            )?;
            Ok(Outcome::Pass)
        }
        Command::Volume {
            generator,
            lower,
            upper,
            boxes,
            random,
            dim,
            tol,
        } => {
            if let (Some(lower), Some(upper)) = (lower, upper) {
                let b = HyperBox::new(parse_json("lower", lower)?, parse_json("upper", upper)?)?;
                check_unit_box(&b)?;
                let volume = h_volume(&CopulaFn(generator), &b)?;
                let row = vec![join(b.lower()), join(b.upper()), f(volume)];
                em.emit(
                    &VolumeReport {
                        lower: b.lower(),
                        upper: b.upper(),
                        volume,
                    },
                    &["lower", "upper", "volume"],
                    &[row],
                )?;
                return Ok(Outcome::Pass);
            }
            let sample = match (boxes, random) {
                (Some(json), _) => {
                    let bs: Vec<HyperBox> = parse_json("boxes", json)?;
                    bs.iter().try_for_each(check_unit_box)?;
                    bs
                }
                (None, Some(count)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    sample_unit_boxes(&mut rng, *dim, *count)
                }
                (None, None) => {
                    return Err(Error::Parse(
                        "volume needs --lower/--upper, --boxes or --random".into(),
                    ))
                }
            };
            let violations = d_increasing_check(&CopulaFn(generator), &sample, *tol)?;
            let rows: Vec<Vec<String>> = violations
                .iter()
                .map(|v| vec![join(v.region.lower()), join(v.region.upper()), f(v.volume)])
                .collect();
            em.emit(
                &CheckReport {
                    checked: sample.len(),
                    tol: *tol,
                    violations: &violations,
                },
                &["lower", "upper", "volume"],
                &rows,
            )?;
            Ok(if violations.is_empty() {
                Outcome::Pass
            } else {
                Outcome::VerificationFailed
            })
        }
        Command::Partition {
            generator,
            u_cuts,
            v_cuts,
        } => {
            let part =
                Partition2D::new(parse_json("u-cuts", u_cuts)?, parse_json("v-cuts", v_cuts)?)?;
            let (u, v) = part.corner();
            let partition_sum = partition_volume_sum(generator, &part);
            let corner_value = crate::copula::cdf_bivariate(generator, u, v)?;
            let report = PartitionReport {
                u,
                v,
                cells: part.cell_count(),
                partition_sum,
                corner_value,
                abs_diff: (partition_sum - corner_value).abs(),
            };
            let row = vec![
                f(u),
                f(v),
                report.cells.to_string(),
                f(partition_sum),
                f(corner_value),
                f(report.abs_diff),
            ];
            em.emit(
                &report,
                &[
                    "u",
                    "v",
                    "cells",
                    "partition_sum",
                    "corner_value",
                    "abs_diff",
                ],
                &[row],
            )?;
            Ok(Outcome::Pass)
        }
        Command::Power {
            generator,
            u,
            n,
            epsilon,
            n_max,
        } => {
            if let Some(n) = n {
                let value = c_power(generator, *u, *n)?;
                em.emit(
                    &PowerReport {
                        u: *u,
                        n: *n,
                        value,
                    },
                    &["u", "n", "value"],
                    &[vec![f(*u), n.to_string(), f(value)]],
                )?;
                return Ok(Outcome::Pass);
            }
            let Some(eps) = epsilon else {
                return Err(Error::Parse("power needs --n or --epsilon".into()));
            };
            let n_max = n_max.map_or_else(default_n_max, Ok)?;
            let trace = cpower_trace(generator, *u, *eps, n_max)?;
            let rows: Vec<Vec<String>> = trace
                .checkpoints
                .iter()
                .map(|&(n, v)| vec![n.to_string(), f(v)])
                .collect();
            em.emit(&trace, &["n", "f_n"], &rows)?;
            Ok(Outcome::Pass)
        }
        Command::Witness {
            generator,
            u,
            v,
            n_max,
        } => {
            let n_max = n_max.map_or_else(default_n_max, Ok)?;
            let w = axiom_witness(generator, *u, *v, n_max)?;
            em.emit(
                &w,
                &["u", "v", "N", "f_prev", "f_at"],
                &[vec![
                    f(w.u),
                    f(w.v),
                    w.n.to_string(),
                    f(w.f_prev),
                    f(w.f_at),
                ]],
            )?;
            Ok(Outcome::Pass)
        }
        Command::Margins {
            generator,
            margins,
            certify_boxes,
            summary,
        } => {
            let dists = margins
                .iter()
                .map(|p| {
                    StepDistribution::from_path(p)
                        .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            let grid = pmf_table(generator, dists)?;
            let report = certify_df_axioms(&grid, *certify_boxes, config.seed);
            let grid_summary = grid.summary(report.passed);
            match config.format {
                OutputFormat::Csv => {
                    grid.write_csv(&mut *em.out, fmt_sig17)?;
                    if let Some(path) = summary {
                        std::fs::write(path, to_json(&grid_summary)? + "\n")?;
                    }
                }
                OutputFormat::Json => writeln!(em.out, "{}", to_json(&grid_summary)?)?,
            }
            if !report.passed {
                log::error!("certification failed: {}", to_json(&report)?);
            }
            Ok(if report.passed {
                Outcome::Pass
            } else {
                Outcome::VerificationFailed
            })
        }
        Command::Verify {
            families,
            thetas,
            inject_fault,
        } => {
            let families: Vec<Family> = if families.is_empty() {
                Family::ALL.to_vec()
            } else {
                families.iter().map(|s| s.parse()).collect::<Result<_>>()?
            };
            let thetas = (!thetas.is_empty()).then_some(thetas.as_slice());
            let generators: Vec<Box<dyn Archimedean>> = Generator::grid(&families, thetas)
                .into_iter()
                .map(|g| -> Box<dyn Archimedean> {
                    if *inject_fault {
                        Box::new(PhiShift {
                            inner: g,
                            shift: 0.01,
                        })
                    } else {
                        Box::new(g)
                    }
                })
                .collect();
            if generators.is_empty() {
                return Err(Error::Parse(
                    "no admissible generator in the requested grid".into(),
                ));
            }
            let report = verify_all(&generators, config.seed);
            let rows: Vec<Vec<String>> = report
                .invariants
                .iter()
                .map(|r| {
                    vec![
                        r.name.to_string(),
                        r.checks.to_string(),
                        r.failures.to_string(),
                        r.skipped.to_string(),
                        r.first_counterexample.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            em.emit(
                &report,
                &[
                    "invariant",
                    "checks",
                    "failures",
                    "skipped",
                    "first_counterexample",
                ],
                &rows,
            )?;
            Ok(if report.passed {
                Outcome::Pass
            } else {
                Outcome::VerificationFailed
            })
        }
    }
}

fn check_unit_box(b: &HyperBox) -> Result<()> {
    let inside = b
        .lower()
        .iter()
        .chain(b.upper())
        .all(|x| (0.0..=1.0).contains(x));
    if inside {
        Ok(())
    } else {
        Err(Error::InvalidBox(format!(
            "{b:?} is not inside the unit hypercube"
        )))
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| f(x)).collect::<Vec<_>>().join(" ")
}
