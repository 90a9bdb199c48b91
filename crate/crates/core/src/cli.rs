//! `qfhet` command-line front end.
//!
//! Every command is a pure function of its arguments and the scenario file,
//! so repeated runs produce byte-identical output.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::complexity::{codebook_table, table_csv, DEFAULT_N};
use crate::error::{Error, Result};
use crate::oracle::{run_suite, SuiteConfig, ValidationReport};
use crate::quantopt::{kkt_residuals, optimize, KktReport, QuantAllocation};
use crate::region::{
    boundary_sweep, direct_point, max_weighted_sum, qf_jd_constraints, region_csv, BoundaryPoint,
    Weights,
};
use crate::scenario::Scenario;
use crate::wztd::{allocate_phases, WztdAllocation};
use crate::zf::{sample_zf_noise_gains, Side, ZfNoiseReport};

pub const SWEEP_CSV_VERSION: &str = "# qfhet sweep v1";
pub const OPTIMIZE_CSV_VERSION: &str = "# qfhet optimize v1";
pub const VALIDATE_CSV_VERSION: &str = "# qfhet validate v1";
pub const MONTECARLO_CSV_VERSION: &str = "# qfhet montecarlo v1";

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "qfhet",
    version,
    about = "Quantize-forward relaying in massive MIMO HetNets"
)]
pub struct Cli {
    /// Scenario JSON file; the two-UE near layout is used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the QF region boundary and the direct-transmission corner.
    Region {
        /// Number of mu_1 values in [0, 1]; 1 means mu = (1, 0, ...).
        #[arg(long, default_value_t = 21)]
        steps: usize,
        /// Weights of UEs 2..K relative to each other.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        mu: Option<Vec<f64>>,
    },
    /// Optimal quantization, phase split, rates and KKT residuals for one mu.
    Optimize {
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        mu: Option<Vec<f64>>,
    },
    /// Re-optimize while one scenario parameter or mu_1 varies.
    Sweep {
        #[command(flatten)]
        axis: AxisArgs,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        mu: Option<Vec<f64>>,
    },
    /// Run the validation suite; exit code 1 if any check fails.
    Validate {
        /// Finite grid points per UE for the grid search.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        tol: ToleranceArgs,
    },
    /// Codebook and decoding complexity table.
    Complexity {
        #[arg(long = "k", value_delimiter = ',', default_values_t = [2usize, 3, 5, 10])]
        ks: Vec<usize>,
        /// Block length.
        #[arg(long, default_value_t = DEFAULT_N)]
        n: f64,
    },
    /// Simulated ZF noise gains against their closed forms.
    Montecarlo {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Scbs)]
        side: SideArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Scbs,
    Mcbs,
}

#[derive(Debug, Clone, Args)]
pub struct AxisArgs {
    /// mu1, snr_db, alpha, d_dr, p_r, d_r<k> or d_d<k> (k is 1-based).
    #[arg(long)]
    pub axis: String,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 21)]
    pub steps: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub tol_identity: Option<f64>,
    #[arg(long)]
    pub tol_cross_solver: Option<f64>,
    /// Relative value gap allowed against the grid search.
    #[arg(long)]
    pub tol_grid: Option<f64>,
    /// Monte Carlo acceptance in standard errors.
    #[arg(long)]
    pub mc_sigmas: Option<f64>,
}

/// What a command produced: the text to emit and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub code: u8,
}

/// Sweep axis resolved against a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Mu1,
    SnrDb,
    Alpha,
    DDr,
    PR,
    DR(usize),
    DD(usize),
}

impl Axis {
    pub fn parse(name: &str, k: usize) -> Result<Self> {
        let indexed = |prefix: &str| -> Option<Result<usize>> {
            let rest = name.strip_prefix(prefix)?;
            Some(match rest.parse::<usize>() {
                Ok(i) if (1..=k).contains(&i) => Ok(i - 1),
                _ => Err(Error::InvalidArgument(format!(
                    "axis {name}: UE index must be in 1..={k}"
                ))),
            })
        };
        match name {
            "mu1" => Ok(Axis::Mu1),
            "snr_db" => Ok(Axis::SnrDb),
            "alpha" => Ok(Axis::Alpha),
            "d_dr" => Ok(Axis::DDr),
            "p_r" => Ok(Axis::PR),
            _ => {
                if let Some(i) = indexed("d_r") {
                    i.map(Axis::DR)
                } else if let Some(i) = indexed("d_d") {
                    i.map(Axis::DD)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "unknown sweep axis {name:?}"
                    )))
                }
            }
        }
    }

    /// Scenario with this axis set to `v`. `Mu1` leaves it unchanged.
    pub fn apply(self, s: &Scenario, v: f64) -> Result<Scenario> {
        let mut s = s.clone();
        match self {
            Axis::Mu1 => return Ok(s),
            Axis::SnrDb => return Ok(s.set_snr(v)),
            Axis::Alpha => {
                // keep the UE-1 SNR fixed while the path loss changes
                let snr = s.snr_of();
                s.alpha = v;
                return s.validate().map(|s| s.set_snr(snr));
            }
            Axis::DDr => s.d_dr = v,
            Axis::PR => s.p_r = v,
            Axis::DR(i) => s.d_r[i] = v,
            Axis::DD(i) => s.d_d[i] = v,
        }
        s.validate()
    }
}

/// `mu_1 = v` with the rest split in proportion to `rest` (equal if empty).
pub fn weights_with_mu1(k: usize, v: f64, rest: &[f64]) -> Result<Weights> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidWeights(format!("mu_1 = {v} outside [0, 1]")));
    }
    if k == 1 {
        return Weights::new(vec![1.0]);
    }
    let rel: Vec<f64> = if rest.is_empty() {
        vec![1.0; k - 1]
    } else if rest.len() == k - 1 {
        rest.to_vec()
    } else {
        return Err(Error::DimensionMismatch {
            field: "mu",
            got: rest.len(),
            expected: k - 1,
        });
    };
    let total: f64 = rel.iter().sum();
    if rel.iter().any(|&r| !(r >= 0.0)) || !(total > 0.0) {
        return Err(Error::InvalidWeights(
            "relative weights must be >= 0 with a positive sum".into(),
        ));
    }
    let mut mu = vec![v];
    mu.extend(rel.iter().map(|r| (1.0 - v) * r / total));
    // absorb rounding in the last weight
    let head: f64 = mu[..k - 1].iter().sum();
    mu[k - 1] = (1.0 - head).max(0.0);
    Weights::new(mu)
}

fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    match steps {
        0 => Err(Error::InvalidArgument("steps must be >= 1".into())),
        1 => Ok(vec![from]),
        _ => Ok((0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()),
    }
}

fn load_scenario(path: Option<&PathBuf>) -> Result<Scenario> {
    match path {
        None => Ok(Scenario::two_ue_reference([25.0, 30.0])),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Scenario::from_json(&text)
        }
    }
}

fn default_weights(k: usize, mu: Option<&Vec<f64>>) -> Result<Weights> {
    match mu {
        Some(v) => {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    field: "mu",
                    got: v.len(),
                    expected: k,
                });
            }
            Weights::new(v.clone())
        }
        None => Ok(Weights::uniform(k)),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// One optimized operating point.
#[derive(Debug, Clone, Serialize)]
pub struct OperatingPoint {
    pub mu: Weights,
    pub log_lambda_s: f64,
    pub allocation: QuantAllocation,
    /// `true` where `Q` is infinite (serialized as null).
    #[serde(rename = "Q_inf")]
    pub q_inf: Vec<bool>,
    pub phases: WztdAllocation,
    pub rates: Vec<f64>,
    pub value: f64,
    pub kkt: KktReport,
}

pub fn operating_point(s: &Scenario, mu: &Weights) -> Result<OperatingPoint> {
    let g = s.link_gains();
    let allocation = optimize(s, mu)?;
    let phases = allocate_phases(&g, &allocation);
    let point = max_weighted_sum(&qf_jd_constraints(&g, &allocation.q)?, mu)?;
    let kkt = kkt_residuals(&g, mu, &allocation);
    Ok(OperatingPoint {
        mu: mu.clone(),
        log_lambda_s: g.log_lambda_s,
        q_inf: allocation.q.iter().map(|q| !q.is_relayed()).collect(),
        allocation,
        phases,
        rates: point.rates,
        value: point.value,
        kkt,
    })
}

fn point_header(k: usize, lead: &str) -> String {
    let mut cols = vec![lead.to_string()];
    for name in ["mu", "Q", "beta", "R"] {
        cols.extend((1..=k).map(|i| format!("{name}_{i}")));
    }
    cols.push("value".into());
    cols.join(",")
}

fn point_row(lead: &str, p: &OperatingPoint) -> String {
    let mut row = vec![lead.to_string()];
    row.extend(p.mu.as_slice().iter().map(|m| format!("{m:.6}")));
    row.extend(p.allocation.q.iter().map(|q| q.to_string()));
    row.extend(p.phases.beta.iter().map(|b| format!("{b:.12e}")));
    row.extend(p.rates.iter().map(|r| format!("{r:.12e}")));
    row.push(format!("{:.12e}", p.value));
    row.join(",")
}

#[derive(Debug, Serialize)]
struct RegionJson<'a> {
    qf: &'a [BoundaryPoint],
    direct: &'a [BoundaryPoint],
    #[serde(rename = "Q_inf")]
    q_inf: Vec<Vec<bool>>,
}

#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    axis: &'a str,
    values: &'a [f64],
    points: &'a [OperatingPoint],
}

pub fn cmd_region(s: &Scenario, steps: usize, rest: &[f64], format: Format) -> Result<String> {
    let k = s.k();
    let mu1 = if steps == 1 {
        vec![1.0]
    } else {
        linspace(0.0, 1.0, steps)?
    };
    let grid = mu1
        .iter()
        .map(|&v| weights_with_mu1(k, v, rest))
        .collect::<Result<Vec<_>>>()?;
    let qf = boundary_sweep(s, &grid)?;
    let direct = grid
        .iter()
        .map(|mu| direct_point(s, mu))
        .collect::<Result<Vec<_>>>()?;
    match format {
        Format::Csv => Ok(region_csv(k, &qf, &direct)),
        Format::Json => to_json(&RegionJson {
            q_inf: qf
                .iter()
                .map(|p| p.q.iter().map(|q| !q.is_relayed()).collect())
                .collect(),
            qf: &qf,
            direct: &direct,
        }),
    }
}

pub fn cmd_optimize(s: &Scenario, mu: &Weights, format: Format) -> Result<String> {
    let p = operating_point(s, mu)?;
    match format {
        Format::Json => to_json(&p),
        Format::Csv => Ok(format!(
            "{OPTIMIZE_CSV_VERSION}\n{}\n{}\n",
            point_header(s.k(), "log_lambda_s"),
            point_row(&format!("{:.12e}", p.log_lambda_s), &p)
        )),
    }
}

pub fn cmd_sweep(
    s: &Scenario,
    axis: &AxisArgs,
    mu: Option<&Vec<f64>>,
    format: Format,
) -> Result<String> {
    let k = s.k();
    let which = Axis::parse(&axis.axis, k)?;
    let values = linspace(axis.from, axis.to, axis.steps)?;
    let points = values
        .iter()
        .map(|&v| {
            let sv = which.apply(s, v)?;
            let w = match which {
                Axis::Mu1 => weights_with_mu1(k, v, mu.map_or(&[][..], |m| &m[..]))?,
                _ => default_weights(k, mu)?,
            };
            operating_point(&sv, &w)
        })
        .collect::<Result<Vec<_>>>()?;
    match format {
        Format::Json => to_json(&SweepJson {
            axis: &axis.axis,
            values: &values,
            points: &points,
        }),
        Format::Csv => {
            let mut out = format!("{SWEEP_CSV_VERSION} axis={}\n", axis.axis);
            out.push_str(&point_header(k, &axis.axis));
            out.push('\n');
            for (v, p) in values.iter().zip(&points) {
                out.push_str(&point_row(&format!("{v:.12e}"), p));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn suite_config(
    k: usize,
    seed: u64,
    grid: Option<usize>,
    trials: usize,
    tol: &ToleranceArgs,
) -> SuiteConfig {
    let mut cfg = SuiteConfig::for_k(k);
    cfg.seed = seed;
    cfg.trials = trials;
    if let Some(g) = grid {
        cfg.grid_points = g;
        cfg.grid_points_k3 = g;
    }
    let t = &mut cfg.tolerances;
    if let Some(v) = tol.tol_identity {
        t.identity = v;
    }
    if let Some(v) = tol.tol_cross_solver {
        t.cross_solver = v;
    }
    if let Some(v) = tol.tol_grid {
        t.grid_rel = v;
    }
    if let Some(v) = tol.mc_sigmas {
        t.mc_sigmas = v;
    }
    cfg
}

pub fn validation_output(report: &ValidationReport, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => {
            let mut out = format!("{VALIDATE_CSV_VERSION} pass={}\n", report.pass);
            out.push_str("name,provenance,target,reference,tolerance,pass\n");
            for c in &report.checks {
                let prov = serde_json::to_value(c.provenance)?;
                let _ = writeln!(
                    out,
                    "{},{},{:.12e},{:.12e},{:.3e},{}",
                    c.name,
                    prov.as_str().unwrap_or_default(),
                    c.target,
                    c.reference,
                    c.tolerance,
                    c.pass
                );
            }
            Ok(out)
        }
    }
}

pub fn cmd_complexity(ks: &[usize], n: f64, format: Format) -> Result<String> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument(
            "K list must be non-empty and positive".into(),
        ));
    }
    let rows = codebook_table(ks, n)?;
    match format {
        Format::Csv => Ok(table_csv(&rows, n)),
        Format::Json => to_json(&rows),
    }
}

pub fn montecarlo_output(r: &ZfNoiseReport, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(r),
        Format::Csv => {
            let mut out = format!(
                "{MONTECARLO_CSV_VERSION} trials={} seed={}\n",
                r.trials, r.seed
            );
            out.push_str("stream,mean,std_err,exact,approx,z\n");
            for st in &r.streams {
                let _ = writeln!(
                    out,
                    "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6}",
                    st.label,
                    st.mean,
                    st.std_err,
                    st.exact,
                    st.approx,
                    st.z_score()
                );
            }
            Ok(out)
        }
    }
}

/// Runs a parsed command line. Errors are input errors (exit code 2).
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let ok = |output| Outcome {
        output,
        code: EXIT_OK,
    };
    if let Command::Complexity { ks, n } = &cli.command {
        return cmd_complexity(ks, *n, cli.format.unwrap_or(Format::Csv)).map(ok);
    }
    let s = load_scenario(cli.config.as_ref())?;
    match &cli.command {
        Command::Region { steps, mu } => cmd_region(
            &s,
            *steps,
            mu.as_deref().unwrap_or(&[]),
            cli.format.unwrap_or(Format::Csv),
        )
        .map(ok),
        Command::Optimize { mu } => {
            let w = default_weights(s.k(), mu.as_ref())?;
            cmd_optimize(&s, &w, cli.format.unwrap_or(Format::Json)).map(ok)
        }
        Command::Sweep { axis, mu } => {
            cmd_sweep(&s, axis, mu.as_ref(), cli.format.unwrap_or(Format::Csv)).map(ok)
        }
        Command::Validate { grid, trials, tol } => {
            if *trials < 100 {
                return Err(Error::InvalidArgument(
                    "--trials must be at least 100".into(),
                ));
            }
            let report = run_suite(&s, &suite_config(s.k(), cli.seed, *grid, *trials, tol));
            Ok(Outcome {
                output: validation_output(&report, cli.format.unwrap_or(Format::Json))?,
                code: if report.pass {
                    EXIT_OK
                } else {
                    EXIT_VALIDATION
                },
            })
        }
        Command::Montecarlo { trials, side } => {
            let side = match side {
                SideArg::Scbs => Side::Scbs,
                SideArg::Mcbs => Side::Mcbs,
            };
            let r = sample_zf_noise_gains(&s, side, *trials, cli.seed)?;
            montecarlo_output(&r, cli.format.unwrap_or(Format::Csv)).map(ok)
        }
        Command::Complexity { .. } => unreachable!("handled above"),
    }
}

/// Parses, runs and emits. Returns the process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qfhet: {e}");
            return EXIT_INPUT;
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &outcome.output),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.output.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("qfhet: {e}");
        return EXIT_INPUT;
    }
    outcome.code
}
