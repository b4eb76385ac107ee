use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sosub_cli::config::{ExperimentConfig, FileConfig, FlagOverrides, OutputFormat, PRECISION_ENV};
use sosub_cli::experiments as exp;
use sosub_cli::CliError;
use sosub_core::bounds::{compute_ub, compute_ubpf, BoundKind, SolverOptions};
use sosub_core::measures::MeasureSpec;
use sosub_core::numerics::BigReal;
use sosub_core::polyring::Polynomial;

#[derive(Parser)]
#[command(name = "sosub", version, about = "Upper bounds for polynomial minimization from SOS densities")]
struct Cli {
    /// Working precision in bits [default: $SOSUB_PRECISION_BITS, else 512]
    #[arg(long, global = true)]
    precision_bits: Option<usize>,
    /// Directory for CSV and SVG output [default: results]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Highest level for sequence experiments
    #[arg(long, global = true)]
    r_max: Option<u32>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// TOML file with defaults for any of the above, plus `[grid]` and `plateau_threshold`
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ub,
    Ubpf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one bound and print it as a CSV row
    Bound {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Objective, e.g. "x1^2+x1^6"
        #[arg(long)]
        f: Option<String>,
        /// Measure, e.g. "gamma:alpha=2,n=1" or "box:-1..1"
        #[arg(long)]
        measure: Option<String>,
        /// Level: densities of degree at most 2r (ub) or in f of degree at most 2r (ubpf)
        #[arg(long)]
        r: u32,
    },
    /// Push-forward and standard bounds for x^2+x^6 and x^6 under Gamma_2
    Table1,
    /// ub(x^2, Gamma_alpha, r) for alpha < 1 against the Gamma_2 control
    NonconvLsl {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Push-forward against standard bounds for x^2 + x^(2(ceil(alpha)+1)) and the pure power
    NonconvPf {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
    },
    /// Compare the push-forward densities of g under Gamma_alpha and x^2 under Gamma_beta
    DensityCompare {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        d: u32,
        #[arg(long, default_value_t = 0.95)]
        beta: f64,
        /// Even polynomial to use instead of x^2 + x^(2d)
        #[arg(long)]
        g: Option<String>,
    },
    /// Derivative-to-mass ratio of the optimal densities of ub(x^2, Gamma_alpha, r)
    DerivRatio {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Also run alpha = 2 for contrast
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        control: bool,
    },
    /// Convergence of both bounds for x1 on [-1, 1]
    CompactRate,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let flags = FlagOverrides {
        precision_bits: cli.precision_bits,
        output_dir: cli.out_dir.clone(),
        r_max: cli.r_max,
        format: cli.format,
    };
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;
    let env = std::env::var(PRECISION_ENV).ok();
    ExperimentConfig::resolve(&flags, file, env.as_deref())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn bound(cfg: &ExperimentConfig, kind: Kind, f: Option<&str>, measure: Option<&str>, r: u32) -> Result<(), CliError> {
    let p = cfg.precision_bits;
    let f_text = f.or(cfg.f.as_deref()).ok_or_else(|| CliError::Usage("missing --f".into()))?;
    let mu_text = measure.or(cfg.measure.as_deref()).ok_or_else(|| CliError::Usage("missing --measure".into()))?;
    let mu = MeasureSpec::parse(mu_text, p).map_err(|e| CliError::Usage(e.to_string()))?;
    let f = Polynomial::parse(f_text, mu.n_vars(), p).map_err(|e| CliError::Usage(format!("{f_text:?}: {e}")))?;
    let opts = SolverOptions::with_precision(p);
    let (kind, res) = match kind {
        Kind::Ub => (BoundKind::Standard, compute_ub(&f, &mu, r, &opts)),
        Kind::Ubpf => (BoundKind::Pushforward, compute_ubpf(&f, &mu, r, &opts)),
    };
    let res = res.map_err(|e| CliError::Solver(e.to_string()))?;
    let digits = BigReal::decimal_digits_for(res.diagnostics.precision_bits);
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let record = [
        kind.label().to_string(),
        f_text.to_string(),
        mu_text.to_string(),
        r.to_string(),
        res.value.to_decimal_string(digits),
        res.diagnostics.precision_bits.to_string(),
        res.diagnostics.eig_residual.to_scientific_string(6),
    ];
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["kind", "f", "measure", "r", "value", "precision_bits", "eig_residual"]).map_err(io)?;
    w.write_record(record).map_err(io)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Bound { kind, f, measure, r } => bound(&cfg, *kind, f.as_deref(), measure.as_deref(), *r),
        Command::Table1 => {
            let t = exp::table1(&cfg)?;
            report(&exp::write_table1(&cfg, &t)?);
            Ok(())
        }
        Command::NonconvLsl { alpha } => {
            let rep = exp::nonconv_lsl(&cfg, *alpha, cfg.r_max.unwrap_or(20))?;
            report(&exp::write_lsl(&cfg, &rep)?);
            Ok(())
        }
        Command::NonconvPf { alpha } => {
            let rep = exp::nonconv_pf(&cfg, *alpha, cfg.r_max.unwrap_or(14))?;
            report(&exp::write_pf(&cfg, &rep)?);
            Ok(())
        }
        Command::DensityCompare { alpha, d, beta, g } => {
            let out = exp::density_compare(&cfg, *alpha, *d, *beta, g.as_deref())?;
            println!(
                "c1 = {:.6e} at x = {:.6e}, c2 = {:.6e} at x = {:.6e}",
                out.report.c1.to_f64(),
                out.report.c1_at.to_f64(),
                out.report.c2.to_f64(),
                out.report.c2_at.to_f64()
            );
            if let Some(b) = &out.brackets {
                println!("bracket checks hold: {}", b.all_hold());
            }
            report(&exp::write_density_compare(&cfg, &out)?);
            Ok(())
        }
        Command::DerivRatio { alpha, control } => {
            let r_max = cfg.r_max.unwrap_or(12);
            let mut reports = vec![exp::deriv_ratio(&cfg, *alpha, r_max)?];
            if *control && *alpha != 2.0 {
                reports.push(exp::deriv_ratio(&cfg, 2.0, r_max)?);
            }
            report(&exp::write_deriv_ratio(&cfg, &reports)?);
            Ok(())
        }
        Command::CompactRate => {
            let rep = exp::compact_rate(&cfg, cfg.r_max.unwrap_or(20))?;
            for (kind, slope) in [("ub", rep.slope_ub), ("ubpf", rep.slope_ubpf)] {
                match slope {
                    Some(s) => println!("{kind}: log-log slope {s:.4} over r = {}..={}", rep.fit_from, rep.fit_to),
                    None => println!("{kind}: no positive gaps to fit"),
                }
            }
            report(&exp::write_compact_rate(&cfg, &rep)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
