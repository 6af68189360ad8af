//! Command-line surface.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kernel_balance::ReducedModel;
use log::info;

use crate::config::{JacobianKind, KernelSpec, OrderSpec, PipelineConfig, SignalSpec, SystemSpec};
use crate::error::CliError;
use crate::oracle;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "kbt",
    version,
    about = "Balanced truncation of nonlinear control systems in a reproducing kernel Hilbert space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the leading singular values of the Hankel kernel matrix as CSV.
    Spectrum(Common),
    /// Run the full pipeline and write the reduced model as JSON.
    Reduce(Common),
    /// Simulate a saved model next to the full system and report the error.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Model written by `reduce`.
        #[arg(long)]
        model: PathBuf,
        /// Compare against this system instead of the configured one.
        #[arg(long)]
        reference: Option<SystemSpec>,
        /// Where to write the summary JSON (default: stdout, or stderr when
        /// the CSV goes to stdout).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Linear-kernel checks against classical Gramians and covariance PCA.
    Oracle(Common),
    /// Write a full-order trajectory under the evaluation input as CSV.
    Simulate(Common),
}

/// Flags shared by every command; each overrides the matching config field.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 2d, 2d-reference, 7d or linear:FILE.
    #[arg(long)]
    pub system: Option<SystemSpec>,
    /// Balancing kernel: linear, poly:D, gauss:G or gauss:auto.
    #[arg(long)]
    pub kernel: Option<KernelSpec>,
    /// Kernel for the learned vector field.
    #[arg(long = "dyn-kernel")]
    pub dyn_kernel: Option<KernelSpec>,
    /// Kernel for the learned output map.
    #[arg(long = "out-kernel")]
    pub out_kernel: Option<KernelSpec>,
    /// Samples per response (for `simulate`: of the simulated run).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Horizon in seconds (for `simulate`: of the simulated run).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Largest RK4 step in seconds.
    #[arg(long)]
    pub step: Option<f64>,
    /// auto, auto:RATIO or a fixed order.
    #[arg(long)]
    pub order: Option<OrderSpec>,
    #[arg(long, value_enum)]
    pub jacobian: Option<JacobianKind>,
    /// Evaluation input: impulse:CH, square:FREQ:AMP, sine:FREQ:AMP, test or zero.
    #[arg(long)]
    pub input: Option<SignalSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    /// Loads the config file, if any, and applies the flag overrides.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.system {
            cfg.system = v.clone();
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = self.dyn_kernel {
            cfg.dynamics_kernel = v;
        }
        if let Some(v) = self.out_kernel {
            cfg.output_kernel = v;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.step {
            cfg.step = v;
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = self.jacobian {
            cfg.jacobian = v;
        }
        if let Some(v) = self.input {
            cfg.evaluation.input = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(common) => {
            let cfg = common.resolve()?;
            let balanced = pipeline::balance(&cfg)?;
            let mut w = output(cfg.out.as_deref())?;
            pipeline::write_spectrum_csv(&balanced.spectrum, &mut w)?;
            w.flush()?;
        }
        Command::Reduce(common) => {
            let cfg = common.resolve()?;
            let reduction = pipeline::reduce(&cfg)?;
            let mut w = output(cfg.out.as_deref())?;
            writeln!(w, "{}", reduction.model.to_json())?;
            w.flush()?;
        }
        Command::Compare {
            common,
            model,
            reference,
            summary,
        } => {
            let cfg = common.resolve()?;
            let text = std::fs::read_to_string(&model)
                .map_err(|e| CliError::Config(format!("{}: {e}", model.display())))?;
            let model = ReducedModel::from_json(&text)
                .map_err(|e| CliError::Config(format!("model: {e}")))?;
            let full = reference.as_ref().unwrap_or(&cfg.system).build()?;
            let cmp = pipeline::compare(&model, &full, &cfg.evaluation, cfg.step)?;
            let mut w = output(cfg.out.as_deref())?;
            pipeline::write_comparison_csv(&cmp, &mut w)?;
            w.flush()?;
            let json = serde_json::to_string_pretty(&cmp.summary).expect("summary serializes");
            match (&summary, &cfg.out) {
                (Some(path), _) => std::fs::write(path, json + "\n")?,
                (None, Some(_)) => println!("{json}"),
                (None, None) => eprintln!("{json}"),
            }
            info!("relative RMSE {:.4}", cmp.summary.relative_rmse);
        }
        Command::Oracle(common) => {
            let cfg = common.resolve()?;
            let report = oracle::oracle(&cfg)?;
            println!("oracle on {}", report.system);
            for check in &report.checks {
                println!("{check}");
            }
            if let Some(path) = &cfg.out {
                std::fs::write(
                    path,
                    serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                )?;
            }
            if report.failures() > 0 {
                return Err(CliError::OracleFailed {
                    failed: report.failures(),
                });
            }
        }
        Command::Simulate(common) => {
            let mut cfg = common.resolve()?;
            if let Some(v) = common.samples {
                cfg.evaluation.samples = v;
            }
            if let Some(v) = common.horizon {
                cfg.evaluation.horizon = v;
            }
            let sys = cfg.system.build()?;
            let traj = pipeline::simulate_run(&sys, &cfg.evaluation, cfg.step)?;
            let mut w = output(cfg.out.as_deref())?;
            traj.write_csv(&mut w).map_err(|e| CliError::Stage {
                stage: "write trajectory",
                source: e,
            })?;
            w.flush()?;
        }
    }
    Ok(())
}
