//! The reduction pipeline stage by stage, driven by a [`PipelineConfig`].

use std::io::Write;

use kernel_balance::balance::{self, HankelSpectrum, ReductionMap};
use kernel_balance::empirical::{self, KernelMatrices, SampleEnsemble};
use kernel_balance::regress::{self, DynamicsTargets, LambdaChoice, RegressionSpec};
use kernel_balance::sim::{self, fmt_f64, SampleGrid, Trajectory};
use kernel_balance::{ControlSystem, JacobianStrategy, ReducedModel};
use log::info;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::{JacobianKind, PipelineConfig, RunSpec};
use crate::error::{CliError, StageExt};

/// Rows written by the spectrum command.
pub const SPECTRUM_ROWS: usize = 100;

/// Sampling grid for `samples` points over `horizon` with the largest RK4
/// step not above `max_step` that divides the sampling interval.
pub fn grid(horizon: f64, samples: usize, max_step: f64) -> Result<SampleGrid, CliError> {
    SampleGrid::with_max_step(horizon, samples, max_step).stage("sampling grid")
}

/// Everything up to and including the Hankel spectrum.
#[derive(Debug, Clone)]
pub struct Balanced {
    pub system: ControlSystem,
    pub ensemble: SampleEnsemble,
    pub matrices: KernelMatrices,
    pub spectrum: HankelSpectrum,
}

pub fn balance(cfg: &PipelineConfig) -> Result<Balanced, CliError> {
    let system = cfg.system.build()?;
    let grid = grid(cfg.horizon, cfg.samples, cfg.step)?;
    let ensemble = empirical::collect_samples(&system, &grid).stage("collect samples")?;
    let all_points: Vec<_> = ensemble
        .ctrl_samples
        .iter()
        .chain(&ensemble.obs_samples)
        .cloned()
        .collect();
    let kernel = cfg
        .kernel
        .0
        .resolve(&all_points)
        .stage("balancing kernel")?;
    let matrices = empirical::build_kernel_matrices(&ensemble, &kernel).stage("kernel matrices")?;
    let spectrum = balance::hankel_spectrum(&matrices.k_oc).stage("hankel spectrum")?;
    info!(
        "{}: kernel {kernel}, K_oc {}x{}, rank {}",
        system.name(),
        matrices.k_oc.nrows(),
        matrices.k_oc.ncols(),
        spectrum.rank()
    );
    Ok(Balanced {
        system,
        ensemble,
        matrices,
        spectrum,
    })
}

/// `index,sigma_Koc,sigma_KocT_Koc` for the leading `min(100, rank)` values.
pub fn write_spectrum_csv<W: Write>(spectrum: &HankelSpectrum, mut w: W) -> Result<(), CliError> {
    writeln!(w, "index,sigma_Koc,sigma_KocT_Koc")?;
    for (i, s) in spectrum
        .values
        .iter()
        .take(spectrum.rank().min(SPECTRUM_ROWS))
        .enumerate()
    {
        writeln!(w, "{},{},{}", i + 1, fmt_f64(*s), fmt_f64(s * s))?;
    }
    Ok(())
}

/// Simulates `sys` from the origin under a configured run.
pub fn simulate_run(
    sys: &ControlSystem,
    run: &RunSpec,
    max_step: f64,
) -> Result<Trajectory, CliError> {
    let grid = grid(run.horizon, run.samples, max_step)?;
    let input = run.input.build(sys.input_dim(), grid.step())?;
    sim::integrate(sys, &DVector::zeros(sys.state_dim()), &input, &grid).stage("simulate")
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub balanced: Balanced,
    pub map: ReductionMap,
    pub model: ReducedModel,
}

impl Reduction {
    pub fn order(&self) -> usize {
        self.map.order()
    }
}

/// Full pipeline: balance, truncate, learn `f̂` and `ĥ`, assemble the model.
pub fn reduce(cfg: &PipelineConfig) -> Result<Reduction, CliError> {
    let balanced = balance(cfg)?;
    let Balanced {
        system,
        ensemble,
        matrices,
        spectrum,
    } = &balanced;
    let q = spectrum.select_order(cfg.order.0).stage("select order")?;
    info!("retaining q = {q} of rank {}", spectrum.rank());
    let map =
        ReductionMap::from_spectrum(matrices, ensemble, spectrum, q).stage("reduction map")?;

    let dyn_train = simulate_run(system, &cfg.dynamics_training, cfg.step)?;
    let dyn_spec = RegressionSpec {
        kernel: cfg.dynamics_kernel.0,
        lambda: LambdaChoice::DefaultGrid,
        bias: cfg.dynamics_bias,
    };
    let dynamics = regress::fit_dynamics(
        &map,
        system,
        &dyn_train,
        &dyn_spec,
        DynamicsTargets::VectorField,
    )
    .stage("fit dynamics")?;
    info!(
        "dynamics: kernel {}, lambda {:e}",
        dynamics.kernel, dynamics.lambda
    );

    let out_train = simulate_run(system, &cfg.output_training, cfg.step)?;
    let out_spec = RegressionSpec {
        kernel: cfg.output_kernel.0,
        lambda: LambdaChoice::DefaultGrid,
        bias: cfg.output_bias,
    };
    let output = regress::fit_output(&map, &out_train, &out_spec).stage("fit output")?;
    info!(
        "output: kernel {}, lambda {:e}",
        output.kernel, output.lambda
    );

    let jacobian = match cfg.jacobian {
        JacobianKind::Taylor => JacobianStrategy::taylor(&map, &DVector::zeros(system.state_dim())),
        JacobianKind::Poly => JacobianStrategy::poly_analytic(&map),
    }
    .stage("jacobian")?;
    let model = ReducedModel::new(system.name(), map.clone(), dynamics, output, jacobian)
        .stage("assemble model")?;
    Ok(Reduction {
        balanced,
        map,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rmse: f64,
    pub peak: f64,
    pub relative_rmse: f64,
}

/// RMSE over all samples and output channels, peak `|y_full|` and their
/// ratio.
pub fn summarize(full: &[DVector<f64>], reduced: &[DVector<f64>]) -> Summary {
    let count: usize = full.iter().map(|y| y.len()).sum();
    let sq: f64 = full
        .iter()
        .zip(reduced)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    let rmse = (sq / count.max(1) as f64).sqrt();
    let peak = full.iter().map(|y| y.amax()).fold(0.0, f64::max);
    let relative_rmse = if rmse == 0.0 { 0.0 } else { rmse / peak };
    Summary {
        rmse,
        peak,
        relative_rmse,
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub full: Trajectory,
    pub reduced: Trajectory,
    pub summary: Summary,
}

/// Simulates `full` from the origin and the model from `Π(0)` under the
/// evaluation run and compares outputs.
pub fn compare(
    model: &ReducedModel,
    full: &ControlSystem,
    run: &RunSpec,
    max_step: f64,
) -> Result<Comparison, CliError> {
    if full.input_dim() != model.input_dim() || full.output_dim() != model.output_dim() {
        return Err(CliError::Config(format!(
            "model has {} input(s) and {} output(s) but system '{}' has {} and {}",
            model.input_dim(),
            model.output_dim(),
            full.name(),
            full.input_dim(),
            full.output_dim()
        )));
    }
    let grid = grid(run.horizon, run.samples, max_step)?;
    let input = run.input.build(full.input_dim(), grid.step())?;
    let full_traj = sim::integrate(full, &DVector::zeros(full.state_dim()), &input, &grid)
        .stage("simulate full")?;
    let x_r0 = model
        .reduce(&DVector::zeros(model.state_dim()))
        .stage("reduce initial state")?;
    let reduced = model
        .simulate(&x_r0, &input, &grid)
        .stage("simulate reduced")?;
    let summary = summarize(&full_traj.outputs, &reduced.outputs);
    Ok(Comparison {
        full: full_traj,
        reduced,
        summary,
    })
}

/// `t,y_full,y_reduced`, with channel suffixes when there are several
/// outputs.
pub fn write_comparison_csv<W: Write>(cmp: &Comparison, mut w: W) -> Result<(), CliError> {
    let p = cmp.full.outputs.first().map_or(1, |y| y.len());
    let mut header = vec!["t".to_string()];
    for side in ["y_full", "y_reduced"] {
        if p == 1 {
            header.push(side.to_string());
        } else {
            header.extend((1..=p).map(|j| format!("{side}_{j}")));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for ((t, a), b) in cmp
        .full
        .times
        .iter()
        .zip(&cmp.full.outputs)
        .zip(&cmp.reduced.outputs)
    {
        let row: Vec<String> = std::iter::once(*t)
            .chain(a.iter().copied())
            .chain(b.iter().copied())
            .map(fmt_f64)
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
