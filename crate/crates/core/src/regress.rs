//! Regularized least squares in an RKHS.
//!
//! The minimizer of `Σ_j (f(z_j) − y_j)² + λℓ‖f‖²` over `ℓ` samples is
//! `f(z) = Σ_j c_j K(z, z_j)` with `(λℓI + 𝕂)C = Y`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::balance::ReductionMap;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{gram, Kernel};
use crate::linalg::symmetric_eigen_desc;
use crate::sim::Trajectory;
use crate::systems::ControlSystem;

/// Leverages this close to one make the leave-one-out shortcut meaningless.
const LEVERAGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhsRegressor {
    pub kernel: Kernel,
    /// Training inputs, including the trailing bias coordinate when
    /// `bias` is set.
    #[serde(with = "crate::serde_rows::vectors")]
    pub centers: Vec<DVector<f64>>,
    /// One column of coefficients per output coordinate.
    #[serde(with = "crate::serde_rows::matrix")]
    pub coeffs: DMatrix<f64>,
    pub lambda: f64,
    /// Append a constant `1` to every input before evaluating the kernel.
    pub bias: bool,
}

fn augment(z: &DVector<f64>, bias: bool) -> DVector<f64> {
    if bias {
        z.push(1.0)
    } else {
        z.clone()
    }
}

fn validate_samples(inputs: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<(usize, usize)> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "regression needs at least one sample".into(),
        ));
    }
    check_dim("regression targets", inputs.len(), targets.len())?;
    let (dim, out) = (inputs[0].len(), targets[0].len());
    for z in inputs {
        check_dim("regression input", dim, z.len())?;
    }
    for y in targets {
        check_dim("regression target", out, y.len())?;
    }
    Ok((dim, out))
}

fn stack_targets(targets: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(targets.len(), targets[0].len(), |i, j| targets[i][j])
}

/// Solves `(λℓI + 𝕂)C = Y` for all output columns at once.
pub fn fit(
    kernel: &Kernel,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
    lambda: f64,
    bias: bool,
) -> Result<RkhsRegressor> {
    validate_samples(inputs, targets)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let centers: Vec<_> = inputs.iter().map(|z| augment(z, bias)).collect();
    let count = centers.len();
    let mut system = gram(kernel, &centers)?;
    for i in 0..count {
        system[(i, i)] += lambda * count as f64;
    }
    let y = stack_targets(targets);
    let coeffs = match system.clone().cholesky() {
        Some(chol) if well_conditioned(chol.l_dirty().diagonal().as_slice(), count) => {
            Some(chol.solve(&y))
        }
        Some(_) => None,
        None => system.lu().solve(&y),
    };
    let coeffs = coeffs.ok_or(Error::Singular {
        context: "kernel regression",
        hint: "Gram matrix is rank deficient; use lambda > 0",
    })?;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular {
            context: "kernel regression",
            hint: "Gram matrix is rank deficient; use lambda > 0",
        });
    }
    Ok(RkhsRegressor {
        kernel: *kernel,
        centers,
        coeffs,
        lambda,
        bias,
    })
}

/// Rejects Cholesky factors whose condition number exceeds `1/(ℓ·ε)`.
fn well_conditioned(l_diag: &[f64], count: usize) -> bool {
    let max = l_diag.iter().copied().fold(0.0, f64::max);
    let min = l_diag.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && (min / max).powi(2) > count as f64 * f64::EPSILON
}

impl RkhsRegressor {
    /// Input dimension as seen by callers (without the bias coordinate).
    pub fn input_dim(&self) -> usize {
        self.centers[0].len() - usize::from(self.bias)
    }

    pub fn output_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `Σ_j c_j K(z, z_j)` for every output coordinate.
    pub fn predict(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("regressor input", self.input_dim(), z.len())?;
        let z = augment(z, self.bias);
        let k = DVector::from_iterator(
            self.centers.len(),
            self.centers
                .iter()
                .map(|c| self.kernel.value(z.as_slice(), c.as_slice())),
        );
        Ok(self.coeffs.tr_mul(&k))
    }
}

pub fn predict(r: &RkhsRegressor, z: &DVector<f64>) -> Result<DVector<f64>> {
    r.predict(z)
}

/// `λ_k = scale · 10^{-10 + 10k/(count-1)}`: log-spaced over `[1e-10, 1]·scale`.
pub fn log_grid(scale: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![scale],
        _ => (0..count)
            .map(|k| scale * 10f64.powf(-10.0 + 10.0 * k as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Ten values log-spaced in `[1e-10, 1]` times the mean diagonal of the
/// training Gram matrix.
pub fn default_lambda_grid(kernel: &Kernel, inputs: &[DVector<f64>], bias: bool) -> Vec<f64> {
    let mean_diag = inputs
        .iter()
        .map(|z| {
            let z = augment(z, bias);
            kernel.value(z.as_slice(), z.as_slice())
        })
        .sum::<f64>()
        / inputs.len().max(1) as f64;
    log_grid(mean_diag, 10)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvResult {
    pub lambda: f64,
    /// Mean squared leave-one-out residual per grid entry; `None` where a
    /// leverage of one made the shortcut undefined.
    pub errors: Vec<Option<f64>>,
}

/// Closed-form leave-one-out residuals `(y_i − ŷ_i)/(1 − H_ii)` with
/// `H = 𝕂(𝕂 + λℓI)^{-1}`, for every `λ` in `grid`.
///
/// The identity with explicit retraining holds when the held-out fit keeps
/// the same absolute ridge `λℓ`.
pub fn loo_residuals(
    kernel: &Kernel,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
    grid: &[f64],
    bias: bool,
) -> Result<Vec<Option<DMatrix<f64>>>> {
    validate_samples(inputs, targets)?;
    let centers: Vec<_> = inputs.iter().map(|z| augment(z, bias)).collect();
    let count = centers.len();
    let (eigvals, q) = symmetric_eigen_desc(&gram(kernel, &centers)?);
    let y = stack_targets(targets);
    let qty = q.tr_mul(&y);
    let q_sq = q.map(|v| v * v);

    Ok(grid
        .iter()
        .map(|&lambda| {
            let ridge = lambda * count as f64;
            let shrink = DVector::from_iterator(
                count,
                eigvals.iter().map(|&e| {
                    let e = e.max(0.0);
                    if e + ridge > 0.0 {
                        e / (e + ridge)
                    } else {
                        0.0
                    }
                }),
            );
            let leverage = &q_sq * &shrink;
            if leverage.iter().any(|h| (1.0 - h).abs() < LEVERAGE_TOL) {
                warn!("lambda {lambda:e}: leverage of one, skipping");
                return None;
            }
            let mut scaled = qty.clone();
            for (mut row, s) in scaled.row_iter_mut().zip(shrink.iter()) {
                row *= *s;
            }
            let fitted = &q * scaled;
            let mut resid = &y - fitted;
            for (mut row, h) in resid.row_iter_mut().zip(leverage.iter()) {
                row /= 1.0 - h;
            }
            Some(resid)
        })
        .collect())
}

/// Picks the grid `λ` with the smallest mean squared leave-one-out residual
/// (first one on ties).
pub fn loocv_select(
    kernel: &Kernel,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
    grid: &[f64],
    bias: bool,
) -> Result<LoocvResult> {
    if inputs.len() < 2 {
        return Err(Error::InvalidArgument(
            "leave-one-out needs at least 2 samples".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid lambda {bad}")));
    }
    let residuals = loo_residuals(kernel, inputs, targets, grid, bias)?;
    let errors: Vec<Option<f64>> = residuals
        .iter()
        .map(|r| r.as_ref().map(|r| r.norm_squared() / r.len() as f64))
        .collect();
    let best = errors
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.filter(|v| v.is_finite()).map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::InvalidArgument("no usable lambda in grid".into()))?;
    Ok(LoocvResult {
        lambda: grid[best.0],
        errors,
    })
}

/// How the regularization parameter is chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LambdaChoice {
    /// LOOCV over [`default_lambda_grid`].
    #[default]
    DefaultGrid,
    Grid(Vec<f64>),
    Fixed(f64),
}

/// Kernel for a regression, possibly resolved from the training inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Fixed(Kernel),
    /// Gaussian with `γ` from the mean squared pairwise distance.
    GaussianAuto,
}

impl KernelChoice {
    pub fn resolve(&self, inputs: &[DVector<f64>]) -> Result<Kernel> {
        match self {
            KernelChoice::Fixed(k) => Ok(*k),
            KernelChoice::GaussianAuto => Kernel::gaussian_auto(inputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub kernel: KernelChoice,
    pub lambda: LambdaChoice,
    pub bias: bool,
}

/// Fits with the kernel and `λ` prescribed by `spec`.
pub fn fit_with_spec(
    spec: &RegressionSpec,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
) -> Result<RkhsRegressor> {
    validate_samples(inputs, targets)?;
    let kernel = spec.kernel.resolve(inputs)?;
    let lambda = match &spec.lambda {
        LambdaChoice::Fixed(l) => *l,
        LambdaChoice::Grid(grid) => loocv_select(&kernel, inputs, targets, grid, spec.bias)?.lambda,
        LambdaChoice::DefaultGrid => {
            let grid = default_lambda_grid(&kernel, inputs, spec.bias);
            loocv_select(&kernel, inputs, targets, &grid, spec.bias)?.lambda
        }
    };
    fit(&kernel, inputs, targets, lambda, spec.bias)
}

/// Source of the vector-field samples used to learn `f̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DynamicsTargets {
    /// `f(x_j, u_j)` from the known dynamics.
    #[default]
    VectorField,
    /// Forward differences `(x_{j+1} − x_j)/Δt` of the sampled states.
    FiniteDifference,
}

/// Learns `(Π(x), u) ↦ f(x, u)` from a training trajectory. The regressor
/// takes `q + m` inputs and predicts all `n` state derivatives.
pub fn fit_dynamics(
    map: &ReductionMap,
    sys: &ControlSystem,
    train: &Trajectory,
    spec: &RegressionSpec,
    targets: DynamicsTargets,
) -> Result<RkhsRegressor> {
    check_dim("training states", sys.state_dim(), map.state_dim())?;
    let used = match targets {
        DynamicsTargets::VectorField => train.len(),
        DynamicsTargets::FiniteDifference => train.len().saturating_sub(1),
    };
    let mut inputs = Vec::with_capacity(used);
    let mut outputs = Vec::with_capacity(used);
    for j in 0..used {
        let (x, u) = (&train.states[j], &train.inputs[j]);
        let reduced = map.reduce(x)?;
        inputs.push(DVector::from_iterator(
            reduced.len() + u.len(),
            reduced.iter().chain(u.iter()).copied(),
        ));
        outputs.push(match targets {
            DynamicsTargets::VectorField => sys.dynamics(x, u),
            DynamicsTargets::FiniteDifference => {
                (&train.states[j + 1] - x) / (train.times[j + 1] - train.times[j])
            }
        });
    }
    fit_with_spec(spec, &inputs, &outputs)
}

/// Learns `Π(x) ↦ y` from a training trajectory.
pub fn fit_output(
    map: &ReductionMap,
    train: &Trajectory,
    spec: &RegressionSpec,
) -> Result<RkhsRegressor> {
    let inputs = train
        .states
        .iter()
        .map(|x| map.reduce(x))
        .collect::<Result<Vec<_>>>()?;
    fit_with_spec(spec, &inputs, &train.outputs)
}
