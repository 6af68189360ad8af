//! Empirical Gramian samples and the kernel matrices built from them.
//!
//! Samples are linearly indexed row-major over (time, channel): sample
//! `i·m + j` is channel `j` at time `t_{i+1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{cross_gram, gram, Kernel};
use crate::sim::{impulse_responses, output_responses, SampleGrid};
use crate::systems::ControlSystem;

/// Controllability samples `x^j(t_i)` and observability samples `d_j(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    /// `N·m` impulse-response states.
    pub ctrl_samples: Vec<DVector<f64>>,
    /// `N·p` vectors `d_j(t_i) = (y_j¹(t_i), …, y_jⁿ(t_i))`: output `j`
    /// at `t_i` for each of the `n` unit initial conditions.
    pub obs_samples: Vec<DVector<f64>>,
    pub samples: usize,
    pub horizon: f64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl SampleEnsemble {
    pub fn new(
        ctrl_samples: Vec<DVector<f64>>,
        obs_samples: Vec<DVector<f64>>,
        samples: usize,
        horizon: f64,
        dims: (usize, usize, usize),
    ) -> Result<Self> {
        let (n, m, p) = dims;
        if samples == 0 || n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument("empty sample ensemble".into()));
        }
        check_dim(
            "controllability sample count",
            samples * m,
            ctrl_samples.len(),
        )?;
        check_dim("observability sample count", samples * p, obs_samples.len())?;
        for x in ctrl_samples.iter().chain(&obs_samples) {
            check_dim("sample dimension", n, x.len())?;
        }
        Ok(Self {
            ctrl_samples,
            obs_samples,
            samples,
            horizon,
            n,
            m,
            p,
        })
    }
}

/// Simulates the impulse and initial-condition responses of `sys` and
/// arranges them into sample sets.
pub fn collect_samples(sys: &ControlSystem, grid: &SampleGrid) -> Result<SampleEnsemble> {
    let impulses = impulse_responses(sys, grid)?;
    let unforced = output_responses(sys, grid)?;
    let (n, m, p) = (sys.state_dim(), sys.input_dim(), sys.output_dim());
    let samples = grid.samples();

    let mut ctrl = Vec::with_capacity(samples * m);
    let mut obs = Vec::with_capacity(samples * p);
    for i in 0..samples {
        for traj in &impulses {
            ctrl.push(traj.states[i].clone());
        }
        for j in 0..p {
            obs.push(DVector::from_fn(n, |k, _| unforced[k].outputs[i][j]));
        }
    }
    SampleEnsemble::new(ctrl, obs, samples, grid.horizon(), (n, m, p))
}

/// `k̃_o(x)`: kernel evaluations against the observability samples,
/// centered with the statistics of the raw Hankel kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityFeatureMap {
    pub kernel: Kernel,
    #[serde(with = "crate::serde_rows::vectors")]
    pub obs_samples: Vec<DVector<f64>>,
    /// Row means of the raw `K_oc`, i.e. `(1/N)·K_oc·1_N`.
    #[serde(with = "crate::serde_rows::vector")]
    pub row_means: DVector<f64>,
    /// Grand mean of the raw `K_oc`.
    pub grand_mean: f64,
}

impl ObservabilityFeatureMap {
    pub fn state_dim(&self) -> usize {
        self.obs_samples.first().map_or(0, |d| d.len())
    }

    /// Number of observability samples `M`.
    pub fn len(&self) -> usize {
        self.obs_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_samples.is_empty()
    }

    /// Uncentered `k_o(x) = (K(x, d_1), …, K(x, d_M))`.
    pub fn raw(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("feature map argument", self.state_dim(), x.len())?;
        Ok(DVector::from_iterator(
            self.len(),
            self.obs_samples
                .iter()
                .map(|d| self.kernel.value(x.as_slice(), d.as_slice())),
        ))
    }

    /// `k̃_o(x) = k_o(x) − (1/N)K_oc1_N − (1/M)1_M1_Mᵀk_o(x) + (1/NM)1_M1_MᵀK_oc1_N`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut k = self.raw(x)?;
        let mean = k.mean();
        for (v, r) in k.iter_mut().zip(self.row_means.iter()) {
            *v = *v - r - mean + self.grand_mean;
        }
        Ok(k)
    }

    /// `(I − (1/M)1_M1_Mᵀ)·∂k_o/∂x`, an `M×n` matrix.
    ///
    /// Only the `k_o(x)` terms of the centered map depend on `x`, so this is
    /// the exact derivative of [`ObservabilityFeatureMap::eval`].
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("feature map argument", self.state_dim(), x.len())?;
        let n = x.len();
        let mut g = DMatrix::zeros(self.len(), n);
        let mut row = vec![0.0; n];
        for (mu, d) in self.obs_samples.iter().enumerate() {
            row.iter_mut().for_each(|r| *r = 0.0);
            self.kernel
                .add_grad(x.as_slice(), d.as_slice(), 1.0, &mut row);
            for (j, r) in row.iter().enumerate() {
                g[(mu, j)] = *r;
            }
        }
        Ok(center_columns(g))
    }
}

/// Subtracts each column's mean, i.e. left-multiplies by `I − (1/M)11ᵀ`.
pub(crate) fn center_columns(mut g: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in g.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    g
}

/// `K_c`, `K_o`, the raw and centered Hankel kernel matrix `K_oc`, and the
/// centering statistics needed to evaluate `k̃_o` later.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrices {
    pub kernel: Kernel,
    /// `Nm × Nm`, `K(x_μ, x_ν)`.
    pub k_c: DMatrix<f64>,
    /// `Np × Np`, `K(d_μ, d_ν)`.
    pub k_o: DMatrix<f64>,
    /// `Np × Nm`, `K(d_μ, x_ν)`.
    pub k_oc_raw: DMatrix<f64>,
    /// Double-centered `K_oc`.
    pub k_oc: DMatrix<f64>,
    pub row_means: DVector<f64>,
    pub col_means: DVector<f64>,
    pub grand_mean: f64,
}

pub fn build_kernel_matrices(ens: &SampleEnsemble, kernel: &Kernel) -> Result<KernelMatrices> {
    let k_c = gram(kernel, &ens.ctrl_samples)?;
    let k_o = gram(kernel, &ens.obs_samples)?;
    let k_oc_raw = cross_gram(kernel, &ens.obs_samples, &ens.ctrl_samples)?;

    let row_means = DVector::from_iterator(k_oc_raw.nrows(), k_oc_raw.row_iter().map(|r| r.mean()));
    let col_means =
        DVector::from_iterator(k_oc_raw.ncols(), k_oc_raw.column_iter().map(|c| c.mean()));
    let grand_mean = k_oc_raw.mean();
    let k_oc = DMatrix::from_fn(k_oc_raw.nrows(), k_oc_raw.ncols(), |mu, nu| {
        k_oc_raw[(mu, nu)] - row_means[mu] - col_means[nu] + grand_mean
    });

    Ok(KernelMatrices {
        kernel: *kernel,
        k_c,
        k_o,
        k_oc_raw,
        k_oc,
        row_means,
        col_means,
        grand_mean,
    })
}

impl KernelMatrices {
    /// The centered observability feature map over `ens`'s samples.
    pub fn feature_map(&self, ens: &SampleEnsemble) -> Result<ObservabilityFeatureMap> {
        check_dim(
            "observability samples",
            self.k_oc_raw.nrows(),
            ens.obs_samples.len(),
        )?;
        Ok(ObservabilityFeatureMap {
            kernel: self.kernel,
            obs_samples: ens.obs_samples.clone(),
            row_means: self.row_means.clone(),
            grand_mean: self.grand_mean,
        })
    }

    /// Double-centered `K_o`, the Gram matrix of the centered observability
    /// features.
    pub fn k_o_centered(&self) -> DMatrix<f64> {
        let k = &self.k_o;
        let rows = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.mean()));
        let cols = DVector::from_iterator(k.ncols(), k.column_iter().map(|c| c.mean()));
        let grand = k.mean();
        DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
            k[(i, j)] - rows[i] - cols[j] + grand
        })
    }
}

/// `k̃_o(x)` for the matrices and samples of one ensemble.
pub fn feature_map_obs(
    mats: &KernelMatrices,
    ens: &SampleEnsemble,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    mats.feature_map(ens)?.eval(x)
}

/// Unscaled sums `G_c = Σ x_μx_μᵀ` and `G_o = Σ d_μd_μᵀ`.
pub fn gramian_sums(ens: &SampleEnsemble) -> (DMatrix<f64>, DMatrix<f64>) {
    let outer_sum = |pts: &[DVector<f64>]| {
        pts.iter().fold(DMatrix::zeros(ens.n, ens.n), |acc, x| {
            acc + x * x.transpose()
        })
    };
    (outer_sum(&ens.ctrl_samples), outer_sum(&ens.obs_samples))
}

/// Empirical linear Gramians `Ŵ_c = (T/mN)·G_c`, `Ŵ_o = (T/pN)·G_o`.
pub fn empirical_linear_gramians(ens: &SampleEnsemble) -> (DMatrix<f64>, DMatrix<f64>) {
    let (g_c, g_o) = gramian_sums(ens);
    let big_n = ens.samples as f64;
    (
        g_c * (ens.horizon / (ens.m as f64 * big_n)),
        g_o * (ens.horizon / (ens.p as f64 * big_n)),
    )
}
