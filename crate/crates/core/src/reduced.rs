//! The closed reduced-order system
//!
//! ```text
//! ẋ_r = J_Π(Π†(x_r)) · f̂(x_r, u)
//! ŷ   = ĥ(x_r)
//! ```
//!
//! where `f̂` predicts the full-order vector field from reduced
//! coordinates and `J_Π` at the preimage is approximated either by a frozen
//! first-order Taylor expansion or, for polynomial balancing kernels, by
//! the analytic minimum-norm feature-space preimage.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::balance::ReductionMap;
use crate::empirical::center_columns;
use crate::error::{check_dim, Error, Result};
use crate::linalg::pinv;
use crate::regress::RkhsRegressor;
use crate::signals::Signal;
use crate::sim::{rk4_sampled, SampleGrid, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JacobianStrategy {
    /// `J_Π(a)` evaluated once at the expansion point `a`.
    Taylor {
        #[serde(with = "crate::serde_rows::vector")]
        expansion_point: DVector<f64>,
        /// `Π(a)`.
        #[serde(with = "crate::serde_rows::vector")]
        reduced_point: DVector<f64>,
        /// `J_Π(a)`, `q × n`.
        #[serde(with = "crate::serde_rows::matrix")]
        jacobian: DMatrix<f64>,
        /// `J_Π(a)†`, `n × q`.
        #[serde(with = "crate::serde_rows::matrix")]
        pseudo_inverse: DMatrix<f64>,
    },
    /// Polynomial-kernel Jacobian at the minimum-norm preimage.
    PolyAnalytic {
        degree: u32,
        /// `(T_qᵀK_oT_q)^{-1} Π(d_i)` as columns, `q × M`, so that
        /// `s_i = ⟨x_r, column_i⟩`.
        #[serde(with = "crate::serde_rows::matrix")]
        weights: DMatrix<f64>,
    },
}

impl JacobianStrategy {
    /// Linearizes `Π` about `a`.
    pub fn taylor(map: &ReductionMap, a: &DVector<f64>) -> Result<Self> {
        let jacobian = map.jacobian(a)?;
        Ok(JacobianStrategy::Taylor {
            expansion_point: a.clone(),
            reduced_point: map.reduce(a)?,
            pseudo_inverse: pinv(&jacobian)?,
            jacobian,
        })
    }

    /// Factorizes `T_qᵀK_oT_q` once and precomputes `Π(d_i)` for every
    /// observability sample. Needs a polynomial (or linear) balancing kernel.
    pub fn poly_analytic(map: &ReductionMap) -> Result<Self> {
        let kernel = map.feature_map.kernel;
        let degree = kernel.polynomial_degree().ok_or_else(|| {
            Error::Unsupported(format!(
                "analytic Jacobian needs a polynomial balancing kernel, got {kernel}"
            ))
        })?;
        let q = map.order();
        let projections = DMatrix::from_columns(
            &map.feature_map
                .obs_samples
                .iter()
                .map(|d| map.reduce(d))
                .collect::<Result<Vec<_>>>()?,
        );
        let weights = map
            .balanced_gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&projections))
            .ok_or(Error::Singular {
                context: "balanced observability Gram matrix",
                hint: "reduce the order q",
            })?;
        debug_assert_eq!(weights.nrows(), q);
        Ok(JacobianStrategy::PolyAnalytic { degree, weights })
    }
}

/// `J_Π(x)` from the kernel gradients.
pub fn jacobian_feature_map(map: &ReductionMap, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    map.jacobian(x)
}

/// First-order least-norm preimage `J_Π(a)†(x_r − Π(a)) + a`.
pub fn taylor_pseudoinverse(
    strategy: &JacobianStrategy,
    x_r: &DVector<f64>,
) -> Result<DVector<f64>> {
    let JacobianStrategy::Taylor {
        expansion_point,
        reduced_point,
        jacobian,
        pseudo_inverse,
    } = strategy
    else {
        return Err(Error::Unsupported(
            "preimage needs the Taylor strategy".into(),
        ));
    };
    check_dim("reduced state", reduced_point.len(), x_r.len())?;
    if jacobian.amax() == 0.0 {
        warn!("zero Jacobian at the expansion point; returning the expansion point");
        return Ok(expansion_point.clone());
    }
    Ok(pseudo_inverse * (x_r - reduced_point) + expansion_point)
}

/// `s^{(d−1)/d}` on the real branch `sign(s)^{d−1}·|s|^{(d−1)/d}`.
fn signed_power(s: f64, degree: u32) -> f64 {
    if degree == 1 {
        return 1.0;
    }
    let magnitude = s.abs().powf(f64::from(degree - 1) / f64::from(degree));
    if s < 0.0 && (degree - 1) % 2 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// `T_qᵀ(I − (1/M)11ᵀ) [d·s_i^{(d−1)/d}·d_iᵀ]_i` with
/// `s_i = ⟨x_r, (T_qᵀK_oT_q)^{-1}Π(d_i)⟩`.
pub fn poly_jacobian_at_preimage(
    strategy: &JacobianStrategy,
    map: &ReductionMap,
    x_r: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let JacobianStrategy::PolyAnalytic { degree, weights } = strategy else {
        return Err(Error::Unsupported(
            "needs the polynomial-analytic strategy".into(),
        ));
    };
    check_dim("reduced state", weights.nrows(), x_r.len())?;
    let samples = &map.feature_map.obs_samples;
    check_dim("observability samples", weights.ncols(), samples.len())?;
    let s = weights.tr_mul(x_r);
    let n = map.state_dim();
    let d = f64::from(*degree);
    let rows = DMatrix::from_fn(samples.len(), n, |i, j| {
        d * signed_power(s[i], *degree) * samples[i][j]
    });
    Ok(map.transform.tr_mul(&center_columns(rows)))
}

/// Everything needed to simulate the reduced system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    /// Name of the full-order system the model was learned from.
    pub system: String,
    pub map: ReductionMap,
    /// `(x_r, u) ↦ f`, `q + m` inputs, `n` outputs.
    pub dynamics: RkhsRegressor,
    /// `x_r ↦ y`, `q` inputs, `p` outputs.
    pub output: RkhsRegressor,
    pub jacobian: JacobianStrategy,
}

impl ReducedModel {
    pub fn new(
        system: impl Into<String>,
        map: ReductionMap,
        dynamics: RkhsRegressor,
        output: RkhsRegressor,
        jacobian: JacobianStrategy,
    ) -> Result<Self> {
        let (q, n) = (map.order(), map.state_dim());
        if dynamics.input_dim() <= q {
            return Err(Error::Dimension {
                context: "dynamics regressor inputs (q + m)",
                expected: q + 1,
                actual: dynamics.input_dim(),
            });
        }
        check_dim("dynamics regressor outputs", n, dynamics.output_dim())?;
        check_dim("output regressor inputs", q, output.input_dim())?;
        match &jacobian {
            JacobianStrategy::Taylor { jacobian, .. } => {
                check_dim("Taylor Jacobian rows", q, jacobian.nrows())?;
                check_dim("Taylor Jacobian columns", n, jacobian.ncols())?;
            }
            JacobianStrategy::PolyAnalytic { weights, .. } => {
                check_dim("analytic Jacobian weights", q, weights.nrows())?;
                check_dim(
                    "analytic Jacobian weights",
                    map.feature_map.len(),
                    weights.ncols(),
                )?;
            }
        }
        Ok(Self {
            system: system.into(),
            map,
            dynamics,
            output,
            jacobian,
        })
    }

    pub fn order(&self) -> usize {
        self.map.order()
    }

    pub fn state_dim(&self) -> usize {
        self.map.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.dynamics.input_dim() - self.order()
    }

    pub fn output_dim(&self) -> usize {
        self.output.output_dim()
    }

    /// Reduced initial condition `Π(x₀)`.
    pub fn reduce(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.map.reduce(x)
    }

    /// Jacobian contribution used at `x_r`.
    pub fn jacobian_at(&self, x_r: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.jacobian {
            JacobianStrategy::Taylor { jacobian, .. } => Ok(jacobian.clone()),
            strategy @ JacobianStrategy::PolyAnalytic { .. } => {
                poly_jacobian_at_preimage(strategy, &self.map, x_r)
            }
        }
    }

    /// `ẋ_r = J · f̂(x_r, u)`.
    pub fn closed_rhs(&self, x_r: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("reduced state", self.order(), x_r.len())?;
        check_dim("input", self.input_dim(), u.len())?;
        let z = DVector::from_iterator(x_r.len() + u.len(), x_r.iter().chain(u.iter()).copied());
        let f = self.dynamics.predict(&z)?;
        Ok(match &self.jacobian {
            JacobianStrategy::Taylor { jacobian, .. } => jacobian * f,
            _ => self.jacobian_at(x_r)? * f,
        })
    }

    /// `ŷ = ĥ(x_r)`.
    pub fn predict_output(&self, x_r: &DVector<f64>) -> Result<DVector<f64>> {
        self.output.predict(x_r)
    }

    /// RK4 on the closed reduced dynamics; outputs through `ĥ`.
    pub fn simulate(
        &self,
        x_r0: &DVector<f64>,
        input: &Signal,
        grid: &SampleGrid,
    ) -> Result<Trajectory> {
        check_dim("reduced initial state", self.order(), x_r0.len())?;
        check_dim("input signal channels", self.input_dim(), input.dim())?;
        let (states, inputs) = rk4_sampled(|x, u| self.closed_rhs(x, u), x_r0, input, grid)?;
        let outputs = states
            .iter()
            .map(|x| self.predict_output(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            times: grid.times(),
            states,
            outputs,
            inputs,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Free-function form of [`ReducedModel::closed_rhs`].
pub fn closed_rhs(
    model: &ReducedModel,
    x_r: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.closed_rhs(x_r, u)
}

/// Free-function form of [`ReducedModel::simulate`].
pub fn simulate_reduced(
    model: &ReducedModel,
    x_r0: &DVector<f64>,
    input: &Signal,
    grid: &SampleGrid,
) -> Result<Trajectory> {
    model.simulate(x_r0, input, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::hankel_spectrum;
    use crate::empirical::{
        build_kernel_matrices, collect_samples, KernelMatrices, SampleEnsemble,
    };
    use crate::kernels::Kernel;
    use crate::regress::fit;
    use crate::sim::integrate;
    use crate::systems::{linear_system, system_2d, system_2d_reference, system_7d, ControlSystem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn build(
        sys: &ControlSystem,
        kernel: Kernel,
        samples: usize,
        q: usize,
    ) -> (SampleEnsemble, KernelMatrices, ReductionMap) {
        let grid = SampleGrid::with_max_step(5.0, samples, 1e-3).unwrap();
        let ens = collect_samples(sys, &grid).unwrap();
        let mats = build_kernel_matrices(&ens, &kernel).unwrap();
        let spec = hankel_spectrum(&mats.k_oc).unwrap();
        let map = ReductionMap::from_spectrum(&mats, &ens, &spec, q).unwrap();
        (ens, mats, map)
    }

    fn fd_jacobian(map: &ReductionMap, x: &DVector<f64>) -> DMatrix<f64> {
        let step = 1e-6;
        let n = x.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += step;
            lo[j] -= step;
            cols.push((map.reduce(&hi).unwrap() - map.reduce(&lo).unwrap()) / (2.0 * step));
        }
        DMatrix::from_columns(&cols)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (sys, kernel, q) in [
            (system_2d(), Kernel::Polynomial { degree: 3 }, 1),
            (system_7d(), Kernel::Polynomial { degree: 3 }, 2),
            (system_7d(), Kernel::Gaussian { gamma: 0.5 }, 2),
        ] {
            let (_, _, map) = build(&sys, kernel, 100, q);
            for _ in 0..50 {
                let x = DVector::from_fn(sys.state_dim(), |_, _| rng.random_range(-1.0..1.0));
                let j = jacobian_feature_map(&map, &x).unwrap();
                let fd = fd_jacobian(&map, &x);
                let rel = (&j - &fd).norm() / j.norm();
                assert!(rel <= 1e-5, "{} {kernel}: rel {rel}", sys.name());
            }
        }
    }

    #[test]
    fn linear_kernel_jacobian_is_constant() {
        let (_, _, map) = build(&system_2d(), Kernel::Linear, 50, 1);
        let j0 = map.jacobian(&DVector::zeros(2)).unwrap();
        let j1 = map
            .jacobian(&DVector::from_column_slice(&[0.7, -2.0]))
            .unwrap();
        assert!((j0 - j1).amax() < 1e-14);
    }

    #[test]
    fn identical_observability_samples_give_zero_jacobian() {
        let p = DVector::from_column_slice(&[0.5, 0.5]);
        let ctrl: Vec<_> = (0..5)
            .map(|i| DVector::from_column_slice(&[i as f64, 1.0]))
            .collect();
        let ens = SampleEnsemble::new(ctrl, vec![p; 5], 5, 1.0, (2, 1, 1)).unwrap();
        let mats = build_kernel_matrices(&ens, &Kernel::Polynomial { degree: 3 }).unwrap();
        let fmap = mats.feature_map(&ens).unwrap();
        let g = fmap
            .jacobian(&DVector::from_column_slice(&[1.0, 2.0]))
            .unwrap();
        assert!(g.amax() < 1e-12);
    }

    /// Map built by hand: q = n = 2, linear kernel, so Π is affine.
    fn affine_map() -> ReductionMap {
        let (_, _, map) = build(
            &linear_system(
                DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]),
                DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
                DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            )
            .unwrap(),
            Kernel::Linear,
            80,
            2,
        );
        map
    }

    #[test]
    fn taylor_preimage_inverts_affine_map() {
        let map = affine_map();
        let a = DVector::from_column_slice(&[0.2, -0.1]);
        let strat = JacobianStrategy::taylor(&map, &a).unwrap();
        let x = DVector::from_column_slice(&[1.3, 0.4]);
        let back = taylor_pseudoinverse(&strat, &map.reduce(&x).unwrap()).unwrap();
        assert!((&back - &x).amax() <= 1e-10, "{back} vs {x}");
        let at_a = taylor_pseudoinverse(&strat, &map.reduce(&a).unwrap()).unwrap();
        assert!((&at_a - &a).amax() <= 1e-12);
    }

    #[test]
    fn zero_jacobian_preimage_returns_expansion_point() {
        let strat = JacobianStrategy::Taylor {
            expansion_point: DVector::from_column_slice(&[1.0, 2.0]),
            reduced_point: DVector::zeros(1),
            jacobian: DMatrix::zeros(1, 2),
            pseudo_inverse: DMatrix::zeros(2, 1),
        };
        let x = taylor_pseudoinverse(&strat, &DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn analytic_degree_one_matches_feature_map_jacobian() {
        for kernel in [Kernel::Linear, Kernel::Polynomial { degree: 1 }] {
            let (_, _, map) = build(&system_2d(), kernel, 60, 2);
            let strat = JacobianStrategy::poly_analytic(&map).unwrap();
            let x_r = DVector::from_column_slice(&[0.3, -0.8]);
            let analytic = poly_jacobian_at_preimage(&strat, &map, &x_r).unwrap();
            let direct = map
                .jacobian(&DVector::from_column_slice(&[5.0, 1.0]))
                .unwrap();
            assert!((&analytic - &direct).amax() <= 1e-10 * direct.amax());
        }
    }

    #[test]
    fn analytic_jacobian_vanishes_at_origin() {
        let (_, _, map) = build(&system_2d(), Kernel::Polynomial { degree: 3 }, 60, 1);
        let strat = JacobianStrategy::poly_analytic(&map).unwrap();
        let j = poly_jacobian_at_preimage(&strat, &map, &DVector::zeros(1)).unwrap();
        assert_eq!(j.shape(), (1, 2));
        assert!(j.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn analytic_rejects_gaussian() {
        let (_, _, map) = build(&system_2d(), Kernel::Gaussian { gamma: 1.0 }, 40, 1);
        assert!(matches!(
            JacobianStrategy::poly_analytic(&map),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn signed_power_branch() {
        assert!((signed_power(-8.0, 3) - 4.0).abs() < 1e-14);
        assert!((signed_power(8.0, 3) - 4.0).abs() < 1e-14);
        assert!((signed_power(-4.0, 2) + 2.0).abs() < 1e-14);
        assert_eq!(signed_power(0.0, 3), 0.0);
        assert_eq!(signed_power(-3.0, 1), 1.0);
    }

    /// Explicit cubic feature map on ℝ¹ for `(1 + xy)³`.
    fn cubic_features(x: f64) -> DVector<f64> {
        let r3 = 3f64.sqrt();
        DVector::from_column_slice(&[1.0, r3 * x, r3 * x * x, x * x * x])
    }

    #[test]
    fn balanced_rows_gram_identity() {
        // 1-state system so the polynomial feature space is 4-dimensional
        let (ens, _, map) = build(
            &system_2d_reference(),
            Kernel::Polynomial { degree: 3 },
            120,
            2,
        );
        let feats: Vec<_> = ens
            .obs_samples
            .iter()
            .map(|d| cubic_features(d[0]))
            .collect();
        let mean = feats.iter().fold(DVector::zeros(4), |acc, f| acc + f) / feats.len() as f64;
        let psi = DMatrix::from_columns(&feats.iter().map(|f| f - &mean).collect::<Vec<_>>());
        let m_q = map.transform.transpose() * psi.transpose();
        let gram_rows = &m_q * m_q.transpose();
        let rel = (&gram_rows - &map.balanced_gram).norm() / map.balanced_gram.norm();
        assert!(rel <= 1e-8, "rel {rel}");
    }

    fn toy_model(jacobian_kind: &str) -> (ReducedModel, DMatrix<f64>, DMatrix<f64>) {
        // ẋ = Ax + Bu with an affine Π; f̂ fit with a linear kernel on
        // exact samples reproduces f(Π^{-1}(x_r), u) exactly.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let map = affine_map();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..30 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let u = rng.random_range(-1.0..1.0);
            let xr = map.reduce(&x).unwrap();
            inputs.push(DVector::from_column_slice(&[xr[0], xr[1], u]));
            targets.push(&a * &x + &b * u);
        }
        let f_hat = fit(&Kernel::Linear, &inputs, &targets, 1e-14, true).unwrap();
        let h_inputs: Vec<_> = inputs.iter().map(|z| z.rows(0, 2).into_owned()).collect();
        let h_targets: Vec<_> = h_inputs
            .iter()
            .map(|z| DVector::from_element(1, z[0]))
            .collect();
        let h_hat = fit(&Kernel::Linear, &h_inputs, &h_targets, 1e-12, true).unwrap();
        let strat = match jacobian_kind {
            "taylor" => JacobianStrategy::taylor(&map, &DVector::zeros(2)).unwrap(),
            _ => JacobianStrategy::poly_analytic(&map).unwrap(),
        };
        (
            ReducedModel::new("toy", map, f_hat, h_hat, strat).unwrap(),
            a,
            b,
        )
    }

    #[test]
    fn closed_rhs_on_affine_reduction() {
        let (model, a, b) = toy_model("taylor");
        let j = model.map.jacobian(&DVector::zeros(2)).unwrap();
        let j_inv = j.clone().try_inverse().unwrap();
        let c = model.reduce(&DVector::zeros(2)).unwrap();
        for (xr, u) in [([0.1, -0.2], 0.3), ([1.0, 0.5], -1.0)] {
            let xr = DVector::from_column_slice(&xr);
            let x = &j_inv * (&xr - &c);
            let expected = &j * (&a * &x + &b * u);
            let got = model.closed_rhs(&xr, &DVector::from_element(1, u)).unwrap();
            assert!(
                (&got - &expected).amax() <= 1e-6 * expected.amax().max(1.0),
                "{got} vs {expected}"
            );
            assert_eq!(got.len(), 2);
        }
        let (poly, _, _) = toy_model("poly");
        let xr = DVector::from_column_slice(&[0.4, 0.1]);
        let u = DVector::from_element(1, 0.2);
        let diff = (poly.closed_rhs(&xr, &u).unwrap() - model.closed_rhs(&xr, &u).unwrap()).amax();
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn zero_dynamics_regressor_freezes_state() {
        let (mut model, _, _) = toy_model("taylor");
        model.dynamics.coeffs.fill(0.0);
        let rhs = model
            .closed_rhs(
                &DVector::from_column_slice(&[0.5, 0.5]),
                &DVector::from_element(1, 1.0),
            )
            .unwrap();
        assert!(rhs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn json_round_trip_is_exact() {
        for kind in ["taylor", "poly"] {
            let (model, _, _) = toy_model(kind);
            let text = model.to_json();
            let back = ReducedModel::from_json(&text).unwrap();
            assert_eq!(back, model);
            let xr = DVector::from_column_slice(&[0.3, -0.4]);
            let u = DVector::from_element(1, 0.7);
            let diff =
                (back.closed_rhs(&xr, &u).unwrap() - model.closed_rhs(&xr, &u).unwrap()).amax();
            assert!(diff <= 1e-12);
            assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn simulate_shapes_and_determinism() {
        let (model, _, _) = toy_model("taylor");
        let grid = SampleGrid::new(1.0, 20, 1e-3).unwrap();
        let x0 = model.reduce(&DVector::zeros(2)).unwrap();
        let a = model
            .simulate(&x0, &crate::signals::test_input(), &grid)
            .unwrap();
        let b = simulate_reduced(&model, &x0, &crate::signals::test_input(), &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert_eq!(a.states[0].len(), 2);
        assert_eq!(a.outputs[0].len(), 1);

        // the affine toy reproduces the full linear system
        let sys = linear_system(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        let full = integrate(
            &sys,
            &DVector::zeros(2),
            &crate::signals::test_input(),
            &grid,
        )
        .unwrap();
        let j_inv = model
            .map
            .jacobian(&DVector::zeros(2))
            .unwrap()
            .try_inverse()
            .unwrap();
        for (xr, x) in a.states.iter().zip(&full.states) {
            let back = &j_inv * (xr - &x0);
            assert!((back - x).amax() < 1e-6);
        }
    }

    #[test]
    fn model_rejects_inconsistent_parts() {
        let (model, _, _) = toy_model("taylor");
        let res = ReducedModel::new(
            "bad",
            model.map.clone(),
            model.output.clone(),
            model.output.clone(),
            model.jacobian.clone(),
        );
        assert!(res.is_err());
    }
}
