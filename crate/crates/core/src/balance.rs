//! Hankel singular values, order selection, the nonlinear reduction map
//! `Π(x) = T_qᵀ k̃_o(x)`, and kernel PCA.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::empirical::{KernelMatrices, ObservabilityFeatureMap, SampleEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{gram, Kernel};
use crate::linalg::{left_svd, numerical_rank, symmetric_eigen_desc, RANK_TOL};

/// Default ratio `σ_q / σ_{q+1}` that counts as a spectral gap.
pub const DEFAULT_GAP_RATIO: f64 = 10.0;

/// Singular values of `K_oc` and its left singular vectors, so that
/// `K_oc K_ocᵀ = V Σ² Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelSpectrum {
    /// `σ_i(K_oc)`, descending.
    pub values: Vec<f64>,
    /// Left singular vectors, one column per value.
    pub vectors: DMatrix<f64>,
}

impl HankelSpectrum {
    /// `σ_i(K_ocᵀK_oc) = σ_i(K_oc)²`, the quantity commonly tabulated.
    pub fn gram_values(&self) -> Vec<f64> {
        self.values.iter().map(|s| s * s).collect()
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.values)
    }

    /// Order selection with gap ratios taken on `σ_i(K_ocᵀK_oc)` and the
    /// rank on `σ_i(K_oc)`.
    pub fn select_order(&self, policy: OrderPolicy) -> Result<usize> {
        select_with_rank(&self.gram_values(), self.rank(), policy)
    }
}

/// SVD of the (centered) Hankel kernel matrix.
pub fn hankel_spectrum(k_oc: &DMatrix<f64>) -> Result<HankelSpectrum> {
    if k_oc.is_empty() {
        return Err(Error::InvalidArgument("empty Hankel kernel matrix".into()));
    }
    let (values, vectors) = left_svd(k_oc)?;
    Ok(HankelSpectrum { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrderPolicy {
    /// Smallest `q` with `values[q] / values[q+1] ≥ ratio`.
    Auto {
        ratio: f64,
    },
    Fixed(usize),
}

impl Default for OrderPolicy {
    fn default() -> Self {
        OrderPolicy::Auto {
            ratio: DEFAULT_GAP_RATIO,
        }
    }
}

/// Picks the reduced order from a descending spectrum.
///
/// `Auto` stops at the first ratio that clears the threshold, or at the
/// numerical rank if none does before the spectrum falls below
/// `1e-10 · values[0]`.
pub fn select_order(values: &[f64], policy: OrderPolicy) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    select_with_rank(values, numerical_rank(values), policy)
}

fn select_with_rank(values: &[f64], rank: usize, policy: OrderPolicy) -> Result<usize> {
    match policy {
        OrderPolicy::Fixed(0) => Err(Error::InvalidArgument("reduced order must be >= 1".into())),
        OrderPolicy::Fixed(q) if q > rank => Err(Error::RankExceeded { requested: q, rank }),
        OrderPolicy::Fixed(q) => Ok(q),
        OrderPolicy::Auto { ratio } => {
            if !(ratio > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "gap ratio must exceed 1, got {ratio}"
                )));
            }
            if rank == 0 {
                return Err(Error::RankExceeded { requested: 1, rank });
            }
            Ok((1..rank)
                .find(|&q| values[q - 1] / values[q] >= ratio)
                .unwrap_or(rank))
        }
    }
}

/// `Π(x) = T_qᵀ k̃_o(x)` with `T_q = V_q Σ_q^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionMap {
    /// All singular values of the centered `K_oc`, descending.
    pub hankel_values: Vec<f64>,
    /// `V_q`, `M × q`.
    #[serde(with = "crate::serde_rows::matrix")]
    pub basis: DMatrix<f64>,
    /// `T_q`, `M × q`.
    #[serde(with = "crate::serde_rows::matrix")]
    pub transform: DMatrix<f64>,
    /// `T_qᵀ K̃_o T_q`, the Gram matrix of the balanced feature-space rows.
    #[serde(with = "crate::serde_rows::matrix")]
    pub balanced_gram: DMatrix<f64>,
    pub feature_map: ObservabilityFeatureMap,
}

/// Computes the spectrum of `mats.k_oc` and builds the order-`q` map.
pub fn build_reduction_map(
    mats: &KernelMatrices,
    ens: &SampleEnsemble,
    q: usize,
) -> Result<ReductionMap> {
    let spectrum = hankel_spectrum(&mats.k_oc)?;
    ReductionMap::from_spectrum(mats, ens, &spectrum, q)
}

impl ReductionMap {
    pub fn from_spectrum(
        mats: &KernelMatrices,
        ens: &SampleEnsemble,
        spectrum: &HankelSpectrum,
        q: usize,
    ) -> Result<Self> {
        let rank = spectrum.rank();
        if q == 0 {
            return Err(Error::InvalidArgument("reduced order must be >= 1".into()));
        }
        if q > rank {
            return Err(Error::RankExceeded { requested: q, rank });
        }
        check_dim("spectrum rows", mats.k_oc.nrows(), spectrum.vectors.nrows())?;
        let basis = spectrum.vectors.columns(0, q).into_owned();
        let mut transform = basis.clone();
        for (mut col, sigma) in transform.column_iter_mut().zip(&spectrum.values) {
            col /= sigma.sqrt();
        }
        let balanced_gram = transform.transpose() * mats.k_o_centered() * &transform;
        let balanced_gram = (&balanced_gram + balanced_gram.transpose()) * 0.5;
        Ok(Self {
            hankel_values: spectrum.values.clone(),
            basis,
            transform,
            balanced_gram,
            feature_map: mats.feature_map(ens)?,
        })
    }

    pub fn order(&self) -> usize {
        self.transform.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.feature_map.state_dim()
    }

    /// `Π(x)`.
    pub fn reduce(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.transform.tr_mul(&self.feature_map.eval(x)?))
    }

    /// `J_Π(x) = T_qᵀ (I − (1/M)11ᵀ) ∂k_o/∂x`, `q × n`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.transform.tr_mul(&self.feature_map.jacobian(x)?))
    }
}

/// Free-function form of [`ReductionMap::reduce`].
pub fn reduce(map: &ReductionMap, x: &DVector<f64>) -> Result<DVector<f64>> {
    map.reduce(x)
}

/// Kernel PCA on a point set, used to cross-check the centering and
/// normalization conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPca {
    pub kernel: Kernel,
    pub points: Vec<DVector<f64>>,
    /// Eigenvalues `Nλ` of the double-centered Gram matrix, descending.
    pub gram_eigenvalues: Vec<f64>,
    /// `A_q`, columns scaled so that `α_iᵀ K̃ α_i = 1`.
    pub coefficients: DMatrix<f64>,
    gram_row_means: DVector<f64>,
    gram_mean: f64,
}

fn double_center(k: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
    let means = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.mean()));
    let grand = k.mean();
    let centered = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        k[(i, j)] - means[i] - means[j] + grand
    });
    (centered, means, grand)
}

/// Eigenvalues of the double-centered Gram matrix of `points`, descending.
pub fn kpca_spectrum(points: &[DVector<f64>], kernel: &Kernel) -> Result<Vec<f64>> {
    let (centered, _, _) = double_center(&gram(kernel, points)?);
    Ok(symmetric_eigen_desc(&centered).0)
}

/// Fits kernel PCA with `q` components.
pub fn kpca(points: &[DVector<f64>], kernel: &Kernel, q: usize) -> Result<KernelPca> {
    let (centered, means, grand) = double_center(&gram(kernel, points)?);
    let (values, vectors) = symmetric_eigen_desc(&centered);
    let max = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = values
        .iter()
        .filter(|&&v| max > 0.0 && v > RANK_TOL * max)
        .count();
    if q == 0 || q > rank {
        return Err(Error::RankExceeded { requested: q, rank });
    }
    let mut coefficients = vectors.columns(0, q).into_owned();
    for (mut col, mu) in coefficients.column_iter_mut().zip(&values) {
        col /= mu.sqrt();
    }
    Ok(KernelPca {
        kernel: *kernel,
        points: points.to_vec(),
        gram_eigenvalues: values,
        coefficients,
        gram_row_means: means,
        gram_mean: grand,
    })
}

impl KernelPca {
    /// Eigenvalues `λ` of the feature-space covariance, i.e. Gram
    /// eigenvalues divided by the number of points.
    pub fn covariance_eigenvalues(&self) -> Vec<f64> {
        let count = self.points.len() as f64;
        self.gram_eigenvalues.iter().map(|v| v / count).collect()
    }

    /// `A_qᵀ k̃(x)` with the test vector centered against the training set.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("kpca argument", self.points[0].len(), x.len())?;
        let mut k = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| self.kernel.value(x.as_slice(), p.as_slice())),
        );
        let mean = k.mean();
        for (v, r) in k.iter_mut().zip(self.gram_row_means.iter()) {
            *v = *v - r - mean + self.gram_mean;
        }
        Ok(self.coefficients.tr_mul(&k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{build_kernel_matrices, collect_samples};
    use crate::sim::SampleGrid;
    use crate::systems::{system_2d, system_7d};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn spectrum_of_diagonal() {
        let s = hankel_spectrum(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.values, vec![2.0, 1.0]);
        assert_eq!(s.gram_values(), vec![4.0, 1.0]);
        let z = hankel_spectrum(&DMatrix::zeros(3, 3)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert_eq!(z.rank(), 0);
    }

    #[test]
    fn spectrum_matches_symmetric_eigensolve() {
        let a = random_matrix(5, 3, 11);
        let s = hankel_spectrum(&a).unwrap();
        let mut eig: Vec<f64> = (&a * a.transpose())
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        for (sq, e) in s.gram_values().iter().zip(&eig) {
            assert!((sq - e).abs() <= 1e-10 * eig[0], "{sq} vs {e}");
        }
        assert!(eig[3..].iter().all(|e| e.abs() < 1e-10));
    }

    #[test]
    fn order_selection() {
        let auto = OrderPolicy::default();
        assert_eq!(select_order(&[100.0, 1.0, 0.5], auto).unwrap(), 1);
        assert_eq!(select_order(&[100.0, 90.0, 0.1], auto).unwrap(), 2);
        assert_eq!(select_order(&[100.0, 90.0, 80.0], auto).unwrap(), 3);
        assert_eq!(select_order(&[5.0, 4.0, 1e-13], auto).unwrap(), 2);
        assert_eq!(
            select_order(&[5.0, 4.0, 3.0], OrderPolicy::Fixed(2)).unwrap(),
            2
        );
        match select_order(&[1.0, 0.0, 0.0], OrderPolicy::Fixed(2)) {
            Err(Error::RankExceeded {
                requested: 2,
                rank: 1,
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(select_order(&[0.0, 0.0], auto).is_err());
        assert!(select_order(&[], auto).is_err());
    }

    #[test]
    fn spectrum_order_uses_squared_gaps_and_singular_rank() {
        let spectrum = HankelSpectrum {
            values: vec![10.0, 2.0, 1e-6, 0.0],
            vectors: DMatrix::identity(4, 4),
        };
        // 10/2 = 5 misses the threshold, 100/4 = 25 clears it
        assert_eq!(spectrum.select_order(OrderPolicy::default()).unwrap(), 1);
        // 1e-6 survives the rank cut on σ even though σ² = 1e-12 would not
        assert_eq!(spectrum.select_order(OrderPolicy::Fixed(3)).unwrap(), 3);
        assert!(spectrum.select_order(OrderPolicy::Fixed(4)).is_err());
    }

    fn pipeline_2d(samples: usize) -> (SampleEnsemble, KernelMatrices, HankelSpectrum) {
        let grid = SampleGrid::with_max_step(5.0, samples, 1e-3).unwrap();
        let ens = collect_samples(&system_2d(), &grid).unwrap();
        let mats = build_kernel_matrices(&ens, &Kernel::Polynomial { degree: 3 }).unwrap();
        let spec = hankel_spectrum(&mats.k_oc).unwrap();
        (ens, mats, spec)
    }

    #[test]
    fn transform_scales_by_inverse_root() {
        let (ens, mats, mut spec) = pipeline_2d(50);
        spec.values[0] = 4.0;
        let map = ReductionMap::from_spectrum(&mats, &ens, &spec, 1).unwrap();
        let expected = spec.vectors.column(0) * 0.5;
        assert!((map.transform.column(0) - expected).amax() < 1e-15);
    }

    #[test]
    fn balancing_identities() {
        let (ens, mats, spec) = pipeline_2d(200);
        let q = 2;
        let map = ReductionMap::from_spectrum(&mats, &ens, &spec, q).unwrap();
        assert_eq!(map.order(), q);

        let vtv = map.basis.tr_mul(&map.basis);
        assert!((vtv - DMatrix::identity(q, q)).norm() <= 1e-10);

        let recovered =
            map.transform.transpose() * &mats.k_oc * mats.k_oc.transpose() * &map.transform;
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.values[..q]));
        let rel = (&recovered - &sigma).norm() / sigma.norm();
        assert!(rel <= 1e-8, "recovery rel error {rel}");

        let eig = map.balanced_gram.clone().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
        assert!(
            (&map.balanced_gram - map.balanced_gram.transpose()).amax()
                <= 1e-12 * map.balanced_gram.amax()
        );
    }

    #[test]
    fn reduce_at_training_samples() {
        let (ens, mats, spec) = pipeline_2d(100);
        let map = ReductionMap::from_spectrum(&mats, &ens, &spec, 1).unwrap();
        for nu in [0, 17, 99] {
            let expected = map.transform.tr_mul(&mats.k_oc.column(nu).into_owned());
            let got = map.reduce(&ens.ctrl_samples[nu]).unwrap();
            assert!((got - expected).amax() <= 1e-12 * mats.k_oc_raw.amax());
        }
        assert_eq!(map.reduce(&DVector::zeros(2)).unwrap().len(), 1);
        assert!(map.reduce(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn order_beyond_rank_fails() {
        let (ens, mats, spec) = pipeline_2d(50);
        let rank = spec.rank();
        assert!(matches!(
            ReductionMap::from_spectrum(&mats, &ens, &spec, rank + 1),
            Err(Error::RankExceeded { .. })
        ));
        let map = ReductionMap::from_spectrum(&mats, &ens, &spec, rank).unwrap();
        assert_eq!(
            map.reduce(&DVector::from_column_slice(&[0.1, 0.2]))
                .unwrap()
                .len(),
            rank
        );
    }

    #[test]
    fn degenerate_observability_samples_map_to_zero() {
        let p = DVector::from_column_slice(&[0.5, 0.5]);
        let ctrl: Vec<_> = (0..5)
            .map(|i| DVector::from_column_slice(&[i as f64, 1.0]))
            .collect();
        let ens = SampleEnsemble::new(ctrl, vec![p; 5], 5, 1.0, (2, 1, 1)).unwrap();
        let mats = build_kernel_matrices(&ens, &Kernel::Polynomial { degree: 2 }).unwrap();
        let fmap = mats.feature_map(&ens).unwrap();
        let x = DVector::from_column_slice(&[3.0, -1.0]);
        assert!(fmap.eval(&x).unwrap().amax() < 1e-12);
        // the centered Hankel matrix vanishes, so no map of order >= 1 exists
        assert!(build_reduction_map(&mats, &ens, 1).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let grid = SampleGrid::with_max_step(5.0, 60, 1e-3).unwrap();
        let ens = collect_samples(&system_7d(), &grid).unwrap();
        let k = Kernel::Polynomial { degree: 3 };
        let base = hankel_spectrum(&build_kernel_matrices(&ens, &k).unwrap().k_oc).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut shuffled = ens.clone();
        for i in (1..shuffled.obs_samples.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.obs_samples.swap(i, j);
            let j = rng.random_range(0..=i);
            shuffled.ctrl_samples.swap(i, j);
        }
        let perm = hankel_spectrum(&build_kernel_matrices(&shuffled, &k).unwrap().k_oc).unwrap();
        for (a, b) in base.values.iter().zip(&perm.values) {
            assert!((a - b).abs() <= 1e-10 * base.values[0], "{a} vs {b}");
        }
    }

    #[test]
    fn kpca_matches_covariance_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let points: Vec<_> = (0..30)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                DVector::from_column_slice(&[2.0 * a + 0.3, 0.5 * a + 0.2 * b - 1.0])
            })
            .collect();
        let fit = kpca(&points, &Kernel::Linear, 2).unwrap();

        let count = points.len() as f64;
        let mean = points.iter().fold(DVector::zeros(2), |acc, p| acc + p) / count;
        let cov = points.iter().fold(DMatrix::zeros(2, 2), |acc, p| {
            acc + (p - &mean) * (p - &mean).transpose()
        }) / count;
        let mut expected: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        let got = fit.covariance_eigenvalues();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-10, "{g} vs {e}");
        }
        assert!(got[2..].iter().all(|v| v.abs() <= 1e-10));

        // unit-norm feature-space directions
        let (centered, _, _) = double_center(&gram(&Kernel::Linear, &points).unwrap());
        for alpha in fit.coefficients.column_iter() {
            let norm = (alpha.transpose() * &centered * alpha)[(0, 0)];
            assert!((norm - 1.0).abs() <= 1e-10, "{norm}");
        }

        // projections of training points: (K̃α)_i = μ α_i
        let proj = fit.project(&points[4]).unwrap();
        for (k, (c, mu)) in proj.iter().zip(&fit.gram_eigenvalues).enumerate() {
            let expected = mu * fit.coefficients[(4, k)];
            assert!(
                (expected - c).abs() <= 1e-9 * (1.0 + expected.abs()),
                "{c} vs {expected}"
            );
        }
    }

    #[test]
    fn kpca_of_repeated_point() {
        let p = DVector::from_column_slice(&[1.0, 2.0]);
        let values = kpca_spectrum(&vec![p.clone(); 5], &Kernel::Polynomial { degree: 3 }).unwrap();
        assert!(values.iter().all(|v| v.abs() < 1e-9));
        assert!(kpca(&vec![p; 5], &Kernel::Linear, 1).is_err());
    }
}
