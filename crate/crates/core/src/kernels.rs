//! Mercer kernels with analytic gradients, and Gram matrix assembly.
//!
//! The feature map is never materialized; everything goes through kernel
//! evaluations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// `⟨x, y⟩`
    Linear,
    /// `(1 + ⟨x, y⟩)^degree`
    Polynomial { degree: u32 },
    /// `exp(−γ‖x − y‖²)`; `γ = 1/σ²` for a length scale `σ`.
    Gaussian { gamma: f64 },
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Polynomial { degree } => write!(f, "poly:{degree}"),
            Kernel::Gaussian { gamma } => write!(f, "gauss:{gamma}"),
        }
    }
}

/// Parses `linear`, `poly:D` and `gauss:G`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "unknown kernel '{s}' (expected linear, poly:D or gauss:G)"
            ))
        };
        match s.trim().split_once(':') {
            None if s.trim() == "linear" => Ok(Kernel::Linear),
            Some(("poly", d)) => Kernel::polynomial(d.parse().map_err(|_| bad())?),
            Some(("gauss", g)) => Kernel::gaussian(g.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl Kernel {
    pub fn polynomial(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument(
                "polynomial degree must be >= 1".into(),
            ));
        }
        Ok(Kernel::Polynomial { degree })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gaussian gamma must be positive, got {gamma}"
            )));
        }
        Ok(Kernel::Gaussian { gamma })
    }

    /// Gaussian kernel whose `γ` is the reciprocal of the mean squared
    /// distance over all unordered pairs of distinct indices.
    pub fn gaussian_auto(points: &[DVector<f64>]) -> Result<Self> {
        let count = points.len();
        if count < 2 {
            return Err(Error::InvalidArgument(
                "gamma heuristic needs at least 2 points".into(),
            ));
        }
        let total: f64 = (0..count)
            .into_par_iter()
            .map(|i| {
                points[i + 1..]
                    .iter()
                    .map(|q| sq_dist(points[i].as_slice(), q.as_slice()))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let pairs = (count * (count - 1) / 2) as f64;
        let mean = total / pairs;
        if !(mean > 0.0) {
            return Err(Error::InvalidArgument(
                "gamma heuristic undefined: all training points coincide".into(),
            ));
        }
        Kernel::gaussian(1.0 / mean)
    }

    /// Polynomial degree when the kernel is `(1 + ⟨x,y⟩)^d`, or `1` for the
    /// linear kernel (whose gradient coincides with the degree-1 case).
    pub fn polynomial_degree(&self) -> Option<u32> {
        match self {
            Kernel::Linear => Some(1),
            Kernel::Polynomial { degree } => Some(*degree),
            Kernel::Gaussian { .. } => None,
        }
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim("kernel arguments", x.len(), y.len())?;
        Ok(self.value(x.as_slice(), y.as_slice()))
    }

    /// `∂K(x, y)/∂x` as a row vector.
    pub fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<RowDVector<f64>> {
        check_dim("kernel arguments", x.len(), y.len())?;
        let mut g = RowDVector::zeros(x.len());
        self.add_grad(x.as_slice(), y.as_slice(), 1.0, g.as_mut_slice());
        Ok(g)
    }

    pub(crate) fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(x, y),
            Kernel::Polynomial { degree } => (1.0 + dot(x, y)).powi(degree as i32),
            Kernel::Gaussian { gamma } => (-gamma * sq_dist(x, y)).exp(),
        }
    }

    /// `out += scale · ∂K(x, y)/∂x`.
    pub(crate) fn add_grad(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        match *self {
            Kernel::Linear => {
                for (o, b) in out.iter_mut().zip(y) {
                    *o += scale * b;
                }
            }
            Kernel::Polynomial { degree } => {
                let d = degree as i32;
                let c = scale * f64::from(degree) * (1.0 + dot(x, y)).powi(d - 1);
                for (o, b) in out.iter_mut().zip(y) {
                    *o += c * b;
                }
            }
            Kernel::Gaussian { gamma } => {
                let c = -2.0 * gamma * scale * (-gamma * sq_dist(x, y)).exp();
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o += c * (a - b);
                }
            }
        }
    }
}

fn check_points(context: &'static str, points: &[DVector<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument(format!(
            "{context}: empty point list"
        )));
    };
    let dim = first.len();
    for p in points {
        check_dim(context, dim, p.len())?;
    }
    Ok(dim)
}

/// Gram matrix `K(p_i, p_j)`. The upper triangle is computed and mirrored,
/// so the result is exactly symmetric.
pub fn gram(kernel: &Kernel, points: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    check_points("gram", points)?;
    let count = points.len();
    let rows: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            points[i..]
                .iter()
                .map(|q| kernel.value(points[i].as_slice(), q.as_slice()))
                .collect()
        })
        .collect();
    let mut g = DMatrix::zeros(count, count);
    for (i, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Cross-Gram matrix with entry `(μ, ν) = K(rows_μ, cols_ν)`.
pub fn cross_gram(
    kernel: &Kernel,
    rows: &[DVector<f64>],
    cols: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let dim = check_points("cross_gram rows", rows)?;
    let col_dim = check_points("cross_gram columns", cols)?;
    check_dim("cross_gram point dimension", dim, col_dim)?;
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| {
            cols.iter()
                .map(|c| kernel.value(r.as_slice(), c.as_slice()))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn parse_round_trips_display() {
        for k in [
            Kernel::Linear,
            Kernel::Polynomial { degree: 3 },
            Kernel::Gaussian { gamma: 0.125 },
        ] {
            assert_eq!(k.to_string().parse::<Kernel>().unwrap(), k);
        }
        for bad in ["poly:0", "poly:x", "gauss:-1", "gauss:auto", "rbf", "poly"] {
            assert!(bad.parse::<Kernel>().is_err(), "{bad}");
        }
    }

    fn families() -> [Kernel; 4] {
        [
            Kernel::Linear,
            Kernel::Polynomial { degree: 3 },
            Kernel::Polynomial { degree: 2 },
            Kernel::Gaussian { gamma: 0.7 },
        ]
    }

    #[test]
    fn eval_examples() {
        let p3 = Kernel::Polynomial { degree: 3 };
        assert_eq!(p3.eval(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(p3.eval(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 8.0);
        let g = Kernel::Gaussian { gamma: 3.3 };
        assert_eq!(g.eval(&v(&[0.4, -1.0]), &v(&[0.4, -1.0])).unwrap(), 1.0);
        assert!(p3.eval(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn grad_examples() {
        let p3 = Kernel::Polynomial { degree: 3 };
        let g = p3.grad_x(&v(&[0.0, 0.0]), &v(&[2.0, 0.0])).unwrap();
        assert_eq!(g.as_slice(), &[6.0, 0.0]);
        let g = Kernel::Gaussian { gamma: 2.0 }
            .grad_x(&v(&[1.0, 2.0]), &v(&[1.0, 2.0]))
            .unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
        let g = Kernel::Linear
            .grad_x(&v(&[5.0, -3.0]), &v(&[1.0, 2.0]))
            .unwrap();
        assert_eq!(g.as_slice(), &[1.0, 2.0]);
        assert!(Kernel::Linear.grad_x(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(Kernel::polynomial(0).is_err());
        assert!(Kernel::gaussian(0.0).is_err());
        assert!(Kernel::gaussian(-1.0).is_err());
        assert!(Kernel::gaussian_auto(&[v(&[1.0])]).is_err());
        assert!(Kernel::gaussian_auto(&[v(&[1.0]), v(&[1.0])]).is_err());
    }

    #[test]
    fn gaussian_auto_uses_mean_pairwise_distance() {
        // pairs: (0,1)=1, (0,2)=4, (1,2)=1 → mean 2
        let k = Kernel::gaussian_auto(&[v(&[0.0]), v(&[1.0]), v(&[2.0])]).unwrap();
        assert_eq!(k, Kernel::Gaussian { gamma: 0.5 });
    }

    #[test]
    fn gram_examples() {
        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        assert_eq!(
            gram(&Kernel::Linear, &[e1.clone(), e2.clone()]).unwrap(),
            DMatrix::identity(2, 2)
        );
        let p = v(&[0.3, -0.2]);
        let g = gram(&Kernel::Gaussian { gamma: 1.0 }, std::slice::from_ref(&p)).unwrap();
        assert_eq!(g, DMatrix::from_element(1, 1, 1.0));
        let g = gram(
            &Kernel::Polynomial { degree: 1 },
            &[v(&[0.0, 0.0]), e1.clone()],
        )
        .unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
        assert!(gram(&Kernel::Linear, &[]).is_err());
        assert!(gram(&Kernel::Linear, &[e1, v(&[1.0])]).is_err());
    }

    #[test]
    fn cross_gram_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..5).map(|_| v(&[rng.random(), rng.random()])).collect();
        let k = Kernel::Polynomial { degree: 3 };
        assert_eq!(cross_gram(&k, &pts, &pts).unwrap(), gram(&k, &pts).unwrap());
        let c = cross_gram(&Kernel::Linear, &[v(&[1.0, 0.0])], &[v(&[0.0, 1.0])]).unwrap();
        assert_eq!(c, DMatrix::from_element(1, 1, 0.0));
        assert_eq!(cross_gram(&k, &pts[..3], &pts).unwrap().shape(), (3, 5));
        assert!(cross_gram(&k, &[], &pts).is_err());
        assert!(cross_gram(&k, &pts, &[v(&[1.0])]).is_err());
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in families() {
            for _ in 0..50 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let step = 1e-6;
        for k in families() {
            for _ in 0..100 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let g = k.grad_x(&x, &y).unwrap();
                let fd = RowDVector::from_fn(3, |_, j| {
                    let mut hi = x.clone();
                    let mut lo = x.clone();
                    hi[j] += step;
                    lo[j] -= step;
                    (k.eval(&hi, &y).unwrap() - k.eval(&lo, &y).unwrap()) / (2.0 * step)
                });
                let rel = (&g - &fd).norm() / g.norm().max(1e-3);
                assert!(rel <= 1e-5, "{k}: rel error {rel}");
            }
        }
    }

    #[test]
    fn gram_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..40)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        for k in families() {
            let g = gram(&k, &pts).unwrap();
            let eig = g.symmetric_eigenvalues();
            let max = eig.max();
            assert!(
                eig.min() >= -1e-10 * max,
                "{k}: min eigenvalue {}",
                eig.min()
            );
        }
    }

    fn binomial(n: u32, k: u32) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
    }

    #[test]
    fn polynomial_matches_explicit_feature_map() {
        // on ℝ¹, (1 + xy)^d = Σ_k C(d,k) x^k y^k = ⟨φ(x), φ(y)⟩ with
        // φ_k(x) = sqrt(C(d,k)) x^k
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for degree in 1..=5u32 {
            let k = Kernel::Polynomial { degree };
            let phi = |x: f64| -> Vec<f64> {
                (0..=degree)
                    .map(|j| binomial(degree, j).sqrt() * x.powi(j as i32))
                    .collect()
            };
            for _ in 0..20 {
                let (x, y): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let explicit = dot(&phi(x), &phi(y));
                let direct = k.eval(&v(&[x]), &v(&[y])).unwrap();
                assert!((explicit - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }
}
