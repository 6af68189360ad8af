//! Continuous-time control systems `ẋ = f(x, u)`, `y = h(x)` and the built-in
//! benchmark systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

type VectorField = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;
type OutputMap = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A control-affine-or-not system with state dimension `n`, `m` inputs and
/// `p` outputs. Cloning is cheap; the closures are shared.
#[derive(Clone)]
pub struct ControlSystem {
    name: String,
    n: usize,
    m: usize,
    p: usize,
    dynamics: Arc<VectorField>,
    output: Arc<OutputMap>,
}

impl fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

impl ControlSystem {
    /// Wraps user-supplied dynamics and output closures.
    pub fn new<F, H>(
        name: impl Into<String>,
        n: usize,
        m: usize,
        p: usize,
        dynamics: F,
        output: H,
    ) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            n,
            m,
            p,
            dynamics: Arc::new(dynamics),
            output: Arc::new(output),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    /// Evaluates `f(x, u)`.
    ///
    /// Panics if `x` or `u` have the wrong length.
    pub fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n, "{}: state dimension", self.name);
        assert_eq!(u.len(), self.m, "{}: input dimension", self.name);
        (self.dynamics)(x, u)
    }

    /// Evaluates `h(x)`.
    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n, "{}: state dimension", self.name);
        (self.output)(x)
    }
}

/// Two-state polynomial system that is exactly reducible to one state.
///
/// ```text
/// ẋ₁ = −3x₁³ + x₁²x₂ + 2x₁x₂² − x₂³
/// ẋ₂ = 2x₁³ − 10x₁²x₂ + 10x₁x₂² − 3x₂³ − u
/// y  = 2x₁ − x₂
/// ```
pub fn system_2d() -> ControlSystem {
    ControlSystem::new(
        "2d",
        2,
        1,
        1,
        |x, u| {
            let (x1, x2) = (x[0], x[1]);
            DVector::from_vec(vec![
                -3.0 * x1.powi(3) + x1 * x1 * x2 + 2.0 * x1 * x2 * x2 - x2.powi(3),
                2.0 * x1.powi(3) - 10.0 * x1 * x1 * x2 + 10.0 * x1 * x2 * x2
                    - 3.0 * x2.powi(3)
                    - u[0],
            ])
        },
        |x| DVector::from_element(1, 2.0 * x[0] - x[1]),
    )
}

/// The one-state system `ż = −z³ + u`, `y = z`, with the same input-output
/// map as [`system_2d`].
pub fn system_2d_reference() -> ControlSystem {
    ControlSystem::new(
        "2d-reference",
        1,
        1,
        1,
        |z, u| DVector::from_element(1, -z[0].powi(3) + u[0]),
        |z| z.clone(),
    )
}

/// Seven-state polynomial benchmark with a scalar input and output.
pub fn system_7d() -> ControlSystem {
    ControlSystem::new(
        "7d",
        7,
        1,
        1,
        |x, u| {
            let (x1, x2, x3, x4, x5, x6, x7) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
            let u = u[0];
            DVector::from_vec(vec![
                -x1.powi(3) + u,
                -x2.powi(3) - x1 * x1 * x2 + 3.0 * x1 * x2 * x2 - u,
                -x3.powi(3) + x5 + u,
                -x4.powi(3) + x1 - x2 + x3 + 2.0 * u,
                x1 * x2 * x3 - x5.powi(3) + u,
                x5 - x6.powi(3) - x5.powi(3) + 2.0 * u,
                -2.0 * x6.powi(3) + 2.0 * x5 - x7 - x5.powi(3) + 4.0 * u,
            ])
        },
        |x| {
            DVector::from_element(
                1,
                x[0] - x[1] * x[1] + x[2] + x[3] * x[2] + x[4] - 2.0 * x[5] + 2.0 * x[6],
            )
        },
    )
}

/// `ẋ = Ax + Bu`, `y = Cx` with a Hurwitz `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty state matrix".into()));
        }
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("C columns", n, c.ncols())?;
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "B and C need at least one column / row".into(),
            ));
        }
        let max_real_part = a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(max_real_part < 0.0) {
            return Err(Error::NotHurwitz { max_real_part });
        }
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn to_system(&self) -> ControlSystem {
        let (a, b, c) = (self.a.clone(), self.b.clone(), self.c.clone());
        ControlSystem::new(
            "linear",
            self.state_dim(),
            self.input_dim(),
            self.output_dim(),
            move |x, u| &a * x + &b * u,
            move |x| &c * x,
        )
    }
}

/// Validates `(A, B, C)` and wraps it as a [`ControlSystem`].
pub fn linear_system(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<ControlSystem> {
    Ok(LinearSystem::new(a, b, c)?.to_system())
}
