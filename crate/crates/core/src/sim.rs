//! Fixed-step RK4 integration sampled on the regular partition
//! `t_i = i·T/N`, `i = 1..N`.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::signals::Signal;
use crate::systems::ControlSystem;

/// Default RK4 step in seconds.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Relative slack allowed when checking that the step divides `T/N`.
const STEP_FIT_TOL: f64 = 1e-9;

/// Horizon `T`, sample count `N` and an RK4 step that divides `T/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    horizon: f64,
    samples: usize,
    step: f64,
    substeps: usize,
}

impl SampleGrid {
    /// Fails unless `step` divides `horizon / samples` into a whole number
    /// of substeps.
    pub fn new(horizon: f64, samples: usize, step: f64) -> Result<Self> {
        Self::validate(horizon, samples, step)?;
        let interval = horizon / samples as f64;
        let substeps = (interval / step).round();
        if substeps < 1.0 || ((substeps * step - interval).abs() > STEP_FIT_TOL * interval) {
            return Err(Error::IncompatibleStep { step, interval });
        }
        Ok(Self {
            horizon,
            samples,
            step: interval / substeps,
            substeps: substeps as usize,
        })
    }

    /// Uses the largest step not exceeding `max_step` that divides `T/N`.
    pub fn with_max_step(horizon: f64, samples: usize, max_step: f64) -> Result<Self> {
        Self::validate(horizon, samples, max_step)?;
        let interval = horizon / samples as f64;
        let substeps = (interval / max_step * (1.0 - STEP_FIT_TOL)).ceil().max(1.0);
        Ok(Self {
            horizon,
            samples,
            step: interval / substeps,
            substeps: substeps as usize,
        })
    }

    fn validate(horizon: f64, samples: usize, step: f64) -> Result<()> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {step}"
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Effective RK4 step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn interval(&self) -> f64 {
        self.horizon / self.samples as f64
    }

    /// `t_i = i·T/N` for `i = 1..=N`.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.samples).map(|i| self.time(i)).collect()
    }

    fn time(&self, i: usize) -> f64 {
        i as f64 * self.horizon / self.samples as f64
    }
}

/// States, outputs and the applied input recorded at the sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,x1..xn,y1..yp` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let p = self.outputs.first().map_or(0, |y| y.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=p).map(|i| format!("y{i}")));
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), y) in self.times.iter().zip(&self.states).zip(&self.outputs) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(x.iter().copied())
                .chain(y.iter().copied())
                .map(fmt_f64)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sampled states and the inputs applied at the same instants.
pub type Sampled = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Classical RK4 on `ẋ = rhs(x, u(t))`, returning the states and inputs at
/// the grid's sample times.
///
/// The first stage sees the right limit `u(t⁺)`, the middle stages
/// `u(t + h/2)` and the last stage the left limit `u((t + h)⁻)`.
pub fn rk4_sampled<F>(
    rhs: F,
    x0: &DVector<f64>,
    input: &Signal,
    grid: &SampleGrid,
) -> Result<Sampled>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let h = grid.step;
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(grid.samples);
    let mut inputs = Vec::with_capacity(grid.samples);
    for i in 0..grid.samples {
        let t_start = grid.time(i);
        for k in 0..grid.substeps {
            let t = t_start + k as f64 * h;
            let u0 = input.eval_right(t);
            let u_mid = input.eval(t + 0.5 * h);
            let u1 = input.eval_left(t + h);
            let k1 = rhs(&x, &u0)?;
            let k2 = rhs(&(&x + &k1 * (0.5 * h)), &u_mid)?;
            let k3 = rhs(&(&x + &k2 * (0.5 * h)), &u_mid)?;
            let k4 = rhs(&(&x + &k3 * h), &u1)?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: t + h });
            }
        }
        let t_sample = grid.time(i + 1);
        states.push(x.clone());
        inputs.push(input.eval(t_sample));
    }
    Ok((states, inputs))
}

/// Simulates `sys` from `x0` under `input` and samples states and outputs.
pub fn integrate(
    sys: &ControlSystem,
    x0: &DVector<f64>,
    input: &Signal,
    grid: &SampleGrid,
) -> Result<Trajectory> {
    check_dim("initial state", sys.state_dim(), x0.len())?;
    check_dim("input signal channels", sys.input_dim(), input.dim())?;
    let (states, inputs) = rk4_sampled(|x, u| Ok(sys.dynamics(x, u)), x0, input, grid)?;
    let outputs = states.iter().map(|x| sys.output(x)).collect();
    Ok(Trajectory {
        times: grid.times(),
        states,
        outputs,
        inputs,
    })
}

/// One trajectory per input channel, each driven from rest by a unit-area
/// pulse one integrator step wide.
pub fn impulse_responses(sys: &ControlSystem, grid: &SampleGrid) -> Result<Vec<Trajectory>> {
    let x0 = DVector::zeros(sys.state_dim());
    (0..sys.input_dim())
        .into_par_iter()
        .map(|channel| {
            let pulse = Signal::impulse(channel, grid.step(), sys.input_dim())?;
            integrate(sys, &x0, &pulse, grid)
        })
        .collect()
}

/// One unforced trajectory per state coordinate, started at `e_i`.
pub fn output_responses(sys: &ControlSystem, grid: &SampleGrid) -> Result<Vec<Trajectory>> {
    let zero = Signal::zero(sys.input_dim());
    (0..sys.state_dim())
        .into_par_iter()
        .map(|i| {
            let mut x0 = DVector::zeros(sys.state_dim());
            x0[i] = 1.0;
            integrate(sys, &x0, &zero, grid)
        })
        .collect()
}
