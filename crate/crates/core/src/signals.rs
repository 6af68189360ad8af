//! Input signals `u(t)`.

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Distance (in cycles) within which a square-wave phase is snapped onto a
/// switching instant. Sample grids like `k · 1e-3` land a few ulps off the
/// exact switching times otherwise.
const SWITCH_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    /// `u ≡ 0` on `dim` channels.
    Zero {
        dim: usize,
    },
    /// Rectangular unit-area pulse `(1/width)·e_channel` on `[0, width)`.
    /// `channel` is zero-based.
    Impulse {
        channel: usize,
        width: f64,
        dim: usize,
    },
    /// 50% duty square wave `amplitude · sq(2π·freq·t + phase)`.
    Square {
        freq: f64,
        amplitude: f64,
        phase: f64,
    },
    Sine {
        freq: f64,
        amplitude: f64,
    },
    /// `¼(sin(2π·3t) + sq(2π·5t − π/2))`.
    Test,
    Sum(Vec<Signal>),
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal::Zero { dim }
    }

    /// Unit-area pulse on zero-based `channel` of an `m`-channel input.
    pub fn impulse(channel: usize, width: f64, m: usize) -> Result<Self> {
        if channel >= m {
            return Err(Error::InvalidArgument(format!(
                "impulse channel {channel} out of range for {m} inputs"
            )));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "impulse width must be positive, got {width}"
            )));
        }
        Ok(Signal::Impulse {
            channel,
            width,
            dim: m,
        })
    }

    pub fn square(freq: f64, amplitude: f64, phase: f64) -> Result<Self> {
        if !(freq > 0.0) || !freq.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "square wave frequency must be positive, got {freq}"
            )));
        }
        Ok(Signal::Square {
            freq,
            amplitude,
            phase,
        })
    }

    pub fn sine(freq: f64, amplitude: f64) -> Result<Self> {
        if !(freq > 0.0) || !freq.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sine frequency must be positive, got {freq}"
            )));
        }
        Ok(Signal::Sine { freq, amplitude })
    }

    pub fn sum(parts: Vec<Signal>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("empty signal sum".into()));
        };
        let dim = first.dim();
        if let Some(bad) = parts.iter().find(|s| s.dim() != dim) {
            return Err(Error::Dimension {
                context: "signal sum",
                expected: dim,
                actual: bad.dim(),
            });
        }
        Ok(Signal::Sum(parts))
    }

    /// Number of input channels the signal drives.
    pub fn dim(&self) -> usize {
        match self {
            Signal::Zero { dim } | Signal::Impulse { dim, .. } => *dim,
            Signal::Square { .. } | Signal::Sine { .. } | Signal::Test => 1,
            Signal::Sum(parts) => parts.first().map_or(0, Signal::dim),
        }
    }

    /// Value at `t`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.accumulate(t, Side::Point, &mut out);
        out
    }

    /// Left limit `u(t⁻)`. Differs from [`Signal::eval`] only at jumps.
    ///
    /// The integrator evaluates the last stage of each step with the left
    /// limit, so piecewise-constant inputs that switch on the step grid are
    /// integrated exactly and a one-step pulse delivers its full area.
    pub fn eval_left(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.accumulate(t, Side::Left, &mut out);
        out
    }

    /// Right limit `u(t⁺)`, used by the integrator's first stage.
    pub fn eval_right(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.accumulate(t, Side::Right, &mut out);
        out
    }

    fn accumulate(&self, t: f64, side: Side, out: &mut DVector<f64>) {
        match self {
            Signal::Zero { .. } => {}
            Signal::Impulse { channel, width, .. } => {
                let on = match side {
                    Side::Left => t > 0.0 && t <= *width,
                    Side::Point | Side::Right => t >= 0.0 && t < *width,
                };
                if on {
                    out[*channel] += 1.0 / width;
                }
            }
            Signal::Square {
                freq,
                amplitude,
                phase,
            } => out[0] += amplitude * square_cycles(freq * t + phase / TAU, side),
            Signal::Sine { freq, amplitude } => out[0] += amplitude * (TAU * freq * t).sin(),
            Signal::Test => {
                out[0] +=
                    0.25 * ((TAU * 3.0 * t).sin() + square_cycles(5.0 * t - (PI / 2.0) / TAU, side))
            }
            Signal::Sum(parts) => {
                for s in parts {
                    s.accumulate(t, side, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Point,
    Left,
    Right,
}

/// The comparison input used to evaluate reduced models.
pub fn test_input() -> Signal {
    Signal::Test
}

/// Unit square wave `sq(θ)` with `θ = 2π·cycles`: `+1` where `sin θ ≥ 0`,
/// `−1` otherwise. One-sided limits differ only at the switching instants.
fn square_cycles(cycles: f64, side: Side) -> f64 {
    let mut frac = cycles.rem_euclid(1.0);
    let half = (frac * 2.0).round() / 2.0;
    if (frac - half).abs() < SWITCH_SNAP {
        frac = half.rem_euclid(1.0);
    }
    let positive = match side {
        Side::Point => frac <= 0.5,
        Side::Left => frac > 0.0 && frac <= 0.5,
        Side::Right => frac < 0.5,
    };
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Square-wave value `sq(θ)` for an angle in radians.
pub fn sq(theta: f64) -> f64 {
    square_cycles(theta / TAU, Side::Point)
}
