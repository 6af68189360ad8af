//! Pipeline configuration: one JSON document, every field defaulted to the
//! reference experiment.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kernel_balance::balance::{OrderPolicy, DEFAULT_GAP_RATIO};
use kernel_balance::regress::KernelChoice;
use kernel_balance::sim::DEFAULT_STEP;
use kernel_balance::systems::{self, ControlSystem, LinearSystem};
use kernel_balance::{Kernel, Signal};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Implements serde through `FromStr`/`Display` so config values read the
/// same as command-line flags.
macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// `2d`, `2d-reference`, `7d` or `linear:FILE`.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    TwoD,
    TwoDReference,
    SevenD,
    Linear(PathBuf),
}

impl FromStr for SystemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "2d" => Ok(SystemSpec::TwoD),
            "2d-reference" => Ok(SystemSpec::TwoDReference),
            "7d" => Ok(SystemSpec::SevenD),
            other => match other.strip_prefix("linear:") {
                Some(path) if !path.is_empty() => Ok(SystemSpec::Linear(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown system '{s}' (expected 2d, 2d-reference, 7d or linear:FILE)"
                )),
            },
        }
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSpec::TwoD => write!(f, "2d"),
            SystemSpec::TwoDReference => write!(f, "2d-reference"),
            SystemSpec::SevenD => write!(f, "7d"),
            SystemSpec::Linear(p) => write!(f, "linear:{}", p.display()),
        }
    }
}

string_serde!(SystemSpec);

/// Row-major `ẋ = Ax + Bu, y = Cx` as stored in `linear:FILE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!(
            "matrix '{name}' must be a non-empty rectangular list of rows"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl LinearFile {
    pub fn from_system(sys: &LinearSystem) -> Self {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        LinearFile {
            a: rows(&sys.a),
            b: rows(&sys.b),
            c: rows(&sys.c),
        }
    }

    pub fn to_system(&self) -> Result<LinearSystem, CliError> {
        LinearSystem::new(
            matrix("a", &self.a)?,
            matrix("b", &self.b)?,
            matrix("c", &self.c)?,
        )
        .map_err(|e| CliError::Config(format!("linear system: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<ControlSystem, CliError> {
        Ok(match self {
            SystemSpec::TwoD => systems::system_2d(),
            SystemSpec::TwoDReference => systems::system_2d_reference(),
            SystemSpec::SevenD => systems::system_7d(),
            SystemSpec::Linear(path) => LinearFile::load(path)?.to_system()?.to_system(),
        })
    }

    pub fn linear(&self) -> Result<Option<LinearSystem>, CliError> {
        match self {
            SystemSpec::Linear(path) => Ok(Some(LinearFile::load(path)?.to_system()?)),
            _ => Ok(None),
        }
    }
}

/// A fixed kernel or `gauss:auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec(pub KernelChoice);

impl FromStr for KernelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "gauss:auto" {
            return Ok(KernelSpec(KernelChoice::GaussianAuto));
        }
        s.parse::<Kernel>()
            .map(|k| KernelSpec(KernelChoice::Fixed(k)))
            .map_err(|_| {
                format!("unknown kernel '{s}' (expected linear, poly:D, gauss:G or gauss:auto)")
            })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            KernelChoice::Fixed(k) => write!(f, "{k}"),
            KernelChoice::GaussianAuto => write!(f, "gauss:auto"),
        }
    }
}

string_serde!(KernelSpec);

/// `auto`, `auto:θ` or a fixed order `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSpec(pub OrderPolicy);

impl FromStr for OrderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("bad order '{s}' (expected auto, auto:RATIO or a positive integer)");
        if s == "auto" {
            return Ok(OrderSpec(OrderPolicy::Auto {
                ratio: DEFAULT_GAP_RATIO,
            }));
        }
        if let Some(ratio) = s.strip_prefix("auto:") {
            let ratio: f64 = ratio.parse().map_err(|_| bad())?;
            if ratio <= 1.0 || !ratio.is_finite() {
                return Err(format!("gap ratio must exceed 1, got {ratio}"));
            }
            return Ok(OrderSpec(OrderPolicy::Auto { ratio }));
        }
        match s.parse::<usize>() {
            Ok(q) if q > 0 => Ok(OrderSpec(OrderPolicy::Fixed(q))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for OrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            OrderPolicy::Auto { ratio } => write!(f, "auto:{ratio}"),
            OrderPolicy::Fixed(q) => write!(f, "{q}"),
        }
    }
}

string_serde!(OrderSpec);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum JacobianKind {
    Taylor,
    Poly,
}

/// `impulse:CH` (1-based channel), `square:FREQ:AMP`, `sine:FREQ:AMP`,
/// `test` or `zero`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalSpec {
    Impulse { channel: usize },
    Square { freq: f64, amplitude: f64 },
    Sine { freq: f64, amplitude: f64 },
    Test,
    Zero,
}

impl FromStr for SignalSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || {
            format!("bad input '{s}' (expected impulse:CH, square:FREQ:AMP, sine:FREQ:AMP, test or zero)")
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["test"] => Ok(SignalSpec::Test),
            ["zero"] => Ok(SignalSpec::Zero),
            ["impulse", ch] => match ch.parse::<usize>() {
                Ok(channel) if channel >= 1 => Ok(SignalSpec::Impulse { channel }),
                _ => Err(bad()),
            },
            ["square", f, a] => Ok(SignalSpec::Square {
                freq: num(f)?,
                amplitude: num(a)?,
            }),
            ["sine", f, a] => Ok(SignalSpec::Sine {
                freq: num(f)?,
                amplitude: num(a)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalSpec::Impulse { channel } => write!(f, "impulse:{channel}"),
            SignalSpec::Square { freq, amplitude } => write!(f, "square:{freq}:{amplitude}"),
            SignalSpec::Sine { freq, amplitude } => write!(f, "sine:{freq}:{amplitude}"),
            SignalSpec::Test => write!(f, "test"),
            SignalSpec::Zero => write!(f, "zero"),
        }
    }
}

string_serde!(SignalSpec);

impl SignalSpec {
    /// Builds the signal for a system with `inputs` channels; impulses are
    /// one integration step wide.
    pub fn build(&self, inputs: usize, step: f64) -> Result<Signal, CliError> {
        let sig = match *self {
            SignalSpec::Impulse { channel } => Signal::impulse(channel - 1, step, inputs),
            SignalSpec::Square { freq, amplitude } => Signal::square(freq, amplitude, 0.0),
            SignalSpec::Sine { freq, amplitude } => Signal::sine(freq, amplitude),
            SignalSpec::Test => Ok(kernel_balance::signals::test_input()),
            SignalSpec::Zero => Ok(Signal::zero(inputs)),
        }
        .map_err(|e| CliError::Config(format!("input '{self}': {e}")))?;
        if sig.dim() != inputs {
            return Err(CliError::Config(format!(
                "input '{self}' has {} channel(s) but the system has {inputs}",
                sig.dim()
            )));
        }
        Ok(sig)
    }
}

/// One simulated training or evaluation run from `x₀ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub input: SignalSpec,
    pub samples: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemSpec,
    /// Kernel of the Hankel kernel matrix.
    pub kernel: KernelSpec,
    pub dynamics_kernel: KernelSpec,
    pub output_kernel: KernelSpec,
    /// Samples per impulse / initial-condition response.
    pub samples: usize,
    pub horizon: f64,
    /// Largest RK4 step; the step used divides every sampling interval.
    pub step: f64,
    pub order: OrderSpec,
    pub jacobian: JacobianKind,
    pub dynamics_training: RunSpec,
    pub dynamics_bias: bool,
    pub output_training: RunSpec,
    pub output_bias: bool,
    pub evaluation: RunSpec,
    /// Seed for the random test system of the oracle command.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            system: SystemSpec::TwoD,
            kernel: KernelSpec(KernelChoice::Fixed(Kernel::Polynomial { degree: 3 })),
            dynamics_kernel: KernelSpec(KernelChoice::Fixed(Kernel::Polynomial { degree: 3 })),
            output_kernel: KernelSpec(KernelChoice::GaussianAuto),
            samples: 800,
            horizon: 5.0,
            step: DEFAULT_STEP,
            order: OrderSpec(OrderPolicy::default()),
            jacobian: JacobianKind::Taylor,
            dynamics_training: RunSpec {
                input: SignalSpec::Square {
                    freq: 10.0,
                    amplitude: 1.0,
                },
                samples: 1000,
                horizon: 5.0,
            },
            dynamics_bias: true,
            output_training: RunSpec {
                input: SignalSpec::Square {
                    freq: 10.0,
                    amplitude: 2.0,
                },
                samples: 700,
                horizon: 5.0,
            },
            output_bias: false,
            evaluation: RunSpec {
                input: SignalSpec::Test,
                samples: 1000,
                horizon: 5.0,
            },
            seed: 0,
            out: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}
