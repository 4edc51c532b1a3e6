//! Shifted benchmark functions on `[-5, 5]^n` with optional busy-wait cost.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{mix_seed, rng_from_seed};

pub const DOMAIN_LOWER: f64 = -5.0;
pub const DOMAIN_UPPER: f64 = 5.0;
const SHIFT_BOUND: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionId {
    Sphere,
    Ellipsoid,
    Rastrigin,
    Rosenbrock,
    StepEllipsoid,
    Discus,
    DiffPowers,
    Schaffers,
    TwoBasins,
}

impl FunctionId {
    pub const ALL: [FunctionId; 9] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoid,
        FunctionId::Rastrigin,
        FunctionId::Rosenbrock,
        FunctionId::StepEllipsoid,
        FunctionId::Discus,
        FunctionId::DiffPowers,
        FunctionId::Schaffers,
        FunctionId::TwoBasins,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::Ellipsoid => "ellipsoid",
            FunctionId::Rastrigin => "rastrigin",
            FunctionId::Rosenbrock => "rosenbrock",
            FunctionId::StepEllipsoid => "step_ellipsoid",
            FunctionId::Discus => "discus",
            FunctionId::DiffPowers => "diff_powers",
            FunctionId::Schaffers => "schaffers",
            FunctionId::TwoBasins => "two_basins",
        }
    }

    /// Difficulty group, 1 (separable) to 5 (multimodal, weak structure).
    pub fn group(self) -> u8 {
        match self {
            FunctionId::Sphere | FunctionId::Ellipsoid | FunctionId::Rastrigin => 1,
            FunctionId::Rosenbrock | FunctionId::StepEllipsoid => 2,
            FunctionId::Discus | FunctionId::DiffPowers => 3,
            FunctionId::Schaffers => 4,
            FunctionId::TwoBasins => 5,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sum of squares",
            FunctionId::Ellipsoid => "separable ellipsoid, condition 1e6",
            FunctionId::Rastrigin => "separable Rastrigin",
            FunctionId::Rosenbrock => "scaled Rosenbrock",
            FunctionId::StepEllipsoid => "step ellipsoid with plateaus",
            FunctionId::Discus => "discus, one sensitive axis",
            FunctionId::DiffPowers => "sum of different powers",
            FunctionId::Schaffers => "Schaffers F7 style, mildly conditioned",
            FunctionId::TwoBasins => "two sphere basins of different depth",
        }
    }

    fn index(self) -> u64 {
        FunctionId::ALL.iter().position(|&f| f == self).unwrap() as u64
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        FunctionId::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown objective `{s}`")))
    }
}

/// One shifted instance: `f(x) = base(x - x_opt) + f_opt`.
#[derive(Debug, Clone)]
pub struct Objective {
    id: FunctionId,
    x_opt: Vec<f64>,
    f_opt: f64,
    /// Offset of the secondary basin, only used by `TwoBasins`.
    secondary: Vec<f64>,
    cost: Duration,
}

impl Objective {
    pub fn new(id: FunctionId, dimension: usize, instance_seed: u64, cost_ms: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(cost_ms >= 0.0 && cost_ms.is_finite()) {
            return Err(Error::Config(format!(
                "invalid evaluation cost {cost_ms} ms"
            )));
        }
        let mut rng = rng_from_seed(mix_seed(instance_seed, &[id.index()]));
        let x_opt: Vec<f64> = (0..dimension)
            .map(|_| rng.random_range(-SHIFT_BOUND..=SHIFT_BOUND))
            .collect();
        let f_opt = (100.0 * rng.random_range(-1000.0..=1000.0f64)).round() / 100.0;
        let secondary = (0..dimension)
            .map(|i| rng.random_range(-SHIFT_BOUND..=SHIFT_BOUND) - x_opt[i])
            .collect();
        Ok(Self {
            id,
            x_opt,
            f_opt,
            secondary,
            cost: Duration::from_secs_f64(cost_ms / 1000.0),
        })
    }

    pub fn by_name(name: &str, dimension: usize, instance_seed: u64, cost_ms: f64) -> Result<Self> {
        Self::new(name.parse()?, dimension, instance_seed, cost_ms)
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn dimension(&self) -> usize {
        self.x_opt.len()
    }

    pub fn x_opt(&self) -> &[f64] {
        &self.x_opt
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn cost(&self) -> Duration {
        self.cost
    }

    /// Same instance, no injected cost.
    pub fn without_cost(&self) -> Self {
        Self {
            cost: Duration::ZERO,
            ..self.clone()
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let start = Instant::now();
        if x.len() != self.dimension() {
            return Err(Error::Shape(format!(
                "{} expects {} coordinates, got {}",
                self.id,
                self.dimension(),
                x.len()
            )));
        }
        let z: Vec<f64> = x.iter().zip(&self.x_opt).map(|(a, b)| a - b).collect();
        let value = self.base(&z) + self.f_opt;
        busy_wait_until(start + self.cost);
        Ok(value)
    }

    /// Unshifted function value at offset `z` from the optimum.
    pub fn base(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let ramp = |i: usize| {
            if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            }
        };
        match self.id {
            FunctionId::Sphere => sum_sq(z),
            FunctionId::Ellipsoid => z
                .iter()
                .enumerate()
                .map(|(i, v)| 10f64.powf(6.0 * ramp(i)) * v * v)
                .sum(),
            FunctionId::Rastrigin => {
                10.0 * n as f64
                    + z.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
            FunctionId::Rosenbrock => {
                let s = (n as f64).sqrt() / 8.0;
                let s = s.max(1.0);
                let y: Vec<f64> = z.iter().map(|v| s * v + 1.0).collect();
                y.windows(2)
                    .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
                    .sum()
            }
            FunctionId::StepEllipsoid => {
                let hat: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| 10f64.powf(0.5 * ramp(i)) * v)
                    .collect();
                let stepped: f64 = hat
                    .iter()
                    .enumerate()
                    .map(|(i, &h)| {
                        let t = if h.abs() > 0.5 {
                            h.round()
                        } else {
                            (10.0 * h).round() / 10.0
                        };
                        10f64.powf(2.0 * ramp(i)) * t * t
                    })
                    .sum();
                0.1 * (hat[0].abs() / 1e4).max(stepped)
            }
            FunctionId::Discus => 1e6 * z[0] * z[0] + sum_sq(&z[1..]),
            FunctionId::DiffPowers => z
                .iter()
                .enumerate()
                .map(|(i, v)| v.abs().powf(2.0 + 4.0 * ramp(i)))
                .sum::<f64>()
                .sqrt(),
            FunctionId::Schaffers => {
                let y: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| 10f64.powf(0.5 * ramp(i)) * v)
                    .collect();
                let s: Vec<f64> = if n > 1 {
                    y.windows(2)
                        .map(|w| (w[0] * w[0] + w[1] * w[1]).sqrt())
                        .collect()
                } else {
                    vec![y[0].abs()]
                };
                let mean = s
                    .iter()
                    .map(|&si| si.sqrt() + si.sqrt() * (50.0 * si.powf(0.2)).sin().powi(2))
                    .sum::<f64>()
                    / s.len() as f64;
                mean * mean
            }
            FunctionId::TwoBasins => {
                let deep = sum_sq(z);
                let shallow: f64 = z
                    .iter()
                    .zip(&self.secondary)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    * 0.5
                    + 10.0;
                deep.min(shallow)
            }
        }
    }
}

fn sum_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Spins on the monotonic clock, yielding between checks.
pub fn busy_wait_until(deadline: Instant) {
    while Instant::now() < deadline {
        std::thread::yield_now();
    }
}

/// One instance of every registered function.
pub fn make_suite(dimension: usize, cost_ms: f64, instance_seed: u64) -> Result<Vec<Objective>> {
    FunctionId::ALL
        .into_iter()
        .map(|id| Objective::new(id, dimension, instance_seed, cost_ms))
        .collect()
}
