use std::fmt;
use std::str::FromStr;

use super::params::CmaParams;
use super::state::CmaState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    TargetHit,
    MaxEvals,
    TolFun,
    TolX,
    ConditionCov,
    NoEffectAxis,
    NoEffectCoord,
    Stagnation,
    ExternalDeadline,
}

impl StopReason {
    pub const ALL: [StopReason; 9] = [
        StopReason::TargetHit,
        StopReason::MaxEvals,
        StopReason::TolFun,
        StopReason::TolX,
        StopReason::ConditionCov,
        StopReason::NoEffectAxis,
        StopReason::NoEffectCoord,
        StopReason::Stagnation,
        StopReason::ExternalDeadline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::TargetHit => "target_hit",
            StopReason::MaxEvals => "max_evals",
            StopReason::TolFun => "tol_fun",
            StopReason::TolX => "tol_x",
            StopReason::ConditionCov => "condition_cov",
            StopReason::NoEffectAxis => "no_effect_axis",
            StopReason::NoEffectCoord => "no_effect_coord",
            StopReason::Stagnation => "stagnation",
            StopReason::ExternalDeadline => "external_deadline",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StopReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StopReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown stop reason `{s}`"))
    }
}

/// Thresholds for [`check_stop`]. `None` disables a criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct StopLimits {
    pub target: Option<f64>,
    pub max_evals: Option<u64>,
    pub tol_fun: Option<f64>,
    /// Relative to the initial step size.
    pub tol_x: Option<f64>,
    pub max_condition: Option<f64>,
    pub no_effect: bool,
    pub stagnation: bool,
}

impl Default for StopLimits {
    fn default() -> Self {
        Self {
            target: None,
            max_evals: None,
            tol_fun: Some(1e-12),
            tol_x: Some(1e-11),
            max_condition: Some(1e14),
            no_effect: true,
            stagnation: true,
        }
    }
}

impl StopLimits {
    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_max_evals(mut self, max_evals: u64) -> Self {
        self.max_evals = Some(max_evals);
        self
    }

    /// Only target and budget apply.
    pub fn budget_only() -> Self {
        Self {
            target: None,
            max_evals: None,
            tol_fun: None,
            tol_x: None,
            max_condition: None,
            no_effect: false,
            stagnation: false,
        }
    }
}

/// Checks, in order: TargetHit, MaxEvals, TolFun, TolX, ConditionCov,
/// NoEffectAxis, NoEffectCoord, Stagnation. Returns the first that fires.
pub fn check_stop(state: &CmaState, params: &CmaParams, limits: &StopLimits) -> Option<StopReason> {
    let n = params.n;

    if let Some(target) = limits.target {
        if state.best.quality <= target {
            return Some(StopReason::TargetHit);
        }
    }
    if let Some(max_evals) = limits.max_evals {
        if state.eval_count >= max_evals {
            return Some(StopReason::MaxEvals);
        }
    }
    if !state.sigma.is_finite() || state.mean.iter().any(|v| !v.is_finite()) {
        return Some(StopReason::ConditionCov);
    }
    if let Some(tol) = limits.tol_fun {
        if state.recent_best.len() >= params.history_window() {
            let (lo, hi) = state
                .recent_best
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if hi - lo < tol {
                return Some(StopReason::TolFun);
            }
        }
    }
    let diag = state.cov.diagonal();
    if let Some(tol) = limits.tol_x {
        let max_sd = diag
            .iter()
            .fold(0.0f64, |acc, &c| acc.max(c.max(0.0).sqrt()));
        if state.sigma * max_sd < tol * state.sigma0 {
            return Some(StopReason::TolX);
        }
    }
    if let Some(max_cond) = limits.max_condition {
        let (lo, hi) = state
            .scales
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            });
        if !(hi * hi / (lo * lo) <= max_cond) {
            return Some(StopReason::ConditionCov);
        }
    }
    if limits.no_effect {
        let axis = (state.iter_count % n as u64) as usize;
        let step = 0.1 * state.sigma * state.scales[axis];
        if (0..n).all(|i| state.mean[i] + step * state.basis[(i, axis)] == state.mean[i]) {
            return Some(StopReason::NoEffectAxis);
        }
        if (0..n).any(|i| state.mean[i] + 0.2 * state.sigma * diag[i].sqrt() == state.mean[i]) {
            return Some(StopReason::NoEffectCoord);
        }
    }
    if limits.stagnation && state.iters_since_improvement >= params.stagnation_window() as u64 {
        return Some(StopReason::Stagnation);
    }
    None
}
