//! Per-user two-timescale control state and its update rules.
//!
//! Three quantities evolve per user, each on its own timescale:
//!
//! * the waterfilling threshold (dual variable) `lambda`, stepped with the
//!   fastest gains `a_n` toward the level where the long-run delivered rate
//!   meets the target;
//! * power averages, maintained with the middle gains `b_n`;
//! * the transmission probability `theta`, nudged with the slowest gains
//!   `c_n` along a two-point finite-difference estimate of the power
//!   gradient and projected back into `[theta_min, omega]`.
//!
//! The gradient probe alternates the attempt probability between
//! `theta + delta` and `theta - delta` across the two slots of each pair.
//! Everything keyed by perturbation level exists twice: the `plus` member
//! belongs to the `theta + delta` level, the `minus` member to
//! `theta - delta`. Keeping a separate dual per level matters: each probe
//! level must be measured with *its own* rate-satisfying threshold or the
//! difference quotient misses the threshold response entirely (a shared
//! dual is available as [`DualMode::Shared`] for comparison).
//!
//! Rates inside the dual update are normalized by the user's own target, so
//! the recursion is scale-free: the drift toward higher thresholds is
//! `a_n * 1` per unmet slot regardless of whether the target is 50 Kbit/s
//! or 5 Mbit/s.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Step-size schedules
// ---------------------------------------------------------------------------

/// Polynomially decaying gain sequences `s * n^-e` for the three loops.
///
/// The exponent ordering `0.5 < exp_a < exp_b < exp_c <= 1` gives every
/// sequence a divergent sum with convergent squares and makes each ratio
/// `b_n/a_n`, `c_n/b_n` vanish, which is what separates the timescales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub exp_a: f64,
    pub exp_b: f64,
    pub exp_c: f64,
    pub scale_a: f64,
    pub scale_b: f64,
    pub scale_c: f64,
}

/// Gains at one slot index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            exp_a: 0.6,
            exp_b: 0.8,
            exp_c: 1.0,
            scale_a: 1.0,
            scale_b: 1.0,
            scale_c: 1.0,
        }
    }
}

impl StepSchedule {
    pub fn new(exp_a: f64, exp_b: f64, exp_c: f64) -> Result<Self> {
        let s = Self {
            exp_a,
            exp_b,
            exp_c,
            ..Self::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_scales(mut self, scale_a: f64, scale_b: f64, scale_c: f64) -> Result<Self> {
        self.scale_a = scale_a;
        self.scale_b = scale_b;
        self.scale_c = scale_c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5 < self.exp_a && self.exp_a < self.exp_b && self.exp_b < self.exp_c
            && self.exp_c <= 1.0)
        {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "exponents must satisfy 0.5 < a < b < c <= 1, got ({}, {}, {})",
                    self.exp_a, self.exp_b, self.exp_c
                ),
            ));
        }
        for (name, s) in [
            ("scale_a", self.scale_a),
            ("scale_b", self.scale_b),
            ("scale_c", self.scale_c),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Gains at slot `n` (1-based).
    pub fn steps(&self, n: u64) -> StepSizes {
        assert!(n >= 1, "slot index starts at 1");
        let nf = n as f64;
        StepSizes {
            a: self.scale_a * nf.powf(-self.exp_a),
            b: self.scale_b * nf.powf(-self.exp_b),
            c: self.scale_c * nf.powf(-self.exp_c),
        }
    }
}

// ---------------------------------------------------------------------------
// Perturbation structure
// ---------------------------------------------------------------------------

/// Which side of the two-point probe a slot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbLevel {
    /// Attempt probability `theta + delta`.
    Plus,
    /// Attempt probability `theta - delta`.
    Minus,
}

impl PerturbLevel {
    pub fn flipped(self) -> Self {
        match self {
            PerturbLevel::Plus => PerturbLevel::Minus,
            PerturbLevel::Minus => PerturbLevel::Plus,
        }
    }
}

/// How the probe levels map onto the odd/even slots of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMode {
    /// Each user flips a fair coin per pair for which slot probes `+delta`.
    /// Decorrelates users so each difference quotient estimates the user's
    /// own partial derivative rather than the all-users diagonal one.
    #[default]
    Random,
    /// `+delta` always in the odd slot. Fine for a single user; with many
    /// users their probes are synchronized and the estimates couple.
    Alternating,
}

/// One dual variable per probe level, or a single shared one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualMode {
    /// Separate thresholds for the `+delta` and `-delta` levels.
    #[default]
    PerLevel,
    /// One threshold updated in every slot. Kept for comparison; the
    /// two-point power difference then reduces to `E[P_w]`, which has the
    /// wrong sign as a gradient of the constrained average power.
    Shared,
}

// ---------------------------------------------------------------------------
// Update rules (pure)
// ---------------------------------------------------------------------------

/// Dual (waterfilling threshold) update.
///
/// `rate_scaled` is the rate that was, or would have been, delivered this
/// slot, in target-normalized units; `target_scaled` is the normalized
/// target (1.0 under per-user normalization). Idle slots and collisions
/// enter with `success = false` and push the threshold up by
/// `a * target_scaled`; the iterate never leaves `[0, inf)`.
pub fn update_lambda(
    lambda: f64,
    a: f64,
    success: bool,
    rate_scaled: f64,
    target_scaled: f64,
) -> f64 {
    let credited = if success { rate_scaled } else { 0.0 };
    (lambda - a * (credited - target_scaled)).max(0.0)
}

/// Stochastic-averaging update `A <- A + b (sample - A)`.
///
/// `sample` is the power actually spent in the slot: the waterfilled power
/// when the coin said transmit, zero otherwise, so the average estimates
/// `theta * E[P_w]`. Clamped at zero so a transient gain above 1 cannot
/// drive the estimate negative.
pub fn update_power_avg(avg: f64, b: f64, sample: f64) -> f64 {
    (avg + b * (sample - avg)).max(0.0)
}

/// Projected gradient step on the transmission probability.
///
/// `pavg_plus`/`pavg_minus` are power averages measured at the two probe
/// levels; their difference quotient over `2*delta` estimates the slope of
/// average power in `theta`.
pub fn update_theta(
    theta: f64,
    c: f64,
    pavg_plus: f64,
    pavg_minus: f64,
    delta: f64,
    theta_min: f64,
    omega: f64,
) -> f64 {
    let gradient = (pavg_plus - pavg_minus) / (2.0 * delta);
    (theta - c * gradient).clamp(theta_min, omega)
}

/// Attempt probability used in a slot at the given probe level, clamped
/// into `[theta_min, omega]`.
pub fn effective_prob(
    theta: f64,
    level: PerturbLevel,
    delta: f64,
    theta_min: f64,
    omega: f64,
) -> f64 {
    let raw = match level {
        PerturbLevel::Plus => theta + delta,
        PerturbLevel::Minus => theta - delta,
    };
    raw.clamp(theta_min, omega)
}

// ---------------------------------------------------------------------------
// Per-user state
// ---------------------------------------------------------------------------

/// Control iterates and running tallies for one user.
#[derive(Debug, Clone)]
pub struct UserState {
    pub theta: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub pavg_plus: f64,
    pub pavg_minus: f64,
    /// Long-term average rate target, bits per slot.
    pub rate_target: f64,
    pub slot_count: u64,
    // Whole-run tallies.
    pub rate_sum: f64,
    pub power_sum: f64,
    pub attempts: u64,
    pub successes: u64,
    pub collisions: u64,
    // Window accumulators for the gradient probe (reset at each theta step).
    pub win_power_plus: f64,
    pub win_power_minus: f64,
    pub win_count_plus: u64,
    pub win_count_minus: u64,
    // Tail-window tallies for converged-value reporting.
    pub tail_theta_sum: f64,
    pub tail_lambda_sum: f64,
    pub tail_count: u64,
    pub half_rate_sum: f64,
    pub half_power_sum: f64,
    pub half_count: u64,
}

impl UserState {
    pub fn new(theta0: f64, lambda0: f64, rate_target: f64) -> Self {
        Self {
            theta: theta0,
            lambda_plus: lambda0,
            lambda_minus: lambda0,
            pavg_plus: 0.0,
            pavg_minus: 0.0,
            rate_target,
            slot_count: 0,
            rate_sum: 0.0,
            power_sum: 0.0,
            attempts: 0,
            successes: 0,
            collisions: 0,
            win_power_plus: 0.0,
            win_power_minus: 0.0,
            win_count_plus: 0,
            win_count_minus: 0,
            tail_theta_sum: 0.0,
            tail_lambda_sum: 0.0,
            tail_count: 0,
            half_rate_sum: 0.0,
            half_power_sum: 0.0,
            half_count: 0,
        }
    }

    /// Threshold used when transmitting at `level`.
    pub fn lambda_for(&self, level: PerturbLevel) -> f64 {
        match level {
            PerturbLevel::Plus => self.lambda_plus,
            PerturbLevel::Minus => self.lambda_minus,
        }
    }

    /// Mean of the two level thresholds (they coincide in shared mode).
    pub fn lambda_mean(&self) -> f64 {
        0.5 * (self.lambda_plus + self.lambda_minus)
    }

    /// Run the dual update for the slot's level.
    pub fn step_lambda(
        &mut self,
        mode: DualMode,
        level: PerturbLevel,
        a: f64,
        success: bool,
        rate_scaled: f64,
    ) {
        match mode {
            DualMode::PerLevel => {
                let slot = match level {
                    PerturbLevel::Plus => &mut self.lambda_plus,
                    PerturbLevel::Minus => &mut self.lambda_minus,
                };
                *slot = update_lambda(*slot, a, success, rate_scaled, 1.0);
            }
            DualMode::Shared => {
                let next = update_lambda(self.lambda_plus, a, success, rate_scaled, 1.0);
                self.lambda_plus = next;
                self.lambda_minus = next;
            }
        }
    }

    /// Feed the slot's realized power into the level's averages.
    pub fn step_power_avg(&mut self, level: PerturbLevel, b: f64, sample: f64) {
        match level {
            PerturbLevel::Plus => {
                self.pavg_plus = update_power_avg(self.pavg_plus, b, sample);
                self.win_power_plus += sample;
                self.win_count_plus += 1;
            }
            PerturbLevel::Minus => {
                self.pavg_minus = update_power_avg(self.pavg_minus, b, sample);
                self.win_power_minus += sample;
                self.win_count_minus += 1;
            }
        }
    }

    /// Per-level mean powers over the current hold window, if both levels
    /// have been visited.
    pub fn window_means(&self) -> Option<(f64, f64)> {
        if self.win_count_plus == 0 || self.win_count_minus == 0 {
            return None;
        }
        Some((
            self.win_power_plus / self.win_count_plus as f64,
            self.win_power_minus / self.win_count_minus as f64,
        ))
    }

    pub fn reset_window(&mut self) {
        self.win_power_plus = 0.0;
        self.win_power_minus = 0.0;
        self.win_count_plus = 0;
        self.win_count_minus = 0;
    }

    pub fn rate_avg(&self) -> f64 {
        if self.slot_count == 0 {
            0.0
        } else {
            self.rate_sum / self.slot_count as f64
        }
    }

    pub fn power_avg(&self) -> f64 {
        if self.slot_count == 0 {
            0.0
        } else {
            self.power_sum / self.slot_count as f64
        }
    }
}
