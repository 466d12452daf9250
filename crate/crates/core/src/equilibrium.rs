//! Analytic equilibrium toolkit.
//!
//! Everything here is closed-form or deterministic numerics on top of the
//! channel model; nothing touches the stochastic simulator. The toolkit is
//! used as an independent cross-check of simulated runs:
//!
//! * `single_user_threshold` inverts the constraint
//!   `beta * F(lambda) = target` by bisection, where
//!   `F(lambda) = sum_x p(x) U(P_w(lambda, x), x)` is the mean waterfilled
//!   rate per transmission opportunity;
//! * `useful_power`/`total_power` evaluate the fixed-profile power model:
//!   the per-state rate profile is frozen at its `beta = 1` shape and the
//!   spectral efficiency in each state is scaled by `1/beta`, giving
//!
//!   ```text
//!   P_beta(x) = (N0 W / x) * (2^(r(x)/beta) - 1),   r(x) = rate(x)/W
//!   useful    = sum_x p(x) P_beta(x)
//!   total     = (theta/beta) * useful
//!   ```
//!
//!   Note `total` is normalized per successful slot; multiply by `beta`
//!   (equivalently `theta * useful`) for power per slot. The simulator's
//!   re-waterfilled power is never above the fixed-profile value; the two
//!   coincide whenever a single state carries all rate.
//! * `hessian` evaluates the second derivatives of `total` in the
//!   transmission probabilities, and `check_dominance` the diagonal
//!   dominance condition that makes it positive definite;
//! * `best_response`/`nash_fixed_point` locate the equilibrium probability
//!   profile by grid search and Gauss-Seidel sweeps.

use crate::channel::ChannelModel;
use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

// ---------------------------------------------------------------------------
// Success probabilities and the omega bound
// ---------------------------------------------------------------------------

/// Probability that user `i` transmits while everyone else stays silent:
/// `theta_i * prod_{j != i} (1 - theta_j)`.
pub fn success_prob(thetas: &[f64], i: usize) -> f64 {
    assert!(i < thetas.len(), "user index out of range");
    thetas[i] * collision_factor(thetas, i)
}

/// Probability that all users other than `i` are silent.
pub fn collision_factor(thetas: &[f64], i: usize) -> f64 {
    thetas
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &t)| 1.0 - t)
        .product()
}

/// Cap on the probability ceiling that guarantees diagonal dominance for
/// `n` users: `omega < 1/n`.
pub fn omega_bound(n: usize) -> f64 {
    assert!(n >= 1);
    1.0 / n as f64
}

/// Strict test `omega < 1/n`.
pub fn accepts_omega(omega: f64, n: usize) -> bool {
    omega < omega_bound(n)
}

/// Diagonal dominance condition at a probability profile:
/// `1/theta_i - sum_{k != i} 1/(1 - theta_k) > 0` for every `i`.
pub fn check_dominance(thetas: &[f64]) -> bool {
    (0..thetas.len()).all(|i| {
        let others: f64 = thetas
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &t)| 1.0 / (1.0 - t))
            .sum();
        1.0 / thetas[i] - others > 0.0
    })
}

// ---------------------------------------------------------------------------
// Mean rate / power at a water level, and the threshold solver
// ---------------------------------------------------------------------------

/// Mean waterfilled rate per transmission opportunity, bits/slot:
/// `F(lambda) = sum_x p(x) U(P_w(lambda, x), x)`.
pub fn mean_rate(channel: &ChannelModel, lambda: f64) -> f64 {
    channel
        .bin_probs()
        .iter()
        .zip(channel.bin_states())
        .map(|(&p, &x)| p * channel.rate(channel.waterfill_power(lambda, x), x))
        .sum()
}

/// Mean waterfilled power per transmission opportunity, W.
pub fn mean_power(channel: &ChannelModel, lambda: f64) -> f64 {
    channel
        .bin_probs()
        .iter()
        .zip(channel.bin_states())
        .map(|(&p, &x)| p * channel.waterfill_power(lambda, x))
        .sum()
}

/// Water level at which a user succeeding with probability `beta` meets a
/// long-term rate target of `rate_target` bits/slot:
/// solves `beta * F(lambda) = rate_target` by bisection.
pub fn single_user_threshold(
    channel: &ChannelModel,
    rate_target: f64,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Infeasible(format!(
            "success probability {beta} outside (0, 1]"
        )));
    }
    if rate_target < 0.0 {
        return Err(Error::invalid("rate_target", "must be >= 0"));
    }
    if rate_target == 0.0 {
        return Ok(0.0);
    }
    let need = rate_target / beta;

    let mut lo = 0.0f64;
    let mut hi = channel.noise_power() / channel.bin_states().last().copied().unwrap();
    let mut iters = 0usize;
    while mean_rate(channel, hi) < need {
        hi *= 2.0;
        iters += 1;
        if iters > 1100 || !hi.is_finite() {
            return Err(Error::Infeasible(format!(
                "rate target {rate_target} unreachable at beta {beta}"
            )));
        }
    }
    // F is continuous and nondecreasing, strictly increasing once positive.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(channel, mid) < need {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let residual = (beta * mean_rate(channel, lambda) - rate_target).abs() / rate_target;
    if residual > 1e-8 {
        return Err(Error::NoConvergence {
            iterations: 200,
            residual,
        });
    }
    Ok(lambda)
}

// ---------------------------------------------------------------------------
// Rate profile and the fixed-profile power model
// ---------------------------------------------------------------------------

/// Per-state rates of the full-availability (`beta = 1`) waterfilling
/// solution for a given aggregate target.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    /// Rate transmitted in each channel state, bits/slot.
    pub per_state: Vec<f64>,
    /// `sum_x p(x) per_state(x)`, equal to the target by construction.
    pub aggregate: f64,
}

/// Build the `beta = 1` rate profile for `rate_target` bits/slot.
pub fn rate_profile(channel: &ChannelModel, rate_target: f64) -> Result<RateProfile> {
    let lambda1 = single_user_threshold(channel, rate_target, 1.0)?;
    let per_state: Vec<f64> = channel
        .bin_states()
        .iter()
        .map(|&x| channel.rate(channel.waterfill_power(lambda1, x), x))
        .collect();
    let aggregate = channel
        .bin_probs()
        .iter()
        .zip(&per_state)
        .map(|(&p, &r)| p * r)
        .sum();
    Ok(RateProfile {
        per_state,
        aggregate,
    })
}

fn useful_power_unchecked(beta: f64, profile: &RateProfile, channel: &ChannelModel) -> f64 {
    let n0w = channel.noise_power();
    let w = channel.bandwidth();
    channel
        .bin_probs()
        .iter()
        .zip(channel.bin_states())
        .zip(&profile.per_state)
        .map(|((&p, &x), &rate)| {
            let r = rate / w; // spectral efficiency, b/s/Hz
            p * (n0w / x) * ((r / beta).exp2() - 1.0)
        })
        .sum()
}

/// Mean power per transmission opportunity under the fixed-profile model:
/// each state's spectral efficiency is scaled by `1/beta` so the aggregate
/// delivered rate stays on target.
pub fn useful_power(beta: f64, profile: &RateProfile, channel: &ChannelModel) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Infeasible(format!(
            "success probability {beta} outside (0, 1]"
        )));
    }
    Ok(useful_power_unchecked(beta, profile, channel))
}

/// Average power per successful slot for user `i` at the probability
/// profile `thetas`: `(theta_i / beta_i) * useful_power(beta_i)`.
pub fn total_power(
    thetas: &[f64],
    i: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<f64> {
    let beta = success_prob(thetas, i);
    if beta <= 0.0 {
        return Err(Error::Infeasible(format!(
            "user {i} has zero success probability (certain collision)"
        )));
    }
    Ok(thetas[i] / beta * useful_power_unchecked(beta, profile, channel))
}

/// Average power per slot for user `i`: `theta_i * useful_power(beta_i)`.
/// This equals `beta_i * total_power` and is the quantity a slot-counting
/// simulator measures.
pub fn slot_power(
    thetas: &[f64],
    i: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<f64> {
    let beta = success_prob(thetas, i);
    if beta <= 0.0 {
        return Err(Error::Infeasible(format!(
            "user {i} has zero success probability (certain collision)"
        )));
    }
    Ok(thetas[i] * useful_power_unchecked(beta, profile, channel))
}

/// Useful/wasted decomposition of the per-success-normalized power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    /// Power attributable to successful transmissions.
    pub useful: f64,
    /// Power burnt in collided transmissions.
    pub wasted: f64,
    /// `useful + wasted`, equal to [`total_power`].
    pub total: f64,
}

/// Split user `i`'s power into the success share and the collision share.
pub fn power_split(
    thetas: &[f64],
    i: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<PowerSplit> {
    let total = total_power(thetas, i, profile, channel)?;
    let beta = success_prob(thetas, i);
    let useful = useful_power_unchecked(beta, profile, channel);
    Ok(PowerSplit {
        useful,
        wasted: total - useful,
        total,
    })
}

// ---------------------------------------------------------------------------
// Hessian of the power surface
// ---------------------------------------------------------------------------

fn boundary_check(thetas: &[f64]) -> Result<()> {
    if thetas.iter().any(|&t| t <= 0.0 || t >= 1.0) {
        return Err(Error::invalid(
            "thetas",
            "second derivatives need every theta strictly inside (0, 1)",
        ));
    }
    Ok(())
}

/// Weighted sums over states used by every second-derivative form.
/// Returns `(sum p q r E (2 beta + ln2 r), G = sum p q r E, sum p q r^2 E)`
/// with `q = N0 W / x`, `r = rate(x)/W`, `E = 2^(r/beta)`.
fn state_sums(beta: f64, profile: &RateProfile, channel: &ChannelModel) -> (f64, f64, f64) {
    let n0w = channel.noise_power();
    let w = channel.bandwidth();
    let mut combined = 0.0;
    let mut g = 0.0;
    let mut g2 = 0.0;
    for ((&p, &x), &rate) in channel
        .bin_probs()
        .iter()
        .zip(channel.bin_states())
        .zip(&profile.per_state)
    {
        let q = n0w / x;
        let r = rate / w;
        let e = (r / beta).exp2();
        combined += p * q * r * e * (2.0 * beta + LN2 * r);
        g += p * q * r * e;
        g2 += p * q * r * r * e;
    }
    (combined, g, g2)
}

/// Second derivative of user `i`'s total power in its own probability.
/// Always positive.
pub fn own_second_partial(
    thetas: &[f64],
    i: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<f64> {
    boundary_check(thetas)?;
    let theta = thetas[i];
    let eps = collision_factor(thetas, i);
    let beta = theta * eps;
    let (combined, _, _) = state_sums(beta, profile, channel);
    Ok(LN2 * combined / (theta.powi(4) * eps.powi(3)))
}

/// Mixed partial `d^2 P_i / d theta_i d theta_k`, differentiating the
/// own-gradient in `theta_k`. Negative for interior profiles.
pub fn mixed_partial(
    thetas: &[f64],
    i: usize,
    k: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<f64> {
    assert!(i != k, "mixed partial needs two distinct users");
    boundary_check(thetas)?;
    let theta = thetas[i];
    let eps = collision_factor(thetas, i);
    let beta = theta * eps;
    let (combined, _, _) = state_sums(beta, profile, channel);
    Ok(-LN2 * combined / (theta.powi(3) * eps.powi(3) * (1.0 - thetas[k])))
}

/// Same mixed partial computed in the other order (differentiating the
/// cross-gradient in `theta_i`); algebraically identical to
/// [`mixed_partial`], kept as a separate evaluation path so the symmetry
/// of the two orders can be asserted numerically.
pub fn mixed_partial_alt(
    thetas: &[f64],
    i: usize,
    k: usize,
    profile: &RateProfile,
    channel: &ChannelModel,
) -> Result<f64> {
    assert!(i != k, "mixed partial needs two distinct users");
    boundary_check(thetas)?;
    let eps = collision_factor(thetas, i);
    let beta = thetas[i] * eps;
    let (_, g, g2) = state_sums(beta, profile, channel);
    let u = 1.0 - thetas[k];
    Ok(-LN2 / (u * beta.powi(3)) * (2.0 * beta * g + LN2 * g2))
}

/// Matrix of second derivatives: row `i` holds
/// `d^2 P_i / d theta_i d theta_k` evaluated with user `i`'s profile and
/// channel.
pub fn hessian(
    thetas: &[f64],
    profiles: &[RateProfile],
    channels: &[ChannelModel],
) -> Result<Vec<Vec<f64>>> {
    let n = thetas.len();
    assert!(profiles.len() == n && channels.len() == n, "length mismatch");
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            h[i][k] = if i == k {
                own_second_partial(thetas, i, &profiles[i], &channels[i])?
            } else {
                mixed_partial(thetas, i, k, &profiles[i], &channels[i])?
            };
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Best response and the fixed point
// ---------------------------------------------------------------------------

/// Grid argmin of user `i`'s total power over `[theta_min, omega]`, others
/// held fixed. Coarse pass first, then a fine pass at `grid_step` around
/// the coarse winner; ties break toward smaller probabilities.
pub fn best_response(
    i: usize,
    thetas: &[f64],
    profile: &RateProfile,
    channel: &ChannelModel,
    grid_step: f64,
    theta_min: f64,
    omega: f64,
) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::invalid("grid_step", "must be > 0"));
    }
    if !(theta_min > 0.0 && theta_min < omega && omega < 1.0) {
        return Err(Error::invalid(
            "best_response",
            "need 0 < theta_min < omega < 1",
        ));
    }
    if collision_factor(thetas, i) <= 0.0 {
        return Err(Error::Infeasible(format!(
            "user {i}: every grid point collides with certainty"
        )));
    }
    let mut work = thetas.to_vec();
    let eval = |work: &mut Vec<f64>, t: f64| -> f64 {
        work[i] = t;
        // collision_factor > 0 and t >= theta_min > 0, so this cannot fail.
        total_power(work, i, profile, channel).expect("interior point")
    };

    let scan = |work: &mut Vec<f64>, lo: f64, hi: f64, step: f64| -> f64 {
        let mut best_t = lo;
        let mut best_p = eval(work, lo);
        let mut t = lo + step;
        while t < hi + 0.5 * step {
            let tt = t.min(hi);
            let p = eval(work, tt);
            if p < best_p {
                best_p = p;
                best_t = tt;
            }
            t += step;
        }
        best_t
    };

    let coarse = ((omega - theta_min) / 200.0).max(grid_step);
    let c = scan(&mut work, theta_min, omega, coarse);
    let lo = (c - coarse).max(theta_min);
    let hi = (c + coarse).min(omega);
    Ok(scan(&mut work, lo, hi, grid_step))
}

/// Inputs for the fixed-point search.
#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    pub channels: Vec<ChannelModel>,
    /// Per-user rate targets, bits/slot.
    pub rate_targets: Vec<f64>,
    pub omega: f64,
    pub theta_min: f64,
    pub grid_step: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl EquilibriumConfig {
    pub fn new(channels: Vec<ChannelModel>, rate_targets: Vec<f64>, omega: f64) -> Self {
        Self {
            channels,
            rate_targets,
            omega,
            theta_min: 1e-3,
            grid_step: 1e-4,
            tol: 1e-4,
            max_sweeps: 500,
        }
    }
}

/// Equilibrium probabilities with the induced success statistics, rate-
/// satisfying thresholds and power decomposition.
#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    pub theta_star: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub collision_factor: Vec<f64>,
    pub lambda_star: Vec<f64>,
    /// Power in successful transmissions (per opportunity).
    pub power_useful: Vec<f64>,
    /// Power burnt in collisions (per-success-normalized share).
    pub power_wasted: Vec<f64>,
    /// Per-success-normalized total, `power_useful + power_wasted`.
    pub power_total: Vec<f64>,
    /// Per-slot average power, `beta * power_total`.
    pub power_per_slot: Vec<f64>,
    pub sweeps: usize,
}

/// Iterated best response (Gauss-Seidel over users) to a fixed point.
///
/// Non-convergence within the sweep cap is an error carrying the residual;
/// it is not silently truncated.
pub fn nash_fixed_point(cfg: &EquilibriumConfig) -> Result<EquilibriumProfile> {
    let n = cfg.channels.len();
    if n == 0 || cfg.rate_targets.len() != n {
        return Err(Error::invalid(
            "equilibrium",
            "need one channel and one rate target per user",
        ));
    }
    let profiles: Vec<RateProfile> = cfg
        .channels
        .iter()
        .zip(&cfg.rate_targets)
        .map(|(ch, &rt)| rate_profile(ch, rt))
        .collect::<Result<_>>()?;

    let mut thetas = vec![0.5 * (cfg.theta_min + cfg.omega); n];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let next = best_response(
                i,
                &thetas,
                &profiles[i],
                &cfg.channels[i],
                cfg.grid_step,
                cfg.theta_min,
                cfg.omega,
            )?;
            max_change = max_change.max((next - thetas[i]).abs());
            thetas[i] = next;
        }
        if max_change < cfg.tol {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: max_change,
            });
        }
    }

    let mut profile = EquilibriumProfile {
        theta_star: thetas.clone(),
        beta_star: Vec::with_capacity(n),
        collision_factor: Vec::with_capacity(n),
        lambda_star: Vec::with_capacity(n),
        power_useful: Vec::with_capacity(n),
        power_wasted: Vec::with_capacity(n),
        power_total: Vec::with_capacity(n),
        power_per_slot: Vec::with_capacity(n),
        sweeps,
    };
    for i in 0..n {
        let beta = success_prob(&thetas, i);
        let split = power_split(&thetas, i, &profiles[i], &cfg.channels[i])?;
        profile.beta_star.push(beta);
        profile
            .collision_factor
            .push(collision_factor(&thetas, i));
        profile
            .lambda_star
            .push(single_user_threshold(&cfg.channels[i], cfg.rate_targets[i], beta)?);
        profile.power_useful.push(split.useful);
        profile.power_wasted.push(split.wasted);
        profile.power_total.push(split.total);
        profile.power_per_slot.push(beta * split.total);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;

    fn unit_channel() -> ChannelModel {
        // Single state at gain 1, N0W = 1, W = 1: F(lambda) = log2(lambda).
        ChannelModel::single_state(1.0, 1.0, 1.0).unwrap()
    }

    fn default_channel() -> ChannelModel {
        ChannelModel::default_bins(1.0).unwrap()
    }

    #[test]
    fn success_prob_known_values() {
        assert!((success_prob(&[0.3], 0) - 0.3).abs() < 1e-15);
        assert!((success_prob(&[0.1, 0.1], 0) - 0.09).abs() < 1e-15);
        assert_eq!(success_prob(&[0.5, 1.0], 0), 0.0);
    }

    #[test]
    fn omega_bound_values() {
        assert_eq!(omega_bound(20), 0.05);
        assert!(!accepts_omega(0.1, 20));
        assert_eq!(omega_bound(2), 0.5);
        assert!(accepts_omega(0.49, 2));
        for n in 1..=20 {
            assert!(!accepts_omega(omega_bound(n), n), "boundary must be strict");
        }
    }

    #[test]
    fn dominance_known_values() {
        assert!(check_dominance(&[0.2, 0.2])); // 5 - 1.25 > 0
        assert!(!check_dominance(&vec![0.1; 20])); // 10 - 19/0.9 < 0
        assert!(check_dominance(&[0.7])); // empty sum
    }

    #[test]
    fn threshold_matches_closed_form_on_unit_channel() {
        // log2(lambda) = 1 at beta 1, target 1 -> lambda = 2.
        let ch = unit_channel();
        let lambda = single_user_threshold(&ch, 1.0, 1.0).unwrap();
        assert!((lambda - 2.0).abs() < 1e-6, "lambda = {lambda}");
        // Halving beta doubles the required spectral efficiency.
        let lambda = single_user_threshold(&ch, 1.0, 0.5).unwrap();
        assert!((lambda - 4.0).abs() < 1e-6);
    }

    #[test]
    fn threshold_residual_is_tiny() {
        let ch = default_channel();
        for (target, beta) in [(5e4, 1.0), (5e4, 0.25), (1.1e5, 0.0135), (3e6, 0.9)] {
            let lambda = single_user_threshold(&ch, target, beta).unwrap();
            let residual = (beta * mean_rate(&ch, lambda) - target).abs() / target;
            assert!(residual <= 1e-8, "residual {residual}");
        }
    }

    #[test]
    fn threshold_decreasing_in_beta() {
        let ch = default_channel();
        let mut prev = f64::INFINITY;
        for beta in [0.25, 0.5, 0.75, 1.0] {
            let lambda = single_user_threshold(&ch, 5e4, beta).unwrap();
            assert!(lambda < prev, "lambda not strictly decreasing at beta={beta}");
            prev = lambda;
        }
    }

    #[test]
    fn threshold_rejects_bad_beta() {
        let ch = default_channel();
        assert!(single_user_threshold(&ch, 5e4, 0.0).is_err());
        assert!(single_user_threshold(&ch, 5e4, -0.5).is_err());
        assert!(single_user_threshold(&ch, 5e4, 1.5).is_err());
    }

    #[test]
    fn rate_profile_meets_target_and_orders_states() {
        let ch = default_channel();
        let target = 5e5;
        let prof = rate_profile(&ch, target).unwrap();
        assert!((prof.aggregate - target).abs() / target <= 1e-9);
        for w in prof.per_state.windows(2) {
            assert!(w[1] >= w[0], "profile not nondecreasing across states");
        }
        // Degenerate channel: the one state carries the whole target.
        let ch1 = unit_channel();
        let prof1 = rate_profile(&ch1, 1.0).unwrap();
        assert!((prof1.per_state[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn useful_power_closed_form_points() {
        let ch = unit_channel();
        let prof = rate_profile(&ch, 1.0).unwrap();
        // 2^1 - 1 = 1 at beta 1; 2^2 - 1 = 3 at beta 0.5.
        assert!((useful_power(1.0, &prof, &ch).unwrap() - 1.0).abs() < 1e-9);
        assert!((useful_power(0.5, &prof, &ch).unwrap() - 3.0).abs() < 1e-9);
        // Zero target -> zero power.
        let prof0 = rate_profile(&ch, 0.0).unwrap();
        assert_eq!(useful_power(1.0, &prof0, &ch).unwrap(), 0.0);
        assert!(useful_power(0.0, &prof, &ch).is_err());
    }

    #[test]
    fn useful_power_at_beta_one_inverts_waterfilling_exactly() {
        let ch = default_channel();
        let target = 5e5;
        let prof = rate_profile(&ch, target).unwrap();
        let lambda1 = single_user_threshold(&ch, target, 1.0).unwrap();
        let direct = mean_power(&ch, lambda1);
        let modeled = useful_power(1.0, &prof, &ch).unwrap();
        assert!(
            (direct - modeled).abs() <= 1e-12 * direct.max(1.0),
            "direct {direct} vs modeled {modeled}"
        );
    }

    #[test]
    fn useful_power_decreasing_convex_in_beta() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 5e5).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&b| useful_power(b, &prof, &ch).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "first differences must be negative");
        }
        for w in vals.windows(3) {
            assert!(w[2] - w[1] > w[1] - w[0], "second differences must be positive");
        }
    }

    #[test]
    fn total_power_examples() {
        let ch = unit_channel();
        let prof = rate_profile(&ch, 1.0).unwrap();
        // Lone user: total equals useful at beta = theta.
        let total = total_power(&[0.3], 0, &prof, &ch).unwrap();
        let useful = useful_power(0.3, &prof, &ch).unwrap();
        assert!((total - useful).abs() < 1e-12);
        // Two users at 0.1: beta = 0.09, total = (0.1/0.09) * useful(0.09).
        let thetas = [0.1, 0.1];
        let beta = success_prob(&thetas, 0);
        assert!((beta - 0.09).abs() < 1e-15);
        let total = total_power(&thetas, 0, &prof, &ch).unwrap();
        let expect = 0.1 / beta * useful_power(beta, &prof, &ch).unwrap();
        assert!((total - expect).abs() < 1e-12);
        // Certain collision errors out.
        assert!(total_power(&[0.5, 1.0], 0, &prof, &ch).is_err());
    }

    #[test]
    fn power_split_adds_up() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 5e4).unwrap();
        let thetas = [0.08, 0.05, 0.1];
        for i in 0..3 {
            let s = power_split(&thetas, i, &prof, &ch).unwrap();
            assert!(s.useful >= 0.0 && s.wasted >= 0.0);
            assert!((s.useful + s.wasted - s.total).abs() <= 1e-12 * s.total);
            let beta = success_prob(&thetas, i);
            let total = total_power(&thetas, i, &prof, &ch).unwrap();
            assert!((s.total - total).abs() <= 1e-12 * total);
            assert!((total - thetas[i] / beta * s.useful).abs() <= 1e-12 * total);
            // Per-slot form.
            let ps = slot_power(&thetas, i, &prof, &ch).unwrap();
            assert!((ps - beta * total).abs() <= 1e-12 * ps.max(1e-300));
        }
    }

    #[test]
    fn multiuser_power_at_least_single_user_power() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 5e4).unwrap();
        let single = useful_power(1.0, &prof, &ch).unwrap();
        for thetas in [vec![0.1, 0.1], vec![0.2, 0.15, 0.1], vec![0.05; 10]] {
            for i in 0..thetas.len() {
                let total = total_power(&thetas, i, &prof, &ch).unwrap();
                assert!(
                    total >= single,
                    "multiuser total {total} below single-user floor {single}"
                );
            }
        }
    }

    #[test]
    fn hessian_diagonal_positive_offdiagonal_negative() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 5e4).unwrap();
        let thetas = [0.12, 0.07, 0.2];
        let profs = vec![prof.clone(), prof.clone(), prof.clone()];
        let chans = vec![ch.clone(), ch.clone(), ch.clone()];
        let h = hessian(&thetas, &profs, &chans).unwrap();
        for i in 0..3 {
            assert!(h[i][i] > 0.0, "diagonal must be positive");
            for k in 0..3 {
                if i != k {
                    assert!(h[i][k] < 0.0, "off-diagonal must be negative");
                }
            }
        }
    }

    #[test]
    fn mixed_partial_orders_agree() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 7e4).unwrap();
        let thetas = [0.11, 0.06, 0.17, 0.23];
        for i in 0..4 {
            for k in 0..4 {
                if i == k {
                    continue;
                }
                let one = mixed_partial(&thetas, i, k, &prof, &ch).unwrap();
                let two = mixed_partial_alt(&thetas, i, k, &prof, &ch).unwrap();
                assert!(
                    (one - two).abs() <= 1e-12 * one.abs(),
                    "orders disagree: {one} vs {two}"
                );
                assert!(
                    (one.abs() - two.abs()).abs() <= 1e-12 * one.abs(),
                    "magnitudes disagree"
                );
            }
        }
    }

    #[test]
    fn hessian_rejects_boundary() {
        let ch = unit_channel();
        let prof = rate_profile(&ch, 1.0).unwrap();
        assert!(own_second_partial(&[1.0, 0.2], 0, &prof, &ch).is_err());
        assert!(own_second_partial(&[0.0], 0, &prof, &ch).is_err());
    }

    #[test]
    fn lone_user_best_response_is_the_cap() {
        let ch = unit_channel();
        let prof = rate_profile(&ch, 1.0).unwrap();
        let br = best_response(0, &[0.25], &prof, &ch, 1e-4, 1e-3, 0.5).unwrap();
        assert!((br - 0.5).abs() < 1e-9, "br = {br}");
    }

    #[test]
    fn best_response_is_a_local_argmin() {
        let ch = default_channel();
        let prof = rate_profile(&ch, 2e5).unwrap();
        let step = 1e-4;
        let thetas = vec![0.2, 0.4];
        let br = best_response(0, &thetas, &prof, &ch, step, 1e-3, 0.4).unwrap();
        let mut work = thetas.clone();
        work[0] = br;
        let at = total_power(&work, 0, &prof, &ch).unwrap();
        for cand in [(br - step).max(1e-3), (br + step).min(0.4)] {
            work[0] = cand;
            let p = total_power(&work, 0, &prof, &ch).unwrap();
            assert!(p >= at - 1e-15, "perturbing by one step improved the power");
        }
        // Argmin property against a 10x finer verification grid.
        let fine = step / 10.0;
        let mut t = 1e-3;
        while t <= 0.4 {
            work[0] = t;
            let p = total_power(&work, 0, &prof, &ch).unwrap();
            assert!(at <= p + 1e-12, "fine grid found a better point at {t}");
            t += fine;
        }
    }

    #[test]
    fn best_response_errors_on_certain_collision() {
        let ch = unit_channel();
        let prof = rate_profile(&ch, 1.0).unwrap();
        assert!(best_response(0, &[0.2, 1.0], &prof, &ch, 1e-3, 1e-3, 0.4).is_err());
    }

    #[test]
    fn fixed_point_symmetric_and_stable() {
        let ch = default_channel();
        let n = 3;
        let cfg = EquilibriumConfig::new(vec![ch; n], vec![5e4; n], 0.3);
        let eq = nash_fixed_point(&cfg).unwrap();
        // Symmetric users give a symmetric profile.
        for w in eq.theta_star.windows(2) {
            assert!((w[0] - w[1]).abs() <= cfg.tol);
        }
        // Dominance holds under omega < 1/N, so the sweep terminated.
        assert!(check_dominance(&eq.theta_star));
        assert!(eq.sweeps < cfg.max_sweeps);
        // Per-user consistency of the reported fields.
        for i in 0..n {
            assert!((eq.beta_star[i] - eq.theta_star[i] * eq.collision_factor[i]).abs() < 1e-12);
            assert!(
                (eq.power_total[i] - eq.power_useful[i] - eq.power_wasted[i]).abs()
                    <= 1e-12 * eq.power_total[i]
            );
            assert!(
                (eq.power_per_slot[i] - eq.beta_star[i] * eq.power_total[i]).abs()
                    <= 1e-12 * eq.power_per_slot[i]
            );
        }
    }

    #[test]
    fn fixed_point_single_user_hits_cap() {
        let ch = unit_channel();
        let cfg = EquilibriumConfig::new(vec![ch], vec![1.0], 0.5);
        let eq = nash_fixed_point(&cfg).unwrap();
        assert!((eq.theta_star[0] - 0.5).abs() < 1e-9);
        assert!((eq.beta_star[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn complementary_slackness_at_fixed_point() {
        let ch = default_channel();
        let cfg = EquilibriumConfig::new(vec![ch.clone(), ch], vec![5e4, 8e4], 0.4);
        let eq = nash_fixed_point(&cfg).unwrap();
        for i in 0..2 {
            let achieved = eq.beta_star[i] * mean_rate(&cfg.channels[i], eq.lambda_star[i]);
            let rel = (achieved - cfg.rate_targets[i]).abs() / cfg.rate_targets[i];
            assert!(rel <= 1e-6, "user {i}: residual {rel}");
        }
    }

    #[test]
    fn unilateral_deviation_does_not_pay_at_fixed_point() {
        let ch = default_channel();
        let n = 2;
        let cfg = EquilibriumConfig::new(vec![ch.clone(); n], vec![6e4; n], 0.4);
        let eq = nash_fixed_point(&cfg).unwrap();
        let profiles: Vec<RateProfile> = cfg
            .rate_targets
            .iter()
            .map(|&rt| rate_profile(&ch, rt).unwrap())
            .collect();
        for i in 0..n {
            let base = total_power(&eq.theta_star, i, &profiles[i], &ch).unwrap();
            for dev in [-0.01, 0.01] {
                let mut work = eq.theta_star.clone();
                work[i] = (work[i] + dev).clamp(cfg.theta_min, cfg.omega);
                let p = total_power(&work, i, &profiles[i], &ch).unwrap();
                assert!(
                    p >= base - 1e-6,
                    "user {i} gained {:.3e} by deviating {dev}",
                    base - p
                );
            }
        }
    }
}
