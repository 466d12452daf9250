//! Block-fading uplink channel model.
//!
//! The channel gain seen by a user in a slot is the squared magnitude of a
//! Rayleigh-faded tap, i.e. an exponentially distributed power gain with
//! mean `mean_gain`. Gains are quantized into a small set of representative
//! states; the default grid is eight bins whose boundaries are the octiles
//! of a unit-mean exponential (rounded to 0.01 dB), with each bin
//! represented by its lower edge (the left-open bin by -13 dB).
//!
//! Power control is single-user waterfilling against total in-band noise
//! `N0*W`:
//!
//! ```text
//! P(x) = max(0, lambda - N0*W / x)
//! U(P, x) = W * log2(1 + P*x / (N0*W))    [bits/s, slot = 1 s]
//! ```
//!
//! `lambda` is the water level; the control loops in this crate treat it as
//! the dual variable of a long-term rate constraint.

use rand::Rng;

use crate::error::{Error, Result};

/// Number of quantized channel states in the default grid.
pub const STATE_COUNT: usize = 8;

/// Default noise power spectral density (W/Hz). Together with
/// [`DEFAULT_BANDWIDTH`] this puts 1 W of total noise in band, so a 1 W
/// transmission at gain x has SNR exactly x.
pub const DEFAULT_NOISE_DENSITY: f64 = 1e-7;

/// Default system bandwidth (Hz).
pub const DEFAULT_BANDWIDTH: f64 = 1e7;

/// Bin boundaries in dB: {-8.47, -5.41, -3.28, -1.59, -0.08, 1.42, 3.18}.
const DEFAULT_BOUNDARIES_DB: [f64; STATE_COUNT - 1] =
    [-8.47, -5.41, -3.28, -1.59, -0.08, 1.42, 3.18];

/// Representative state per bin in dB; the left-unbounded bin maps to -13 dB.
const DEFAULT_STATES_DB: [f64; STATE_COUNT] =
    [-13.0, -8.47, -5.41, -3.28, -1.59, -0.08, 1.42, 3.18];

/// dB power value to linear.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power value to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Waterfilling power for water level `lambda` at linear gain `state_gain`.
///
/// Negative allocations clamp to zero: a state whose inverted noise floor
/// sits above the water level is not transmitted in.
pub fn waterfill_power(lambda: f64, state_gain: f64, noise_density: f64, bandwidth: f64) -> f64 {
    (lambda - noise_density * bandwidth / state_gain).max(0.0)
}

/// Shannon rate (bits per second == bits per unit slot) of a transmission
/// at `power` in state `state_gain` over `bandwidth` Hz.
pub fn rate(power: f64, state_gain: f64, noise_density: f64, bandwidth: f64) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    bandwidth * (1.0 + power * state_gain / (noise_density * bandwidth)).log2()
}

/// One channel draw: the raw exponential gain and its quantized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub raw_gain: f64,
    pub index: usize,
    pub gain: f64,
}

/// Per-user fading statistics plus the quantization grid and noise figures.
///
/// Immutable after construction; sampling takes the caller's RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    mean_gain: f64,
    bin_boundaries: Vec<f64>,
    bin_states: Vec<f64>,
    bin_probs: Vec<f64>,
    noise_density: f64,
    bandwidth: f64,
}

impl ChannelModel {
    /// Build a model from an explicit quantization grid.
    ///
    /// `bin_boundaries` must be strictly increasing and positive and hold
    /// exactly one fewer entry than `bin_states`. Bin probabilities are the
    /// exponential CDF mass between consecutive boundaries.
    pub fn new(
        mean_gain: f64,
        bin_boundaries: Vec<f64>,
        bin_states: Vec<f64>,
        noise_density: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        if !(mean_gain > 0.0) {
            return Err(Error::invalid("channel.mean_gain", "must be > 0"));
        }
        if !(noise_density > 0.0) {
            return Err(Error::invalid("channel.noise_density", "must be > 0"));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::invalid("channel.bandwidth", "must be > 0"));
        }
        if bin_states.len() != bin_boundaries.len() + 1 || bin_states.is_empty() {
            return Err(Error::invalid(
                "channel.bin_states",
                "need exactly one more state than boundaries",
            ));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&bin_boundaries) || bin_boundaries.first().is_some_and(|&b| b <= 0.0) {
            return Err(Error::invalid(
                "channel.bin_boundaries",
                "must be strictly increasing and positive",
            ));
        }
        if !increasing(&bin_states) || bin_states[0] <= 0.0 {
            return Err(Error::invalid(
                "channel.bin_states",
                "must be strictly increasing and positive",
            ));
        }
        let bin_probs = exponential_bin_probs(mean_gain, &bin_boundaries);
        Ok(Self {
            mean_gain,
            bin_boundaries,
            bin_states,
            bin_probs,
            noise_density,
            bandwidth,
        })
    }

    /// The default eight-state grid with the stock noise figures.
    pub fn default_bins(mean_gain: f64) -> Result<Self> {
        Self::default_bins_with_noise(mean_gain, DEFAULT_NOISE_DENSITY, DEFAULT_BANDWIDTH)
    }

    /// The default eight-state grid with explicit noise figures.
    pub fn default_bins_with_noise(
        mean_gain: f64,
        noise_density: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        Self::new(
            mean_gain,
            DEFAULT_BOUNDARIES_DB.iter().copied().map(db_to_linear).collect(),
            DEFAULT_STATES_DB.iter().copied().map(db_to_linear).collect(),
            noise_density,
            bandwidth,
        )
    }

    /// Degenerate single-state channel: every draw lands on `gain`.
    ///
    /// Useful when a closed form is wanted, since waterfilling over one
    /// state inverts exactly.
    pub fn single_state(gain: f64, noise_density: f64, bandwidth: f64) -> Result<Self> {
        Self::new(gain, Vec::new(), vec![gain], noise_density, bandwidth)
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_gain
    }

    pub fn bin_boundaries(&self) -> &[f64] {
        &self.bin_boundaries
    }

    pub fn bin_states(&self) -> &[f64] {
        &self.bin_states
    }

    pub fn bin_probs(&self) -> &[f64] {
        &self.bin_probs
    }

    pub fn noise_density(&self) -> f64 {
        self.noise_density
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Total in-band noise power N0*W.
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.bandwidth
    }

    /// Index of the bin containing `raw_gain`; bins are closed on the left.
    pub fn state_index(&self, raw_gain: f64) -> usize {
        self.bin_boundaries.partition_point(|&b| b <= raw_gain)
    }

    /// Draw a raw gain from the exponential law and quantize it.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> StateSample {
        // Inverse CDF; 1 - u keeps the draw strictly positive.
        let u: f64 = rng.gen();
        let raw_gain = -self.mean_gain * (1.0 - u).ln();
        let index = self.state_index(raw_gain);
        StateSample {
            raw_gain,
            index,
            gain: self.bin_states[index],
        }
    }

    /// Waterfilling power in `state_gain` at water level `lambda`.
    pub fn waterfill_power(&self, lambda: f64, state_gain: f64) -> f64 {
        waterfill_power(lambda, state_gain, self.noise_density, self.bandwidth)
    }

    /// Rate delivered by `power` in `state_gain` (bits/slot).
    pub fn rate(&self, power: f64, state_gain: f64) -> f64 {
        rate(power, state_gain, self.noise_density, self.bandwidth)
    }
}

fn exponential_bin_probs(mean_gain: f64, boundaries: &[f64]) -> Vec<f64> {
    // Survival function at each boundary; the partition telescopes to 1.
    let mut probs = Vec::with_capacity(boundaries.len() + 1);
    let mut upper = 1.0;
    for &b in boundaries {
        let s = (-b / mean_gain).exp();
        probs.push(upper - s);
        upper = s;
    }
    probs.push(upper);
    probs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PAPER_ALPHA: f64 = 0.4698;

    #[test]
    fn boundary_db_conversions_match_reported_linear_values() {
        // Reported linear/dB pairs (4-decimal rounding): 0.1422 <-> -8.47 dB,
        // 0.4698 <-> -3.28 dB, 0.9817 <-> -0.08 dB.
        assert!((db_to_linear(-8.47) - 0.1422).abs() < 1e-4);
        assert!((db_to_linear(-3.28) - 0.4698).abs() < 1e-4);
        assert!((db_to_linear(-0.08) - 0.9817).abs() < 1e-4);
        assert!((db_to_linear(-13.0) - 0.0501).abs() < 1e-4);
        assert!((db_to_linear(3.18) - 2.0797).abs() < 1e-4);
    }

    #[test]
    fn default_bins_are_equal_probability_at_unit_mean() {
        // The boundary grid is the octile grid of a unit-mean exponential
        // (rounded to 0.01 dB), so all eight masses sit near 1/8 when the
        // mean gain is 1.0. (At other means the masses are deliberately
        // unequal; the grid is fixed.)
        let model = ChannelModel::default_bins(1.0).unwrap();
        for &p in model.bin_probs() {
            assert!(
                (p - 0.125).abs() < 0.01,
                "bin probability {p} not within 0.01 of 1/8"
            );
        }
    }

    #[test]
    fn bin_probs_match_exponential_cdf() {
        // Frozen from the exponential CDF at the default boundaries.
        let expected = [
            0.2612176912,
            0.1967735164,
            0.1742030361,
            0.1392561830,
            0.1048271384,
            0.0714768766,
            0.0402925261,
            0.0119530321,
        ];
        let model = ChannelModel::default_bins(PAPER_ALPHA).unwrap();
        for (p, e) in model.bin_probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-9, "got {p}, expected {e}");
        }
    }

    #[test]
    fn bin_probs_sum_to_one() {
        for alpha in [0.05, 0.1422, PAPER_ALPHA, 1.0, 1.3867] {
            let model = ChannelModel::default_bins(alpha).unwrap();
            let sum: f64 = model.bin_probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "alpha={alpha}: sum={sum}");
            assert!(model.bin_probs().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChannelModel::default_bins(0.0).is_err());
        assert!(ChannelModel::default_bins(-1.0).is_err());
        assert!(ChannelModel::new(1.0, vec![2.0, 1.0], vec![1.0, 2.0, 3.0], 1e-7, 1e7).is_err());
        assert!(ChannelModel::new(1.0, vec![1.0], vec![1.0], 1e-7, 1e7).is_err());
    }

    #[test]
    fn state_index_places_gains_by_interval_membership() {
        let model = ChannelModel::default_bins(PAPER_ALPHA).unwrap();
        // 0.2877 <= 0.30 < 0.4699 -> bin 2 (-5.41 dB).
        assert_eq!(model.state_index(0.30), 2);
        assert!((model.bin_states()[2] - 0.2877).abs() < 5e-5);
        // Tiny gains land in the left-open bin represented by -13 dB.
        assert_eq!(model.state_index(0.01), 0);
        assert!((model.bin_states()[0] - 0.0501).abs() < 5e-5);
        // The top bin is right-unbounded.
        assert_eq!(model.state_index(5.0), 7);
        assert!((model.bin_states()[7] - 2.0797).abs() < 5e-5);
        // Boundaries belong to the bin above them.
        let b = model.bin_boundaries()[1];
        assert_eq!(model.state_index(b), 2);
    }

    #[test]
    fn waterfill_clamps_and_hits_exact_levels() {
        // lambda 2.0, gain 1.0, N0W 1.0 -> 1.0 W.
        assert_eq!(waterfill_power(2.0, 1.0, 1e-7, 1e7), 1.0);
        // Threshold exactly at the inverted noise floor -> 0.
        assert_eq!(waterfill_power(1.0, 1.0, 1e-7, 1e7), 0.0);
        // Below the floor clamps rather than going negative.
        assert_eq!(waterfill_power(0.5, 1.0, 1e-7, 1e7), 0.0);
    }

    #[test]
    fn rate_known_points() {
        // P=0 -> 0 bits.
        assert_eq!(rate(0.0, 1.0, 1.0, 1.0), 0.0);
        // W=1, N0W=1: P=1,x=1 -> log2(2) = 1 bit; P=3 -> log2(4) = 2 bits.
        assert!((rate(1.0, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((rate(3.0, 1.0, 1.0, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_monotone_in_power_and_gain() {
        let model = ChannelModel::default_bins(1.0).unwrap();
        let powers: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2).collect();
        for &x in model.bin_states() {
            let mut prev = 0.0;
            for &p in &powers {
                let r = model.rate(p, x);
                assert!(r > prev, "rate not increasing in power at x={x}");
                prev = r;
            }
        }
        for w in model.bin_states().windows(2) {
            assert!(model.rate(1.0, w[1]) > model.rate(1.0, w[0]));
        }
    }

    #[test]
    fn waterfill_monotone_and_nonnegative() {
        let model = ChannelModel::default_bins(1.0).unwrap();
        for &x in model.bin_states() {
            let mut prev = -1.0;
            for i in 0..200 {
                let lambda = i as f64 * 0.25;
                let p = model.waterfill_power(lambda, x);
                assert!(p >= 0.0);
                assert!(p >= prev, "not nondecreasing in lambda");
                prev = p;
            }
        }
        // Nondecreasing in the state gain as well.
        for lambda in [0.5, 1.0, 5.0, 25.0] {
            let mut prev = -1.0;
            for &x in model.bin_states() {
                let p = model.waterfill_power(lambda, x);
                assert!(p >= prev, "not nondecreasing in gain at lambda={lambda}");
                prev = p;
            }
        }
    }

    #[test]
    fn waterfilled_rate_nondecreasing_in_level() {
        let model = ChannelModel::default_bins(1.0).unwrap();
        for &x in model.bin_states() {
            let mut prev = -1.0;
            for i in 0..300 {
                let lambda = i as f64 * 0.2;
                let r = model.rate(model.waterfill_power(lambda, x), x);
                assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn empirical_statistics_match_model() {
        let model = ChannelModel::default_bins(PAPER_ALPHA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        const DRAWS: usize = 1_000_000;
        let mut sum = 0.0;
        let mut counts = [0usize; STATE_COUNT];
        for _ in 0..DRAWS {
            let s = model.sample_state(&mut rng);
            assert_eq!(s.gain, model.bin_states()[s.index]);
            sum += s.raw_gain;
            counts[s.index] += 1;
        }
        let mean = sum / DRAWS as f64;
        assert!(
            (mean - PAPER_ALPHA).abs() / PAPER_ALPHA < 0.01,
            "empirical mean {mean} deviates more than 1%"
        );
        for (k, (&c, &p)) in counts.iter().zip(model.bin_probs()).enumerate() {
            let expect = p * DRAWS as f64;
            let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "bin {k}: count {c} vs expected {expect:.0} (3 sigma = {:.0})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn single_state_channel_is_degenerate() {
        let model = ChannelModel::single_state(1.0, 1e-7, 1e7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = model.sample_state(&mut rng);
            assert_eq!(s.index, 0);
            assert_eq!(s.gain, 1.0);
        }
        assert_eq!(model.bin_probs(), &[1.0]);
    }
}
