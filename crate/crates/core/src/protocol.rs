//! Frame-level contention mode.
//!
//! Instead of blind data transmissions, users contend with a short
//! reservation frame: each round, a user sends a request with its current
//! probe-level probability. A sole requester is granted the channel (the
//! grant carries the sampled channel state and implies the transmission
//! rate), ships as many whole packets as the data portion carries, and is
//! acknowledged. Colliding requesters time out; an empty round is just a
//! gap. The same per-user control updates run once per round, with the
//! round's delivered bits and spent energy taking the role of the slotted
//! mode's rate and power.
//!
//! Reported rates and powers are normalized by elapsed frame time rather
//! than round count, so short idle/collision rounds make the delivered
//! throughput per unit time exceed the per-round target.

use crate::collision_sim::{Feedback, PowerMode, Simulation, SimMode, SlotOutcome, UserSlot};
use crate::error::{Error, Result};
use crate::ttsga::{effective_prob, PerturbLevel, PhaseMode};
use rand::Rng;

// ---------------------------------------------------------------------------
// Frame timing
// ---------------------------------------------------------------------------

/// Durations of the frame components, in units of the slotted mode's slot
/// length, plus the request frame's energy cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub rts: f64,
    pub cts: f64,
    /// Data portion; delivered bits are `floor(U * data / packet_bits)`
    /// whole packets.
    pub data: f64,
    pub ack: f64,
    /// Length of a round nobody contended in.
    pub idle_gap: f64,
    /// Wait before a collided requester gives up.
    pub collision_timeout: f64,
    /// Energy of one request frame, joules. The request is short and sent
    /// at the most robust rate; its cost is a config knob rather than a
    /// modeled quantity.
    pub rts_energy: f64,
}

impl Default for FrameTiming {
    fn default() -> Self {
        Self {
            rts: 0.05,
            cts: 0.05,
            data: 0.85,
            ack: 0.05,
            idle_gap: 0.05,
            collision_timeout: 0.05,
            rts_energy: 0.01,
        }
    }
}

impl FrameTiming {
    /// Timing that makes every round exactly one slot long with free
    /// requests, so a protocol run shadows a slotted run.
    pub fn degenerate() -> Self {
        Self {
            rts: 0.0,
            cts: 0.0,
            data: 1.0,
            ack: 0.0,
            idle_gap: 1.0,
            collision_timeout: 1.0,
            rts_energy: 0.0,
        }
    }

    pub fn success_len(&self) -> f64 {
        self.rts + self.cts + self.data + self.ack
    }

    pub fn collision_len(&self) -> f64 {
        self.rts + self.collision_timeout
    }

    pub fn idle_len(&self) -> f64 {
        self.idle_gap
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("timing.rts", self.rts),
            ("timing.cts", self.cts),
            ("timing.data", self.data),
            ("timing.ack", self.ack),
            ("timing.idle_gap", self.idle_gap),
            ("timing.collision_timeout", self.collision_timeout),
            ("timing.rts_energy", self.rts_energy),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be >= 0 and finite"));
            }
        }
        if !(self.data > 0.0) {
            return Err(Error::invalid("timing.data", "must be > 0"));
        }
        // Every outcome must consume time or the clock stalls.
        if !(self.success_len() > 0.0 && self.collision_len() > 0.0 && self.idle_len() > 0.0) {
            return Err(Error::invalid(
                "timing",
                "success, collision and idle round lengths must all be > 0",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Round outcomes
// ---------------------------------------------------------------------------

/// One user's view of one contention round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRound {
    pub contended: bool,
    pub won: bool,
    /// Acknowledgement received; implies this user was the sole requester.
    pub ack: bool,
    pub packets_sent: u64,
    pub bits_sent: f64,
    /// Energy spent this round (request plus data if granted), joules.
    pub energy: f64,
}

/// Record of one contention round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    pub contender_count: u32,
    pub winner: Option<usize>,
    /// Elapsed time of the round.
    pub duration: f64,
    pub users: Vec<UserRound>,
}

impl RoundOutcome {
    pub fn empty(n_users: usize) -> Self {
        Self {
            round: 0,
            contender_count: 0,
            winner: None,
            duration: 0.0,
            users: vec![
                UserRound {
                    contended: false,
                    won: false,
                    ack: false,
                    packets_sent: 0,
                    bits_sent: 0.0,
                    energy: 0.0,
                };
                n_users
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// Round driver
// ---------------------------------------------------------------------------

impl Simulation {
    /// Advance one contention round. `out` receives the slotted-shape
    /// mirror of the round (attempt/feedback/bits/energy) so the shared
    /// bookkeeping and invariants apply unchanged.
    pub fn step_round(&mut self, round: &mut RoundOutcome, out: &mut SlotOutcome) {
        let n = self.slot + 1;
        let steps = self.cfg.schedule.steps(n);
        let odd = n % 2 == 1;
        let timing = self.cfg.timing;
        let packet_bits = self.cfg.packet_bits as f64;

        // Request phase: same draw discipline as a slotted slot.
        let mut contenders = 0u32;
        for (u, d) in self.users.iter_mut().zip(&mut self.scratch) {
            if odd {
                u.level_odd = match self.cfg.phase_mode {
                    PhaseMode::Random => {
                        if u.rng.gen::<f64>() < 0.5 {
                            PerturbLevel::Plus
                        } else {
                            PerturbLevel::Minus
                        }
                    }
                    PhaseMode::Alternating => PerturbLevel::Plus,
                };
            }
            let level = if odd { u.level_odd } else { u.level_odd.flipped() };
            let sample = u.channel.sample_state(&mut u.rng);
            let eff = effective_prob(
                u.st.theta,
                level,
                self.cfg.delta,
                self.cfg.theta_min,
                self.cfg.omega,
            );
            let attempt = u.rng.gen::<f64>() < eff;
            contenders += attempt as u32;
            *d = crate::collision_sim::SlotDraw {
                gain: sample.gain,
                level,
                attempt,
            };
        }

        let sole = contenders == 1;
        round.round = n;
        round.contender_count = contenders;
        round.winner = None;
        round.duration = if contenders == 0 {
            timing.idle_len()
        } else if sole {
            timing.success_len()
        } else {
            timing.collision_len()
        };

        for (i, ((u, d), (ur, so))) in self
            .users
            .iter_mut()
            .zip(&self.scratch)
            .zip(round.users.iter_mut().zip(&mut out.users))
            .enumerate()
        {
            let won = d.attempt && sole;
            let mut packets = 0u64;
            let mut bits = 0.0;
            let mut energy = 0.0;
            if d.attempt {
                energy += timing.rts_energy;
            }
            if won {
                round.winner = Some(i);
                // Grant carries the sampled state; the rate follows from
                // the current waterfilling level.
                let power = match self.cfg.power_mode {
                    PowerMode::Waterfilling => {
                        u.channel.waterfill_power(u.st.lambda_for(d.level), d.gain)
                    }
                    PowerMode::Constant(p) => p,
                };
                let rate_bits = u.channel.rate(power, d.gain);
                packets = (rate_bits * timing.data / packet_bits).floor() as u64;
                bits = packets as f64 * packet_bits;
                energy += power * timing.data;
            }

            u.st.step_lambda(
                self.cfg.dual_mode,
                d.level,
                steps.a,
                won,
                bits / u.st.rate_target,
            );
            u.st.step_power_avg(d.level, steps.b, energy);

            u.st.slot_count = n;
            u.st.rate_sum += bits;
            u.st.power_sum += energy;
            u.st.attempts += d.attempt as u64;
            u.st.successes += won as u64;
            u.st.collisions += (d.attempt && !sole) as u64;

            *ur = UserRound {
                contended: d.attempt,
                won,
                ack: won,
                packets_sent: packets,
                bits_sent: bits,
                energy,
            };
            *so = UserSlot {
                attempted: d.attempt,
                feedback: if !d.attempt {
                    Feedback::Idle
                } else if won {
                    Feedback::Success
                } else {
                    Feedback::Collision
                },
                rate_delivered: bits,
                power_spent: energy,
            };
        }

        self.slot = n;
        self.elapsed += round.duration;
        out.slot = n;

        if !odd {
            let c_pair = self.cfg.schedule.steps(n - 1).c;
            self.end_of_pair(n, c_pair);
        }
        self.record_windows(n);
        self.record_half_tallies(n, round.duration, out);
    }
}

/// Run a protocol-mode scenario; the config must have `mode = Protocol`.
pub fn run_protocol(config: &crate::collision_sim::ScenarioConfig) -> Result<crate::collision_sim::Metrics> {
    if config.mode != SimMode::Protocol {
        return Err(Error::invalid("mode", "run_protocol needs mode = protocol"));
    }
    crate::collision_sim::run_scenario(config)
}
