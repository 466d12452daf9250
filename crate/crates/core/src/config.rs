//! Plain-text experiment configuration.
//!
//! Sectioned `key = value` format, `#` comments, case-sensitive keys.
//! Unknown sections or keys are hard errors. Users are declared with
//! `[user]` blocks (one user each) or `[group]` blocks (`count` copies),
//! in order:
//!
//! ```text
//! [group]
//! count = 10
//! mean_gain = 0.4698
//! rate_kbps = 50
//!
//! [group]
//! count = 10
//! mean_gain = 0.4698
//! rate_kbps = 110
//!
//! [ttsga]
//! omega = 0.1
//! delta = 0.02
//!
//! [run]
//! horizon = 100000
//! replications = 20
//! seed = 1
//! ```
//!
//! Sections and keys:
//!
//! * `[user]` / `[group]`: `count` (groups only), `mean_gain`,
//!   `rate_bps` or `rate_kbps`.
//! * `[ttsga]`: `omega`, `delta`, `theta_min`, `theta0`, `lambda0`,
//!   `exp_a`, `exp_b`, `exp_c`, `scale_a`, `scale_b`, `scale_c`,
//!   `dual_mode` (`per_level`|`shared`), `phase_mode`
//!   (`random`|`alternating`), `theta_warmup`, `theta_window`,
//!   `theta_step_cap`.
//! * `[channel]`: `noise_density`, `bandwidth`.
//! * `[run]`: `horizon`, `replications`, `seed`, `mode`
//!   (`slotted`|`protocol`), `power_mode` (`waterfilling`|`constant`),
//!   `constant_power`, `sample_every`, `packet_bits`, `gate_rate_tol`.
//! * `[protocol]`: `rts`, `cts`, `data`, `ack`, `idle_gap`,
//!   `collision_timeout`, `rts_energy`.
//!
//! Unset keys take the defaults of [`ScenarioConfig::new`].

use std::path::Path;

use crate::collision_sim::{PowerMode, ScenarioConfig, SimMode, UserSpec};
use crate::error::{Error, Result};
use crate::ttsga::{DualMode, PhaseMode};

/// Assertion gates evaluated by the CLI after a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gates {
    /// Max tolerated relative rate-target miss per user.
    pub rate_tol: Option<f64>,
}

/// A parsed config: the scenario plus CLI-level gates.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub scenario: ScenarioConfig,
    pub gates: Gates,
}

/// Read and parse a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    User,
    Group,
    Ttsga,
    Channel,
    Run,
    Protocol,
}

#[derive(Debug, Default)]
struct UserBlock {
    count: Option<u64>,
    mean_gain: Option<f64>,
    rate_bps: Option<f64>,
    line: usize,
}

/// Parse config text into a validated scenario.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let mut section = Section::None;
    let mut blocks: Vec<UserBlock> = Vec::new();
    let mut cfg = ScenarioConfig::new(Vec::new());
    let mut constant_power: Option<f64> = None;
    let mut power_mode_constant = false;
    let mut gates = Gates::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "user" => {
                    blocks.push(UserBlock {
                        count: Some(1),
                        line: line_no,
                        ..UserBlock::default()
                    });
                    Section::User
                }
                "group" => {
                    blocks.push(UserBlock {
                        line: line_no,
                        ..UserBlock::default()
                    });
                    Section::Group
                }
                "ttsga" => Section::Ttsga,
                "channel" => Section::Channel,
                "run" => Section::Run,
                "protocol" => Section::Protocol,
                other => {
                    return Err(Error::UnknownKey {
                        what: "section",
                        name: other.to_string(),
                        line: line_no,
                    })
                }
            };
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid(format!("line {line_no}"), "expected `key = value`")
        })?;
        let key = key.trim();
        let value = value.trim();
        let unknown = || Error::UnknownKey {
            what: "key",
            name: key.to_string(),
            line: line_no,
        };
        let f = |what: &str| -> Result<f64> {
            value.parse::<f64>().map_err(|_| {
                Error::invalid(what, format!("`{value}` is not a number (line {line_no})"))
            })
        };
        let u = |what: &str| -> Result<u64> {
            value.parse::<u64>().map_err(|_| {
                Error::invalid(what, format!("`{value}` is not an integer (line {line_no})"))
            })
        };

        match section {
            Section::None => {
                return Err(Error::invalid(
                    format!("line {line_no}"),
                    "key outside any [section]",
                ))
            }
            Section::User | Section::Group => {
                let block = blocks.last_mut().expect("section implies a block");
                match key {
                    "count" if section == Section::Group => block.count = Some(u("count")?),
                    "mean_gain" => block.mean_gain = Some(f("mean_gain")?),
                    "rate_bps" => block.rate_bps = Some(f("rate_bps")?),
                    "rate_kbps" => block.rate_bps = Some(f("rate_kbps")? * 1e3),
                    _ => return Err(unknown()),
                }
            }
            Section::Ttsga => match key {
                "omega" => cfg.omega = f(key)?,
                "delta" => cfg.delta = f(key)?,
                "theta_min" => cfg.theta_min = f(key)?,
                "theta0" => cfg.theta0 = Some(f(key)?),
                "lambda0" => cfg.lambda0 = f(key)?,
                "exp_a" => cfg.schedule.exp_a = f(key)?,
                "exp_b" => cfg.schedule.exp_b = f(key)?,
                "exp_c" => cfg.schedule.exp_c = f(key)?,
                "scale_a" => cfg.schedule.scale_a = f(key)?,
                "scale_b" => cfg.schedule.scale_b = f(key)?,
                "scale_c" => cfg.schedule.scale_c = f(key)?,
                "theta_warmup" => cfg.theta_warmup = u(key)?,
                "theta_window" => cfg.theta_window = u(key)?,
                "theta_step_cap" => cfg.theta_step_cap = f(key)?,
                "dual_mode" => {
                    cfg.dual_mode = match value {
                        "per_level" => DualMode::PerLevel,
                        "shared" => DualMode::Shared,
                        _ => return Err(Error::invalid(key, format!("unknown value `{value}`"))),
                    }
                }
                "phase_mode" => {
                    cfg.phase_mode = match value {
                        "random" => PhaseMode::Random,
                        "alternating" => PhaseMode::Alternating,
                        _ => return Err(Error::invalid(key, format!("unknown value `{value}`"))),
                    }
                }
                _ => return Err(unknown()),
            },
            Section::Channel => match key {
                "noise_density" => cfg.noise_density = f(key)?,
                "bandwidth" => cfg.bandwidth = f(key)?,
                _ => return Err(unknown()),
            },
            Section::Run => match key {
                "horizon" => cfg.horizon = u(key)?,
                "replications" => cfg.replications = u(key)? as u32,
                "seed" => cfg.seed = u(key)?,
                "sample_every" => cfg.sample_every = u(key)?,
                "packet_bits" => cfg.packet_bits = u(key)?,
                "gate_rate_tol" => gates.rate_tol = Some(f(key)?),
                "mode" => {
                    cfg.mode = match value {
                        "slotted" => SimMode::Slotted,
                        "protocol" => SimMode::Protocol,
                        _ => return Err(Error::invalid(key, format!("unknown value `{value}`"))),
                    }
                }
                "power_mode" => match value {
                    "waterfilling" => power_mode_constant = false,
                    "constant" => power_mode_constant = true,
                    _ => return Err(Error::invalid(key, format!("unknown value `{value}`"))),
                },
                "constant_power" => constant_power = Some(f(key)?),
                _ => return Err(unknown()),
            },
            Section::Protocol => match key {
                "rts" => cfg.timing.rts = f(key)?,
                "cts" => cfg.timing.cts = f(key)?,
                "data" => cfg.timing.data = f(key)?,
                "ack" => cfg.timing.ack = f(key)?,
                "idle_gap" => cfg.timing.idle_gap = f(key)?,
                "collision_timeout" => cfg.timing.collision_timeout = f(key)?,
                "rts_energy" => cfg.timing.rts_energy = f(key)?,
                _ => return Err(unknown()),
            },
        }
    }

    for b in &blocks {
        let count = b.count.ok_or_else(|| {
            Error::invalid(
                format!("group at line {}", b.line),
                "missing `count`",
            )
        })?;
        let mean_gain = b.mean_gain.ok_or_else(|| {
            Error::invalid(
                format!("user block at line {}", b.line),
                "missing `mean_gain`",
            )
        })?;
        let rate = b.rate_bps.ok_or_else(|| {
            Error::invalid(
                format!("user block at line {}", b.line),
                "missing `rate_bps` or `rate_kbps`",
            )
        })?;
        for _ in 0..count {
            cfg.users.push(UserSpec {
                mean_gain,
                rate_target: rate,
            });
        }
    }

    cfg.power_mode = if power_mode_constant {
        PowerMode::Constant(constant_power.unwrap_or(1.0))
    } else {
        PowerMode::Waterfilling
    };

    cfg.validate()?;
    Ok(LoadedConfig {
        scenario: cfg,
        gates,
    })
}
