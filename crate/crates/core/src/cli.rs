//! Command-line front end: experiment execution and CSV emission.
//!
//! Commands:
//!
//! * `run` — one scenario from a config file; emits `timeseries.csv`,
//!   `summary.csv` and `manifest.txt`.
//! * `sweep-scenario1` — the stock rate-variation sweep (7 points, 20
//!   users each); per-point time series plus one combined `summary.csv`.
//! * `sweep-scenario2` — the stock channel-variation sweep, same layout.
//! * `oracle` — run a scenario and compare its converged state against
//!   the analytic fixed point; emits `oracle.csv`.
//!
//! All CSV files are UTF-8 with a header row, `.` decimal separator, and
//! a row order that never depends on hash iteration: users ascending
//! within sweep points ascending. Reruns with the same config and seed
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::collision_sim::{
    run_scenario, scenario1_configs, scenario2_configs, Metrics, PowerMode, ScenarioConfig,
    SimMode, SWEEP_GAINS, SWEEP_RATES,
};
use crate::config::{load_config, Gates};
use crate::equilibrium::{nash_fixed_point, EquilibriumConfig, EquilibriumProfile};
use crate::error::{Error, Result};
use crate::ttsga::{DualMode, PhaseMode};

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "raccess",
    about = "Rate-constrained random access: simulator, sweeps and equilibrium checks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Base RNG seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent replications (overrides the config file).
    #[arg(long)]
    replications: Option<u32>,
    /// Slots (or rounds) per replication (overrides the config file).
    #[arg(long)]
    horizon: Option<u64>,
    /// Coordinator mode: slotted | protocol.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configured scenario.
    Run {
        /// Scenario description file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Stock rate-variation sweep (group 2 from 50 to 110 Kbit/s).
    SweepScenario1 {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Stock channel-variation sweep (group 2 mean gain 0.05 to 1.3867).
    SweepScenario2 {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a scenario and compare against the analytic fixed point.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Fail (exit nonzero) if any |theta_sim - theta_star| exceeds this.
        #[arg(long)]
        gate_theta: Option<f64>,
        /// Fail if any relative per-slot power gap exceeds this.
        #[arg(long)]
        gate_power: Option<f64>,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_entry() -> std::process::ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, common } => {
            let loaded = load_config(&config)?;
            let scenario = apply_overrides(loaded.scenario, &common)?;
            cmd_run(&scenario, loaded.gates, &common.out)
        }
        Command::SweepScenario1 { common } => {
            let points: Vec<(f64, ScenarioConfig)> = scenario1_configs()
                .into_iter()
                .zip(SWEEP_RATES)
                .map(|(c, v)| Ok((v, apply_overrides(c, &common)?)))
                .collect::<Result<_>>()?;
            cmd_sweep("scenario1", &points, &common.out)
        }
        Command::SweepScenario2 { common } => {
            let points: Vec<(f64, ScenarioConfig)> = scenario2_configs()
                .into_iter()
                .zip(SWEEP_GAINS)
                .map(|(c, v)| Ok((v, apply_overrides(c, &common)?)))
                .collect::<Result<_>>()?;
            cmd_sweep("scenario2", &points, &common.out)
        }
        Command::Oracle {
            config,
            common,
            gate_theta,
            gate_power,
        } => {
            let loaded = load_config(&config)?;
            let scenario = apply_overrides(loaded.scenario, &common)?;
            cmd_oracle(&scenario, gate_theta, gate_power, &common.out)
        }
    }
}

fn apply_overrides(mut cfg: ScenarioConfig, common: &CommonArgs) -> Result<ScenarioConfig> {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.replications {
        cfg.replications = reps;
    }
    if let Some(h) = common.horizon {
        cfg.horizon = h;
    }
    if let Some(mode) = &common.mode {
        cfg.mode = match mode.as_str() {
            "slotted" => SimMode::Slotted,
            "protocol" => SimMode::Protocol,
            other => return Err(Error::invalid("--mode", format!("unknown mode `{other}`"))),
        };
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Resolved inputs of a command invocation; the id is a hash of the
/// canonical config text and the seed list, so identical inputs map to
/// identical ids.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub run_id: String,
    pub seeds: Vec<u64>,
    pub canonical: String,
}

impl RunManifest {
    pub fn new(configs: &[&ScenarioConfig]) -> Self {
        let mut canonical = String::new();
        let mut seeds = Vec::new();
        for (k, cfg) in configs.iter().enumerate() {
            let _ = writeln!(canonical, "[point {k}]");
            canonical.push_str(&canonical_text(cfg));
            seeds.extend((0..cfg.replications as u64).map(|r| cfg.seed + r));
        }
        let mut hash = fnv1a64(canonical.as_bytes());
        for &s in &seeds {
            hash = fnv1a64_u64(hash, s);
        }
        RunManifest {
            run_id: format!("{hash:016x}"),
            seeds,
            canonical,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "run_id = {}", self.run_id);
        let _ = writeln!(
            text,
            "seeds = {}",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        text.push_str(&self.canonical);
        fs::write(path, text)?;
        Ok(())
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fnv1a64_u64(seed: u64, v: u64) -> u64 {
    let mut h = seed;
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic key=value rendering of a resolved config.
pub fn canonical_text(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    for (i, u) in cfg.users.iter().enumerate() {
        let _ = writeln!(s, "user.{i} = gain {} rate {}", u.mean_gain, u.rate_target);
    }
    let _ = writeln!(s, "omega = {}", cfg.omega);
    let _ = writeln!(s, "delta = {}", cfg.delta);
    let _ = writeln!(s, "theta_min = {}", cfg.theta_min);
    let _ = writeln!(s, "theta0 = {}", cfg.theta_start());
    let _ = writeln!(s, "lambda0 = {}", cfg.lambda0);
    let _ = writeln!(
        s,
        "schedule = {} {} {} x {} {} {}",
        cfg.schedule.exp_a,
        cfg.schedule.exp_b,
        cfg.schedule.exp_c,
        cfg.schedule.scale_a,
        cfg.schedule.scale_b,
        cfg.schedule.scale_c
    );
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "replications = {}", cfg.replications);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(
        s,
        "power_mode = {}",
        match cfg.power_mode {
            PowerMode::Waterfilling => "waterfilling".to_string(),
            PowerMode::Constant(p) => format!("constant {p}"),
        }
    );
    let _ = writeln!(
        s,
        "mode = {}",
        match cfg.mode {
            SimMode::Slotted => "slotted",
            SimMode::Protocol => "protocol",
        }
    );
    let _ = writeln!(
        s,
        "dual_mode = {}",
        match cfg.dual_mode {
            DualMode::PerLevel => "per_level",
            DualMode::Shared => "shared",
        }
    );
    let _ = writeln!(
        s,
        "phase_mode = {}",
        match cfg.phase_mode {
            PhaseMode::Random => "random",
            PhaseMode::Alternating => "alternating",
        }
    );
    let _ = writeln!(s, "noise_density = {}", cfg.noise_density);
    let _ = writeln!(s, "bandwidth = {}", cfg.bandwidth);
    let _ = writeln!(s, "sample_every = {}", cfg.sample_every);
    let _ = writeln!(s, "packet_bits = {}", cfg.packet_bits);
    let _ = writeln!(s, "theta_warmup = {}", cfg.theta_warmup);
    let _ = writeln!(s, "theta_window = {}", cfg.theta_window);
    let _ = writeln!(s, "theta_step_cap = {}", cfg.theta_step_cap);
    let t = cfg.timing;
    let _ = writeln!(
        s,
        "timing = rts {} cts {} data {} ack {} idle {} timeout {} rts_energy {}",
        t.rts, t.cts, t.data, t.ack, t.idle_gap, t.collision_timeout, t.rts_energy
    );
    s
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

pub const SUMMARY_HEADER: &str = "point,param,user,mean_gain,target_rate,converged_theta,\
final_lambda,achieved_rate,achieved_power,tail_rate,tail_power,attempts,successes,collisions";

pub const TIMESERIES_HEADER: &str = "slot,user,theta,lambda,rate_avg,power_avg";

pub const ORACLE_HEADER: &str = "user,theta_star,beta_star,lambda_star,power_total_star,\
power_slot_star,theta_sim,lambda_sim,power_slot_sim,theta_delta,power_rel_delta";

/// Append one sweep point's summary rows (one per user, ascending).
fn push_summary_rows(out: &mut String, point: usize, param: f64, metrics: &Metrics) {
    for (user, s) in metrics.summary.iter().enumerate() {
        let _ = writeln!(
            out,
            "{point},{param},{user},{},{},{},{},{},{},{},{},{},{},{}",
            s.mean_gain,
            s.rate_target,
            s.converged_theta,
            s.final_lambda,
            s.rate_avg,
            s.power_avg,
            s.tail_rate_avg,
            s.tail_power_avg,
            s.attempts,
            s.successes,
            s.collisions
        );
    }
}

fn timeseries_csv(metrics: &Metrics) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for (k, &slot) in metrics.sample_slots.iter().enumerate() {
        for (user, s) in metrics.series.iter().enumerate() {
            let _ = writeln!(
                out,
                "{slot},{user},{},{},{},{}",
                s.theta[k], s.lambda[k], s.rate_avg[k], s.power_avg[k]
            );
        }
    }
    out
}

fn check_gates(metrics: &Metrics, gates: Gates) -> Result<()> {
    if let Some(tol) = gates.rate_tol {
        for (user, s) in metrics.summary.iter().enumerate() {
            let rel = (s.rate_avg - s.rate_target).abs() / s.rate_target;
            if rel > tol {
                return Err(Error::Gate(format!(
                    "user {user}: relative rate miss {rel:.4} exceeds {tol}"
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Run one scenario and emit its artifacts into `out`.
pub fn cmd_run(cfg: &ScenarioConfig, gates: Gates, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = RunManifest::new(&[cfg]);
    let metrics = run_scenario(cfg)?;

    manifest.write(&out.join("manifest.txt"))?;
    fs::write(out.join("timeseries.csv"), timeseries_csv(&metrics))?;
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    push_summary_rows(&mut summary, 0, 0.0, &metrics);
    fs::write(out.join("summary.csv"), summary)?;
    println!(
        "run {}: {} users x {} slots x {} reps -> {}",
        manifest.run_id,
        cfg.users.len(),
        cfg.horizon,
        cfg.replications,
        out.display()
    );
    check_gates(&metrics, gates)
}

/// Run a list of sweep points and emit per-point series plus a combined
/// summary.
pub fn cmd_sweep(name: &str, points: &[(f64, ScenarioConfig)], out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = RunManifest::new(&points.iter().map(|(_, c)| c).collect::<Vec<_>>());
    manifest.write(&out.join("manifest.txt"))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (k, (param, cfg)) in points.iter().enumerate() {
        let metrics = run_scenario(cfg)?;
        let dir = out.join(format!("point_{k}"));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("timeseries.csv"), timeseries_csv(&metrics))?;
        push_summary_rows(&mut summary, k, *param, &metrics);
        println!("{name} point {k} (param {param}) done");
    }
    fs::write(out.join("summary.csv"), summary)?;
    println!("{name}: {} points -> {}", points.len(), out.display());
    Ok(())
}

/// Analytic fixed point for the users of a scenario config.
pub fn oracle_profile(cfg: &ScenarioConfig) -> Result<EquilibriumProfile> {
    let channels = cfg
        .users
        .iter()
        .map(|u| {
            crate::channel::ChannelModel::default_bins_with_noise(
                u.mean_gain,
                cfg.noise_density,
                cfg.bandwidth,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut eq_cfg = EquilibriumConfig::new(
        channels,
        cfg.users.iter().map(|u| u.rate_target).collect(),
        cfg.omega,
    );
    eq_cfg.theta_min = cfg.theta_min;
    nash_fixed_point(&eq_cfg)
}

/// Run the scenario, solve the fixed point, and emit the comparison.
pub fn cmd_oracle(
    cfg: &ScenarioConfig,
    gate_theta: Option<f64>,
    gate_power: Option<f64>,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = RunManifest::new(&[cfg]);
    manifest.write(&out.join("manifest.txt"))?;
    let metrics = run_scenario(cfg)?;
    fs::write(out.join("timeseries.csv"), timeseries_csv(&metrics))?;
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    push_summary_rows(&mut summary, 0, 0.0, &metrics);
    fs::write(out.join("summary.csv"), summary)?;

    let gated = gate_theta.is_some() || gate_power.is_some();
    let profile = match oracle_profile(cfg) {
        Ok(p) => p,
        Err(e) if !gated => {
            // Surface the failure but still leave the simulated artifacts.
            eprintln!("warning: fixed point not found: {e}");
            let mut csv = String::from(ORACLE_HEADER);
            csv.push('\n');
            for (user, s) in metrics.summary.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{user},NaN,NaN,NaN,NaN,NaN,{},{},{},NaN,NaN",
                    s.converged_theta, s.final_lambda, s.tail_power_avg
                );
            }
            fs::write(out.join("oracle.csv"), csv)?;
            return Ok(());
        }
        Err(e) => return Err(e),
    };

    let mut csv = String::from(ORACLE_HEADER);
    csv.push('\n');
    let mut worst_theta: f64 = 0.0;
    let mut worst_power: f64 = 0.0;
    for (user, s) in metrics.summary.iter().enumerate() {
        let theta_star = profile.theta_star[user];
        let slot_star = profile.power_per_slot[user];
        let theta_delta = (s.converged_theta - theta_star).abs();
        let power_rel = (s.tail_power_avg - slot_star).abs() / slot_star;
        worst_theta = worst_theta.max(theta_delta);
        worst_power = worst_power.max(power_rel);
        let _ = writeln!(
            csv,
            "{user},{theta_star},{},{},{},{slot_star},{},{},{},{theta_delta},{power_rel}",
            profile.beta_star[user],
            profile.lambda_star[user],
            profile.power_total[user],
            s.converged_theta,
            s.final_lambda,
            s.tail_power_avg
        );
    }
    fs::write(out.join("oracle.csv"), csv)?;
    println!(
        "oracle {}: worst |theta_sim - theta_star| = {worst_theta:.4}, worst power gap = {:.2}%",
        manifest.run_id,
        100.0 * worst_power
    );
    if let Some(tol) = gate_theta {
        if worst_theta > tol {
            return Err(Error::Gate(format!(
                "theta gap {worst_theta:.4} exceeds {tol}"
            )));
        }
    }
    if let Some(tol) = gate_power {
        if worst_power > tol {
            return Err(Error::Gate(format!(
                "power gap {worst_power:.4} exceeds {tol}"
            )));
        }
    }
    Ok(())
}
