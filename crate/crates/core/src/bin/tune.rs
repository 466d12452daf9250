// Temporary tuning harness; not part of the deliverable.
use raccess::channel::ChannelModel;
use raccess::collision_sim::*;
use raccess::equilibrium::*;

fn single_state_cfg(n: usize, rate: f64, omega: f64, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(vec![
        UserSpec {
            mean_gain: 1.0,
            rate_target: rate,
        };
        n
    ]);
    cfg.omega = omega;
    cfg.theta_min = 0.01;
    cfg.delta = 0.03;
    cfg.theta_window = 500;
    cfg.theta_warmup = 2000;
    cfg.schedule.scale_c = 2.0;
    cfg.replications = 10;
    cfg.seed = seed;
    cfg
}

fn run_single_state(cfg: &ScenarioConfig) -> Metrics {
    // patch channels to single-state via Simulation is per-rep; emulate by
    // noise fields: single_state via custom run — simplest: use a gain so
    // the default grid degenerates? No: run manually.
    let reps: Vec<RepResult> = (0..cfg.replications)
        .map(|r| {
            let mut sim = Simulation::new(cfg, r).unwrap();
            for u in 0..cfg.users.len() {
                sim.set_channel(u, ChannelModel::single_state(1.0, 1e-7, 1e7).unwrap());
            }
            sim.run()
        })
        .collect();
    // reuse private fold by calling run_scenario? can't. summarize here.
    let n = cfg.users.len();
    let mut th = vec![0.0; n];
    let mut pw = vec![0.0; n];
    let mut rt = vec![0.0; n];
    let mut th_min = vec![f64::INFINITY; n];
    for r in &reps {
        for i in 0..n {
            th[i] += r.summary[i].converged_theta / cfg.replications as f64;
            pw[i] += r.summary[i].tail_power_avg / cfg.replications as f64;
            rt[i] += r.summary[i].rate_avg / cfg.replications as f64;
            th_min[i] = th_min[i].min(r.summary[i].converged_theta);
        }
    }
    println!(
        "  repavg theta={:?} worst_single_rep_theta={:.4}",
        th.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>(),
        th_min.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    println!(
        "  rate_err%={:?} tailpow={:?}",
        rt.iter()
            .zip(&cfg.users)
            .map(|(r, u)| format!("{:+.2}", (r - u.rate_target) / u.rate_target * 100.0))
            .collect::<Vec<_>>(),
        pw.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>()
    );
    Metrics {
        horizon: cfg.horizon,
        sample_every: cfg.sample_every,
        replications: cfg.replications,
        sample_slots: vec![],
        summary: vec![],
        series: vec![],
        reps: reps.into_iter().map(|r| r.summary).collect(),
        elapsed: 0.0,
    }
}

fn main() {
    let t0 = std::time::Instant::now();
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("all");

    if which == "all" || which == "oracle" {
        println!("=== oracle instances (single-state) ===");
        for (n, rate, omega) in [(1usize, 4e6, 0.5), (2, 2e6, 0.4), (3, 1.5e6, 0.3)] {
          for seed in [3u64, 11, 29] {
            let cfg = single_state_cfg(n, rate, omega, seed);
            // analytic prediction
            let ch = ChannelModel::single_state(1.0, 1e-7, 1e7).unwrap();
            let eq = nash_fixed_point(&EquilibriumConfig::new(
                vec![ch; n],
                vec![rate; n],
                omega,
            ))
            .unwrap();
            println!(
                "N={n} rate={rate:.0} omega={omega}: theta*={:.4} slotpow*={:.4}",
                eq.theta_star[0], eq.power_per_slot[0]
            );
            run_single_state(&cfg);
          }
        }
    }

    if which == "n3" {
        println!("=== N=3 stabilization matrix ===");
        for (rate, delta, window) in [
            (1.5e6, 0.02, 250u64), (1.5e6, 0.02, 500), (1.5e6, 0.03, 500),
            (1.2e6, 0.03, 500), (2.0e6, 0.03, 500), (1.5e6, 0.03, 250),
        ] {
            let mut worst = f64::INFINITY;
            let mut sum = 0.0;
            let mut nruns = 0;
            let mut worst_rate = 0.0f64;
            for seed in [3u64, 11, 29] {
                let mut cfg = single_state_cfg(3, rate, 0.3, seed);
                cfg.delta = delta;
                cfg.theta_window = window;
                for r in 0..cfg.replications {
                    let mut sim = Simulation::new(&cfg, r).unwrap();
                    for u in 0..3 {
                        sim.set_channel(u, ChannelModel::single_state(1.0, 1e-7, 1e7).unwrap());
                    }
                    let rr = sim.run();
                    for s in &rr.summary {
                        worst = worst.min(s.converged_theta);
                        sum += s.converged_theta;
                        nruns += 1;
                        worst_rate = worst_rate.max(((s.rate_avg - rate)/rate).abs());
                    }
                }
            }
            println!("rate={rate:.1e} delta={delta} window={window}: mean_th={:.4} worst_th={:.4} worst_rate_err={:.2}%",
                sum / nruns as f64, worst, 100.0*worst_rate);
        }
    }

    if which == "all" || which == "sweep" {
        println!("=== scenario sweeps (extreme points) ===");
        for cfg in [
            &scenario1_configs()[0],
            &scenario1_configs()[6],
            &scenario2_configs()[0],
            &scenario2_configs()[6],
        ] {
            let m = run_scenario(cfg).unwrap();
            let g1th: f64 = m.summary[..10].iter().map(|s| s.converged_theta).sum::<f64>() / 10.0;
            let g2th: f64 = m.summary[10..].iter().map(|s| s.converged_theta).sum::<f64>() / 10.0;
            let g1p: f64 = m.summary[..10].iter().map(|s| s.power_avg).sum::<f64>() / 10.0;
            let g2p: f64 = m.summary[10..].iter().map(|s| s.power_avg).sum::<f64>() / 10.0;
            let worst_rate = m
                .summary
                .iter()
                .map(|s| ((s.rate_avg - s.rate_target) / s.rate_target).abs())
                .fold(0.0f64, f64::max);
            let worst_theta = m
                .reps
                .iter()
                .flat_map(|r| r.iter().map(|s| s.converged_theta))
                .fold(f64::INFINITY, f64::min);
            println!(
                "g2rate={:.0} g2gain={:.4}: G1 th={g1th:.4} P={g1p:.4} | G2 th={g2th:.4} P={g2p:.4} | worst rate err {:.2}% | min rep theta {worst_theta:.4}",
                cfg.users[19].rate_target,
                cfg.users[19].mean_gain,
                100.0 * worst_rate
            );
        }
    }

    println!("elapsed {:?}", t0.elapsed());
}
