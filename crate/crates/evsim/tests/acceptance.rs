//! End-to-end acceptance gate. Each criterion prints one PASS line; a
//! failing criterion fails its test.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use evsim::agents::Profile;
use evsim::bandits::{
    linucb_predict, q_update, ContextVector, LinUcb, LinUcbConfig, QLearnerConfig, QTable,
};
use evsim::engine;
use evsim::linalg::{spd_solve, Matrix};
use evsim::metrics::MetricsRecord;
use evsim::mobility::{ChargingBehavior, DiversionBehavior};
use evsim::rng::{RngStreams, Stream};
use evsim::scenario::{desk_agents, desk_vehicles, generate_desk, DeskParams, ScenarioConfig};
use evsim::tours::{build_graph, cycles_to_tours, extract_tours, TripRecord};

fn pass(criterion: u32, what: &str) {
    println!("criterion {criterion} ({what}): PASS");
}

// ---------------------------------------------------------------- shared runs

fn desk_config(seed: u64, profile: Profile) -> ScenarioConfig {
    generate_desk(
        seed,
        desk_agents(profile),
        desk_vehicles(ChargingBehavior::AlwaysLoad, DiversionBehavior::DoNotDivert),
        &DeskParams::default(),
    )
}

const SEEDS: [u64; 3] = [11, 12, 13];

struct SeedPair {
    uncontrolled: MetricsRecord,
    controlled: MetricsRecord,
}

fn shared_runs() -> &'static Vec<SeedPair> {
    static RUNS: OnceLock<Vec<SeedPair>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| SeedPair {
                uncontrolled: engine::run(&desk_config(seed, Profile::ConstantLoading)).unwrap(),
                controlled: engine::run(&desk_config(seed, Profile::LinUcbDisjunct)).unwrap(),
            })
            .collect()
    })
}

// ------------------------------------------------------------------ criteria

#[test]
fn criterion_1_linucb_oracle_equivalence() {
    let start = Instant::now();
    let d = 6;
    let arms = 3;
    let alpha = 1.0;
    let mut bandit = LinUcb::new(LinUcbConfig {
        alpha,
        dimension: d,
        shared_dimension: 0,
        arm_count: arms,
    })
    .unwrap();
    // per-arm raw history for the dense recomputation
    let mut history: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); arms];
    let streams = RngStreams::new(42);
    let mut rng = streams.stream(Stream::ScenarioGen);
    for round in 0..100 {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ctx = ContextVector::new(x.clone()).unwrap();
        for arm in 0..arms {
            let incremental =
                linucb_predict(&bandit.arms[arm], None, &ctx, None, alpha).unwrap();
            // dense ridge recomputation from the raw history
            let mut a = Matrix::identity(d);
            let mut b = vec![0.0; d];
            for (hx, hr) in &history[arm] {
                a.add_outer(hx, hx, 1.0);
                for i in 0..d {
                    b[i] += hr * hx[i];
                }
            }
            let theta = spd_solve(&a, &b).unwrap();
            let a_inv_x = spd_solve(&a, &x).unwrap();
            let width: f64 = x.iter().zip(&a_inv_x).map(|(xi, yi)| xi * yi).sum();
            let dense = theta.iter().zip(&x).map(|(t, xi)| t * xi).sum::<f64>()
                + alpha * width.sqrt();
            assert!(
                (incremental - dense).abs() <= 1e-9,
                "round {round} arm {arm}: incremental {incremental} vs dense {dense}"
            );
        }
        let arm = round % arms;
        let reward = rng.gen_range(-1.0..1.0);
        bandit.update(arm, &ctx, None, reward).unwrap();
        history[arm].push((x, reward));
    }
    assert!(start.elapsed().as_secs() < 1);
    pass(1, "LinUCB oracle equivalence");
}

#[test]
fn criterion_2_linucb_learning() {
    let start = Instant::now();
    let d = 6;
    let arms = 3;
    for seed in 0..5u64 {
        let streams = RngStreams::new(100 + seed);
        let mut rng = streams.stream(Stream::ScenarioGen);
        let mut tie = streams.stream(Stream::TieBreak);
        // distinctly scaled arms, so the best arm clearly beats the average
        let theta: Vec<Vec<f64>> = (0..arms)
            .map(|a| {
                let scale = 0.4 + 0.3 * a as f64;
                (0..d).map(|_| scale * rng.gen_range(0.0..1.0)).collect()
            })
            .collect();
        let mut bandit = LinUcb::new(LinUcbConfig {
            alpha: 1.0,
            dimension: d,
            shared_dimension: 0,
            arm_count: arms,
        })
        .unwrap();
        let mut policy_sum = 0.0;
        let mut oracle_sum = 0.0;
        let mut random_sum = 0.0;
        let t_total = 10_000;
        let tail = 1000;
        for t in 0..t_total {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let ctx = ContextVector::new(x.clone()).unwrap();
            let contexts: Vec<ContextVector> = (0..arms).map(|_| ctx.clone()).collect();
            let valid: Vec<usize> = (0..arms).collect();
            let chosen = bandit.select(&contexts, None, &valid, &mut tie).unwrap();
            let mean_of = |arm: usize| -> f64 {
                theta[arm].iter().zip(&x).map(|(t, xi)| t * xi).sum()
            };
            // gaussian noise via Box-Muller
            let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..1.0));
            let noise = 0.1 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let reward = mean_of(chosen) + noise;
            bandit.update(chosen, &ctx, None, reward).unwrap();
            if t >= t_total - tail {
                policy_sum += mean_of(chosen);
                oracle_sum += (0..arms).map(mean_of).fold(f64::NEG_INFINITY, f64::max);
                random_sum += (0..arms).map(mean_of).sum::<f64>() / arms as f64;
            }
        }
        let (policy, oracle, random) =
            (policy_sum / tail as f64, oracle_sum / tail as f64, random_sum / tail as f64);
        assert!(policy >= 0.95 * oracle, "seed {seed}: policy {policy} < 95% of oracle {oracle}");
        assert!(policy >= 1.2 * random, "seed {seed}: policy {policy} not 20% above random {random}");
    }
    assert!(start.elapsed().as_secs() < 10);
    pass(2, "LinUCB learning on a synthetic linear bandit");
}

#[test]
fn criterion_3_q_learning_convergence() {
    let start = Instant::now();
    // deterministic 3-state, 2-action MDP:
    // action 0 stays (reward by state), action 1 advances the ring
    let next = |s: u32, a: u32| -> u32 {
        if a == 0 {
            s
        } else {
            (s + 1) % 3
        }
    };
    let reward = |s: u32, a: u32| -> f64 {
        match (s, a) {
            (0, 0) => 0.0,
            (0, 1) => 1.0,
            (1, 0) => 0.5,
            (1, 1) => 0.0,
            (2, 0) => 0.2,
            (2, 1) => 2.0,
            _ => unreachable!(),
        }
    };
    let gamma = 0.9;
    // value-iteration oracle for Q*
    let mut q_star = vec![[0.0f64; 2]; 3];
    for _ in 0..10_000 {
        let mut updated = q_star.clone();
        for s in 0..3u32 {
            for a in 0..2u32 {
                let ns = next(s, a) as usize;
                let max_next = q_star[ns][0].max(q_star[ns][1]);
                updated[s as usize][a as usize] = reward(s, a) + gamma * max_next;
            }
        }
        q_star = updated;
    }
    let cfg = QLearnerConfig { learning_rate: 0.1, discount: gamma, epsilon: 0.1, initial_value: 0.0 };
    let mut table = QTable::new(0.0, 2);
    let mut s = 0u32;
    let streams = RngStreams::new(7);
    let mut rng = streams.stream(Stream::EpsilonGreedy);
    for _ in 0..50_000 {
        // uniformly explored actions cover all pairs
        let a = rng.gen_range(0..2u32);
        let ns = next(s, a);
        q_update(&mut table, &cfg, s, a, reward(s, a), ns).unwrap();
        s = ns;
    }
    let mut max_err = 0.0f64;
    for s in 0..3u32 {
        for a in 0..2u32 {
            max_err = max_err.max((table.get(s, a) - q_star[s as usize][a as usize]).abs());
        }
    }
    assert!(max_err <= 1e-3, "max-norm error {max_err}");
    assert!(start.elapsed().as_secs() < 5);
    pass(3, "Q-learning convergence to the value-iteration fixed point");
}

#[test]
fn criterion_4_uncontrolled_overload() {
    let start = Instant::now();
    // no-EV base case
    let mut base = desk_config(SEEDS[0], Profile::ConstantLoading);
    base.tours.clear();
    let base_metrics = engine::run(&base).unwrap();
    let base_peak = base_metrics.global_max_loading();
    assert!((base_peak - 0.55).abs() <= 0.02, "base peak {base_peak}");
    // uncontrolled charging overloads at least one substation
    let uncontrolled = &shared_runs()[0].uncontrolled;
    let overloaded = uncontrolled.overload_counts().iter().any(|&(_, n)| n > 0);
    assert!(overloaded, "expected an overloaded substation, max {}", uncontrolled.global_max_loading());
    assert!(start.elapsed().as_secs() < 120);
    pass(4, "uncontrolled charging overloads; base peak 0.55");
}

#[test]
fn criterion_5_control_effectiveness() {
    let start = Instant::now();
    for (pair, seed) in shared_runs().iter().zip(SEEDS) {
        let (u_max, c_max) =
            (pair.uncontrolled.global_max_loading(), pair.controlled.global_max_loading());
        let (u_mean, c_mean) =
            (pair.uncontrolled.mean_of_daily_means(), pair.controlled.mean_of_daily_means());
        assert!(c_max < u_max, "seed {seed}: max {c_max} !< {u_max}");
        assert!(c_mean < u_mean, "seed {seed}: mean {c_mean} !< {u_mean}");
    }
    assert!(start.elapsed().as_secs() < 300 * 3);
    pass(5, "LinUCB control reduces max and mean loading on 3/3 seeds");
}

#[test]
fn criterion_6_learning_trend() {
    let mut improved = 0;
    for pair in shared_runs() {
        if let Some((first, last, _)) = pair.controlled.reward_delta_first_to_last() {
            if last > first {
                improved += 1;
            }
        }
    }
    assert!(improved >= 2, "reward improved on only {improved}/3 seeds");
    pass(6, "mean reward rises from first to last day on >=2/3 seeds");
}

#[test]
fn criterion_7_tour_extraction() {
    let start = Instant::now();
    let streams = RngStreams::new(77);
    let mut rng = streams.stream(Stream::ScenarioGen);
    let mut trips = Vec::new();
    let mut planted: Vec<Vec<String>> = Vec::new();
    for c in 0..50 {
        let len = 2 + (c % 3); // lengths 2, 3, 4
        let mut ids = Vec::new();
        let base_depart = rng.gen_range(0..20_000u64);
        for i in 0..len {
            let id = format!("c{c}_{i}");
            ids.push(id.clone());
            trips.push(TripRecord {
                id,
                from_edge: format!("cycle{c}_edge{i}"),
                to_edge: format!("cycle{c}_edge{}", (i + 1) % len),
                depart: base_depart + i as u64 * 10_000,
                distance_km: None,
                duration_s: None,
            });
        }
        planted.push(ids);
    }
    // noise trips on private edges; they can never close a cycle
    for n in 0..200 {
        trips.push(TripRecord {
            id: format!("n{n}"),
            from_edge: format!("noise{n}_a"),
            to_edge: format!("noise{n}_b"),
            depart: rng.gen_range(0..86_400),
            distance_km: None,
            duration_s: None,
        });
    }
    let graph = build_graph(trips).unwrap();
    let cycles = extract_tours(&graph, 2, 4);
    assert_eq!(cycles.len(), 50);
    let mut found: Vec<Vec<String>> = cycles
        .iter()
        .map(|c| {
            let mut ids: Vec<String> = c.iter().map(|&i| graph.nodes[i].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    found.sort();
    let mut expected = planted;
    for p in &mut expected {
        p.sort();
    }
    expected.sort();
    assert_eq!(found, expected);
    // deterministic across repeated runs
    assert_eq!(cycles, extract_tours(&graph, 2, 4));
    let tours = cycles_to_tours(&graph, &cycles, 10.0, 1200);
    for t in &tours {
        t.validate().unwrap();
    }
    assert!(start.elapsed().as_secs() < 1);
    pass(7, "tour extraction recovers 50 planted cycles among 200 noise trips");
}

#[test]
fn criterion_8_invariant_suites() {
    // randomized small desk scenarios; each case checks all run invariants
    let mut rng = RngStreams::new(888).stream(Stream::ScenarioGen);
    for case in 0..100 {
        let seed = rng.gen::<u64>();
        let profile = [
            Profile::ConstantLoading,
            Profile::WorkloadProportional,
            Profile::Random,
            Profile::LinUcbDisjunct,
            Profile::LinUcbHybrid,
            Profile::QLearning,
        ][case % 6];
        let charging = [
            ChargingBehavior::AlwaysLoad,
            ChargingBehavior::PriceAware,
            ChargingBehavior::AlwaysLoadHomeOnly,
            ChargingBehavior::PriceAwareHomeOnly,
        ][case % 4];
        let diversion = [
            DiversionBehavior::DoNotDivert,
            DiversionBehavior::DivertToCheapest,
            DiversionBehavior::DivertToHighestPower,
        ][case % 3];
        let params = DeskParams {
            substation_count: 8,
            station_count: 6 + (case as u32 % 10),
            vehicle_count: 10 + (case as u32 % 40),
            days: 1,
            skew: 0.2 + (case as f64 % 5.0) * 0.1,
            spaces_per_station: 1 + (case as u32 % 6),
        };
        let cfg = generate_desk(seed, desk_agents(profile), desk_vehicles(charging, diversion), &params);
        let m = engine::run(&cfg).unwrap();
        for v in &m.vehicles {
            // energy conservation to 1e-9 kWh
            let balance = v.initial_kwh + v.charged_kwh - v.consumed_kwh - v.final_kwh;
            assert!(balance.abs() <= 1e-9, "case {case}: vehicle {} off by {balance}", v.vehicle_id);
            // SoC in [0, 1]
            assert!(v.final_kwh >= -1e-12 && v.final_kwh <= cfg.vehicles.battery_capacity_kwh + 1e-12);
            assert!(v.charged_kwh >= 0.0 && v.consumed_kwh >= 0.0);
        }
        // one reward per decision
        for c in &m.agent_counts {
            assert_eq!(c.decisions, c.resolutions, "case {case}: station {}", c.station_id);
        }
        let total: u64 = m.agent_counts.iter().map(|c| c.decisions).sum();
        assert_eq!(total as usize, m.rewards.len(), "case {case}");
        // variant-B action-set membership
        for a in &m.actions {
            assert!(a.action < 5, "case {case}: action {}", a.action);
        }
    }
    // SPD preservation under random rank-1 updates
    let mut rng = RngStreams::new(999).stream(Stream::ScenarioGen);
    for case in 0..100 {
        let d = 2 + case % 9;
        let mut a = Matrix::identity(d);
        for _ in 0..30 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            a.add_outer(&x, &x, 1.0);
            let rhs: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(spd_solve(&a, &rhs).is_some(), "case {case}: matrix lost SPD");
        }
    }
    pass(8, "invariants hold over 100 randomized scenarios");
}

#[test]
fn criterion_9_determinism() {
    let cfg = desk_config(SEEDS[0], Profile::LinUcbDisjunct);
    let a = engine::run(&cfg).unwrap();
    let b = engine::run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let dir_a = dir.path().join("a");
    let dir_b = dir.path().join("b");
    let files_a = evsim::report::write_reports(&a, &dir_a).unwrap();
    let files_b = evsim::report::write_reports(&b, &dir_b).unwrap();
    assert_eq!(files_a.len(), files_b.len());
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let (ba, bb) = (std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
        assert_eq!(ba, bb, "{} differs between identical runs", fa.display());
    }
    pass(9, "identical seeds give byte-identical CSV outputs");
}

#[test]
fn criterion_10_performance_budget() {
    let start = Instant::now();
    let m = engine::run(&desk_config(99, Profile::LinUcbHybrid)).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(m.duration_steps, 864_000);
    assert!(elapsed.as_secs() < 300, "full desk run took {elapsed:?}");
    pass(10, "full desk scenario completes within the 5-minute budget");
}
