//! Criteria with exact, deterministic answers.

use std::collections::BTreeSet;

use ctdl::agent::{Decision, Transition};
use ctdl::approx::{Activation, GaussianHead, Network, Optimizer};
use ctdl::explain::{generate_online, prune};
use ctdl::seed::rng_for;
use ctdl::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Outcome;

fn random_trace(rng: &mut ChaCha8Rng) -> Vec<TraceRow> {
    let len = rng.random_range(0..60);
    let units = rng.random_range(1..25);
    (0..len)
        .map(|t| {
            let unit = rng.random_range(0..units);
            // unit-specific memory so equal units share a state
            let memory = vec![unit as f64 / 25.0, (unit * 7 % 25) as f64 / 25.0];
            let beta = match rng.random_range(0..4) {
                0 => [0.5, 0.75, 0.99][rng.random_range(0..3)],
                _ => rng.random_range(1e-6..=1.0),
            };
            TraceRow {
                t,
                unit,
                memory_raw: memory.clone(),
                memory,
                value: rng.random_range(-1.0..1.0),
                beta,
                action: EnvAction::Discrete(rng.random_range(0..4)),
            }
        })
        .collect()
}

fn keys(e: &Explanation) -> BTreeSet<(usize, u64, u64)> {
    e.entries.iter().map(|x| (x.t, x.state_norm[0].to_bits(), x.state_norm[1].to_bits())).collect()
}

pub fn c05_threshold_monotonicity() -> Outcome {
    let mut rng = rng_for(&[5]);
    for i in 0..1000 {
        let trace = random_trace(&mut rng);
        let (a, b, c) = (prune(&trace, 0.5), prune(&trace, 0.75), prune(&trace, 0.99));
        let (ka, kb, kc) = (keys(&a), keys(&b), keys(&c));
        if !(c.len() <= b.len() && b.len() <= a.len() && kc.is_subset(&kb) && kb.is_subset(&ka)) {
            return (false, format!("trace {i}: sizes {} / {} / {}", c.len(), b.len(), a.len()));
        }
    }
    (true, "1000 random traces, nested at 0.99 / 0.75 / 0.5".into())
}

fn fuzz_env(rng: &mut ChaCha8Rng) -> EnvSpec {
    if rng.random_bool(0.5) {
        let (w, h) = (rng.random_range(2..9), rng.random_range(2..9));
        let start = [rng.random_range(0..w), rng.random_range(0..h)];
        let mut goal = [rng.random_range(0..w), rng.random_range(0..h)];
        if goal == start {
            goal = [(start[0] + 1) % w, start[1]];
        }
        let penalties: Vec<[usize; 2]> = (0..rng.random_range(0..4))
            .map(|_| [rng.random_range(0..w), rng.random_range(0..h)])
            .filter(|c| *c != start && *c != goal)
            .collect();
        let spec = GridWorldSpec { max_steps: rng.random_range(5..200), ..GridWorldSpec::new(w, h, start, goal) };
        EnvSpec::GridWorld(spec.with_penalties(penalties))
    } else {
        let lo = rng.random_range(-1.0..-0.3);
        EnvSpec::MountainCar(MountainCarSpec {
            start_position: [lo, lo + rng.random_range(0.0..0.2)],
            max_steps: rng.random_range(10..400),
            ..MountainCarSpec::default()
        })
    }
}

fn fuzz_agent(env: &EnvSpec, rng: &mut ChaCha8Rng) -> Agent {
    let mut cfg = AgentConfig::for_env(env);
    if matches!(env, EnvSpec::MountainCar(_)) && rng.random_bool(0.3) {
        cfg.variant = AgentVariant::A2cBaseline;
    }
    cfg.value_hidden = vec![rng.random_range(2..12)];
    cfg.actor_hidden = vec![rng.random_range(2..12)];
    cfg.som.width = rng.random_range(1..6);
    cfg.som.height = rng.random_range(1..6);
    cfg.som.tau = 10f64.powf(rng.random_range(-3.0..0.0));
    let mut agent = Agent::new(cfg, env, rng).unwrap();
    // a little training so the memory is not just its random init
    let mut e = env.build().unwrap();
    for episode in 0..rng.random_range(0..3) {
        let mut s = e.reset(rng);
        loop {
            let d = agent.act(&s, episode, rng).unwrap();
            let step = e.step(&d.action).unwrap();
            let tr = Transition { state: s, decision: d, reward: step.reward, next_state: step.next_obs.clone(), done: step.done };
            let _ = agent.learn(&tr);
            if step.finished() {
                break;
            }
            s = tr.next_state;
        }
    }
    agent
}

pub fn c06_online_offline() -> Outcome {
    let mut rng = rng_for(&[6]);
    let mut nonempty = 0;
    for case in 0..200 {
        let env = fuzz_env(&mut rng);
        let agent = fuzz_agent(&env, &mut rng);
        let threshold = [0.5, 0.75, 0.99, rng.random_range(0.0..0.99)][rng.random_range(0..4)];
        let stochastic = rng.random_bool(0.5);
        let seed = rng.random::<u64>();

        let mut e1 = env.build().unwrap();
        let online = generate_online(&agent, &mut e1, threshold, stochastic, &mut rng_for(&[seed])).unwrap();
        let mut e2 = env.build().unwrap();
        let trace = agent.run_test_trial(&mut e2, stochastic, &mut rng_for(&[seed])).unwrap();
        let offline = prune(&trace.rows(), threshold);

        let same = online.threshold.to_bits() == offline.threshold.to_bits()
            && online.entries.len() == offline.entries.len()
            && online.entries.iter().zip(&offline.entries).all(|(a, b)| {
                serde_json::to_string(a).unwrap() == serde_json::to_string(b).unwrap()
                    && a.beta.to_bits() == b.beta.to_bits()
                    && a.value.to_bits() == b.value.to_bits()
            });
        if !same {
            return (false, format!("case {case} ({}) differs", env.id()));
        }
        nonempty += usize::from(!online.is_empty());
    }
    (true, format!("200 fuzzed configurations bit-identical ({nonempty} non-empty)"))
}

pub fn c07_frozen_memories() -> Outcome {
    let mut details = Vec::new();
    for env in [
        EnvSpec::GridWorld(GridWorldSpec::new(8, 8, [0, 0], [7, 7]).with_penalties(vec![[3, 3], [4, 4]])),
        EnvSpec::MountainCar(MountainCarSpec::default()),
    ] {
        let mut rng = rng_for(&[7, env.id().len() as u64]);
        let mut cfg = AgentConfig::for_env(&env);
        cfg.value_hidden = vec![16];
        cfg.actor_hidden = vec![16];
        cfg.som.tau = 0.05;
        let mut agent = Agent::new(cfg.clone(), &env, &mut rng).unwrap();
        // eight distinct states spread over the box, with values and actions
        let bounds = env.bounds().unwrap();
        let entries = (0..8)
            .map(|t| {
                let state_norm = match &env {
                    EnvSpec::GridWorld(_) => vec![t as f64 / 7.0, ((t * 3) % 8) as f64 / 7.0],
                    _ => vec![rng.random::<f64>(), rng.random::<f64>()],
                };
                let action = match &env {
                    EnvSpec::GridWorld(_) => EnvAction::Discrete(t % 4),
                    _ => EnvAction::Continuous(vec![rng.random_range(-1.0..1.0)]),
                };
                ExplanationEntry {
                    t,
                    state_raw: bounds.denormalize(&state_norm).unwrap(),
                    state_norm,
                    value: rng.random_range(-1.0..1.0),
                    action,
                    beta: 0.9,
                }
            })
            .collect();
        let expl = Explanation { entries, threshold: 0.5, ..Default::default() };
        agent.seed_memory(&expl, &mut rng).unwrap();
        let som = agent.som().unwrap();
        let frozen_before = som.frozen_digest();
        let frozen_units: Vec<SomUnit> = som.units().iter().filter(|u| u.frozen).cloned().collect();
        let all_before = som.digest();
        if frozen_units.len() != expl.len() {
            return (false, format!("{}: {} frozen units for {} entries", env.id(), frozen_units.len(), expl.len()));
        }

        let mut e = env.build().unwrap();
        let mut transitions = 0;
        let mut episode = 0;
        while transitions < 10_000 {
            let mut s = e.reset(&mut rng);
            loop {
                let d = agent.act(&s, episode, &mut rng).unwrap();
                let step = e.step(&d.action).unwrap();
                let tr = Transition { state: s, decision: d, reward: step.reward, next_state: step.next_obs.clone(), done: step.done };
                let _ = agent.learn(&tr);
                transitions += 1;
                if step.finished() || transitions == 10_000 {
                    break;
                }
                s = tr.next_state;
            }
            episode += 1;
        }
        let som = agent.som().unwrap();
        let after: Vec<SomUnit> = som.units().iter().filter(|u| u.frozen).cloned().collect();
        if som.frozen_digest() != frozen_before || after != frozen_units {
            return (false, format!("{}: frozen units changed", env.id()));
        }
        if som.digest() == all_before {
            return (false, format!("{}: free units never learned, the check is vacuous", env.id()));
        }
        details.push(format!("{} {} frozen", env.id(), frozen_units.len()));
    }
    (true, format!("10000 transitions each, frozen units hash-identical ({})", details.join(", ")))
}

/// Relative error with a floor on the denominator, so parameters whose
/// gradient is numerically zero are judged on absolute error.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn c08_gradients() -> Outcome {
    let mut rng = rng_for(&[8]);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for net_index in 0..50 {
        let depth = rng.random_range(1..4);
        let mut sizes = vec![rng.random_range(1..5)];
        sizes.extend((0..depth).map(|_| rng.random_range(1..9)));
        let policy = net_index % 3 == 2;
        let k = rng.random_range(1..3);
        sizes.push(if policy { 2 * k } else { rng.random_range(1..5) });
        // tanh keeps the loss smooth; ReLU kinks would break finite differences
        let net = Network::new(&sizes, Activation::Tanh, &mut rng).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let head = GaussianHead { log_std_min: -5.0, log_std_max: 5.0 };
        let action: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let advantage = rng.random_range(-2.0..2.0);
        let coeffs: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();

        let loss = |n: &Network| -> f64 {
            let out = n.forward(&x).unwrap();
            if policy {
                -advantage * head.log_prob(&out, &action)
            } else {
                out.iter().zip(&coeffs).map(|(o, c)| o * c).sum()
            }
        };
        let trace = net.forward_trace(&x).unwrap();
        let d_out = if policy { head.loss_gradient(trace.output(), &action, advantage) } else { coeffs.clone() };
        let analytic = net.backward(&trace, &d_out).unwrap();

        let h = 1e-5;
        let mut probe = net.clone();
        for i in 0..net.params().len() {
            let p = net.params()[i];
            probe.params_mut()[i] = p + h;
            let up = loss(&probe);
            probe.params_mut()[i] = p - h;
            let down = loss(&probe);
            probe.params_mut()[i] = p;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], numeric));
            checked += 1;
        }
    }
    // the TD step must descend along the same gradient
    let mut net = Network::new(&[3, 5, 2], Activation::Relu, &mut rng).unwrap();
    let x = [0.2, -0.4, 0.9];
    let before = net.forward(&x).unwrap()[1];
    net.td_step(&mut Optimizer::sgd(1e-2).unwrap(), &x, 1, 1.0).unwrap();
    let moved_up = net.forward(&x).unwrap()[1] > before;
    let pass = worst < 1e-4 && moved_up;
    (pass, format!("50 nets, {checked} parameters, worst relative error {worst:.2e}"))
}

fn oracle_mc(spec: &MountainCarSpec, p: f64, v: f64, force: f64) -> (f64, f64, f64, bool) {
    let a = force.max(-1.0).min(1.0);
    let mut v2 = v + a * 0.0015 - 0.0025 * (3.0 * p).cos();
    v2 = v2.max(-0.07).min(0.07);
    let mut p2 = (p + v2).max(-1.2).min(0.6);
    if p2 <= -1.2 {
        p2 = -1.2;
        v2 = 0.0;
    }
    let done = p2 >= 0.45;
    let r = if done { 100.0 } else { 0.0 } - 0.1 * a * a;
    assert_eq!(spec.goal_position, 0.45);
    (p2, v2, r, done)
}

pub fn c09_dynamics() -> Outcome {
    let spec = MountainCarSpec::default();
    let mut rng = rng_for(&[9]);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = rng.random_range(-1.2..=0.6);
        let v = rng.random_range(-0.07..=0.07);
        let force = rng.random_range(-1.5..1.5);
        let (obs, r, done) = spec.transition(&[p, v], &EnvAction::Continuous(vec![force])).unwrap();
        let (p2, v2, r2, done2) = oracle_mc(&spec, p, v, force);
        if done != done2 {
            return (false, format!("termination differs at p={p}, v={v}, a={force}"));
        }
        worst = worst.max((obs[0] - p2).abs()).max((obs[1] - v2).abs()).max((r - r2).abs());
    }

    // 3 x 2 grid, start (0,0), goal (2,1), penalty (1,0); actions U D L R
    let grid = GridWorldSpec::new(3, 2, [0, 0], [2, 1]).with_penalties(vec![[1, 0]]);
    #[rustfmt::skip]
    let table: [([usize; 2], [[usize; 2]; 4]); 5] = [
        ([0, 0], [[0, 0], [0, 1], [0, 0], [1, 0]]),
        ([1, 0], [[1, 0], [1, 1], [0, 0], [2, 0]]),
        ([2, 0], [[2, 0], [2, 1], [1, 0], [2, 0]]),
        ([0, 1], [[0, 0], [0, 1], [0, 1], [1, 1]]),
        ([1, 1], [[1, 0], [1, 1], [0, 1], [2, 1]]),
    ];
    let mut grid_cases = 0;
    for (cell, nexts) in table {
        for (a, next) in nexts.iter().enumerate() {
            let state = [cell[0] as f64, cell[1] as f64];
            let (obs, r, done) = grid.transition(&state, &EnvAction::Discrete(a)).unwrap();
            let want_r = match *next {
                [2, 1] => 0.95,
                [1, 0] => -1.05,
                _ => -0.05,
            };
            if obs != vec![next[0] as f64, next[1] as f64] || r != want_r || done != (*next == [2, 1]) {
                return (false, format!("grid case {cell:?} action {a} gave {obs:?} {r} {done}"));
            }
            grid_cases += 1;
        }
    }
    let pass = worst <= 1e-12;
    (pass, format!("10000 mountain-car steps, max deviation {worst:.1e}; {grid_cases} grid cases exact"))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn c10_q_learning_reduction() -> Outcome {
    let env = EnvSpec::GridWorld(GridWorldSpec::new(5, 5, [0, 0], [4, 4]).with_penalties(vec![[2, 2], [1, 3]]));
    let mut cfg = AgentConfig::for_env(&env);
    cfg.value_hidden = vec![16, 16];
    cfg.som.tau = 1e-300;
    let gamma = cfg.gamma;
    let mut agent = Agent::new(cfg.clone(), &env, &mut rng_for(&[10, 0])).unwrap();
    let mut q = Network::new(&[2, 16, 16, 4], cfg.activation, &mut rng_for(&[10, 0])).unwrap();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, q.params().len()).unwrap();
    if agent.value_network() != &q {
        return (false, "initial parameters differ".into());
    }
    let bounds = env.bounds().unwrap();
    let mut e = env.build().unwrap();
    let mut steps = 0;
    for episode in 0..40 {
        let mut rng_a = rng_for(&[10, episode as u64, 1]);
        let mut rng_b = rng_a.clone();
        let mut s = e.reset(&mut rng_a);
        loop {
            let est = agent.combined_estimate(&s).unwrap();
            if est.beta != 0.0 {
                return (false, format!("beta {} at step {steps}", est.beta));
            }
            let d = agent.act(&s, episode, &mut rng_a).unwrap();

            let s_norm = bounds.normalize(&s).unwrap();
            let q_s = q.forward(&s_norm).unwrap();
            let eps = cfg.epsilon.value(episode);
            let a_ref = if rng_b.random::<f64>() < eps { rng_b.random_range(0..4) } else { argmax(&q_s) };
            if d.action != EnvAction::Discrete(a_ref) {
                return (false, format!("actions diverged at step {steps}"));
            }

            let step = e.step(&d.action).unwrap();
            let s2_norm = bounds.normalize(&step.next_obs).unwrap();
            let next_max = if step.done {
                0.0
            } else {
                q.forward(&s2_norm).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max)
            };
            let td = step.reward + gamma * next_max - q_s[a_ref];
            q.td_step(&mut opt, &s_norm, a_ref, td).unwrap();

            let tr = Transition {
                state: s,
                decision: Decision { ..d },
                reward: step.reward,
                next_state: step.next_obs.clone(),
                done: step.done,
            };
            agent.learn(&tr).unwrap();
            steps += 1;
            if agent.value_network().params() != q.params() {
                return (false, format!("parameters diverged at step {steps}"));
            }
            if step.finished() {
                break;
            }
            s = step.next_obs;
        }
    }
    (true, format!("{steps} transitions over 40 episodes, parameters identical at every step"))
}
