use std::collections::VecDeque;

use dynalab::agents::{bfs_plan, run_dyna_loop, LoopConfig, PlannerKind, TabularQ};
use dynalab::envs::{mrp_matrices, GridWorld, MrpSpec};
use dynalab::linalg::Matrix;
use dynalab::models::DirichletTabularModel;
use dynalab::neural::{adam_step, double_q_target, AdamState, Mlp, QSample};
use dynalab::replay::ReplayBuffer;
use dynalab::stability::{
    divergence_region_sweep, expected_td_outcome, fit_and_solve_linear_model, key_matrix,
    lstd_solve, stability_verdict, two_state_mrp, LinearMrp, Verdict,
};
use dynalab::{rng_from_seed, Transition};
use proptest::prelude::*;
use rand::Rng as _;

fn transition_strategy(n: usize) -> impl Strategy<Value = Transition> {
    (0..n, 0..2usize, -1.0..1.0f64, prop::bool::weighted(0.1), 0..n).prop_map(|(s, a, r, term, next)| {
        Transition::new(s, a, r, if term { 0.0 } else { 0.9 }, next)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deterministic_steps_are_pure(state in 0usize..104, action in 0usize..5, s1: u64, s2: u64) {
        let w = GridWorld::four_rooms(0.0).unwrap();
        let a = w.step(state, action, &mut rng_from_seed(s1)).unwrap();
        let b = w.step(state, action, &mut rng_from_seed(s2)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn slips_stay_local(state in 0usize..104, action in 0usize..5, seed: u64) {
        let w = GridWorld::four_rooms(0.2).unwrap();
        prop_assume!(!w.is_terminal(state));
        let t = w.step(state, action, &mut rng_from_seed(seed)).unwrap();
        let mut allowed = w.free_neighbours(state).unwrap();
        allowed.push(state);
        prop_assert!(allowed.contains(&t.next_state));
    }

    #[test]
    fn two_state_dynamics_are_column_stochastic(p in 0.0..=1.0f64) {
        let (dynamics, _) = mrp_matrices(&MrpSpec::new(p, 0.99).unwrap());
        for j in 0..2 {
            let col = dynamics[(0, j)] + dynamics[(1, j)];
            prop_assert!((col - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_returns_stored_transitions(
        ts in prop::collection::vec(transition_strategy(6), 1..40),
        capacity in 1usize..10,
        seed: u64,
    ) {
        let mut buffer = ReplayBuffer::with_capacity(capacity);
        for t in &ts {
            buffer.append(*t);
        }
        prop_assert!(buffer.len() <= capacity);
        let stored: Vec<Transition> = buffer.iter().copied().collect();
        let mut rng = rng_from_seed(seed);
        for t in buffer.sample_uniform(&mut rng, 16).unwrap() {
            prop_assert!(stored.contains(&t));
        }
    }

    #[test]
    fn dirichlet_predictive_is_count_plus_one(ts in prop::collection::vec(transition_strategy(5), 0..60)) {
        let (n, k) = (5usize, 2usize);
        let mut fwd = DirichletTabularModel::forward(n, k).unwrap();
        let mut bwd = DirichletTabularModel::backward(n, k).unwrap();
        let mut next_counts = vec![vec![0u64; n]; n * k];
        let mut pred_counts: Vec<((u64, u64, usize), Vec<u64>)> = Vec::new();
        for t in &ts {
            fwd.update(t).unwrap();
            bwd.update(t).unwrap();
            next_counts[t.state * k + t.action][t.next_state] += 1;
            let key = (t.reward.to_bits(), t.discount.to_bits(), t.next_state);
            match pred_counts.iter_mut().find(|(kk, _)| *kk == key) {
                Some((_, c)) => c[t.state * k + t.action] += 1,
                None => {
                    let mut c = vec![0u64; n * k];
                    c[t.state * k + t.action] = 1;
                    pred_counts.push((key, c));
                }
            }
        }
        prop_assert_eq!(fwd.observed_count_mass(), bwd.observed_count_mass());
        for (pair, row) in next_counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            for (next, &c) in row.iter().enumerate() {
                let exact = (c + 1) as f64 / (total + n as u64) as f64;
                let got = fwd.next_state_probability(pair / k, pair % k, next).unwrap();
                prop_assert!((got - exact).abs() < 1e-12);
            }
        }
        for ((r, g, next), counts) in &pred_counts {
            let total: u64 = counts.iter().sum();
            for (pair, &c) in counts.iter().enumerate() {
                let exact = (c + 1) as f64 / (total + (n * k) as u64) as f64;
                let got = bwd
                    .predecessor_probability(f64::from_bits(*r), f64::from_bits(*g), *next, pair / k, pair % k)
                    .unwrap();
                prop_assert!((got - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstd_matches_model_route_with_tabular_features(ts in prop::collection::vec(transition_strategy(4), 5..50)) {
        let features = Matrix::identity(4);
        let a = lstd_solve(&ts, &features, 0.0, 1e-3).unwrap();
        let b = fit_and_solve_linear_model(&ts, &features, 1e-3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
        }
    }

    #[test]
    fn identical_networks_reduce_to_q_learning(seed: u64, r in -1.0..1.0f64, gamma in 0.01..1.0f64) {
        let mut rng = rng_from_seed(seed);
        let net = Mlp::new(3, 4, &mut rng);
        let obs = [0.3, -0.2, 0.7];
        let next: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sample = QSample { observation: &obs, action: 1, reward: r, discount: gamma, next_observation: &next };
        let y = double_q_target(&net, &net, &sample).unwrap();
        let q = net.forward(&next).unwrap();
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(y, r + gamma * max);
    }

    #[test]
    fn symmetric_eigenvalues_match_nalgebra(values in prop::collection::vec(-3.0..3.0f64, 16)) {
        let m = Matrix::from_vec(4, 4, values.clone()).unwrap().symmetric_part().unwrap();
        let ours = m.symmetric_eigenvalues().unwrap();
        let na = nalgebra::DMatrix::from_row_slice(4, 4, m.as_slice());
        let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", ours, theirs);
        }
    }

    #[test]
    fn spectral_radius_matches_nalgebra(values in prop::collection::vec(-2.0..2.0f64, 9)) {
        let m = Matrix::from_vec(3, 3, values.clone()).unwrap();
        let ours = m.spectral_radius().unwrap();
        let na = nalgebra::DMatrix::from_row_slice(3, 3, &values);
        let theirs = na.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!((ours - theirs).abs() < 1e-8, "{} vs {}", ours, theirs);
    }
}

#[test]
fn gradient_check_on_random_networks() {
    let mut rng = rng_from_seed(11);
    for _ in 0..10 {
        let widths = [rng.random_range(1..6), rng.random_range(2..8), rng.random_range(2..8), rng.random_range(1..4)];
        let params: Vec<f64> = (0..Mlp::zeros(&widths).unwrap().params().len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let net = Mlp::from_params(&widths, params.clone()).unwrap();
        let input: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cot: Vec<f64> = (0..widths[3]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = net.gradients(&input, &cot).unwrap();
        let f = |p: &[f64]| -> f64 {
            let m = Mlp::from_params(&widths, p.to_vec()).unwrap();
            m.forward(&input).unwrap().iter().zip(&cot).map(|(o, c)| o * c).sum()
        };
        let mut p = params;
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + 1e-6;
            let up = f(&p);
            p[i] = orig - 1e-6;
            let down = f(&p);
            p[i] = orig;
            let fd = (up - down) / 2e-6;
            let scale = fd.abs().max(grads[i].abs());
            if scale > 1e-7 {
                assert!((fd - grads[i]).abs() / scale < 1e-4, "param {i}: {fd} vs {}", grads[i]);
            }
        }
    }
}

#[test]
fn adam_is_bit_reproducible() {
    let run = || {
        let mut rng = rng_from_seed(3);
        let mut params: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut state = AdamState::new(50);
        for step in 0..200 {
            let grads: Vec<f64> = params.iter().map(|p| (p * step as f64).sin()).collect();
            adam_step(&mut state, &mut params, &grads).unwrap();
        }
        params
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn forward_samples_approach_posterior_means() {
    let mut model = DirichletTabularModel::forward(4, 1).unwrap();
    for next in [0, 1, 1, 2, 2, 2, 2, 3] {
        model.update(&Transition::new(0, 0, 0.0, 0.9, next)).unwrap();
    }
    let mut rng = rng_from_seed(8);
    let draws = 40_000;
    let mut hist = [0usize; 4];
    for _ in 0..draws {
        hist[model.sample_forward(0, 0, &mut rng).unwrap().next_state] += 1;
    }
    let tv: f64 = (0..4)
        .map(|s| (hist[s] as f64 / draws as f64 - model.next_state_probability(0, 0, s).unwrap()).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn region_verdicts_agree_with_iteration() {
    let sweep = divergence_region_sweep(0.99, 0.01, 101, 101).unwrap();
    for cell in &sweep.cells {
        let (a, _) = key_matrix(&two_state_mrp(cell.d1, cell.p, 0.99).unwrap()).unwrap();
        let verdict = stability_verdict(&a, 0.01).unwrap().verdict;
        assert_eq!(verdict, cell.verdict);
        let outcome = expected_td_outcome(&a, &[0.0], &[1.0], 0.01, 100, 1e6).unwrap();
        assert_eq!(outcome.expanding(), verdict.is_divergent(), "d1 {} p {}", cell.d1, cell.p);
    }
}

#[test]
fn perfect_model_with_skewed_replay_diverges() {
    // true dynamics with p = 0, but replay only ever holds the first state
    let (dynamics, features) = mrp_matrices(&MrpSpec::new(0.0, 0.99).unwrap());
    let mrp = LinearMrp::new(features, dynamics, vec![1.0, 0.0], 0.99, vec![0.0, 0.0]).unwrap();
    let (a, _) = key_matrix(&mrp).unwrap();
    assert_eq!(stability_verdict(&a, 0.01).unwrap().verdict, Verdict::Divergent);
}

/// Shortest start-to-goal path by breadth-first search over the ASCII layout.
fn shortest_path(layout: &str) -> usize {
    let grid: Vec<Vec<char>> = layout.lines().filter(|l| !l.is_empty()).map(|l| l.chars().collect()).collect();
    let find = |c: char| {
        grid.iter()
            .enumerate()
            .find_map(|(r, row)| row.iter().position(|&x| x == c).map(|col| (r, col)))
            .unwrap()
    };
    let (start, goal) = (find('S'), find('G'));
    let mut dist = vec![vec![usize::MAX; grid[0].len()]; grid.len()];
    dist[start.0][start.1] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1i32, 0i32), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i32 + dr, c as i32 + dc);
            if nr < 0 || nc < 0 || nr as usize >= grid.len() || nc as usize >= grid[0].len() {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if grid[nr][nc] != '#' && dist[nr][nc] == usize::MAX {
                dist[nr][nc] = dist[r][c] + 1;
                queue.push_back((nr, nc));
            }
        }
    }
    dist[goal.0][goal.1]
}

#[test]
fn dyna_maze_shortest_path_is_fourteen() {
    let text = GridWorld::builtin_layout_text("dyna_maze").unwrap();
    assert_eq!(shortest_path(text), 14);
    let w = GridWorld::dyna_maze();
    assert_eq!(w.distances_to_goal()[w.start().unwrap()], Some(14));
}

#[test]
fn tabular_values_stay_bounded_and_runs_repeat() {
    let env = GridWorld::four_rooms(0.2).unwrap();
    let config = LoopConfig {
        planner: PlannerKind::ForwardDyna,
        planning_steps: 3,
        episode_budget: Some(20),
        ..LoopConfig::default()
    };
    let bound = env.goal_reward() / (1.0 - env.discount());
    let run = || {
        let mut model = DirichletTabularModel::forward(env.num_states(), env.num_actions()).unwrap();
        let mut q = TabularQ::new(env.num_states(), env.num_actions());
        let mut replay = ReplayBuffer::unbounded();
        let trace = run_dyna_loop(&env, Some(&mut model), &mut replay, &mut q, &config, &mut rng_from_seed(4)).unwrap();
        (trace, q)
    };
    let (t1, q) = run();
    let (t2, _) = run();
    assert_eq!(t1, t2);
    assert!(q.table().iter().all(|&v| (0.0..=bound).contains(&v)));
}

#[test]
fn deeper_search_never_lowers_the_value_with_the_true_model() {
    let w = GridWorld::four_rooms(0.0).unwrap();
    let q = TabularQ::new(w.num_states(), w.num_actions());
    for s in (0..w.num_states()).step_by(7) {
        let mut previous = f64::NEG_INFINITY;
        for depth in 0..6 {
            let v = bfs_plan(&q, &w, s, depth).unwrap().values.into_iter().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= previous, "state {s} depth {depth}");
            previous = v;
        }
    }
}
