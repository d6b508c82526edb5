mod common;

use common::game;
use proptest::prelude::*;
use sgplan::finite_planner::{best_response_dp, finite_vi, nash_certificate, policy_totals, policy_value};
use sgplan::matrix_games::{nash_select, solve_zero_sum, SupportEnumeration};
use sgplan::{Matrix, MixedStrategy, Player, StochasticGame, TimeDependentPolicy};

/// Expected totals by plain recursion over the game tree.
fn recursive_value(
    g: &StochasticGame,
    p1: &TimeDependentPolicy,
    p2: &TimeDependentPolicy,
    s: usize,
    t: usize,
) -> (f64, f64) {
    let alpha = p1.get(s, t).unwrap().probs();
    let beta = p2.get(s, t).unwrap().probs();
    let mut total = (0.0, 0.0);
    for i in 0..g.n_rows() {
        for j in 0..g.n_cols() {
            let w = alpha[i] * beta[j];
            let mut r = (g.stage(s).payoff1()[(i, j)], g.stage(s).payoff2()[(i, j)]);
            if t > 0 {
                for &(next, p) in g.transition(s, i, j) {
                    let (a, b) = recursive_value(g, p1, p2, next, t - 1);
                    r.0 += p * a;
                    r.1 += p * b;
                }
            }
            total.0 += w * r.0;
            total.1 += w * r.1;
        }
    }
    total
}

fn random_policy(n_states: usize, horizon: usize, n: usize, weights: &[f64]) -> TimeDependentPolicy {
    let mut policy = TimeDependentPolicy::new(horizon, n);
    let mut k = 0;
    for t in 0..horizon {
        for s in 0..n_states {
            let w: Vec<f64> = (0..n).map(|a| weights[(k + a) % weights.len()] + 0.01).collect();
            k += n;
            let total: f64 = w.iter().sum();
            let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
            let head: f64 = probs[..n - 1].iter().sum();
            probs[n - 1] = 1.0 - head;
            policy.insert(s, t, MixedStrategy::new(probs).unwrap()).unwrap();
        }
    }
    policy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selected_policies_certify_from_every_state(
        n_states in 1usize..=5,
        n in 2usize..=3,
        horizon in 1usize..=5,
        branching in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let g = game(n_states, n, branching, seed, false);
        let sol = finite_vi(&g, horizon, &SupportEnumeration::default()).unwrap();
        for s in 0..n_states {
            let (g1, g2) = nash_certificate(&g, &sol.policy1, &sol.policy2, horizon, s).unwrap();
            prop_assert!(g1 <= 1e-8 && g2 <= 1e-8, "state {} gaps {} {}", s, g1, g2);
        }
    }

    #[test]
    fn totals_match_tree_recursion(
        n_states in 1usize..=4,
        horizon in 1usize..=4,
        seed in any::<u64>(),
        weights in prop::collection::vec(0.0f64..1.0, 7),
    ) {
        let g = game(n_states, 2, 2, seed, false);
        let p1 = random_policy(n_states, horizon, 2, &weights);
        let p2 = random_policy(n_states, horizon, 2, &weights[3..]);
        let totals = policy_totals(&g, &p1, &p2, horizon).unwrap();
        for t in 0..horizon {
            for s in 0..n_states {
                let (a, b) = recursive_value(&g, &p1, &p2, s, t);
                prop_assert!((totals[t][s].0 - a).abs() <= 1e-10);
                prop_assert!((totals[t][s].1 - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn best_response_dominates_and_is_consistent(
        n_states in 1usize..=4,
        horizon in 1usize..=4,
        seed in any::<u64>(),
        weights in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        let g = game(n_states, 3, 2, seed, false);
        let p1 = random_policy(n_states, horizon, 3, &weights);
        let p2 = random_policy(n_states, horizon, 3, &weights[2..]);
        let (v1, _) = policy_value(&g, &p1, &p2, horizon, 0).unwrap();
        let (br, b1) = best_response_dp(&g, &p2, horizon, Player::Row, 0).unwrap();
        prop_assert!(b1 >= v1 - 1e-12);
        let (played, _) = policy_value(&g, &br, &p2, horizon, 0).unwrap();
        prop_assert!((played - b1).abs() <= 1e-12);
    }
}

#[test]
fn zero_sum_values_match_scalar_minimax_dp() {
    for seed in 0..10 {
        let n_states = 1 + (seed as usize % 5);
        let g = game(n_states, 3, 2, seed, true);
        let horizon = 5;
        let sol = finite_vi(&g, horizon, &SupportEnumeration::default()).unwrap();
        let mut v = vec![0.0; n_states];
        for t in 0..horizon {
            let next: Vec<f64> = (0..n_states)
                .map(|s| {
                    let q = Matrix::from_fn(3, 3, |i, j| {
                        let cont: f64 = if t == 0 {
                            0.0
                        } else {
                            g.transition(s, i, j).iter().map(|&(n, p)| p * v[n]).sum()
                        };
                        g.stage(s).payoff1()[(i, j)] + cont
                    });
                    solve_zero_sum(&q).unwrap().value1
                })
                .collect();
            for s in 0..n_states {
                let p = sol.table.profile(s, t);
                assert!((p.value1 - next[s]).abs() <= 1e-9, "seed {seed} s {s} t {t}");
                assert!((p.value2 + next[s]).abs() <= 1e-9);
            }
            v = next;
        }
    }
}

#[test]
fn horizon_one_is_the_stage_equilibrium() {
    let g = game(4, 3, 2, 11, false);
    let sol = finite_vi(&g, 1, &SupportEnumeration::default()).unwrap();
    for s in 0..4 {
        let stage = nash_select(g.stage(s)).unwrap();
        assert_eq!(sol.policy1.get(s, 0).unwrap(), &stage.row);
        assert_eq!(sol.policy2.get(s, 0).unwrap(), &stage.col);
    }
}
