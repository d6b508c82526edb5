#![allow(dead_code)]

use proptest::prelude::*;
use sgplan::game_model::{random_game, RandomGameSpec};
use sgplan::{Matrix, MatrixGame, StochasticGame};

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| Matrix::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

pub fn bimatrix(max_n: usize) -> impl Strategy<Value = MatrixGame> {
    (1..=max_n, 1..=max_n).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)).prop_map(|(a, b)| MatrixGame::new(a, b).unwrap()))
}

pub fn square_bimatrix(max_n: usize) -> impl Strategy<Value = MatrixGame> {
    (1..=max_n).prop_flat_map(|n| (matrix(n, n), matrix(n, n)).prop_map(|(a, b)| MatrixGame::new(a, b).unwrap()))
}

pub fn zero_sum_matrix(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n, 1..=max_n).prop_flat_map(|(r, c)| matrix(r, c))
}

pub fn game(n_states: usize, n: usize, branching: usize, seed: u64, zero_sum: bool) -> StochasticGame {
    random_game(RandomGameSpec {
        n_states,
        n_rows: n,
        n_cols: n,
        branching: branching.min(n_states),
        payoff_scale: 1.0,
        seed,
        zero_sum,
    })
    .unwrap()
}

/// All equilibria of a nondegenerate 2×2 game from closed-form
/// indifference conditions, in support-enumeration order.
pub fn two_by_two_equilibria(game: &MatrixGame) -> Vec<([f64; 2], [f64; 2], f64, f64)> {
    let a = game.payoff1();
    let b = game.payoff2();
    let mut out = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let row_ok = a[(i, j)] >= a[(1 - i, j)];
            let col_ok = b[(i, j)] >= b[(i, 1 - j)];
            if row_ok && col_ok {
                let mut x = [0.0; 2];
                let mut y = [0.0; 2];
                x[i] = 1.0;
                y[j] = 1.0;
                out.push((x, y, a[(i, j)], b[(i, j)]));
            }
        }
    }
    // p makes the column player indifferent, q the row player
    let p = (b[(1, 1)] - b[(1, 0)]) / (b[(0, 0)] - b[(1, 0)] - b[(0, 1)] + b[(1, 1)]);
    let q = (a[(1, 1)] - a[(0, 1)]) / (a[(0, 0)] - a[(0, 1)] - a[(1, 0)] + a[(1, 1)]);
    if p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 {
        let x = [p, 1.0 - p];
        let y = [q, 1.0 - q];
        let v1: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * y[j] * a[(i, j)]).sum();
        let v2: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * y[j] * b[(i, j)]).sum();
        out.push((x, y, v1, v2));
    }
    out
}

/// Value of a zero-sum game with two row actions: the maximum over
/// `p ∈ [0, 1]` of the lower envelope of the column lines, found by
/// checking every endpoint and pairwise crossing.
pub fn two_row_value(m: &Matrix) -> f64 {
    let lines: Vec<(f64, f64)> = (0..m.cols()).map(|j| (m[(0, j)], m[(1, j)])).collect();
    let envelope = |p: f64| lines.iter().map(|&(a, b)| p * a + (1.0 - p) * b).fold(f64::INFINITY, f64::min);
    let mut candidates = vec![0.0, 1.0];
    for (k, &(a1, b1)) in lines.iter().enumerate() {
        for &(a2, b2) in &lines[k + 1..] {
            let denom = (a1 - b1) - (a2 - b2);
            if denom != 0.0 {
                let p = (b2 - b1) / denom;
                if (0.0..=1.0).contains(&p) {
                    candidates.push(p);
                }
            }
        }
    }
    candidates.into_iter().map(envelope).fold(f64::NEG_INFINITY, f64::max)
}

/// Random payoffs with deterministic transitions `s → (s + i + 2j + 1) mod n`.
pub fn deterministic_game(n_states: usize, n: usize, seed: u64) -> StochasticGame {
    let base = game(n_states, n, 1, seed, false);
    let transitions = (0..n_states)
        .map(|s| (0..n).map(|i| (0..n).map(|j| vec![((s + i + 2 * j + 1) % n_states, 1.0)]).collect()).collect())
        .collect();
    StochasticGame::new(base.stages().to_vec(), transitions, 0, None).unwrap()
}
