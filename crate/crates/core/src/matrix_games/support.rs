//! Nash equilibria by support enumeration.
//!
//! Support pairs are visited in the canonical order: ascending
//! `(|I| + |J|, |I|, I lexicographic, J lexicographic)`. For each pair the
//! two indifference systems are solved and the candidate is kept only if its
//! support is exactly `(I, J)` and it passes the ε-Nash check.
//!
//! A pair with `|I| != |J|` leaves one player's system with more unknowns
//! than equations, so it has no isolated solution; such pairs are visited
//! in order but never produce a candidate.

use super::{
    epsilon_nash_gap, MatrixGame, MixedStrategy, StrategyProfile, DEFAULT_ENUMERATION_CAP,
    SUPPORT_TOLERANCE, VERIFY_TOLERANCE,
};
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;

/// Support-enumeration Nash selection with a configurable size cap.
#[derive(Debug, Clone, Copy)]
pub struct SupportEnumeration {
    pub cap: usize,
}

impl Default for SupportEnumeration {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl super::Selection for SupportEnumeration {
    fn select(&self, game: &MatrixGame) -> Result<StrategyProfile> {
        nash_select_with(game, self.cap)
    }
}

pub fn enumerate_nash(game: &MatrixGame) -> Result<Vec<StrategyProfile>> {
    enumerate_nash_with(game, DEFAULT_ENUMERATION_CAP)
}

/// All equilibria found by support enumeration, in canonical order.
pub fn enumerate_nash_with(game: &MatrixGame, cap: usize) -> Result<Vec<StrategyProfile>> {
    let mut found = Vec::new();
    visit(game, cap, |profile| {
        found.push(profile);
        false
    })?;
    if found.is_empty() {
        return Err(Error::DegenerateGame {
            tolerance: VERIFY_TOLERANCE,
        });
    }
    Ok(found)
}

pub fn nash_select(game: &MatrixGame) -> Result<StrategyProfile> {
    nash_select_with(game, DEFAULT_ENUMERATION_CAP)
}

/// The first equilibrium in canonical support order.
pub fn nash_select_with(game: &MatrixGame, cap: usize) -> Result<StrategyProfile> {
    let mut first = None;
    visit(game, cap, |profile| {
        first = Some(profile);
        true
    })?;
    first.ok_or(Error::DegenerateGame {
        tolerance: VERIFY_TOLERANCE,
    })
}

/// Calls `accept` on each verified equilibrium until it returns `true`.
fn visit(game: &MatrixGame, cap: usize, mut accept: impl FnMut(StrategyProfile) -> bool) -> Result<()> {
    let (n_rows, n_cols) = (game.rows(), game.cols());
    if n_rows > cap || n_cols > cap {
        return Err(Error::UnsupportedSize {
            rows: n_rows,
            cols: n_cols,
            cap,
        });
    }
    let row_subsets: Vec<Vec<Vec<usize>>> = (0..=n_rows).map(|k| combinations(n_rows, k)).collect();
    let col_subsets: Vec<Vec<Vec<usize>>> = (0..=n_cols).map(|k| combinations(n_cols, k)).collect();

    for total in 2..=n_rows + n_cols {
        for row_size in 1..=n_rows.min(total - 1) {
            let col_size = total - row_size;
            if col_size > n_cols || col_size != row_size {
                continue;
            }
            for rows in &row_subsets[row_size] {
                for cols in &col_subsets[col_size] {
                    if let Some(profile) = candidate(game, rows, cols) {
                        if accept(profile) {
                            return Ok(());
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn candidate(game: &MatrixGame, rows: &[usize], cols: &[usize]) -> Option<StrategyProfile> {
    // column mix makes the row player indifferent across `rows`
    let col_probs = indifference(rows.len(), cols.len(), |a, b| game.payoff1()[(rows[a], cols[b])])?;
    // row mix makes the column player indifferent across `cols`
    let row_probs = indifference(cols.len(), rows.len(), |a, b| game.payoff2()[(rows[b], cols[a])])?;

    let row = expand(game.rows(), rows, &row_probs)?;
    let col = expand(game.cols(), cols, &col_probs)?;
    let profile = StrategyProfile::evaluated(game, row, col).ok()?;
    let (g1, g2) = epsilon_nash_gap(game, &profile).ok()?;
    (g1.max(g2) <= VERIFY_TOLERANCE).then_some(profile)
}

/// Solves `Σ_b payoff(a, b) p_b = u` for every `a`, `Σ_b p_b = 1`.
/// Returns `p`, or `None` when the system is not uniquely and stably solvable.
fn indifference(equations: usize, unknowns: usize, payoff: impl Fn(usize, usize) -> f64) -> Option<Vec<f64>> {
    if equations != unknowns {
        return None;
    }
    let n = unknowns + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for (r, line) in a.iter_mut().enumerate().take(equations) {
        for (b, x) in line.iter_mut().enumerate().take(unknowns) {
            *x = payoff(r, b);
        }
        line[unknowns] = -1.0;
    }
    for x in a[equations].iter_mut().take(unknowns) {
        *x = 1.0;
    }
    rhs[equations] = 1.0;

    let inverse = invert(&a)?;
    if norm1(&a) * norm1(&inverse) > MAX_CONDITION {
        return None;
    }
    let solution: Vec<f64> = inverse
        .iter()
        .map(|line| line.iter().zip(&rhs).map(|(x, y)| x * y).sum())
        .collect();
    Some(solution[..unknowns].to_vec())
}

/// Places `probs` on `support` inside a length-`n` strategy. Rejects
/// candidates whose support is not exactly `support`.
fn expand(n: usize, support: &[usize], probs: &[f64]) -> Option<MixedStrategy> {
    if probs.iter().any(|p| !p.is_finite() || *p <= SUPPORT_TOLERANCE) {
        return None;
    }
    let mut full = vec![0.0; n];
    for (&i, &p) in support.iter().zip(probs) {
        full[i] = p;
    }
    Some(MixedStrategy::from_raw(full))
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut line = row.clone();
            line.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            line
        })
        .collect();
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| work[r][col].abs().total_cmp(&work[s][col].abs()))?;
        if work[pivot][col].abs() <= scale * 1e-14 {
            return None;
        }
        work.swap(col, pivot);
        let p = work[col][col];
        for x in work[col].iter_mut() {
            *x /= p;
        }
        let pivot_line = work[col].clone();
        for (r, line) in work.iter_mut().enumerate() {
            if r == col {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (x, y) in line.iter_mut().zip(&pivot_line) {
                    *x -= factor * y;
                }
            }
        }
    }
    Some(work.into_iter().map(|line| line[n..].to_vec()).collect())
}

fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| a.iter().map(|line| line[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < k - current.len() {
                break;
            }
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}
