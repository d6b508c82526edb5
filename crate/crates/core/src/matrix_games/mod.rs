//! One-shot bimatrix games and the solvers the planners call.
//!
//! Everything here is a pure function of its inputs. The two selection
//! functions ([`nash_select`] and [`security_select`]) are deterministic, so
//! planners built on top of them produce reproducible output.

mod simplex;
mod support;

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub use support::{enumerate_nash, enumerate_nash_with, nash_select, nash_select_with, SupportEnumeration};

/// Probabilities at or below this are treated as outside the support.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;
/// Maximum ε-Nash gap accepted for an enumerated equilibrium.
pub const VERIFY_TOLERANCE: f64 = 1e-8;
/// Default largest action count for support enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 8;

const STRATEGY_SUM_TOLERANCE: f64 = 1e-12;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from its rows. Rejects empty and ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let n_cols = rows[0].as_ref().len();
        if n_cols == 0 {
            return Err(Error::InvalidMatrix("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `rowᵀ · self · col`.
    pub fn bilinear(&self, row: &[f64], col: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let inner: f64 = self.row(i).iter().zip(col).map(|(m, q)| m * q).sum();
            total += p * inner;
        }
        total
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| self.row(i)))
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Row,
    Col,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::Row => Player::Col,
            Player::Col => Player::Row,
        }
    }

    /// Zero-based index: 0 for the row player, 1 for the column player.
    pub fn index(self) -> usize {
        match self {
            Player::Row => 0,
            Player::Col => 1,
        }
    }

    pub const BOTH: [Player; 2] = [Player::Row, Player::Col];
}

/// A pair of payoff matrices of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    payoff1: Matrix,
    payoff2: Matrix,
    zero_sum: bool,
    r_max: Option<f64>,
}

impl MatrixGame {
    pub fn new(payoff1: Matrix, payoff2: Matrix) -> Result<Self> {
        if payoff1.rows() != payoff2.rows() {
            return Err(Error::DimensionMismatch {
                what: "payoff2 rows",
                expected: payoff1.rows(),
                found: payoff2.rows(),
            });
        }
        if payoff1.cols() != payoff2.cols() {
            return Err(Error::DimensionMismatch {
                what: "payoff2 columns",
                expected: payoff1.cols(),
                found: payoff2.cols(),
            });
        }
        if !payoff1.is_finite() || !payoff2.is_finite() {
            return Err(Error::InvalidMatrix("payoffs must be finite".into()));
        }
        let zero_sum = payoff1.iter().zip(payoff2.iter()).all(|(a, b)| *b == -*a);
        Ok(Self {
            payoff1,
            payoff2,
            zero_sum,
            r_max: None,
        })
    }

    /// The zero-sum game `(m, -m)`.
    pub fn zero_sum(payoff1: Matrix) -> Result<Self> {
        let payoff2 = payoff1.map(|x| -x);
        Self::new(payoff1, payoff2)
    }

    pub fn from_rows<R: AsRef<[f64]>>(payoff1: &[R], payoff2: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(payoff1)?, Matrix::from_rows(payoff2)?)
    }

    /// Attaches a declared payoff bound; fails if any entry exceeds it.
    pub fn with_r_max(mut self, r_max: f64) -> Result<Self> {
        if !r_max.is_finite() || r_max < 0.0 {
            return Err(Error::InvalidParameter(format!("r_max must be finite and >= 0, got {r_max}")));
        }
        let observed = self.max_abs();
        if observed > r_max {
            return Err(Error::InvalidMatrix(format!(
                "payoff magnitude {observed} exceeds declared r_max {r_max}"
            )));
        }
        self.r_max = Some(r_max);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.payoff1.rows()
    }

    pub fn cols(&self) -> usize {
        self.payoff1.cols()
    }

    pub fn payoff(&self, player: Player) -> &Matrix {
        match player {
            Player::Row => &self.payoff1,
            Player::Col => &self.payoff2,
        }
    }

    pub fn payoff1(&self) -> &Matrix {
        &self.payoff1
    }

    pub fn payoff2(&self) -> &Matrix {
        &self.payoff2
    }

    /// Set exactly when `payoff2 == -payoff1` entrywise.
    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    pub fn r_max(&self) -> Option<f64> {
        self.r_max
    }

    pub fn max_abs(&self) -> f64 {
        self.payoff1.max_abs().max(self.payoff2.max_abs())
    }

    /// Number of pure strategies of `player`.
    pub fn actions(&self, player: Player) -> usize {
        match player {
            Player::Row => self.rows(),
            Player::Col => self.cols(),
        }
    }

    /// Adds `shift1` to every entry of the row payoff and `shift2` to the
    /// column payoff.
    pub fn shifted(&self, shift1: f64, shift2: f64) -> Result<Self> {
        Self::new(self.payoff1.map(|x| x + shift1), self.payoff2.map(|x| x + shift2))
    }

    fn check_profile(&self, row: &MixedStrategy, col: &MixedStrategy) -> Result<()> {
        if row.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                what: "row strategy",
                expected: self.rows(),
                found: row.len(),
            });
        }
        if col.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                what: "column strategy",
                expected: self.cols(),
                found: col.len(),
            });
        }
        Ok(())
    }
}

/// A probability distribution over a player's pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStrategy("empty strategy".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidStrategy(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STRATEGY_SUM_TOLERANCE {
            return Err(Error::InvalidStrategy(format!("probabilities sum to {total}")));
        }
        Ok(Self(probs))
    }

    /// Clamps tiny negative round-off to zero and rescales to sum to one.
    pub(crate) fn from_raw(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        Self(probs)
    }

    pub fn pure(n: usize, index: usize) -> Self {
        assert!(index < n, "pure strategy index out of range");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over zero actions");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.0
    }

    /// Indices whose probability exceeds [`SUPPORT_TOLERANCE`].
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > SUPPORT_TOLERANCE)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// A strategy pair with the payoff each player is credited with.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub row: MixedStrategy,
    pub col: MixedStrategy,
    pub value1: f64,
    pub value2: f64,
}

impl StrategyProfile {
    /// Profile carrying the expected payoffs of `(row, col)` in `game`.
    pub fn evaluated(game: &MatrixGame, row: MixedStrategy, col: MixedStrategy) -> Result<Self> {
        game.check_profile(&row, &col)?;
        let value1 = game.payoff1.bilinear(row.probs(), col.probs());
        let value2 = game.payoff2.bilinear(row.probs(), col.probs());
        Ok(Self {
            row,
            col,
            value1,
            value2,
        })
    }

    pub fn value(&self, player: Player) -> f64 {
        match player {
            Player::Row => self.value1,
            Player::Col => self.value2,
        }
    }

    pub fn strategy(&self, player: Player) -> &MixedStrategy {
        match player {
            Player::Row => &self.row,
            Player::Col => &self.col,
        }
    }
}

pub fn expected_payoff(
    game: &MatrixGame,
    player: Player,
    row: &MixedStrategy,
    col: &MixedStrategy,
) -> Result<f64> {
    game.check_profile(row, col)?;
    Ok(game.payoff(player).bilinear(row.probs(), col.probs()))
}

/// Pure best response of `player` against a fixed opponent strategy, with
/// the payoff it earns. Ties go to the lowest index.
pub fn best_response(game: &MatrixGame, player: Player, opponent: &MixedStrategy) -> Result<(usize, f64)> {
    let expected = game.actions(player.other());
    if opponent.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "opponent strategy",
            expected,
            found: opponent.len(),
        });
    }
    let payoffs = pure_payoffs(game, player, opponent.probs());
    let mut best = (0, payoffs[0]);
    for (a, &v) in payoffs.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (a, v);
        }
    }
    Ok(best)
}

/// Payoff of each pure strategy of `player` against the opponent mix.
pub(crate) fn pure_payoffs(game: &MatrixGame, player: Player, opponent: &[f64]) -> Vec<f64> {
    let m = game.payoff(player);
    match player {
        Player::Row => (0..m.rows())
            .map(|i| m.row(i).iter().zip(opponent).map(|(a, q)| a * q).sum())
            .collect(),
        Player::Col => (0..m.cols())
            .map(|j| (0..m.rows()).map(|i| opponent[i] * m[(i, j)]).sum())
            .collect(),
    }
}

/// Per-player incentive to deviate from `profile`: best-response payoff
/// minus the profile's expected payoff.
pub fn epsilon_nash_gap(game: &MatrixGame, profile: &StrategyProfile) -> Result<(f64, f64)> {
    game.check_profile(&profile.row, &profile.col)?;
    let current1 = game.payoff1.bilinear(profile.row.probs(), profile.col.probs());
    let current2 = game.payoff2.bilinear(profile.row.probs(), profile.col.probs());
    let (_, best1) = best_response(game, Player::Row, &profile.col)?;
    let (_, best2) = best_response(game, Player::Col, &profile.row)?;
    Ok(((best1 - current1).max(0.0), (best2 - current2).max(0.0)))
}

/// Maximin row strategy, minimax column strategy and value of the zero-sum
/// game in which the row player receives `matrix`.
pub fn solve_zero_sum(matrix: &Matrix) -> Result<StrategyProfile> {
    if !matrix.is_finite() {
        return Err(Error::InvalidMatrix("payoffs must be finite".into()));
    }
    let solution = simplex::solve_maximin(matrix);
    let row = MixedStrategy::from_raw(solution.row);
    let col = MixedStrategy::from_raw(solution.col);
    let value = matrix.bilinear(row.probs(), col.probs());
    Ok(StrategyProfile {
        row,
        col,
        value1: value,
        value2: -value,
    })
}

/// Security strategy and level of `player`, who maximins their own payoff.
pub fn security_level(game: &MatrixGame, player: Player) -> Result<(MixedStrategy, f64)> {
    let own = match player {
        Player::Row => game.payoff1.clone(),
        Player::Col => game.payoff2.transpose(),
    };
    let solution = solve_zero_sum(&own)?;
    let strategy = solution.row;
    // guaranteed level: worst pure reply of the opponent
    let level = (0..own.cols())
        .map(|j| (0..own.rows()).map(|i| strategy.probs()[i] * own[(i, j)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok((strategy, level))
}

/// Both players' security strategies; `value1`/`value2` carry the security
/// levels rather than the payoffs of the joint profile.
pub fn security_select(game: &MatrixGame) -> Result<StrategyProfile> {
    let (row, value1) = security_level(game, Player::Row)?;
    let (col, value2) = security_level(game, Player::Col)?;
    Ok(StrategyProfile {
        row,
        col,
        value1,
        value2,
    })
}

/// A deterministic rule picking one strategy profile per matrix game.
pub trait Selection: Sync {
    fn select(&self, game: &MatrixGame) -> Result<StrategyProfile>;
}

impl<F> Selection for F
where
    F: Fn(&MatrixGame) -> Result<StrategyProfile> + Sync,
{
    fn select(&self, game: &MatrixGame) -> Result<StrategyProfile> {
        self(game)
    }
}

/// Security selection backed by the maximin solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecuritySelection;

impl Selection for SecuritySelection {
    fn select(&self, game: &MatrixGame) -> Result<StrategyProfile> {
        security_select(game)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> MatrixGame {
        MatrixGame::from_rows(&[[3.0, 0.0], [5.0, 1.0]], &[[3.0, 5.0], [0.0, 1.0]]).unwrap()
    }

    fn bos() -> MatrixGame {
        MatrixGame::from_rows(&[[2.0, 0.0], [0.0, 1.0]], &[[1.0, 0.0], [0.0, 2.0]]).unwrap()
    }

    fn pennies() -> MatrixGame {
        MatrixGame::zero_sum(Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap()).unwrap()
    }

    fn mixed(p: &[f64]) -> MixedStrategy {
        MixedStrategy::new(p.to_vec()).unwrap()
    }

    #[test]
    fn expected_payoff_examples() {
        let g = pd();
        let v = expected_payoff(&g, Player::Row, &MixedStrategy::pure(2, 1), &MixedStrategy::pure(2, 1)).unwrap();
        assert_eq!(v, 1.0);
        let half = MixedStrategy::uniform(2);
        assert_eq!(expected_payoff(&g, Player::Row, &half, &half).unwrap(), 2.25);
        assert_eq!(expected_payoff(&pennies(), Player::Row, &half, &half).unwrap(), 0.0);
    }

    #[test]
    fn expected_payoff_rejects_bad_dimensions() {
        let err = expected_payoff(&pd(), Player::Row, &MixedStrategy::uniform(3), &MixedStrategy::uniform(2));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(best_response(&pd(), Player::Row, &MixedStrategy::pure(2, 0)).unwrap(), (1, 5.0));
        assert_eq!(best_response(&pennies(), Player::Row, &MixedStrategy::uniform(2)).unwrap(), (0, 0.0));
        let (j, v) = best_response(&bos(), Player::Col, &mixed(&[2.0 / 3.0, 1.0 / 3.0])).unwrap();
        // both columns earn 2/3 at the mixing point
        let direct: Vec<f64> = (0..2).map(|j| 2.0 / 3.0 * bos().payoff2()[(0, j)] + 1.0 / 3.0 * bos().payoff2()[(1, j)]).collect();
        assert!((direct[0] - direct[1]).abs() < 1e-15);
        assert!(j == 0 || j == 1);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gap_examples() {
        let g = pd();
        let defect = StrategyProfile::evaluated(&g, MixedStrategy::pure(2, 1), MixedStrategy::pure(2, 1)).unwrap();
        assert_eq!(epsilon_nash_gap(&g, &defect).unwrap(), (0.0, 0.0));
        let coop = StrategyProfile::evaluated(&g, MixedStrategy::pure(2, 0), MixedStrategy::pure(2, 0)).unwrap();
        assert_eq!(epsilon_nash_gap(&g, &coop).unwrap(), (2.0, 2.0));
        let b = bos();
        let m = StrategyProfile::evaluated(&b, mixed(&[2.0 / 3.0, 1.0 / 3.0]), mixed(&[1.0 / 3.0, 2.0 / 3.0])).unwrap();
        let (g1, g2) = epsilon_nash_gap(&b, &m).unwrap();
        assert!(g1 < 1e-15 && g2 < 1e-15);
    }

    #[test]
    fn zero_sum_examples() {
        let p = solve_zero_sum(&Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap()).unwrap();
        assert!(p.value1.abs() < 1e-12);
        assert!(p.row.max_abs_diff(&MixedStrategy::uniform(2)) < 1e-12);
        assert!(p.col.max_abs_diff(&MixedStrategy::uniform(2)) < 1e-12);

        let p = solve_zero_sum(&Matrix::from_rows(&[[2.0, -1.0], [-1.0, 1.0]]).unwrap()).unwrap();
        assert!((p.value1 - 0.2).abs() < 1e-12);
        assert!((p.value2 + 0.2).abs() < 1e-12);
        assert!(p.row.max_abs_diff(&mixed(&[0.4, 0.6])) < 1e-12);

        let p = solve_zero_sum(&Matrix::from_rows(&[[-3.5]]).unwrap()).unwrap();
        assert_eq!(p.value1, -3.5);
        assert_eq!(p.row.probs(), &[1.0]);
        assert_eq!(p.col.probs(), &[1.0]);
    }

    #[test]
    fn security_examples() {
        let (s, v) = security_level(&pennies(), Player::Row).unwrap();
        assert!(s.max_abs_diff(&MixedStrategy::uniform(2)) < 1e-12 && v.abs() < 1e-12);
        let (s, v) = security_level(&pd(), Player::Row).unwrap();
        assert!(s.max_abs_diff(&MixedStrategy::pure(2, 1)) < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
        let (s, v) = security_level(&bos(), Player::Row).unwrap();
        assert!(s.max_abs_diff(&mixed(&[1.0 / 3.0, 2.0 / 3.0])) < 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn security_select_examples() {
        let p = security_select(&pd()).unwrap();
        assert!(p.row.max_abs_diff(&MixedStrategy::pure(2, 1)) < 1e-12);
        assert!(p.col.max_abs_diff(&MixedStrategy::pure(2, 1)) < 1e-12);
        assert!((p.value1 - 1.0).abs() < 1e-12 && (p.value2 - 1.0).abs() < 1e-12);

        let g = pennies();
        let p = security_select(&g).unwrap();
        assert!(p.value1.abs() < 1e-12 && p.value2.abs() < 1e-12);
        let (g1, g2) = epsilon_nash_gap(&g, &p).unwrap();
        assert!(g1 < 1e-12 && g2 < 1e-12);
    }

    #[test]
    fn zero_sum_flag_is_exact() {
        assert!(pennies().is_zero_sum());
        assert!(!pd().is_zero_sum());
        let almost = MatrixGame::from_rows(&[[1.0]], &[[-1.0 + 1e-16]]).unwrap();
        assert!(!almost.is_zero_sum());
    }

    #[test]
    fn r_max_is_enforced() {
        assert!(pd().with_r_max(5.0).is_ok());
        assert!(pd().with_r_max(4.0).is_err());
    }

    #[test]
    fn strategy_validation() {
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![-0.1, 1.1]).is_err());
        assert!(MixedStrategy::new(vec![]).is_err());
        assert_eq!(mixed(&[0.0, 1.0, 0.0]).support(), vec![1]);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(Matrix::from_rows(&rows).is_err());
    }
}
