//! Dense tableau simplex for the maximin linear program of a zero-sum game.
//!
//! With `A = M + shift > 0`, the column player's program is
//!
//! ```text
//! maximize Σ y_j   subject to   A y ≤ 1,  y ≥ 0
//! ```
//!
//! whose optimum is `1 / v(A)`. The row player's strategy comes from the
//! dual prices of the slack columns. Pivoting follows Bland's rule, so the
//! method terminates and the chosen optimum is a fixed function of the input.

use super::Matrix;

const PIVOT_EPS: f64 = 1e-12;

pub(super) struct MaximinSolution {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

pub(super) fn solve_maximin(matrix: &Matrix) -> MaximinSolution {
    let n_rows = matrix.rows();
    let n_cols = matrix.cols();
    let shift = 1.0 - matrix.min();

    // columns: y_0..y_{n_cols-1}, slack_0..slack_{n_rows-1}, rhs
    let width = n_cols + n_rows + 1;
    let rhs = width - 1;
    let mut tableau = vec![vec![0.0; width]; n_rows + 1];
    for i in 0..n_rows {
        for j in 0..n_cols {
            tableau[i][j] = matrix[(i, j)] + shift;
        }
        tableau[i][n_cols + i] = 1.0;
        tableau[i][rhs] = 1.0;
    }
    let objective = n_rows;
    tableau[objective][..n_cols].fill(-1.0);
    let mut basis: Vec<usize> = (n_cols..n_cols + n_rows).collect();

    // Bland: lowest-index improving column
    while let Some(entering) = (0..rhs).find(|&c| tableau[objective][c] < -PIVOT_EPS) {
        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..n_rows {
            let a = tableau[r][entering];
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = tableau[r][rhs] / a;
            leaving = match leaving {
                None => Some((r, ratio)),
                Some((best, best_ratio)) => {
                    if ratio < best_ratio - PIVOT_EPS
                        || (ratio <= best_ratio + PIVOT_EPS && basis[r] < basis[best])
                    {
                        Some((r, ratio))
                    } else {
                        Some((best, best_ratio))
                    }
                }
            };
        }
        // A > 0 keeps the program bounded
        let (pivot_row, _) = leaving.expect("maximin program is bounded");
        pivot(&mut tableau, pivot_row, entering);
        basis[pivot_row] = entering;
    }

    let mut y = vec![0.0; n_cols];
    for (r, &var) in basis.iter().enumerate() {
        if var < n_cols {
            y[var] = tableau[r][rhs];
        }
    }
    let x: Vec<f64> = (0..n_rows).map(|i| tableau[objective][n_cols + i]).collect();

    MaximinSolution {
        row: normalize(x),
        col: normalize(y),
    }
}

fn pivot(tableau: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tableau[row][col];
    for v in tableau[row].iter_mut() {
        *v /= p;
    }
    tableau[row][col] = 1.0;
    let pivot_row = tableau[row].clone();
    for (r, line) in tableau.iter_mut().enumerate() {
        if r == row {
            continue;
        }
        let factor = line[col];
        if factor == 0.0 {
            continue;
        }
        for (v, pv) in line.iter_mut().zip(&pivot_row) {
            *v -= factor * pv;
        }
        line[col] = 0.0;
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_game() {
        // row player picks between a safe row and a gamble against 3 columns
        let m = Matrix::from_rows(&[[1.0, 1.0, 1.0], [3.0, -2.0, 4.0]]).unwrap();
        let s = solve_maximin(&m);
        let value = m.bilinear(&s.row, &s.col);
        assert!((value - 1.0).abs() < 1e-12);
        assert!((s.row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_constant_matrix_terminates() {
        let m = Matrix::filled(4, 3, 2.5);
        let s = solve_maximin(&m);
        assert!((m.bilinear(&s.row, &s.col) - 2.5).abs() < 1e-12);
    }
}
