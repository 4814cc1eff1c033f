//! Dense LU factorization with partial pivoting.
//!
//! The systems here are small (stationary distributions, absorption
//! probabilities, bias equations), so a plain row-major factorization is
//! enough. A pivot smaller than [`crate::tolerances::STRUCTURAL`] means the
//! system is genuinely singular for our purposes and is reported, never
//! papered over.

use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("singular system: pivot {pivot:e} in column {column} below tolerance")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: matrix is {n}x{n}, rhs has length {rhs}")]
    Shape { n: usize, rhs: usize },
}

/// LU factors of a square matrix, with the row permutation applied during
/// pivoting. `lu` stores L below the diagonal (unit diagonal implied) and
/// U on and above it.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

/// Factors a row-major `n x n` matrix.
pub fn lu_factor(matrix: &[f64], n: usize) -> Result<LuFactors, LinalgError> {
    assert_eq!(matrix.len(), n * n, "matrix must be square");
    let mut lu = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = lu[perm[col] * n + col].abs();
        for row in col + 1..n {
            let candidate = lu[perm[row] * n + col].abs();
            if candidate > pivot_val {
                pivot_val = candidate;
                pivot_row = row;
            }
        }
        if pivot_val < tolerances::STRUCTURAL {
            return Err(LinalgError::Singular {
                column: col,
                pivot: pivot_val,
            });
        }
        perm.swap(col, pivot_row);
        let pivot = lu[perm[col] * n + col];
        for row in col + 1..n {
            let factor = lu[perm[row] * n + col] / pivot;
            lu[perm[row] * n + col] = factor;
            if factor != 0.0 {
                for j in col + 1..n {
                    lu[perm[row] * n + j] -= factor * lu[perm[col] * n + j];
                }
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

impl LuFactors {
    /// Solves `A x = rhs` for the factored matrix.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.n {
            return Err(LinalgError::Shape {
                n: self.n,
                rhs: rhs.len(),
            });
        }
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = rhs[self.perm[i]];
            for j in 0..i {
                v -= self.lu[self.perm[i] * n + j] * y[j];
            }
            y[i] = v;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = y[i];
            for j in i + 1..n {
                v -= self.lu[self.perm[i] * n + j] * x[j];
            }
            x[i] = v / self.lu[self.perm[i] * n + i];
        }
        Ok(x)
    }
}

/// One-shot solve of `A x = rhs`.
pub fn solve(matrix: &[f64], n: usize, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    lu_factor(matrix, n)?.solve(rhs)
}
