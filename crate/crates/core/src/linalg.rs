//! Small dense linear algebra: Cholesky factorization of symmetric
//! positive definite matrices stored row-major.

use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

/// Index of the first pivot that collapsed during factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Collapsed(pub usize);

impl<T: Scalar> Cholesky<T> {
    /// Factorizes `a` (n×n, row-major). A pivot is treated as collapsed when
    /// it falls below `rel_tol` times the corresponding diagonal entry.
    pub(crate) fn new(a: &[T], n: usize, rel_tol: T) -> Result<Self, Collapsed> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            let scale = a[j * n + j].abs();
            if !(diag > rel_tol * scale) || diag <= T::zero() {
                return Err(Collapsed(j));
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    pub(crate) fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Coefficients expressing column `col` of a Gram matrix as a combination of
/// the preceding columns (least squares on the leading block). Used to report
/// which covariates collide when a design is rank deficient.
pub(crate) fn dependent_columns<T: Scalar>(a: &[T], n: usize, col: usize) -> Vec<usize> {
    if col == 0 {
        return Vec::new();
    }
    let lead: Vec<T> = (0..col)
        .flat_map(|i| (0..col).map(move |j| (i, j)))
        .map(|(i, j)| a[i * n + j])
        .collect();
    let rhs: Vec<T> = (0..col).map(|i| a[i * n + col]).collect();
    match Cholesky::new(&lead, col, T::lit(1e-12)) {
        Ok(ch) => {
            let coef = ch.solve(&rhs);
            let max = coef.iter().fold(T::zero(), |m, c| m.max(c.abs()));
            coef.iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > T::lit(1e-8) * max.max(T::one()))
                .map(|(i, _)| i)
                .collect()
        }
        Err(_) => (0..col).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::new(&a, 3, 1e-12).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_collinear_column() {
        // columns: 1, x, 2x
        let xs = [0.0, 1.0, 2.0, 3.0];
        let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [1.0, x, 2.0 * x]).collect();
        let mut a = [0.0; 9];
        for r in &rows {
            for i in 0..3 {
                for j in 0..3 {
                    a[i * 3 + j] += r[i] * r[j];
                }
            }
        }
        let err = Cholesky::new(&a, 3, 1e-10).unwrap_err();
        assert_eq!(err, Collapsed(2));
        assert_eq!(dependent_columns(&a, 3, 2), vec![1]);
    }
}
