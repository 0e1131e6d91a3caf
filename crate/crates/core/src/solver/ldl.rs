//! Dense LDL^T for quasi-definite systems with known pivot signs.

use nalgebra::{DMatrix, DVector};

/// Factorization `P = L D L^T` of a symmetric matrix whose first `n_pos`
/// pivots should be positive and the rest negative. Pivots that are too
/// small or have the wrong sign are replaced by `sign * delta`.
pub(crate) struct Ldl {
    l: DMatrix<f64>,
    d: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) bumped: usize,
}

impl Ldl {
    pub(crate) fn factor(mut m: DMatrix<f64>, n_pos: usize, eps: f64, delta: f64) -> Self {
        let n = m.nrows();
        let mut d = vec![0.0; n];
        let mut bumped = 0;
        for j in 0..n {
            let mut dj = m[(j, j)];
            for k in 0..j {
                dj -= m[(j, k)] * m[(j, k)] * d[k];
            }
            let sign = if j < n_pos { 1.0 } else { -1.0 };
            if sign * dj <= eps {
                dj = sign * delta;
                bumped += 1;
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut v = m[(i, j)];
                for k in 0..j {
                    v -= m[(i, k)] * m[(j, k)] * d[k];
                }
                m[(i, j)] = v / dj;
            }
        }
        for j in 0..n {
            m[(j, j)] = 1.0;
            for i in 0..j {
                m[(i, j)] = 0.0;
            }
        }
        Self { l: m, d, bumped }
    }

    pub(crate) fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.d.len();
        let mut x = rhs.clone();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[(i, k)] * x[k];
            }
            x[i] = v;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_quasidefinite() {
        // [[4, 1, 1], [1, 3, 0], [1, 0, -2]]
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 1.0, 1.0, 3.0, 0.0, 1.0, 0.0, -2.0]);
        let f = Ldl::factor(m.clone(), 2, 1e-14, 1e-8);
        assert_eq!(f.bumped, 0);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = f.solve(&b);
        assert!((&m * x - b).norm() < 1e-12);
    }
}
