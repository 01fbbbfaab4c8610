#![allow(clippy::needless_range_loop)]

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Dense<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = v;
    }

    /// Gaussian elimination with partial pivoting; overwrites `self` and
    /// returns the solution in `b`. `None` if the matrix is numerically singular.
    pub fn solve_in_place(mut self, b: &mut [T]) -> Option<()> {
        let n = self.n;
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for col in 0..n {
            let (piv, pval) = (col..n)
                .map(|r| (r, self.at(r, col).abs()))
                .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pval > tiny) {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    self.data.swap(piv * n + c, col * n + c);
                }
                b.swap(piv, col);
            }
            let d = self.at(col, col);
            for r in col + 1..n {
                let f = self.at(r, col) / d;
                if f == T::zero() {
                    continue;
                }
                for c in col..n {
                    let v = self.at(r, c) - f * self.at(col, c);
                    self.set(r, c, v);
                }
                b[r] -= f * b[col];
            }
        }
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= self.at(r, c) * b[c];
            }
            b[r] = acc / self.at(r, r);
        }
        Some(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let mut m = Dense::<f64>::zeros(3);
        m.data = vec![0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.0];
        let mut b = vec![7.0, 6.0, 4.0];
        m.solve_in_place(&mut b).unwrap();
        for (got, want) in b.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular() {
        let mut m = Dense::<f64>::zeros(2);
        m.data = vec![1.0, 2.0, 2.0, 4.0];
        assert!(m.solve_in_place(&mut [1.0, 2.0]).is_none());
    }
}
