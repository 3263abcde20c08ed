//! General banded LU factorization with partial pivoting, column-major band
//! storage. The Newton systems on the sphere grid are five-point stencils
//! with periodic longitude, so with θ-major ordering the bandwidth is the
//! longitude count and a banded direct solve is exact and fast.

use crate::error::{Result, SslError};

/// Band matrix A(i, j) stored for j−ku ≤ i ≤ j+kl plus kl fill rows.
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    /// Column-major: entry (i, j) lives at `j * ldab + (kl + ku + i − j)`.
    ab: Vec<f64>,
}

pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// Smallest absolute pivot encountered (conditioning hint).
    pub min_pivot: f64,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku >= j && i <= j + self.kl, "({i},{j}) off band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.ab[o] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.ab[o] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.offset(i, j)]
    }

    /// Factor in place (the matrix is consumed).
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let band = kl + ku;
        let mut ipiv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search down column j
            let col = j * ldab + kl + ku;
            let mut jp = 0usize;
            let mut best = self.ab[col].abs();
            for r in 1..=km {
                let v = self.ab[col + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            let pivot = self.ab[col + jp];
            if pivot == 0.0 {
                return Err(SslError::Numerical(format!(
                    "banded factorization hit an exactly singular pivot at column {j}"
                )));
            }
            min_pivot = min_pivot.min(pivot.abs());
            if jp != 0 {
                // swap rows j and j+jp over columns j..=min(n-1, j+band)
                let hi = (j + band).min(n - 1);
                for c in j..=hi {
                    let a = c * ldab + (kl + ku + j - c);
                    let b = a + jp;
                    self.ab.swap(a, b);
                }
            }
            let inv = 1.0 / self.ab[col];
            for r in 1..=km {
                self.ab[col + r] *= inv;
            }
            let hi = (j + band).min(n - 1);
            for c in (j + 1)..=hi {
                let head = c * ldab + (kl + ku + j - c);
                let t = self.ab[head];
                if t != 0.0 {
                    let (lcol, ucol) = self.ab.split_at_mut(c * ldab);
                    let lbase = j * ldab + kl + ku;
                    let ubase = kl + ku + j - c;
                    for r in 1..=km {
                        ucol[ubase + r] -= lcol[lbase + r] * t;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
            min_pivot,
        })
    }
}

impl BandLu {
    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        // forward substitution with L (unit diagonal, pivoted)
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(self.n - 1 - j);
            let col = j * ldab + kl + ku;
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=km {
                    b[j + r] -= self.ab[col + r] * bj;
                }
            }
        }
        // back substitution with U (bandwidth kl + ku after fill)
        let band = kl + ku;
        for j in (0..self.n).rev() {
            let col = j * ldab + kl + ku;
            b[j] /= self.ab[col];
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(band);
                for r in lo..j {
                    b[r] -= self.ab[j * ldab + (kl + ku + r - j)] * bj;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination oracle with partial pivoting.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for j in 0..n {
            let piv = (j..n).max_by(|p, q| m[*p][j].abs().total_cmp(&m[*q][j].abs())).unwrap();
            m.swap(j, piv);
            x.swap(j, piv);
            for r in (j + 1)..n {
                let f = m[r][j] / m[j][j];
                for c in j..n {
                    m[r][c] -= f * m[j][c];
                }
                x[r] -= f * x[j];
            }
        }
        for j in (0..n).rev() {
            for c in (j + 1)..n {
                x[j] -= m[j][c] * x[c];
            }
            x[j] /= m[j][j];
        }
        x
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn banded_matches_dense_oracle() {
        let mut seed = 0x5eed_u64;
        for (n, kl, ku) in [(12usize, 2usize, 3usize), (25, 4, 4), (40, 1, 1)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for j in 0..n {
                for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                    let v = lcg(&mut seed) + if i == j { 4.0 } else { 0.0 };
                    band.set(i, j, v);
                    dense[i][j] = v;
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
            let lu = band.factor().unwrap();
            let mut x = rhs.clone();
            lu.solve(&mut x);
            let expected = dense_solve(&dense, &rhs);
            for k in 0..n {
                assert!(
                    (x[k] - expected[k]).abs() < 1e-10,
                    "n={n} kl={kl} ku={ku} k={k}: {} vs {}",
                    x[k],
                    expected[k]
                );
            }
        }
    }

    #[test]
    fn indefinite_system_is_pivoted_correctly() {
        // a saddle-like matrix that needs row exchanges
        let n = 6;
        let mut band = BandMatrix::zeros(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        let entries = [
            (0, 0, 1e-14),
            (1, 0, 1.0),
            (0, 1, 2.0),
            (1, 1, -1.0),
            (2, 1, 0.5),
            (1, 2, 3.0),
            (2, 2, 0.0),
            (3, 2, 1.0),
            (2, 3, -2.0),
            (3, 3, 1.0),
            (4, 3, 2.0),
            (3, 4, 0.25),
            (4, 4, -0.5),
            (5, 4, 1.0),
            (4, 5, 1.5),
            (5, 5, 2.0),
        ];
        for (i, j, v) in entries {
            band.set(i, j, v);
            dense[i][j] = v;
        }
        let rhs = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25];
        let lu = band.factor().unwrap();
        let mut x = rhs.clone();
        lu.solve(&mut x);
        let expected = dense_solve(&dense, &rhs);
        for k in 0..n {
            assert!((x[k] - expected[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn exactly_singular_is_reported() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(1, 1, 0.0);
        band.set(2, 2, 1.0);
        assert!(band.factor().is_err());
    }
}
