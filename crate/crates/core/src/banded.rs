//! Complex banded LU with partial pivoting (gbtf2/gbtrs layout).

use rustfft::num_complex::Complex64;

/// Band storage for a square complex matrix with `kl` sub- and `ku`
/// super-diagonals, plus `kl` extra rows for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
    factored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot(pub usize);

impl BandLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![Complex64::new(0.0, 0.0); ldab * n],
            ipiv: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    /// Clears all entries so the storage can be refilled.
    pub fn reset(&mut self) {
        self.ab.fill(Complex64::new(0.0, 0.0));
        self.factored = false;
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += value;
    }

    pub fn factor(&mut self) -> Result<(), SingularPivot> {
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let a = self.ab[j * self.ldab + kv + p].norm();
                if a > best {
                    best = a;
                    jp = p;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(SingularPivot(j));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let recip = 1.0 / self.ab[self.idx(j, j)];
                for p in 1..=km {
                    let k = self.idx(j + p, j);
                    self.ab[k] *= recip;
                }
                for c in j + 1..=ju {
                    let ajc = self.ab[self.idx(j, c)];
                    if ajc == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for p in 1..=km {
                        let l = self.ab[self.idx(j + p, j)];
                        let k = self.idx(j + p, c);
                        self.ab[k] -= l * ajc;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place. Requires a successful [`BandLu::factor`].
    pub fn solve(&self, b: &mut [Complex64]) {
        assert!(self.factored, "solve before factor");
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n.saturating_sub(1) {
            let lm = self.kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            for p in 1..=lm {
                b[j + p] -= self.ab[self.idx(j + p, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.idx(j, j)];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for (i, bi) in b[lo..j].iter_mut().enumerate() {
                *bi -= self.ab[self.idx(lo + i, j)] * bj;
            }
        }
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &mut [Vec<Complex64>], b: &mut [Complex64]) {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    let v = a[k][j];
                    a[i][j] -= f * v;
                }
                let v = b[k];
                b[i] -= f * v;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s -= a[k][j] * b[j];
            }
            b[k] = s / a[k][k];
        }
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (23, 4, 3);
        let mut lu = BandLu::new(n, kl, ku);
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                // weak diagonal forces row swaps
                let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                lu.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let rhs = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect::<Vec<_>>();
        let mut x = rhs.clone();
        let mut y = rhs.clone();
        lu.factor().unwrap();
        lu.solve(&mut x);
        dense_solve(&mut dense, &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "{a} {b}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut lu = BandLu::new(3, 1, 1);
        lu.set(0, 0, Complex64::new(1.0, 0.0));
        lu.set(2, 2, Complex64::new(1.0, 0.0));
        assert!(lu.factor().is_err());
    }
}
