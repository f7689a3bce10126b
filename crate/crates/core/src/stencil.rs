//! Fourth-order finite-difference operators on the mapped normal grid.
//!
//! Stencils are laid out on the uniform computational coordinate `r ∈ [0,1]`
//! and pushed to the physical node coordinate `ξ(r)` through the exact map
//! derivatives.

/// Real banded matrix, row-major, `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] = value;
    }

    /// Column range covered by row `i`.
    #[inline]
    pub fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    /// Dot product of row `i` with `x`.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let base = i * (self.kl + self.ku + 1);
        let mut acc = 0.0;
        for j in self.row_span(i) {
            acc += self.data[base + j + self.kl - i] * x[j];
        }
        acc
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    /// `diag(left) * self + diag(shift) * other`, both operands sharing `n`.
    fn combine(&self, left: &[f64], other: &BandMatrix, shift: &[f64]) -> BandMatrix {
        let kl = self.kl.max(other.kl);
        let ku = self.ku.max(other.ku);
        let mut out = BandMatrix::zeros(self.n, kl, ku);
        for i in 0..self.n {
            for j in out.row_span(i) {
                let v = left[i] * self.get(i, j) + shift[i] * other.get(i, j);
                if v != 0.0 {
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_ROW0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_ROW1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_ROW0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_ROW1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// One-sided coefficients of the first derivative at node 0, unit spacing
/// times 12. Used to write the discrete Neumann row.
pub const NEUMANN_ROW: [f64; 5] = D1_ROW0;

/// First and second derivative operators in `r` with spacing `h`.
fn computational_operators(n: usize, h: f64) -> (BandMatrix, BandMatrix) {
    let mut d1 = BandMatrix::zeros(n, 5, 5);
    let mut d2 = BandMatrix::zeros(n, 5, 5);
    let c1 = 1.0 / (12.0 * h);
    let c2 = 1.0 / (12.0 * h * h);
    let last = n - 1;
    for i in 2..n - 2 {
        for (k, c) in D1_CENTRAL.iter().enumerate() {
            d1.set(i, i + k - 2, c * c1);
        }
        for (k, c) in D2_CENTRAL.iter().enumerate() {
            d2.set(i, i + k - 2, c * c2);
        }
    }
    for k in 0..5 {
        d1.set(0, k, D1_ROW0[k] * c1);
        d1.set(1, k, D1_ROW1[k] * c1);
        // mirrored rows: odd derivative flips sign
        d1.set(last, last - k, -D1_ROW0[k] * c1);
        d1.set(last - 1, last - k, -D1_ROW1[k] * c1);
    }
    for k in 0..6 {
        d2.set(0, k, D2_ROW0[k] * c2);
        d2.set(1, k, D2_ROW1[k] * c2);
        d2.set(last, last - k, D2_ROW0[k] * c2);
        d2.set(last - 1, last - k, D2_ROW1[k] * c2);
    }
    (d1, d2)
}

/// Derivative operators in the node coordinate `ξ`, given the map
/// derivatives `ξ_r` and `ξ_rr` at every node.
pub fn mapped_operators(xi_r: &[f64], xi_rr: &[f64]) -> (BandMatrix, BandMatrix) {
    let n = xi_r.len();
    let h = 1.0 / (n - 1) as f64;
    let (d1r, d2r) = computational_operators(n, h);
    let zero = vec![0.0; n];
    let inv = xi_r.iter().map(|a| 1.0 / a).collect::<Vec<_>>();
    let d1 = d1r.combine(&inv, &d1r, &zero);
    let inv2 = xi_r.iter().map(|a| 1.0 / (a * a)).collect::<Vec<_>>();
    let corr = xi_r
        .iter()
        .zip(xi_rr)
        .map(|(a, b)| -b / (a * a * a))
        .collect::<Vec<_>>();
    let d2 = d2r.combine(&inv2, &d1r, &corr);
    (d1, d2)
}
