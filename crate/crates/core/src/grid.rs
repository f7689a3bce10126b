//! Discrete domain: periodic Fourier grid in x, truncated and optionally
//! stretched grid in the normal direction, the coordinate maps between the
//! physical height `y` and the self-similar variable `z = y/⟨t⟩^{1/2}`, and
//! the Gaussian weight.
//!
//! Normal nodes are stored in a node coordinate `ξ` with `y = s(t) ξ`. In
//! [`CoordMode::SelfSimilarZ`] `s = ⟨t⟩^{1/2}` so `ξ = z`; in
//! [`CoordMode::PhysicalY`] `s = 1` so `ξ = y` (nodes equal the z-nodes at
//! the reference time `t = 0`).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::Spectral;
use crate::stencil::{mapped_operators, BandMatrix};

/// `⟨t⟩ = t + 1`.
#[inline]
pub fn bracket(t: f64) -> f64 {
    t + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoordMode {
    PhysicalY,
    SelfSimilarZ,
}

impl fmt::Display for CoordMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordMode::PhysicalY => "physical_y",
            CoordMode::SelfSimilarZ => "self_similar_z",
        })
    }
}

impl FromStr for CoordMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical_y" | "PhysicalY" => Ok(CoordMode::PhysicalY),
            "self_similar_z" | "SelfSimilarZ" => Ok(CoordMode::SelfSimilarZ),
            other => Err(Error::Config(format!(
                "unknown grid mode `{other}` (expected physical_y or self_similar_z)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub lx: f64,
    pub nz: usize,
    pub zmax: f64,
    pub mode: CoordMode,
    /// Clustering strength near the wall; `0` gives uniform nodes.
    pub stretch: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 32,
            lx: 2.0 * std::f64::consts::PI,
            nz: 128,
            zmax: 12.0,
            mode: CoordMode::SelfSimilarZ,
            stretch: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    config: GridConfig,
    xi: Vec<f64>,
    xi_r: Vec<f64>,
    xi_rr: Vec<f64>,
    quad: Vec<f64>,
    id: u64,
    spectral: Spectral,
    d1: BandMatrix,
    d2: BandMatrix,
}

pub fn make_grid(config: GridConfig) -> Result<Grid> {
    Grid::new(config)
}

impl Grid {
    pub fn new(config: GridConfig) -> Result<Self> {
        let GridConfig { nx, lx, nz, zmax, stretch, .. } = config;
        if nx < 4 || !nx.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_x must be a power of two ≥ 4 (got {nx})")));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::InvalidGrid(format!("l_x must be positive (got {lx})")));
        }
        if nz < 16 {
            return Err(Error::InvalidGrid(format!("n_z must be ≥ 16 (got {nz})")));
        }
        if !zmax.is_finite() {
            return Err(Error::InvalidGrid("z_max must be finite".into()));
        }
        if zmax < 8.0 {
            return Err(Error::WeightTail(zmax));
        }
        if !(stretch.is_finite() && stretch >= 0.0) {
            return Err(Error::InvalidGrid(format!("stretch must be ≥ 0 (got {stretch})")));
        }
        let last = (nz - 1) as f64;
        let (mut xi, mut xi_r, mut xi_rr) = (Vec::with_capacity(nz), Vec::new(), Vec::new());
        for j in 0..nz {
            let r = j as f64 / last;
            if stretch == 0.0 {
                xi.push(zmax * r);
                xi_r.push(zmax);
                xi_rr.push(0.0);
            } else {
                let sh = stretch.sinh();
                xi.push(zmax * (stretch * r).sinh() / sh);
                xi_r.push(zmax * stretch * (stretch * r).cosh() / sh);
                xi_rr.push(zmax * stretch * stretch * (stretch * r).sinh() / sh);
            }
        }
        xi[0] = 0.0;
        xi[nz - 1] = zmax;
        let mut quad = vec![0.0; nz];
        for j in 0..nz - 1 {
            let h = 0.5 * (xi[j + 1] - xi[j]);
            quad[j] += h;
            quad[j + 1] += h;
        }
        let (d1, d2) = mapped_operators(&xi_r, &xi_rr);
        let id = grid_hash(&config);
        Ok(Self {
            spectral: Spectral::new(nx, lx),
            config,
            xi,
            xi_r,
            xi_rr,
            quad,
            id,
            d1,
            d2,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }
    pub fn nx(&self) -> usize {
        self.config.nx
    }
    pub fn nz(&self) -> usize {
        self.config.nz
    }
    pub fn lx(&self) -> f64 {
        self.config.lx
    }
    pub fn zmax(&self) -> f64 {
        self.config.zmax
    }
    pub fn mode(&self) -> CoordMode {
        self.config.mode
    }
    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }
    /// First derivative in the node coordinate.
    pub fn d1(&self) -> &BandMatrix {
        &self.d1
    }
    /// Second derivative in the node coordinate.
    pub fn d2(&self) -> &BandMatrix {
        &self.d2
    }

    /// Normal nodes in the node coordinate `ξ`.
    pub fn nodes(&self) -> &[f64] {
        &self.xi
    }

    /// Map derivatives `dξ/dr`, `d²ξ/dr²` for the computational coordinate.
    pub fn map_derivatives(&self) -> (&[f64], &[f64]) {
        (&self.xi_r, &self.xi_rr)
    }

    /// Trapezoid weights for `∫ f dξ`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }

    pub fn dx(&self) -> f64 {
        self.config.lx / self.config.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Scale `s(t)` with `y = s ξ`.
    pub fn scale(&self, t: f64) -> f64 {
        match self.config.mode {
            CoordMode::SelfSimilarZ => bracket(t).sqrt(),
            CoordMode::PhysicalY => 1.0,
        }
    }

    /// Logarithmic rate `ṡ/s`.
    pub fn drift_rate(&self, t: f64) -> f64 {
        match self.config.mode {
            CoordMode::SelfSimilarZ => 0.5 / bracket(t),
            CoordMode::PhysicalY => 0.0,
        }
    }

    pub fn y_nodes(&self, t: f64) -> Vec<f64> {
        let s = self.scale(t);
        self.xi.iter().map(|x| s * x).collect()
    }

    pub fn z_nodes(&self, t: f64) -> Vec<f64> {
        let c = self.scale(t) / bracket(t).sqrt();
        self.xi.iter().map(|x| c * x).collect()
    }

    /// `∂_ξ` applied along every x-row.
    pub fn d_xi(&self, f: ArrayView2<f64>) -> Array2<f64> {
        apply_rows(&self.d1, f)
    }

    pub fn d_xi2(&self, f: ArrayView2<f64>) -> Array2<f64> {
        apply_rows(&self.d2, f)
    }

    /// `∂_y` at time `t`.
    pub fn d_y(&self, f: ArrayView2<f64>, t: f64) -> Array2<f64> {
        let mut out = self.d_xi(f);
        let inv = 1.0 / self.scale(t);
        out.mapv_inplace(|v| v * inv);
        out
    }

    /// Per-node weights `W_j` such that `‖θ_α f‖² = dx Σ_i Σ_j W_j f_ij²`:
    /// trapezoid weight, measure factor `dy = s dξ`, and `θ_α²`.
    pub fn weighted_measure(&self, alpha: f64, t: f64) -> Vec<f64> {
        let s = self.scale(t);
        self.z_nodes(t)
            .iter()
            .zip(&self.quad)
            .map(|(z, w)| w * s * (2.0 * log_weight_theta_z(alpha, *z)).exp())
            .collect()
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.grid_id != self.id {
            return Err(Error::GridMismatch { field: f.grid_id, grid: self.id });
        }
        Ok(())
    }
}

fn apply_rows(op: &BandMatrix, f: ArrayView2<f64>) -> Array2<f64> {
    let (nx, nz) = f.dim();
    let mut out = Array2::zeros((nx, nz));
    let mut buf = vec![0.0; nz];
    for i in 0..nx {
        let row = f.row(i);
        let src: Vec<f64> = row.iter().copied().collect();
        op.apply(&src, &mut buf);
        out.row_mut(i).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
    }
    out
}

fn grid_hash(c: &GridConfig) -> u64 {
    let mut h = Sha256::new();
    h.update((c.nx as u64).to_le_bytes());
    h.update(c.lx.to_bits().to_le_bytes());
    h.update((c.nz as u64).to_le_bytes());
    h.update(c.zmax.to_bits().to_le_bytes());
    h.update(c.stretch.to_bits().to_le_bytes());
    h.update(c.mode.to_string().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// `ln θ_α` in terms of z.
#[inline]
pub fn log_weight_theta_z(alpha: f64, z: f64) -> f64 {
    alpha * z * z / 4.0
}

/// `θ_α(t, y) = exp(α y² / (4⟨t⟩))`. Saturates at `f64::MAX` instead of
/// overflowing.
pub fn weight_theta(alpha: f64, t: f64, y: f64) -> f64 {
    let e = alpha * y * y / (4.0 * bracket(t));
    if e > 700.0 {
        return f64::MAX.min(e.exp());
    }
    e.exp()
}

/// A sampled real function on the tensor grid, shape `(n_x, n_z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Array2<f64>,
    grid_id: u64,
    time: f64,
}

impl Field {
    pub fn new(grid: &Grid, values: Array2<f64>, time: f64) -> Result<Self> {
        if values.dim() != (grid.nx(), grid.nz()) {
            return Err(Error::InvalidArgument(format!(
                "field shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.nx(),
                grid.nz()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { t: time, detail: format!("entry ({i},{j}) = {v}") });
        }
        Ok(Self { values, grid_id: grid.id(), time })
    }

    /// Skips the finiteness scan; callers guarantee shape.
    pub(crate) fn from_parts(grid: &Grid, values: Array2<f64>, time: f64) -> Self {
        debug_assert_eq!(values.dim(), (grid.nx(), grid.nz()));
        Self { values, grid_id: grid.id(), time }
    }

    pub fn zeros(grid: &Grid, time: f64) -> Self {
        Self::from_parts(grid, Array2::zeros((grid.nx(), grid.nz())), time)
    }

    /// Samples `f(x, y)` at physical heights for time `time`.
    pub fn from_fn_y(grid: &Grid, time: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let y = grid.y_nodes(time);
        let v = Array2::from_shape_fn((grid.nx(), grid.nz()), |(i, j)| f(grid.x(i), y[j]));
        Self::new(grid, v, time)
    }

    /// Samples `f(x, z)` in the self-similar variable.
    pub fn from_fn_z(grid: &Grid, time: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let z = grid.z_nodes(time);
        let v = Array2::from_shape_fn((grid.nx(), grid.nz()), |(i, j)| f(grid.x(i), z[j]));
        Self::new(grid, v, time)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Same grid and time, new values.
    pub(crate) fn with_values(&self, values: Array2<f64>) -> Self {
        Self { values, grid_id: self.grid_id, time: self.time }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Split of a weighted quadrature into the total and the share of the last
/// 10% of normal nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNorm {
    pub value: f64,
    pub tail_fraction: f64,
}

impl WeightedNorm {
    pub fn tail_warning(&self) -> bool {
        self.tail_fraction > 1e-6
    }
}

/// `‖θ_α f‖_{L²}` with its tail diagnostic.
pub fn l2_weighted_report(grid: &Grid, f: &Field, alpha: f64) -> Result<WeightedNorm> {
    grid.check(f)?;
    let w = grid.weighted_measure(alpha, f.time());
    let nz = grid.nz();
    let tail_start = nz - (nz / 10).max(1);
    let (mut total, mut tail) = (0.0, 0.0);
    for row in f.values().rows() {
        for (j, (v, wj)) in row.iter().zip(&w).enumerate() {
            let c = wj * v * v;
            total += c;
            if j >= tail_start {
                tail += c;
            }
        }
    }
    total *= grid.dx();
    tail *= grid.dx();
    Ok(WeightedNorm {
        value: total.sqrt(),
        tail_fraction: if total > 0.0 { tail / total } else { 0.0 },
    })
}

pub fn l2_weighted(grid: &Grid, f: &Field, alpha: f64) -> Result<f64> {
    let r = l2_weighted_report(grid, f, alpha)?;
    if r.tail_warning() {
        log::warn!("quadrature tail holds {:.2e} of the weighted norm", r.tail_fraction);
    }
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_grid() -> Grid {
        make_grid(GridConfig::default()).unwrap()
    }

    #[test]
    fn endpoints_and_spacing() {
        let g = std_grid();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[127], 12.0);
        assert!((g.nodes()[1] - 12.0 / 127.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = GridConfig { nx: 3, ..GridConfig::default() };
        let e = make_grid(bad).unwrap_err().to_string();
        assert!(e.contains("n_x must be a power of two ≥ 4"), "{e}");
        let bad = GridConfig { zmax: 6.0, ..GridConfig::default() };
        assert!(matches!(make_grid(bad), Err(Error::WeightTail(_))));
        assert!(make_grid(GridConfig { nz: 8, ..GridConfig::default() }).is_err());
    }

    #[test]
    fn stretched_nodes_increase() {
        let g = make_grid(GridConfig { stretch: 2.0, ..GridConfig::default() }).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 12.0);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(weight_theta(0.5, 0.0, 0.0), 1.0);
        assert!((weight_theta(0.5, 0.0, 2.0) - 0.5f64.exp()).abs() < 1e-15);
        assert!((weight_theta(0.25, 3.0, 4.0) - 0.25f64.exp()).abs() < 1e-15);
        assert!(weight_theta(0.5, 0.0, 1e4).is_finite());
    }

    #[test]
    fn deterministic_ids() {
        assert_eq!(std_grid().id(), std_grid().id());
        let other = make_grid(GridConfig { nz: 64, ..GridConfig::default() }).unwrap();
        assert_ne!(std_grid().id(), other.id());
    }

    #[test]
    fn trapezoid_second_order() {
        // ∫₀^∞ y e^{−y²} dy = 1/2; the wall slope makes the rule exactly second order.
        let err = |nz: usize| {
            let g = make_grid(GridConfig { nz, ..GridConfig::default() }).unwrap();
            let s: f64 = g.nodes().iter().zip(g.quad_weights()).map(|(y, w)| w * y * (-y * y).exp()).sum();
            (s - 0.5).abs()
        };
        let (a, b, c) = (err(64), err(128), err(256));
        assert!((a / b - 4.0).abs() < 0.2 && (b / c - 4.0).abs() < 0.1, "{a:e} {b:e} {c:e}");
    }

    proptest::proptest! {
        #[test]
        fn theta_reciprocal(alpha in 0.0f64..0.5, t in 0.0f64..100.0, y in 0.0f64..40.0) {
            let p = weight_theta(alpha, t, y) * weight_theta(-alpha, t, y);
            proptest::prop_assert!((p - 1.0).abs() < 1e-14);
        }

        #[test]
        fn l2_weighted_is_a_norm(
            a in proptest::collection::vec(-1.0f64..1.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 6),
            c in -5.0f64..5.0,
        ) {
            let g = make_grid(GridConfig { nz: 64, ..GridConfig::default() }).unwrap();
            let field = |k: &[f64]| {
                Field::from_fn_z(&g, 0.0, |x, z| {
                    (k[0] + k[1] * x.cos() + k[2] * (2.0 * x).sin()) * (-z * z / 2.0).exp()
                        + (k[3] + k[4] * x.sin()) * z * z * (-z * z / 2.0).exp() * k[5]
                })
                .unwrap()
            };
            let (fa, fb) = (field(&a), field(&b));
            let na = l2_weighted(&g, &fa, 0.4).unwrap();
            let nb = l2_weighted(&g, &fb, 0.4).unwrap();
            let scaled = Field::new(&g, fa.values() * c, 0.0).unwrap();
            let sum = Field::new(&g, fa.values() + fb.values(), 0.0).unwrap();
            let ns = l2_weighted(&g, &scaled, 0.4).unwrap();
            proptest::prop_assert!((ns - c.abs() * na).abs() <= 1e-12 * (1.0 + ns));
            proptest::prop_assert!(l2_weighted(&g, &sum, 0.4).unwrap() <= na + nb + 1e-12);
        }
    }
}
