//! The erf shear lift `φ = erf(y/√(4⟨t⟩))`, its profile `Φ(z) = erf(z/2)`,
//! the coefficient `a = -y/(2⟨t⟩)`, and the special functions behind them.

use std::f64::consts::PI;

use crate::grid::bracket;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftParams {
    /// Euler trace `u^E = κ`.
    pub kappa: f64,
    /// Gaussian weight exponent.
    pub alpha: f64,
}

/// Error function, accurate to ~1e-15 absolute. Exactly odd.
pub fn erf_fn(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let a = x.abs();
    let r = if a < 2.0 {
        erf_series(a)
    } else if a > 6.0 {
        1.0
    } else {
        1.0 - erfc_cf(a)
    };
    r.copysign(x)
}

/// `erfc` for `x ≥ 0`.
pub fn erfc_fn(x: f64) -> f64 {
    assert!(x >= 0.0 || x.is_nan());
    if x < 2.0 {
        1.0 - erf_series(x)
    } else if x > 27.0 {
        0.0
    } else {
        erfc_cf(x)
    }
}

// (2/√π) e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!, all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))),
// evaluated bottom-up.
fn erfc_cf(x: f64) -> f64 {
    let mut k = x;
    for n in (1..=120).rev() {
        k = x + 0.5 * n as f64 / k;
    }
    (-x * x).exp() / (PI.sqrt() * k)
}

/// Dawson's integral `e^{-y²} ∫₀^y e^{s²} ds` for `y ≥ 0`.
pub fn dawson_fn(y: f64) -> f64 {
    assert!(y >= 0.0 || y.is_nan(), "dawson_fn takes y ≥ 0");
    if y <= 6.0 {
        // e^{-y²} Σ y^{2n+1} / (n! (2n+1))
        let y2 = y * y;
        let mut t = y;
        let mut sum = y;
        let mut n = 0.0;
        loop {
            n += 1.0;
            t *= y2 / n * (2.0 * n - 1.0) / (2.0 * n + 1.0);
            sum += t;
            if t <= 1e-17 * sum {
                break;
            }
        }
        (-y2).exp() * sum
    } else {
        // 1/(2y) Σ (2n-1)!! / (2y²)ⁿ, truncated before the smallest term
        let q = 1.0 / (2.0 * y * y);
        let mut t = 1.0;
        let mut sum = 1.0;
        let mut n = 0.0;
        loop {
            n += 1.0;
            let next = t * (2.0 * n - 1.0) * q;
            if next >= t || next < 1e-18 * sum {
                break;
            }
            t = next;
            sum += t;
        }
        sum / (2.0 * y)
    }
}

/// `Φ(z) = erf(z/2)`.
pub fn phi_profile(z: f64) -> f64 {
    erf_fn(0.5 * z)
}

/// `Φ'(z) = e^{-z²/4}/√π`.
pub fn phi_profile_deriv(z: f64) -> f64 {
    (-0.25 * z * z).exp() / PI.sqrt()
}

/// `φ(t, y) = Φ(y/⟨t⟩^{1/2})`.
pub fn lift_phi(t: f64, y: f64) -> f64 {
    phi_profile(y / bracket(t).sqrt())
}

/// `∂_y φ = e^{-y²/(4⟨t⟩)} / √(π⟨t⟩)`.
pub fn lift_phi_y(t: f64, y: f64) -> f64 {
    let b = bracket(t);
    (-y * y / (4.0 * b)).exp() / (PI * b).sqrt()
}

/// `a(t, y) = -y/(2⟨t⟩)`.
pub fn coeff_a(t: f64, y: f64) -> f64 {
    -y / (2.0 * bracket(t))
}
