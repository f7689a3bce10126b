//! Analyticity radius: `d/dt τ^{3/2} = -3 C₀ ‖g‖_B`, its closed-form floor
//! and the lifespan formula.

use crate::error::{Error, Result};
use crate::grid::bracket;

/// `δ = ε ln(1/ε)`.
pub fn delta_of(epsilon: f64) -> f64 {
    epsilon * (1.0 / epsilon).ln()
}

/// `α = (1 - δ)/2`.
pub fn alpha_of(epsilon: f64) -> f64 {
    0.5 * (1.0 - delta_of(epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusSample {
    pub t: f64,
    pub tau: f64,
    pub b_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusState {
    pub tau: f64,
    pub tau0: f64,
    pub c0: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub strict: bool,
    /// Time of the current `tau`.
    pub t: f64,
    pub history: Vec<RadiusSample>,
}

impl RadiusState {
    /// State at `t = 0` with `τ = τ₀`. In strict mode the standing
    /// parameter assumptions are enforced.
    pub fn new(tau0: f64, c0: f64, c2: f64, epsilon: f64, strict: bool) -> Result<Self> {
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau0 must be positive (got {tau0})")));
        }
        if !(c0 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidArgument(format!("c0, c2 must be positive (got {c0}, {c2})")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1) (got {epsilon})")));
        }
        let s = Self {
            tau: tau0,
            tau0,
            c0,
            c2,
            epsilon,
            delta: delta_of(epsilon),
            strict,
            t: 0.0,
            history: Vec::new(),
        };
        if strict {
            s.regime_check()?;
        }
        Ok(s)
    }

    /// `ε ≤ 1/200`, `δ ∈ (ε, 1/10)` and
    /// `C*/ln(1/ε) ≤ τ₀^{3/2} ≤ 1/(C* ε³)` with `C* = C₂`.
    pub fn regime_check(&self) -> Result<()> {
        let eps = self.epsilon;
        if eps > 1.0 / 200.0 {
            return Err(Error::Regime(format!("epsilon = {eps} exceeds 1/200")));
        }
        if !(self.delta > eps && self.delta < 0.1) {
            return Err(Error::Regime(format!("delta = {:.4} outside (epsilon, 1/10)", self.delta)));
        }
        let p = self.tau0.powf(1.5);
        let lo = self.c2 / (1.0 / eps).ln();
        let hi = 1.0 / (self.c2 * eps.powi(3));
        if p < lo || p > hi {
            return Err(Error::Regime(format!(
                "tau0^(3/2) = {p:.4e} outside [{lo:.4e}, {hi:.4e}]"
            )));
        }
        Ok(())
    }
}

/// Advances `τ^{3/2}` by `-3 C₀ B dt`. `b_norm` is the norm already
/// combined at the stage times of the caller's integrator.
pub fn step_tau(mut state: RadiusState, b_norm: f64, dt: f64) -> Result<RadiusState> {
    if dt.is_nan() || b_norm.is_nan() || dt <= 0.0 || b_norm < 0.0 {
        return Err(Error::InvalidArgument(format!("step_tau needs dt > 0, B ≥ 0 (got {dt}, {b_norm})")));
    }
    let p = state.tau.powf(1.5) - 3.0 * state.c0 * b_norm * dt;
    let t_new = state.t + dt;
    if p <= 0.0 {
        return Err(Error::RadiusCollapse { t: t_new, value: p });
    }
    let tau = p.powf(2.0 / 3.0).min(state.tau);
    state.tau = tau;
    state.t = t_new;
    state.history.push(RadiusSample { t: t_new, tau, b_norm });
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// The bound has crossed zero: `t` lies past the guaranteed window.
    pub crossed: bool,
}

/// `(τ₀^{3/2} − ε C₂ ⟨t⟩^δ / (2δ))^{2/3}`.
pub fn tau_lower_bound(t: f64, state: &RadiusState) -> LowerBound {
    let p = state.tau0.powf(1.5) - state.epsilon * state.c2 * bracket(t).powf(state.delta) / (2.0 * state.delta);
    if p <= 0.0 {
        LowerBound { value: 0.0, crossed: true }
    } else {
        LowerBound { value: p.powf(2.0 / 3.0), crossed: false }
    }
}

/// `T_ε = (δ τ₀^{3/2} / (ε C₂))^{1/δ} − 1`, clamped at 0.
pub fn lifespan_t_eps(state: &RadiusState) -> Result<f64> {
    if state.strict {
        state.regime_check()?;
    }
    let base = state.delta * state.tau0.powf(1.5) / (state.epsilon * state.c2);
    let t = (base.ln() / state.delta).exp() - 1.0;
    Ok(t.max(0.0))
}

/// Running maximum of `|τ(t₁) − τ(t₂)| / |t₁ − t₂|^{1/2}` over all pairs.
#[derive(Clone, Debug, Default)]
pub struct HolderTracker {
    samples: Vec<(f64, f64)>,
    running_max: f64,
}

impl HolderTracker {
    pub fn push(&mut self, t: f64, tau: f64) -> f64 {
        for &(s, v) in &self.samples {
            let dt = (t - s).abs();
            if dt > 0.0 {
                self.running_max = self.running_max.max((tau - v).abs() / dt.sqrt());
            }
        }
        self.samples.push((t, tau));
        self.running_max
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(tau0: f64, c0: f64, c2: f64, eps: f64) -> RadiusState {
        RadiusState::new(tau0, c0, c2, eps, false).unwrap()
    }

    #[test]
    fn parameter_choices() {
        assert!((alpha_of(0.1) - 0.384_870_745_350_297_7).abs() < 1e-15);
        assert!((delta_of(0.1) - 0.230_258_509_299_404_6).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_keeps_tau() {
        let s = step_tau(state(1.0, 1.0, 1.0, 0.1), 0.0, 0.5).unwrap();
        assert_eq!(s.tau, 1.0);
        assert_eq!(s.t, 0.5);
    }

    #[test]
    fn arithmetic_example() {
        let s = step_tau(state(1.0, 1.0, 1.0, 0.1), 1.0 / 3.0, 0.1).unwrap();
        assert!((s.tau.powf(1.5) - 0.9).abs() < 1e-14);
        assert!((s.tau - 0.932_169_751_786_962).abs() < 1e-12);
    }

    #[test]
    fn constant_forcing_matches_closed_form() {
        let (b, dt) = (0.05, 0.01);
        let mut s = state(1.0, 1.0, 1.0, 0.1);
        for _ in 0..500 {
            s = step_tau(s, b, dt).unwrap();
        }
        let exact = (1.0 - 3.0 * b * 5.0_f64).powf(2.0 / 3.0);
        assert!((s.tau - exact).abs() < 1e-12);
        assert!(s.history.windows(2).all(|w| w[1].tau <= w[0].tau));
    }

    #[test]
    fn collapse_is_reported() {
        let r = step_tau(state(1.0, 1.0, 1.0, 0.1), 10.0, 0.1);
        assert!(matches!(r, Err(Error::RadiusCollapse { .. })));
    }

    #[test]
    fn lower_bound_examples() {
        let s = state(1.0, 1.0, 0.5, 0.1);
        let lb = tau_lower_bound(0.0, &s);
        assert!(!lb.crossed && lb.value < 1.0);
        // ε/δ = 1/ln(1/ε), so the floor tends to τ0 only logarithmically
        let lb = |e: f64| tau_lower_bound(0.0, &state(1.0, 1.0, 0.5, e)).value;
        assert!(lb(1e-9) > lb(1e-3) && lb(1e-300) > lb(1e-9));
        assert!((lb(1e-300) - 1.0).abs() < 1e-3);
        let big = state(1.0, 1.0, 50.0, 0.1);
        assert!(tau_lower_bound(0.0, &big).crossed);
    }

    #[test]
    fn lifespan_examples() {
        let eps: f64 = 0.1;
        let delta = delta_of(eps);
        // δ τ0^{3/2} / (ε C2) = 1
        let s = state(1.0, 1.0, delta / eps, eps);
        assert!(lifespan_t_eps(&s).unwrap().abs() < 1e-12);
        // τ0^{3/2} ln(1/ε) ≥ C2 e²
        let c2 = 0.5;
        let tau0 = (c2 * std::f64::consts::E.powi(2) / (1.0 / eps).ln()).powf(2.0 / 3.0);
        let s = state(tau0, 1.0, c2, eps);
        let t = lifespan_t_eps(&s).unwrap();
        let floor = (1.0 / (eps * (1.0 / eps).ln())).exp();
        assert!((floor - 76.933_762_089_124_9).abs() < 1e-9);
        assert!(t >= floor, "{t} < {floor}");
    }

    #[test]
    fn strict_mode_rejects_standard_epsilon() {
        assert!(matches!(RadiusState::new(1.0, 1.0, 1.0, 0.1, true), Err(Error::Regime(_))));
        let eps: f64 = 0.004;
        let c2: f64 = 1.0;
        let tau0 = (2.0 * c2 / (1.0 / eps).ln()).powf(2.0 / 3.0);
        assert!(RadiusState::new(tau0, 1.0, c2, eps, true).is_ok());
    }

    #[test]
    fn holder_tracker() {
        let mut h = HolderTracker::default();
        h.push(0.0, 1.0);
        h.push(1.0, 0.9);
        let m = h.push(4.0, 0.8);
        assert!((m - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn lifespan_increases_with_tau0(t1 in 0.5f64..3.0, d in 0.01f64..1.0) {
            let a = lifespan_t_eps(&state(t1, 1.0, 0.2, 0.1)).unwrap();
            let b = lifespan_t_eps(&state(t1 + d, 1.0, 0.2, 0.1)).unwrap();
            prop_assert!(b >= a);
        }
    }
}
