//! Right-hand side of the reduced cosmological system plus the algebraic
//! identities the flow preserves.
//!
//! State is (a, H, phi, Phi) with Phi the scalar velocity. Both second-order
//! field equations share one denominator D; on the constraint surface D stays
//! strictly positive, so there the system is a well-posed first-order ODE.
//! Off-surface probes (integrator trial stages) can in principle drive D to
//! zero, hence every rhs evaluation is guarded by a floor.

use thiserror::Error;

/// Instantaneous state of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmoState {
    pub t: f64,
    /// Scale factor, positive.
    pub a: f64,
    /// Hubble rate.
    pub h: f64,
    /// Scalar field.
    pub phi: f64,
    /// Scalar velocity Phi = d(phi)/dt.
    pub phi_dot: f64,
}

/// Time derivative of a [`CosmoState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsValue {
    pub da: f64,
    pub dh: f64,
    pub dphi: f64,
    pub dphi_dot: f64,
}

impl RhsValue {
    pub const ZERO: RhsValue = RhsValue {
        da: 0.0,
        dh: 0.0,
        dphi: 0.0,
        dphi_dot: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.da, self.dh, self.dphi, self.dphi_dot]
    }
}

/// Default floor below which the shared denominator counts as degenerate.
pub const DENOM_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FieldError {
    #[error("evolution denominator {denominator:.3e} at or below floor {floor:.3e}")]
    DenominatorTooSmall { denominator: f64, floor: f64 },
    #[error("power combination is undefined at H = 0")]
    ZeroHubble,
}

/// Shared denominator D = 2 - 8*H*phi*Phi + 24*H^4*phi^2.
///
/// Total function; the positivity guarantee holds only on the constraint
/// surface, where D >= 2*(1 - 2*sqrt(3)*H^2*|phi|)^2.
pub fn gb_denominator(state: &CosmoState) -> f64 {
    let h2 = state.h * state.h;
    2.0 - 8.0 * state.h * state.phi * state.phi_dot + 24.0 * h2 * h2 * state.phi * state.phi
}

/// Momentum constraint C = 3H^2 - Phi^2 - 12 H^3 phi Phi; zero on solutions.
pub fn constraint_residual(state: &CosmoState) -> f64 {
    let h2 = state.h * state.h;
    3.0 * h2
        - state.phi_dot * state.phi_dot
        - 12.0 * h2 * state.h * state.phi * state.phi_dot
}

/// Magnitude scale of the constraint's individual terms.
///
/// The three terms of C cancel to many orders at large fields, so a raw
/// residual compared against max(1, 3H^2) would demand cancellation beyond
/// what 64-bit arithmetic can express. Normalizing by the largest term keeps
/// the residual meaningful across the whole field range.
pub fn constraint_scale(state: &CosmoState) -> f64 {
    let h2 = state.h * state.h;
    let cross = (12.0 * h2 * state.h * state.phi * state.phi_dot).abs();
    (3.0 * h2).max(state.phi_dot * state.phi_dot).max(cross).max(1.0)
}

/// Constraint residual divided by [`constraint_scale`].
pub fn normalized_constraint(state: &CosmoState) -> f64 {
    constraint_residual(state) / constraint_scale(state)
}

/// System right-hand side with the default denominator floor.
pub fn rhs(state: &CosmoState) -> Result<RhsValue, FieldError> {
    rhs_with_floor(state, DENOM_FLOOR)
}

/// System right-hand side: d/dt (a, H, phi, Phi) = (a H, F1, Phi, F2).
///
/// F2 reuses the F1 value just computed; the pair shares one denominator
/// evaluation per call.
pub fn rhs_with_floor(state: &CosmoState, floor: f64) -> Result<RhsValue, FieldError> {
    let denominator = gb_denominator(state);
    if denominator <= floor {
        return Err(FieldError::DenominatorTooSmall { denominator, floor });
    }
    let h = state.h;
    let phi = state.phi;
    let pd = state.phi_dot;
    let h2 = h * h;
    let h3 = h2 * h;
    let numerator = -4.0 * h3 * phi * pd - pd * pd + 4.0 * h2 * pd * pd
        - 24.0 * h3 * h3 * phi * phi
        - 3.0 * h2;
    let f1 = numerator / denominator;
    let f2 = -3.0 * pd * h - 6.0 * h2 * phi * (h2 + f1);
    Ok(RhsValue {
        da: state.a * h,
        dh: f1,
        dphi: pd,
        dphi_dot: f2,
    })
}

/// Quadratic combination that vanishes identically along solutions.
///
/// Takes dH from the caller so the identity is evaluated against the same
/// slope the integrator used, not a fresh recomputation.
pub fn power_identity(state: &CosmoState, dh: f64) -> Result<f64, FieldError> {
    let h = state.h;
    if h == 0.0 {
        return Err(FieldError::ZeroHubble);
    }
    let h2 = h * h;
    let h3 = h2 * h;
    let h6 = h3 * h3;
    let pd = state.phi_dot;
    let phi = state.phi;
    let val = h * ((2.0 * h2 - 1.0 - dh / (3.0 * h2)) * pd * pd
        - 8.0 * h3 * phi * pd
        - 12.0 * h6 * (1.0 + dh / h2) * phi * phi);
    Ok(val)
}

/// [`power_identity`] divided by its natural magnitude max(1, |H| Phi^2).
pub fn normalized_power(state: &CosmoState, dh: f64) -> Result<f64, FieldError> {
    let scale = (state.h.abs() * state.phi_dot * state.phi_dot).max(1.0);
    Ok(power_identity(state, dh)? / scale)
}

/// Reflection (phi, Phi) -> (-phi, -Phi); maps solutions to solutions.
pub fn z2_mirror(state: &CosmoState) -> CosmoState {
    CosmoState {
        phi: -state.phi,
        phi_dot: -state.phi_dot,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{solve_phidot, Branch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(h: f64, phi: f64, phi_dot: f64) -> CosmoState {
        CosmoState { t: 0.0, a: 1.0, h, phi, phi_dot }
    }

    #[test]
    fn denominator_reduces_to_two_without_coupling() {
        assert_eq!(gb_denominator(&state(0.7, 0.0, -1.3)), 2.0);
        assert_eq!(gb_denominator(&state(0.0, 4.2, -1.3)), 2.0);
    }

    #[test]
    fn denominator_on_constraint_launch_point() {
        let d = gb_denominator(&state(1.0 / 3.0, 0.0, 3f64.sqrt() / 3.0));
        assert_eq!(d, 2.0);
        // lower bound 2 (1 - 2 sqrt(3) H^2 |phi|)^2 holds trivially here
        assert!(d >= 2.0 * (1.0 - 0.0f64).powi(2));
    }

    #[test]
    fn denominator_lower_bound_on_branch_states() {
        // D >= 2 (1 - 2 sqrt(3) H^2 |phi|)^2 whenever Phi solves the
        // constraint, either branch.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20_000 {
            let h: f64 = rng.gen_range(-2.0..2.0);
            let phi: f64 = rng.gen_range(-2.0..2.0);
            for s in [Branch::Plus, Branch::Minus] {
                let pd = solve_phidot(h, phi, s);
                let st = state(h, phi, pd);
                let bound = 2.0 * (1.0 - 2.0 * 3f64.sqrt() * h * h * phi.abs()).powi(2);
                assert!(
                    gb_denominator(&st) >= bound - 1e-9 * bound.abs().max(1.0),
                    "D below bound at H={h} phi={phi} s={s:?}"
                );
            }
        }
    }

    #[test]
    fn constraint_zero_on_symmetric_launch() {
        for beta in [-1.5, -0.2, 0.0, 1.0 / 3.0, 0.55, 2.0] {
            let c = constraint_residual(&state(beta, 0.0, 3f64.sqrt() * beta));
            assert!(c.abs() <= 1e-15 * (3.0 * beta * beta).max(1.0), "beta={beta}: C={c}");
        }
        assert_eq!(constraint_residual(&state(0.0, 9.9, 0.0)), 0.0);
    }

    #[test]
    fn constraint_zero_on_solved_branch() {
        let pd = solve_phidot(1.0 / 3.0, 1.0, Branch::Plus);
        let c = constraint_residual(&state(1.0 / 3.0, 1.0, pd));
        assert!(c.abs() <= 1e-14, "C={c}");
    }

    #[test]
    fn rhs_matches_launch_slopes() {
        let st = state(1.0 / 3.0, 0.0, 3f64.sqrt() / 3.0);
        let r = rhs(&st).unwrap();
        assert_eq!(r.da, st.a * st.h);
        assert_eq!(r.dphi, st.phi_dot);
        assert!((r.dh - (-7.0 / 27.0)).abs() <= 1e-15);
        assert!((r.dphi_dot - (-3f64.sqrt() / 3.0)).abs() <= 1e-15);
    }

    #[test]
    fn rhs_with_zero_hubble_and_field() {
        let st = state(0.0, 0.0, 0.83);
        let r = rhs(&st).unwrap();
        assert_eq!(r.dh, -0.83f64 * 0.83 / 2.0);
        assert_eq!(r.dphi_dot, 0.0);
    }

    #[test]
    fn rhs_rejects_degenerate_denominator() {
        // pick phi, Phi so that D = 2 - 8 H phi Phi + 24 H^4 phi^2 ~ 0
        let st = state(1.0, 0.1, 2.75);
        assert!(gb_denominator(&st) < 0.1);
        let err = rhs_with_floor(&st, 0.1).unwrap_err();
        assert!(matches!(err, FieldError::DenominatorTooSmall { .. }));
    }

    #[test]
    fn power_identity_vanishes_at_launch() {
        let st = state(1.0 / 3.0, 0.0, 3f64.sqrt() / 3.0);
        let dh = rhs(&st).unwrap().dh;
        let p = power_identity(&st, dh).unwrap();
        assert!(p.abs() <= 1e-12, "P={p}");
    }

    #[test]
    fn power_identity_off_constraint_is_order_one() {
        let p = power_identity(&state(1.0, 0.0, 1.0), 0.0).unwrap();
        assert!((p - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn power_identity_rejects_zero_hubble() {
        assert_eq!(
            power_identity(&state(0.0, 1.0, 1.0), 0.0),
            Err(FieldError::ZeroHubble)
        );
    }

    #[test]
    fn power_identity_vanishes_on_random_branch_states() {
        // P = 0 is an identity on the constraint surface, not just at
        // symmetric points.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 5_000 {
            let h: f64 = rng.gen_range(-1.5..1.5);
            if h.abs() < 1e-3 {
                continue;
            }
            let phi: f64 = rng.gen_range(-1.5..1.5);
            let s = if rng.gen_bool(0.5) { Branch::Plus } else { Branch::Minus };
            let st = state(h, phi, solve_phidot(h, phi, s));
            // keep D away from zero so the dH feeding the identity is not
            // itself an amplified roundoff victim
            let Ok(r) = rhs_with_floor(&st, 0.5) else { continue };
            let p = normalized_power(&st, r.dh).unwrap();
            assert!(p.abs() <= 1e-10, "normalized P={p} at H={h} phi={phi}");
            checked += 1;
        }
    }

    #[test]
    fn mirror_flips_scalar_sector_only() {
        let st = state(0.4, 0.3, -0.2);
        let m = z2_mirror(&st);
        assert_eq!((m.a, m.h, m.phi, m.phi_dot), (st.a, st.h, -st.phi, -st.phi_dot));
        assert_eq!(z2_mirror(&m), st);
    }

    #[test]
    fn mirror_symmetry_of_rhs() {
        // F1 even, F2 odd under the reflection; exact in floating point
        // because every monomial contains an even resp. odd power of the
        // scalar sector.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut checked = 0;
        while checked < 10_000 {
            let st = state(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            if gb_denominator(&st) <= 0.1 {
                continue;
            }
            let r = rhs(&st).unwrap();
            let rm = rhs(&z2_mirror(&st)).unwrap();
            assert_eq!(rm.dh.to_bits(), r.dh.to_bits());
            assert_eq!(rm.dphi_dot.to_bits(), (-r.dphi_dot).to_bits());
            checked += 1;
        }
    }

    #[test]
    fn constraint_derivative_vanishes_along_flow() {
        // d/dt C = (6H - 36 H^2 phi Phi) dH - (2 Phi + 12 H^3 phi) dPhi
        //          - 12 H^3 Phi^2, evaluated with the rhs slopes, collapses
        // to zero on the constraint surface.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 5_000 {
            let h: f64 = rng.gen_range(-1.2..1.2);
            let phi: f64 = rng.gen_range(-1.2..1.2);
            let s = if rng.gen_bool(0.5) { Branch::Plus } else { Branch::Minus };
            let st = state(h, phi, solve_phidot(h, phi, s));
            let Ok(r) = rhs_with_floor(&st, 1e-3) else { continue };
            let h2 = h * h;
            let t1 = (6.0 * h - 36.0 * h2 * st.phi * st.phi_dot) * r.dh;
            let t2 = (2.0 * st.phi_dot + 12.0 * h2 * h * st.phi) * r.dphi_dot;
            let t3 = 12.0 * h2 * h * st.phi_dot * st.phi_dot;
            let dc = t1 - t2 - t3;
            // cancellation happens between the three terms, so roundoff is
            // proportional to the largest of them
            let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(1.0);
            assert!(dc.abs() / scale <= 1e-9, "dC/dt = {dc} at H={h} phi={phi}");
            checked += 1;
        }
    }
}
