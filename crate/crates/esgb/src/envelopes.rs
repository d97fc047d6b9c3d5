//! Closed-form envelopes that bracket every admissible trajectory, with
//! regime dispatch on the launch Hubble rate and the transcendental inverse
//! needed by the sharp backward bound.
//!
//! Two launch regimes share the forward bounds but differ backward in time;
//! the split sits at sqrt(5/27), which belongs to the low regime. Symmetric
//! launches (alpha = 0) have two-sided envelopes; general launches
//! (alpha >= 0) are bounded forward in time only.

use crate::initial_data::beta_sup;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("beta = {0} outside the admissible range (0, sqrt(3)/3)")]
    BetaOutOfRange(f64),
    #[error("alpha = {0} not allowed in this mode")]
    AlphaInvalid(f64),
    #[error("general-mode envelopes are one-sided, t = {0} < 0 is not covered")]
    NegativeTime(f64),
    #[error("bound not defined at t = {0}")]
    OutsideDomain(f64),
    #[error("transcendental inverse did not converge for y = {y}")]
    NonConvergence { y: f64 },
}

/// Launch-rate regime; the boundary sqrt(5/27) counts as low.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaRegime {
    Low,
    High,
}

/// Upper end of the low regime, sqrt(5/27).
pub fn low_sup() -> f64 {
    (5.0f64 / 27.0).sqrt()
}

impl BetaRegime {
    pub fn of(beta: f64) -> Result<BetaRegime, EnvelopeError> {
        if beta > 0.0 && beta < beta_sup() {
            Ok(BetaRegime::from_launch(beta))
        } else {
            Err(EnvelopeError::BetaOutOfRange(beta))
        }
    }

    /// Total dispatch for diagnostics; anything at or below the boundary is
    /// treated as low, everything else as high.
    pub fn from_launch(beta: f64) -> BetaRegime {
        if beta <= low_sup() {
            BetaRegime::Low
        } else {
            BetaRegime::High
        }
    }
}

/// Which launch family the envelope set certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// alpha = 0, bounds on both sides of t = 0.
    Symmetric,
    /// alpha >= 0, forward bounds only.
    General,
}

/// Coefficient variant of the forward scalar lower bound. The two published
/// renderings of the same bound disagree by a factor of two inside the square
/// root; `Standard` (24 beta^2 / 5) is the derivable one and the weaker, hence
/// safe, lower bound. `Doubled` (48 beta^2 / 5) is kept for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiLowerForm {
    Standard,
    Doubled,
}

/// Margin by which x clears a floor, normalized by the size of the numbers
/// actually compared: (x - lo) / max(1, |x|, |lo|). Absolute for order-one
/// values, relative once either side is large.
pub fn lower_margin(x: f64, lo: f64) -> f64 {
    (x - lo) / x.abs().max(lo.abs()).max(1.0)
}

/// Margin by which x stays under a ceiling; same normalization.
pub fn upper_margin(x: f64, up: f64) -> f64 {
    (up - x) / x.abs().max(up.abs()).max(1.0)
}

/// S(x) = x + arctan(x); strictly increasing, S' in (1, 2].
pub fn s(x: f64) -> f64 {
    x + x.atan()
}

/// Unique root of S(x) = y by safeguarded Newton, |S(x) - y| <= 1e-12.
///
/// Since |arctan| < pi/2 the root lies in [y - pi/2, y + pi/2]; the start
/// point clamps the arctan correction, and any Newton iterate leaving the
/// bracket falls back to bisection.
pub fn s_inv(y: f64) -> Result<f64, EnvelopeError> {
    let mut x = y - y.signum() * y.abs().min(FRAC_PI_2);
    let (mut lo, mut hi) = (y - FRAC_PI_2, y + FRAC_PI_2);
    for _ in 0..100 {
        let fx = s(x) - y;
        if fx.abs() <= 1e-12 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let slope = 1.0 + 1.0 / (1.0 + x * x);
        let next = x - fx / slope;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    Err(EnvelopeError::NonConvergence { y })
}

// Forward (t >= 0) closed forms, valid for 0 < beta < sqrt(3)/3. a-bounds
// are ratios to the launch scale factor.

pub fn h_lower_fwd(beta: f64, t: f64) -> f64 {
    1.0 / (5.0 * t + 1.0 / beta)
}

pub fn h_upper_fwd(beta: f64, t: f64) -> f64 {
    1.0 / (t + 1.0 / beta)
}

pub fn phi_lower_fwd(beta: f64, t: f64, form: PhiLowerForm) -> f64 {
    let c = match form {
        PhiLowerForm::Standard => 24.0,
        PhiLowerForm::Doubled => 48.0,
    } * beta * beta
        / 5.0;
    let log = (1.0 + 5.0 * beta * t).ln();
    (-1.0 + (1.0 + c * log).sqrt()) / (4.0 * 3f64.sqrt() * beta * beta)
}

pub fn phi_upper_fwd(beta: f64, alpha: f64, t: f64) -> f64 {
    3f64.sqrt() * (beta * t + 1.0).ln() + alpha
}

pub fn phidot_lower_fwd(beta: f64, alpha: f64, t: f64) -> f64 {
    let log = (beta * t + 1.0).ln() + alpha;
    3f64.sqrt() / (5.0 * t + 1.0 / beta) / (1.0 + 12.0 * beta * beta * log).sqrt()
}

pub fn phidot_upper_fwd(beta: f64, t: f64) -> f64 {
    3f64.sqrt() / (t + 1.0 / beta)
}

pub fn a_lower_fwd(beta: f64, t: f64) -> f64 {
    (5.0 * beta * t + 1.0).powf(0.2)
}

pub fn a_upper_fwd(beta: f64, t: f64) -> f64 {
    beta * t + 1.0
}

// Backward (t <= 0) closed forms.

pub fn h_upper_bwd(beta: f64, t: f64) -> f64 {
    let r2 = 2f64.sqrt();
    let e = (3.0 * r2 * t).exp();
    (2.0 * beta + r2 - (r2 - 2.0 * beta) * e) / (r2 * (2.0 * beta + r2 + (r2 - 2.0 * beta) * e))
}

pub fn h_lower_bwd(beta: f64, t: f64, regime: BetaRegime) -> f64 {
    match regime {
        BetaRegime::Low => 227.0 * beta / (2.0 * (454.0 * beta * t / 45.0).exp() + 225.0),
        BetaRegime::High => 2.0 * beta / (5.0 * beta - (5.0 * beta - 2.0) * (4.0 * t).exp()),
    }
}

/// Sharper backward Hubble lower bound 1/S_inv(S(1/beta) - 6t); dominates
/// [`h_lower_bwd`]'s simple rational floor 1/(1/beta - 6t) for t < 0.
pub fn h_lower_bwd_sharp(beta: f64, t: f64) -> Result<f64, EnvelopeError> {
    Ok(1.0 / s_inv(s(1.0 / beta) - 6.0 * t)?)
}

pub fn phi_lower_bwd(t: f64) -> f64 {
    3f64.sqrt() / 12.0 * (1.0 - (-12.0 * t).exp())
}

pub fn phi_upper_bwd(beta: f64, t: f64, regime: BetaRegime) -> f64 {
    match regime {
        BetaRegime::Low => {
            3f64.sqrt() / (6.0 * beta * beta) * (1.0 - (-6.0 * beta.powi(3) * t).exp())
        }
        BetaRegime::High => 25.0 * 3f64.sqrt() / 24.0 * (1.0 - (-48.0 * t / 125.0).exp()),
    }
}

pub fn phidot_lower_bwd(beta: f64, t: f64, regime: BetaRegime) -> f64 {
    match regime {
        BetaRegime::Low => 3f64.sqrt() * beta * (-6.0 * beta.powi(3) * t).exp(),
        BetaRegime::High => 2.0 * 3f64.sqrt() / 5.0 * (-48.0 * t / 125.0).exp(),
    }
}

pub fn phidot_upper_bwd(t: f64) -> f64 {
    3f64.sqrt() * (-12.0 * t).exp()
}

pub fn a_lower_bwd(beta: f64, t: f64) -> f64 {
    let r2 = 2f64.sqrt();
    let e = (3.0 * r2 * t).exp();
    (2.0 / ((r2 * beta + 1.0) + (1.0 - r2 * beta) * e)).powf(1.0 / 3.0) * (r2 * t / 2.0).exp()
}

pub fn a_upper_bwd(beta: f64, t: f64, regime: BetaRegime) -> f64 {
    match regime {
        BetaRegime::Low => {
            (227.0 / (225.0 * (-454.0 * beta * t / 45.0).exp() + 2.0)).powf(0.1)
        }
        BetaRegime::High => {
            (2.0 / (5.0 * beta * (-4.0 * t).exp() - (5.0 * beta - 2.0))).powf(0.1)
        }
    }
}

/// All envelope formulas for one launch, with mode and regime resolved once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSet {
    pub beta: f64,
    pub alpha: f64,
    pub mode: Mode,
    pub regime: BetaRegime,
}

impl EnvelopeSet {
    pub fn new(beta: f64, alpha: f64, mode: Mode) -> Result<EnvelopeSet, EnvelopeError> {
        let regime = BetaRegime::of(beta)?;
        match mode {
            Mode::Symmetric if alpha != 0.0 => return Err(EnvelopeError::AlphaInvalid(alpha)),
            Mode::General if alpha < 0.0 => return Err(EnvelopeError::AlphaInvalid(alpha)),
            _ => {}
        }
        Ok(EnvelopeSet { beta, alpha, mode, regime })
    }

    fn check_side(&self, t: f64) -> Result<(), EnvelopeError> {
        if self.mode == Mode::General && t < 0.0 {
            Err(EnvelopeError::NegativeTime(t))
        } else {
            Ok(())
        }
    }

    /// Hubble bracket. t = 0 belongs to the forward branch, where all four
    /// formulas pinch to beta.
    pub fn h_bounds(&self, t: f64) -> Result<(f64, f64), EnvelopeError> {
        self.check_side(t)?;
        if t >= 0.0 {
            Ok((h_lower_fwd(self.beta, t), h_upper_fwd(self.beta, t)))
        } else {
            Ok((h_lower_bwd(self.beta, t, self.regime), h_upper_bwd(self.beta, t)))
        }
    }

    /// Transcendental variant of the backward Hubble floor; defined for
    /// t <= 0 only.
    pub fn h_lower_sharp(&self, t: f64) -> Result<f64, EnvelopeError> {
        self.check_side(t)?;
        if t > 0.0 {
            return Err(EnvelopeError::OutsideDomain(t));
        }
        h_lower_bwd_sharp(self.beta, t)
    }

    /// Scalar-field bracket. The forward lower bound carries no alpha shift
    /// (its published form omits one); the forward upper bound gains +alpha.
    pub fn phi_bounds(&self, t: f64) -> Result<(f64, f64), EnvelopeError> {
        self.check_side(t)?;
        if t >= 0.0 {
            Ok((
                phi_lower_fwd(self.beta, t, PhiLowerForm::Standard),
                phi_upper_fwd(self.beta, self.alpha, t),
            ))
        } else {
            Ok((phi_lower_bwd(t), phi_upper_bwd(self.beta, t, self.regime)))
        }
    }

    /// Forward scalar lower bound in a chosen coefficient variant.
    pub fn phi_lower_variant(&self, t: f64, form: PhiLowerForm) -> Result<f64, EnvelopeError> {
        if t < 0.0 {
            return Err(EnvelopeError::OutsideDomain(t));
        }
        Ok(phi_lower_fwd(self.beta, t, form))
    }

    /// Scalar-velocity bracket.
    pub fn phidot_bounds(&self, t: f64) -> Result<(f64, f64), EnvelopeError> {
        self.check_side(t)?;
        if t >= 0.0 {
            Ok((
                phidot_lower_fwd(self.beta, self.alpha, t),
                phidot_upper_fwd(self.beta, t),
            ))
        } else {
            Ok((phidot_lower_bwd(self.beta, t, self.regime), phidot_upper_bwd(t)))
        }
    }

    /// Scale-factor bracket for launch value a0.
    pub fn a_bounds(&self, t: f64, a0: f64) -> Result<(f64, f64), EnvelopeError> {
        assert!(a0 > 0.0, "scale factor must be positive");
        self.check_side(t)?;
        if t >= 0.0 {
            Ok((a0 * a_lower_fwd(self.beta, t), a0 * a_upper_fwd(self.beta, t)))
        } else {
            Ok((
                a0 * a_lower_bwd(self.beta, t),
                a0 * a_upper_bwd(self.beta, t, self.regime),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::solve_phidot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn symmetric(beta: f64) -> EnvelopeSet {
        EnvelopeSet::new(beta, 0.0, Mode::Symmetric).unwrap()
    }

    #[test]
    fn s_reference_points() {
        assert_eq!(s(0.0), 0.0);
        assert!((s(1.0) - 1.78539816339744831).abs() <= 1e-15);
        assert_eq!(s_inv(0.0).unwrap(), 0.0);
        assert!((s_inv(1.78539816339744831).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn s_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-1e3..1e3);
            let back = s_inv(s(x)).unwrap();
            assert!((back - x).abs() <= 1e-10, "x={x} back={back}");
        }
    }

    #[test]
    fn regime_split() {
        assert_eq!(BetaRegime::of(0.1).unwrap(), BetaRegime::Low);
        assert_eq!(BetaRegime::of(low_sup()).unwrap(), BetaRegime::Low);
        assert_eq!(BetaRegime::of(low_sup() + 1e-12).unwrap(), BetaRegime::High);
        assert_eq!(BetaRegime::of(0.55).unwrap(), BetaRegime::High);
        assert!(BetaRegime::of(0.0).is_err());
        assert!(BetaRegime::of(beta_sup()).is_err());
        assert!(BetaRegime::of(0.7).is_err());
    }

    #[test]
    fn pinch_at_launch_time() {
        for i in 1..=200 {
            let beta = beta_sup() * i as f64 / 201.0;
            let env = symmetric(beta);
            let tol = 1e-14 * beta.max(1.0);

            let (hl, hu) = env.h_bounds(0.0).unwrap();
            assert!((hl - beta).abs() <= tol && (hu - beta).abs() <= tol, "beta={beta}");

            let (pl, pu) = env.phi_bounds(0.0).unwrap();
            assert_eq!((pl, pu), (0.0, 0.0));

            let (dl, du) = env.phidot_bounds(0.0).unwrap();
            let v0 = solve_phidot(beta, 0.0, crate::initial_data::Branch::Plus);
            assert!((dl - v0).abs() <= 1e-14 && (du - v0).abs() <= 1e-14, "beta={beta}");

            let (al, au) = env.a_bounds(0.0, 2.0).unwrap();
            assert_eq!((al, au), (2.0, 2.0));

            // the sharp backward floor also touches beta at t=0
            let sharp = env.h_lower_sharp(0.0).unwrap();
            assert!((sharp - beta).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_reference_values() {
        let env = symmetric(1.0 / 3.0);
        let (hl, hu) = env.h_bounds(9.0).unwrap();
        assert!((hl - 1.0 / 48.0).abs() <= 1e-16);
        assert!((hu - 1.0 / 12.0).abs() <= 1e-16);

        let (_, pu) = env.phi_bounds((std::f64::consts::E - 1.0) * 3.0).unwrap();
        assert!((pu - 3f64.sqrt()).abs() <= 1e-14);

        let (_, du) = env.phidot_bounds(12.0).unwrap();
        assert!((du - 3f64.sqrt() / 15.0).abs() <= 1e-16);

        let (al, au) = env.a_bounds(3.0, 1.0).unwrap();
        assert!((au - 2.0).abs() <= 1e-15);
        assert!((al - 1.43096908110525550).abs() <= 1e-15, "6^(1/5) vs {al}");
    }

    #[test]
    fn backward_reference_values() {
        let env = symmetric(1.0 / 3.0);
        assert_eq!(env.regime, BetaRegime::Low);

        let (_, pu) = env.phi_bounds(-1.0).unwrap();
        assert!(pu < 0.0);
        assert!((pu - (-0.64652832677544804)).abs() <= 1e-14, "got {pu}");

        let (dl, _) = env.phidot_bounds(-1.0).unwrap();
        assert!((dl - 0.72102323069528088).abs() <= 1e-14, "got {dl}");

        let (_, au) = env.a_bounds(-1.0, 1.0).unwrap();
        assert!(au < 1.0);
        assert!((au - 0.71502189493627952).abs() <= 1e-14, "got {au}");
    }

    #[test]
    fn strict_ordering_everywhere_sampled() {
        for beta in [0.1, 1.0 / 3.0, low_sup(), 0.45, 0.55] {
            let env = symmetric(beta);
            for i in 0..=60 {
                // log-uniform |t| in [1e-3, 1e3] forward, [1e-3, 50] backward
                let tf = 1e-3 * (1e6f64).powf(i as f64 / 60.0);
                let tb = -1e-3 * (5e4f64).powf(i as f64 / 60.0);
                for t in [tf, tb] {
                    let (hl, hu) = env.h_bounds(t).unwrap();
                    assert!(hl < hu, "H order beta={beta} t={t}: {hl} !< {hu}");
                    let (pl, pu) = env.phi_bounds(t).unwrap();
                    assert!(pl < pu, "phi order beta={beta} t={t}");
                    let (dl, du) = env.phidot_bounds(t).unwrap();
                    assert!(dl < du, "phidot order beta={beta} t={t}");
                    let (al, au) = env.a_bounds(t, 1.0).unwrap();
                    assert!(al < au, "a order beta={beta} t={t}");
                }
            }
        }
    }

    #[test]
    fn backward_hubble_asymptotes() {
        // the low-regime floor settles at 227 beta / 225 (strictly above
        // beta), the high-regime floor at 2/5, the ceiling at 1/sqrt(2)
        for beta in [0.1, 1.0 / 3.0, 0.42] {
            let lo = h_lower_bwd(beta, -50.0, BetaRegime::Low);
            assert!((lo - 227.0 * beta / 225.0).abs() <= 1e-6, "beta={beta} lo={lo}");
            assert!(lo > beta);
            let up = h_upper_bwd(beta, -50.0);
            assert!((up - 1.0 / 2f64.sqrt()).abs() <= 1e-6, "beta={beta} up={up}");
        }
        for beta in [0.45, 0.55] {
            let lo = h_lower_bwd(beta, -50.0, BetaRegime::High);
            assert!((lo - 0.4).abs() <= 1e-6, "beta={beta} lo={lo}");
        }
    }

    #[test]
    fn low_regime_floor_exceeds_launch_rate_backward() {
        for beta in [0.05, 0.2, 1.0 / 3.0, low_sup()] {
            for i in 0..=40 {
                let t = -1e-3 * (5e4f64).powf(i as f64 / 40.0);
                assert!(
                    h_lower_bwd(beta, t, BetaRegime::Low) > beta,
                    "beta={beta} t={t}"
                );
            }
        }
    }

    #[test]
    fn sharp_floor_dominates_rational_floor() {
        for beta in [0.1, 1.0 / 3.0, 0.45, 0.55] {
            for i in 0..=50 {
                let t = -1e-3 * (2e4f64).powf(i as f64 / 50.0);
                let sharp = h_lower_bwd_sharp(beta, t).unwrap();
                let simple = 1.0 / (1.0 / beta - 6.0 * t);
                assert!(
                    sharp >= simple - 1e-12,
                    "beta={beta} t={t}: {sharp} < {simple}"
                );
            }
        }
    }

    #[test]
    fn scalar_lower_bound_variants_are_ordered() {
        let env = symmetric(0.3);
        for t in [0.1, 1.0, 10.0, 500.0] {
            let std = env.phi_lower_variant(t, PhiLowerForm::Standard).unwrap();
            let dbl = env.phi_lower_variant(t, PhiLowerForm::Doubled).unwrap();
            assert!(dbl > std, "t={t}");
        }
        assert!(env.phi_lower_variant(-1.0, PhiLowerForm::Standard).is_err());
    }

    #[test]
    fn elementary_inequalities_hold_on_log_range() {
        // sqrt(1+x^2) < 1+x, sqrt(1+x^2) > 1, and the reciprocal rendering
        // of sqrt(1+x^2) - x > 1/(1+2x); the difference form loses to
        // cancellation above x ~ 1e5, the reciprocal form does not
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100_000 {
            let x = 10f64.powf(rng.gen_range(-7.0..7.0));
            let r = (1.0 + x * x).sqrt();
            assert!(r < 1.0 + x, "x={x}");
            assert!(r > 1.0, "x={x}");
            assert!(1.0 / (r + x) > 1.0 / (1.0 + 2.0 * x), "x={x}");
        }
    }

    #[test]
    fn low_regime_quadratic_balance_is_nonpositive() {
        // 2x^2 + 454 beta/(135 x) - 56/15 stays below zero strictly inside
        // beta < x < 1 for every admissible low-regime beta
        for j in 1..=40 {
            let beta = low_sup() * j as f64 / 40.0;
            for k in 1..=60 {
                let x = beta + (1.0 - beta) * k as f64 / 61.0;
                let f = 2.0 * x * x + 454.0 * beta / (135.0 * x) - 56.0 / 15.0;
                assert!(f < 0.0, "beta={beta} x={x} f={f}");
            }
        }
    }

    #[test]
    fn high_regime_quadratic_balance_is_negative() {
        for k in 1..=199 {
            let x = 0.4 + 0.6 * k as f64 / 200.0;
            let g = 2.0 * x * x + 4.0 / (3.0 * x) - 100.0 / 27.0;
            assert!(g < 0.0, "x={x} g={g}");
        }
    }

    #[test]
    fn mode_and_range_gating() {
        assert!(matches!(
            EnvelopeSet::new(0.7, 0.0, Mode::Symmetric),
            Err(EnvelopeError::BetaOutOfRange(_))
        ));
        assert!(matches!(
            EnvelopeSet::new(0.3, 0.5, Mode::Symmetric),
            Err(EnvelopeError::AlphaInvalid(_))
        ));
        assert!(matches!(
            EnvelopeSet::new(0.3, -0.5, Mode::General),
            Err(EnvelopeError::AlphaInvalid(_))
        ));

        let gen = EnvelopeSet::new(0.5, 1.0, Mode::General).unwrap();
        assert!(matches!(gen.h_bounds(-1.0), Err(EnvelopeError::NegativeTime(_))));
        assert!(gen.h_bounds(0.0).is_ok());

        // alpha enters the forward scalar ceiling and velocity floor
        let (_, pu) = gen.phi_bounds(2.0).unwrap();
        assert!((pu - (3f64.sqrt() * 2f64.ln() + 1.0)).abs() <= 1e-15);
        let (dl, _) = gen.phidot_bounds(0.0).unwrap();
        let plain = symmetric(0.5).phidot_bounds(0.0).unwrap().0;
        assert!(dl < plain);
    }
}
