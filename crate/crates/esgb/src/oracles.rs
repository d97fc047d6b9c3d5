//! Proof-side diagnostics: the sign-definite B combinations that drive the
//! envelope derivations, and a registry of scalar comparison problems whose
//! closed forms cross-validate the integrator.
//!
//! Every comparison entry pairs a closed-form solution with the scalar ODE
//! it solves and the initial value it grows from; agreement between direct
//! integration of that ODE and the closed form is the equivalence check. The
//! closed forms themselves are the envelope functions, housed once in the
//! envelopes module and referenced here, so the two views cannot drift apart.

use crate::envelopes::{self, BetaRegime, EnvelopeError, PhiLowerForm};
use crate::field_equations::{CosmoState, RhsValue};
use crate::integrator::{integrate_scalar, ScalarError, Trajectory};
use std::fmt;
use thiserror::Error;

/// Slack absorbing floating noise in sign checks near t = 0, where several
/// B combinations vanish only in limits.
pub const TOL_SIGN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BName {
    B1,
    B2,
    B3,
    B4,
    B5,
}

impl fmt::Display for BName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BName::B1 => "B1",
            BName::B2 => "B2",
            BName::B3 => "B3",
            BName::B4 => "B4",
            BName::B5 => "B5",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "> 0",
            Sign::Negative => "< 0",
        })
    }
}

/// Which side of the launch time a sign claim covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSide {
    Positive,
    Negative,
}

impl fmt::Display for TimeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeSide::Positive => "t > 0",
            TimeSide::Negative => "t < 0",
        })
    }
}

/// Evaluate a named B combination from a state and the dH the integrator
/// actually used. B5's coefficient dispatches on the launch rate, fixed for
/// the whole run.
pub fn eval_b(name: BName, state: &CosmoState, dh: f64, beta: f64) -> f64 {
    let h = state.h;
    let h2 = h * h;
    match name {
        BName::B1 => dh + 5.0 * h2,
        BName::B2 => dh - 6.0 * h2 * h2 - 6.0 * h2,
        BName::B3 => dh + h2,
        BName::B4 => dh - 3.0 * h2 + 1.5,
        BName::B5 => {
            let c = match BetaRegime::from_launch(beta) {
                BetaRegime::Low => 454.0 * beta / 45.0,
                BetaRegime::High => 4.0,
            };
            dh - 10.0 * h2 + c * h
        }
    }
}

/// Outcome of one sign claim over one trajectory scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSignVerdict {
    pub name: BName,
    pub expected: Sign,
    pub side: TimeSide,
    /// Smallest signed margin seen; positive means the claim held with room.
    pub min_margin: f64,
    pub worst_t: f64,
    pub samples_checked: usize,
    pub violated: bool,
}

const SIGN_PLAN: [(BName, Sign, TimeSide); 5] = [
    (BName::B1, Sign::Positive, TimeSide::Positive),
    (BName::B2, Sign::Negative, TimeSide::Negative),
    (BName::B3, Sign::Negative, TimeSide::Positive),
    (BName::B4, Sign::Positive, TimeSide::Negative),
    (BName::B5, Sign::Negative, TimeSide::Negative),
];

/// Scan samples with their slopes and grade all five sign claims.
pub fn check_signs_over<'a>(
    samples: impl IntoIterator<Item = (&'a CosmoState, &'a RhsValue)>,
    beta: f64,
) -> Vec<BSignVerdict> {
    let mut margins = [(f64::INFINITY, f64::NAN, 0usize); 5];
    for (state, deriv) in samples {
        let side = if state.t > 0.0 {
            TimeSide::Positive
        } else if state.t < 0.0 {
            TimeSide::Negative
        } else {
            continue;
        };
        for (slot, (name, expected, claim_side)) in SIGN_PLAN.iter().enumerate() {
            if *claim_side != side {
                continue;
            }
            let value = eval_b(*name, state, deriv.dh, beta);
            let margin = match expected {
                Sign::Positive => value,
                Sign::Negative => -value,
            };
            let entry = &mut margins[slot];
            entry.2 += 1;
            if margin < entry.0 {
                entry.0 = margin;
                entry.1 = state.t;
            }
        }
    }
    SIGN_PLAN
        .iter()
        .zip(margins)
        .map(|((name, expected, side), (min_margin, worst_t, samples_checked))| BSignVerdict {
            name: *name,
            expected: *expected,
            side: *side,
            min_margin,
            worst_t,
            samples_checked,
            violated: samples_checked > 0 && min_margin < -TOL_SIGN,
        })
        .collect()
}

/// Grade the sign claims over one trajectory's accepted samples.
pub fn check_signs(traj: &Trajectory, beta: f64) -> Vec<BSignVerdict> {
    check_signs_over(traj.samples.iter().zip(traj.derivs.iter()), beta)
}

/// Closed-form comparison solutions available for cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonKind {
    /// Forward Hubble floor 1/(5t + 1/beta).
    HLowerFwd,
    /// Forward Hubble ceiling 1/(t + 1/beta).
    HUpperFwd,
    /// Backward Hubble ceiling approaching 1/sqrt(2).
    HUpperBwd,
    /// Backward transcendental Hubble floor via S_inv.
    HLowerBwdSharp,
    /// Backward low-regime Hubble floor approaching 227 beta / 225.
    HLowerBwdLow,
    /// Backward high-regime Hubble floor approaching 2/5.
    HLowerBwdHigh,
    /// Backward scalar floor sqrt(3)/12 (1 - e^{-12t}).
    PhiLowerBwd,
    /// Forward scalar ceiling sqrt(3) ln(beta t + 1).
    PhiUpperFwd,
    /// Forward scalar floor, standard coefficient.
    PhiLowerFwd,
}

impl ComparisonKind {
    pub const ALL: [ComparisonKind; 9] = [
        ComparisonKind::HLowerFwd,
        ComparisonKind::HUpperFwd,
        ComparisonKind::HUpperBwd,
        ComparisonKind::HLowerBwdSharp,
        ComparisonKind::HLowerBwdLow,
        ComparisonKind::HLowerBwdHigh,
        ComparisonKind::PhiLowerBwd,
        ComparisonKind::PhiUpperFwd,
        ComparisonKind::PhiLowerFwd,
    ];

    fn forward(self) -> bool {
        matches!(
            self,
            ComparisonKind::HLowerFwd
                | ComparisonKind::HUpperFwd
                | ComparisonKind::PhiUpperFwd
                | ComparisonKind::PhiLowerFwd
        )
    }
}

/// Evaluate the named closed form. Forward kinds cover t >= 0, backward
/// kinds t <= 0; outside that the formulas leave their validity range.
pub fn comparison_solution(
    kind: ComparisonKind,
    beta: f64,
    t: f64,
) -> Result<f64, EnvelopeError> {
    if (kind.forward() && t < 0.0) || (!kind.forward() && t > 0.0) {
        return Err(EnvelopeError::OutsideDomain(t));
    }
    Ok(match kind {
        ComparisonKind::HLowerFwd => envelopes::h_lower_fwd(beta, t),
        ComparisonKind::HUpperFwd => envelopes::h_upper_fwd(beta, t),
        ComparisonKind::HUpperBwd => envelopes::h_upper_bwd(beta, t),
        ComparisonKind::HLowerBwdSharp => envelopes::h_lower_bwd_sharp(beta, t)?,
        ComparisonKind::HLowerBwdLow => envelopes::h_lower_bwd(beta, t, BetaRegime::Low),
        ComparisonKind::HLowerBwdHigh => envelopes::h_lower_bwd(beta, t, BetaRegime::High),
        ComparisonKind::PhiLowerBwd => envelopes::phi_lower_bwd(t),
        ComparisonKind::PhiUpperFwd => envelopes::phi_upper_fwd(beta, 0.0, t),
        ComparisonKind::PhiLowerFwd => {
            envelopes::phi_lower_fwd(beta, t, PhiLowerForm::Standard)
        }
    })
}

/// One registry row: the closed form's defining scalar ODE y' = f(beta, t, y),
/// its launch value, and the far end of its validation interval (the near end
/// is always 0).
pub struct ComparisonSpec {
    pub kind: ComparisonKind,
    pub ode: fn(f64, f64, f64) -> f64,
    pub y0: fn(f64) -> f64,
    pub t_check: f64,
}

/// Defining ODEs for every comparison solution.
///
/// The transcendental floor is driven by y' = 6y^2(1+y^2)/(1+2y^2): writing
/// y = 1/x turns it into x' + arctan'(x) x' = -6, which integrates to
/// S(x(t)) = S(x(0)) - 6t with S(x) = x + arctan x, exactly the implicit
/// form the closed form inverts.
pub fn registry() -> [ComparisonSpec; 9] {
    [
        ComparisonSpec {
            kind: ComparisonKind::HLowerFwd,
            ode: |_b, _t, y| -5.0 * y * y,
            y0: |b| b,
            t_check: 100.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::HUpperFwd,
            ode: |_b, _t, y| -y * y,
            y0: |b| b,
            t_check: 100.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::HUpperBwd,
            ode: |_b, _t, y| 3.0 * y * y - 1.5,
            y0: |b| b,
            t_check: -20.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::HLowerBwdSharp,
            ode: |_b, _t, y| {
                let y2 = y * y;
                6.0 * y2 * (1.0 + y2) / (1.0 + 2.0 * y2)
            },
            y0: |b| b,
            t_check: -20.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::HLowerBwdLow,
            ode: |b, _t, y| 10.0 * y * y - 454.0 * b / 45.0 * y,
            y0: |b| b,
            t_check: -20.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::HLowerBwdHigh,
            ode: |_b, _t, y| 10.0 * y * y - 4.0 * y,
            y0: |b| b,
            t_check: -20.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::PhiLowerBwd,
            ode: |_b, _t, y| 3f64.sqrt() - 12.0 * y,
            y0: |_b| 0.0,
            t_check: -5.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::PhiUpperFwd,
            ode: |b, t, _y| 3f64.sqrt() / (t + 1.0 / b),
            y0: |_b| 0.0,
            t_check: 100.0,
        },
        ComparisonSpec {
            kind: ComparisonKind::PhiLowerFwd,
            ode: |b, t, y| {
                3f64.sqrt() / (5.0 * t + 1.0 / b) / (1.0 + 4.0 * 3f64.sqrt() * b * b * y)
            },
            y0: |_b| 0.0,
            t_check: 100.0,
        },
    ]
}

/// Launch rates that exercise each registry entry in its meaningful regime.
pub fn representative_betas(kind: ComparisonKind) -> &'static [f64] {
    match kind {
        ComparisonKind::HLowerBwdLow => &[0.1, 1.0 / 3.0],
        ComparisonKind::HLowerBwdHigh => &[0.45, 0.55],
        _ => &[1.0 / 3.0, 0.45],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Integrate one registry entry's ODE from 0 to its far checkpoint through
/// eight intermediate stops, comparing against the closed form at each;
/// returns the worst relative deviation (relative to max(1, |closed|)).
pub fn validate_entry(
    entry: &ComparisonSpec,
    beta: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64, OracleError> {
    let checkpoints = 8;
    let mut worst = 0.0f64;
    let mut t_prev = 0.0;
    let mut y = (entry.y0)(beta);
    for i in 1..=checkpoints {
        let t_i = entry.t_check * i as f64 / checkpoints as f64;
        y = integrate_scalar(|t, v| (entry.ode)(beta, t, v), t_prev, y, t_i, rtol, atol)?;
        let closed = comparison_solution(entry.kind, beta, t_i)?;
        let dev = (y - closed).abs() / closed.abs().max(1.0);
        if dev > worst {
            worst = dev;
        }
        t_prev = t_i;
    }
    Ok(worst)
}
