//! Constraint-exact initial data and launch-parameter classification.
//!
//! Free data is (a0, beta, alpha, s): scale factor, Hubble rate and scalar
//! value at t = 0, plus a branch sign. The scalar velocity is never free; it
//! is the chosen root of the momentum constraint, which is quadratic in Phi.
//! The branch must be stored, not inferred from the sign of the root: for
//! alpha < 0 both roots can be positive.

use crate::field_equations::CosmoState;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Root selector for the constraint quadratic. `Plus` is the branch the
/// certified bounds assume; `Minus` exists for exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+1",
            Branch::Minus => "-1",
        })
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" | "+" | "plus" => Ok(Branch::Plus),
            "-1" | "-" | "minus" => Ok(Branch::Minus),
            other => Err(format!("branch must be +1 or -1, got {other:?}")),
        }
    }
}

/// Free launch parameters; everything else at t = 0 is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeData {
    pub a0: f64,
    pub beta: f64,
    pub alpha: f64,
    pub s: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum InitialDataError {
    #[error("kappa denominator {0:.3e} is zero or negative")]
    DegenerateDenominator(f64),
}

/// Scalar velocity solving the momentum constraint at (H, phi) = (beta, alpha):
/// Phi = -6 alpha beta^3 + s sqrt((6 alpha beta^3)^2 + 3 beta^2).
///
/// The root on the side opposing sign(q) is computed through the root
/// product Phi+ Phi- = -3 beta^2; the textbook form loses half the mantissa
/// to cancellation there once |q| dominates the radicand.
pub fn solve_phidot(beta: f64, alpha: f64, s: Branch) -> f64 {
    let q = 6.0 * alpha * beta * beta * beta;
    let r = (q * q + 3.0 * beta * beta).sqrt();
    match s {
        Branch::Plus => {
            if q <= 0.0 {
                -q + r
            } else {
                3.0 * beta * beta / (q + r)
            }
        }
        Branch::Minus => {
            if q >= 0.0 {
                -q - r
            } else {
                -(3.0 * beta * beta) / (r - q)
            }
        }
    }
}

/// Plus-branch velocity; strictly positive whenever beta != 0.
pub fn gamma_of(beta: f64, alpha: f64) -> f64 {
    solve_phidot(beta, alpha, Branch::Plus)
}

/// Launch value of dH/dt for plus-branch data, straight from the evolution
/// equation with (H, phi, Phi) = (beta, alpha, gamma).
///
/// The alpha = 0 reduction 6 beta^4 - 3 beta^2 is deliberately not special
/// cased; it serves as a test oracle on this single code path.
pub fn kappa_of(beta: f64, alpha: f64) -> Result<f64, InitialDataError> {
    let g = gamma_of(beta, alpha);
    let b2 = beta * beta;
    let b3 = b2 * beta;
    let denominator = 2.0 - 8.0 * beta * alpha * g + 24.0 * b2 * b2 * alpha * alpha;
    if denominator <= 0.0 {
        return Err(InitialDataError::DegenerateDenominator(denominator));
    }
    let numerator = -4.0 * b3 * alpha * g - g * g + 4.0 * b2 * g * g
        - 24.0 * b3 * b3 * alpha * alpha
        - 3.0 * b2;
    Ok(numerator / denominator)
}

/// Verdict on launch data against the two admissibility regimes.
///
/// `symmetric_ok` is the alpha = 0 regime (two-sided global existence);
/// `general_ok` is the alpha >= 0 regime gated by the kappa window
/// -5 beta^2 < kappa < -beta^2 (forward global existence). All inequalities
/// are strict; boundary hits are reported as such in `reasons`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataClassification {
    pub kappa: f64,
    pub gamma: f64,
    pub phidot0: f64,
    pub symmetric_ok: bool,
    pub general_ok: bool,
    pub reasons: Vec<String>,
}

/// Supremum of the admissible Hubble range, sqrt(3)/3.
pub fn beta_sup() -> f64 {
    3f64.sqrt() / 3.0
}

pub fn classify(data: &FreeData) -> DataClassification {
    let FreeData { a0, beta, alpha, s } = *data;
    let gamma = gamma_of(beta, alpha);
    let phidot0 = solve_phidot(beta, alpha, s);
    let kappa = kappa_of(beta, alpha).unwrap_or(f64::NAN);
    let mut reasons = Vec::new();

    let mut symmetric_ok = true;
    let mut general_ok = true;

    if a0 <= 0.0 {
        symmetric_ok = false;
        general_ok = false;
        reasons.push(format!("a0 = {a0} is not positive"));
    }

    let sup = beta_sup();
    if beta <= 0.0 || beta >= sup {
        symmetric_ok = false;
        general_ok = false;
        if beta == sup {
            reasons.push(format!("beta = {beta} sits on the open boundary sqrt(3)/3"));
        } else {
            reasons.push(format!("beta = {beta} outside (0, sqrt(3)/3)"));
        }
    }

    if alpha != 0.0 {
        symmetric_ok = false;
        reasons.push(format!("alpha = {alpha} nonzero, symmetric launch needs alpha = 0"));
    }
    if alpha < 0.0 {
        general_ok = false;
        reasons.push(format!("alpha = {alpha} negative"));
    }

    if s != Branch::Plus {
        symmetric_ok = false;
        general_ok = false;
        reasons.push("minus branch selected, the certified bounds assume the plus branch".into());
    } else if phidot0 <= 0.0 && beta > 0.0 {
        // cannot happen for the plus branch with beta > 0; kept as a guard
        symmetric_ok = false;
        general_ok = false;
        reasons.push(format!("phidot(0) = {phidot0} not positive"));
    }

    let b2 = beta * beta;
    if kappa.is_nan() {
        general_ok = false;
        reasons.push("kappa undefined, degenerate launch denominator".into());
    } else if !(-5.0 * b2 < kappa && kappa < -b2) {
        general_ok = false;
        if kappa == -5.0 * b2 || kappa == -b2 {
            reasons.push(format!("kappa = {kappa} on the open window boundary"));
        } else {
            reasons.push(format!(
                "kappa = {kappa} outside ({}, {})",
                -5.0 * b2,
                -b2
            ));
        }
    }

    DataClassification {
        kappa,
        gamma,
        phidot0,
        symmetric_ok,
        general_ok,
        reasons,
    }
}

/// Assemble the t = 0 state; the velocity comes from the constraint root.
pub fn make_initial_state(data: &FreeData) -> CosmoState {
    assert!(data.a0 > 0.0, "initial scale factor must be positive");
    CosmoState {
        t: 0.0,
        a: data.a0,
        h: data.beta,
        phi: data.alpha,
        phi_dot: solve_phidot(data.beta, data.alpha, data.s),
    }
}
