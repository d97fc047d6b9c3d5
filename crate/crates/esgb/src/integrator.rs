//! Adaptive Dormand-Prince 5(4) integration of the reduced system in either
//! time direction, with per-step residual monitoring and dense output.
//!
//! Backward runs integrate the reflected system in an internal clock s >= 0
//! with negated right-hand side; the physics code has a single direction.
//! A vetoed rhs evaluation (degenerate denominator) is treated as an event:
//! the step is bisected until the event is located to 1e-10 in t, then the
//! run stops with `DenominatorEvent`.

use crate::field_equations::{
    gb_denominator, normalized_constraint, normalized_power, rhs_with_floor, CosmoState,
    RhsValue, DENOM_FLOOR,
};
use crate::oracles::BSignVerdict;
use thiserror::Error;

/// Tolerances and guards for one integration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; sign is derived from the target time.
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: u64,
    pub denom_floor: f64,
    /// Abort threshold on the normalized constraint residual.
    pub constraint_abort: f64,
    /// Test-only mode: re-solve the scalar velocity from the constraint at
    /// every accepted step. Masks drift by construction; exists to attribute
    /// observed drift to the integrator rather than the equations.
    pub project_each_step: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 1.0,
            max_steps: 10_000_000,
            denom_floor: DENOM_FLOOR,
            constraint_abort: 1e-6,
            project_each_step: false,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) {
        assert!(self.rtol > 0.0 && self.atol > 0.0, "tolerances must be positive");
        assert!(
            self.h_init > 0.0 && self.h_init <= self.h_max,
            "need 0 < h_init <= h_max"
        );
        assert!(self.max_steps >= 1);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    ReachedTEnd,
    DenominatorEvent,
    ConstraintDrift,
    StepBudgetExhausted,
}

/// Residuals recorded at one accepted sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiag {
    /// Normalized constraint residual.
    pub constraint: f64,
    /// Normalized power-identity residual; 0 at H = 0, NaN when no slope
    /// was available (degenerate launch).
    pub power: f64,
    /// Raw shared denominator.
    pub denominator: f64,
}

/// One integration run: accepted samples in step order (t increasing for
/// forward runs, decreasing for backward), matching slopes and diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<CosmoState>,
    pub derivs: Vec<RhsValue>,
    pub diags: Vec<SampleDiag>,
    pub direction: Direction,
    pub terminal_status: TerminalStatus,
    pub max_constraint_residual: f64,
    pub max_power_residual: f64,
    pub min_denominator: f64,
}

/// Aggregated certification record for one trajectory.
#[derive(Debug, Clone)]
pub struct MonitorReport {
    pub max_constraint_residual: f64,
    pub max_power_residual: f64,
    pub min_denominator: f64,
    pub b_verdicts: Vec<BSignVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SampleError {
    #[error("t = {t} outside covered interval [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScalarError {
    #[error("step budget exhausted before reaching the end time")]
    BudgetExhausted,
    #[error("integration stalled near t = {0}")]
    Stalled(f64),
}

// Dormand-Prince 5(4) tableau. E-row is b minus the embedded 4th-order
// weights, so the error estimate comes for free from the same stages.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Event localization width for vetoed evaluations, absolute in t.
const EVENT_LOCATE_TOL: f64 = 1e-10;

pub(crate) enum RawStatus {
    ReachedEnd,
    VetoStop { s: f64 },
    BudgetExhausted,
    Aborted,
}

pub(crate) enum AcceptAction<const N: usize> {
    Continue,
    /// Swap the integration state for a corrected one; the stepper refreshes
    /// its cached first stage.
    Replace([f64; N]),
    Abort,
}

pub(crate) struct RawOpts {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

enum Stages<const N: usize> {
    Vetoed,
    Done { y_new: [f64; N], k_new: [f64; N], err: f64 },
}

fn stages<const N: usize>(
    f: &mut dyn FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
    s: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Stages<N> {
    let mut yt = [0.0; N];

    for i in 0..N {
        yt[i] = y[i] + h * (A21 * k1[i]);
    }
    let Some(k2) = f(s + C2 * h, &yt) else { return Stages::Vetoed };

    for i in 0..N {
        yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let Some(k3) = f(s + C3 * h, &yt) else { return Stages::Vetoed };

    for i in 0..N {
        yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let Some(k4) = f(s + C4 * h, &yt) else { return Stages::Vetoed };

    for i in 0..N {
        yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let Some(k5) = f(s + C5 * h, &yt) else { return Stages::Vetoed };

    for i in 0..N {
        yt[i] = y[i]
            + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let Some(k6) = f(s + h, &yt) else { return Stages::Vetoed };

    let mut y_new = [0.0; N];
    for i in 0..N {
        y_new[i] =
            y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
    }
    let Some(k_new) = f(s + h, &y_new) else { return Stages::Vetoed };

    // weighted RMS of the embedded difference
    let mut acc = 0.0;
    for i in 0..N {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                + E7 * k_new[i]);
        let w = atol + rtol * y[i].abs().max(y_new[i].abs());
        let q = e / w;
        acc += q * q;
    }
    let err = (acc / N as f64).sqrt();

    Stages::Done { y_new, k_new, err }
}

/// Core stepper on the internal clock s in [0, span]. The callback sees every
/// accepted step; `f` returning None vetoes an evaluation and triggers event
/// bisection.
pub(crate) fn dopri5_raw<const N: usize>(
    f: &mut dyn FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
    span: f64,
    y0: [f64; N],
    opts: &RawOpts,
    on_accept: &mut dyn FnMut(f64, &[f64; N], &[f64; N]) -> AcceptAction<N>,
) -> RawStatus {
    debug_assert!(span > 0.0);
    let mut s = 0.0;
    let mut y = y0;
    let mut k1 = match f(0.0, &y) {
        Some(k) => k,
        None => return RawStatus::VetoStop { s: 0.0 },
    };
    let mut h = opts.h_init.min(opts.h_max).min(span);
    let mut err_old: f64 = 1e-4;
    let min_step = (span * 1e-14).max(1e-300);
    let mut steps: u64 = 0;

    loop {
        if s >= span {
            return RawStatus::ReachedEnd;
        }
        if steps >= opts.max_steps {
            return RawStatus::BudgetExhausted;
        }
        steps += 1;

        let remaining = span - s;
        let (h_step, hits_end) = if h >= remaining { (remaining, true) } else { (h, false) };

        match stages(f, s, &y, &k1, h_step, opts.rtol, opts.atol) {
            Stages::Vetoed => {
                // singular surface ahead; bisect toward it
                h = h_step * 0.5;
                if h <= EVENT_LOCATE_TOL {
                    return RawStatus::VetoStop { s };
                }
            }
            Stages::Done { y_new, k_new, err } => {
                if err <= 1.0 {
                    s = if hits_end { span } else { s + h_step };
                    y = y_new;
                    k1 = k_new;
                    match on_accept(s, &y, &k1) {
                        AcceptAction::Continue => {}
                        AcceptAction::Replace(y_rep) => {
                            y = y_rep;
                            k1 = match f(s, &y) {
                                Some(k) => k,
                                None => return RawStatus::VetoStop { s },
                            };
                        }
                        AcceptAction::Abort => return RawStatus::Aborted,
                    }
                    // PI controller (Gustafsson): react to the error history,
                    // not just the last step
                    let fac = err.max(1e-12).powf(0.17) / err_old.powf(0.04);
                    h = (h_step * (0.9 / fac).clamp(0.2, 5.0)).min(opts.h_max);
                    err_old = err.max(1e-4);
                } else {
                    let scale = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                    } else {
                        // NaN or overflow in the trial step
                        0.5
                    };
                    h = h_step * scale;
                    if h < min_step {
                        return RawStatus::BudgetExhausted;
                    }
                }
            }
        }
    }
}

/// Nearest constraint root to the current velocity, used by the projected
/// test mode.
fn project_phidot(state: &CosmoState) -> f64 {
    let q = 6.0 * state.phi * state.h * state.h * state.h;
    let r = (q * q + 3.0 * state.h * state.h).sqrt();
    let plus = -q + r;
    let minus = -q - r;
    if (state.phi_dot - plus).abs() <= (state.phi_dot - minus).abs() {
        plus
    } else {
        minus
    }
}

fn diag_for(state: &CosmoState, deriv: Option<&RhsValue>) -> SampleDiag {
    let power = match deriv {
        Some(r) if state.h != 0.0 => normalized_power(state, r.dh).unwrap_or(f64::NAN),
        Some(_) => 0.0,
        None => f64::NAN,
    };
    SampleDiag {
        constraint: normalized_constraint(state),
        power,
        denominator: gb_denominator(state),
    }
}

/// Integrate from `state0` to `t_end`, either direction. Physics failures
/// are encoded in `terminal_status`, never panics.
pub fn integrate(state0: &CosmoState, t_end: f64, cfg: &IntegratorConfig) -> Trajectory {
    cfg.validate();
    assert!(t_end != state0.t, "t_end must differ from the launch time");

    let dir: f64 = if t_end > state0.t { 1.0 } else { -1.0 };
    let direction = if dir > 0.0 { Direction::Forward } else { Direction::Backward };
    let span = (t_end - state0.t).abs();
    let t0 = state0.t;

    let mut samples: Vec<CosmoState> = Vec::new();
    let mut derivs: Vec<RhsValue> = Vec::new();
    let mut diags: Vec<SampleDiag> = Vec::new();

    let finish = |samples: Vec<CosmoState>,
                  derivs: Vec<RhsValue>,
                  diags: Vec<SampleDiag>,
                  terminal_status: TerminalStatus| {
        let max_constraint_residual =
            diags.iter().map(|d| d.constraint.abs()).fold(0.0, f64::max);
        let max_power_residual = diags
            .iter()
            .map(|d| d.power.abs())
            .filter(|p| p.is_finite())
            .fold(0.0, f64::max);
        let min_denominator = diags.iter().map(|d| d.denominator).fold(f64::INFINITY, f64::min);
        Trajectory {
            samples,
            derivs,
            diags,
            direction,
            terminal_status,
            max_constraint_residual,
            max_power_residual,
            min_denominator,
        }
    };

    // launch record and pre-checks
    let r0 = rhs_with_floor(state0, cfg.denom_floor);
    match &r0 {
        Ok(r) => {
            samples.push(*state0);
            derivs.push(*r);
            diags.push(diag_for(state0, Some(r)));
        }
        Err(_) => {
            samples.push(*state0);
            derivs.push(RhsValue::ZERO);
            diags.push(diag_for(state0, None));
            return finish(samples, derivs, diags, TerminalStatus::DenominatorEvent);
        }
    }
    if diags[0].constraint.abs() > cfg.constraint_abort {
        return finish(samples, derivs, diags, TerminalStatus::ConstraintDrift);
    }

    let floor = cfg.denom_floor;
    let mut f_int = move |s: f64, y: &[f64; 4]| -> Option<[f64; 4]> {
        let st = CosmoState { t: t0 + dir * s, a: y[0], h: y[1], phi: y[2], phi_dot: y[3] };
        let r = rhs_with_floor(&st, floor).ok()?;
        Some([dir * r.da, dir * r.dh, dir * r.dphi, dir * r.dphi_dot])
    };

    let mut drift = false;
    let project = cfg.project_each_step;
    let abort_at = cfg.constraint_abort;
    let mut on_acc = |s: f64, y: &[f64; 4], k: &[f64; 4]| -> AcceptAction<4> {
        let mut st = CosmoState { t: t0 + dir * s, a: y[0], h: y[1], phi: y[2], phi_dot: y[3] };
        let mut deriv = RhsValue {
            da: dir * k[0],
            dh: dir * k[1],
            dphi: dir * k[2],
            dphi_dot: dir * k[3],
        };
        let mut action = AcceptAction::Continue;
        if project {
            let cand = CosmoState { phi_dot: project_phidot(&st), ..st };
            if let Ok(r) = rhs_with_floor(&cand, floor) {
                st = cand;
                deriv = r;
                action = AcceptAction::Replace([st.a, st.h, st.phi, st.phi_dot]);
            }
        }
        let diag = diag_for(&st, Some(&deriv));
        samples.push(st);
        derivs.push(deriv);
        diags.push(diag);
        if diag.constraint.abs() > abort_at {
            drift = true;
            return AcceptAction::Abort;
        }
        action
    };

    let opts = RawOpts {
        rtol: cfg.rtol,
        atol: cfg.atol,
        h_init: cfg.h_init,
        h_max: cfg.h_max,
        max_steps: cfg.max_steps,
    };
    let y0 = [state0.a, state0.h, state0.phi, state0.phi_dot];
    let raw = dopri5_raw(&mut f_int, span, y0, &opts, &mut on_acc);

    let status = match raw {
        RawStatus::ReachedEnd => TerminalStatus::ReachedTEnd,
        RawStatus::VetoStop { .. } => TerminalStatus::DenominatorEvent,
        RawStatus::BudgetExhausted => TerminalStatus::StepBudgetExhausted,
        RawStatus::Aborted => {
            debug_assert!(drift);
            TerminalStatus::ConstraintDrift
        }
    };
    finish(samples, derivs, diags, status)
}

fn hermite(t0: f64, y0: f64, d0: f64, t1: f64, y1: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let u = (t - t0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * h * d0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * h * d1
}

impl Trajectory {
    pub fn first(&self) -> &CosmoState {
        &self.samples[0]
    }

    pub fn last(&self) -> &CosmoState {
        self.samples.last().expect("trajectory always has the launch sample")
    }

    /// Covered interval as (t_min, t_max) regardless of direction.
    pub fn time_span(&self) -> (f64, f64) {
        let a = self.samples[0].t;
        let b = self.last().t;
        (a.min(b), a.max(b))
    }

    /// Dense output: cubic Hermite on the bracketing accepted samples.
    /// Exact stored samples are returned as-is.
    pub fn sample_at(&self, t: f64) -> Result<CosmoState, SampleError> {
        let (t_min, t_max) = self.time_span();
        if !(t >= t_min && t <= t_max) {
            return Err(SampleError::OutOfRange { t, t_min, t_max });
        }
        let n = self.samples.len();
        if n == 1 {
            return Ok(self.samples[0]);
        }
        let ascending = self.samples[n - 1].t >= self.samples[0].t;
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let tm = self.samples[mid].t;
            if (ascending && tm <= t) || (!ascending && tm >= t) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if self.samples[lo].t == t {
            return Ok(self.samples[lo]);
        }
        if self.samples[hi].t == t {
            return Ok(self.samples[hi]);
        }
        let (s0, s1) = (&self.samples[lo], &self.samples[hi]);
        let (d0, d1) = (&self.derivs[lo], &self.derivs[hi]);
        Ok(CosmoState {
            t,
            a: hermite(s0.t, s0.a, d0.da, s1.t, s1.a, d1.da, t),
            h: hermite(s0.t, s0.h, d0.dh, s1.t, s1.h, d1.dh, t),
            phi: hermite(s0.t, s0.phi, d0.dphi, s1.t, s1.phi, d1.dphi, t),
            phi_dot: hermite(s0.t, s0.phi_dot, d0.dphi_dot, s1.t, s1.phi_dot, d1.dphi_dot, t),
        })
    }

    /// Certification scan. The sign verdicts take the launch Hubble rate from
    /// the first sample, so this is meaningful for trajectories launched from
    /// t = 0 data.
    pub fn monitor(&self) -> MonitorReport {
        let beta = self.samples[0].h;
        MonitorReport {
            max_constraint_residual: self.max_constraint_residual,
            max_power_residual: self.max_power_residual,
            min_denominator: self.min_denominator,
            b_verdicts: crate::oracles::check_signs(self, beta),
        }
    }
}

/// One-dimensional comparison integration with the same stepper core.
pub fn integrate_scalar(
    f: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64, ScalarError> {
    if t_end == t0 {
        return Ok(y0);
    }
    let dir: f64 = if t_end > t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let opts = RawOpts {
        rtol,
        atol,
        h_init: (1e-4 * span).min(1e-3),
        h_max: span,
        max_steps: 20_000_000,
    };
    let mut g = |s: f64, y: &[f64; 1]| -> Option<[f64; 1]> {
        Some([dir * f(t0 + dir * s, y[0])])
    };
    let mut y_last = y0;
    let mut rec = |_s: f64, y: &[f64; 1], _k: &[f64; 1]| {
        y_last = y[0];
        AcceptAction::Continue
    };
    match dopri5_raw(&mut g, span, [y0], &opts, &mut rec) {
        RawStatus::ReachedEnd => Ok(y_last),
        RawStatus::BudgetExhausted => Err(ScalarError::BudgetExhausted),
        RawStatus::VetoStop { s } => Err(ScalarError::Stalled(t0 + dir * s)),
        RawStatus::Aborted => unreachable!("scalar callback never aborts"),
    }
}

/// Fixed-step fifth-order run, no error control. Convergence-order checks
/// and cross-validation only; `h` may have either sign via t_end < t0.
pub fn dopri5_fixed<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    n_steps: usize,
) -> [f64; N] {
    assert!(n_steps >= 1);
    let h = (t_end - t0) / n_steps as f64;
    let mut y = y0;
    let mut t = t0;
    let mut ff = |s: f64, v: &[f64; N]| Some(f(s, v));
    for i in 0..n_steps {
        let k1 = f(t, &y);
        match stages(&mut ff, t, &y, &k1, h, 1.0, 1.0) {
            Stages::Done { y_new, .. } => y = y_new,
            Stages::Vetoed => unreachable!("total rhs"),
        }
        t = t0 + (i + 1) as f64 * h;
    }
    y
}
