//! Command-line front end: simulate, verify, admissible, plot.
//!
//! Exit codes are part of the interface and stable: 0 success, 1 verification
//! failure or refusal (also I/O and input-file problems), 2 constraint drift,
//! 3 denominator event, 4 step budget exhausted, 64 usage errors.

use crate::csv_io::{self, TrajRow};
use crate::envelopes::{
    lower_margin, upper_margin, BetaRegime, EnvelopeSet, Mode, PhiLowerForm,
};
use crate::initial_data::{classify, make_initial_state, Branch, FreeData};
use crate::integrator::{integrate, IntegratorConfig, TerminalStatus, Trajectory};
use crate::oracles::check_signs_over;
use crate::plot::{render_chart, ChartOptions, Series};
use clap::{ArgAction, Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONSTRAINT_DRIFT: i32 = 2;
pub const EXIT_DENOMINATOR_EVENT: i32 = 3;
pub const EXIT_STEP_BUDGET: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "esgb",
    version,
    about = "Gauss-Bonnet FLRW cosmology: exact launches, certified integration, analytic bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate a launch both ways and write the stitched trajectory CSV
    Simulate(SimulateArgs),
    /// Integrate, then certify every analytic bound with printed margins
    Verify(VerifyArgs),
    /// Scan the (alpha, beta) plane for admissible launch data
    Admissible(AdmissibleArgs),
    /// Render a trajectory CSV column as an SVG line chart
    Plot(PlotArgs),
}

impl clap::ValueEnum for Mode {
    fn value_variants<'a>() -> &'a [Self] {
        &[Mode::Symmetric, Mode::General]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(match self {
            Mode::Symmetric => clap::builder::PossibleValue::new("symmetric")
                .help("alpha = 0 launches, bounds on both sides of t = 0"),
            Mode::General => clap::builder::PossibleValue::new("general")
                .help("alpha >= 0 launches, forward bounds only"),
        })
    }
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    s.parse()
}

/// Inclusive linear grid written start:stop:n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be start:stop:n, got {s:?}"));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| format!("bad grid start {:?}", parts[0]))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| format!("bad grid stop {:?}", parts[1]))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if !start.is_finite() || !stop.is_finite() {
        return Err("grid endpoints must be finite".into());
    }
    if n < 2 {
        return Err("grid needs n >= 2".into());
    }
    Ok(GridSpec { start, stop, n })
}

/// Launch data and run controls shared by the subcommands.
#[derive(Args, Debug, Clone)]
pub struct PhysArgs {
    /// Hubble rate at t = 0
    #[arg(long, env = "ESGB_BETA", default_value_t = 1.0 / 3.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Scalar field at t = 0
    #[arg(long, env = "ESGB_ALPHA", default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Scale factor at t = 0
    #[arg(long, env = "ESGB_A0", default_value_t = 1.0)]
    pub a0: f64,
    /// Constraint-root branch for the scalar velocity
    #[arg(long, env = "ESGB_S", default_value = "+1", value_parser = parse_branch, allow_hyphen_values = true)]
    pub s: Branch,
    /// Relative tolerance of the step controller
    #[arg(long, env = "ESGB_RTOL", default_value_t = 1e-10)]
    pub rtol: f64,
    /// Absolute tolerance of the step controller
    #[arg(long, env = "ESGB_ATOL", default_value_t = 1e-12)]
    pub atol: f64,
    /// Which launch family the bounds certify
    #[arg(long, env = "ESGB_MODE", value_enum, default_value = "symmetric")]
    pub mode: Mode,
}

impl PhysArgs {
    fn usage_check(&self) -> Result<(), String> {
        if !(self.rtol.is_finite() && self.rtol > 0.0 && self.atol.is_finite() && self.atol > 0.0)
        {
            return Err("rtol and atol must be finite and positive".into());
        }
        if !(self.a0.is_finite() && self.a0 > 0.0) {
            return Err(format!("a0 = {} must be positive", self.a0));
        }
        if !self.beta.is_finite() || !self.alpha.is_finite() {
            return Err("beta and alpha must be finite".into());
        }
        Ok(())
    }

    fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            ..IntegratorConfig::default()
        }
    }

    fn free_data(&self) -> FreeData {
        FreeData {
            a0: self.a0,
            beta: self.beta,
            alpha: self.alpha,
            s: self.s,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    /// Backward end of the run (<= 0)
    #[arg(long, env = "ESGB_T_MIN", default_value_t = -20.0, allow_hyphen_values = true)]
    pub t_min: f64,
    /// Forward end of the run (>= 0)
    #[arg(long, env = "ESGB_T_MAX", default_value_t = 100.0, allow_hyphen_values = true)]
    pub t_max: f64,
    /// Trajectory CSV path; stdout when omitted
    #[arg(long, env = "ESGB_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[arg(long, env = "ESGB_T_MIN", default_value_t = -20.0, allow_hyphen_values = true)]
    pub t_min: f64,
    #[arg(long, env = "ESGB_T_MAX", default_value_t = 100.0, allow_hyphen_values = true)]
    pub t_max: f64,
    /// Verify a whole beta grid (start:stop:n) concurrently instead of --beta
    #[arg(long, env = "ESGB_BETA_GRID", value_parser = parse_grid)]
    pub beta_grid: Option<GridSpec>,
}

#[derive(Args, Debug)]
pub struct AdmissibleArgs {
    /// Beta axis of the scan (start:stop:n)
    #[arg(long, env = "ESGB_BETA_GRID", value_parser = parse_grid, default_value = "0.01:0.57:57")]
    pub beta_grid: GridSpec,
    /// Alpha axis of the scan (start:stop:n)
    #[arg(long, env = "ESGB_ALPHA_GRID", value_parser = parse_grid, default_value = "0:2:21")]
    pub alpha_grid: GridSpec,
    #[arg(long, env = "ESGB_S", default_value = "+1", value_parser = parse_branch, allow_hyphen_values = true)]
    pub s: Branch,
    /// Region CSV path; stdout when omitted
    #[arg(long, env = "ESGB_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Trajectory CSV produced by simulate
    #[arg(long, env = "ESGB_INPUT")]
    pub input: PathBuf,
    /// Column to draw: a, H, phi, phidot, constraint, power, denominator
    #[arg(long, env = "ESGB_COLUMN", default_value = "H")]
    pub column: String,
    /// Overlay the closed-form lower/upper bounds for the launch data
    #[arg(long, env = "ESGB_OVERLAY_BOUNDS", action = ArgAction::SetTrue)]
    pub overlay_bounds: bool,
    /// Log10 abscissa, keeping only t > 0 rows
    #[arg(long, env = "ESGB_LOG_T", action = ArgAction::SetTrue)]
    pub log_t: bool,
    /// SVG output path
    #[arg(long, env = "ESGB_OUTPUT", default_value = "plot.svg")]
    pub output: PathBuf,
    #[command(flatten)]
    pub phys: PhysArgs,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Admissible(a) => cmd_admissible(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn status_name(s: TerminalStatus) -> &'static str {
    match s {
        TerminalStatus::ReachedTEnd => "reached t_end",
        TerminalStatus::DenominatorEvent => "denominator event",
        TerminalStatus::ConstraintDrift => "constraint drift",
        TerminalStatus::StepBudgetExhausted => "step budget exhausted",
    }
}

fn status_exit(s: TerminalStatus) -> i32 {
    match s {
        TerminalStatus::ReachedTEnd => EXIT_OK,
        TerminalStatus::ConstraintDrift => EXIT_CONSTRAINT_DRIFT,
        TerminalStatus::DenominatorEvent => EXIT_DENOMINATOR_EVENT,
        TerminalStatus::StepBudgetExhausted => EXIT_STEP_BUDGET,
    }
}

fn check_time_window(t_min: f64, t_max: f64) -> Result<(), String> {
    if !(t_min.is_finite() && t_max.is_finite()) {
        return Err("t-min and t-max must be finite".into());
    }
    if !(t_min <= 0.0 && 0.0 <= t_max && t_min < t_max) {
        return Err(format!(
            "need t-min <= 0 <= t-max with t-min < t-max, got [{t_min}, {t_max}]"
        ));
    }
    Ok(())
}

/// Run chunks of `items` on scoped threads, preserving order of results.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let par = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(4)
        .min(items.len().max(1));
    if par <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = (items.len() + par - 1) / par;
    let mut out: Vec<Option<R>> = Vec::new();
    out.resize_with(items.len(), || None);
    std::thread::scope(|sc| {
        let f = &f;
        for (slots, part) in out.chunks_mut(chunk).zip(items.chunks(chunk)) {
            sc.spawn(move || {
                for (slot, item) in slots.iter_mut().zip(part) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    out.into_iter().map(|o| o.unwrap()).collect()
}

fn cmd_simulate(args: &SimulateArgs) -> i32 {
    if let Err(msg) = args
        .phys
        .usage_check()
        .and_then(|()| check_time_window(args.t_min, args.t_max))
    {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let to_file = args.output.is_some();
    // keep stdout clean for the CSV when it goes there
    let say = |line: String| {
        if to_file {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };

    let data = args.phys.free_data();
    let cls = classify(&data);
    say(format!("kappa = {:.16e}", cls.kappa));
    say(format!("gamma = {:.16e}", cls.gamma));
    say(format!("phidot0 = {:.16e}", cls.phidot0));
    let required_ok = match args.phys.mode {
        Mode::Symmetric => cls.symmetric_ok,
        Mode::General => cls.general_ok,
    };
    if !required_ok {
        say("warning: launch data fails the requested classification:".into());
        for r in &cls.reasons {
            say(format!("warning:   {r}"));
        }
        say("warning: proceeding anyway (exploration run, bounds not guaranteed)".into());
    }

    let mut t_min = args.t_min;
    if args.phys.mode == Mode::General && t_min < 0.0 {
        say(format!(
            "warning: general mode starts at t = 0, raising t-min from {t_min}"
        ));
        t_min = 0.0;
    }
    if t_min >= args.t_max {
        eprintln!("error: empty time window after raising t-min");
        return EXIT_USAGE;
    }

    let cfg = args.phys.config();
    let state0 = make_initial_state(&data);
    let bwd = (t_min < 0.0).then(|| integrate(&state0, t_min, &cfg));
    let fwd = (args.t_max > 0.0).then(|| integrate(&state0, args.t_max, &cfg));

    let mut code = EXIT_OK;
    for (label, traj) in [("backward", bwd.as_ref()), ("forward", fwd.as_ref())] {
        let Some(traj) = traj else { continue };
        say(format!(
            "{label}: {} at t = {:.6e}; max |C| = {:.3e}; max |P| = {:.3e}; min D = {:.6e}",
            status_name(traj.terminal_status),
            traj.last().t,
            traj.max_constraint_residual,
            traj.max_power_residual,
            traj.min_denominator
        ));
        if code == EXIT_OK {
            code = status_exit(traj.terminal_status);
        }
    }

    let rows = match (bwd.as_ref(), fwd.as_ref()) {
        (Some(b), Some(f)) => csv_io::stitch(b, f),
        (Some(b), None) => {
            let mut r = csv_io::rows_from(b);
            r.reverse();
            r
        }
        (None, Some(f)) => csv_io::rows_from(f),
        (None, None) => unreachable!("window validation guarantees a run"),
    };

    let written = match &args.output {
        Some(path) => fs::File::create(path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))
            .and_then(|f| {
                let mut w = std::io::BufWriter::new(f);
                csv_io::write_csv(&mut w, &rows)
                    .and_then(|()| w.flush())
                    .map_err(|e| format!("writing {}: {e}", path.display()))
            })
            .map(|()| say(format!("wrote {} ({} rows)", path.display(), rows.len()))),
        None => {
            let stdout = std::io::stdout();
            csv_io::write_csv(&mut stdout.lock(), &rows).map_err(|e| format!("stdout: {e}"))
        }
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return EXIT_FAIL;
    }
    code
}

struct BoundRow {
    name: &'static str,
    /// Informational rows are printed but do not drive the exit code.
    governs: bool,
    min_margin: f64,
    worst_t: f64,
}

impl BoundRow {
    fn new(name: &'static str, governs: bool) -> Self {
        BoundRow {
            name,
            governs,
            min_margin: f64::INFINITY,
            worst_t: f64::NAN,
        }
    }

    fn observe(&mut self, margin: f64, t: f64) {
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst_t = t;
        }
    }

    fn holds(&self) -> bool {
        // min_margin stays +inf when a direction was never sampled
        self.min_margin > 1e-9
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).min(hi))
        .collect()
}

fn scan_envelopes(
    env: &EnvelopeSet,
    traj: &Trajectory,
    forward: bool,
    a0: f64,
    n_samples: usize,
) -> Result<Vec<BoundRow>, String> {
    let span = if forward {
        traj.time_span().1
    } else {
        traj.time_span().0.abs()
    };
    let mut rows = if forward {
        vec![
            BoundRow::new("H lower (fwd)", true),
            BoundRow::new("H upper (fwd)", true),
            BoundRow::new("phi lower (fwd)", true),
            BoundRow::new("phi lower doubled (fwd)", false),
            BoundRow::new("phi upper (fwd)", true),
            BoundRow::new("phidot lower (fwd)", true),
            BoundRow::new("phidot upper (fwd)", true),
            BoundRow::new("a lower (fwd)", true),
            BoundRow::new("a upper (fwd)", true),
        ]
    } else {
        vec![
            BoundRow::new("H lower (bwd)", true),
            BoundRow::new("H upper (bwd)", true),
            BoundRow::new("H sharp lower (bwd)", true),
            BoundRow::new("phi lower (bwd)", true),
            BoundRow::new("phi upper (bwd)", true),
            BoundRow::new("phidot lower (bwd)", true),
            BoundRow::new("phidot upper (bwd)", true),
            BoundRow::new("a lower (bwd)", true),
            BoundRow::new("a upper (bwd)", true),
        ]
    };
    let err = |t: f64, e: crate::envelopes::EnvelopeError| {
        format!("envelope evaluation failed at t = {t}: {e}")
    };
    for mag in log_spaced(1e-3, span, n_samples) {
        let t = if forward { mag } else { -mag };
        let st = traj
            .sample_at(t)
            .map_err(|e| format!("sampling failed: {e}"))?;

        let (h_lo, h_up) = env.h_bounds(t).map_err(|e| err(t, e))?;
        rows[0].observe(lower_margin(st.h, h_lo), t);
        rows[1].observe(upper_margin(st.h, h_up), t);

        let (p_lo, p_up) = env.phi_bounds(t).map_err(|e| err(t, e))?;
        let (i_plo, i_pup) = if forward { (2, 4) } else { (3, 4) };
        rows[i_plo].observe(lower_margin(st.phi, p_lo), t);
        rows[i_pup].observe(upper_margin(st.phi, p_up), t);

        if forward {
            let doubled = env
                .phi_lower_variant(t, PhiLowerForm::Doubled)
                .map_err(|e| err(t, e))?;
            rows[3].observe(lower_margin(st.phi, doubled), t);
        } else {
            let sharp = env.h_lower_sharp(t).map_err(|e| err(t, e))?;
            rows[2].observe(lower_margin(st.h, sharp), t);
        }

        let (v_lo, v_up) = env.phidot_bounds(t).map_err(|e| err(t, e))?;
        rows[5].observe(lower_margin(st.phi_dot, v_lo), t);
        rows[6].observe(upper_margin(st.phi_dot, v_up), t);

        let (a_lo, a_up) = env.a_bounds(t, a0).map_err(|e| err(t, e))?;
        rows[7].observe(lower_margin(st.a, a_lo), t);
        rows[8].observe(upper_margin(st.a, a_up), t);
    }
    Ok(rows)
}

fn verify_one(beta: f64, args: &VerifyArgs) -> (String, i32) {
    let mut out = String::new();
    let phys = &args.phys;
    let _ = writeln!(out, "== beta = {beta}, alpha = {}, branch {} ==", phys.alpha, phys.s);

    let data = FreeData { beta, ..phys.free_data() };
    let cls = classify(&data);
    let _ = writeln!(out, "  kappa = {:.16e}", cls.kappa);
    let _ = writeln!(out, "  phidot0 = {:.16e}", cls.phidot0);
    let ok = match phys.mode {
        Mode::Symmetric => cls.symmetric_ok,
        Mode::General => cls.general_ok,
    };
    if !ok {
        let _ = writeln!(out, "  refusing to verify, classification failed:");
        for r in &cls.reasons {
            let _ = writeln!(out, "    - {r}");
        }
        return (out, EXIT_FAIL);
    }
    let env = match EnvelopeSet::new(beta, phys.alpha, phys.mode) {
        Ok(env) => env,
        Err(e) => {
            let _ = writeln!(out, "  refusing to verify: {e}");
            return (out, EXIT_FAIL);
        }
    };
    if phys.mode == Mode::Symmetric {
        let _ = writeln!(
            out,
            "  regime: {}",
            match BetaRegime::from_launch(beta) {
                BetaRegime::Low => "low (B5 coefficient 454 beta / 45)",
                BetaRegime::High => "high (B5 coefficient 4)",
            }
        );
    }

    let t_min = match phys.mode {
        Mode::Symmetric => args.t_min,
        Mode::General => 0.0,
    };
    let cfg = phys.config();
    let state0 = make_initial_state(&data);

    let mut runs: Vec<(bool, Trajectory)> = Vec::new();
    if t_min < 0.0 {
        runs.push((false, integrate(&state0, t_min, &cfg)));
    }
    if args.t_max > 0.0 {
        runs.push((true, integrate(&state0, args.t_max, &cfg)));
    }
    for (forward, traj) in &runs {
        let label = if *forward { "forward" } else { "backward" };
        if traj.terminal_status != TerminalStatus::ReachedTEnd {
            let _ = writeln!(
                out,
                "  {label} run ended early: {} at t = {:.6e}",
                status_name(traj.terminal_status),
                traj.last().t
            );
            return (out, status_exit(traj.terminal_status));
        }
        let _ = writeln!(
            out,
            "  {label}: max |C| = {:.3e}, max |P| = {:.3e}, min D = {:.6e}",
            traj.max_constraint_residual, traj.max_power_residual, traj.min_denominator
        );
    }

    let mut rows: Vec<BoundRow> = Vec::new();
    for (forward, traj) in &runs {
        match scan_envelopes(&env, traj, *forward, phys.a0, 400) {
            Ok(mut r) => rows.append(&mut r),
            Err(msg) => {
                let _ = writeln!(out, "  {msg}");
                return (out, EXIT_FAIL);
            }
        }
    }

    let stitched = runs
        .iter()
        .flat_map(|(_, tr)| tr.samples.iter().zip(tr.derivs.iter()));
    let verdicts = check_signs_over(stitched, beta);

    let _ = writeln!(out, "  {:<26} {:>13}  {:>12}", "bound", "min margin", "at t");
    for r in &rows {
        let _ = writeln!(
            out,
            "  {:<26} {:>13.3e}  {:>12.4e}{}",
            r.name,
            r.min_margin,
            r.worst_t,
            if r.governs { "" } else { "  (informational)" }
        );
    }
    for v in &verdicts {
        if v.samples_checked == 0 {
            let _ = writeln!(out, "  {:<26} {:>13}", format!("{} {} ({})", v.name, v.expected, v.side), "no samples");
        } else {
            let _ = writeln!(
                out,
                "  {:<26} {:>13.3e}  {:>12.4e}",
                format!("{} {} ({})", v.name, v.expected, v.side),
                v.min_margin,
                v.worst_t
            );
        }
    }

    let first_bad_row = rows.iter().find(|r| r.governs && !r.holds());
    let first_bad_b = verdicts.iter().find(|v| v.violated);
    match (first_bad_row, first_bad_b) {
        (Some(r), _) => {
            let _ = writeln!(
                out,
                "  FAIL: bound {} violated, margin {:.3e} at t = {:.4e}",
                r.name, r.min_margin, r.worst_t
            );
            (out, EXIT_FAIL)
        }
        (None, Some(v)) => {
            let _ = writeln!(
                out,
                "  FAIL: sign claim {} {} on {} violated, margin {:.3e} at t = {:.4e}",
                v.name, v.expected, v.side, v.min_margin, v.worst_t
            );
            (out, EXIT_FAIL)
        }
        (None, None) => {
            let doubled_note = rows
                .iter()
                .find(|r| !r.governs && !r.holds())
                .map(|r| format!(" ({} fails, reported only)", r.name))
                .unwrap_or_default();
            let _ = writeln!(out, "  OK: all envelope and sign bounds hold{doubled_note}");
            (out, EXIT_OK)
        }
    }
}

fn cmd_verify(args: &VerifyArgs) -> i32 {
    if let Err(msg) = args
        .phys
        .usage_check()
        .and_then(|()| check_time_window(args.t_min, args.t_max))
    {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let betas = match &args.beta_grid {
        Some(g) => g.values(),
        None => vec![args.phys.beta],
    };
    let results = par_map(&betas, |b| verify_one(*b, args));
    let mut code = EXIT_OK;
    for (report, c) in &results {
        print!("{report}");
        if code == EXIT_OK {
            code = *c;
        }
    }
    code
}

fn cmd_admissible(args: &AdmissibleArgs) -> i32 {
    let alphas = args.alpha_grid.values();
    let betas = args.beta_grid.values();
    let s = args.s;

    let blocks = par_map(&alphas, |&alpha| {
        let mut block = String::new();
        let mut admitted = 0usize;
        for &beta in &betas {
            let data = FreeData { a0: 1.0, beta, alpha, s };
            let cls = classify(&data);
            let mut reasons: Vec<&str> = Vec::new();
            if !(0.0 < beta && beta < crate::initial_data::beta_sup()) {
                reasons.push("beta outside (0, sqrt(3)/3)");
            }
            if alpha < 0.0 {
                reasons.push("alpha negative");
            }
            if s != Branch::Plus {
                reasons.push("minus branch");
            }
            if cls.kappa.is_nan() {
                reasons.push("kappa undefined");
            } else if reasons.is_empty() && !cls.general_ok {
                reasons.push("kappa outside (-5 beta^2, -beta^2)");
            }
            let in_a = u8::from(cls.general_ok);
            admitted += usize::from(cls.general_ok);
            let _ = writeln!(
                block,
                "{alpha},{beta},{:.16e},{in_a},{}",
                cls.kappa,
                reasons.join("; ")
            );
        }
        (block, admitted)
    });

    let mut csv = String::from("alpha,beta,kappa,in_A,reason\n");
    let mut admitted = 0usize;
    for (block, n) in blocks {
        csv.push_str(&block);
        admitted += n;
    }
    let total = alphas.len() * betas.len();
    let summary = format!(
        "admissible: {admitted} of {total} grid points on branch {s}"
    );

    match &args.output {
        Some(path) => {
            if let Err(e) = fs::write(path, csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_FAIL;
            }
            println!("wrote {}", path.display());
            println!("{summary}");
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    EXIT_OK
}

fn cmd_plot(args: &PlotArgs) -> i32 {
    let text = match fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.input.display());
            return EXIT_FAIL;
        }
    };
    let rows: Vec<TrajRow> = match csv_io::read_csv(text.as_bytes()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: malformed trajectory CSV: {e}");
            return EXIT_FAIL;
        }
    };

    let extract: fn(&TrajRow) -> f64 = match args.column.as_str() {
        "a" => |r| r.a,
        "H" => |r| r.h,
        "phi" => |r| r.phi,
        "phidot" => |r| r.phidot,
        "constraint" => |r| r.constraint,
        "power" => |r| r.power,
        "denominator" => |r| r.denominator,
        other => {
            eprintln!(
                "error: unknown column {other:?}; known: a, H, phi, phidot, constraint, power, denominator"
            );
            return EXIT_FAIL;
        }
    };

    let kept: Vec<&TrajRow> = rows
        .iter()
        .filter(|r| !args.log_t || r.t > 0.0)
        .collect();
    let xmap = |t: f64| if args.log_t { t.log10() } else { t };
    let mut series = vec![Series {
        name: args.column.clone(),
        points: kept.iter().map(|r| (xmap(r.t), extract(r))).collect(),
    }];

    if args.overlay_bounds {
        if !matches!(args.column.as_str(), "a" | "H" | "phi" | "phidot") {
            eprintln!(
                "note: no closed-form bounds for column {:?}, overlay skipped",
                args.column
            );
        } else {
            let env = match EnvelopeSet::new(args.phys.beta, args.phys.alpha, args.phys.mode) {
                Ok(env) => env,
                Err(e) => {
                    eprintln!("error: cannot build bound overlay: {e}");
                    return EXIT_FAIL;
                }
            };
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for r in &kept {
                let pair = match args.column.as_str() {
                    "a" => env.a_bounds(r.t, args.phys.a0),
                    "H" => env.h_bounds(r.t),
                    "phi" => env.phi_bounds(r.t),
                    _ => env.phidot_bounds(r.t),
                };
                // rows outside the bounds' validity range are simply not overlaid
                if let Ok((lo, up)) = pair {
                    lower.push((xmap(r.t), lo));
                    upper.push((xmap(r.t), up));
                }
            }
            series.push(Series { name: "lower bound".into(), points: lower });
            series.push(Series { name: "upper bound".into(), points: upper });
        }
    }

    let opts = ChartOptions {
        title: format!("{} along the run", args.column),
        x_label: if args.log_t { "log10 t".into() } else { "t".into() },
        y_label: args.column.clone(),
    };
    let svg = render_chart(&series, &opts);
    if let Err(e) = fs::write(&args.output, svg) {
        eprintln!("error: cannot write {}: {e}", args.output.display());
        return EXIT_FAIL;
    }
    println!("wrote {}", args.output.display());
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.1:0.5:5").unwrap();
        assert_eq!(g.values(), vec![0.1, 0.2, 0.30000000000000004, 0.4, 0.5]);
        assert!(parse_grid("0.1:0.5").is_err());
        assert!(parse_grid("0.1:0.5:1").is_err());
        assert!(parse_grid("a:0.5:3").is_err());
    }

    #[test]
    fn log_grid_hits_both_ends() {
        let ts = log_spaced(1e-3, 100.0, 400);
        assert_eq!(ts.len(), 400);
        assert_eq!(ts[0], 1e-3);
        assert_eq!(ts[399], 100.0);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cli_shape_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn branch_strings_round_trip() {
        assert_eq!(parse_branch("+1").unwrap(), Branch::Plus);
        assert_eq!(parse_branch("-1").unwrap(), Branch::Minus);
        assert!(parse_branch("2").is_err());
    }
}
