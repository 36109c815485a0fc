//! Scenario presets and the checks each one reports.

use crate::config::RunConfig;
use crate::families;
use crate::CliError;
use serde::Serialize;
use softbolt::diagnostics::{self, DiagnosticsRecord};
use softbolt::integrator::{self, conservation_drift};
use softbolt::verification::{self, FittedBounds, PlateauRule, Verdict};
use softbolt::{Distribution, Operator, State};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    EquilibriumResidual,
    MomentBound,
    SobolevBound,
    LinearGrowth,
    Decay,
    Povzner,
    GainRegularity,
    VerySoft,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::EquilibriumResidual,
        Scenario::MomentBound,
        Scenario::SobolevBound,
        Scenario::LinearGrowth,
        Scenario::Decay,
        Scenario::Povzner,
        Scenario::GainRegularity,
        Scenario::VerySoft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::EquilibriumResidual => "equilibrium-residual",
            Scenario::MomentBound => "moment-bound",
            Scenario::SobolevBound => "sobolev-bound",
            Scenario::LinearGrowth => "linear-growth",
            Scenario::Decay => "decay",
            Scenario::Povzner => "povzner",
            Scenario::GainRegularity => "gain-regularity",
            Scenario::VerySoft => "very-soft",
        }
    }

    /// Scenarios that integrate the equation in time.
    pub fn is_trajectory(self) -> bool {
        !matches!(
            self,
            Scenario::EquilibriumResidual | Scenario::Povzner | Scenario::GainRegularity
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            format!("unknown scenario \"{s}\"; expected one of {names:?}")
        })
    }
}

/// One named verdict in the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: Verdict::Fail,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    fn inconclusive(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: Verdict::Inconclusive,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundsReport {
    pub scenario: String,
    pub config_hash: String,
    /// Out-of-hypothesis or reduced-dimension runs.
    pub exploratory: bool,
    #[serde(rename = "C_plus")]
    pub c_plus: Option<f64>,
    #[serde(rename = "K_minus")]
    pub k_minus: Option<f64>,
    #[serde(rename = "K_loss")]
    pub k_loss: Option<f64>,
    #[serde(rename = "C_emb")]
    pub c_emb: Option<f64>,
    pub ratio_baseline: Option<f64>,
    pub ratio_max: Option<f64>,
    pub steps: Option<usize>,
    pub fitted: FittedBounds,
    pub verdicts: Vec<Check>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|c| c.verdict.is_pass())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.verdicts.iter().find(|c| c.name == name)
    }

    fn push(&mut self, c: Check) {
        if !c.verdict.is_pass() {
            self.failures.push(format!("{}: {}", c.name, c.detail));
        }
        self.verdicts.push(c);
    }
}

/// A table of numbers with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// A two-column plot file.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotFile {
    pub name: String,
    pub columns: [String; 2],
    pub rows: Vec<(f64, f64)>,
}

impl PlotFile {
    fn new(name: String, x: &str, y: &str, rows: Vec<(f64, f64)>) -> Self {
        Self {
            columns: [x.to_owned(), y.to_owned()],
            name,
            rows,
        }
    }

    /// `(log(1 + x), log y)` over the positive samples.
    fn loglog(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .filter(|&&(x, y)| y > 0.0 && x > -1.0)
            .map(|&(x, y)| ((1.0 + x).ln(), y.ln()))
            .collect();
        PlotFile::new(
            format!("{}.loglog", self.name),
            &format!("log(1+{})", self.columns[0]),
            &format!("log({})", self.columns[1]),
            rows,
        )
    }
}

/// Everything a scenario produces.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: BoundsReport,
    pub series: Series,
    pub snapshot: Option<Distribution>,
    pub plots: Vec<PlotFile>,
}

/// Recorded trajectory; `error` is set when the integrator aborted.
#[derive(Clone, Debug)]
pub struct TrajectoryRun {
    pub records: Vec<DiagnosticsRecord<f64>>,
    pub final_state: Option<Distribution>,
    pub steps: usize,
    pub error: Option<String>,
}

impl TrajectoryRun {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn quantity(&self, q: Quantity) -> Option<Vec<f64>> {
        self.records.iter().map(|r| q.read(r)).collect()
    }
}

/// A scalar column of the diagnostics record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quantity {
    Moment(f64),
    Lp(f64),
    Hk(f64),
    L1Distance,
    Entropy,
}

impl Quantity {
    pub fn id(self) -> String {
        match self {
            Quantity::Moment(s) => format!("m_s{s}"),
            Quantity::Lp(p) => format!("lp{p}"),
            Quantity::Hk(k) => format!("hk{k}"),
            Quantity::L1Distance => "l1_dist_M".into(),
            Quantity::Entropy => "entropy".into(),
        }
    }

    pub fn read(self, r: &DiagnosticsRecord<f64>) -> Option<f64> {
        match self {
            Quantity::Moment(s) => r.moment(s),
            Quantity::Lp(p) => r.lp(p, 0.0),
            Quantity::Hk(k) => r.hk(k),
            Quantity::L1Distance => Some(r.l1_dist_m),
            Quantity::Entropy => Some(r.entropy),
        }
    }
}

pub const ENTROPY_TOLERANCE: f64 = 1e-9;
pub const DRIFT_TOLERANCE: f64 = 1e-10;
pub const INTERPOLATION_TOLERANCE: f64 = 1e-12;
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

/// Runs the configured scenario, or a plain trajectory when none is set.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    execute_detailed(cfg).map(|(o, _)| o)
}

/// Like [`execute`], also returning the recorded trajectory when the
/// scenario integrates in time.
pub fn execute_detailed(cfg: &RunConfig) -> Result<(Outcome, Option<TrajectoryRun>), CliError> {
    let (mut outcome, run) = match cfg.scenario {
        Some(Scenario::EquilibriumResidual) => (equilibrium_residual(cfg)?, None),
        Some(Scenario::Povzner) => (povzner(cfg)?, None),
        Some(Scenario::GainRegularity) => (gain_regularity(cfg)?, None),
        _ => {
            let (o, r) = trajectory_scenario(cfg)?;
            (o, Some(r))
        }
    };
    outcome.report.scenario = cfg.scenario_name().to_owned();
    outcome.report.config_hash = cfg.hash();
    if cfg.kernel.relaxed_gamma {
        outcome.report.exploratory = true;
    }
    Ok((outcome, run))
}

pub fn simulate_trajectory(cfg: &RunConfig, op: &Operator, f0: &Distribution) -> Result<TrajectoryRun, CliError> {
    let reference = softbolt::macroscopic_moments(f0)?;
    let icfg = cfg.integrator_config(&reference);
    let mut records = Vec::new();
    let result = integrator::run(op, f0, &icfg, &cfg.plan(), |r| records.push(r.clone()));
    Ok(match result {
        Ok(tr) => TrajectoryRun {
            records,
            final_state: Some(tr.final_state),
            steps: tr.steps,
            error: None,
        },
        Err(
            e @ (softbolt::Error::EntropyIncrease { .. }
            | softbolt::Error::ConservationDrift { .. }
            | softbolt::Error::Projection(_)),
        ) => TrajectoryRun {
            steps: records.last().map_or(0, |r| r.step),
            records,
            final_state: None,
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    })
}

/// Checks every trajectory scenario reports: completion, entropy
/// monotonicity, conservation, positivity and the loss lower bound.
pub fn trajectory_checks(cfg: &RunConfig, run: &TrajectoryRun, report: &mut BoundsReport) {
    report.steps = Some(run.steps);
    match &run.error {
        None => report.push(Check::new(
            "run_completed",
            true,
            run.steps as f64,
            0.0,
            "reached t_end",
        )),
        Some(e) => report.push(Check::failed("run_completed", e.clone())),
    }
    let rise = run
        .records
        .windows(2)
        .map(|w| w[1].entropy - w[0].entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    let rise = if run.records.len() < 2 { 0.0 } else { rise };
    report.push(Check::new(
        "h_theorem",
        rise <= ENTROPY_TOLERANCE,
        rise,
        ENTROPY_TOLERANCE,
        "largest entropy increase between consecutive records",
    ));
    if cfg.integrator.conservation_projection {
        if let Some(first) = run.records.first() {
            let mut worst = (String::from("mass"), 0.0f64);
            for r in &run.records {
                for (name, d) in conservation_drift(&first.conserved, &r.conserved) {
                    if d > worst.1 {
                        worst = (name, d);
                    }
                }
            }
            report.push(Check::new(
                "conservation",
                worst.1 < DRIFT_TOLERANCE,
                worst.1,
                DRIFT_TOLERANCE,
                format!("largest relative drift ({})", worst.0),
            ));
        }
    }
    if let Some(f) = &run.final_state {
        let min = f.min_value();
        report.push(Check::new(
            "positivity",
            min >= 0.0,
            min,
            0.0,
            "smallest value of the final state",
        ));
    }
    let ks: Vec<f64> = run.records.iter().filter_map(|r| r.loss_bound).collect();
    if ks.len() == run.records.len() && !ks.is_empty() {
        let k = ks.iter().copied().fold(f64::INFINITY, f64::min);
        report.k_loss = Some(k);
        report.push(Check::new(
            "loss_lower_bound",
            k > 0.0,
            k,
            0.0,
            "smallest K over all records",
        ));
    } else {
        report.push(Check::failed("loss_lower_bound", "missing loss bound on some record"));
    }
}

fn plateau_rule(cfg: &RunConfig) -> PlateauRule {
    PlateauRule {
        late_fraction: cfg.verification.late_fraction,
        tol: cfg.verification.plateau_tol,
        min_horizon: cfg.verification.min_horizon,
        ..PlateauRule::default()
    }
}

/// Late-window plateau verdict for each quantity.
pub fn plateau_checks(cfg: &RunConfig, run: &TrajectoryRun, quantities: &[Quantity], report: &mut BoundsReport) {
    let ts = run.times();
    for &q in quantities {
        let name = format!("plateau_{}", q.id());
        let Some(xs) = run.quantity(q) else {
            report.push(Check::failed(
                name,
                format!("{} is not among the recorded diagnostics", q.id()),
            ));
            continue;
        };
        match verification::plateau_verdict(&ts, &xs, &plateau_rule(cfg)) {
            Ok(o) => {
                report.fitted.plateau_ratio.push((q.id(), o.ratio));
                report.push(Check {
                    name,
                    verdict: o.verdict,
                    value: Some(o.ratio),
                    threshold: Some(cfg.verification.plateau_tol),
                    detail: format!(
                        "late sup {:e}, global sup {:e}, terminal {:e}",
                        o.late_sup, o.global_sup, o.terminal
                    ),
                });
            }
            Err(e) => report.push(Check::inconclusive(name, e.to_string())),
        }
    }
}

/// `C0(s)` for every tracked moment, with the bound re-checked on the data.
pub fn linear_growth_checks(cfg: &RunConfig, run: &TrajectoryRun, report: &mut BoundsReport) {
    let ts = run.times();
    for &s in &cfg.diagnostics.moments {
        let q = Quantity::Moment(s);
        let name = format!("linear_bound_{}", q.id());
        let Some(xs) = run.quantity(q) else {
            report.push(Check::failed(name, "moment not recorded"));
            continue;
        };
        match verification::fit_linear_bound(&ts, &xs) {
            Ok(b) => {
                let holds = b.c0.is_finite() && b.holds_on(&ts, &xs);
                let detail = format!("C0 attained at t = {}", b.t_argmax);
                report.push(Check::new(name, holds, b.c0, f64::INFINITY, detail));
                report.fitted.c0_s.push((s, b));
            }
            Err(e) => report.push(Check::inconclusive(name, e.to_string())),
        }
    }
}

/// Largest `‖f − M‖_{L¹}` along a run started at the Maxwellian of `reference`.
pub fn stationarity_floor(cfg: &RunConfig, op: &Operator, reference: &State) -> Result<f64, CliError> {
    let m = softbolt::maxwellian(reference, op.grid())?;
    let mut icfg = cfg.integrator_config(reference);
    icfg.t_end = cfg.verification.stationarity_t_end;
    // a measurement, not a verified trajectory
    icfg.entropy_tolerance = f64::INFINITY;
    let plan = diagnostics::DiagnosticsPlan {
        moment_orders: vec![],
        lp_orders: vec![],
        hk_orders: vec![],
        loss_bound: false,
    };
    let tr = integrator::run(op, &m, &icfg, &plan, |_| {})?;
    Ok(tr.records.iter().map(|r| r.l1_dist_m).fold(0.0, f64::max))
}

/// Relaxation checks: the drop of `‖f − M‖_{L¹}` above the floor and the
/// fitted algebraic rate.
pub fn decay_checks(cfg: &RunConfig, run: &TrajectoryRun, floor: f64, report: &mut BoundsReport) {
    let v = &cfg.verification;
    let ts = run.times();
    let xs = run.quantity(Quantity::L1Distance).unwrap_or_default();
    let cut = v.floor_factor * floor;
    if xs.is_empty() {
        report.push(Check::failed("decay_drop", "no records"));
        return;
    }
    let lowest = xs.iter().copied().filter(|&x| x > cut).fold(f64::INFINITY, f64::min);
    let drop = if lowest.is_finite() { xs[0] / lowest } else { 1.0 };
    report.push(Check::new(
        "decay_drop",
        drop >= v.decay_factor,
        drop,
        v.decay_factor,
        format!("initial over smallest value above the floor {cut:e} (stationarity floor {floor:e})"),
    ));
    match verification::fit_decay(&ts, &xs, v.burn_in_fraction, cut) {
        Ok(fit) => {
            let detail = format!(
                "C1 = {:e} on t in [{}, {}] ({} points)",
                fit.c1, fit.t_first, fit.t_last, fit.points
            );
            report.push(Check::new(
                "decay_rate",
                fit.tau >= v.tau_min,
                fit.tau,
                v.tau_min,
                detail,
            ));
            report.fitted.decay = Some(fit);
        }
        Err(softbolt::Error::Inconclusive(m)) => report.push(Check::inconclusive("decay_rate", m)),
        Err(e) => report.push(Check::failed("decay_rate", e.to_string())),
    }
}

/// Growth exponent of `m_s` against the ceiling `s/2 − 1`.
pub fn growth_checks(cfg: &RunConfig, run: &TrajectoryRun, report: &mut BoundsReport) {
    let s = cfg
        .verification
        .growth_order
        .or_else(|| cfg.diagnostics.moments.iter().copied().reduce(f64::max));
    let Some(s) = s else {
        report.push(Check::failed("growth_exponent", "no moment order to fit"));
        return;
    };
    let q = Quantity::Moment(s);
    let Some(xs) = run.quantity(q) else {
        report.push(Check::failed("growth_exponent", format!("{} not recorded", q.id())));
        return;
    };
    let ceiling = s / 2.0 - 1.0;
    match verification::fit_growth_exponent(&run.times(), &xs) {
        Ok(fit) => {
            let detail = format!(
                "{} ≈ {:e} + {:e} t^λ{}",
                q.id(),
                fit.a,
                fit.b,
                if fit.degenerate {
                    " (degenerate, λ unidentifiable)"
                } else {
                    ""
                }
            );
            report.push(Check::new(
                format!("growth_exponent_{}", q.id()),
                fit.lambda <= ceiling,
                fit.lambda,
                ceiling,
                detail,
            ));
            report.fitted.growth_exponent = Some(fit);
        }
        Err(e) => report.push(Check::inconclusive("growth_exponent", e.to_string())),
    }
}

/// `‖g‖_{L¹_s}² ≤ ‖g‖_{L¹} ‖g‖_{L¹_{2s}}` over the random family.
pub fn interpolation_checks(cfg: &RunConfig, report: &mut BoundsReport) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let fam = families::random_nonnegative(&grid, cfg.verification.random_family_size, cfg.seed);
    for &s in &cfg.verification.interpolation_orders {
        let worst = fam
            .iter()
            .map(|g| {
                let lhs = diagnostics::weighted_l1(g, s).powi(2);
                let rhs = diagnostics::weighted_l1(g, 0.0) * diagnostics::weighted_l1(g, 2.0 * s);
                (lhs - rhs) / rhs
            })
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(Check::new(
            format!("interpolation_s{s}"),
            worst <= INTERPOLATION_TOLERANCE,
            worst,
            INTERPOLATION_TOLERANCE,
            format!("largest relative excess over {} random functions", fam.len()),
        ));
    }
    Ok(())
}

/// Fits `C_emb` on the random family and compares it with the grid constant.
pub fn embedding_checks(cfg: &RunConfig, report: &mut BoundsReport) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let k = -((cfg.grid.dim + 1) as f64) / 2.0;
    let fam = families::random_nonnegative(&grid, cfg.verification.random_family_size, cfg.seed);
    let fitted = fam
        .iter()
        .map(|g| diagnostics::hk_norm(g, k) / diagnostics::weighted_l1(g, 0.0))
        .fold(0.0, f64::max);
    let bound = diagnostics::embedding_bound(&grid, k);
    report.c_emb = Some(fitted);
    report.push(Check::new(
        format!("embedding_hk{k}"),
        fitted <= bound,
        fitted,
        bound,
        format!("largest ‖g‖_H^{k} / ‖g‖_L¹ over {} random functions", fam.len()),
    ));
    Ok(())
}

pub fn trajectory_series(cfg: &RunConfig, run: &TrajectoryRun) -> Series {
    let dim = cfg.grid.dim;
    let mut header: Vec<String> = ["step", "t", "mass"].map(String::from).to_vec();
    for a in ["x", "y", "z"].iter().take(dim) {
        header.push(format!("momentum_{a}"));
    }
    header.extend(["energy", "entropy", "l1_dist_M"].map(String::from));
    let plan = cfg.plan();
    header.extend(plan.moment_orders.iter().map(|&s| Quantity::Moment(s).id()));
    header.extend(plan.lp_orders.iter().map(|&(p, _)| Quantity::Lp(p).id()));
    header.extend(plan.hk_orders.iter().map(|&k| Quantity::Hk(k).id()));
    header.extend(["sup_neg_clip", "K_loss"].map(String::from));
    let rows = run
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.step as f64, r.t, r.conserved.mass];
            row.extend(&r.conserved.momentum);
            row.extend([r.conserved.energy, r.entropy, r.l1_dist_m]);
            row.extend(r.moments.iter().map(|m| m.1));
            row.extend(r.lp_norms.iter().map(|m| m.1));
            row.extend(r.hk_norms.iter().map(|m| m.1));
            row.push(r.sup_neg_clip);
            row.push(r.loss_bound.unwrap_or(f64::NAN));
            row
        })
        .collect();
    Series { header, rows }
}

/// One file per tracked diagnostic, plus log-log companions for moments and,
/// in the decay scenario, for the distance to equilibrium.
pub fn trajectory_plots(cfg: &RunConfig, run: &TrajectoryRun) -> Vec<PlotFile> {
    let ts = run.times();
    let plot = |q: Quantity| -> Option<PlotFile> {
        let xs = run.quantity(q)?;
        Some(PlotFile::new(
            q.id(),
            "t",
            &q.id(),
            ts.iter().copied().zip(xs).collect(),
        ))
    };
    let mut out = Vec::new();
    for &s in &cfg.diagnostics.moments {
        if let Some(p) = plot(Quantity::Moment(s)) {
            let ll = p.loglog();
            out.push(p);
            out.push(ll);
        }
    }
    out.extend(cfg.diagnostics.lp.iter().filter_map(|&p| plot(Quantity::Lp(p))));
    out.extend(cfg.diagnostics.hk.iter().filter_map(|&k| plot(Quantity::Hk(k))));
    if cfg.scenario == Some(Scenario::Decay) {
        if let Some(p) = plot(Quantity::L1Distance) {
            let ll = p.loglog();
            out.push(p);
            out.push(ll);
        }
    }
    out
}

fn trajectory_scenario(cfg: &RunConfig) -> Result<(Outcome, TrajectoryRun), CliError> {
    let grid = cfg.grid()?;
    let op = cfg.operator(grid.clone())?;
    let f0 = cfg.initial_state(&grid)?;
    let run = simulate_trajectory(cfg, &op, &f0)?;
    let mut report = BoundsReport::default();
    trajectory_checks(cfg, &run, &mut report);
    match cfg.scenario {
        Some(Scenario::MomentBound) => {
            let qs: Vec<Quantity> = cfg
                .verification
                .plateau_moments
                .iter()
                .map(|&s| Quantity::Moment(s))
                .collect();
            plateau_checks(cfg, &run, &qs, &mut report);
            interpolation_checks(cfg, &mut report)?;
        }
        Some(Scenario::SobolevBound) => {
            let qs: Vec<Quantity> = cfg
                .verification
                .plateau_sobolev
                .iter()
                .map(|&k| Quantity::Hk(k))
                .collect();
            plateau_checks(cfg, &run, &qs, &mut report);
            embedding_checks(cfg, &mut report)?;
        }
        Some(Scenario::LinearGrowth) => linear_growth_checks(cfg, &run, &mut report),
        Some(Scenario::Decay) => {
            let reference = softbolt::macroscopic_moments(&f0)?;
            let floor = stationarity_floor(cfg, &op, &reference)?;
            decay_checks(cfg, &run, floor, &mut report);
        }
        Some(Scenario::VerySoft) => {
            report.exploratory = true;
            if cfg.grid.dim == 2 {
                report
                    .warnings
                    .push("N = 2 analogue of a three-dimensional statement; exploratory only".into());
            }
            growth_checks(cfg, &run, &mut report);
        }
        _ => {}
    }
    let plots = trajectory_plots(cfg, &run);
    if plots.is_empty() {
        report
            .warnings
            .push("diagnostics lists are empty; no plot data written".into());
    }
    let outcome = Outcome {
        series: trajectory_series(cfg, &run),
        snapshot: run.final_state.clone(),
        plots,
        report,
    };
    Ok((outcome, run))
}

/// `‖Q(M, M)‖_{L¹} / ‖L(M) M‖_{L¹}` for the Maxwellian `M(1, 0, 1)`.
pub fn equilibrium_residual_ratio(op: &Operator) -> Result<f64, CliError> {
    let grid = op.grid();
    let m = softbolt::maxwellian(&State::unit(grid.dim()), &grid)?;
    let parts = op.collide_parts(&m)?;
    let q: f64 = parts.collision(m.values()).iter().map(|x| x.abs()).sum();
    let l: f64 = parts.loss_rate.iter().zip(m.values()).map(|(a, b)| (a * b).abs()).sum();
    Ok(q / l)
}

fn equilibrium_residual(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let v = &cfg.verification;
    let mut rows = Vec::new();
    for &n in &v.residual_sizes {
        let op = cfg.operator(cfg.build_grid(n)?)?;
        rows.push((n as f64, equilibrium_residual_ratio(&op)?));
    }
    let mut report = BoundsReport::default();
    let (n0, r0) = rows[0];
    report.push(Check::new(
        format!("equilibrium_residual_n{n0}"),
        r0 < v.residual_max,
        r0,
        v.residual_max,
        "‖Q(M,M)‖ / ‖L(M)M‖ on the coarsest grid",
    ));
    if rows.len() > 1 {
        let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
        let worst = rows.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
        let detail = rows
            .iter()
            .map(|(n, r)| format!("n={n}: {r:e}"))
            .collect::<Vec<_>>()
            .join(", ");
        report.push(Check::new(
            "equilibrium_residual_decreasing",
            decreasing,
            worst,
            1.0,
            detail,
        ));
    }
    let plot = PlotFile::new("residual".into(), "n", "residual", rows.clone());
    let grid = cfg.grid()?;
    Ok(Outcome {
        series: Series {
            header: vec!["n".into(), "residual".into()],
            rows: rows.iter().map(|&(n, r)| vec![n, r]).collect(),
        },
        snapshot: Some(cfg.initial_state(&grid)?),
        plots: vec![plot.loglog(), plot],
        report,
    })
}

fn povzner(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let v = &cfg.verification;
    let kernel = cfg.kernel()?;
    let dim = cfg.grid.dim;
    let s = v.povzner_s;
    let mut report = BoundsReport::default();

    // designated pair v = (2, 0), v* = 0, where the circle integral is closed-form
    match (dim, kernel.constant_angular()) {
        (2, Some(b)) if s == 4.0 => {
            let mut a = vec![0.0; dim];
            a[0] = 2.0;
            let got = diagnostics::povzner_integral(&a, &vec![0.0; dim], s, &kernel)?;
            let expected = -std::f64::consts::FRAC_PI_2 * b * 16.0;
            let err = (got - expected).abs();
            report.push(Check::new(
                "povzner_closed_form",
                err <= CLOSED_FORM_TOLERANCE,
                got,
                expected,
                format!("|error| = {err:e}, expected -8π·b0"),
            ));
        }
        _ => report
            .warnings
            .push("closed-form Povzner check needs N = 2, constant b and s = 4; skipped".into()),
    }

    let pairs = diagnostics::povzner_sample_pairs(dim, v.povzner_max_speed, v.povzner_speeds);
    let fit = diagnostics::fit_povzner_constants(&kernel, s, &pairs)?;
    report.c_plus = Some(fit.c_plus);
    report.k_minus = Some(fit.k_minus);
    report.push(Check::new(
        "povzner_feasible",
        fit.is_feasible(),
        fit.k_minus,
        0.0,
        format!(
            "C+ = {:e}, K- = {:e} (largest admissible {:e}) on {} pairs",
            fit.c_plus, fit.k_minus, fit.k_minus_max, fit.pairs
        ),
    ));

    let mut rows = Vec::with_capacity(pairs.len());
    let mut violated = 0usize;
    for (a, b) in &pairs {
        let lhs = diagnostics::povzner_integral(a, b, s, &kernel)?;
        let a2: f64 = a.iter().map(|x| x * x).sum();
        let b2: f64 = b.iter().map(|x| x * x).sum();
        let cross = a2.powf(s / 2.0 - 1.0) * b2 + b2.powf(s / 2.0 - 1.0) * a2;
        let top = a2.powf(s / 2.0) + b2.powf(s / 2.0);
        let rhs = fit.c_plus * cross - fit.k_minus * top;
        if lhs > rhs + 1e-9 * (lhs.abs() + rhs.abs()).max(1.0) {
            violated += 1;
        }
        rows.push(vec![a2.sqrt(), b2.sqrt(), b[1].atan2(b[0]).abs(), lhs, rhs]);
    }
    report.push(Check::new(
        "povzner_bound_on_sample",
        violated == 0,
        violated as f64,
        0.0,
        "pairs where the fitted inequality fails",
    ));
    let grid = cfg.grid()?;
    Ok(Outcome {
        series: Series {
            header: ["speed_v", "speed_v_star", "angle", "lhs", "rhs"]
                .map(String::from)
                .to_vec(),
            rows,
        },
        snapshot: Some(cfg.initial_state(&grid)?),
        plots: vec![],
        report,
    })
}

fn gain_regularity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let v = &cfg.verification;
    let grid = cfg.grid()?;
    let op = cfg.operator(grid.clone())?;
    let k = u32::try_from(v.regularity_k).map_err(|_| CliError::Usage("regularity_k too large".into()))?;
    let s = v.regularity_s;
    let w = v.weight_shift.unwrap_or_else(|| diagnostics::default_weight_shift(s));
    let m = softbolt::maxwellian(&State::unit(grid.dim()), &grid)?;
    let base = diagnostics::gain_regularity_ratio(&op, &m, k, s, w)?;
    let mut report = BoundsReport::default();
    report.ratio_baseline = Some(base.ratio);
    if base.unresolved {
        report
            .warnings
            .push("baseline Maxwellian has an unresolved spectral tail".into());
    }
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    let mut unresolved = 0;
    for (i, mix) in families::smooth_mixtures(grid.dim(), v.smooth_family_size, cfg.seed)
        .iter()
        .enumerate()
    {
        let f = mix.sample(&grid)?;
        let r = diagnostics::gain_regularity_ratio(&op, &f, k, s, w)?;
        unresolved += usize::from(r.unresolved);
        rows.push(vec![
            i as f64,
            mix.components.len() as f64,
            r.ratio,
            r.ratio / base.ratio,
            f64::from(u8::from(r.unresolved)),
        ]);
        plot.push((i as f64, r.ratio / base.ratio));
    }
    if unresolved > 0 {
        report
            .warnings
            .push(format!("{unresolved} family members have an unresolved spectral tail"));
    }
    let max = rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    report.ratio_max = Some(max);
    let spread = (max / base.ratio).max(base.ratio / min);
    report.push(Check::new(
        "gain_regularity_band",
        spread <= v.regularity_factor,
        spread,
        v.regularity_factor,
        format!(
            "largest factor between a member's ratio and the baseline {:e} (k = {k}, s = {s}, w = {w})",
            base.ratio
        ),
    ));
    Ok(Outcome {
        series: Series {
            header: ["member", "components", "ratio", "ratio_over_baseline", "unresolved"]
                .map(String::from)
                .to_vec(),
            rows,
        },
        snapshot: Some(cfg.initial_state(&grid)?),
        plots: vec![PlotFile::new("ratio".into(), "member", "ratio_over_baseline", plot)],
        report,
    })
}
