//! Trajectory-level verdicts on recorded `(t, value)` series: linear growth
//! bounds, late-window plateaus, power-law decay and growth exponents.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

fn check_series(ts: &[f64], xs: &[f64]) -> Result<()> {
    if ts.len() != xs.len() {
        return Err(Error::invalid("time and value series differ in length"));
    }
    if ts.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    if xs.iter().chain(ts).any(|x| !x.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    Ok(())
}

/// `m(t) ≤ C0 (1 + t)` with the smallest such `C0` on the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearBound {
    pub c0: f64,
    pub t_argmax: f64,
}

impl LinearBound {
    pub fn holds_on(&self, ts: &[f64], xs: &[f64]) -> bool {
        ts.iter()
            .zip(xs)
            .all(|(&t, &x)| x <= self.c0 * (1.0 + t) * (1.0 + 4.0 * f64::EPSILON))
    }
}

/// Minimum number of samples accepted by [`fit_linear_bound`].
pub const MIN_LINEAR_SAMPLES: usize = 10;

pub fn fit_linear_bound(ts: &[f64], xs: &[f64]) -> Result<LinearBound> {
    check_series(ts, xs)?;
    if ts.len() < MIN_LINEAR_SAMPLES {
        return Err(Error::invalid(format!(
            "linear bound needs at least {MIN_LINEAR_SAMPLES} samples, got {}",
            ts.len()
        )));
    }
    let mut best = LinearBound {
        c0: f64::NEG_INFINITY,
        t_argmax: ts[0],
    };
    for (&t, &x) in ts.iter().zip(xs) {
        let c = x / (1.0 + t);
        if c > best.c0 {
            best = LinearBound { c0: c, t_argmax: t };
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlateauRule {
    pub late_fraction: f64,
    pub tol: f64,
    /// Shortest horizon `T - t₀` on which a verdict is given.
    pub min_horizon: f64,
    /// Fewest samples the late window must hold.
    pub min_late_samples: usize,
}

impl Default for PlateauRule {
    fn default() -> Self {
        Self {
            late_fraction: 0.5,
            tol: 0.05,
            min_horizon: 1.0,
            min_late_samples: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateauOutcome {
    pub verdict: Verdict,
    /// Late-window sup over global sup.
    pub ratio: f64,
    pub global_sup: f64,
    pub late_sup: f64,
    pub terminal: f64,
}

/// Late-window plateau test. Pass iff
///
/// * the late-window sup is within `tol · sup` of the terminal value, and
/// * the early window already reaches `(1 - tol) · sup`, or the series is
///   non-increasing on the late window.
pub fn plateau_verdict(ts: &[f64], xs: &[f64], rule: &PlateauRule) -> Result<PlateauOutcome> {
    check_series(ts, xs)?;
    if !(rule.late_fraction > 0.0 && rule.late_fraction < 1.0) || !(rule.tol >= 0.0) {
        return Err(Error::invalid("late_fraction must lie in (0, 1) and tol must be >= 0"));
    }
    let t0 = ts[0];
    let horizon = ts[ts.len() - 1] - t0;
    let split = t0 + rule.late_fraction * horizon;
    let global_sup = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let late: Vec<f64> = ts
        .iter()
        .zip(xs)
        .filter(|(&t, _)| t >= split)
        .map(|(_, &x)| x)
        .collect();
    let early_sup = ts
        .iter()
        .zip(xs)
        .filter(|(&t, _)| t <= split)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let terminal = xs[xs.len() - 1];
    let late_sup = late.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = if global_sup > 0.0 { late_sup / global_sup } else { 1.0 };
    let mut outcome = PlateauOutcome {
        verdict: Verdict::Inconclusive,
        ratio,
        global_sup,
        late_sup,
        terminal,
    };
    if horizon < rule.min_horizon || late.len() < rule.min_late_samples {
        return Ok(outcome);
    }
    let scale = global_sup.abs();
    let flat_tail = late_sup - terminal <= rule.tol * scale;
    let reached_early = early_sup >= global_sup - rule.tol * scale;
    let decreasing = late.windows(2).all(|w| w[1] <= w[0]);
    outcome.verdict = if flat_tail && (reached_early || decreasing) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(outcome)
}

/// `value ≈ C1 (1 + t)^{-τ}` on the usable window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub c1: f64,
    pub tau: f64,
    pub points: usize,
    pub t_first: f64,
    pub t_last: f64,
}

/// Fewest usable points [`fit_decay`] accepts.
pub const MIN_DECAY_POINTS: usize = 5;

/// Least-squares line through `(log(1+t), log value)` for samples after the
/// burn-in fraction of the horizon and above `floor`.
pub fn fit_decay(ts: &[f64], xs: &[f64], burn_in_fraction: f64, floor: f64) -> Result<DecayFit> {
    check_series(ts, xs)?;
    let t0 = ts[0];
    let start = t0 + burn_in_fraction * (ts[ts.len() - 1] - t0);
    let (lx, ly, tt): (Vec<f64>, Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(xs)
        .filter(|(&t, &x)| t >= start && x > floor && x > 0.0)
        .map(|(&t, &x)| ((1.0 + t).ln(), x.ln(), t))
        .fold((vec![], vec![], vec![]), |mut acc, (a, b, t)| {
            acc.0.push(a);
            acc.1.push(b);
            acc.2.push(t);
            acc
        });
    if lx.len() < MIN_DECAY_POINTS {
        return Err(Error::Inconclusive(format!(
            "decay fit needs {MIN_DECAY_POINTS} usable points, found {}",
            lx.len()
        )));
    }
    let (slope, intercept) = least_squares_line(&lx, &ly);
    Ok(DecayFit {
        c1: intercept.exp(),
        tau: -slope,
        points: lx.len(),
        t_first: tt[0],
        t_last: tt[tt.len() - 1],
    })
}

fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// `m(t) ≈ a + b t^λ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthFit {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    /// `b ≈ 0`: the exponent is not identifiable and is reported as 0.
    pub degenerate: bool,
}

const LAMBDA_RANGE: (f64, f64) = (0.02, 8.0);

/// For fixed `λ`, the least-squares `(a, b)` and residual.
fn growth_residual(ts: &[f64], ys: &[f64], lambda: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = ts.iter().map(|&t| t.powf(lambda)).collect();
    let (b, a) = least_squares_line(&x, ys);
    let r = x.iter().zip(ys).map(|(&xi, &y)| (a + b * xi - y).powi(2)).sum::<f64>();
    (a, b, r)
}

/// Fits `a + b t^λ` to the running maximum of `xs`: coarse search over `λ`,
/// then golden-section refinement.
pub fn fit_growth_exponent(ts: &[f64], xs: &[f64]) -> Result<GrowthFit> {
    check_series(ts, xs)?;
    if ts.len() < 3 {
        return Err(Error::invalid("growth fit needs at least 3 samples"));
    }
    if ts[0] < 0.0 {
        return Err(Error::invalid("growth fit needs nonnegative times"));
    }
    let mut run = Vec::with_capacity(xs.len());
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        m = m.max(x);
        run.push(m);
    }
    let span = run[run.len() - 1] - run[0];
    let scale = run.iter().fold(0.0f64, |s, &x| s.max(x.abs())).max(f64::MIN_POSITIVE);
    if span <= 1e-12 * scale {
        return Ok(GrowthFit {
            lambda: 0.0,
            a: run[0],
            b: 0.0,
            residual: 0.0,
            degenerate: true,
        });
    }
    let (lo, hi) = LAMBDA_RANGE;
    let coarse = 400;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=coarse {
        let l = lo * (hi / lo).powf(i as f64 / coarse as f64);
        let r = growth_residual(ts, &run, l).2;
        if r < best.1 {
            best = (l, r);
        }
    }
    let step = (hi / lo).powf(1.0 / coarse as f64);
    let (mut a, mut b) = ((best.0 / step).max(lo), (best.0 * step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if growth_residual(ts, &run, c).2 < growth_residual(ts, &run, d).2 {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-13 * b {
            break;
        }
    }
    let lambda = 0.5 * (a + b);
    let (ca, cb, res) = growth_residual(ts, &run, lambda);
    let t_max = ts[ts.len() - 1];
    let degenerate = (cb * t_max.powf(lambda)).abs() <= 1e-9 * scale;
    Ok(GrowthFit {
        lambda: if degenerate { 0.0 } else { lambda },
        a: ca,
        b: cb,
        residual: res,
        degenerate,
    })
}

/// Constants fitted on one trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FittedBounds {
    /// `(s, C0(s))`.
    pub c0_s: Vec<(f64, LinearBound)>,
    /// `(norm id, late sup / global sup)`.
    pub plateau_ratio: Vec<(String, f64)>,
    pub decay: Option<DecayFit>,
    pub growth_exponent: Option<GrowthFit>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn linear_bound_examples() {
        let ts = times(21, 20.0);
        let lin: Vec<f64> = ts.iter().map(|t| 3.0 * (1.0 + t)).collect();
        let b = fit_linear_bound(&ts, &lin).unwrap();
        assert!((b.c0 - 3.0).abs() < 1e-15);
        assert!(b.holds_on(&ts, &lin));
        let flat = vec![5.0; ts.len()];
        let b = fit_linear_bound(&ts, &flat).unwrap();
        assert_eq!((b.c0, b.t_argmax), (5.0, 0.0));
        assert!(fit_linear_bound(&[], &[]).is_err());
        assert!(fit_linear_bound(&ts[..5], &flat[..5]).is_err());
    }

    #[test]
    fn plateau_examples() {
        let ts = times(41, 20.0);
        let rule = PlateauRule::default();
        let c: Vec<f64> = ts.iter().map(|t| 5.0 * (1.0 + t) / (1.0 + t)).collect();
        let out = plateau_verdict(&ts, &c, &rule).unwrap();
        assert_eq!(out.verdict, Verdict::Pass);
        assert_eq!(out.ratio, 1.0);
        let g: Vec<f64> = ts.iter().map(|t| 1.0 + t).collect();
        assert_eq!(plateau_verdict(&ts, &g, &rule).unwrap().verdict, Verdict::Fail);
        let short = times(5, 0.5);
        assert_eq!(
            plateau_verdict(&short, &[1.0; 5], &rule).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn plateau_accepts_saturation_and_decay() {
        let ts = times(81, 20.0);
        let rule = PlateauRule::default();
        let sat: Vec<f64> = ts.iter().map(|t| 61.0 - 16.0 * (-t / 3.0).exp()).collect();
        assert_eq!(plateau_verdict(&ts, &sat, &rule).unwrap().verdict, Verdict::Pass);
        let dec: Vec<f64> = ts.iter().map(|t| 1.0 + (-t).exp()).collect();
        assert_eq!(plateau_verdict(&ts, &dec, &rule).unwrap().verdict, Verdict::Pass);
        let late_bump: Vec<f64> = ts.iter().map(|t| if *t > 15.0 { 2.0 } else { 1.0 }).collect();
        assert_eq!(plateau_verdict(&ts, &late_bump, &rule).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn decay_examples() {
        let ts = times(50, 20.0);
        let p: Vec<f64> = ts.iter().map(|t| 5.0 * (1.0 + t).powf(-2.0)).collect();
        let fit = fit_decay(&ts, &p, 0.25, 0.0).unwrap();
        assert!((fit.c1 - 5.0).abs() < 1e-8);
        assert!((fit.tau - 2.0).abs() < 1e-8);
        let c = vec![0.3; ts.len()];
        assert!(fit_decay(&ts, &c, 0.25, 0.0).unwrap().tau.abs() < 1e-12);
        assert!(matches!(fit_decay(&ts, &p, 0.25, 1.0), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn growth_examples() {
        let ts = times(60, 10.0);
        let cubic: Vec<f64> = ts.iter().map(|t| 1.0 + t.powi(3)).collect();
        let fit = fit_growth_exponent(&ts, &cubic).unwrap();
        assert!((fit.lambda - 3.0).abs() < 1e-6, "{fit:?}");
        assert!(!fit.degenerate);
        let flat = vec![2.0; ts.len()];
        let fit = fit_growth_exponent(&ts, &flat).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.lambda, 0.0);
    }
}
