//! Collision kernels `B(|v - v*|, cos θ) = Φ(|v - v*|) b(cos θ)` for mollified
//! soft potentials with an angular cutoff.
//!
//! A kernel carries its kinetic part `Φ`, its angular part `b` and the
//! constants of the structural bounds it is supposed to satisfy:
//!
//! * `c_phi (1+r)^γ <= Φ(r) <= C_phi (1+r)^γ` with `γ ∈ (-2, 0]`,
//! * `b(cos θ) >= b0 > 0` and `b` integrable on the sphere.
//!
//! The bounds are not proven here; [`validate_kernel`] checks them by dense
//! sampling.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::fmt;
use std::sync::Arc;

/// Piecewise-linear table `x -> y`, abscissae strictly increasing.
///
/// Outside the table range the boundary value is held constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated<T> {
    xs: Vec<T>,
    ys: Vec<T>,
}

impl<T: Real> Tabulated<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::invalid("a table needs at least two (x, y) rows"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("table abscissae must be strictly increasing"));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("table entries must be finite"));
        }
        Ok(Self { xs, ys })
    }

    /// Parses two whitespace- or comma-separated columns; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::invalid(format!(
                    "table line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("table line {}: {e}", lineno + 1)))
            };
            xs.push(T::lit(parse(cols[0])?));
            ys.push(T::lit(parse(cols[1])?));
        }
        Self::new(xs, ys)
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first index with xs[i] > x
        let hi = self.xs.partition_point(|&xi| xi <= x);
        let lo = hi - 1;
        let t = (x - self.xs[lo]) / (self.xs[hi] - self.xs[lo]);
        self.ys[lo] + t * (self.ys[hi] - self.ys[lo])
    }

    pub fn min_value(&self) -> T {
        self.ys.iter().copied().fold(T::infinity(), T::min)
    }
}

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Kinetic part `Φ` of the kernel, a function of the relative speed.
#[derive(Clone)]
pub enum KineticLaw<T> {
    /// `Φ(r) = c (1 + r)^γ`.
    Power {
        c: T,
        gamma: T,
    },
    Table(Tabulated<T>),
    Custom(ScalarFn<T>),
}

/// Angular part `b`, a function of `cos θ`.
#[derive(Clone)]
pub enum AngularLaw<T> {
    Constant(T),
    Table(Tabulated<T>),
    Custom(ScalarFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for KineticLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KineticLaw::Power { c, gamma } => write!(f, "Power {{ c: {c:?}, gamma: {gamma:?} }}"),
            KineticLaw::Table(t) => write!(f, "Table({} rows)", t.xs.len()),
            KineticLaw::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for AngularLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngularLaw::Constant(b) => write!(f, "Constant({b:?})"),
            AngularLaw::Table(t) => write!(f, "Table({} rows)", t.xs.len()),
            AngularLaw::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A tensorised collision kernel together with its hypothesis constants.
///
/// Immutable once built; share it freely between threads.
#[derive(Clone, Debug)]
pub struct CollisionKernel<T> {
    gamma: T,
    c_phi: T,
    c_phi_upper: T,
    b0: T,
    phi: KineticLaw<T>,
    b: AngularLaw<T>,
    relaxed_gamma: bool,
    /// Declared bound on `|Φ'|`, metadata only.
    derivative_bound: Option<T>,
}

impl<T: Real> CollisionKernel<T> {
    /// The canonical family `Φ(r) = c_phi (1+r)^γ`, `b ≡ b0`.
    pub fn power_law(gamma: T, c_phi: T, b0: T) -> Self {
        Self {
            gamma,
            c_phi,
            c_phi_upper: c_phi,
            b0,
            phi: KineticLaw::Power { c: c_phi, gamma },
            b: AngularLaw::Constant(b0),
            relaxed_gamma: false,
            derivative_bound: None,
        }
    }

    /// `Φ ≡ phi`, `b ≡ b`; the Maxwell-molecule-like constant kernel (γ = 0).
    pub fn constant(phi: T, b: T) -> Self {
        Self::power_law(T::zero(), phi, b)
    }

    pub fn with_kinetic(mut self, phi: KineticLaw<T>, c_phi: T, c_phi_upper: T) -> Self {
        self.phi = phi;
        self.c_phi = c_phi;
        self.c_phi_upper = c_phi_upper;
        self
    }

    pub fn with_angular(mut self, b: AngularLaw<T>, b0: T) -> Self {
        self.b = b;
        self.b0 = b0;
        self
    }

    pub fn with_relaxed_gamma(mut self, relaxed: bool) -> Self {
        self.relaxed_gamma = relaxed;
        self
    }

    pub fn with_derivative_bound(mut self, bound: Option<T>) -> Self {
        self.derivative_bound = bound;
        self
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn c_phi(&self) -> T {
        self.c_phi
    }
    pub fn c_phi_upper(&self) -> T {
        self.c_phi_upper
    }
    pub fn b0(&self) -> T {
        self.b0
    }
    pub fn relaxed_gamma(&self) -> bool {
        self.relaxed_gamma
    }
    pub fn derivative_bound(&self) -> Option<T> {
        self.derivative_bound
    }
    pub fn kinetic_law(&self) -> &KineticLaw<T> {
        &self.phi
    }
    pub fn angular_law(&self) -> &AngularLaw<T> {
        &self.b
    }

    /// `Φ(r)`; rejects negative or non-finite speeds.
    pub fn phi_eval(&self, r: T) -> Result<T> {
        if !r.is_finite() || r < T::zero() {
            return Err(Error::invalid(format!("speed must be finite and >= 0, got {r}")));
        }
        Ok(self.phi_unchecked(r))
    }

    /// `b(cos θ)`; rejects `|cos θ| > 1`.
    pub fn b_eval(&self, cos_theta: T) -> Result<T> {
        if !cos_theta.is_finite() || cos_theta.abs() > T::one() {
            return Err(Error::invalid(format!("cos θ must lie in [-1, 1], got {cos_theta}")));
        }
        Ok(self.b_unchecked(cos_theta))
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, r: T) -> T {
        match &self.phi {
            KineticLaw::Power { c, gamma } => *c * (T::one() + r).powf(*gamma),
            KineticLaw::Table(t) => t.eval(r),
            KineticLaw::Custom(f) => f(r),
        }
    }

    #[inline]
    pub(crate) fn b_unchecked(&self, cos_theta: T) -> T {
        let c = cos_theta.max(-T::one()).min(T::one());
        match &self.b {
            AngularLaw::Constant(b) => *b,
            AngularLaw::Table(t) => t.eval(c),
            AngularLaw::Custom(f) => f(c),
        }
    }

    /// The value of `b` when the angular law is constant.
    pub fn constant_angular(&self) -> Option<T> {
        match self.b {
            AngularLaw::Constant(b) => Some(b),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: &'static str,
    pub status: CheckStatus,
    /// Worst-case relative margin over the samples (negative means violated).
    pub margin: f64,
    pub message: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn status(&self) -> CheckStatus {
        self.checks
            .iter()
            .fold(CheckStatus::Pass, |acc, c| match (acc, c.status) {
                (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
                (CheckStatus::Warn, _) | (_, CheckStatus::Warn) => CheckStatus::Warn,
                _ => CheckStatus::Pass,
            })
    }

    pub fn passed(&self) -> bool {
        self.status() != CheckStatus::Fail
    }

    pub fn check(&self, hypothesis: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == hypothesis)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

/// Speeds used for the kinetic checks: `0` followed by `sample_count`
/// log-spaced values in `[1e-3, 1e3]`.
fn speed_samples<T: Real>(sample_count: usize) -> Vec<T> {
    let mut out = vec![T::zero()];
    let (lo, hi) = (-3.0f64, 3.0f64);
    for i in 0..sample_count {
        let e = lo + (hi - lo) * i as f64 / (sample_count - 1) as f64;
        out.push(T::lit(10f64.powf(e)));
    }
    out
}

/// Checks the kernel hypotheses by sampling `Φ` on log-spaced speeds and `b`
/// on a uniform `cos θ` grid.
///
/// Gamma-range and lower-bound violations are reported as failed checks,
/// not as errors; only a malformed request (`sample_count < 2`) errors.
pub fn validate_kernel<T: Real>(k: &CollisionKernel<T>, sample_count: usize) -> Result<ValidationReport> {
    if sample_count < 2 {
        return Err(Error::invalid("validate_kernel needs sample_count >= 2"));
    }
    let mut checks = Vec::new();

    checks.push(HypothesisCheck {
        hypothesis: "H1",
        status: CheckStatus::Pass,
        margin: 0.0,
        message: "kernel is stored as the product Φ(|v-v*|) b(cos θ)".into(),
    });

    let gamma = k.gamma.to_f64_lossy();
    let in_range = gamma > -2.0 && gamma <= 0.0 && gamma.is_finite();
    checks.push(if in_range {
        HypothesisCheck {
            hypothesis: "gamma",
            status: CheckStatus::Pass,
            margin: (gamma + 2.0).min(-gamma),
            message: format!("gamma = {gamma} lies in (-2, 0]"),
        }
    } else if k.relaxed_gamma && gamma <= -2.0 && gamma.is_finite() {
        HypothesisCheck {
            hypothesis: "gamma",
            status: CheckStatus::Warn,
            margin: gamma + 2.0,
            message: format!("gamma = {gamma} out of (H2) range, accepted by relaxed_gamma (very soft scenario)"),
        }
    } else {
        HypothesisCheck {
            hypothesis: "gamma",
            status: CheckStatus::Fail,
            margin: if gamma > 0.0 { -gamma } else { gamma + 2.0 },
            message: format!("gamma out of (H2) range (-2, 0]: gamma = {gamma}"),
        }
    });

    // (H2) sandwich
    let speeds = speed_samples::<T>(sample_count);
    let (c_lo, c_hi) = (k.c_phi.to_f64_lossy(), k.c_phi_upper.to_f64_lossy());
    let mut margin = f64::INFINITY;
    let mut worst_r = 0.0;
    let mut finite = true;
    for &r in &speeds {
        let phi = k.phi_unchecked(r).to_f64_lossy();
        let rr = r.to_f64_lossy();
        let env = (1.0 + rr).powf(gamma);
        if !phi.is_finite() {
            finite = false;
            continue;
        }
        let m = (phi / (c_lo * env) - 1.0).min(1.0 - phi / (c_hi * env));
        if m < margin {
            margin = m;
            worst_r = rr;
        }
    }
    let sandwich_ok = finite && c_lo > 0.0 && c_hi >= c_lo && margin >= -1e-12;
    checks.push(HypothesisCheck {
        hypothesis: "H2",
        status: if sandwich_ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        margin,
        message: if sandwich_ok {
            format!("c_phi (1+r)^γ <= Φ(r) <= C_phi (1+r)^γ on {} speeds", speeds.len())
        } else if c_lo <= 0.0 || c_hi < c_lo {
            format!("(H2) constants invalid: c_phi = {c_lo}, C_phi = {c_hi}")
        } else {
            format!("(H2) sandwich violated, worst at r = {worst_r:.4e}")
        },
    });

    // first-derivative bound by centred differences; higher derivatives are not checked
    let mut max_deriv = 0.0f64;
    for w in speeds.windows(2) {
        let (a, b) = (w[0].to_f64_lossy(), w[1].to_f64_lossy());
        let d = (k.phi_unchecked(w[1]) - k.phi_unchecked(w[0])).to_f64_lossy() / (b - a);
        max_deriv = max_deriv.max(d.abs());
    }
    let declared = k.derivative_bound.map(|d| d.to_f64_lossy());
    let deriv_ok = max_deriv.is_finite() && declared.map_or(true, |d| max_deriv <= d * (1.0 + 1e-9));
    checks.push(HypothesisCheck {
        hypothesis: "H2-derivative",
        status: if deriv_ok { CheckStatus::Pass } else { CheckStatus::Warn },
        margin: declared.map_or(f64::INFINITY, |d| d - max_deriv),
        message: format!("max |Φ'| by finite differences = {max_deriv:.4e}"),
    });

    // (H3) lower bound on b
    let b0 = k.b0.to_f64_lossy();
    let mut bmin = f64::INFINITY;
    let mut b_finite = true;
    let m = sample_count.max(2);
    for i in 0..m {
        let c = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        let b = k.b_unchecked(T::lit(c)).to_f64_lossy();
        if !b.is_finite() {
            b_finite = false;
        }
        bmin = bmin.min(b);
    }
    let h3 = if !(b0 > 0.0) {
        HypothesisCheck {
            hypothesis: "H3",
            status: CheckStatus::Fail,
            margin: b0,
            message: format!("(H3) violated: b0 must be positive, got {b0}"),
        }
    } else if !b_finite {
        HypothesisCheck {
            hypothesis: "H3",
            status: CheckStatus::Fail,
            margin: f64::NEG_INFINITY,
            message: "(H3) violated: b is not finite on [-1, 1]".into(),
        }
    } else {
        let margin = bmin - b0;
        HypothesisCheck {
            hypothesis: "H3",
            status: if margin >= -1e-12 * b0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            margin,
            message: format!("min b over {m} samples = {bmin:.6e}, b0 = {b0:.6e}"),
        }
    };
    checks.push(h3);

    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phi_examples() {
        let k = CollisionKernel::power_law(-1.0, 1.0, 1.0);
        assert_eq!(k.phi_eval(0.0).unwrap(), 1.0);
        assert_eq!(k.phi_eval(1.0).unwrap(), 0.5);
        let m = CollisionKernel::constant(2.0, 1.0);
        assert_eq!(m.phi_eval(7.0).unwrap(), 2.0);
        assert!(k.phi_eval(f64::NAN).is_err());
        assert!(k.phi_eval(f64::INFINITY).is_err());
        assert!(k.phi_eval(-1.0).is_err());
    }

    #[test]
    fn b_examples() {
        let k = CollisionKernel::power_law(-1.0, 1.0, 1.0 / (2.0 * PI));
        for c in [-1.0, -0.3, 0.0, 0.9, 1.0] {
            assert!((k.b_eval(c).unwrap() - 0.159_154_9).abs() < 1e-7);
        }
        let b0 = 0.1;
        let aff = CollisionKernel::power_law(-1.0, 1.0, b0)
            .with_angular(AngularLaw::Custom(Arc::new(move |c: f64| b0 + (1.0 + c) / 2.0)), b0);
        assert_eq!(aff.b_eval(-1.0).unwrap(), b0);
        assert!((aff.b_eval(1.0).unwrap() - 1.1).abs() < 1e-15);
        assert!(aff.b_eval(1.5).is_err());
        assert!(aff.b_eval(-1.0000001).is_err());
    }

    #[test]
    fn canonical_kernel_validates() {
        let k = CollisionKernel::power_law(-1.0, 1.0, 1.0);
        let rep = validate_kernel(&k, 64).unwrap();
        assert_eq!(rep.status(), CheckStatus::Pass, "{rep:?}");
    }

    #[test]
    fn gamma_out_of_range_fails_without_flag() {
        let k = CollisionKernel::power_law(-2.5, 1.0, 1.0);
        let rep = validate_kernel(&k, 16).unwrap();
        let g = rep.check("gamma").unwrap();
        assert_eq!(g.status, CheckStatus::Fail);
        assert!(g.message.contains("gamma out of (H2) range"));

        let relaxed = k.with_relaxed_gamma(true);
        let rep = validate_kernel(&relaxed, 16).unwrap();
        assert_eq!(rep.check("gamma").unwrap().status, CheckStatus::Warn);
        assert!(rep.passed());
    }

    #[test]
    fn zero_angular_part_fails_h3() {
        let k = CollisionKernel::power_law(-1.0, 1.0, 0.0);
        let rep = validate_kernel(&k, 16).unwrap();
        assert_eq!(rep.check("H3").unwrap().status, CheckStatus::Fail);
        assert!(!rep.passed());
    }

    #[test]
    fn sandwich_violation_detected() {
        // claims C_phi = 1 but Φ = 2 (1+r)^-1
        let k = CollisionKernel::power_law(-1.0, 1.0, 1.0).with_kinetic(
            KineticLaw::Power { c: 2.0, gamma: -1.0 },
            1.0,
            1.0,
        );
        let rep = validate_kernel(&k, 16).unwrap();
        assert_eq!(rep.check("H2").unwrap().status, CheckStatus::Fail);
    }

    #[test]
    fn sample_count_precondition() {
        let k = CollisionKernel::power_law(-1.0, 1.0, 1.0);
        assert!(validate_kernel(&k, 1).is_err());
    }

    #[test]
    fn table_parsing_and_eval() {
        let t = Tabulated::<f64>::parse("# r phi\n0 1\n1, 0.5\n3 0.25\n").unwrap();
        assert_eq!(t.eval(0.5), 0.75);
        assert_eq!(t.eval(10.0), 0.25);
        assert_eq!(t.eval(-1.0), 1.0);
        assert!(Tabulated::<f64>::parse("0 1\n0 2\n").is_err());
        assert!(Tabulated::<f64>::parse("0 1 2\n").is_err());
    }

    #[test]
    fn b_samples_respect_lower_bound() {
        let b0 = 0.2;
        let k = CollisionKernel::power_law(-1.0, 1.0, b0)
            .with_angular(AngularLaw::Custom(Arc::new(move |c: f64| b0 + (1.0 + c) / 2.0)), b0);
        for i in 0..1000 {
            let c = -1.0 + 2.0 * i as f64 / 999.0;
            assert!(k.b_eval(c).unwrap() >= b0);
        }
    }

    proptest::proptest! {
        #[test]
        fn power_law_sandwich_and_monotone(gamma in -1.99f64..=0.0, c in 0.1f64..10.0, r in 0.0f64..1e3, dr in 0.0f64..10.0) {
            let k = CollisionKernel::power_law(gamma, c, 1.0);
            let phi = k.phi_eval(r).unwrap();
            let env = (1.0 + r).powf(gamma);
            proptest::prop_assert!(phi >= c * env * (1.0 - 1e-14));
            proptest::prop_assert!(phi <= c * env * (1.0 + 1e-14));
            proptest::prop_assert!(k.phi_eval(r + dr).unwrap() <= phi);
        }
    }
}
