//! Norms, entropy and the functionals used to probe the a priori bounds:
//! weighted `L¹`/`Lᵖ` norms, spectral `Hᵏ` norms of any real order, distance
//! to equilibrium, Povzner sphere integrals, the gain regularity ratio and the
//! loss lower bound.

use crate::collision::CollisionOperator;
use crate::equilibrium::{conserved_of_values, ConservedVector};
use crate::error::{Error, Result};
use crate::grid::{DistributionFunction, VelocityGrid};
use crate::kernel::CollisionKernel;
use crate::quadrature::SphereRule;
use crate::scalar::{CompensatedSum, Real};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

/// `(1 + |v|²)^{s/2}`.
#[inline]
fn bracket<T: Real>(v: &[T; 3], dim: usize, s: T) -> T {
    let mut r2 = T::one();
    for x in &v[..dim] {
        r2 += *x * *x;
    }
    if s == T::zero() {
        T::one()
    } else {
        r2.powf(s * T::lit(0.5))
    }
}

/// `‖f‖_{L¹_s} = Σ |f| (1 + |v|²)^{s/2} Δv`. Negative `s` is allowed.
pub fn weighted_l1<T: Real>(f: &DistributionFunction<T>, s: T) -> T {
    weighted_l1_values(f.grid(), f.values(), s)
}

pub fn weighted_l1_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], s: T) -> T {
    let mut acc = CompensatedSum::new();
    for (i, &x) in values.iter().enumerate() {
        acc.add(x.abs() * bracket(&grid.velocity(i), grid.dim(), s));
    }
    acc.value() * grid.cell_volume()
}

/// `‖f‖_{Lᵖ_s} = (Σ |f|ᵖ (1 + |v|²)^{ps/2} Δv)^{1/p}` for `p ≥ 1`.
pub fn weighted_lp<T: Real>(f: &DistributionFunction<T>, p: T, s: T) -> Result<T> {
    weighted_lp_values(f.grid(), f.values(), p, s)
}

pub fn weighted_lp_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], p: T, s: T) -> Result<T> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::invalid(format!("Lp exponent must be finite and >= 1, got {p}")));
    }
    let mut acc = CompensatedSum::new();
    for (i, &x) in values.iter().enumerate() {
        let w = bracket(&grid.velocity(i), grid.dim(), s);
        acc.add((x.abs() * w).powf(p));
    }
    Ok((acc.value() * grid.cell_volume()).powf(p.recip()))
}

/// `Σ f log f Δv` with `0 log 0 = 0`.
pub fn entropy<T: Real>(f: &DistributionFunction<T>) -> T {
    entropy_values(f.grid(), f.values())
}

pub fn entropy_values<T: Real>(grid: &VelocityGrid<T>, values: &[T]) -> T {
    let mut acc = CompensatedSum::new();
    for &x in values {
        if x > T::zero() {
            acc.add(x * x.ln());
        }
    }
    acc.value() * grid.cell_volume()
}

/// `‖f - g‖_{L¹}`.
pub fn l1_distance<T: Real>(f: &DistributionFunction<T>, g: &DistributionFunction<T>) -> Result<T> {
    f.check_same_grid(g)?;
    Ok(l1_distance_values(f.grid(), f.values(), g.values()))
}

pub fn l1_distance_values<T: Real>(grid: &VelocityGrid<T>, a: &[T], b: &[T]) -> T {
    let mut acc = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add((x - y).abs());
    }
    acc.value() * grid.cell_volume()
}

/// Angular wave number `ξ = π m / L` of DFT index `i` along one axis.
fn wave_number<T: Real>(grid: &VelocityGrid<T>, i: usize) -> T {
    let n = grid.points_per_axis();
    let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    T::lit(m) * T::PI() / grid.half_width()
}

/// `|ξ|²` per DFT mode, in the grid's flat order.
fn wave_numbers_squared<T: Real>(grid: &VelocityGrid<T>) -> Vec<T> {
    (0..grid.node_count())
        .map(|i| {
            let m = grid.multi_index(i);
            (0..grid.dim())
                .map(|k| {
                    let x = wave_number(grid, m[k]);
                    x * x
                })
                .sum()
        })
        .collect()
}

/// N-dimensional DFT of the grid values (row–column).
fn spectrum<T: Real>(grid: &VelocityGrid<T>, values: &[T]) -> Vec<Complex<T>> {
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let mut data: Vec<Complex<T>> = values.iter().map(|&x| Complex::new(x, T::zero())).collect();
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        for start in 0..data.len() {
            if (start / stride) % n != 0 {
                continue;
            }
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = data[start + j * stride];
            }
            fft.process(&mut line);
            for (j, slot) in line.iter().enumerate() {
                data[start + j * stride] = *slot;
            }
        }
    }
    data
}

/// Spectral Sobolev norm on the periodic extension of the grid:
/// `‖f‖²_{Hᵏ} = (2π)^{-N} Σ_ξ |f̂(ξ)|² (1 + |ξ|²)^k Δξ^N` with
/// `f̂(ξ) = Σ f(v) e^{-iξ·v} Δv` and `Δξ = π / L`. For `k = 0` this is the
/// `L²` norm exactly (Parseval). For integer `k ≥ 0` it is equivalent to the
/// derivative-sum norm `Σ_{|i| ≤ k} ‖∂ⁱ f‖²` with constants depending only on
/// `k` and `N`.
pub fn hk_norm<T: Real>(f: &DistributionFunction<T>, k: T) -> T {
    hk_norm_values(f.grid(), f.values(), k)
}

pub fn hk_norm_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], k: T) -> T {
    let spec = spectrum(grid, values);
    let xi2 = wave_numbers_squared(grid);
    let mut acc = CompensatedSum::new();
    for (c, &x2) in spec.iter().zip(&xi2) {
        acc.add(c.norm_sqr() * (T::one() + x2).powf(k));
    }
    let dv = grid.cell_volume();
    let box_volume = (grid.half_width() + grid.half_width()).powi(grid.dim() as i32);
    (acc.value() * dv * dv / box_volume).sqrt()
}

/// `‖(1 + |v|²)^{s/2} f‖_{Hᵏ}`.
pub fn hk_norm_weighted<T: Real>(f: &DistributionFunction<T>, k: T, s: T) -> T {
    hk_norm_weighted_values(f.grid(), f.values(), k, s)
}

pub fn hk_norm_weighted_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], k: T, s: T) -> T {
    let w = weighted_values(grid, values, s);
    hk_norm_values(grid, &w, k)
}

fn weighted_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], s: T) -> Vec<T> {
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| x * bracket(&grid.velocity(i), grid.dim(), s))
        .collect()
}

/// Share of spectral energy in modes with some `|m_k| > 3n/8`.
pub fn spectral_tail_fraction<T: Real>(grid: &VelocityGrid<T>, values: &[T]) -> T {
    let n = grid.points_per_axis();
    let spec = spectrum(grid, values);
    let mut total = CompensatedSum::new();
    let mut tail = CompensatedSum::new();
    for (i, c) in spec.iter().enumerate() {
        let m = grid.multi_index(i);
        let e = c.norm_sqr();
        total.add(e);
        let high = (0..grid.dim()).any(|k| {
            let mk = if m[k] < n / 2 { m[k] } else { n - m[k] };
            8 * mk > 3 * n
        });
        if high {
            tail.add(e);
        }
    }
    let t = total.value();
    if t > T::zero() {
        tail.value() / t
    } else {
        T::zero()
    }
}

/// Grid constant `C` with `‖g‖_{Hᵏ} ≤ C ‖g‖_{L¹}` for every grid function `g`
/// when `k < 0`: `C² = (2π)^{-N} Σ_ξ (1 + |ξ|²)^k Δξ^N`, from `|ĝ| ≤ ‖g‖_{L¹}`.
pub fn embedding_bound<T: Real>(grid: &VelocityGrid<T>, k: T) -> T {
    let xi2 = wave_numbers_squared(grid);
    let mut acc = CompensatedSum::new();
    for &x2 in &xi2 {
        acc.add((T::one() + x2).powf(k));
    }
    let dxi = T::PI() / grid.half_width();
    let n = grid.dim() as i32;
    (acc.value() * dxi.powi(n) / (T::lit(2.0) * T::PI()).powi(n)).sqrt()
}

/// Circle resolution used by [`povzner_integral`] for `N = 2`.
pub const POVZNER_CIRCLE_NODES: usize = 1024;
/// Polar × azimuthal resolution used by [`povzner_integral`] for `N = 3`.
pub const POVZNER_SPHERE_NODES: (usize, usize) = (48, 96);

fn povzner_rule<T: Real>(dim: usize) -> Result<SphereRule<T>> {
    match dim {
        2 => SphereRule::circle(POVZNER_CIRCLE_NODES),
        3 => SphereRule::sphere_product(POVZNER_SPHERE_NODES.0, POVZNER_SPHERE_NODES.1),
        _ => Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}"))),
    }
}

/// `∫_{S^{N-1}} (|v'*|ˢ + |v'|ˢ - |v*|ˢ - |v|ˢ) b(cos θ) dσ`.
pub fn povzner_integral<T: Real>(v: &[T], v_star: &[T], s: T, kernel: &CollisionKernel<T>) -> Result<T> {
    let rule = povzner_rule(v.len())?;
    povzner_integral_with_rule(v, v_star, s, kernel, &rule)
}

pub fn povzner_integral_with_rule<T: Real>(
    v: &[T],
    v_star: &[T],
    s: T,
    kernel: &CollisionKernel<T>,
    rule: &SphereRule<T>,
) -> Result<T> {
    let dim = rule.dim();
    if v.len() != dim || v_star.len() != dim {
        return Err(Error::invalid("velocity dimension differs from the sphere rule"));
    }
    if !(s >= T::lit(2.0)) {
        return Err(Error::invalid(format!("moment order must be >= 2, got {s}")));
    }
    let half = T::lit(0.5);
    let pow = |x2: T| x2.powf(s * half);
    let mut c = [T::zero(); 3];
    let mut rel = [T::zero(); 3];
    let mut r2 = T::zero();
    let (mut v2, mut vs2) = (T::zero(), T::zero());
    for k in 0..dim {
        c[k] = (v[k] + v_star[k]) * half;
        rel[k] = v[k] - v_star[k];
        r2 += rel[k] * rel[k];
        v2 += v[k] * v[k];
        vs2 += v_star[k] * v_star[k];
    }
    let r = r2.sqrt();
    let pre = pow(vs2) + pow(v2);
    let mut acc = CompensatedSum::new();
    for (sigma, w) in rule.iter() {
        let (mut p2, mut m2, mut dot) = (T::zero(), T::zero(), T::zero());
        for k in 0..dim {
            let p = c[k] + half * r * sigma[k];
            let m = c[k] - half * r * sigma[k];
            p2 += p * p;
            m2 += m * m;
            dot += sigma[k] * rel[k];
        }
        let cos = if r == T::zero() { T::one() } else { dot / r };
        let b = kernel.b_unchecked(cos);
        acc.add(w * b * (pow(m2) + pow(p2) - pre));
    }
    Ok(acc.value())
}

/// Fraction of the largest admissible `K₋` used by [`fit_povzner_constants`].
pub const POVZNER_K_FRACTION: f64 = 0.5;

/// Fitted constants of the Povzner inequality
/// `P_s(v, v*) ≤ C₊ (|v|^{s-2}|v*|² + |v*|^{s-2}|v|²) - K₋ (|v|ˢ + |v*|ˢ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PovznerFit<T> {
    pub c_plus: T,
    pub k_minus: T,
    /// Largest `K₋` compatible with the pairs whose cross term vanishes.
    pub k_minus_max: T,
    pub pairs: usize,
}

impl<T: Real> PovznerFit<T> {
    pub fn is_feasible(&self) -> bool {
        self.k_minus > T::zero() && self.c_plus.is_finite()
    }
}

/// Speed pairs `v = (|v|, 0)`, `v* = |v*| (cos α, sin α)` on the speeds
/// `{0} ∪ logspace(0.1, max_speed, count - 1)` and angles
/// `α ∈ {0, π/4, π/2, 3π/4, π}`.
pub fn povzner_sample_pairs<T: Real>(dim: usize, max_speed: T, count: usize) -> Vec<(Vec<T>, Vec<T>)> {
    let lo = 0.1f64.ln();
    let hi = max_speed.to_f64_lossy().ln();
    let mut speeds = vec![0.0f64];
    let m = count.saturating_sub(1).max(1);
    for i in 0..m {
        let t = if m == 1 { 1.0 } else { i as f64 / (m - 1) as f64 };
        speeds.push((lo + t * (hi - lo)).exp());
    }
    let angles = [0.0, 0.25, 0.5, 0.75, 1.0].map(|a: f64| a * std::f64::consts::PI);
    let mut pairs = Vec::new();
    for &a in &speeds {
        for &b in &speeds {
            for &alpha in &angles {
                let mut v = vec![T::zero(); dim];
                let mut w = vec![T::zero(); dim];
                v[0] = T::lit(a);
                w[0] = T::lit(b * alpha.cos());
                w[1] = T::lit(b * alpha.sin());
                pairs.push((v, w));
            }
        }
    }
    pairs
}

/// Fits `(C₊, K₋)` on `pairs`. Pairs with a vanishing cross term fix the
/// largest admissible `K₋`; `K₋` is then taken as [`POVZNER_K_FRACTION`] of
/// it and `C₊` as the smallest value making every pair satisfy the bound.
/// A non-positive `K₋` means the sample falsifies the inequality.
pub fn fit_povzner_constants<T: Real>(
    kernel: &CollisionKernel<T>,
    s: T,
    pairs: &[(Vec<T>, Vec<T>)],
) -> Result<PovznerFit<T>> {
    if !(s > T::lit(2.0)) {
        return Err(Error::invalid(format!("Povzner fit needs s > 2, got {s}")));
    }
    let dim = pairs
        .first()
        .map(|p| p.0.len())
        .ok_or_else(|| Error::invalid("no sample pairs"))?;
    let rule = povzner_rule(dim)?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (v, w) in pairs {
        let lhs = povzner_integral_with_rule(v, w, s, kernel, &rule)?;
        let a2: T = v.iter().map(|&x| x * x).sum();
        let b2: T = w.iter().map(|&x| x * x).sum();
        let sm2 = (s - T::lit(2.0)) * T::lit(0.5);
        let cross = a2.powf(sm2) * b2 + b2.powf(sm2) * a2;
        let top = a2.powf(s * T::lit(0.5)) + b2.powf(s * T::lit(0.5));
        rows.push((lhs, cross, top));
    }
    let scale = T::lit(1e-12);
    let mut k_max: Option<T> = None;
    for &(lhs, cross, top) in &rows {
        if cross <= scale * top && top > T::zero() {
            let k = -lhs / top;
            k_max = Some(k_max.map_or(k, |m| m.min(k)));
        }
    }
    let k_max = k_max.ok_or_else(|| Error::invalid("sample has no pair with a zero partner speed"))?;
    let k_minus = if k_max > T::zero() {
        k_max * T::lit(POVZNER_K_FRACTION)
    } else {
        T::zero()
    };
    let mut c_plus = T::zero();
    for &(lhs, cross, top) in &rows {
        if cross > scale * top {
            c_plus = c_plus.max((lhs + k_minus * top) / cross);
        }
    }
    Ok(PovznerFit {
        c_plus,
        k_minus,
        k_minus_max: k_max,
        pairs: rows.len(),
    })
}

/// Default weight shift `w = 1 + 2s` of the gain regularity estimate.
pub fn default_weight_shift<T: Real>(s: T) -> T {
    T::one() + s + s
}

/// Tail energy share above which the regularity ratio is flagged unresolved.
pub const SPECTRAL_TAIL_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityRatio<T> {
    /// `‖Q⁺(f,f)‖_{H^{k+(N-1)/2}_s} / (‖f‖_{L²_{s+w}} ‖f‖_{H^k_{s+w}})`.
    pub ratio: T,
    pub numerator: T,
    pub denominator: T,
    /// Set when `f` or `Q⁺(f,f)` carries spectral energy near the Nyquist band.
    pub unresolved: bool,
}

pub fn gain_regularity_ratio<T: Real>(
    op: &CollisionOperator<T>,
    f: &DistributionFunction<T>,
    k: u32,
    s: T,
    w: T,
) -> Result<RegularityRatio<T>> {
    let grid = f.grid();
    let gain = op.gain(f, f)?;
    let half_dim = T::from_usize_lossy(grid.dim() - 1) * T::lit(0.5);
    let kk = T::from_usize_lossy(k as usize);
    let numerator = hk_norm_weighted_values(grid, &gain, kk + half_dim, s);
    let denominator = weighted_lp_values(grid, f.values(), T::lit(2.0), s + w)?
        * hk_norm_weighted_values(grid, f.values(), kk, s + w);
    let tail = T::lit(SPECTRAL_TAIL_THRESHOLD);
    let unresolved = spectral_tail_fraction(grid, f.values()) > tail || spectral_tail_fraction(grid, &gain) > tail;
    let ratio = if denominator == T::zero() {
        T::zero()
    } else {
        numerator / denominator
    };
    Ok(RegularityRatio {
        ratio,
        numerator,
        denominator,
        unresolved,
    })
}

/// `K = min_v L(f)(v) / (1 + |v|)^γ`.
pub fn loss_lower_bound_fit<T: Real>(op: &CollisionOperator<T>, f: &DistributionFunction<T>) -> Result<T> {
    if !(f.mass() > T::zero()) {
        return Err(Error::DegenerateState("loss bound needs positive mass".into()));
    }
    let rate = op.loss_rate(f)?;
    Ok(loss_lower_bound_from_rate(f.grid(), op.kernel().gamma(), &rate))
}

pub fn loss_lower_bound_from_rate<T: Real>(grid: &VelocityGrid<T>, gamma: T, rate: &[T]) -> T {
    rate.iter()
        .enumerate()
        .map(|(i, &l)| {
            let v = grid.velocity(i);
            let speed = (0..grid.dim()).map(|k| v[k] * v[k]).sum::<T>().sqrt();
            l / (T::one() + speed).powf(gamma)
        })
        .fold(T::infinity(), T::min)
}

/// Which norms each [`DiagnosticsRecord`] carries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsPlan<T> {
    pub moment_orders: Vec<T>,
    /// `(p, s)` pairs.
    pub lp_orders: Vec<(T, T)>,
    pub hk_orders: Vec<T>,
    /// Evaluate `loss_lower_bound_fit` on each record.
    pub loss_bound: bool,
}

impl<T: Real> DiagnosticsPlan<T> {
    /// `s ∈ {2, 4, 6}`, `p ∈ {2}`, `k ∈ {-(N+1)/2, 0, 1, 2}`.
    pub fn default_for(dim: usize) -> Self {
        Self {
            moment_orders: vec![T::lit(2.0), T::lit(4.0), T::lit(6.0)],
            lp_orders: vec![(T::lit(2.0), T::zero())],
            hk_orders: vec![
                -T::from_usize_lossy(dim + 1) * T::lit(0.5),
                T::zero(),
                T::one(),
                T::lit(2.0),
            ],
            loss_bound: true,
        }
    }
}

/// Measurements on one state of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord<T> {
    pub step: usize,
    pub t: T,
    pub conserved: ConservedVector<T>,
    pub entropy: T,
    pub l1_dist_m: T,
    /// `(s, ‖f‖_{L¹_s})`.
    pub moments: Vec<(T, T)>,
    /// `((p, s), ‖f‖_{Lᵖ_s})`.
    pub lp_norms: Vec<((T, T), T)>,
    /// `(k, ‖f‖_{Hᵏ})`.
    pub hk_norms: Vec<(T, T)>,
    /// Largest magnitude clipped to zero since the previous record.
    pub sup_neg_clip: T,
    /// `min_v L(f)(v) / (1 + |v|)^γ`, when requested.
    pub loss_bound: Option<T>,
}

impl<T: Real> DiagnosticsRecord<T> {
    pub fn moment(&self, s: T) -> Option<T> {
        self.moments.iter().find(|(o, _)| *o == s).map(|&(_, x)| x)
    }
    pub fn hk(&self, k: T) -> Option<T> {
        self.hk_norms.iter().find(|(o, _)| *o == k).map(|&(_, x)| x)
    }
    pub fn lp(&self, p: T, s: T) -> Option<T> {
        self.lp_norms.iter().find(|(o, _)| *o == (p, s)).map(|&(_, x)| x)
    }
}

/// Evaluates `plan` on `f`; `reference` is the equilibrium the `L¹` distance
/// is measured against.
pub fn measure<T: Real>(
    plan: &DiagnosticsPlan<T>,
    f: &DistributionFunction<T>,
    reference: &DistributionFunction<T>,
    step: usize,
    sup_neg_clip: T,
    op: Option<&CollisionOperator<T>>,
) -> Result<DiagnosticsRecord<T>> {
    f.check_same_grid(reference)?;
    let grid = f.grid();
    let values = f.values();
    let lp_norms = plan
        .lp_orders
        .iter()
        .map(|&(p, s)| Ok(((p, s), weighted_lp_values(grid, values, p, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let loss_bound = match (plan.loss_bound, op) {
        (true, Some(op)) => Some(loss_lower_bound_fit(op, f)?),
        _ => None,
    };
    Ok(DiagnosticsRecord {
        step,
        t: f.time(),
        conserved: conserved_of_values(grid, values),
        entropy: entropy_values(grid, values),
        l1_dist_m: l1_distance_values(grid, values, reference.values()),
        moments: plan
            .moment_orders
            .iter()
            .map(|&s| (s, weighted_l1_values(grid, values, s)))
            .collect(),
        lp_norms,
        hk_norms: plan
            .hk_orders
            .iter()
            .map(|&k| (k, hk_norm_values(grid, values, k)))
            .collect(),
        sup_neg_clip,
        loss_bound,
    })
}
