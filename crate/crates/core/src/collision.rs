//! Discrete Boltzmann collision operator on a [`VelocityGrid`].
//!
//! For an output node `v` and a partner node `v*`, the post-collision
//! velocities
//!
//! ```text
//! v'  = (v + v*)/2 + |v - v*|/2 σ
//! v'* = (v + v*)/2 - |v - v*|/2 σ
//! ```
//!
//! sit at offsets from `v` that depend only on the lattice difference
//! `a = v - v*` (in index units) and on `σ`. The tables therefore store one
//! stencil per `(a, σ)` with `a ∈ [-(n-1), n-1]^N`; every ordered node pair
//! reuses the stencil of its difference.
//!
//! The gain term gathers `g(v'*) f(v')` by multilinear interpolation. In
//! [`InterpolationMode::MaxwellianWeighted`] (the default) the interpolated
//! quantity is `f / M_f`, with `M_f` the Maxwellian sharing the moments of
//! `f`; the interpolant is multiplied back by `M_f` at the off-grid point.
//! This keeps positivity, and the discrete gain and loss balance exactly on
//! Maxwellians up to domain truncation. Since `M(v') M(v'*) = M(v) M(v*)`, the
//! weight factors out of the sphere sum when both arguments share a reference.

use crate::equilibrium::{macroscopic_moments, MacroState};
use crate::error::{Error, Result};
use crate::grid::{DistributionFunction, VelocityGrid};
use crate::kernel::CollisionKernel;
use crate::scalar::{CompensatedSum, Real};
use rayon::prelude::*;
use std::sync::Arc;

/// `v' = c + (r/2) σ`, `v'* = c - (r/2) σ` with `c = (v + v*)/2`, `r = |v - v*|`.
pub fn post_collision<T: Real>(v: &[T], v_star: &[T], sigma: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if v.len() != v_star.len() || v.len() != sigma.len() {
        return Err(Error::invalid("velocity and sigma dimensions differ"));
    }
    let norm2: T = sigma.iter().map(|&s| s * s).sum();
    if (norm2.sqrt() - T::one()).abs() > T::lit(1e-12) {
        return Err(Error::invalid(format!(
            "sigma must be a unit vector, |sigma| = {}",
            norm2.sqrt()
        )));
    }
    let half = T::lit(0.5);
    let r: T = v.iter().zip(v_star).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
    let mut vp = Vec::with_capacity(v.len());
    let mut vsp = Vec::with_capacity(v.len());
    for k in 0..v.len() {
        let c = (v[k] + v_star[k]) * half;
        vp.push(c + half * r * sigma[k]);
        vsp.push(c - half * r * sigma[k]);
    }
    Ok((vp, vsp))
}

/// Interpolation stencil relative to the output node, in index units:
/// the target sits at `node + offset + frac`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil<T> {
    pub offset: [i32; 3],
    pub frac: [T; 3],
    /// `1` when the upper neighbour along the axis carries weight.
    upper: [i32; 3],
}

impl<T: Real> Stencil<T> {
    fn from_position(dim: usize, pos: [T; 3]) -> Self {
        let mut offset = [0i32; 3];
        let mut frac = [T::zero(); 3];
        let mut upper = [0i32; 3];
        let snap = T::lit(1e-12);
        for k in 0..dim {
            let mut p = pos[k];
            let r = p.round();
            if (p - r).abs() <= snap * T::one().max(p.abs()) {
                p = r;
            }
            let fl = p.floor();
            offset[k] = fl.to_i32().expect("stencil offset fits i32");
            frac[k] = p - fl;
            upper[k] = i32::from(frac[k] != T::zero());
        }
        Self { offset, frac, upper }
    }
}

/// Precomputed data for one lattice difference `a` and one sphere node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableEntry<T> {
    /// `Φ(|v - v*|) b(cos θ) w_σ Δv`.
    pub weight: T,
    /// `σ · (v - v*) / |v - v*|`, `1` when `v = v*`.
    pub cos_theta: T,
    /// Stencil of `v'`.
    pub plus: Stencil<T>,
    /// Stencil of `v'*`.
    pub minus: Stencil<T>,
}

fn compute_entry<T: Real>(grid: &VelocityGrid<T>, kernel: &CollisionKernel<T>, a: [i32; 3], s: usize) -> TableEntry<T> {
    let dim = grid.dim();
    let (sigma, w_sigma) = (grid.sphere().nodes()[s], grid.sphere().weights()[s]);
    let mut norm2 = T::zero();
    let mut dot = T::zero();
    for k in 0..dim {
        let ak = T::lit(f64::from(a[k]));
        norm2 += ak * ak;
        dot += ak * sigma[k];
    }
    let norm = norm2.sqrt();
    let cos_theta = if norm == T::zero() {
        T::one()
    } else {
        (dot / norm).max(-T::one()).min(T::one())
    };
    let r = norm * grid.spacing();
    let weight = kernel.phi_unchecked(r) * kernel.b_unchecked(cos_theta) * w_sigma * grid.cell_volume();
    let half = T::lit(0.5);
    let mut pp = [T::zero(); 3];
    let mut pm = [T::zero(); 3];
    for k in 0..dim {
        let ak = T::lit(f64::from(a[k]));
        pp[k] = (-ak + norm * sigma[k]) * half;
        pm[k] = (-ak - norm * sigma[k]) * half;
    }
    TableEntry {
        weight,
        cos_theta,
        plus: Stencil::from_position(dim, pp),
        minus: Stencil::from_position(dim, pm),
    }
}

/// Default cap on table memory.
pub const DEFAULT_TABLE_CAP_BYTES: usize = 512 << 20;

/// Collision quadrature tables for one `(grid, kernel)` pair.
#[derive(Clone, Debug)]
pub struct CollisionTables<T> {
    grid: Arc<VelocityGrid<T>>,
    span: usize,
    sigma_count: usize,
    entries: Vec<TableEntry<T>>,
}

/// Number of lattice differences per axis, `2n - 1`.
fn span_of<T: Real>(grid: &VelocityGrid<T>) -> usize {
    2 * grid.points_per_axis() - 1
}

fn difference_count<T: Real>(grid: &VelocityGrid<T>) -> usize {
    span_of(grid).pow(grid.dim() as u32)
}

/// Lattice difference of a flat difference index.
fn difference_of(dim: usize, span: usize, n: usize, mut idx: usize) -> [i32; 3] {
    let mut a = [0i32; 3];
    for k in (0..dim).rev() {
        a[k] = (idx % span) as i32 - (n as i32 - 1);
        idx /= span;
    }
    a
}

impl<T: Real> CollisionTables<T> {
    /// Bytes needed to tabulate `grid`.
    pub fn required_bytes(grid: &VelocityGrid<T>) -> usize {
        difference_count(grid) * grid.sphere().len() * std::mem::size_of::<TableEntry<T>>()
    }

    pub fn build(grid: Arc<VelocityGrid<T>>, kernel: &CollisionKernel<T>) -> Result<Self> {
        Self::build_with_cap(grid, kernel, DEFAULT_TABLE_CAP_BYTES)
    }

    /// Refuses with a sizing report when the tables would exceed `cap_bytes`.
    pub fn build_with_cap(grid: Arc<VelocityGrid<T>>, kernel: &CollisionKernel<T>, cap_bytes: usize) -> Result<Self> {
        let required = Self::required_bytes(&grid);
        let entries = difference_count(&grid) * grid.sphere().len();
        if required > cap_bytes {
            return Err(Error::TablesTooLarge {
                required_bytes: required,
                cap_bytes,
                entries,
                entry_bytes: std::mem::size_of::<TableEntry<T>>(),
            });
        }
        let span = span_of(&grid);
        let n = grid.points_per_axis();
        let dim = grid.dim();
        let ns = grid.sphere().len();
        let entries: Vec<TableEntry<T>> = (0..difference_count(&grid))
            .into_par_iter()
            .flat_map_iter(|d| {
                let a = difference_of(dim, span, n, d);
                let g = &grid;
                (0..ns).map(move |s| compute_entry(g, kernel, a, s))
            })
            .collect();
        Ok(Self {
            grid,
            span,
            sigma_count: ns,
            entries,
        })
    }

    pub fn grid(&self) -> &VelocityGrid<T> {
        &self.grid
    }

    /// Number of `(v, v*, σ)` triples the tables cover, `n^{2N} n_σ`.
    pub fn logical_entry_count(&self) -> usize {
        self.grid.node_count().pow(2) * self.sigma_count
    }

    /// Number of stored stencils, `(2n-1)^N n_σ`.
    pub fn stored_entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn memory_bytes(&self) -> usize {
        self.entries.len() * std::mem::size_of::<TableEntry<T>>()
    }

    fn difference_index(&self, a: &[i32]) -> Option<usize> {
        let n = self.grid.points_per_axis() as i32;
        let mut idx = 0usize;
        for &ak in &a[..self.grid.dim()] {
            if ak.abs() > n - 1 {
                return None;
            }
            idx = idx * self.span + (ak + n - 1) as usize;
        }
        Some(idx)
    }

    /// Entries for the lattice difference `a = v - v*` (one per sphere node).
    pub fn block(&self, a: &[i32]) -> Option<&[TableEntry<T>]> {
        self.difference_index(a)
            .map(|d| &self.entries[d * self.sigma_count..(d + 1) * self.sigma_count])
    }

    /// Entry for the ordered node pair `(v, v*)` and sphere node `s`.
    pub fn entry_for_pair(&self, v: usize, v_star: usize, s: usize) -> &TableEntry<T> {
        let mi = self.grid.multi_index(v);
        let mj = self.grid.multi_index(v_star);
        let a = [
            mi[0] as i32 - mj[0] as i32,
            mi[1] as i32 - mj[1] as i32,
            mi[2] as i32 - mj[2] as i32,
        ];
        &self.block(&a).expect("pair difference within the lattice")[s]
    }

    pub fn entries(&self) -> &[TableEntry<T>] {
        &self.entries
    }
}

/// How off-grid values of the distribution are reconstructed in the gain term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    /// Plain multilinear interpolation of `f`.
    Multilinear,
    /// Multilinear interpolation of `f / M_f`, multiplied back by `M_f`.
    #[default]
    MaxwellianWeighted,
}

/// Smallest node weight `exp(-|v-u|²/2T)` for which the weighted
/// reconstruction is used; below it the plain one takes over.
const MIN_REFERENCE_WEIGHT: f64 = 1e-100;

#[derive(Clone, Debug, PartialEq)]
struct Reference<T> {
    u: [T; 3],
    two_t: T,
}

impl<T: Real> Reference<T> {
    #[inline]
    fn weight(&self, dim: usize, x: &[T; 3]) -> T {
        let mut d2 = T::zero();
        for k in 0..dim {
            d2 += (x[k] - self.u[k]) * (x[k] - self.u[k]);
        }
        (-d2 / self.two_t).exp()
    }
}

/// Per-argument data for the gain gather: the interpolated field and the
/// optional Gaussian it is divided by.
struct Prepared<T> {
    field: Vec<T>,
    reference: Option<Reference<T>>,
    node_weights: Option<Vec<T>>,
}

enum Backend<T> {
    Tables(Arc<CollisionTables<T>>),
    Streaming,
}

/// Gain, loss and full collision operator for one `(grid, kernel)` pair.
pub struct CollisionOperator<T> {
    grid: Arc<VelocityGrid<T>>,
    kernel: CollisionKernel<T>,
    backend: Backend<T>,
    /// `Σ_σ weight(a, σ)` per lattice difference.
    loss_weights: Vec<T>,
    mode: InterpolationMode,
}

/// Gain and loss parts of `Q(f, f)` at every node.
#[derive(Clone, Debug)]
pub struct CollisionParts<T> {
    pub gain: Vec<T>,
    pub loss_rate: Vec<T>,
}

impl<T: Real> CollisionParts<T> {
    /// `Q⁺(f,f) - L(f) f`.
    pub fn collision(&self, f: &[T]) -> Vec<T> {
        self.gain
            .iter()
            .zip(&self.loss_rate)
            .zip(f)
            .map(|((&g, &l), &x)| g - l * x)
            .collect()
    }
}

impl<T: Real> CollisionOperator<T> {
    /// Tabulated operator, falling back to streaming when the tables would
    /// exceed [`DEFAULT_TABLE_CAP_BYTES`].
    pub fn new(grid: Arc<VelocityGrid<T>>, kernel: CollisionKernel<T>) -> Result<Self> {
        Self::with_cap(grid, kernel, DEFAULT_TABLE_CAP_BYTES)
    }

    pub fn with_cap(grid: Arc<VelocityGrid<T>>, kernel: CollisionKernel<T>, cap_bytes: usize) -> Result<Self> {
        match CollisionTables::build_with_cap(grid.clone(), &kernel, cap_bytes) {
            Ok(t) => Self::from_tables(Arc::new(t), kernel),
            Err(Error::TablesTooLarge { .. }) => Ok(Self::streaming(grid, kernel)),
            Err(e) => Err(e),
        }
    }

    pub fn from_tables(tables: Arc<CollisionTables<T>>, kernel: CollisionKernel<T>) -> Result<Self> {
        let grid = tables.grid.clone();
        let loss_weights = tables
            .entries
            .chunks(tables.sigma_count)
            .map(|block| block.iter().map(|e| e.weight).sum())
            .collect();
        Ok(Self {
            grid,
            kernel,
            backend: Backend::Tables(tables),
            loss_weights,
            mode: InterpolationMode::default(),
        })
    }

    /// Operator that recomputes stencils on the fly instead of storing them.
    pub fn streaming(grid: Arc<VelocityGrid<T>>, kernel: CollisionKernel<T>) -> Self {
        let span = span_of(&grid);
        let (dim, n, ns) = (grid.dim(), grid.points_per_axis(), grid.sphere().len());
        let loss_weights = (0..difference_count(&grid))
            .into_par_iter()
            .map(|d| {
                let a = difference_of(dim, span, n, d);
                (0..ns).map(|s| compute_entry(&grid, &kernel, a, s).weight).sum()
            })
            .collect();
        Self {
            grid,
            kernel,
            backend: Backend::Streaming,
            loss_weights,
            mode: InterpolationMode::default(),
        }
    }

    pub fn with_mode(mut self, mode: InterpolationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> InterpolationMode {
        self.mode
    }
    pub fn grid(&self) -> &Arc<VelocityGrid<T>> {
        &self.grid
    }
    pub fn kernel(&self) -> &CollisionKernel<T> {
        &self.kernel
    }
    pub fn is_streaming(&self) -> bool {
        matches!(self.backend, Backend::Streaming)
    }
    pub fn tables(&self) -> Option<&CollisionTables<T>> {
        match &self.backend {
            Backend::Tables(t) => Some(t),
            Backend::Streaming => None,
        }
    }

    fn check_grid(&self, f: &DistributionFunction<T>) -> Result<()> {
        if f.grid().same_layout(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "distribution grid differs from the collision tables' grid".into(),
            ))
        }
    }

    /// `L(g)(v) = Σ_{v*} Σ_σ weight(v - v*, σ) g(v*)`.
    pub fn loss_rate(&self, g: &DistributionFunction<T>) -> Result<Vec<T>> {
        self.check_grid(g)?;
        Ok(self.loss_rate_values(g.values()))
    }

    pub(crate) fn loss_rate_values(&self, g: &[T]) -> Vec<T> {
        let grid = &self.grid;
        let n = grid.points_per_axis();
        let span = span_of(grid);
        let dim = grid.dim();
        (0..grid.node_count())
            .into_par_iter()
            .map(|p| {
                let mp = grid.multi_index(p);
                let mut acc = CompensatedSum::new();
                for (q, &gq) in g.iter().enumerate() {
                    if gq == T::zero() {
                        continue;
                    }
                    let mq = grid.multi_index(q);
                    let mut d = 0usize;
                    for k in 0..dim {
                        d = d * span + (mp[k] + n - 1 - mq[k]);
                    }
                    acc.add(self.loss_weights[d] * gq);
                }
                acc.value()
            })
            .collect()
    }

    fn prepare(&self, f: &[T]) -> Prepared<T> {
        let plain = || Prepared {
            field: f.to_vec(),
            reference: None,
            node_weights: None,
        };
        if self.mode == InterpolationMode::Multilinear {
            return plain();
        }
        let dist = DistributionFunction::from_raw(self.grid.clone(), f.to_vec(), T::zero());
        let state: MacroState<T> = match macroscopic_moments(&dist) {
            Ok(s) if s.is_physical() => s,
            _ => return plain(),
        };
        let dim = self.grid.dim();
        let mut u = [T::zero(); 3];
        u[..dim].copy_from_slice(&state.u);
        let reference = Reference {
            u,
            two_t: T::lit(2.0) * state.temperature,
        };
        let weights: Vec<T> = (0..self.grid.node_count())
            .map(|i| reference.weight(dim, &self.grid.velocity(i)))
            .collect();
        let floor = T::lit(MIN_REFERENCE_WEIGHT);
        if weights.iter().any(|&w| !(w >= floor)) {
            return plain();
        }
        Prepared {
            field: f.iter().zip(&weights).map(|(&x, &w)| x / w).collect(),
            reference: Some(reference),
            node_weights: Some(weights),
        }
    }

    /// `Q⁺(g, f)(v) = Σ_{v*} Σ_σ weight · g(v'*) · f(v')`.
    pub fn gain(&self, g: &DistributionFunction<T>, f: &DistributionFunction<T>) -> Result<Vec<T>> {
        self.check_grid(g)?;
        self.check_grid(f)?;
        Ok(self.gain_values(g.values(), f.values()))
    }

    pub(crate) fn gain_values(&self, g: &[T], f: &[T]) -> Vec<T> {
        let pg = self.prepare(g);
        let pf = if std::ptr::eq(g, f) || g == f {
            None
        } else {
            Some(self.prepare(f))
        };
        let pf_ref = pf.as_ref().unwrap_or(&pg);
        match self.grid.dim() {
            2 => self.gain_impl::<2>(&pg, pf_ref),
            _ => self.gain_impl::<3>(&pg, pf_ref),
        }
    }

    /// `Q(f, f) = Q⁺(f, f) - L(f) f`.
    pub fn collide(&self, f: &DistributionFunction<T>) -> Result<Vec<T>> {
        Ok(self.collide_parts(f)?.collision(f.values()))
    }

    pub fn collide_parts(&self, f: &DistributionFunction<T>) -> Result<CollisionParts<T>> {
        self.check_grid(f)?;
        Ok(self.parts_values(f.values()))
    }

    pub(crate) fn parts_values(&self, f: &[T]) -> CollisionParts<T> {
        CollisionParts {
            gain: self.gain_values(f, f),
            loss_rate: self.loss_rate_values(f),
        }
    }

    fn block<'a>(&'a self, a: [i32; 3], scratch: &'a mut Vec<TableEntry<T>>) -> &'a [TableEntry<T>] {
        match &self.backend {
            Backend::Tables(t) => t.block(&a).expect("difference within lattice"),
            Backend::Streaming => {
                scratch.clear();
                let ns = self.grid.sphere().len();
                scratch.extend((0..ns).map(|s| compute_entry(&self.grid, &self.kernel, a, s)));
                scratch
            }
        }
    }

    fn gain_impl<const D: usize>(&self, pg: &Prepared<T>, pf: &Prepared<T>) -> Vec<T> {
        let grid = &*self.grid;
        let n = grid.points_per_axis() as i32;
        let shared = pg.reference == pf.reference;
        let mut strides = [0usize; D];
        for k in 0..D {
            strides[k] = (grid.points_per_axis()).pow((D - 1 - k) as u32);
        }
        let ctx = GatherCtx::<D> { n, strides };
        (0..grid.node_count())
            .into_par_iter()
            .map_init(Vec::new, |scratch, p| {
                let mp = grid.multi_index(p);
                let mut ip = [0i32; D];
                for k in 0..D {
                    ip[k] = mp[k] as i32;
                }
                let mut acc = CompensatedSum::new();
                for q in 0..grid.node_count() {
                    let mq = grid.multi_index(q);
                    let mut a = [0i32; 3];
                    for k in 0..D {
                        a[k] = ip[k] - mq[k] as i32;
                    }
                    let block = self.block(a, scratch);
                    let s = if shared {
                        let mut s = T::zero();
                        for e in block {
                            let x = ctx.interp(&pg.field, ip, &e.minus);
                            if x == T::zero() {
                                continue;
                            }
                            s += e.weight * x * ctx.interp(&pf.field, ip, &e.plus);
                        }
                        match &pg.node_weights {
                            Some(w) => s * w[q],
                            None => s,
                        }
                    } else {
                        let mut s = T::zero();
                        for e in block {
                            let x = ctx.interp(&pg.field, ip, &e.minus);
                            if x == T::zero() {
                                continue;
                            }
                            let y = ctx.interp(&pf.field, ip, &e.plus);
                            let wx = self.weight_at(pg, ip, &e.minus);
                            let wy = self.weight_at(pf, ip, &e.plus);
                            s += e.weight * x * wx * y * wy;
                        }
                        s
                    };
                    acc.add(s);
                }
                let total = acc.value();
                if shared {
                    match &pg.node_weights {
                        Some(w) => total * w[p],
                        None => total,
                    }
                } else {
                    total
                }
            })
            .collect()
    }

    /// Reference Gaussian evaluated at the stencil's physical position.
    fn weight_at<const D: usize>(&self, prep: &Prepared<T>, ip: [i32; D], st: &Stencil<T>) -> T {
        match &prep.reference {
            None => T::one(),
            Some(r) => {
                let mut x = [T::zero(); 3];
                let h = self.grid.spacing();
                for k in 0..D {
                    let idx = T::lit(f64::from(ip[k] + st.offset[k])) + st.frac[k];
                    x[k] = -self.grid.half_width() + (idx + T::lit(0.5)) * h;
                }
                r.weight(D, &x)
            }
        }
    }
}

struct GatherCtx<const D: usize> {
    n: i32,
    strides: [usize; D],
}

impl<const D: usize> GatherCtx<D> {
    /// Multilinear value of `vals` at `node + stencil`, zero outside the grid.
    #[inline(always)]
    fn interp<T: Real>(&self, vals: &[T], ip: [i32; D], st: &Stencil<T>) -> T {
        let mut base = 0usize;
        let mut up = [0usize; D];
        for k in 0..D {
            let b = ip[k] + st.offset[k];
            if b < 0 || b + st.upper[k] > self.n - 1 {
                return T::zero();
            }
            base += b as usize * self.strides[k];
            up[k] = st.upper[k] as usize * self.strides[k];
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << D) {
            let mut w = T::one();
            let mut idx = base;
            for k in 0..D {
                if (corner >> k) & 1 == 1 {
                    w *= st.frac[k];
                    idx += up[k];
                } else {
                    w *= T::one() - st.frac[k];
                }
            }
            acc += w * vals[idx];
        }
        acc
    }
}
