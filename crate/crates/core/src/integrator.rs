//! Explicit time stepping of `∂f/∂t = Q(f,f)` with positivity clipping and
//! projection onto the conserved mass, momentum and energy.

use crate::collision::{CollisionOperator, CollisionParts};
use crate::diagnostics::{entropy_values, measure, DiagnosticsPlan, DiagnosticsRecord};
use crate::equilibrium::{conserved_of_values, macroscopic_moments, maxwellian, ConservedVector, MacroState};
use crate::error::{Error, Result};
use crate::grid::{DistributionFunction, VelocityGrid};
use crate::scalar::{CompensatedSum, Real};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    /// Heun's method.
    #[default]
    Rk2,
}

/// Shape of the conservation correction `δf = w · Σ λᵢ ψᵢ`,
/// `ψ ∈ {1, v₁, …, v_N, |v|²}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum ProjectionWeight<T> {
    /// `w = f`: the correction is relative, so zeros stay zero.
    #[default]
    State,
    /// `w = M` for the given equilibrium.
    Maxwellian(MacroState<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub scheme: Scheme,
    pub safety_factor: T,
    pub t_end: T,
    pub output_stride: usize,
    pub conservation_projection: bool,
    pub positivity_clip: bool,
    pub projection_weight: ProjectionWeight<T>,
    /// Largest tolerated per-step entropy increase.
    pub entropy_tolerance: T,
    /// Largest tolerated relative drift of the conserved vector when
    /// projection is on.
    pub drift_tolerance: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk2,
            safety_factor: T::lit(0.5),
            t_end: T::lit(20.0),
            output_stride: 1,
            conservation_projection: true,
            positivity_clip: true,
            projection_weight: ProjectionWeight::State,
            entropy_tolerance: T::lit(1e-9),
            drift_tolerance: T::lit(1e-10),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety_factor > T::zero() && self.safety_factor <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "safety_factor must lie in (0, 1], got {}",
                self.safety_factor
            )));
        }
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidConfig("output_stride must be >= 1".into()));
        }
        Ok(())
    }
}

fn max_of<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::zero(), T::max)
}

fn dt_from_rate<T: Real>(rate: &[T], safety: T) -> Result<T> {
    let m = max_of(rate);
    if !(m > T::zero()) {
        return Err(Error::DegenerateState(
            "collision frequency vanishes identically".into(),
        ));
    }
    Ok(safety / m)
}

/// `dt = safety / max_v L(f)(v)`.
pub fn stable_dt<T: Real>(op: &CollisionOperator<T>, f: &DistributionFunction<T>, safety: T) -> Result<T> {
    dt_from_rate(&op.loss_rate(f)?, safety)
}

/// Result of one accepted step.
#[derive(Clone, Debug)]
pub struct StepOutcome<T> {
    pub state: DistributionFunction<T>,
    /// Largest magnitude clipped to zero.
    pub clipped: T,
}

/// Advances `f` by `dt`, then clips and projects back onto the conserved
/// vector of `f` as configured.
pub fn step<T: Real>(
    op: &CollisionOperator<T>,
    f: &DistributionFunction<T>,
    dt: T,
    cfg: &IntegratorConfig<T>,
) -> Result<StepOutcome<T>> {
    let target = conserved_of_values(f.grid(), f.values());
    step_to_target(op, f, dt, cfg, &target)
}

/// [`step`] with an explicit projection target.
pub fn step_to_target<T: Real>(
    op: &CollisionOperator<T>,
    f: &DistributionFunction<T>,
    dt: T,
    cfg: &IntegratorConfig<T>,
    target: &ConservedVector<T>,
) -> Result<StepOutcome<T>> {
    if !f.grid().same_layout(op.grid()) {
        return Err(Error::GridMismatch(
            "distribution grid differs from the operator grid".into(),
        ));
    }
    if dt == T::zero() {
        return Ok(StepOutcome {
            state: f.clone(),
            clipped: T::zero(),
        });
    }
    let parts = op.parts_values(f.values());
    let max_dt = dt_from_rate(&parts.loss_rate, T::one())?;
    if !(dt > T::zero()) || dt > max_dt * (T::one() + T::lit(1e-12)) {
        return Err(Error::StepTooLarge {
            dt: dt.to_f64_lossy(),
            max_dt: max_dt.to_f64_lossy(),
        });
    }
    advance(op, f, dt, cfg, target, parts)
}

fn axpy<T: Real>(base: &[T], a: T, dir: &[T]) -> Vec<T> {
    base.iter().zip(dir).map(|(&x, &d)| x + a * d).collect()
}

fn advance<T: Real>(
    op: &CollisionOperator<T>,
    f: &DistributionFunction<T>,
    dt: T,
    cfg: &IntegratorConfig<T>,
    target: &ConservedVector<T>,
    parts: CollisionParts<T>,
) -> Result<StepOutcome<T>> {
    let k1 = parts.collision(f.values());
    let mut next = match cfg.scheme {
        Scheme::Euler => axpy(f.values(), dt, &k1),
        Scheme::Rk2 => {
            let mid = axpy(f.values(), dt, &k1);
            let k2 = op.parts_values(&mid).collision(&mid);
            let half = dt * T::lit(0.5);
            f.values()
                .iter()
                .zip(k1.iter().zip(&k2))
                .map(|(&x, (&a, &b))| x + half * (a + b))
                .collect()
        }
    };
    let mut clipped = T::zero();
    if cfg.positivity_clip {
        for x in next.iter_mut() {
            if *x < T::zero() {
                clipped = clipped.max(-*x);
                *x = T::zero();
            }
        }
    }
    if cfg.conservation_projection {
        next = project_values(f.grid(), next, target, &cfg.projection_weight)?;
    }
    let mut state = DistributionFunction::from_raw(f.grid_arc().clone(), next, f.time() + dt);
    state.set_time(f.time() + dt);
    Ok(StepOutcome { state, clipped })
}

/// Moment basis `ψ(v) = (1, v₁, …, v_N, |v|²)`.
fn basis<T: Real>(v: &[T; 3], dim: usize) -> [T; 5] {
    let mut psi = [T::zero(); 5];
    psi[0] = T::one();
    let mut v2 = T::zero();
    for k in 0..dim {
        psi[1 + k] = v[k];
        v2 += v[k] * v[k];
    }
    psi[dim + 1] = v2;
    psi
}

/// Returns `f + w Σ λᵢ ψᵢ` whose discrete conserved vector equals `target`.
pub fn project_conserved<T: Real>(
    f: &DistributionFunction<T>,
    target: &ConservedVector<T>,
    weight: &ProjectionWeight<T>,
) -> Result<DistributionFunction<T>> {
    let values = project_values(f.grid(), f.values().to_vec(), target, weight)?;
    Ok(DistributionFunction::from_raw(f.grid_arc().clone(), values, f.time()))
}

fn project_values<T: Real>(
    grid: &VelocityGrid<T>,
    mut values: Vec<T>,
    target: &ConservedVector<T>,
    weight: &ProjectionWeight<T>,
) -> Result<Vec<T>> {
    let dim = grid.dim();
    let m = dim + 2;
    let goal = target.to_vec();
    if goal.len() != m {
        return Err(Error::invalid("target conserved vector has the wrong dimension"));
    }
    let reference = match weight {
        ProjectionWeight::State => None,
        ProjectionWeight::Maxwellian(s) => Some(s),
    };
    // a second pass removes the rounding left by the first
    for _ in 0..2 {
        let current = conserved_of_values(grid, &values).to_vec();
        let defect: Vec<T> = goal.iter().zip(&current).map(|(&g, &c)| g - c).collect();
        if defect.iter().all(|&d| d == T::zero()) {
            break;
        }
        let w: Vec<T> = match reference {
            None => values.clone(),
            Some(s) => (0..grid.node_count())
                .map(|i| s.density_at(&grid.velocity(i)[..dim]))
                .collect(),
        };
        let mut a = vec![vec![CompensatedSum::new(); m]; m];
        for (i, &wi) in w.iter().enumerate() {
            if wi == T::zero() {
                continue;
            }
            let psi = basis(&grid.velocity(i), dim);
            for r in 0..m {
                for c in r..m {
                    a[r][c].add(wi * psi[r] * psi[c]);
                }
            }
        }
        let dv = grid.cell_volume();
        let mut mat = vec![vec![T::zero(); m]; m];
        for r in 0..m {
            for c in r..m {
                let x = a[r][c].value() * dv;
                mat[r][c] = x;
                mat[c][r] = x;
            }
        }
        let lambda = solve(mat, defect)?;
        for (i, x) in values.iter_mut().enumerate() {
            let psi = basis(&grid.velocity(i), dim);
            let corr: T = (0..m).map(|r| lambda[r] * psi[r]).sum();
            *x += w[i] * corr;
        }
    }
    Ok(values)
}

/// Gaussian elimination with partial pivoting and one refinement sweep.
fn solve<T: Real>(a: Vec<Vec<T>>, b: Vec<T>) -> Result<Vec<T>> {
    let x = eliminate(a.clone(), b.clone())?;
    let r: Vec<T> = (0..b.len())
        .map(|i| b[i] - a[i].iter().zip(&x).map(|(&p, &q)| p * q).sum::<T>())
        .collect();
    let dx = eliminate(a, r)?;
    Ok(x.iter().zip(&dx).map(|(&p, &q)| p + q).collect())
}

fn eliminate<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let m = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |s, &x| s.max(x.abs()));
    if !(scale > T::zero()) {
        return Err(Error::Projection("moment matrix vanishes".into()));
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if !(a[piv][col].abs() > T::lit(1e-14) * scale) {
            return Err(Error::Projection("moment matrix is singular".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for c in col..m {
                let v = a[col][c];
                a[row][c] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); m];
    for row in (0..m).rev() {
        let s: T = (row + 1..m).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Records and final state of a run.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub records: Vec<DiagnosticsRecord<T>>,
    pub final_state: DistributionFunction<T>,
    pub steps: usize,
    /// Equilibrium built from the initial moments.
    pub reference: MacroState<T>,
}

/// Relative drift of each conserved component; components with
/// `|c₀| ≤ 10⁻¹² ρ₀` are measured in absolute terms.
pub fn conservation_drift<T: Real>(c0: &ConservedVector<T>, c: &ConservedVector<T>) -> Vec<(String, T)> {
    let a = c0.to_vec();
    let b = c.to_vec();
    let dim = a.len() - 2;
    let mass = a[0].abs();
    let axes = ["x", "y", "z"];
    let names: Vec<String> = std::iter::once("mass".to_string())
        .chain((0..dim).map(|k| format!("momentum_{}", axes[k])))
        .chain(std::iter::once("energy".to_string()))
        .collect();
    names
        .into_iter()
        .zip(a.iter().zip(&b))
        .map(|(name, (&x, &y))| {
            let scale = if x.abs() <= T::lit(1e-12) * mass {
                T::one()
            } else {
                x.abs()
            };
            (name, (y - x).abs() / scale)
        })
        .collect()
}

/// Advances `f0` to `cfg.t_end`. A record is taken at step 0, every
/// `output_stride` steps and at the final step; `observer` sees each one as
/// it is produced.
pub fn run<T: Real>(
    op: &CollisionOperator<T>,
    f0: &DistributionFunction<T>,
    cfg: &IntegratorConfig<T>,
    plan: &DiagnosticsPlan<T>,
    mut observer: impl FnMut(&DiagnosticsRecord<T>),
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    if !f0.grid().same_layout(op.grid()) {
        return Err(Error::GridMismatch(
            "initial datum grid differs from the operator grid".into(),
        ));
    }
    let reference = macroscopic_moments(f0)?;
    let m_ref = maxwellian(&reference, f0.grid_arc())?;
    let target = conserved_of_values(f0.grid(), f0.values());
    let mut records = Vec::new();
    let first = measure(plan, f0, &m_ref, 0, T::zero(), Some(op))?;
    observer(&first);
    records.push(first);

    let mut f = f0.clone();
    let mut h_prev = entropy_values(f.grid(), f.values());
    let mut clip_since_record = T::zero();
    let mut steps = 0usize;
    let t_start = f0.time();
    let t_final = t_start + cfg.t_end;
    while f.time() < t_final {
        let parts = op.parts_values(f.values());
        let dt_max = dt_from_rate(&parts.loss_rate, cfg.safety_factor)?;
        let remaining = t_final - f.time();
        let last = remaining <= dt_max * (T::one() + T::lit(1e-12));
        let dt = if last { remaining } else { dt_max };
        let out = advance(op, &f, dt, cfg, &target, parts)?;
        f = out.state;
        if last {
            f.set_time(t_final);
        }
        steps += 1;
        clip_since_record = clip_since_record.max(out.clipped);

        let h = entropy_values(f.grid(), f.values());
        if h - h_prev > cfg.entropy_tolerance {
            return Err(Error::EntropyIncrease {
                step: steps,
                t: f.time().to_f64_lossy(),
                increase: (h - h_prev).to_f64_lossy(),
                tolerance: cfg.entropy_tolerance.to_f64_lossy(),
            });
        }
        h_prev = h;
        if cfg.conservation_projection {
            let c = conserved_of_values(f.grid(), f.values());
            for (name, d) in conservation_drift(&target, &c) {
                if d > cfg.drift_tolerance {
                    return Err(Error::ConservationDrift {
                        quantity: name,
                        drift: d.to_f64_lossy(),
                        tolerance: cfg.drift_tolerance.to_f64_lossy(),
                        t: f.time().to_f64_lossy(),
                    });
                }
            }
        }
        if steps % cfg.output_stride == 0 || last {
            let rec = measure(plan, &f, &m_ref, steps, clip_since_record, Some(op))?;
            observer(&rec);
            records.push(rec);
            clip_since_record = T::zero();
        }
        if last {
            break;
        }
    }
    Ok(Trajectory {
        records,
        final_state: f,
        steps,
        reference,
    })
}
