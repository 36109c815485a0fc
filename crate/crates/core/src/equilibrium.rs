//! Macroscopic moments `(ρ, u, T)` and Maxwellian equilibria on the grid.

use crate::error::{Error, Result};
use crate::grid::{DistributionFunction, VelocityGrid};
use crate::scalar::{CompensatedSum, Real};
use serde::Serialize;
use std::sync::Arc;

/// Density, mean velocity and temperature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroState<T> {
    pub rho: T,
    pub u: Vec<T>,
    #[serde(rename = "T")]
    pub temperature: T,
}

impl<T: Real> MacroState<T> {
    pub fn new(rho: T, u: Vec<T>, temperature: T) -> Self {
        Self { rho, u, temperature }
    }

    /// `ρ = 1`, `u = 0`, `T = 1` in `dim` dimensions.
    pub fn unit(dim: usize) -> Self {
        Self::new(T::one(), vec![T::zero(); dim], T::one())
    }

    pub fn is_physical(&self) -> bool {
        self.rho > T::zero() && self.temperature > T::zero() && self.rho.is_finite() && self.temperature.is_finite()
    }

    /// `M(ρ,u,T)(v) = ρ (2πT)^{-N/2} exp(-|u - v|² / (2T))`.
    pub fn density_at(&self, v: &[T]) -> T {
        let dim = self.u.len();
        let d2: T = v.iter().zip(&self.u).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let norm = (T::lit(2.0) * T::PI() * self.temperature).powf(T::from_usize_lossy(dim) * T::lit(-0.5));
        self.rho * norm * (-d2 / (T::lit(2.0) * self.temperature)).exp()
    }
}

/// Discrete mass, momentum and energy `Σ (1, v, |v|²) f Δv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservedVector<T> {
    pub mass: T,
    pub momentum: Vec<T>,
    pub energy: T,
}

impl<T: Real> ConservedVector<T> {
    /// Flattened as `[mass, momentum..., energy]`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.momentum.len() + 2);
        out.push(self.mass);
        out.extend_from_slice(&self.momentum);
        out.push(self.energy);
        out
    }

    pub fn from_slice(xs: &[T]) -> Self {
        let k = xs.len();
        Self {
            mass: xs[0],
            momentum: xs[1..k - 1].to_vec(),
            energy: xs[k - 1],
        }
    }
}

pub fn conserved_vector<T: Real>(f: &DistributionFunction<T>) -> ConservedVector<T> {
    conserved_of_values(f.grid(), f.values())
}

pub(crate) fn conserved_of_values<T: Real>(grid: &VelocityGrid<T>, values: &[T]) -> ConservedVector<T> {
    let dim = grid.dim();
    let mut mass = CompensatedSum::new();
    let mut mom = vec![CompensatedSum::new(); dim];
    let mut energy = CompensatedSum::new();
    for (i, &fv) in values.iter().enumerate() {
        let v = grid.velocity(i);
        mass.add(fv);
        let mut v2 = T::zero();
        for a in 0..dim {
            mom[a].add(v[a] * fv);
            v2 += v[a] * v[a];
        }
        energy.add(v2 * fv);
    }
    let dv = grid.cell_volume();
    ConservedVector {
        mass: mass.value() * dv,
        momentum: mom.iter().map(|m| m.value() * dv).collect(),
        energy: energy.value() * dv,
    }
}

/// `ρ = Σ f Δv`, `u = Σ v f Δv / ρ`, `T = Σ |u - v|² f Δv / (N ρ)`.
pub fn macroscopic_moments<T: Real>(f: &DistributionFunction<T>) -> Result<MacroState<T>> {
    let grid = f.grid();
    let dim = grid.dim();
    let c = conserved_vector(f);
    if !(c.mass > T::zero()) {
        return Err(Error::DegenerateState("distribution has zero mass".into()));
    }
    let u: Vec<T> = c.momentum.iter().map(|&m| m / c.mass).collect();
    // central second moment, computed directly rather than E - ρ|u|²
    let mut acc = CompensatedSum::new();
    for (i, &fv) in f.values().iter().enumerate() {
        let v = grid.velocity(i);
        let d2: T = (0..dim).map(|a| (v[a] - u[a]) * (v[a] - u[a])).sum();
        acc.add(d2 * fv);
    }
    let temperature = acc.value() * grid.cell_volume() / (T::from_usize_lossy(dim) * c.mass);
    Ok(MacroState::new(c.mass, u, temperature))
}

/// Grid samples of the Maxwellian `M(ρ, u, T)`.
pub fn maxwellian<T: Real>(state: &MacroState<T>, grid: &Arc<VelocityGrid<T>>) -> Result<DistributionFunction<T>> {
    if !(state.temperature > T::zero()) || !state.temperature.is_finite() {
        return Err(Error::DegenerateState(format!(
            "temperature must be positive, got {}",
            state.temperature
        )));
    }
    if !(state.rho >= T::zero()) {
        return Err(Error::DegenerateState(format!(
            "density must be nonnegative, got {}",
            state.rho
        )));
    }
    if state.u.len() != grid.dim() {
        return Err(Error::invalid(format!(
            "mean velocity has {} components, grid dimension is {}",
            state.u.len(),
            grid.dim()
        )));
    }
    DistributionFunction::from_fn(grid.clone(), |v| state.density_at(v))
}
