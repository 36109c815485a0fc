//! Truncated cell-centred velocity lattice and grid functions on it.

use crate::error::{Error, Result};
use crate::quadrature::SphereRule;
use crate::scalar::{compensated_sum, Real};
use std::sync::Arc;

/// Uniform Cartesian lattice on `[-L, L)^N` with `n` cell-centred nodes per
/// axis, `v_i = -L + (i + 1/2) Δ`, `Δ = 2L / n`, plus the sphere rule used by
/// the collision integral.
///
/// Flat node indices are row-major with axis 0 outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid<T> {
    dim: usize,
    half_width: T,
    points_per_axis: usize,
    spacing: T,
    cell_volume: T,
    sphere: SphereRule<T>,
}

impl<T: Real> VelocityGrid<T> {
    pub fn new(dim: usize, half_width: T, points_per_axis: usize, sphere_nodes: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidConfig(format!("N must be 2 or 3, got {dim}")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidConfig(format!("L must be positive, got {half_width}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "n must be even and >= 8, got {points_per_axis}"
            )));
        }
        if sphere_nodes < 8 {
            return Err(Error::InvalidConfig(format!(
                "n_sigma must be >= 8, got {sphere_nodes}"
            )));
        }
        let spacing = (half_width + half_width) / T::from_usize_lossy(points_per_axis);
        let cell_volume = spacing.powi(dim as i32);
        let sphere = SphereRule::for_dim(dim, sphere_nodes)?;
        Ok(Self {
            dim,
            half_width,
            points_per_axis,
            spacing,
            cell_volume,
            sphere,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> T {
        self.half_width
    }
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }
    pub fn spacing(&self) -> T {
        self.spacing
    }
    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }
    pub fn sphere(&self) -> &SphereRule<T> {
        &self.sphere
    }
    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Same lattice and sphere rule (what collision tables depend on).
    pub fn same_layout(&self, other: &Self) -> bool {
        self == other
    }

    /// Coordinate of node `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        -self.half_width + (T::from_usize_lossy(i) + T::lit(0.5)) * self.spacing
    }

    /// Axis coordinates of all nodes.
    pub fn axis(&self) -> Vec<T> {
        (0..self.points_per_axis).map(|i| self.coord(i)).collect()
    }

    /// Multi-index of a flat node index (unused trailing entries are zero).
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Velocity of a flat node (padded to three components).
    #[inline]
    pub fn velocity(&self, flat: usize) -> [T; 3] {
        let m = self.multi_index(flat);
        let mut v = [T::zero(); 3];
        for a in 0..self.dim {
            v[a] = self.coord(m[a]);
        }
        v
    }

    pub fn velocities(&self) -> Vec<[T; 3]> {
        (0..self.node_count()).map(|i| self.velocity(i)).collect()
    }

    /// Squared speeds `|v|²` of all nodes.
    pub fn speeds_squared(&self) -> Vec<T> {
        self.velocities()
            .iter()
            .map(|v| v[..self.dim].iter().map(|&x| x * x).sum())
            .collect()
    }

    /// Interpolation domain `[-L + Δ/2, L - Δ/2]` per axis.
    pub fn interior_bounds(&self) -> (T, T) {
        let h = self.spacing * T::lit(0.5);
        (-self.half_width + h, self.half_width - h)
    }
}

/// Nonnegative samples of `f(t, ·)` on a [`VelocityGrid`].
#[derive(Clone, Debug)]
pub struct DistributionFunction<T> {
    grid: Arc<VelocityGrid<T>>,
    values: Vec<T>,
    time: T,
}

impl<T: Real> DistributionFunction<T> {
    pub fn new(grid: Arc<VelocityGrid<T>>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::invalid(format!(
                "distribution values must be finite and >= 0, found {bad}"
            )));
        }
        if time < T::zero() || !time.is_finite() {
            return Err(Error::invalid("time stamp must be finite and >= 0"));
        }
        Ok(Self { grid, values, time })
    }

    /// Wraps values without the nonnegativity check; used for intermediate
    /// stages that may carry small negative undershoots before clipping.
    pub fn from_raw(grid: Arc<VelocityGrid<T>>, values: Vec<T>, time: T) -> Self {
        assert_eq!(values.len(), grid.node_count());
        Self { grid, values, time }
    }

    pub fn zeros(grid: Arc<VelocityGrid<T>>) -> Self {
        let n = grid.node_count();
        Self::from_raw(grid, vec![T::zero(); n], T::zero())
    }

    /// Samples `f(v)` at every node.
    pub fn from_fn(grid: Arc<VelocityGrid<T>>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|i| {
                let v = grid.velocity(i);
                f(&v[..dim])
            })
            .collect();
        Self::new(grid, values, T::zero())
    }

    pub fn grid(&self) -> &VelocityGrid<T> {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<VelocityGrid<T>> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn time(&self) -> T {
        self.time
    }
    pub fn set_time(&mut self, t: T) {
        self.time = t;
    }

    /// Same grid function with new values (keeps grid and time).
    pub fn with_values(&self, values: Vec<T>) -> Self {
        Self::from_raw(self.grid.clone(), values, self.time)
    }

    /// Discrete mass `Σ f Δv`.
    pub fn mass(&self) -> T {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn scaled(&self, c: T) -> Self {
        self.with_values(self.values.iter().map(|&x| x * c).collect())
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("distributions live on different grids".into()))
        }
    }
}

/// Locates `x` along one axis: `Some((base, frac))` with the coordinate equal
/// to `base + frac` in index units, `None` outside the interpolation domain.
#[inline]
fn locate<T: Real>(grid: &VelocityGrid<T>, x: T) -> Option<(usize, T)> {
    let n = grid.points_per_axis();
    let mut g = (x + grid.half_width()) / grid.spacing() - T::lit(0.5);
    // positions within rounding of a node count as that node
    let r = g.round();
    if (g - r).abs() <= T::lit(1e-12) * T::one().max(g.abs()) {
        g = r;
    }
    let last = T::from_usize_lossy(n - 1);
    if !(g >= T::zero()) || g > last {
        return None;
    }
    let base = g.floor().to_usize().unwrap_or(0).min(n - 2);
    Some((base, g - T::from_usize_lossy(base)))
}

/// Multilinear interpolation of `f` at `v` from the `2^N` surrounding nodes.
///
/// Outside `[-L + Δ/2, L - Δ/2]^N` the result is `0` (truncation).
pub fn interpolate<T: Real>(f: &DistributionFunction<T>, v: &[T]) -> T {
    interpolate_values(f.grid(), f.values(), v)
}

/// [`interpolate`] on a raw value slice laid out on `grid`.
pub fn interpolate_values<T: Real>(grid: &VelocityGrid<T>, values: &[T], v: &[T]) -> T {
    let dim = grid.dim();
    let n = grid.points_per_axis();
    let mut base = [0usize; 3];
    let mut frac = [T::zero(); 3];
    for a in 0..dim {
        match locate(grid, v[a]) {
            Some((b, t)) => {
                base[a] = b;
                frac[a] = t;
            }
            None => return T::zero(),
        }
    }
    let mut acc = T::zero();
    for corner in 0..(1usize << dim) {
        let mut w = T::one();
        let mut flat = 0usize;
        for a in 0..dim {
            let up = (corner >> (dim - 1 - a)) & 1 == 1;
            w *= if up { frac[a] } else { T::one() - frac[a] };
            flat = flat * n + base[a] + usize::from(up);
        }
        if w != T::zero() {
            acc += w * values[flat];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2(n: usize) -> Arc<VelocityGrid<f64>> {
        Arc::new(VelocityGrid::new(2, 8.0, n, 32).unwrap())
    }

    #[test]
    fn make_grid_examples() {
        let g = VelocityGrid::<f64>::new(2, 8.0, 32, 32).unwrap();
        assert_eq!(g.cell_volume(), 0.25);
        assert!((g.sphere().total_weight() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let g3 = VelocityGrid::<f64>::new(3, 8.0, 16, 72).unwrap();
        assert!((g3.sphere().total_weight() - 4.0 * std::f64::consts::PI).abs() < 1e-11);
        assert_eq!(g3.node_count(), 4096);
    }

    #[test]
    fn make_grid_rejects_bad_config() {
        assert!(matches!(
            VelocityGrid::<f64>::new(2, 8.0, 31, 32),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            VelocityGrid::<f64>::new(2, 0.0, 32, 32),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            VelocityGrid::<f64>::new(2, -1.0, 32, 32),
            Err(Error::InvalidConfig(_))
        ));
        assert!(VelocityGrid::<f64>::new(4, 8.0, 32, 32).is_err());
        assert!(VelocityGrid::<f64>::new(2, 8.0, 6, 32).is_err());
        assert!(VelocityGrid::<f64>::new(2, 8.0, 32, 4).is_err());
    }

    #[test]
    fn node_coordinates_are_cell_centred() {
        let g = grid2(32);
        assert_eq!(g.coord(0), -7.75);
        assert_eq!(g.coord(31), 7.75);
        assert_eq!(g.coord(16), 0.25);
        let v = g.velocity(g.flat_index(&[3, 5]));
        assert_eq!(v, [g.coord(3), g.coord(5), 0.0]);
        assert_eq!(g.multi_index(g.flat_index(&[3, 5])), [3, 5, 0]);
    }

    #[test]
    fn interpolation_examples() {
        let g = grid2(16);
        let f = DistributionFunction::from_fn(g.clone(), |v| 5.0 + v[0] * v[0] + 0.5 * v[1]).unwrap();
        // at a node
        let i = g.flat_index(&[4, 9]);
        let v = g.velocity(i);
        assert_eq!(interpolate(&f, &v[..2]), f.values()[i]);
        // edge midpoint
        let j = g.flat_index(&[5, 9]);
        let mid = [(v[0] + g.velocity(j)[0]) / 2.0, v[1]];
        let expect = 0.5 * (f.values()[i] + f.values()[j]);
        assert!((interpolate(&f, &mid) - expect).abs() < 1e-14);
        // truncation
        assert_eq!(interpolate(&f, &[16.0, 0.0]), 0.0);
        let (_, hi) = g.interior_bounds();
        assert!(interpolate(&f, &[hi, 0.25]) > 0.0);
        assert_eq!(interpolate(&f, &[hi + 1e-9, 0.25]), 0.0);
    }

    #[test]
    fn interpolation_on_3d_affine_data() {
        let g = Arc::new(VelocityGrid::<f64>::new(3, 4.0, 8, 8).unwrap());
        let f = DistributionFunction::from_fn(g.clone(), |v| 15.0 + v[0] - 2.0 * v[1] + 0.25 * v[2]).unwrap();
        let p = [0.3, -1.7, 2.2];
        assert!((interpolate(&f, &p) - (15.0 + 0.3 + 3.4 + 0.55)).abs() < 1e-13);
    }

    #[test]
    fn distribution_rejects_negative_values() {
        let g = grid2(8);
        let mut vals = vec![1.0; 64];
        vals[3] = -1e-3;
        assert!(DistributionFunction::new(g.clone(), vals, 0.0).is_err());
        assert!(DistributionFunction::new(g, vec![1.0; 10], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_exact_on_affine(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
                                         x in -7.74f64..7.74, y in -7.74f64..7.74) {
            let g = grid2(32);
            let f = DistributionFunction::from_raw(g.clone(),
                g.velocities().iter().map(|v| a + b * v[0] + c * v[1]).collect(), 0.0);
            let got = interpolate(&f, &[x, y]);
            prop_assert!((got - (a + b * x + c * y)).abs() < 1e-12);
        }

        #[test]
        fn interpolation_is_monotone(vals in proptest::collection::vec(0.0f64..5.0, 64),
                                     x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let g = Arc::new(VelocityGrid::new(2, 8.0, 8, 8).unwrap());
            let f = DistributionFunction::new(g.clone(), vals.clone(), 0.0).unwrap();
            let got = interpolate(&f, &[x, y]);
            prop_assert!(got >= 0.0);
            prop_assert!(got <= vals.iter().cloned().fold(0.0, f64::max) + 1e-12);
        }
    }
}
