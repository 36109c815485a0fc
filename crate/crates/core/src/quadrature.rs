//! Quadrature rules on the unit circle and sphere.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Unit vectors `σ` with positive weights summing to `|S^{N-1}|`.
///
/// Vectors are stored padded to three components; the trailing component is
/// zero in two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule<T> {
    dim: usize,
    nodes: Vec<[T; 3]>,
    weights: Vec<T>,
}

impl<T: Real> SphereRule<T> {
    /// `count` equally spaced angles on the circle, weights `2π / count`.
    pub fn circle(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("circle rule needs at least one node"));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let nodes = (0..count)
            .map(|i| {
                let phi = two_pi * i as f64 / count as f64;
                [T::lit(phi.cos()), T::lit(phi.sin()), T::zero()]
            })
            .collect();
        Ok(Self {
            dim: 2,
            nodes,
            weights: vec![T::lit(two_pi / count as f64); count],
        })
    }

    /// Gauss–Legendre in the polar cosine times a uniform azimuthal rule.
    ///
    /// `count` is split as `polar × azimuthal` with `polar` the largest
    /// divisor of `count` not exceeding `sqrt(count / 2)`, so that e.g.
    /// 72 = 6 × 12.
    pub fn sphere(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid("sphere rule needs at least two nodes"));
        }
        let target = ((count as f64) / 2.0).sqrt().floor().max(1.0) as usize;
        let polar = (1..=target).rev().find(|p| count % p == 0).unwrap_or(1);
        Self::sphere_product(polar, count / polar)
    }

    pub fn sphere_product(polar: usize, azimuthal: usize) -> Result<Self> {
        if polar == 0 || azimuthal == 0 {
            return Err(Error::invalid("sphere rule needs positive polar and azimuthal counts"));
        }
        let (zs, wz) = gauss_legendre(polar);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut nodes = Vec::with_capacity(polar * azimuthal);
        let mut weights = Vec::with_capacity(polar * azimuthal);
        for (z, w) in zs.iter().zip(&wz) {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for j in 0..azimuthal {
                let phi = two_pi * (j as f64 + 0.5) / azimuthal as f64;
                nodes.push([T::lit(rho * phi.cos()), T::lit(rho * phi.sin()), T::lit(*z)]);
                weights.push(T::lit(w * two_pi / azimuthal as f64));
            }
        }
        Ok(Self { dim: 3, nodes, weights })
    }

    /// Rule of the default kind for `dim` with `count` nodes.
    pub fn for_dim(dim: usize, count: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(count),
            3 => Self::sphere(count),
            _ => Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[[T; 3]] {
        &self.nodes
    }
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T; 3], T)> + '_ {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> T {
        crate::scalar::compensated_sum(self.weights.iter().copied())
    }
}

/// Surface measure of `S^{N-1}`.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}
