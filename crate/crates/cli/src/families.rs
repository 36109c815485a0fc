//! Seeded test families used by the property scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softbolt::{Distribution, Grid, State};
use std::sync::Arc;

/// Independent uniform `[0, 1)` values at every node.
pub fn random_nonnegative(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<Distribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let vals = (0..grid.node_count()).map(|_| rng.gen::<f64>()).collect();
            Distribution::new(grid.clone(), vals, 0.0).expect("values are nonnegative")
        })
        .collect()
}

/// One member of the smooth family: its Maxwellian components.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub components: Vec<State>,
}

impl Mixture {
    pub fn sample(&self, grid: &Arc<Grid>) -> softbolt::Result<Distribution> {
        Distribution::from_fn(grid.clone(), |v| self.components.iter().map(|c| c.density_at(v)).sum())
    }
}

/// Mixtures of 1 to 3 Maxwellians with densities in `[0.2, 1]`,
/// temperatures in `[0.6, 1.5]` and bulk speeds `|u| ≤ 1.5`.
pub fn smooth_mixtures(dim: usize, count: usize, seed: u64) -> Vec<Mixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let components = (0..k)
                .map(|_| {
                    let rho = rng.gen_range(0.2..=1.0);
                    let t = rng.gen_range(0.6..=1.5);
                    // uniform in the ball of radius 1.5 by rejection
                    let u = loop {
                        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..=1.5)).collect();
                        if u.iter().map(|x| x * x).sum::<f64>() <= 2.25 {
                            break u;
                        }
                    };
                    State::new(rho, u, t)
                })
                .collect();
            Mixture { components }
        })
        .collect()
}
