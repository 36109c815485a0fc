use proptest::prelude::*;
use softbolt::collision::DEFAULT_TABLE_CAP_BYTES;
use softbolt::grid::interpolate_values;
use softbolt::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn grid(n: usize, n_sigma: usize, l: f64) -> Arc<Grid> {
    Arc::new(Grid::new(2, l, n, n_sigma).unwrap())
}

fn canonical() -> Kernel {
    Kernel::power_law(-1.0, 1.0, 1.0)
}

fn constant_kernel() -> Kernel {
    Kernel::constant(1.0, 1.0)
}

fn bimodal(g: &Arc<Grid>) -> Distribution {
    let a = State::new(0.6, vec![1.0, 0.3], 0.5);
    let b = State::new(0.4, vec![-1.0, -0.5], 0.8);
    Distribution::from_fn(g.clone(), |v| {
        a.density_at(v) + b.density_at(v) * (1.0 + 0.3 * v[0].sin())
    })
    .unwrap()
}

/// Gain term by direct enumeration of `(v, v*, σ)` with physical
/// coordinates, `post_collision` and `grid::interpolate`. With `weighted`,
/// each argument is interpolated as `f / M_f` and multiplied by `M_f` at the
/// off-grid point.
fn gain_oracle(op: &Operator, g: &Distribution, f: &Distribution, weighted: bool) -> Vec<f64> {
    let grid = g.grid();
    let dim = grid.dim();
    let k = op.kernel();
    let prep = |d: &Distribution| -> (Vec<f64>, Option<State>) {
        if !weighted {
            return (d.values().to_vec(), None);
        }
        let s = macroscopic_moments(d).unwrap();
        let w = |v: &[f64]| (-(0..dim).map(|a| (v[a] - s.u[a]).powi(2)).sum::<f64>() / (2.0 * s.temperature)).exp();
        let r = (0..grid.node_count())
            .map(|i| d.values()[i] / w(&grid.velocity(i)[..dim]))
            .collect();
        (r, Some(s))
    };
    let (rg, sg) = prep(g);
    let (rf, sf) = prep(f);
    let eval = |vals: &[f64], s: &Option<State>, x: &[f64]| -> f64 {
        let base = interpolate_values(grid, vals, x);
        match s {
            None => base,
            Some(s) => base * (-(0..dim).map(|a| (x[a] - s.u[a]).powi(2)).sum::<f64>() / (2.0 * s.temperature)).exp(),
        }
    };
    (0..grid.node_count())
        .map(|i| {
            let v = &grid.velocity(i)[..dim];
            let mut acc = 0.0;
            for j in 0..grid.node_count() {
                let vs = &grid.velocity(j)[..dim];
                let rel: Vec<f64> = (0..dim).map(|a| v[a] - vs[a]).collect();
                let r = rel.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (sigma, w) in grid.sphere().iter() {
                    let (vp, vsp) = post_collision(v, vs, &sigma[..dim]).unwrap();
                    let cos = if r == 0.0 {
                        1.0
                    } else {
                        (0..dim).map(|a| sigma[a] * rel[a]).sum::<f64>() / r
                    };
                    let weight =
                        k.phi_eval(r).unwrap() * k.b_eval(cos.clamp(-1.0, 1.0)).unwrap() * w * grid.cell_volume();
                    acc += weight * eval(&rg, &sg, &vsp) * eval(&rf, &sf, &vp);
                }
            }
            acc
        })
        .collect()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn post_collision_examples() {
    let (vp, vsp) = post_collision(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert_eq!(vp, vec![0.0, 1.0]);
    assert_eq!(vsp, vec![0.0, -1.0]);
    let (v, vs) = ([2.0f64, 1.0], [-1.0f64, 5.0]);
    let r = 5.0f64;
    let s = [3.0 / r, -4.0 / r];
    let (vp, vsp) = post_collision(&v, &vs, &s).unwrap();
    for a in 0..2 {
        assert!((vp[a] - v[a]).abs() < 1e-15 && (vsp[a] - vs[a]).abs() < 1e-15);
    }
    let (vp, vsp) = post_collision(&v, &vs, &[-s[0], -s[1]]).unwrap();
    for a in 0..2 {
        assert!((vp[a] - vs[a]).abs() < 1e-15 && (vsp[a] - v[a]).abs() < 1e-15);
    }
    assert!(matches!(
        post_collision(&v, &vs, &[1.0, 1.0]),
        Err(Error::InvalidInput(_))
    ));
}

proptest! {
    #[test]
    fn post_collision_conserves_momentum_and_energy(
        v in proptest::array::uniform3(-10.0f64..10.0),
        w in proptest::array::uniform3(-10.0f64..10.0),
        theta in 0.0f64..PI,
        phi in 0.0f64..(2.0 * PI),
    ) {
        let s = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let (vp, vsp) = post_collision(&v, &w, &s).unwrap();
        let e0: f64 = v.iter().chain(&w).map(|x| x * x).sum();
        let e1: f64 = vp.iter().chain(&vsp).map(|x| x * x).sum();
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.max(1.0));
        for a in 0..3 {
            prop_assert!((vp[a] + vsp[a] - v[a] - w[a]).abs() <= 1e-13 * (v[a].abs() + w[a].abs()).max(1.0));
        }
    }
}

#[test]
fn table_entry_counts() {
    let g = grid(16, 16, 8.0);
    let t = Tables::build(g.clone(), &canonical()).unwrap();
    assert_eq!(t.logical_entry_count(), 1_048_576);
    assert_eq!(t.stored_entry_count(), 31 * 31 * 16);
    assert!(t.memory_bytes() < DEFAULT_TABLE_CAP_BYTES);
}

#[test]
fn constant_kernel_weights_are_sphere_weights() {
    let g = grid(8, 12, 4.0);
    let t = Tables::build(g.clone(), &constant_kernel()).unwrap();
    let w = g.sphere().weights();
    for i in 0..g.node_count() {
        for j in 0..g.node_count() {
            for s in 0..w.len() {
                let e = t.entry_for_pair(i, j, s);
                assert!((e.weight - w[s] * g.cell_volume()).abs() < 1e-15);
                assert!(e.cos_theta.abs() <= 1.0);
            }
        }
    }
}

#[test]
fn diagonal_pair_uses_unit_cosine() {
    let g = grid(16, 16, 8.0);
    let k = canonical();
    let t = Tables::build(g.clone(), &k).unwrap();
    let i = g.flat_index(&[5, 9]);
    for (s, &w) in g.sphere().weights().iter().enumerate() {
        let e = t.entry_for_pair(i, i, s);
        assert_eq!(e.cos_theta, 1.0);
        assert_eq!(
            e.weight,
            k.phi_eval(0.0).unwrap() * k.b_eval(1.0).unwrap() * w * g.cell_volume()
        );
        assert_eq!(e.plus.offset, [0, 0, 0]);
        assert_eq!(e.minus.frac, [0.0, 0.0, 0.0]);
    }
}

#[test]
fn cosine_matches_definition() {
    let g = grid(8, 16, 4.0);
    let t = Tables::build(g.clone(), &canonical()).unwrap();
    let (i, j) = (g.flat_index(&[1, 6]), g.flat_index(&[4, 2]));
    let (v, w) = (g.velocity(i), g.velocity(j));
    let rel = [v[0] - w[0], v[1] - w[1]];
    let r = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
    for (s, sigma) in g.sphere().nodes().iter().enumerate() {
        let expect = (sigma[0] * rel[0] + sigma[1] * rel[1]) / r;
        assert!((t.entry_for_pair(i, j, s).cos_theta - expect).abs() < 1e-14);
    }
}

#[test]
fn memory_cap_refuses_and_operator_streams() {
    let g = grid(12, 12, 6.0);
    let k = canonical();
    match Tables::build_with_cap(g.clone(), &k, 1024) {
        Err(Error::TablesTooLarge {
            required_bytes,
            cap_bytes,
            entries,
            ..
        }) => {
            assert_eq!(cap_bytes, 1024);
            assert_eq!(entries, 23 * 23 * 12);
            assert!(required_bytes > cap_bytes);
        }
        other => panic!("expected a sizing refusal, got {other:?}"),
    }
    let streaming = Operator::with_cap(g.clone(), k.clone(), 1024).unwrap();
    assert!(streaming.is_streaming());
    let tabulated = Operator::new(g.clone(), k).unwrap();
    assert!(!tabulated.is_streaming());
    let f = bimodal(&g);
    assert_eq!(streaming.collide(&f).unwrap(), tabulated.collide(&f).unwrap());
}

#[test]
fn constant_kernel_loss_rate_is_two_pi_rho() {
    let g = grid(16, 16, 8.0);
    let op = Operator::new(g.clone(), constant_kernel()).unwrap();
    let f = bimodal(&g);
    let m = f.scaled(1.0 / f.mass());
    for l in op.loss_rate(&m).unwrap() {
        assert!((l - 2.0 * PI).abs() < 1e-12);
    }
}

#[test]
fn loss_rate_matches_direct_convolution() {
    let g = grid(24, 32, 8.0);
    let k = canonical();
    let op = Operator::new(g.clone(), k.clone()).unwrap();
    let m = maxwellian(&State::unit(2), &g).unwrap();
    let got = op.loss_rate(&m).unwrap();
    let fine = SphereRule::<f64>::circle(128).unwrap();
    for i in 0..g.node_count() {
        let v = g.velocity(i);
        let mut acc = 0.0;
        for j in 0..g.node_count() {
            let w = g.velocity(j);
            let rel = [v[0] - w[0], v[1] - w[1]];
            let r = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
            let ang: f64 = fine
                .iter()
                .map(|(s, ws)| {
                    let c = if r == 0.0 {
                        1.0
                    } else {
                        (s[0] * rel[0] + s[1] * rel[1]) / r
                    };
                    ws * k.b_eval(c.clamp(-1.0, 1.0)).unwrap()
                })
                .sum();
            acc += k.phi_eval(r).unwrap() * ang * m.values()[j] * g.cell_volume();
        }
        assert!((got[i] - acc).abs() < 1e-10, "node {i}: {} vs {acc}", got[i]);
    }
}

#[test]
fn gain_of_zero_is_zero() {
    let g = grid(12, 12, 6.0);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let z = Distribution::zeros(g.clone());
    assert!(op.gain(&z, &z).unwrap().iter().all(|&x| x == 0.0));
    assert!(op.collide(&z).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn maxwellian_gain_and_loss_masses_balance() {
    let g = grid(24, 24, 8.0);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let m = maxwellian(&State::unit(2), &g).unwrap();
    let parts = op.collide_parts(&m).unwrap();
    let gain: f64 = parts.gain.iter().sum::<f64>() * g.cell_volume();
    let loss: f64 = parts.loss_rate.iter().zip(m.values()).map(|(l, x)| l * x).sum::<f64>() * g.cell_volume();
    assert!((gain - loss).abs() < 1e-10 * loss, "{gain} vs {loss}");
}

#[test]
fn gain_matches_enumeration_oracle_multilinear() {
    let g = grid(8, 12, 4.0);
    let op = Operator::new(g.clone(), canonical())
        .unwrap()
        .with_mode(InterpolationMode::Multilinear);
    let f = bimodal(&g);
    let h = Distribution::from_fn(g.clone(), |v| 0.2 + (-0.3 * (v[0] * v[0] + v[1] * v[1])).exp()).unwrap();
    assert!(max_rel_diff(&op.gain(&f, &f).unwrap(), &gain_oracle(&op, &f, &f, false)) < 1e-12);
    assert!(max_rel_diff(&op.gain(&h, &f).unwrap(), &gain_oracle(&op, &h, &f, false)) < 1e-12);
}

#[test]
fn gain_matches_enumeration_oracle_weighted() {
    let g = grid(8, 12, 4.0);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    assert_eq!(op.mode(), InterpolationMode::MaxwellianWeighted);
    let f = bimodal(&g);
    let h = Distribution::from_fn(g.clone(), |v| (-0.4 * ((v[0] - 0.5).powi(2) + v[1] * v[1])).exp()).unwrap();
    assert!(max_rel_diff(&op.gain(&f, &f).unwrap(), &gain_oracle(&op, &f, &f, true)) < 1e-12);
    // distinct references take the general path
    assert!(max_rel_diff(&op.gain(&h, &f).unwrap(), &gain_oracle(&op, &h, &f, true)) < 1e-12);
}

#[test]
fn single_bump_matches_enumeration() {
    let g = grid(8, 16, 4.0);
    let op = Operator::new(g.clone(), constant_kernel()).unwrap();
    let i0 = g.flat_index(&[3, 4]);
    let h = 2.5;
    let mut vals = vec![0.0; g.node_count()];
    vals[i0] = h;
    let f = Distribution::new(g.clone(), vals, 0.0).unwrap();
    let got = op.gain(&f, &f).unwrap();
    let oracle = gain_oracle(&op, &f, &f, false);
    for (a, b) in got.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12 * h * h);
    }
    // the (v0, v0) pair alone gives |S¹| Δv h² at v0; the rest is nonnegative
    assert!(got[i0] >= 2.0 * PI * g.cell_volume() * h * h * (1.0 - 1e-12));
    let parts = op.collide_parts(&f).unwrap();
    let q = parts.collision(f.values());
    assert!((parts.loss_rate[i0] - 2.0 * PI * h * g.cell_volume()).abs() < 1e-12);
    for i in 0..g.node_count() {
        if i != i0 {
            assert!(q[i] >= 0.0 && q[i] == parts.gain[i]);
        }
    }
}

#[test]
fn reflection_symmetry_for_even_data() {
    let g = grid(16, 16, 6.0);
    let even = Distribution::from_fn(g.clone(), |v| {
        let a = State::new(0.5, vec![1.2, 0.4], 0.6);
        let b = State::new(0.5, vec![-1.2, -0.4], 0.6);
        a.density_at(v) + b.density_at(v)
    })
    .unwrap();
    let n = g.points_per_axis();
    for mode in [InterpolationMode::MaxwellianWeighted, InterpolationMode::Multilinear] {
        let op = Operator::new(g.clone(), canonical()).unwrap().with_mode(mode);
        let p = op.collide_parts(&even).unwrap();
        let scale = p.gain.iter().fold(0.0f64, |m, x| m.max(*x));
        for i in 0..g.node_count() {
            let m = g.multi_index(i);
            let j = g.flat_index(&[n - 1 - m[0], n - 1 - m[1]]);
            assert!((p.gain[i] - p.gain[j]).abs() < 1e-13 * scale);
            assert!((p.loss_rate[i] - p.loss_rate[j]).abs() < 1e-13 * p.loss_rate[i]);
        }
    }
}

fn conservation_residuals(op: &Operator, f: &Distribution) -> [f64; 4] {
    let q = op.collide(f).unwrap();
    let g = f.grid();
    let mut r = [0.0; 4];
    for (i, &x) in q.iter().enumerate() {
        let v = g.velocity(i);
        r[0] += x;
        r[1] += x * v[0];
        r[2] += x * v[1];
        r[3] += x * (v[0] * v[0] + v[1] * v[1]);
    }
    r.map(|x| (x * g.cell_volume()).abs())
}

#[test]
fn conservation_residual_shrinks_under_refinement() {
    for mode in [InterpolationMode::MaxwellianWeighted, InterpolationMode::Multilinear] {
        let coarse = grid(24, 24, 6.0);
        let fine = grid(48, 48, 6.0);
        let rc = conservation_residuals(
            &Operator::new(coarse.clone(), canonical()).unwrap().with_mode(mode),
            &bimodal(&coarse),
        );
        let rf = conservation_residuals(
            &Operator::new(fine.clone(), canonical()).unwrap().with_mode(mode),
            &bimodal(&fine),
        );
        for k in 0..4 {
            assert!(rf[k] <= 0.5 * rc[k], "{mode:?} component {k}: {} -> {}", rc[k], rf[k]);
        }
    }
}

#[test]
fn equilibrium_residual_decreases() {
    let ratio = |n: usize| {
        let g = grid(n, 32, 8.0);
        let op = Operator::new(g.clone(), canonical()).unwrap();
        let m = maxwellian(&State::unit(2), &g).unwrap();
        let p = op.collide_parts(&m).unwrap();
        let q: f64 = p.collision(m.values()).iter().map(|x| x.abs()).sum();
        let l: f64 = p.loss_rate.iter().zip(m.values()).map(|(a, b)| (a * b).abs()).sum();
        q / l
    };
    let (a, b) = (ratio(16), ratio(24));
    assert!(a < 1e-2, "{a}");
    assert!(b < a, "{b} !< {a}");
}

#[test]
fn grid_mismatch_is_rejected() {
    let op = Operator::new(grid(8, 8, 4.0), canonical()).unwrap();
    let other = Distribution::zeros(grid(10, 8, 4.0));
    assert!(matches!(op.gain(&other, &other), Err(Error::GridMismatch(_))));
    assert!(matches!(op.loss_rate(&other), Err(Error::GridMismatch(_))));
}

#[test]
fn three_dimensional_operator() {
    let g = Arc::new(Grid::new(3, 5.0, 8, 18).unwrap());
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let m = maxwellian(&State::new(1.0, vec![0.0; 3], 1.0), &g).unwrap();
    let p = op.collide_parts(&m).unwrap();
    assert!(p.gain.iter().all(|&x| x >= 0.0));
    let q: f64 = p.collision(m.values()).iter().map(|x| x.abs()).sum();
    let l: f64 = p.loss_rate.iter().zip(m.values()).map(|(a, b)| a * b).sum();
    assert!(q / l < 1e-2, "{}", q / l);
}

#[test]
fn single_precision_operator() {
    let g = Arc::new(VelocityGrid::<f32>::new(2, 6.0, 12, 12).unwrap());
    let op = CollisionOperator::new(g.clone(), CollisionKernel::<f32>::power_law(-1.0, 1.0, 1.0)).unwrap();
    let m = maxwellian(&MacroState::<f32>::unit(2), &g).unwrap();
    let p = op.collide_parts(&m).unwrap();
    let q: f32 = p.collision(m.values()).iter().map(|x| x.abs()).sum();
    let l: f32 = p.loss_rate.iter().zip(m.values()).map(|(a, b)| a * b).sum();
    assert!(q / l < 1e-3);
}

fn smooth_positive(g: &Arc<Grid>, params: &[f64]) -> Distribution {
    let k = params.len() / 4;
    Distribution::from_fn(g.clone(), |v| {
        let mut x = 1e-6 * (-(v[0] * v[0] + v[1] * v[1]) / 8.0).exp();
        for c in 0..k {
            let p = &params[4 * c..4 * c + 4];
            let s = State::new(p[0], vec![p[1], p[2]], p[3]);
            x += s.density_at(v);
        }
        x
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn entropy_production_is_nonnegative(
        params in proptest::collection::vec((0.2f64..1.0, -1.5f64..1.5, -1.5f64..1.5, 0.4f64..1.2), 1..4)
    ) {
        let flat: Vec<f64> = params.iter().flat_map(|&(a, b, c, d)| [a, b, c, d]).collect();
        let g = grid(16, 16, 7.0);
        let f = smooth_positive(&g, &flat);
        let op = Operator::new(g.clone(), canonical()).unwrap();
        let q = op.collide(&f).unwrap();
        let prod: f64 = -q.iter().zip(f.values()).map(|(q, x)| q * x.ln()).sum::<f64>() * g.cell_volume();
        prop_assert!(prod >= -1e-9, "entropy production {prod}");
    }

    #[test]
    fn gain_is_nonnegative_and_collide_bounded_below(
        vals in proptest::collection::vec(0.0f64..1.0, 64)
    ) {
        let g = grid(8, 8, 4.0);
        let f = Distribution::new(g.clone(), vals, 0.0).unwrap();
        for mode in [InterpolationMode::MaxwellianWeighted, InterpolationMode::Multilinear] {
            let op = Operator::new(g.clone(), canonical()).unwrap().with_mode(mode);
            let p = op.collide_parts(&f).unwrap();
            let q = p.collision(f.values());
            for i in 0..q.len() {
                prop_assert!(p.gain[i] >= 0.0);
                prop_assert!(q[i] >= -p.loss_rate[i] * f.values()[i] - 1e-15);
            }
        }
    }
}
