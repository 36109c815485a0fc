use proptest::prelude::*;
use softbolt::diagnostics::*;
use softbolt::*;
use std::sync::Arc;

fn grid(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(2, 8.0, n, 32).unwrap())
}

fn random_function(g: &Arc<Grid>) -> impl Strategy<Value = Distribution> {
    let g = g.clone();
    proptest::collection::vec(0.0f64..1.0, g.node_count())
        .prop_map(move |v| Distribution::new(g.clone(), v, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn weighted_l1_cauchy_schwarz(f in random_function(&grid(16)), s in 0.1f64..6.0) {
        let lhs = weighted_l1(&f, s).powi(2);
        let rhs = weighted_l1(&f, 0.0) * weighted_l1(&f, 2.0 * s);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn weighted_l1_is_monotone_in_order(f in random_function(&grid(16)), s in -2.0f64..6.0, ds in 0.0f64..2.0) {
        prop_assert!(weighted_l1(&f, s) <= weighted_l1(&f, s + ds));
    }

    #[test]
    fn parseval_for_random_functions(f in random_function(&grid(16))) {
        let a = hk_norm(&f, 0.0);
        let b = weighted_lp(&f, 2.0, 0.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b.max(1e-300));
    }

    #[test]
    fn negative_order_embedding(f in random_function(&grid(16))) {
        let c = embedding_bound(f.grid(), -1.5);
        let l1 = weighted_l1(&f, 0.0);
        prop_assume!(l1 > 0.0);
        prop_assert!(hk_norm(&f, -1.5) <= c * l1 * (1.0 + 1e-12));
    }
}

fn canonical() -> Kernel {
    Kernel::power_law(-1.0, 1.0, 1.0)
}

#[test]
fn loss_bound_matches_dense_oracle() {
    let g = grid(24);
    let k = canonical();
    let op = Operator::new(g.clone(), k.clone()).unwrap();
    let m = maxwellian(&State::unit(2), &g).unwrap();
    let got = loss_lower_bound_fit(&op, &m).unwrap();
    // direct double loop, sphere rule four times finer than the grid's
    let fine = SphereRule::<f64>::circle(4 * g.sphere().len()).unwrap();
    let mut oracle = f64::INFINITY;
    for i in 0..g.node_count() {
        let v = g.velocity(i);
        let mut l = 0.0;
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
            l += k.phi_eval(r).unwrap() * ang * m.values()[j] * g.cell_volume();
        }
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        oracle = oracle.min(l / (1.0 + speed).powf(-1.0));
    }
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    let scaled = loss_lower_bound_fit(&op, &m.scaled(3.0)).unwrap();
    assert!((scaled - 3.0 * got).abs() < 1e-12 * got);
    assert!(matches!(
        loss_lower_bound_fit(&op, &Distribution::zeros(g.clone())),
        Err(Error::DegenerateState(_))
    ));
}

#[test]
fn loss_bound_is_positive_for_bimodal_datum() {
    let g = grid(16);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let a = State::new(0.5, vec![2.0, 0.0], 0.5);
    let b = State::new(0.5, vec![-2.0, 0.0], 0.5);
    let f = Distribution::from_fn(g.clone(), |v| a.density_at(v) + b.density_at(v)).unwrap();
    let k = loss_lower_bound_fit(&op, &f).unwrap();
    assert!(k > 0.0);
    // b0 |S¹| Σ (1 + |v - v*|)^γ f(v*) Δv bounds L from below at every node
    let rate = op.loss_rate(&f).unwrap();
    assert!(rate.iter().all(|&l| l > 0.0));
}

#[test]
fn gain_regularity_baseline_and_zero() {
    let g = grid(32);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let z = Distribution::zeros(g.clone());
    assert_eq!(gain_regularity_ratio(&op, &z, 0, 0.0, 1.0).unwrap().ratio, 0.0);
    let m = maxwellian(&State::unit(2), &g).unwrap();
    let r = gain_regularity_ratio(&op, &m, 0, 0.0, default_weight_shift(0.0)).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert!(!r.unresolved);
}

#[test]
fn measure_fills_requested_norms() {
    let g = grid(32);
    let op = Operator::new(g.clone(), canonical()).unwrap();
    let m = maxwellian(&State::unit(2), &g).unwrap();
    let plan = DiagnosticsPlan::default_for(2);
    assert_eq!(plan.hk_orders, vec![-1.5, 0.0, 1.0, 2.0]);
    let r = measure(&plan, &m, &m, 0, 0.0, Some(&op)).unwrap();
    assert_eq!(r.l1_dist_m, 0.0);
    assert!((r.moment(2.0).unwrap() - 3.0).abs() < 1e-8);
    assert!((r.hk(0.0).unwrap() - r.lp(2.0, 0.0).unwrap()).abs() < 1e-12);
    assert!(r.loss_bound.unwrap() > 0.0);
    assert_eq!(r.conserved.momentum.len(), 2);
}
