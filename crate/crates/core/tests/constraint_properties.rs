//! Randomized properties of the constraint-set oracles: the projection
//! characterization, nonexpansiveness, prox Lipschitz continuity, and LMO
//! optimality against sampled feasible points.

use ndarray::Array1;
use proptest::prelude::*;
use zo_core::constraints::{lmo, project, prox_exact};
use zo_core::{ConstraintSet, SeededStream};

fn sets() -> Vec<ConstraintSet> {
    vec![
        ConstraintSet::l1_ball(6, 1.5).unwrap(),
        ConstraintSet::l2_ball(6, 2.0).unwrap(),
        ConstraintSet::hyper_box(vec![-1.0, -2.0, 0.0, -0.5, -3.0, 1.0], vec![
            1.0, -1.0, 2.0, 0.5, 3.0, 4.0,
        ])
        .unwrap(),
        ConstraintSet::simplex(6, 1.0).unwrap(),
    ]
}

fn coords() -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(-5.0..5.0f64, 6).prop_map(Array1::from)
}

proptest! {
    #[test]
    fn projection_is_nonexpansive(y1 in coords(), y2 in coords()) {
        for set in sets() {
            let p1 = project(&set, &y1.view()).unwrap();
            let p2 = project(&set, &y2.view()).unwrap();
            let lhs = (&p1 - &p2).mapv(|v| v * v).sum().sqrt();
            let rhs = (&y1 - &y2).mapv(|v| v * v).sum().sqrt();
            prop_assert!(lhs <= rhs + 1e-12, "{set:?}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn projection_satisfies_the_variational_inequality(y in coords(), v_raw in coords()) {
        // p = P(y) iff <y - p, v - p> <= 0 for every feasible v; that is the
        // full optimality characterization, so no grid oracle is needed.
        for set in sets() {
            let p = project(&set, &y.view()).unwrap();
            let v = project(&set, &v_raw.view()).unwrap();
            let inner = (&y - &p).dot(&(&v - &p));
            prop_assert!(inner <= 1e-9, "{set:?}: <y-p, v-p> = {inner}");
        }
    }

    #[test]
    fn prox_is_lipschitz_in_the_gradient_argument(
        x in coords(),
        g1 in coords(),
        g2 in coords(),
        gamma in 0.1..10.0f64,
    ) {
        for set in sets() {
            let p1 = prox_exact(&set, &x.view(), &g1.view(), gamma).unwrap();
            let p2 = prox_exact(&set, &x.view(), &g2.view(), gamma).unwrap();
            let lhs = (&p1 - &p2).mapv(|v| v * v).sum().sqrt();
            let rhs = (&g1 - &g2).mapv(|v| v * v).sum().sqrt() / gamma;
            prop_assert!(lhs <= rhs + 1e-9, "{set:?}: {lhs} > {rhs}");
        }
    }
}

/// One feasible point per call, covering interior and boundary.
fn sample_feasible(set: &ConstraintSet, rng: &mut SeededStream) -> Array1<f64> {
    match set {
        ConstraintSet::L1Ball { dimension, radius } => {
            let weights: Vec<f64> = (0..*dimension).map(|_| -rng.uniform().ln()).collect();
            let total: f64 = weights.iter().sum();
            let scale = radius * rng.uniform();
            Array1::from_iter(weights.iter().map(|w| {
                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                sign * scale * w / total
            }))
        }
        ConstraintSet::L2Ball { dimension, radius } => {
            let u = rng.gaussian_vec(*dimension);
            let norm = u.dot(&u).sqrt().max(1e-12);
            let scale = radius * rng.uniform();
            u * (scale / norm)
        }
        ConstraintSet::Box { lo, hi } => Array1::from_iter(
            lo.iter().zip(hi).map(|(l, h)| l + rng.uniform() * (h - l)),
        ),
        ConstraintSet::Simplex { dimension, radius } => {
            let weights: Vec<f64> = (0..*dimension).map(|_| -rng.uniform().ln()).collect();
            let total: f64 = weights.iter().sum();
            Array1::from_iter(weights.iter().map(|w| radius * w / total))
        }
    }
}

#[test]
fn lmo_minimizes_over_sampled_feasible_points() {
    let mut rng = SeededStream::new(31);
    for set in sets() {
        let feasible: Vec<Array1<f64>> =
            (0..100).map(|_| sample_feasible(&set, &mut rng)).collect();
        for v in &feasible {
            assert!(set.contains(&v.view(), 1e-9), "{set:?}: sampler left the set: {v}");
        }
        for _ in 0..1_000 {
            let g = rng.gaussian_vec(6);
            let vertex = lmo(&set, &g.view()).unwrap();
            let best = g.dot(&vertex);
            for v in &feasible {
                assert!(
                    best <= g.dot(v) + 1e-12,
                    "{set:?}: LMO value {best} beaten by sampled point ({})",
                    g.dot(v)
                );
            }
        }
    }
}
