//! Cross-module property tests: dual identities, projection behavior,
//! inclusion monotonicity, and dynamics invariants on random inputs.

use conefan::cones::{self, Cone};
use conefan::embeddings::embed_tdi_in_qtdi;
use conefan::fixtures;
use conefan::inclusions::{FanGeometry, InclusionSpec};
use conefan::networks::{mass_action_rhs, simulate, RateSpec, SimOptions};
use conefan::tubes::SupConfig;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dv(data: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(data)
}

/// Containment check with an explicit tolerance: every unit generator of
/// `inner` lies in the span of `outer` and satisfies its halfspaces.
fn contains_tol(outer: &Cone, inner: &Cone, tol: f64) -> bool {
    inner.generators().iter().all(|g| {
        outer.span_distance(g) <= tol
            && outer.halfspaces().iter().all(|h| h.dot(g) <= tol)
    })
}

fn cone_strategy() -> impl Strategy<Value = Cone> {
    (2usize..=3)
        .prop_flat_map(|n| {
            proptest::collection::vec(
                proptest::collection::vec(-2.0f64..2.0, n),
                1..=6,
            )
            .prop_map(move |rows| (n, rows))
        })
        .prop_filter_map("generators must span a nonzero cone", |(n, rows)| {
            let gens: Vec<DVector<f64>> = rows.iter().map(|r| dv(r)).collect();
            Cone::from_generators(n, &gens).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_involution(cone in cone_strategy()) {
        let back = cones::polar(&cones::polar(&cone));
        prop_assert!(contains_tol(&back, &cone, 1e-7));
        prop_assert!(contains_tol(&cone, &back, 1e-7));
    }

    #[test]
    fn projection_is_optimal_and_feasible(
        cone in cone_strategy(),
        coords in proptest::collection::vec(-3.0f64..3.0, 3),
        mixes in proptest::collection::vec(0.0f64..2.0, 8),
    ) {
        let n = cone.ambient_dim();
        let x = dv(&coords[..n]);
        let result = cones::project_point(&cone, &x).unwrap();
        prop_assert!(cone.contains_point(&result.nearest_point));
        prop_assert!((result.distance - (&x - &result.nearest_point).norm()).abs() <= 1e-9);
        // No nonnegative generator combination comes closer.
        let k = cone.generators().len();
        for chunk in mixes.chunks(k.max(1)) {
            let mut y = DVector::zeros(n);
            for (j, c) in chunk.iter().enumerate() {
                if j < k {
                    y += cone.generators()[j].clone() * *c;
                }
            }
            prop_assert!((&x - &y).norm() >= result.distance - 1e-9);
        }
    }

    #[test]
    fn projection_distance_is_one_lipschitz(
        cone in cone_strategy(),
        a in proptest::collection::vec(-3.0f64..3.0, 3),
        b in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let n = cone.ambient_dim();
        let (x, y) = (dv(&a[..n]), dv(&b[..n]));
        let dx = cones::project_point(&cone, &x).unwrap().distance;
        let dy = cones::project_point(&cone, &y).unwrap().distance;
        prop_assert!((dx - dy).abs() <= (&x - &y).norm() + 1e-9);
    }

    #[test]
    fn halfspace_membership_agrees_with_projection(
        cone in cone_strategy(),
        coords in proptest::collection::vec(-2.0f64..2.0, 3),
    ) {
        let n = cone.ambient_dim();
        let x = dv(&coords[..n]);
        let span_dist = cone.span_distance(&x);
        let max_dot = cone
            .halfspaces()
            .iter()
            .map(|h| h.dot(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        let clearly_inside = span_dist <= 1e-9 && max_dot < -1e-6;
        let clearly_outside = span_dist > 1e-6 || max_dot > 1e-6;
        // Points within 1e-6 of the boundary are tolerance-ambiguous.
        prop_assume!(clearly_inside || clearly_outside);
        let by_projection = cones::project_point(&cone, &x).unwrap().distance <= 1e-7;
        prop_assert_eq!(clearly_inside, by_projection);
    }
}

#[test]
fn tdi_grows_with_delta() {
    for fan in [fixtures::coordinate_fan(2), fixtures::two_line_fan(10.0)] {
        let geo = FanGeometry::new(&fan);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = dv(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let small = InclusionSpec::Tdi { delta: 0.3 }.eval(&geo, &x, false);
            let large = InclusionSpec::Tdi { delta: 0.9 }.eval(&geo, &x, false);
            let (Ok(small), Ok(large)) = (small, large) else {
                continue;
            };
            assert!(
                contains_tol(&large.rhs, &small.rhs, 1e-9),
                "rhs at delta 0.3 must be contained in rhs at delta 0.9 at {x:?}"
            );
        }
    }
}

#[test]
fn far_field_tdi_and_qtdi_agree() {
    let fan = fixtures::coordinate_fan(2);
    let geo = FanGeometry::new(&fan);
    let outcome = embed_tdi_in_qtdi(&geo, 0.5, &SupConfig::default()).unwrap();
    let qtdi = InclusionSpec::Qtdi { d: outcome.d };
    let tdi = InclusionSpec::Tdi { delta: 0.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut far_points = 0;
    for _ in 0..400 {
        let x = dv(&[rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]);
        // Far field: deep inside one maximal cone, beyond every threshold
        // of anything lower-dimensional.
        let deep = fan
            .maximal()
            .iter()
            .any(|&i| geo.distance(i, &x) <= 1e-9)
            && x.iter().all(|c| c.abs() > 1.0);
        if !deep {
            continue;
        }
        far_points += 1;
        let a = tdi.eval(&geo, &x, false).unwrap();
        let b = qtdi.eval(&geo, &x, false).unwrap();
        assert_eq!(a.source_index, b.source_index, "at {x:?}");
        assert!(cones::cones_equal(&a.rhs, &b.rhs));
        assert_eq!(b.step, 2, "deep points fire the final membership step");
    }
    assert!(far_points > 100, "sampling produced {far_points} far points");
}

#[test]
fn rhs_lies_in_stoichiometric_subspace_for_random_graphs() {
    for seed in 0..40 {
        let dim = 1 + (seed as usize % 3);
        let g = fixtures::random_weakly_reversible(dim, seed);
        let basis = g.stoich_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let k = RateSpec::Constant(
            (0..g.edges().len()).map(|_| rng.gen_range(0.1..3.0)).collect(),
        );
        for _ in 0..20 {
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(0.1..4.0));
            let rhs = mass_action_rhs(&g, &k, 0.0, &x).unwrap();
            let residual = &rhs - basis * (basis.transpose() * &rhs);
            assert!(residual.norm() < 1e-10 * rhs.norm().max(1.0), "seed {seed}");
        }
    }
}

#[test]
fn trajectories_are_confined_to_the_stoichiometric_class() {
    // Interconversion with a sinusoidal rate: x + y is conserved exactly;
    // the integrator must preserve it to tolerance.
    let g = conefan::networks::EGraph::new(
        2,
        vec![dv(&[1.0, 0.0]), dv(&[0.0, 1.0])],
        vec![(0, 1), (1, 0)],
        3.0,
    )
    .unwrap();
    let k = RateSpec::Sinusoidal {
        amplitudes: vec![1.0, 0.6],
        omegas: vec![2.0, 0.5],
        phases: vec![0.0, 1.0],
    };
    let x0 = dv(&[1.25, 0.75]);
    let traj = simulate(&g, &k, &x0, 20.0, &SimOptions::default()).unwrap();
    assert!(traj.len() > 10);
    let basis = g.stoich_basis();
    for x in &traj.states {
        let drift = x - &x0;
        let residual = &drift - basis * (basis.transpose() * &drift);
        assert!(residual.norm() < 1e-8);
        assert!((x[0] + x[1] - 2.0).abs() < 1e-8);
    }
    // Rates stayed inside the epsilon band the whole way.
    for t in &traj.times {
        for rate in k.rates(&g, *t) {
            assert!((1.0 / 3.0 - 1e-12..=3.0 + 1e-12).contains(&rate));
        }
    }
}
