//! Ready-made fans and graphs shared by tests, benchmarks, and examples.

use crate::cones::Cone;
use crate::fans::{hyperplane_fan, Fan};
use crate::networks::EGraph;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn v(data: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(data)
}

/// Normal of the line through the origin at `angle_deg` degrees.
fn line_normal(angle_deg: f64) -> DVector<f64> {
    let a = angle_deg.to_radians();
    v(&[-a.sin(), a.cos()])
}

/// The fan of the coordinate hyperplane arrangement in `R^n`: all sign
/// orthants and their faces, `3^n` cones in total.
pub fn coordinate_fan(n: usize) -> Fan {
    let normals: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
        .collect();
    hyperplane_fan(n, &normals).expect("coordinate arrangement is well formed")
}

/// Fan of two lines through the origin in the plane, one horizontal and one
/// at the given angle: four sectors, four rays, and the origin.
pub fn two_line_fan(angle_deg: f64) -> Fan {
    hyperplane_fan(2, &[line_normal(0.0), line_normal(angle_deg)])
        .expect("two distinct lines are well formed")
}

/// Fan of three pairwise distinct lines in the plane: thirteen cones.
pub fn three_line_fan() -> Fan {
    hyperplane_fan(2, &[line_normal(0.0), line_normal(60.0), line_normal(120.0)])
        .expect("three distinct lines are well formed")
}

/// An irregular complete 2D fan with three maximal sectors meeting at rays
/// 0, 90, and 225 degrees.
pub fn sector_fan() -> Fan {
    let ray = |deg: f64| {
        let a = (deg as f64).to_radians();
        v(&[a.cos(), a.sin()])
    };
    let sector = |lo: f64, hi: f64| {
        Cone::from_generators(2, &[ray(lo), ray(hi)]).expect("sector generators are valid")
    };
    Fan::from_maximal_cones(vec![
        sector(0.0, 90.0),
        sector(90.0, 225.0),
        sector(225.0, 360.0),
    ])
    .expect("sectors tile the plane")
    .assert_complete()
}

/// Fan of the two coordinate planes `x1 = 0` and `x3 = 0` in `R^3`: four
/// wedges, four half-planes, and the shared axis line.
pub fn two_plane_fan() -> Fan {
    hyperplane_fan(3, &[v(&[0.0, 0.0, 1.0]), v(&[1.0, 0.0, 0.0])])
        .expect("two distinct planes are well formed")
}

/// The reversible pair `0 <-> (1)` on the line.
pub fn reversible_pair() -> EGraph {
    EGraph::new(1, vec![v(&[0.0]), v(&[1.0])], vec![(0, 1), (1, 0)], 2.0)
        .expect("fixture graph is valid")
}

/// A single irreversible edge `(1) -> (2)` on the line.
pub fn single_edge() -> EGraph {
    EGraph::new(1, vec![v(&[1.0]), v(&[2.0])], vec![(0, 1)], 2.0)
        .expect("fixture graph is valid")
}

/// A directed triangle over the standard 2D simplex vertices.
pub fn three_cycle() -> EGraph {
    EGraph::new(
        2,
        vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])],
        vec![(0, 1), (1, 2), (2, 0)],
        2.0,
    )
    .expect("fixture graph is valid")
}

/// A random weakly reversible graph: a union of directed cycles over
/// distinct integer grid points. Deterministic in the seed.
pub fn random_weakly_reversible(dim: usize, seed: u64) -> EGraph {
    assert!((1..=3).contains(&dim), "fixture supports dimensions 1 to 3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid_size = 4usize.pow(dim as u32);
    let n_vertices = rng.gen_range(3..=6).min(grid_size);

    let mut vertices: Vec<DVector<f64>> = Vec::new();
    while vertices.len() < n_vertices {
        let p = DVector::from_fn(dim, |_, _| rng.gen_range(0..4) as f64);
        if !vertices.iter().any(|q| (q - &p).norm() < 0.5) {
            vertices.push(p);
        }
    }

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let n_cycles = rng.gen_range(1..=3);
    for _ in 0..n_cycles {
        let len = rng.gen_range(2..=n_vertices);
        let mut order: Vec<usize> = (0..n_vertices).collect();
        // Partial Fisher-Yates: the first `len` entries form the cycle.
        for i in 0..len {
            let j = rng.gen_range(i..n_vertices);
            order.swap(i, j);
        }
        for i in 0..len {
            edges.insert((order[i], order[(i + 1) % len]));
        }
    }
    EGraph::new(dim, vertices, edges.into_iter().collect(), 2.0)
        .expect("generated cycles form a valid graph")
}
