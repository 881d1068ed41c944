//! Tube geometry: exact point-to-cone distances and suprema of distance
//! ratios over tube intersections.
//!
//! The central quantity is, for cones `C_1..C_m` with radii `r_1..r_m` and a
//! target cone `K` containing their intersection,
//!
//! ```text
//! sup { dist(X, K) : dist(X, C_i) <= r_i for all i }.
//! ```
//!
//! By positive homogeneity of all the distances this equals the maximum over
//! unit directions `w` of
//!
//! ```text
//! rho(w) = dist(w, K) / max_i (dist(w, C_i) / r_i),
//! ```
//!
//! with `rho(w) = 0` when the denominator vanishes (then `w` lies in every
//! `C_i`, hence in `K`, and the numerator vanishes too). The witness along a
//! maximizing direction is `X = t w` with `t = 1 / max_i (dist(w, C_i) / r_i)`,
//! which makes the tightest tube constraint exactly binding.
//!
//! Distances are computed through a [`FaceDistTable`]: the nearest point of a
//! cone to `w` lies in the relative interior of some face `F`, where the
//! residual is orthogonal to the span of `F`, so
//!
//! ```text
//! dist(w, C) = min { |w - P_F w| : F face of C, P_F w in F }
//! ```
//!
//! with `P_F` the orthogonal projector onto the span of `F`. Every candidate
//! lies in the cone, so the minimum is never below the true distance, and the
//! face of the true nearest point always realizes it.

use crate::cones::{self, Cone};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Points per circle in the planar dense scan.
const CIRCLE_SCAN_POINTS: usize = 1 << 16;
/// Default sphere samples for three-dimensional scans.
const SPHERE_SCAN_SAMPLES: usize = 60_000;
/// Points per structured great circle.
const GREAT_CIRCLE_POINTS: usize = 512;
/// Cap on structured great circles.
const MAX_GREAT_CIRCLES: usize = 300;
/// Default samples in dimensions four and above.
const HIGH_DIM_SAMPLES: usize = 120_000;
/// Local refinements started from the best scan candidates.
const REFINE_STARTS: usize = 24;
/// Denominators below this count as zero in the ratio: the direction is
/// inside every constraint cone, up to noise. Sits three orders above
/// `FACE_ACCEPT_TOL` so distances in the face-acceptance shadow can never
/// dominate a ratio; legitimate maximizers of nondegenerate fans have
/// denominators far above it.
const DENOM_FLOOR: f64 = 1e-9;
/// Face acceptance tolerance in `nearest`, scaled by the query norm. Face
/// projections are exact by construction, so acceptance needs roundoff
/// headroom only. A looser tolerance would let a face claim points outside
/// it by up to that tolerance and report distances far below it, poisoning
/// ratio landscapes whose extrema divide one distance by another.
const FACE_ACCEPT_TOL: f64 = 1e-12;

/// Precomputed span projectors for every face of a cone, for exact nearest
/// point queries without an iterative solve.
#[derive(Debug, Clone)]
pub struct FaceDistTable {
    cone: Cone,
    faces: Vec<(Cone, DMatrix<f64>)>,
}

impl FaceDistTable {
    pub fn new(cone: &Cone) -> Self {
        let n = cone.ambient_dim();
        let faces = cones::face_lattice(cone)
            .into_iter()
            .map(|f| {
                let basis = linalg::span_basis(n, f.generators());
                let proj = linalg::projector(n, &basis);
                (f, proj)
            })
            .collect();
        FaceDistTable {
            cone: cone.clone(),
            faces,
        }
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    /// Nearest point of the cone and its distance.
    pub fn nearest(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let tol = FACE_ACCEPT_TOL * x.norm().max(1.0);
        let mut best: Option<(DVector<f64>, f64)> = None;
        for (face, proj) in &self.faces {
            let p = proj * x;
            // `p` lies in the face's span by construction; only the facet
            // inequalities need checking, at roundoff scale.
            if face.halfspaces().iter().any(|h| h.dot(&p) > tol) {
                continue;
            }
            let d = (x - &p).norm();
            if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
                best = Some((p, d));
            }
        }
        match best {
            Some(pair) => pair,
            // Tolerance edge: no face accepted its projection. Fall back to
            // the iterative solver, which is exact but slower.
            None => {
                let r = cones::project_point(&self.cone, x)
                    .expect("projection onto cached cone succeeds");
                (r.nearest_point, r.distance)
            }
        }
    }

    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        self.nearest(x).1
    }
}

/// How a supremum estimate was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupMethod {
    /// Two candidate directions in one dimension: exhaustive.
    ExactOneDim,
    /// Dense circular scan plus golden-section refinement.
    CircleScan { points: usize },
    /// Fibonacci sphere plus structured great circles plus refinement.
    SphereScan { samples: usize },
    /// Seeded random directions plus hill climbing; a lower bound only.
    Sampled { samples: usize, restarts: usize },
}

impl SupMethod {
    /// Whether the scan is dense enough to treat as exact for smooth-enough
    /// ratio landscapes (dimensions one to three).
    pub fn deterministic(&self) -> bool {
        !matches!(self, SupMethod::Sampled { .. })
    }
}

/// Result of a tube-ratio supremum computation.
#[derive(Debug, Clone)]
pub struct SupEstimate {
    pub value: f64,
    /// Unit direction achieving the reported value.
    pub witness_direction: DVector<f64>,
    /// Scaled witness: the tightest tube constraint is exactly binding here.
    pub witness_point: DVector<f64>,
    pub method: SupMethod,
}

/// Tuning knobs for the scan. `samples` overrides the per-dimension default
/// budget for sphere or high-dimensional scans.
#[derive(Debug, Clone)]
pub struct SupConfig {
    pub seed: u64,
    pub samples: Option<usize>,
}

impl Default for SupConfig {
    fn default() -> Self {
        SupConfig {
            seed: 0,
            samples: None,
        }
    }
}

/// The ratio landscape for one supremum problem.
pub struct RatioProblem<'a> {
    constraints: Vec<(&'a FaceDistTable, f64)>,
    target: &'a FaceDistTable,
    ambient_dim: usize,
}

impl<'a> RatioProblem<'a> {
    /// `constraints` pairs each cone table with its tube radius (positive).
    pub fn new(constraints: Vec<(&'a FaceDistTable, f64)>, target: &'a FaceDistTable) -> Self {
        assert!(!constraints.is_empty(), "ratio problem needs a constraint");
        let ambient_dim = target.cone().ambient_dim();
        for (t, r) in &constraints {
            assert_eq!(t.cone().ambient_dim(), ambient_dim);
            assert!(*r > 0.0, "tube radius must be positive");
        }
        RatioProblem {
            constraints,
            target,
            ambient_dim,
        }
    }

    pub fn rho(&self, w: &DVector<f64>) -> f64 {
        let denom = self
            .constraints
            .iter()
            .map(|(t, r)| t.distance(w) / r)
            .fold(0.0f64, f64::max);
        if denom < DENOM_FLOOR {
            return 0.0;
        }
        self.target.distance(w) / denom
    }

    /// Witness point along `w`: the scaling that makes the tightest tube
    /// constraint binding. Returns the zero vector when `w` lies in every
    /// constraint cone.
    pub fn witness_point(&self, w: &DVector<f64>) -> DVector<f64> {
        let denom = self
            .constraints
            .iter()
            .map(|(t, r)| t.distance(w) / r)
            .fold(0.0f64, f64::max);
        if denom < DENOM_FLOOR {
            return DVector::zeros(self.ambient_dim);
        }
        w / denom
    }
}

/// Directions worth probing: generators, facet normals, and orthogonal
/// complement directions of every cone involved, with both signs.
fn feature_directions(problem: &RatioProblem<'_>) -> Vec<DVector<f64>> {
    let n = problem.ambient_dim;
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    let mut push = |v: DVector<f64>| {
        if let Some(u) = linalg::unit(&v, 1e-12) {
            let known = dirs.iter().any(|d| d.dot(&u).abs() >= 1.0 - 1e-10);
            if !known {
                dirs.push(u);
            }
        }
    };
    let mut cones_involved: Vec<&Cone> = vec![problem.target.cone()];
    cones_involved.extend(problem.constraints.iter().map(|(t, _)| t.cone()));
    for c in cones_involved {
        for g in c.generators() {
            push(g.clone());
        }
        for h in c.halfspaces() {
            push(h.clone());
        }
        let comp = linalg::complement_basis(n, c.span_basis());
        for b in comp.column_iter() {
            push(b.into_owned());
        }
    }
    dirs
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Pattern search on the unit sphere from `start`, maximizing `rho`.
fn refine_on_sphere(problem: &RatioProblem<'_>, start: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = problem.ambient_dim;
    let mut dir = start.clone();
    let mut val = problem.rho(&dir);
    let mut step = 0.05f64;
    while step > 1e-11 {
        let axis = linalg::columns(n, std::slice::from_ref(&dir));
        let tangent = linalg::complement_basis(n, &axis);
        let mut improved = false;
        for t in tangent.column_iter() {
            for sign in [1.0f64, -1.0] {
                let cand = &dir + t * (sign * step);
                let cand = &cand / cand.norm();
                let v = problem.rho(&cand);
                if v > val {
                    dir = cand;
                    val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (dir, val)
}

/// Evaluates `rho` over a full circle through `u` and `v_perp`.
fn scan_circle(
    problem: &RatioProblem<'_>,
    u: &DVector<f64>,
    u_perp: &DVector<f64>,
    points: usize,
) -> (DVector<f64>, f64) {
    let best = (0..points)
        .into_par_iter()
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * (i as f64) / (points as f64);
            let w = u * theta.cos() + u_perp * theta.sin();
            (problem.rho(&w), i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let theta = 2.0 * std::f64::consts::PI * (best.1 as f64) / (points as f64);
    let w = u * theta.cos() + u_perp * theta.sin();
    (w, best.0)
}

/// Golden-section polish of a circular maximum around angle index `i0`.
fn refine_on_circle(
    problem: &RatioProblem<'_>,
    u: &DVector<f64>,
    u_perp: &DVector<f64>,
    theta0: f64,
    width: f64,
) -> (DVector<f64>, f64) {
    let eval = |theta: f64| {
        let w = u * theta.cos() + u_perp * theta.sin();
        problem.rho(&w)
    };
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = theta0 - width;
    let mut b = theta0 + width;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let theta = 0.5 * (a + b);
    let w = u * theta.cos() + u_perp * theta.sin();
    (w, eval(theta))
}

fn sup_one_dim(problem: &RatioProblem<'_>) -> SupEstimate {
    let mut best = (DVector::from_row_slice(&[1.0]), f64::NEG_INFINITY);
    for s in [1.0f64, -1.0] {
        let w = DVector::from_row_slice(&[s]);
        let v = problem.rho(&w);
        if v > best.1 {
            best = (w, v);
        }
    }
    SupEstimate {
        value: best.1,
        witness_point: problem.witness_point(&best.0),
        witness_direction: best.0,
        method: SupMethod::ExactOneDim,
    }
}

fn sup_two_dim(problem: &RatioProblem<'_>) -> SupEstimate {
    let e1 = DVector::from_row_slice(&[1.0, 0.0]);
    let e2 = DVector::from_row_slice(&[0.0, 1.0]);
    let points = CIRCLE_SCAN_POINTS;
    // Dense scan, keeping every local maximum for polishing.
    let values: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * (i as f64) / (points as f64);
            let w = &e1 * theta.cos() + &e2 * theta.sin();
            problem.rho(&w)
        })
        .collect();
    let mut maxima: Vec<usize> = (0..points)
        .filter(|&i| {
            let prev = values[(i + points - 1) % points];
            let next = values[(i + 1) % points];
            values[i] >= prev && values[i] >= next && values[i] > 0.0
        })
        .collect();
    maxima.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    maxima.truncate(REFINE_STARTS);

    let width = 2.0 * std::f64::consts::PI / points as f64;
    let mut best: Option<(DVector<f64>, f64)> = None;
    for &i in &maxima {
        let theta0 = 2.0 * std::f64::consts::PI * (i as f64) / (points as f64);
        let (w, v) = refine_on_circle(problem, &e1, &e2, theta0, width);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((w, v));
        }
    }
    for f in feature_directions(problem) {
        let v = problem.rho(&f);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((f, v));
        }
    }
    let (w, value) = best.unwrap_or((e1, 0.0));
    SupEstimate {
        value,
        witness_point: problem.witness_point(&w),
        witness_direction: w,
        method: SupMethod::CircleScan { points },
    }
}

/// Evenly distributed sphere directions (Fibonacci lattice).
fn fibonacci_sphere(samples: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..samples)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let theta = golden * i as f64;
            DVector::from_row_slice(&[r * theta.cos(), y, r * theta.sin()])
        })
        .collect()
}

fn sup_three_dim(problem: &RatioProblem<'_>, cfg: &SupConfig) -> SupEstimate {
    let samples = cfg.samples.unwrap_or(SPHERE_SCAN_SAMPLES);
    let dirs = fibonacci_sphere(samples);
    let scored: Vec<(f64, usize)> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, w)| (problem.rho(w), i))
        .collect();
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .0
            .partial_cmp(&scored[a].0)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut candidates: Vec<(DVector<f64>, f64)> = order
        .iter()
        .take(REFINE_STARTS)
        .map(|&i| (dirs[i].clone(), scored[i].0))
        .collect();

    // Structured great circles through pairs of feature directions: ratio
    // maxima sit where tube boundaries meet, and those loci are unions of
    // such circles for the cones at hand.
    let features = feature_directions(problem);
    let mut circles = 0usize;
    'outer: for i in 0..features.len() {
        for j in (i + 1)..features.len() {
            if circles >= MAX_GREAT_CIRCLES {
                break 'outer;
            }
            let u = &features[i];
            let raw = &features[j] - u * u.dot(&features[j]);
            let Some(u_perp) = linalg::unit(&raw, 1e-9) else {
                continue;
            };
            circles += 1;
            let (w, v) = scan_circle(problem, u, &u_perp, GREAT_CIRCLE_POINTS);
            candidates.push((w, v));
        }
    }
    for f in &features {
        candidates.push((f.clone(), problem.rho(f)));
    }

    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    candidates.truncate(REFINE_STARTS);
    let mut best: Option<(DVector<f64>, f64)> = None;
    for (start, _) in &candidates {
        let (w, v) = refine_on_sphere(problem, start);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((w, v));
        }
    }
    let (w, value) = best.unwrap_or((DVector::from_row_slice(&[1.0, 0.0, 0.0]), 0.0));
    SupEstimate {
        value,
        witness_point: problem.witness_point(&w),
        witness_direction: w,
        method: SupMethod::SphereScan { samples },
    }
}

fn sup_high_dim(problem: &RatioProblem<'_>, cfg: &SupConfig) -> SupEstimate {
    let n = problem.ambient_dim;
    let samples = cfg.samples.unwrap_or(HIGH_DIM_SAMPLES);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dirs: Vec<DVector<f64>> = (0..samples).map(|_| random_unit(&mut rng, n)).collect();
    let scored: Vec<(f64, usize)> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, w)| (problem.rho(w), i))
        .collect();
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .0
            .partial_cmp(&scored[a].0)
            .unwrap()
            .then(a.cmp(&b))
    });

    let features = feature_directions(problem);
    let mut candidates: Vec<DVector<f64>> = order
        .iter()
        .take(REFINE_STARTS)
        .map(|&i| dirs[i].clone())
        .collect();
    candidates.extend(features.iter().cloned());
    let restarts = candidates.len();

    let mut best: Option<(DVector<f64>, f64)> = None;
    for start in &candidates {
        let (w, v) = refine_on_sphere(problem, start);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((w, v));
        }
    }
    let (w, value) = best.expect("at least one candidate");
    SupEstimate {
        value,
        witness_point: problem.witness_point(&w),
        witness_direction: w,
        method: SupMethod::Sampled { samples, restarts },
    }
}

/// Maximizes the tube distance ratio over unit directions.
///
/// Dimensions one to three use deterministic dense scans with local
/// refinement; higher dimensions fall back to seeded sampling with hill
/// climbing and report a [`SupMethod::Sampled`] lower bound.
pub fn sup_tube_ratio(problem: &RatioProblem<'_>, cfg: &SupConfig) -> SupEstimate {
    match problem.ambient_dim {
        0 => {
            let w = DVector::zeros(0);
            SupEstimate {
                value: 0.0,
                witness_direction: w.clone(),
                witness_point: w,
                method: SupMethod::ExactOneDim,
            }
        }
        1 => sup_one_dim(problem),
        2 => sup_two_dim(problem),
        3 => sup_three_dim(problem, cfg),
        _ => sup_high_dim(problem, cfg),
    }
}
