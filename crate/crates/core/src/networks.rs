//! Reaction networks as Euclidean embedded graphs: structural checks,
//! mass-action dynamics, and trajectory membership in inclusion cones.
//!
//! Vertices are points `y` in `R^n`; a directed edge `y -> y'` is a reaction
//! contributing `k(t) x^y (y' - y)` to the dynamics, where `x^y` is the
//! monomial `prod x_i^{y_i}`. Rate functions are either constant or bounded
//! inside `[1/eps, eps]`.
//!
//! Endotacticity is decided exactly in ambient dimension at most three by
//! enumerating one representative direction per cell of the central
//! arrangement spanned by all edge vectors and all pairwise source
//! differences: within such a cell, every sign the predicate consults is
//! constant. Higher dimensions fall back to seeded random directions and
//! carry an inexactness flag.

use crate::cones::Cone;
use crate::inclusions::{FanGeometry, InclusionError, InclusionSpec};
use crate::linalg;
use crate::tubes::FaceDistTable;
use nalgebra::{DMatrix, DVector};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Components below this value terminate a simulation.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// State norms above this value terminate a simulation.
pub const BLOWUP_CEILING: f64 = 1e12;
/// Membership tolerance for trajectory derivatives, relative to the
/// derivative magnitude. Sits above integrator accuracy and below anything
/// geometrically meaningful.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// Dot products with unit directions below this (relative to the vector
/// norm) count as zero when classifying signs.
const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("vertex {index} has dimension {got}, expected {expected}")]
    VertexDimension { index: usize, expected: usize, got: usize },
    #[error("edge {edge} references vertex {index}, but there are only {len} vertices")]
    EdgeOutOfBounds { edge: usize, index: usize, len: usize },
    #[error("edge {edge} is a self-loop")]
    SelfLoop { edge: usize },
    #[error("vertices {first} and {second} have identical coordinates")]
    DuplicateVertex { first: usize, second: usize },
    #[error("rate bound epsilon must be at least 1, got {value}")]
    BadEpsilon { value: f64 },
    #[error("rate for edge {edge} is invalid: {reason}")]
    BadRate { edge: usize, reason: String },
    #[error("rate profile has {got} entries, expected one per edge ({expected})")]
    RateLength { expected: usize, got: usize },
    #[error("state component {index} is not strictly positive ({value})")]
    NonPositiveState { index: usize, value: f64 },
    #[error("state has dimension {got}, expected {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("horizon must be positive, got {value}")]
    BadHorizon { value: f64 },
    #[error("step size underflow at t = {t}; partial trajectory retained")]
    StepUnderflow { t: f64, trajectory: Box<Trajectory> },
    #[error("step limit {max_steps} exceeded at t = {t}; partial trajectory retained")]
    StepLimit {
        max_steps: usize,
        t: f64,
        trajectory: Box<Trajectory>,
    },
    #[error(transparent)]
    Inclusion(#[from] InclusionError),
}

/// A Euclidean embedded graph: complexes with coordinates, reactions as
/// directed edges, and a bound on time-varying rate constants.
#[derive(Debug, Clone)]
pub struct EGraph {
    dim: usize,
    vertices: Vec<DVector<f64>>,
    edges: Vec<(usize, usize)>,
    epsilon: f64,
    stoich_basis: DMatrix<f64>,
}

impl EGraph {
    pub fn new(
        dim: usize,
        vertices: Vec<DVector<f64>>,
        edges: Vec<(usize, usize)>,
        epsilon: f64,
    ) -> Result<Self, NetworkError> {
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(NetworkError::VertexDimension {
                    index: i,
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                if (&vertices[i] - &vertices[j]).norm() <= 1e-12 {
                    return Err(NetworkError::DuplicateVertex { first: i, second: j });
                }
            }
        }
        for (e, &(s, t)) in edges.iter().enumerate() {
            for idx in [s, t] {
                if idx >= vertices.len() {
                    return Err(NetworkError::EdgeOutOfBounds {
                        edge: e,
                        index: idx,
                        len: vertices.len(),
                    });
                }
            }
            if s == t {
                return Err(NetworkError::SelfLoop { edge: e });
            }
        }
        if !(epsilon >= 1.0) {
            return Err(NetworkError::BadEpsilon { value: epsilon });
        }
        let directions: Vec<DVector<f64>> = edges
            .iter()
            .map(|&(s, t)| &vertices[t] - &vertices[s])
            .collect();
        let stoich_basis = linalg::span_basis(dim, &directions);
        Ok(EGraph {
            dim,
            vertices,
            edges,
            epsilon,
            stoich_basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Orthonormal basis of the stoichiometric subspace `span{y' - y}`.
    pub fn stoich_basis(&self) -> &DMatrix<f64> {
        &self.stoich_basis
    }

    /// Reaction vector `y' - y` of one edge.
    pub fn edge_vector(&self, e: usize) -> DVector<f64> {
        let (s, t) = self.edges[e];
        &self.vertices[t] - &self.vertices[s]
    }

    fn source(&self, e: usize) -> &DVector<f64> {
        &self.vertices[self.edges[e].0]
    }
}

/// Per-edge rate functions of time.
#[derive(Debug, Clone)]
pub enum RateSpec {
    /// Fixed positive rate per edge (not restricted to the epsilon band).
    Constant(Vec<f64>),
    /// `k_e(t) = eps^(a_e sin(w_e t + p_e))`; amplitudes in `[0, 1]` keep
    /// the rate inside `[1/eps, eps]`.
    Sinusoidal {
        amplitudes: Vec<f64>,
        omegas: Vec<f64>,
        phases: Vec<f64>,
    },
    /// Rates drawn log-uniformly from `[1/eps, eps]`, redrawn every
    /// `period` time units; fully determined by the seed.
    PiecewiseConstant { period: f64, seed: u64 },
}

impl RateSpec {
    pub fn validate(&self, g: &EGraph) -> Result<(), NetworkError> {
        let m = g.edges().len();
        match self {
            RateSpec::Constant(ks) => {
                if ks.len() != m {
                    return Err(NetworkError::RateLength {
                        expected: m,
                        got: ks.len(),
                    });
                }
                for (e, &k) in ks.iter().enumerate() {
                    if !(k > 0.0) {
                        return Err(NetworkError::BadRate {
                            edge: e,
                            reason: format!("constant rate {k} is not positive"),
                        });
                    }
                }
            }
            RateSpec::Sinusoidal {
                amplitudes,
                omegas,
                phases,
            } => {
                for v in [amplitudes, omegas, phases] {
                    if v.len() != m {
                        return Err(NetworkError::RateLength {
                            expected: m,
                            got: v.len(),
                        });
                    }
                }
                for (e, &a) in amplitudes.iter().enumerate() {
                    if !(0.0..=1.0).contains(&a) {
                        return Err(NetworkError::BadRate {
                            edge: e,
                            reason: format!("amplitude {a} outside [0, 1]"),
                        });
                    }
                }
            }
            RateSpec::PiecewiseConstant { period, .. } => {
                if !(*period > 0.0) {
                    return Err(NetworkError::BadRate {
                        edge: 0,
                        reason: format!("piece period {period} is not positive"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Rate of every edge at time `t`. Assumes a prior `validate`.
    pub fn rates(&self, g: &EGraph, t: f64) -> Vec<f64> {
        let m = g.edges().len();
        match self {
            RateSpec::Constant(ks) => ks.clone(),
            RateSpec::Sinusoidal {
                amplitudes,
                omegas,
                phases,
            } => (0..m)
                .map(|e| {
                    g.epsilon()
                        .powf(amplitudes[e] * (omegas[e] * t + phases[e]).sin())
                })
                .collect(),
            RateSpec::PiecewiseConstant { period, seed } => {
                let piece = (t / period).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed.wrapping_add(piece.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                (0..m)
                    .map(|_| g.epsilon().powf(rng.gen_range(-1.0..=1.0)))
                    .collect()
            }
        }
    }
}

/// The mass-action vector field: sum over edges of
/// `k_e(t) x^{y_src} (y_tgt - y_src)`.
pub fn mass_action_rhs(
    g: &EGraph,
    k: &RateSpec,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>, NetworkError> {
    if x.len() != g.dim() {
        return Err(NetworkError::StateDimension {
            expected: g.dim(),
            got: x.len(),
        });
    }
    for (i, &xi) in x.iter().enumerate() {
        if !(xi > 0.0) {
            return Err(NetworkError::NonPositiveState { index: i, value: xi });
        }
    }
    k.validate(g)?;
    let rates = k.rates(g, t);
    let mut rhs = DVector::zeros(g.dim());
    for (e, &(s, tgt)) in g.edges().iter().enumerate() {
        let y = &g.vertices()[s];
        let mut monomial = 1.0f64;
        for (xi, yi) in x.iter().zip(y.iter()) {
            if *yi != 0.0 {
                monomial *= xi.powf(*yi);
            }
        }
        rhs += (&g.vertices()[tgt] - y) * (rates[e] * monomial);
    }
    Ok(rhs)
}

/// True when every edge lies inside a strongly connected component, that
/// is, on a directed cycle.
pub fn is_weakly_reversible(g: &EGraph) -> bool {
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..g.vertices().len()).map(|_| graph.add_node(())).collect();
    for &(s, t) in g.edges() {
        graph.add_edge(nodes[s], nodes[t], ());
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut component = vec![usize::MAX; g.vertices().len()];
    for (id, scc) in sccs.iter().enumerate() {
        for &node in scc {
            component[node.index()] = id;
        }
    }
    g.edges().iter().all(|&(s, t)| component[s] == component[t])
}

/// Verdict of an endotacticity check.
#[derive(Debug, Clone)]
pub struct EndotacticReport {
    pub endotactic: bool,
    /// Whether the direction set provably covers every sign cell. False for
    /// the randomized fallback in dimension four and above.
    pub exact: bool,
    pub directions_checked: usize,
    /// A direction violating the defining condition, when one was found.
    pub witness: Option<DVector<f64>>,
}

fn sign_of(dot: f64, scale: f64) -> i8 {
    if dot > SIGN_TOL * scale {
        1
    } else if dot < -SIGN_TOL * scale {
        -1
    } else {
        0
    }
}

/// The defining condition at one direction: every edge gaining along `u`
/// has an opposing edge whose source is strictly farther along `u`.
fn endotactic_at(g: &EGraph, u: &DVector<f64>) -> bool {
    let m = g.edges().len();
    let signs: Vec<i8> = (0..m)
        .map(|e| {
            let v = g.edge_vector(e);
            sign_of(u.dot(&v), v.norm())
        })
        .collect();
    for gainer in 0..m {
        if signs[gainer] != 1 {
            continue;
        }
        let y = g.source(gainer);
        let has_loser = (0..m).any(|loser| {
            if signs[loser] != -1 {
                return false;
            }
            let diff = g.source(loser) - y;
            let norm = diff.norm();
            norm > 0.0 && sign_of(u.dot(&diff), norm) == 1
        });
        if !has_loser {
            return false;
        }
    }
    true
}

/// Unit normals whose sign pattern determines the predicate: all edge
/// vectors and all differences of distinct sources, deduplicated up to sign.
fn predicate_normals(g: &EGraph) -> Vec<DVector<f64>> {
    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut push = |v: DVector<f64>| {
        if let Some(u) = linalg::unit(&v, 1e-12) {
            if !normals.iter().any(|w| w.dot(&u).abs() >= 1.0 - 1e-10) {
                normals.push(u);
            }
        }
    };
    for e in 0..g.edges().len() {
        push(g.edge_vector(e));
    }
    let mut sources: Vec<DVector<f64>> = Vec::new();
    for e in 0..g.edges().len() {
        let s = g.source(e);
        if !sources.iter().any(|v| (v - s).norm() <= 1e-12) {
            sources.push(s.clone());
        }
    }
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            push(&sources[i] - &sources[j]);
        }
    }
    normals
}

/// One representative direction per cell of the central arrangement of the
/// given normals, exact for ambient dimension at most three.
fn cell_representatives(dim: usize, normals: &[DVector<f64>]) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[-1.0]),
        ],
        2 => circle_representatives(normals),
        3 => sphere_representatives(normals),
        _ => unreachable!("exact representatives are limited to dimension three"),
    }
}

fn circle_representatives(normals: &[DVector<f64>]) -> Vec<DVector<f64>> {
    // Directions on each line (1-cells) and one direction inside each arc
    // between consecutive lines (2-cells).
    let mut angles: Vec<f64> = Vec::new();
    for n in normals {
        for base in [f64::atan2(n[0], -n[1]), f64::atan2(-n[0], n[1])] {
            let a = base.rem_euclid(2.0 * std::f64::consts::PI);
            if !angles.iter().any(|b| (b - a).abs() < 1e-12) {
                angles.push(a);
            }
        }
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dir = |a: f64| DVector::from_row_slice(&[a.cos(), a.sin()]);
    let mut reps: Vec<DVector<f64>> = angles.iter().map(|&a| dir(a)).collect();
    for (i, &a) in angles.iter().enumerate() {
        let next = if i + 1 < angles.len() {
            angles[i + 1]
        } else {
            angles[0] + 2.0 * std::f64::consts::PI
        };
        reps.push(dir(0.5 * (a + next)));
    }
    if reps.is_empty() {
        reps.push(dir(0.0));
    }
    reps
}

fn cross3(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

fn sphere_representatives(normals: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut reps: Vec<DVector<f64>> = Vec::new();
    if normals.is_empty() {
        reps.push(DVector::from_row_slice(&[1.0, 0.0, 0.0]));
        return reps;
    }
    // Vertices of the spherical arrangement: intersections of pairs of
    // great circles.
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    for i in 0..normals.len() {
        for j in (i + 1)..normals.len() {
            let c = cross3(&normals[i], &normals[j]);
            if let Some(u) = linalg::unit(&c, 1e-10) {
                for v in [u.clone(), -u] {
                    if !vertices.iter().any(|w| w.dot(&v) >= 1.0 - 1e-10) {
                        vertices.push(v);
                    }
                }
            }
        }
    }

    if vertices.is_empty() {
        // All normals parallel: one great circle. Poles cover the two caps
        // and any equator direction covers the circle cell.
        let n = &normals[0];
        let axis = linalg::columns(3, std::slice::from_ref(n));
        let tangent = linalg::complement_basis(3, &axis);
        let t1 = tangent.column(0).into_owned();
        let t2 = tangent.column(1).into_owned();
        reps.extend([n.clone(), -n, t1.clone(), -t1, t2.clone(), -t2]);
        return reps;
    }

    // Around every vertex, walk a small tangent circle: every arc and face
    // incident to the vertex contributes a cut point or an arc midpoint on
    // that circle. Every cell of a two-or-more-circle arrangement touches a
    // vertex, so this covers everything.
    for v in &vertices {
        reps.push(v.clone());
        let incident: Vec<&DVector<f64>> = normals
            .iter()
            .filter(|n| n.dot(v).abs() <= 1e-9)
            .collect();
        let clearance = normals
            .iter()
            .filter(|n| n.dot(v).abs() > 1e-9)
            .map(|n| n.dot(v).abs().min(1.0).asin())
            .fold(f64::INFINITY, f64::min);
        let rho = if clearance.is_finite() {
            (0.5 * clearance).min(0.3)
        } else {
            0.3
        };
        let axis = linalg::columns(3, std::slice::from_ref(v));
        let tangent = linalg::complement_basis(3, &axis);
        let t1 = tangent.column(0).into_owned();
        let t2 = tangent.column(1).into_owned();

        let mut cuts: Vec<f64> = Vec::new();
        for n in &incident {
            // The great circle of n crosses the tangent circle where the
            // tangential component of the direction is orthogonal to n.
            let a = n.dot(&t1);
            let b = n.dot(&t2);
            if a.abs() <= 1e-14 && b.abs() <= 1e-14 {
                continue;
            }
            let theta = f64::atan2(-a, b);
            for t in [theta, theta + std::f64::consts::PI] {
                let t = t.rem_euclid(2.0 * std::f64::consts::PI);
                if !cuts.iter().any(|c| (c - t).abs() < 1e-12) {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let point = |theta: f64| {
            let raw = v * rho.cos() + (&t1 * theta.cos() + &t2 * theta.sin()) * rho.sin();
            &raw / raw.norm()
        };
        if cuts.is_empty() {
            // Vertex of other circles only: surrounded by one face.
            reps.push(point(0.0));
            continue;
        }
        for (i, &c) in cuts.iter().enumerate() {
            let next = if i + 1 < cuts.len() {
                cuts[i + 1]
            } else {
                cuts[0] + 2.0 * std::f64::consts::PI
            };
            reps.push(point(c));
            reps.push(point(0.5 * (c + next)));
        }
    }
    reps
}

/// Decides endotacticity. Exact up to ambient dimension three; beyond that,
/// seeded random directions are used and `exact` is false.
pub fn is_endotactic(g: &EGraph, seed: u64) -> EndotacticReport {
    if g.edges().is_empty() {
        return EndotacticReport {
            endotactic: true,
            exact: true,
            directions_checked: 0,
            witness: None,
        };
    }
    let dirs: (Vec<DVector<f64>>, bool) = if g.dim() <= 3 {
        (cell_representatives(g.dim(), &predicate_normals(g)), true)
    } else {
        let normals = predicate_normals(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for n in &normals {
            dirs.push(n.clone());
            dirs.push(-n);
        }
        for _ in 0..20_000 {
            let v = DVector::from_fn(g.dim(), |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            if let Some(u) = linalg::unit(&v, 1e-9) {
                dirs.push(u);
            }
        }
        (dirs, false)
    };
    let (dirs, exact) = dirs;
    for u in &dirs {
        if !endotactic_at(g, u) {
            return EndotacticReport {
                endotactic: false,
                exact,
                directions_checked: dirs.len(),
                witness: Some(u.clone()),
            };
        }
    }
    EndotacticReport {
        endotactic: true,
        exact,
        directions_checked: dirs.len(),
        witness: None,
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Horizon,
    PositivityFloor { component: usize, time: f64 },
    BlowupCeiling { time: f64 },
}

/// A simulated solution: states and derivatives at accepted steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub derivatives: Vec<DVector<f64>>,
    pub termination: Termination,
    /// The requested horizon.
    pub horizon: f64,
}

/// Componentwise minima and bounding box over the final stretch of a
/// trajectory: a persistence diagnostic, never a verdict.
#[derive(Debug, Clone)]
pub struct TailDiagnostics {
    pub start_index: usize,
    pub componentwise_min: DVector<f64>,
    pub bbox_min: DVector<f64>,
    pub bbox_max: DVector<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Diagnostics over the last `tail_fraction` of samples.
    pub fn tail_diagnostics(&self, tail_fraction: f64) -> Option<TailDiagnostics> {
        if self.states.is_empty() {
            return None;
        }
        let n = self.states[0].len();
        let start_index =
            ((self.states.len() as f64) * (1.0 - tail_fraction.clamp(0.0, 1.0))) as usize;
        let start_index = start_index.min(self.states.len() - 1);
        let mut mins = DVector::from_element(n, f64::INFINITY);
        let mut maxs = DVector::from_element(n, f64::NEG_INFINITY);
        for s in &self.states[start_index..] {
            for i in 0..n {
                mins[i] = mins[i].min(s[i]);
                maxs[i] = maxs[i].max(s[i]);
            }
        }
        Some(TailDiagnostics {
            start_index,
            componentwise_min: mins.clone(),
            bbox_min: mins,
            bbox_max: maxs,
        })
    }
}

/// Integrator settings.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the fifth- and fourth-order weights, applied to the
// seven stages for the embedded error estimate.
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates the mass-action system with an adaptive Dormand-Prince 5(4)
/// scheme, recording every accepted step.
///
/// Stops at the horizon, when any component falls below the positivity
/// floor, or when the state norm exceeds the blow-up ceiling. A failing
/// right-hand side evaluation inside a step (a stage leaving the positive
/// orthant) rejects the step and halves it.
pub fn simulate(
    g: &EGraph,
    k: &RateSpec,
    x0: &DVector<f64>,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory, NetworkError> {
    if !(horizon > 0.0) {
        return Err(NetworkError::BadHorizon { value: horizon });
    }
    if x0.len() != g.dim() {
        return Err(NetworkError::StateDimension {
            expected: g.dim(),
            got: x0.len(),
        });
    }
    k.validate(g)?;
    let f = |t: f64, x: &DVector<f64>| mass_action_rhs(g, k, t, x);

    let mut t = 0.0f64;
    let mut x = x0.clone();
    let mut fx = f(t, &x)?;

    let mut traj = Trajectory {
        times: vec![t],
        states: vec![x.clone()],
        derivatives: vec![fx.clone()],
        termination: Termination::Horizon,
        horizon,
    };

    // Initial step from the ratio of scaled state and derivative norms.
    let n = g.dim();
    let scaled_norm = |v: &DVector<f64>| {
        let s: f64 = v
            .iter()
            .zip(x.iter())
            .map(|(vi, xi)| {
                let sc = opts.atol + opts.rtol * xi.abs();
                (vi / sc) * (vi / sc)
            })
            .sum();
        (s / n as f64).sqrt()
    };
    let n = g.dim();
    let d0 = scaled_norm(&x);
    let d1 = scaled_norm(&fx);
    let mut h = if d0 >= 1e-5 && d1 >= 1e-5 {
        0.01 * d0 / d1
    } else {
        1e-6 * horizon
    }
    .min(horizon / 10.0)
    .max(1e-10);

    let mut err_prev = 1e-4f64;
    let mut steps = 0usize;

    while t < horizon {
        // Accumulated rounding can leave t an ulp short of the horizon.
        if horizon - t <= 1e-12 * horizon.max(1.0) {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(NetworkError::StepLimit {
                max_steps: opts.max_steps,
                t,
                trajectory: Box::new(traj),
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(NetworkError::StepUnderflow {
                t,
                trajectory: Box::new(traj),
            });
        }
        h = h.min(horizon - t);

        // Stages; a positivity failure anywhere rejects the step.
        let mut ks: Vec<DVector<f64>> = Vec::with_capacity(7);
        ks.push(fx.clone());
        let mut stage_failed = false;
        for s in 0..6 {
            let mut xs = x.clone();
            for (j, a) in DP_A[s].iter().enumerate() {
                if *a != 0.0 {
                    xs += &ks[j] * (*a * h);
                }
            }
            match f(t + DP_C[s] * h, &xs) {
                Ok(kv) => ks.push(kv),
                Err(NetworkError::NonPositiveState { .. }) => {
                    stage_failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if stage_failed {
            h *= 0.5;
            continue;
        }

        // Fifth-order solution is the last stage state (FSAL layout): the
        // seventh stage was evaluated at it.
        let mut x_new = x.clone();
        for (j, b) in DP_A[5].iter().enumerate() {
            if *b != 0.0 {
                x_new += &ks[j] * (*b * h);
            }
        }
        let f_new = ks[6].clone();

        let mut err_sq = 0.0f64;
        for i in 0..n {
            let mut e = 0.0f64;
            for (j, c) in DP_E.iter().enumerate() {
                if *c != 0.0 {
                    e += c * ks[j][i];
                }
            }
            e *= h;
            let sc = opts.atol + opts.rtol * x[i].abs().max(x_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / n as f64).sqrt().max(1e-16);

        if err <= 1.0 {
            t += h;
            x = x_new;
            fx = f_new;
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.derivatives.push(fx.clone());

            if let Some(i) = (0..n).find(|&i| x[i] < POSITIVITY_FLOOR) {
                traj.termination = Termination::PositivityFloor {
                    component: i,
                    time: t,
                };
                return Ok(traj);
            }
            if x.norm() > BLOWUP_CEILING {
                traj.termination = Termination::BlowupCeiling { time: t };
                return Ok(traj);
            }

            // PI step controller.
            let fac = 0.9 * err.powf(-0.14) * err_prev.powf(0.08);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 0.7);
        }
    }
    traj.termination = Termination::Horizon;
    Ok(traj)
}

/// One sample whose derivative left the admissible cone.
#[derive(Debug, Clone)]
pub struct MembershipViolation {
    pub time: f64,
    pub state: DVector<f64>,
    pub distance: f64,
}

/// Outcome of checking a trajectory against an inclusion.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub checked: usize,
    pub satisfied: usize,
    pub fraction: f64,
    pub first_violation: Option<MembershipViolation>,
    pub tolerance: f64,
}

impl MembershipReport {
    pub fn holds(&self) -> bool {
        self.satisfied == self.checked
    }
}

/// Checks every trajectory sample: with `X = log x`, the derivative must lie
/// in the inclusion's cone at `X`, within a tolerance scaled by the
/// derivative magnitude.
pub fn trajectory_membership(
    geo: &FanGeometry<'_>,
    spec: &InclusionSpec,
    traj: &Trajectory,
    allow_unchecked: bool,
) -> Result<MembershipReport, InclusionError> {
    let mut polar_tables: HashMap<usize, FaceDistTable> = HashMap::new();
    let mut checked = 0usize;
    let mut satisfied = 0usize;
    let mut first_violation: Option<MembershipViolation> = None;

    for idx in 0..traj.times.len() {
        let x = &traj.states[idx];
        let dx = &traj.derivatives[idx];
        let bigx = x.map(f64::ln);
        let outcome = spec.eval(geo, &bigx, allow_unchecked)?;
        let table = polar_tables
            .entry(outcome.source_index)
            .or_insert_with(|| FaceDistTable::new(&outcome.rhs));
        let dist = table.distance(dx);
        let tol = MEMBERSHIP_TOL * dx.norm().max(1.0);
        checked += 1;
        if dist <= tol {
            satisfied += 1;
        } else if first_violation.is_none() {
            first_violation = Some(MembershipViolation {
                time: traj.times[idx],
                state: x.clone(),
                distance: dist,
            });
        }
    }
    let fraction = if checked == 0 {
        1.0
    } else {
        satisfied as f64 / checked as f64
    };
    Ok(MembershipReport {
        checked,
        satisfied,
        fraction,
        first_violation,
        tolerance: MEMBERSHIP_TOL,
    })
}

/// The admissible cone of one inclusion evaluation, exposed for callers
/// that inspect right-hand sides directly.
pub fn rhs_cone(
    geo: &FanGeometry<'_>,
    spec: &InclusionSpec,
    x: &DVector<f64>,
    allow_unchecked: bool,
) -> Result<Cone, InclusionError> {
    Ok(spec.eval(geo, x, allow_unchecked)?.rhs)
}
