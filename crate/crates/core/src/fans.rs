//! Polyhedral fans: finite collections of cones closed under taking faces in
//! which any two members intersect in a common face.
//!
//! A [`Fan`] preserves the order in which cones were supplied; indices into
//! that list are the stable provenance used by the inclusion evaluators.
//! Completeness (the union of the cones covering the whole space) is tracked
//! as a [`Completeness`] flag: exact for hyperplane-generated fans, sampled
//! otherwise.
//!
//! # Invariants
//!
//! * Every face of every cone is a member.
//! * The intersection of any two members is a member and a face of both.
//! * Cone keys are unique: no duplicates.

use crate::cones::{self, Cone, ConeKey};
use crate::linalg;
use crate::tolerance::geo_tol;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Default sample count for completeness checks.
pub const DEFAULT_COMPLETENESS_SAMPLES: usize = 100_000;

/// Hyperplane arrangements above this size enumerate too many sign vectors.
pub const MAX_HYPERPLANES: usize = 12;

/// How the completeness flag of a fan was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Completeness {
    /// Complete by construction (hyperplane-generated fans).
    ByConstruction,
    /// No uncovered direction found among this many sampled directions.
    Sampled { samples: usize },
    /// A sampled direction lies in no maximal cone.
    Incomplete { witness: DVector<f64> },
    /// Not yet checked.
    Unchecked,
}

#[derive(Debug, Error)]
pub enum FanBuildError {
    #[error("hyperplane normal {index} is zero")]
    ZeroNormal { index: usize },
    #[error("{count} hyperplanes exceed the supported maximum of {max}")]
    TooManyHyperplanes { count: usize, max: usize },
    #[error("normal has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fan has no cones")]
    Empty,
    #[error("intersection of members is not a member; the fan is corrupted")]
    NotClosed,
}

/// One structural defect found while validating a candidate fan.
#[derive(Debug, Clone)]
pub enum FanViolation {
    Empty,
    MixedAmbient { cone_index: usize, got: usize, expected: usize },
    Duplicate { first: usize, second: usize },
    MissingFace { cone_index: usize, face_generators: Vec<Vec<f64>> },
    IntersectionNotInFan { first: usize, second: usize, generators: Vec<Vec<f64>> },
    IntersectionNotCommonFace { first: usize, second: usize },
}

impl fmt::Display for FanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FanViolation::Empty => write!(f, "a fan must contain at least one cone"),
            FanViolation::MixedAmbient { cone_index, got, expected } => write!(
                f,
                "cone {cone_index} has ambient dimension {got}, expected {expected}"
            ),
            FanViolation::Duplicate { first, second } => {
                write!(f, "cones {first} and {second} are duplicates")
            }
            FanViolation::MissingFace { cone_index, .. } => {
                write!(f, "a face of cone {cone_index} is not a member of the fan")
            }
            FanViolation::IntersectionNotInFan { first, second, .. } => write!(
                f,
                "the intersection of cones {first} and {second} is not a member of the fan"
            ),
            FanViolation::IntersectionNotCommonFace { first, second } => write!(
                f,
                "cones {first} and {second} do not intersect in a common face"
            ),
        }
    }
}

/// Everything wrong with a rejected fan candidate.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<FanViolation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fan validation failed with {} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Outcome of a sampled completeness check.
#[derive(Debug, Clone)]
pub struct CompletenessReport {
    pub complete: bool,
    pub samples: usize,
    pub witness: Option<DVector<f64>>,
}

/// A validated polyhedral fan.
#[derive(Debug, Clone)]
pub struct Fan {
    ambient_dim: usize,
    cones: Vec<Cone>,
    index: BTreeMap<ConeKey, usize>,
    by_dim: Vec<Vec<usize>>,
    maximal: Vec<usize>,
    completeness: Completeness,
}

impl Fan {
    /// Checks the fan axioms for `cones` and assembles a [`Fan`] preserving
    /// the input order. All violations are collected, not just the first.
    pub fn validate(cones_in: Vec<Cone>) -> Result<Self, ValidationReport> {
        let mut violations = Vec::new();
        if cones_in.is_empty() {
            return Err(ValidationReport {
                violations: vec![FanViolation::Empty],
            });
        }
        let ambient_dim = cones_in[0].ambient_dim();
        for (i, c) in cones_in.iter().enumerate() {
            if c.ambient_dim() != ambient_dim {
                violations.push(FanViolation::MixedAmbient {
                    cone_index: i,
                    got: c.ambient_dim(),
                    expected: ambient_dim,
                });
            }
        }
        if !violations.is_empty() {
            return Err(ValidationReport { violations });
        }

        let mut index: BTreeMap<ConeKey, usize> = BTreeMap::new();
        for (i, c) in cones_in.iter().enumerate() {
            if let Some(&first) = index.get(&c.canonical_key()) {
                violations.push(FanViolation::Duplicate { first, second: i });
            } else {
                index.insert(c.canonical_key(), i);
            }
        }

        // Face lattices, computed once per cone and reused for both checks.
        let lattices: Vec<Vec<Cone>> = cones_in.iter().map(cones::face_lattice).collect();
        let face_keys: Vec<Vec<ConeKey>> = lattices
            .iter()
            .map(|l| l.iter().map(Cone::canonical_key).collect())
            .collect();

        for (i, lattice) in lattices.iter().enumerate() {
            for face in lattice {
                if !index.contains_key(&face.canonical_key()) {
                    violations.push(FanViolation::MissingFace {
                        cone_index: i,
                        face_generators: vecs_of(face),
                    });
                }
            }
        }

        for i in 0..cones_in.len() {
            for j in (i + 1)..cones_in.len() {
                let k = cones::intersect(&cones_in[i], &cones_in[j]);
                let key = k.canonical_key();
                if !index.contains_key(&key) {
                    violations.push(FanViolation::IntersectionNotInFan {
                        first: i,
                        second: j,
                        generators: vecs_of(&k),
                    });
                    continue;
                }
                let common = face_keys[i].contains(&key) && face_keys[j].contains(&key);
                if !common {
                    violations.push(FanViolation::IntersectionNotCommonFace { first: i, second: j });
                }
            }
        }

        if !violations.is_empty() {
            return Err(ValidationReport { violations });
        }
        Ok(Fan::assemble(ambient_dim, cones_in, Completeness::Unchecked))
    }

    /// Builds a fan from maximal cones by adjoining every face, then
    /// validating. Convenient for fans given by their top cells.
    pub fn from_maximal_cones(maximal: Vec<Cone>) -> Result<Self, ValidationReport> {
        let mut all: Vec<Cone> = Vec::new();
        let mut seen: Vec<ConeKey> = Vec::new();
        for c in &maximal {
            for face in cones::face_lattice(c) {
                let key = face.canonical_key();
                if !seen.contains(&key) {
                    seen.push(key);
                    all.push(face);
                }
            }
        }
        Fan::validate(all)
    }

    fn assemble(ambient_dim: usize, cones_in: Vec<Cone>, completeness: Completeness) -> Self {
        let mut index = BTreeMap::new();
        let mut by_dim = vec![Vec::new(); ambient_dim + 1];
        for (i, c) in cones_in.iter().enumerate() {
            index.insert(c.canonical_key(), i);
            by_dim[c.dim()].push(i);
        }
        let maximal = by_dim[ambient_dim].clone();
        Fan {
            ambient_dim,
            cones: cones_in,
            index,
            by_dim,
            maximal,
            completeness,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn cone(&self, i: usize) -> &Cone {
        &self.cones[i]
    }

    /// Indices of cones of dimension `k`.
    pub fn dim_indices(&self, k: usize) -> &[usize] {
        &self.by_dim[k]
    }

    /// Indices of the full-dimensional cones.
    pub fn maximal(&self) -> &[usize] {
        &self.maximal
    }

    pub fn completeness(&self) -> &Completeness {
        &self.completeness
    }

    /// Whether the fan is known to cover the whole space.
    pub fn is_certified_complete(&self) -> bool {
        matches!(
            self.completeness,
            Completeness::ByConstruction | Completeness::Sampled { .. }
        )
    }

    /// Finds a structurally equal member cone.
    pub fn find(&self, cone: &Cone) -> Option<usize> {
        self.index.get(&cone.canonical_key()).copied()
    }

    /// Samples unit directions and reports the first lying in no maximal
    /// cone. Deterministic for a fixed seed.
    pub fn check_complete(&self, samples: usize, seed: u64) -> CompletenessReport {
        if self.maximal.is_empty() {
            let mut e = DVector::zeros(self.ambient_dim);
            if self.ambient_dim > 0 {
                e[0] = 1.0;
            }
            return CompletenessReport {
                complete: false,
                samples: 0,
                witness: Some(e),
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<DVector<f64>> = (0..samples)
            .map(|_| random_unit(&mut rng, self.ambient_dim))
            .collect();
        let miss = dirs
            .par_iter()
            .enumerate()
            .filter(|(_, d)| {
                !self
                    .maximal
                    .iter()
                    .any(|&i| self.cones[i].contains_point(d))
            })
            .map(|(i, _)| i)
            .min();
        match miss {
            Some(i) => CompletenessReport {
                complete: false,
                samples,
                witness: Some(dirs[i].clone()),
            },
            None => CompletenessReport {
                complete: true,
                samples,
                witness: None,
            },
        }
    }

    /// Runs a completeness check and stamps the outcome on the fan.
    pub fn with_sampled_completeness(mut self, samples: usize, seed: u64) -> Self {
        let report = self.check_complete(samples, seed);
        self.completeness = if report.complete {
            Completeness::Sampled { samples }
        } else {
            Completeness::Incomplete {
                witness: report.witness.expect("incomplete report carries witness"),
            }
        };
        self
    }

    /// Marks the fan complete on the caller's authority.
    pub fn assert_complete(mut self) -> Self {
        self.completeness = Completeness::ByConstruction;
        self
    }
}

fn vecs_of(c: &Cone) -> Vec<Vec<f64>> {
    c.generators().iter().map(|g| g.iter().cloned().collect()).collect()
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

/// Validates a list of cones as a fan. See [`Fan::validate`].
pub fn validate_fan(cones: Vec<Cone>) -> Result<Fan, ValidationReport> {
    Fan::validate(cones)
}

/// Sampled completeness check. See [`Fan::check_complete`].
pub fn is_complete(fan: &Fan, samples: usize, seed: u64) -> CompletenessReport {
    fan.check_complete(samples, seed)
}

/// The complete fan induced by a central hyperplane arrangement: cells are
/// the closures of the sign-vector regions of the normals.
///
/// Antiparallel and duplicate normals are merged; at most [`MAX_HYPERPLANES`]
/// distinct hyperplanes are accepted (sign enumeration is 3^k).
pub fn hyperplane_fan(ambient_dim: usize, normals: &[DVector<f64>]) -> Result<Fan, FanBuildError> {
    let tol = geo_tol();
    let mut units: Vec<DVector<f64>> = Vec::new();
    for (i, n) in normals.iter().enumerate() {
        if n.len() != ambient_dim {
            return Err(FanBuildError::DimensionMismatch {
                expected: ambient_dim,
                got: n.len(),
            });
        }
        let Some(u) = linalg::unit(n, tol) else {
            return Err(FanBuildError::ZeroNormal { index: i });
        };
        let dup = units.iter().any(|v| v.dot(&u).abs() >= 1.0 - 1e-10);
        if !dup {
            units.push(u);
        }
    }
    if units.len() > MAX_HYPERPLANES {
        return Err(FanBuildError::TooManyHyperplanes {
            count: units.len(),
            max: MAX_HYPERPLANES,
        });
    }

    let k = units.len();
    if k == 0 {
        let full = Cone::full_space(ambient_dim);
        return Ok(Fan::assemble(ambient_dim, vec![full], Completeness::ByConstruction));
    }

    let mut cells: Vec<Cone> = Vec::new();
    let mut seen: BTreeMap<ConeKey, ()> = BTreeMap::new();
    let patterns = 3usize.pow(k as u32);
    for p in 0..patterns {
        let mut signs = Vec::with_capacity(k);
        let mut rem = p;
        for _ in 0..k {
            signs.push((rem % 3) as i8 - 1);
            rem /= 3;
        }
        // The closed cell {x : sign(n_i . x) = s_i} is the polar of the cone
        // generated by the constraint normals.
        let mut constraint_gens: Vec<DVector<f64>> = Vec::new();
        for (i, &s) in signs.iter().enumerate() {
            match s {
                0 => {
                    constraint_gens.push(units[i].clone());
                    constraint_gens.push(-&units[i]);
                }
                1 => constraint_gens.push(-&units[i]),
                _ => constraint_gens.push(units[i].clone()),
            }
        }
        let constraints = Cone::from_generators(ambient_dim, &constraint_gens)
            .expect("constraint normals share ambient dim");
        let cell = cones::polar(&constraints);

        if !sign_pattern_realized(&cell, &units, &signs) {
            continue;
        }
        let key = cell.canonical_key();
        if !seen.contains_key(&key) {
            seen.insert(key, ());
            cells.push(cell);
        }
    }

    // Canonical order: ascending dimension, then key.
    cells.sort_by(|a, b| {
        a.dim()
            .cmp(&b.dim())
            .then_with(|| a.canonical_key().cmp(&b.canonical_key()))
    });
    Ok(Fan::assemble(ambient_dim, cells, Completeness::ByConstruction))
}

/// A sign pattern is realized when the cell's relative interior actually
/// attains it: strict signs at the generator centroid, subspace containment
/// for zeros. Degenerate patterns collapse onto cells of other patterns and
/// are discarded here.
fn sign_pattern_realized(cell: &Cone, units: &[DVector<f64>], signs: &[i8]) -> bool {
    let tol = geo_tol();
    for (i, &s) in signs.iter().enumerate() {
        if s == 0 {
            if !cell.generators().iter().all(|g| units[i].dot(g).abs() <= 1e-9) {
                return false;
            }
        }
    }
    if cell.generators().is_empty() {
        return signs.iter().all(|&s| s == 0);
    }
    let centroid: DVector<f64> = cell
        .generators()
        .iter()
        .fold(DVector::zeros(cell.ambient_dim()), |acc, g| acc + g);
    for (i, &s) in signs.iter().enumerate() {
        let d = units[i].dot(&centroid);
        match s {
            1 if d <= tol => return false,
            -1 if d >= -tol => return false,
            _ => {}
        }
    }
    true
}

/// Intersection of the listed member cones, returned as a fan member.
/// Fans are closed under intersections, so a lookup failure indicates the
/// structure was corrupted rather than bad input.
pub fn intersect_in_fan<'f>(
    fan: &'f Fan,
    indices: &[usize],
) -> Result<(usize, &'f Cone), FanBuildError> {
    if indices.is_empty() {
        return Err(FanBuildError::Empty);
    }
    let mut acc = fan.cone(indices[0]).clone();
    for &i in &indices[1..] {
        acc = cones::intersect(&acc, fan.cone(i));
    }
    match fan.find(&acc) {
        Some(idx) => Ok((idx, fan.cone(idx))),
        None => Err(FanBuildError::NotClosed),
    }
}

/// Images of all fan cones under the orthogonal projection with the given
/// kernel. The images need not form a fan and are returned as a plain list,
/// in fan order.
pub fn project_fan(fan: &Fan, kernel_basis: &[DVector<f64>]) -> Vec<Cone> {
    let n = fan.ambient_dim();
    for b in kernel_basis {
        assert_eq!(b.len(), n, "kernel basis dimension mismatch");
    }
    let basis = linalg::span_basis(n, kernel_basis);
    let proj = DMatrix::identity(n, n) - linalg::projector(n, &basis);
    fan.cones()
        .iter()
        .map(|c| {
            let gens: Vec<DVector<f64>> = c.generators().iter().map(|g| &proj * g).collect();
            Cone::from_generators(n, &gens).expect("projected generators share ambient")
        })
        .collect()
}
