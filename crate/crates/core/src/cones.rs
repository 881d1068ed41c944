//! Convex polyhedral cones with dual representations.
//!
//! A [`Cone`] stores both a generator (V-) representation and a halfspace
//! (H-) representation restricted to the cone's linear span: the cone equals
//! the intersection of its span with the halfspaces `n . x <= 0`. Generators
//! are unit length, deduplicated, and irredundant; halfspace normals are unit
//! length and lie inside the span. Both lists are kept in a canonical sorted
//! order so that structurally equal cones compare equal by key.
//!
//! # Invariants
//!
//! * `dim == rank(generators)`, and `span_basis` holds an orthonormal basis
//!   of that span (identity columns when the cone is full dimensional).
//! * A point belongs to the cone iff it lies in the span (within tolerance)
//!   and satisfies every halfspace.
//! * The polar swaps representations: facet normals of `C` generate `C°`
//!   together with `span(C)` orthogonal directions.

use crate::linalg;
use crate::nnls::{self, NnlsError};
use crate::tolerance::{geo_tol, scaled_tol};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("vector has dimension {got}, expected ambient dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("face dimension {k} out of range for a cone of dimension {dim}")]
    KOutOfRange { k: usize, dim: usize },
    #[error(transparent)]
    Projection(#[from] NnlsError),
}

/// Result of projecting a point onto a cone.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Nearest point of the cone.
    pub nearest_point: DVector<f64>,
    /// Euclidean distance from the query to the cone.
    pub distance: f64,
    /// Dimension of the smallest face containing the nearest point.
    pub active_face_dim: usize,
}

/// Canonical identity of a cone: unit generators rounded to 12 decimals,
/// sorted. Two cones that are equal as sets share a key.
pub type ConeKey = Vec<Vec<i64>>;

/// A closed convex polyhedral cone in `R^n`.
#[derive(Debug, Clone)]
pub struct Cone {
    ambient_dim: usize,
    generators: Vec<DVector<f64>>,
    halfspaces: Vec<DVector<f64>>,
    span_basis: DMatrix<f64>,
    dim: usize,
}

const KEY_SCALE: f64 = 1e12;

impl Cone {
    /// Builds a cone from arbitrary generating vectors. Zero vectors are
    /// dropped, the rest are normalized, deduplicated, and reduced to an
    /// irredundant set; the halfspace representation is then enumerated.
    /// All-zero (or empty) input produces the zero cone.
    pub fn from_generators(
        ambient_dim: usize,
        generators: &[DVector<f64>],
    ) -> Result<Self, ConeError> {
        for g in generators {
            if g.len() != ambient_dim {
                return Err(ConeError::DimensionMismatch {
                    expected: ambient_dim,
                    got: g.len(),
                });
            }
        }
        let tol = geo_tol();

        let mut units: Vec<DVector<f64>> = Vec::new();
        for g in generators {
            if let Some(u) = linalg::unit(g, tol) {
                let dup = units.iter().any(|v| (v - &u).norm() <= 1e-9);
                if !dup {
                    units.push(u);
                }
            }
        }

        let dim = linalg::rank(ambient_dim, &units);
        let span_basis = if dim == ambient_dim {
            DMatrix::identity(ambient_dim, ambient_dim)
        } else {
            linalg::span_basis(ambient_dim, &units)
        };

        let irredundant = remove_redundant(&units, &span_basis);
        let halfspaces = facet_normals(&irredundant, &span_basis, dim);

        let mut cone = Cone {
            ambient_dim,
            generators: irredundant,
            halfspaces,
            span_basis,
            dim,
        };
        cone.generators.sort_by(compare_canonical);
        cone.halfspaces.sort_by(compare_canonical);
        Ok(cone)
    }

    /// The zero cone `{0}`.
    pub fn zero(ambient_dim: usize) -> Self {
        Cone::from_generators(ambient_dim, &[]).expect("zero cone construction")
    }

    /// The full ambient space as a cone.
    pub fn full_space(ambient_dim: usize) -> Self {
        let mut gens = Vec::with_capacity(2 * ambient_dim);
        for i in 0..ambient_dim {
            let mut v = DVector::zeros(ambient_dim);
            v[i] = 1.0;
            gens.push(v.clone());
            v[i] = -1.0;
            gens.push(v);
        }
        Cone::from_generators(ambient_dim, &gens).expect("full space construction")
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unit, irredundant generators in canonical order.
    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    /// Outward facet normals `n` (unit, inside the span): the cone is the set
    /// of span points with `n . x <= 0` for every normal.
    pub fn halfspaces(&self) -> &[DVector<f64>] {
        &self.halfspaces
    }

    /// Orthonormal basis of the cone's linear span, one column per dimension.
    pub fn span_basis(&self) -> &DMatrix<f64> {
        &self.span_basis
    }

    /// Membership test at the global tolerance, scaled by `|x|`.
    pub fn contains_point(&self, x: &DVector<f64>) -> bool {
        assert_eq!(x.len(), self.ambient_dim, "point dimension mismatch");
        let tol = scaled_tol(x.norm());
        let in_span = if self.dim == self.ambient_dim {
            true
        } else {
            let px = &self.span_basis * (self.span_basis.transpose() * x);
            (x - px).norm() <= tol
        };
        in_span && self.halfspaces.iter().all(|n| n.dot(x) <= tol)
    }

    /// Distance from the cone's span measured for diagnostics; zero for full
    /// dimensional cones.
    pub fn span_distance(&self, x: &DVector<f64>) -> f64 {
        if self.dim == self.ambient_dim {
            return 0.0;
        }
        let px = &self.span_basis * (self.span_basis.transpose() * x);
        (x - px).norm()
    }

    /// Canonical key: sorted unit generators rounded to 12 decimals.
    pub fn canonical_key(&self) -> ConeKey {
        self.generators.iter().map(|g| round_vec(g)).collect()
    }
}

fn round_vec(v: &DVector<f64>) -> Vec<i64> {
    v.iter().map(|&x| (x * KEY_SCALE).round() as i64).collect()
}

fn compare_canonical(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    round_vec(a).cmp(&round_vec(b))
}

/// Drops generators expressible as nonnegative combinations of the others.
/// Processing order is fixed (last to first) so results are deterministic.
fn remove_redundant(units: &[DVector<f64>], span_basis: &DMatrix<f64>) -> Vec<DVector<f64>> {
    if units.len() <= 1 {
        return units.to_vec();
    }
    let k = span_basis.ncols();
    let coords: Vec<DVector<f64>> = units.iter().map(|g| span_basis.transpose() * g).collect();
    let mut keep = vec![true; units.len()];
    for j in (0..units.len()).rev() {
        let others: Vec<DVector<f64>> = (0..units.len())
            .filter(|&i| i != j && keep[i])
            .map(|i| coords[i].clone())
            .collect();
        if others.is_empty() {
            continue;
        }
        let a = linalg::columns(k, &others);
        match nnls::nnls(&a, &coords[j]) {
            Ok(sol) if sol.residual.norm() <= geo_tol() => keep[j] = false,
            // On a (desk-scale improbable) convergence failure keep the
            // generator: redundancy is harmless, dropping must be certain.
            _ => {}
        }
    }
    units
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(g, _)| g.clone())
        .collect()
}

/// Enumerates outward facet normals inside the span and lifts them to ambient
/// coordinates. Every facet hyperplane of a `k`-dimensional cone is spanned by
/// `k - 1` linearly independent generators, so candidates come from subsets.
fn facet_normals(
    generators: &[DVector<f64>],
    span_basis: &DMatrix<f64>,
    dim: usize,
) -> Vec<DVector<f64>> {
    let tol = geo_tol();
    if dim == 0 {
        return Vec::new();
    }
    let coords: Vec<DVector<f64>> = generators
        .iter()
        .map(|g| span_basis.transpose() * g)
        .collect();
    if dim == 1 {
        let has_pos = coords.iter().any(|c| c[0] > tol);
        let has_neg = coords.iter().any(|c| c[0] < -tol);
        if has_pos && has_neg {
            return Vec::new(); // A line: no proper facets.
        }
        let sign = if has_pos { 1.0 } else { -1.0 };
        let normal_span = DVector::from_element(1, -sign);
        return vec![span_basis * normal_span];
    }

    let mut normals_span: Vec<DVector<f64>> = Vec::new();
    let m = coords.len();
    let mut subset = vec![0usize; dim - 1];
    for_each_combination(m, dim - 1, &mut subset, 0, 0, &mut |idx| {
        let chosen: Vec<DVector<f64>> = idx.iter().map(|&i| coords[i].clone()).collect();
        let Some(normal) = linalg::hyperplane_normal(dim, &chosen) else {
            return;
        };
        let dots: Vec<f64> = coords.iter().map(|c| normal.dot(c)).collect();
        let max = dots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = dots.iter().cloned().fold(f64::INFINITY, f64::min);
        let oriented = if max <= tol {
            normal
        } else if min >= -tol {
            -normal
        } else {
            return; // Not a supporting hyperplane.
        };
        let dup = normals_span
            .iter()
            .any(|n| (n - &oriented).norm() <= 1e-9 || n.dot(&oriented) >= 1.0 - 1e-10);
        if !dup {
            normals_span.push(oriented);
        }
    });

    normals_span.iter().map(|n| span_basis * n).collect()
}

fn for_each_combination(
    m: usize,
    r: usize,
    buf: &mut Vec<usize>,
    start: usize,
    depth: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == r {
        f(buf);
        return;
    }
    for i in start..m {
        buf[depth] = i;
        for_each_combination(m, r, buf, i + 1, depth + 1, f);
    }
}

/// Builds a cone from generating vectors. See [`Cone::from_generators`].
pub fn cone_from_generators(
    ambient_dim: usize,
    generators: &[DVector<f64>],
) -> Result<Cone, ConeError> {
    Cone::from_generators(ambient_dim, generators)
}

/// Polar dual `C° = { u : u . x <= 0 for all x in C }`.
///
/// The polar is generated by the facet normals of `C` together with both
/// orientations of a basis of `span(C)` orthogonal complement.
pub fn polar(c: &Cone) -> Cone {
    let mut gens: Vec<DVector<f64>> = c.halfspaces.clone();
    let comp = linalg::complement_basis(c.ambient_dim, &c.span_basis);
    for col in comp.column_iter() {
        gens.push(col.into_owned());
        gens.push(-col.into_owned());
    }
    Cone::from_generators(c.ambient_dim, &gens).expect("polar generators share ambient dim")
}

/// Orthogonal projection of `x` onto the cone, via non-negative least squares
/// over the generator matrix.
pub fn project_point(c: &Cone, x: &DVector<f64>) -> Result<ProjectionResult, ConeError> {
    if x.len() != c.ambient_dim {
        return Err(ConeError::DimensionMismatch {
            expected: c.ambient_dim,
            got: x.len(),
        });
    }
    if c.generators.is_empty() {
        return Ok(ProjectionResult {
            nearest_point: DVector::zeros(c.ambient_dim),
            distance: x.norm(),
            active_face_dim: 0,
        });
    }
    let a = linalg::columns(c.ambient_dim, &c.generators);
    let sol = nnls::nnls(&a, x)?;
    let nearest = &a * &sol.x;
    let distance = (x - &nearest).norm();
    let active_face_dim = smallest_face_dim(c, &nearest);
    Ok(ProjectionResult {
        nearest_point: nearest,
        distance,
        active_face_dim,
    })
}

/// Dimension of the smallest face of `c` containing the cone point `y`.
fn smallest_face_dim(c: &Cone, y: &DVector<f64>) -> usize {
    let tol = scaled_tol(y.norm());
    let active: Vec<&DVector<f64>> = c
        .halfspaces
        .iter()
        .filter(|n| n.dot(y).abs() <= tol)
        .collect();
    if active.is_empty() {
        return c.dim;
    }
    let face_gens: Vec<DVector<f64>> = c
        .generators
        .iter()
        .filter(|g| active.iter().all(|n| n.dot(g).abs() <= geo_tol()))
        .cloned()
        .collect();
    linalg::rank(c.ambient_dim, &face_gens)
}

/// Facets (faces of codimension one). Subspace cones, including the zero cone
/// and the full space, have none.
pub fn facets(c: &Cone) -> Vec<Cone> {
    c.halfspaces
        .iter()
        .map(|n| {
            let gens: Vec<DVector<f64>> = c
                .generators
                .iter()
                .filter(|g| n.dot(g).abs() <= geo_tol())
                .cloned()
                .collect();
            Cone::from_generators(c.ambient_dim, &gens).expect("facet generators share ambient")
        })
        .collect()
}

/// All distinct `k`-dimensional faces of the cone (the cone itself for
/// `k == dim`). Errors when `k > dim`.
pub fn faces(c: &Cone, k: usize) -> Result<Vec<Cone>, ConeError> {
    if k > c.dim {
        return Err(ConeError::KOutOfRange { k, dim: c.dim });
    }
    Ok(face_lattice(c)
        .into_iter()
        .filter(|f| f.dim() == k)
        .collect())
}

/// Every face of the cone, of every dimension, deduplicated. The lattice is
/// found by repeatedly taking facets; it always contains the cone itself and
/// bottoms out at the minimal face (the lineality space).
pub fn face_lattice(c: &Cone) -> Vec<Cone> {
    let mut seen: Vec<(ConeKey, Cone)> = vec![(c.canonical_key(), c.clone())];
    let mut frontier = vec![c.clone()];
    while let Some(f) = frontier.pop() {
        for facet in facets(&f) {
            let key = facet.canonical_key();
            if !seen.iter().any(|(k, _)| *k == key) {
                seen.push((key, facet.clone()));
                frontier.push(facet);
            }
        }
    }
    seen.sort_by(|(ka, a), (kb, b)| b.dim().cmp(&a.dim()).then_with(|| ka.cmp(kb)));
    seen.into_iter().map(|(_, f)| f).collect()
}

/// Whether `inner` is contained in `outer` (both cones in the same ambient
/// space): every generator of `inner` must be a point of `outer`.
pub fn cone_contains_cone(outer: &Cone, inner: &Cone) -> bool {
    assert_eq!(
        outer.ambient_dim, inner.ambient_dim,
        "containment requires a shared ambient space"
    );
    inner.generators.iter().all(|g| outer.contains_point(g))
}

/// Set equality via mutual containment.
pub fn cones_equal(a: &Cone, b: &Cone) -> bool {
    cone_contains_cone(a, b) && cone_contains_cone(b, a)
}

/// Intersection of two cones, computed through polar duality: the polar of
/// the intersection is generated by the union of the polar generators.
pub fn intersect(a: &Cone, b: &Cone) -> Cone {
    assert_eq!(
        a.ambient_dim, b.ambient_dim,
        "intersection requires a shared ambient space"
    );
    let pa = polar(a);
    let pb = polar(b);
    let mut gens = pa.generators.clone();
    gens.extend(pb.generators.iter().cloned());
    let sum = Cone::from_generators(a.ambient_dim, &gens).expect("polar union shares ambient");
    polar(&sum)
}
