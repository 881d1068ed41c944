//! Toric and quasi-toric differential inclusions over a polyhedral fan.
//!
//! Both inclusions map a point `X` to a polar cone of admissible velocities.
//! The toric form intersects all maximal cones within distance `delta` of
//! `X` and returns the polar of the intersection. The quasi-toric form walks
//! cone dimensions `0..n-1` with per-dimension thresholds `d_k`, returning
//! the polar of the first cone found within threshold; if no step fires, it
//! returns the polar of the maximal cone containing `X`.
//!
//! The quasi-toric procedure is well defined only when the thresholds are
//! compatible: whenever `X` is within `d_k` of a cone of dimension `k` and
//! within `d_m` of a cone of dimension `m`, it must be within `d_h` of their
//! intersection (of dimension `h`). [`check_well_defined`] verifies this for
//! every eligible cone pair by maximizing the tube distance ratio, and
//! produces either a certificate or a concrete witness point violating the
//! condition.

use crate::cones::{self, Cone};
use crate::fans::{self, Fan};
use crate::tubes::{FaceDistTable, RatioProblem, SupConfig, SupEstimate, SupMethod, sup_tube_ratio};
use nalgebra::DVector;
use thiserror::Error;

/// Relative slack when comparing a supremum against its threshold bound.
/// Thresholds produced by the inflation construction bind exactly on the
/// worst pair; this slack keeps them certifiable.
const CERT_REL_TOL: f64 = 1e-9;
/// Absolute slack companion to [`CERT_REL_TOL`].
const CERT_ABS_TOL: f64 = 1e-12;
/// Safety inflation applied to sampled (non-deterministic) alpha estimates.
const SAMPLED_ALPHA_INFLATION: f64 = 1.25;

#[derive(Debug, Error)]
pub enum InclusionError {
    #[error("threshold must be positive, got {value}")]
    BadThreshold { value: f64 },
    #[error("threshold vector has length {got}, expected ambient dimension {expected}")]
    WrongThresholdLength { expected: usize, got: usize },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fan is not certified complete; check completeness first or allow unchecked evaluation")]
    IncompleteFan,
    #[error("threshold vector is not certified well-defined; certify it first or allow unchecked evaluation")]
    UncertifiedThresholds,
    #[error("evaluation is ambiguous at step {step}: cones {candidates:?} are all within threshold")]
    Ambiguous { step: usize, candidates: Vec<usize> },
    #[error("no cone is active at the evaluation point; the fan does not cover it")]
    NoActiveCone,
    #[error("cone subset is empty")]
    EmptySubset,
    #[error("cone index {index} is out of bounds for a fan with {len} cones")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("fan is not closed under intersection: {0}")]
    Fan(#[from] fans::FanBuildError),
    #[error(transparent)]
    Cone(#[from] cones::ConeError),
}

/// How a certificate was established.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertMethod {
    /// Deterministic dense scan in ambient dimension at most three.
    ExactLowDim,
    /// Seeded sampling with hill climbing; a confident but inexact bound.
    Sampled { samples: usize, restarts: usize },
    /// Follows from structure alone (containment or a singleton subset).
    Construction,
}

impl CertMethod {
    fn from_sup(method: &SupMethod) -> Self {
        match method {
            SupMethod::Sampled { samples, restarts } => CertMethod::Sampled {
                samples: *samples,
                restarts: *restarts,
            },
            _ => CertMethod::ExactLowDim,
        }
    }

    fn merge(self, other: CertMethod) -> CertMethod {
        match (self, other) {
            (CertMethod::Sampled { samples, restarts }, CertMethod::Sampled { samples: s2, restarts: r2 }) => {
                CertMethod::Sampled {
                    samples: samples + s2,
                    restarts: restarts + r2,
                }
            }
            (s @ CertMethod::Sampled { .. }, _) => s,
            (_, s @ CertMethod::Sampled { .. }) => s,
            (CertMethod::Construction, other) => other,
            (other, CertMethod::Construction) => other,
            _ => CertMethod::ExactLowDim,
        }
    }
}

/// Outcome of a well-definedness check on a threshold vector.
#[derive(Debug, Clone)]
pub enum Certificate {
    /// All eligible cone pairs satisfy the compatibility condition.
    /// `alpha` is the worst ratio of a pair supremum to its bound; it is at
    /// most one (up to tolerance) and zero when no pair binds.
    Certified { method: CertMethod, alpha: f64 },
    /// A point within both pair thresholds but farther than allowed from the
    /// pair intersection.
    Refuted {
        witness: DVector<f64>,
        cone_pair: (usize, usize),
    },
    Unchecked,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }
}

/// Per-dimension thresholds `d_0..d_{n-1}` with their certification state.
#[derive(Debug, Clone)]
pub struct DeltaVec {
    d: Vec<f64>,
    certificate: Certificate,
}

impl DeltaVec {
    /// Wraps raw thresholds without checking well-definedness.
    pub fn unchecked(d: Vec<f64>) -> Result<Self, InclusionError> {
        for &v in &d {
            if !(v > 0.0) {
                return Err(InclusionError::BadThreshold { value: v });
            }
        }
        Ok(DeltaVec {
            d,
            certificate: Certificate::Unchecked,
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.d
    }

    /// Threshold for cones of dimension `k`.
    pub fn threshold(&self, k: usize) -> f64 {
        self.d[k]
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }
}

/// An inclusion to evaluate: toric with one radius, or quasi-toric with a
/// per-dimension threshold vector.
#[derive(Debug, Clone)]
pub enum InclusionSpec {
    Tdi { delta: f64 },
    Qtdi { d: DeltaVec },
}

impl InclusionSpec {
    pub fn eval(
        &self,
        geo: &FanGeometry<'_>,
        x: &DVector<f64>,
        allow_unchecked: bool,
    ) -> Result<EvalOutcome, InclusionError> {
        match self {
            InclusionSpec::Tdi { delta } => eval_tdi(geo, *delta, x, allow_unchecked),
            InclusionSpec::Qtdi { d } => eval_qtdi(geo, d, x, allow_unchecked),
        }
    }
}

/// Step index reported by toric evaluations: past every quasi-toric step.
pub fn tdi_step_sentinel(ambient_dim: usize) -> usize {
    ambient_dim + 1
}

/// Result of evaluating an inclusion at a point.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// The admissible velocity cone (a polar cone).
    pub rhs: Cone,
    /// Fan index of the cone whose polar is `rhs`.
    pub source_index: usize,
    /// Quasi-toric: the step that fired (`0..=n`). Toric: `n + 1`.
    pub step: usize,
    /// Cones within threshold at the firing step (toric: within `delta`).
    pub active: Vec<usize>,
}

/// Distance tables for every cone of a fan, built once and shared by all
/// evaluations against that fan.
pub struct FanGeometry<'f> {
    fan: &'f Fan,
    tables: Vec<FaceDistTable>,
}

impl<'f> FanGeometry<'f> {
    pub fn new(fan: &'f Fan) -> Self {
        let tables = fan.cones().iter().map(FaceDistTable::new).collect();
        FanGeometry { fan, tables }
    }

    pub fn fan(&self) -> &'f Fan {
        self.fan
    }

    pub fn table(&self, index: usize) -> &FaceDistTable {
        &self.tables[index]
    }

    pub fn distance(&self, index: usize, x: &DVector<f64>) -> f64 {
        self.tables[index].distance(x)
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<(), InclusionError> {
        if x.len() != self.fan.ambient_dim() {
            return Err(InclusionError::DimensionMismatch {
                expected: self.fan.ambient_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates the toric inclusion: the polar of the intersection of all
/// maximal cones within `delta` of `x`.
pub fn eval_tdi(
    geo: &FanGeometry<'_>,
    delta: f64,
    x: &DVector<f64>,
    allow_unchecked: bool,
) -> Result<EvalOutcome, InclusionError> {
    if !(delta > 0.0) {
        return Err(InclusionError::BadThreshold { value: delta });
    }
    geo.check_point(x)?;
    if !allow_unchecked && !geo.fan().is_certified_complete() {
        return Err(InclusionError::IncompleteFan);
    }
    let active: Vec<usize> = geo
        .fan()
        .maximal()
        .iter()
        .copied()
        .filter(|&i| geo.distance(i, x) <= delta)
        .collect();
    if active.is_empty() {
        return Err(InclusionError::NoActiveCone);
    }
    let (source_index, source) = fans::intersect_in_fan(geo.fan(), &active)?;
    Ok(EvalOutcome {
        rhs: cones::polar(source),
        source_index,
        step: tdi_step_sentinel(geo.fan().ambient_dim()),
        active,
    })
}

/// Evaluates the quasi-toric inclusion: steps through dimensions `0..n-1`,
/// returning the polar of the unique cone within its dimension's threshold,
/// and falls back to the containing maximal cone.
pub fn eval_qtdi(
    geo: &FanGeometry<'_>,
    d: &DeltaVec,
    x: &DVector<f64>,
    allow_unchecked: bool,
) -> Result<EvalOutcome, InclusionError> {
    let n = geo.fan().ambient_dim();
    if d.len() != n {
        return Err(InclusionError::WrongThresholdLength {
            expected: n,
            got: d.len(),
        });
    }
    geo.check_point(x)?;
    if !allow_unchecked {
        if !geo.fan().is_certified_complete() {
            return Err(InclusionError::IncompleteFan);
        }
        if !d.certificate().is_certified() {
            return Err(InclusionError::UncertifiedThresholds);
        }
    }

    for k in 0..n {
        let within: Vec<usize> = geo
            .fan()
            .dim_indices(k)
            .iter()
            .copied()
            .filter(|&i| geo.distance(i, x) <= d.threshold(k))
            .collect();
        match within.len() {
            0 => continue,
            1 => {
                let idx = within[0];
                return Ok(EvalOutcome {
                    rhs: cones::polar(geo.fan().cone(idx)),
                    source_index: idx,
                    step: k,
                    active: within,
                });
            }
            _ => {
                return Err(InclusionError::Ambiguous {
                    step: k,
                    candidates: within,
                });
            }
        }
    }

    // Step n: the maximal cone containing the point. Ties cannot occur for a
    // valid fan (a shared point lies in a shared face, caught earlier since
    // thresholds are positive); the lowest index is kept as a deterministic
    // safeguard against boundary roundoff.
    let containing: Vec<usize> = geo
        .fan()
        .maximal()
        .iter()
        .copied()
        .filter(|&i| geo.fan().cone(i).contains_point(x))
        .collect();
    match containing.first() {
        Some(&idx) => Ok(EvalOutcome {
            rhs: cones::polar(geo.fan().cone(idx)),
            source_index: idx,
            step: n,
            active: containing,
        }),
        None => Err(InclusionError::NoActiveCone),
    }
}

/// Certified bound on how far a tube intersection can stray from the
/// intersection cone: for the cones of `subset`,
///
/// ```text
/// dist(X, C_i) <= r for all i  implies  dist(X, intersection) <= alpha * r.
/// ```
#[derive(Debug, Clone)]
pub struct AlphaCertificate {
    /// Sorted fan indices of the participating cones.
    pub subset: Vec<usize>,
    /// Fan index of their intersection.
    pub intersection_index: usize,
    pub alpha: f64,
    pub method: CertMethod,
    /// Direction maximizing the distance ratio, when a scan ran.
    pub witness_direction: Option<DVector<f64>>,
}

/// Estimates the tube constant `alpha` for a subset of fan cones, with unit
/// radii. Deterministic scans are reported as found; sampled estimates are
/// inflated by a safety factor since they are lower bounds.
pub fn estimate_alpha(
    geo: &FanGeometry<'_>,
    subset: &[usize],
    cfg: &SupConfig,
) -> Result<AlphaCertificate, InclusionError> {
    if subset.is_empty() {
        return Err(InclusionError::EmptySubset);
    }
    let len = geo.fan().cones().len();
    for &i in subset {
        if i >= len {
            return Err(InclusionError::IndexOutOfBounds { index: i, len });
        }
    }
    let mut sorted: Vec<usize> = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let (intersection_index, _) = fans::intersect_in_fan(geo.fan(), &sorted)?;

    // Structural fast paths: a singleton tube is its own bound, and when the
    // intersection equals a member every tube point is within the same
    // radius of it.
    if sorted.len() == 1 || sorted.contains(&intersection_index) {
        return Ok(AlphaCertificate {
            subset: sorted,
            intersection_index,
            alpha: 1.0,
            method: CertMethod::Construction,
            witness_direction: None,
        });
    }

    let constraints: Vec<(&FaceDistTable, f64)> =
        sorted.iter().map(|&i| (geo.table(i), 1.0)).collect();
    let problem = RatioProblem::new(constraints, geo.table(intersection_index));
    let est = sup_tube_ratio(&problem, cfg);
    let method = CertMethod::from_sup(&est.method);
    let alpha = if est.method.deterministic() {
        est.value
    } else {
        est.value * SAMPLED_ALPHA_INFLATION
    };
    Ok(AlphaCertificate {
        subset: sorted,
        intersection_index,
        alpha,
        method,
        witness_direction: Some(est.witness_direction),
    })
}

/// Re-evaluates a pair supremum witness with the iterative projector, so a
/// refutation never rests on the scan's own distance tables.
fn confirmed_ratio(
    geo: &FanGeometry<'_>,
    pair: (usize, usize),
    radii: (f64, f64),
    target: usize,
    w: &DVector<f64>,
) -> f64 {
    let da = cones::project_point(geo.fan().cone(pair.0), w)
        .expect("projection onto fan cone succeeds")
        .distance;
    let db = cones::project_point(geo.fan().cone(pair.1), w)
        .expect("projection onto fan cone succeeds")
        .distance;
    let denom = (da / radii.0).max(db / radii.1);
    if denom < 1e-12 {
        return 0.0;
    }
    let num = cones::project_point(geo.fan().cone(target), w)
        .expect("projection onto fan cone succeeds")
        .distance;
    num / denom
}

/// Checks the threshold compatibility condition over every eligible pair of
/// fan cones (dimensions below ambient, neither containing the other).
///
/// Pairs are examined in sorted index order and the first confirmed
/// violation wins, so refutation witnesses are deterministic.
pub fn check_well_defined(
    geo: &FanGeometry<'_>,
    d: &[f64],
    cfg: &SupConfig,
) -> Result<Certificate, InclusionError> {
    let n = geo.fan().ambient_dim();
    if d.len() != n {
        return Err(InclusionError::WrongThresholdLength {
            expected: n,
            got: d.len(),
        });
    }
    for &v in d {
        if !(v > 0.0) {
            return Err(InclusionError::BadThreshold { value: v });
        }
    }

    let eligible: Vec<usize> = (0..geo.fan().cones().len())
        .filter(|&i| geo.fan().cone(i).dim() < n)
        .collect();

    let mut worst_alpha = 0.0f64;
    let mut method = CertMethod::Construction;
    for (a_pos, &i) in eligible.iter().enumerate() {
        for &j in &eligible[a_pos + 1..] {
            let ci = geo.fan().cone(i);
            let cj = geo.fan().cone(j);
            if cones::cone_contains_cone(ci, cj) || cones::cone_contains_cone(cj, ci) {
                continue;
            }
            let (target_idx, target) = fans::intersect_in_fan(geo.fan(), &[i, j])?;
            let ri = d[ci.dim()];
            let rj = d[cj.dim()];
            let bound = d[target.dim()];

            let problem = RatioProblem::new(
                vec![(geo.table(i), ri), (geo.table(j), rj)],
                geo.table(target_idx),
            );
            let est: SupEstimate = sup_tube_ratio(&problem, cfg);
            let limit = bound * (1.0 + CERT_REL_TOL) + CERT_ABS_TOL;
            if est.value > limit {
                let exact = confirmed_ratio(geo, (i, j), (ri, rj), target_idx, &est.witness_direction);
                if exact > limit {
                    return Ok(Certificate::Refuted {
                        witness: est.witness_point.clone(),
                        cone_pair: (i, j),
                    });
                }
            }
            worst_alpha = worst_alpha.max(est.value / bound);
            method = method.merge(CertMethod::from_sup(&est.method));
        }
    }
    Ok(Certificate::Certified {
        method,
        alpha: worst_alpha,
    })
}

/// Runs the well-definedness check and stamps the outcome on the thresholds.
pub fn certify_delta(
    geo: &FanGeometry<'_>,
    d: Vec<f64>,
    cfg: &SupConfig,
) -> Result<DeltaVec, InclusionError> {
    let certificate = check_well_defined(geo, &d, cfg)?;
    Ok(DeltaVec { d, certificate })
}
