//! Embedding one differential inclusion into another over the same fan.
//!
//! The toric-to-quasi-toric direction rests on a tube constant for the fan:
//! `alpha` such that whenever a point is within `r` of every cone in a
//! subset, it is within `alpha * r` of their intersection. Thresholds built
//! by the geometric inflation `d_k = lambda * alpha * d_{k+1}` are then well
//! defined, and the toric right-hand side is contained in the quasi-toric
//! one at every point.
//!
//! Two families of subsets carry the whole argument: subsets of maximal
//! cones (the active set of a toric evaluation is always one of these) and
//! pairs of arbitrary cones (the containment proof reduces conflicts to a
//! pair intersection). Constants for larger mixed subsets are dominated by
//! these, so they are not enumerated.
//!
//! The quasi-toric-to-toric direction is elementary: the largest threshold
//! entry serves as the toric radius.

use crate::cones;
use crate::inclusions::{
    AlphaCertificate, DeltaVec, EvalOutcome, FanGeometry, InclusionError, InclusionSpec,
    certify_delta, estimate_alpha,
};
use crate::tubes::SupConfig;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Enumerating subsets of maximal cones is exponential; fans beyond this
/// many maximal cones need a different approach.
pub const MAX_MAXIMAL_CONES: usize = 16;

/// Inflation retries before giving up on certification.
const INFLATE_ATTEMPTS: usize = 3;

/// Violations stored verbatim in a verification report.
const MAX_REPORTED_VIOLATIONS: usize = 16;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Inclusion(#[from] InclusionError),
    #[error("fan has {count} maximal cones; subset enumeration supports at most {max}")]
    TooManyMaximalCones { count: usize, max: usize },
    #[error("thresholds failed certification after {attempts} inflation attempts")]
    CannotCertify { attempts: usize },
    #[error("threshold vector is empty")]
    EmptyThresholds,
}

/// Tube constant for the whole fan: the maximum alpha over subsets of
/// maximal cones and non-nested pairs of arbitrary cones, together with the
/// per-subset certificates.
pub fn fan_alpha(
    geo: &FanGeometry<'_>,
    cfg: &SupConfig,
) -> Result<(f64, Vec<AlphaCertificate>), EmbeddingError> {
    let fan = geo.fan();
    let maximal = fan.maximal();
    if maximal.len() > MAX_MAXIMAL_CONES {
        return Err(EmbeddingError::TooManyMaximalCones {
            count: maximal.len(),
            max: MAX_MAXIMAL_CONES,
        });
    }

    let mut certs: Vec<AlphaCertificate> = Vec::new();
    for mask in 1u64..(1u64 << maximal.len()) {
        if mask.count_ones() < 2 {
            continue;
        }
        let subset: Vec<usize> = maximal
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &idx)| idx)
            .collect();
        certs.push(estimate_alpha(geo, &subset, cfg)?);
    }

    let count = fan.cones().len();
    for i in 0..count {
        for j in (i + 1)..count {
            let ci = fan.cone(i);
            let cj = fan.cone(j);
            // Pairs of maximal cones were covered by the subset loop.
            let n = fan.ambient_dim();
            if ci.dim() == n && cj.dim() == n {
                continue;
            }
            if cones::cone_contains_cone(ci, cj) || cones::cone_contains_cone(cj, ci) {
                continue;
            }
            certs.push(estimate_alpha(geo, &[i, j], cfg)?);
        }
    }

    let alpha = certs.iter().map(|c| c.alpha).fold(1.0f64, f64::max);
    Ok((alpha, certs))
}

/// A certified threshold vector produced by geometric inflation.
#[derive(Debug, Clone)]
pub struct InflationOutcome {
    pub d: DeltaVec,
    /// Tube constant the inflation used (after any retry doubling).
    pub alpha: f64,
    pub lambda: f64,
    /// Per-subset constants backing `alpha`.
    pub certificates: Vec<AlphaCertificate>,
}

fn inflate_from_base(
    geo: &FanGeometry<'_>,
    base: f64,
    cfg: &SupConfig,
) -> Result<InflationOutcome, EmbeddingError> {
    if !(base > 0.0) {
        return Err(EmbeddingError::Inclusion(InclusionError::BadThreshold {
            value: base,
        }));
    }
    let n = geo.fan().ambient_dim();
    let (alpha0, certificates) = fan_alpha(geo, cfg)?;

    for attempt in 0..INFLATE_ATTEMPTS {
        let alpha = alpha0 * (1u32 << attempt) as f64;
        let lambda = if alpha >= 1.0 { 1.0 } else { 1.0 / alpha };
        let mut d = vec![0.0f64; n];
        d[n - 1] = base;
        for k in (0..n.saturating_sub(1)).rev() {
            d[k] = lambda * alpha * d[k + 1];
        }
        let delta_vec = certify_delta(geo, d, cfg)?;
        if delta_vec.certificate().is_certified() {
            return Ok(InflationOutcome {
                d: delta_vec,
                alpha,
                lambda,
                certificates,
            });
        }
    }
    Err(EmbeddingError::CannotCertify {
        attempts: INFLATE_ATTEMPTS,
    })
}

/// Inflates `d` to a componentwise-larger certified vector: the last entry
/// becomes the maximum of `d` and each earlier entry multiplies by
/// `lambda * alpha`.
pub fn inflate_d(
    geo: &FanGeometry<'_>,
    d: &[f64],
    cfg: &SupConfig,
) -> Result<InflationOutcome, EmbeddingError> {
    let n = geo.fan().ambient_dim();
    if d.is_empty() {
        return Err(EmbeddingError::EmptyThresholds);
    }
    if d.len() != n {
        return Err(EmbeddingError::Inclusion(
            InclusionError::WrongThresholdLength {
                expected: n,
                got: d.len(),
            },
        ));
    }
    for &v in d {
        if !(v > 0.0) {
            return Err(EmbeddingError::Inclusion(InclusionError::BadThreshold {
                value: v,
            }));
        }
    }
    let base = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let outcome = inflate_from_base(geo, base, cfg)?;
    debug_assert!(
        outcome
            .d
            .entries()
            .iter()
            .zip(d)
            .all(|(big, small)| big >= small),
        "inflated thresholds dominate the input"
    );
    Ok(outcome)
}

/// Thresholds embedding the toric inclusion with radius `delta` into a
/// quasi-toric inclusion: `d_{n-1} = delta`, earlier entries inflated.
pub fn embed_tdi_in_qtdi(
    geo: &FanGeometry<'_>,
    delta: f64,
    cfg: &SupConfig,
) -> Result<InflationOutcome, EmbeddingError> {
    inflate_from_base(geo, delta, cfg)
}

/// Toric radius embedding the quasi-toric inclusion: the largest threshold.
pub fn embed_qtdi_in_tdi(d: &DeltaVec) -> f64 {
    d.entries().iter().cloned().fold(0.0f64, f64::max)
}

/// One point where the embedding containment failed.
#[derive(Debug, Clone)]
pub enum EmbedViolation {
    /// The inner right-hand side is not contained in the outer one.
    NotContained {
        point: DVector<f64>,
        inner_step: usize,
        outer_step: usize,
    },
    /// An evaluation failed outright (for example, ambiguous thresholds).
    EvalFailed { point: DVector<f64>, message: String },
}

/// Outcome of a sampled embedding verification.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checked: usize,
    pub violation_count: usize,
    /// The first few violations, in deterministic point order.
    pub violations: Vec<EmbedViolation>,
}

impl VerifyReport {
    pub fn holds(&self) -> bool {
        self.violation_count == 0
    }
}

/// Settings for [`verify_embedding`].
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: usize,
    /// Sampling ball radius; defaults to ten times the largest threshold.
    pub radius: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            samples: 10_000,
            radius: None,
        }
    }
}

fn max_threshold(spec: &InclusionSpec) -> f64 {
    match spec {
        InclusionSpec::Tdi { delta } => *delta,
        InclusionSpec::Qtdi { d } => d.entries().iter().cloned().fold(0.0f64, f64::max),
    }
}

/// Samples points and checks that the inner right-hand side is contained in
/// the outer right-hand side at every one of them.
///
/// Points are drawn uniformly from a ball, plus structured points seeded
/// near every cone of the fan at a ladder of distances around the
/// thresholds, where step transitions happen. Evaluations run unchecked:
/// this function is itself the audit.
pub fn verify_embedding(
    geo: &FanGeometry<'_>,
    inner: &InclusionSpec,
    outer: &InclusionSpec,
    cfg: &VerifyConfig,
) -> Result<VerifyReport, InclusionError> {
    let n = geo.fan().ambient_dim();
    let scale = max_threshold(inner).max(max_threshold(outer));
    let radius = cfg.radius.unwrap_or(10.0 * scale);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut points: Vec<DVector<f64>> = Vec::new();
    for _ in 0..cfg.samples {
        // Uniform in the ball via normalized Gaussian and a radial law.
        let dir = random_unit(&mut rng, n);
        let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
        points.push(dir * r);
    }
    // Structured points: project a random point onto each cone, then step
    // away by fractions of the threshold scale.
    let ladder = [0.1, 0.5, 1.0, 2.0];
    let per_cone = (cfg.samples / (geo.fan().cones().len() * ladder.len())).clamp(1, 50);
    for idx in 0..geo.fan().cones().len() {
        for _ in 0..per_cone {
            let raw = random_unit(&mut rng, n) * (radius * rng.gen::<f64>());
            let (on_cone, _) = geo.table(idx).nearest(&raw);
            for f in ladder {
                let jitter = random_unit(&mut rng, n);
                points.push(&on_cone + jitter * (f * scale));
            }
        }
    }

    let results: Vec<Option<EmbedViolation>> = points
        .par_iter()
        .map(|x| check_point(geo, inner, outer, x))
        .collect();

    let mut violations = Vec::new();
    let mut violation_count = 0usize;
    for v in results.into_iter().flatten() {
        violation_count += 1;
        if violations.len() < MAX_REPORTED_VIOLATIONS {
            violations.push(v);
        }
    }
    Ok(VerifyReport {
        checked: points.len(),
        violation_count,
        violations,
    })
}

fn check_point(
    geo: &FanGeometry<'_>,
    inner: &InclusionSpec,
    outer: &InclusionSpec,
    x: &DVector<f64>,
) -> Option<EmbedViolation> {
    let inner_out: EvalOutcome = match inner.eval(geo, x, true) {
        Ok(o) => o,
        Err(e) => {
            return Some(EmbedViolation::EvalFailed {
                point: x.clone(),
                message: e.to_string(),
            });
        }
    };
    let outer_out: EvalOutcome = match outer.eval(geo, x, true) {
        Ok(o) => o,
        Err(e) => {
            return Some(EmbedViolation::EvalFailed {
                point: x.clone(),
                message: e.to_string(),
            });
        }
    };
    if cones::cone_contains_cone(&outer_out.rhs, &inner_out.rhs) {
        None
    } else {
        Some(EmbedViolation::NotContained {
            point: x.clone(),
            inner_step: inner_out.step,
            outer_step: outer_out.step,
        })
    }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use crate::fans::Fan;
    use approx::assert_relative_eq;

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    fn cone(n: usize, gens: &[&[f64]]) -> Cone {
        let gv: Vec<DVector<f64>> = gens.iter().map(|g| v(g)).collect();
        Cone::from_generators(n, &gv).unwrap()
    }

    fn coordinate_fan() -> Fan {
        Fan::from_maximal_cones(vec![
            cone(2, &[&[1.0, 0.0], &[0.0, 1.0]]),
            cone(2, &[&[-1.0, 0.0], &[0.0, 1.0]]),
            cone(2, &[&[-1.0, 0.0], &[0.0, -1.0]]),
            cone(2, &[&[1.0, 0.0], &[0.0, -1.0]]),
        ])
        .unwrap()
        .with_sampled_completeness(2_000, 0)
    }

    #[test]
    fn coordinate_fan_alpha_is_sqrt_two() {
        let fan = coordinate_fan();
        let geo = FanGeometry::new(&fan);
        let (alpha, certs) = fan_alpha(&geo, &SupConfig::default()).unwrap();
        assert_relative_eq!(alpha, 2.0f64.sqrt(), epsilon = 1e-8);
        assert!(!certs.is_empty());
        // Every subset constant is at least one.
        for c in &certs {
            assert!(c.alpha >= 1.0 - 1e-9, "alpha {} for {:?}", c.alpha, c.subset);
        }
    }

    #[test]
    fn embed_tdi_builds_certified_thresholds() {
        let fan = coordinate_fan();
        let geo = FanGeometry::new(&fan);
        let out = embed_tdi_in_qtdi(&geo, 1.0, &SupConfig::default()).unwrap();
        assert!(out.d.certificate().is_certified());
        assert_relative_eq!(out.d.entries()[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.d.entries()[0], 2.0f64.sqrt(), epsilon = 1e-8);
        assert_relative_eq!(out.lambda, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inflate_dominates_input() {
        let fan = coordinate_fan();
        let geo = FanGeometry::new(&fan);
        let out = inflate_d(&geo, &[5.0, 1.0], &SupConfig::default()).unwrap();
        assert!(out.d.certificate().is_certified());
        assert!(out.d.entries()[0] >= 5.0);
        assert!(out.d.entries()[1] >= 1.0);
        assert_relative_eq!(out.d.entries()[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn qtdi_to_tdi_radius_is_max_entry() {
        let d = DeltaVec::unchecked(vec![3.0, 0.5]).unwrap();
        assert_eq!(embed_qtdi_in_tdi(&d), 3.0);
    }

    #[test]
    fn verified_embedding_holds_both_ways() {
        let fan = coordinate_fan();
        let geo = FanGeometry::new(&fan);
        let out = embed_tdi_in_qtdi(&geo, 1.0, &SupConfig::default()).unwrap();
        let tdi = InclusionSpec::Tdi { delta: 1.0 };
        let qtdi = InclusionSpec::Qtdi { d: out.d.clone() };
        let cfg = VerifyConfig {
            samples: 2_000,
            ..VerifyConfig::default()
        };
        let report = verify_embedding(&geo, &tdi, &qtdi, &cfg).unwrap();
        assert!(report.holds(), "violations: {:?}", report.violations);

        let back = InclusionSpec::Tdi {
            delta: embed_qtdi_in_tdi(&out.d),
        };
        let report = verify_embedding(&geo, &qtdi, &back, &cfg).unwrap();
        assert!(report.holds(), "violations: {:?}", report.violations);
    }

    #[test]
    fn verification_catches_bad_thresholds() {
        let fan = coordinate_fan();
        let geo = FanGeometry::new(&fan);
        let tdi = InclusionSpec::Tdi { delta: 1.0 };
        // d_0 far too small: points near the origin become ambiguous at the
        // ray step, which the verifier reports.
        let bad = InclusionSpec::Qtdi {
            d: DeltaVec::unchecked(vec![0.05, 1.0]).unwrap(),
        };
        let cfg = VerifyConfig {
            samples: 2_000,
            ..VerifyConfig::default()
        };
        let report = verify_embedding(&geo, &tdi, &bad, &cfg).unwrap();
        assert!(!report.holds());
        assert!(report.violation_count > 0);
        assert!(!report.violations.is_empty());
    }
}
