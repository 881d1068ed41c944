//! The single geometric tolerance shared by every membership and equality
//! decision in the crate.
//!
//! Comparisons scale the tolerance by `max(1, |x|)` so that points far from
//! the origin are not held to an absolute 1e-9 band. The tolerance is a
//! process-wide setting: the CLI installs a user override once at startup,
//! library callers normally leave the default alone.

use std::sync::atomic::{AtomicU64, Ordering};

/// Default absolute tolerance at unit scale.
pub const DEFAULT_GEO_TOL: f64 = 1e-9;

static GEO_TOL_BITS: AtomicU64 = AtomicU64::new(f64::to_bits(DEFAULT_GEO_TOL));

/// Current geometric tolerance.
pub fn geo_tol() -> f64 {
    f64::from_bits(GEO_TOL_BITS.load(Ordering::Relaxed))
}

/// Installs a new geometric tolerance. Intended for process startup; must be
/// positive and finite.
pub fn set_geo_tol(tol: f64) {
    assert!(tol.is_finite() && tol > 0.0, "tolerance must be positive");
    GEO_TOL_BITS.store(tol.to_bits(), Ordering::Relaxed);
}

/// Tolerance scaled for comparisons involving a quantity of magnitude `scale`.
pub fn scaled_tol(scale: f64) -> f64 {
    geo_tol() * scale.abs().max(1.0)
}
