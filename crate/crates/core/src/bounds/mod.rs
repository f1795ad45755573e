//! Closed-form interval bounds on the probability of causation,
//! PC = Pr(R_0 = 0 | E = 1, R_1 = 1), for each evidence scenario.
//!
//! Every function returns a [`PcInterval`] whose endpoints come from the
//! formula's own `max{0, ..}` / `min{1, ..}` clamps, tagged with the term
//! that produced them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::Prob;

mod basic;
mod covariate;
mod mediator;

pub use basic::{bounds_basic, bounds_confounded, bounds_monotone};
pub use covariate::{
    backdoor_control_rate, bounds_covariate_conditional, bounds_covariate_marginal,
    bounds_suffcov_marginal, bounds_suffcov_tianpearl, bounds_with_covariate_composition,
    posterior_covariate_weights,
};
pub use mediator::{bounds_complete_mediator, bounds_partial_mediator};

/// Rounding slack allowed before an endpoint is considered out of range.
const ROUNDING: f64 = 1e-12;

/// Which term of a bound formula an endpoint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// The literal 0 of a `max{0, ..}`.
    Floor,
    /// The literal 1 of a `min{1, ..}`.
    Ceiling,
    /// 1 - 1/RR.
    RiskRatio,
    /// Pr(R=0|E=0) / Pr(R=1|E=1).
    ControlNonResponse,
    /// Pr(R=1|E=1) = 0 leaves the upper bound uninformative.
    Vacuous,
    /// Point value under monotonicity.
    Monotone,
    /// (Pr(R=1) - Pr(R_0=1)) / Pr(E=1,R=1).
    ConfoundedLower,
    /// (1 - Pr(R_0=1) - Pr(E=0,R=0)) / Pr(E=1,R=1).
    ConfoundedUpper,
    /// Delta / Pr(R=1|E=1) with Pr(X=x) weights.
    CovariateDelta,
    /// 1 - Gamma / Pr(R=1|E=1) with Pr(X=x) weights.
    CovariateGamma,
    /// As `CovariateDelta` with Pr(X=x|E=1) weights.
    SufficientCovariateDelta,
    SufficientCovariateGamma,
    /// Smallest of the four complete-mediator candidate terms.
    CompleteMediator,
    /// Sum of the four partial-mediator min-products.
    PartialMediator,
    /// Posterior-weighted average of per-stratum endpoints.
    Composition,
}

/// A closed interval `[lower, upper]` inside `[0, 1]` plus the quantities
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcInterval {
    pub lower: Prob,
    pub upper: Prob,
    pub lower_source: Formula,
    pub upper_source: Formula,
    /// Named intermediate quantities, sorted by name.
    pub intermediates: BTreeMap<String, f64>,
}

impl PcInterval {
    /// Assembles an interval from raw formula outputs. Only rounding-level
    /// excursions (below 1e-12) are snapped; anything larger is a bug in the
    /// caller's formula and reported as such.
    pub(crate) fn from_endpoints(
        lower: f64,
        upper: f64,
        lower_source: Formula,
        upper_source: Formula,
        intermediates: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let lo = Prob::snapped(lower, ROUNDING).map_err(|_| bad_endpoint("lower", lower))?;
        let mut hi = Prob::snapped(upper, ROUNDING).map_err(|_| bad_endpoint("upper", upper))?;
        if lo > hi {
            if lo.value() - hi.value() > ROUNDING {
                return Err(Error::Verification(format!(
                    "lower bound {lower} exceeds upper bound {upper}"
                )));
            }
            hi = lo;
        }
        Ok(PcInterval {
            lower: lo,
            upper: hi,
            lower_source,
            upper_source,
            intermediates,
        })
    }

    pub fn point(value: Prob, source: Formula, intermediates: BTreeMap<String, f64>) -> Self {
        PcInterval {
            lower: value,
            upper: value,
            lower_source: source,
            upper_source: source,
            intermediates,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper.value() - self.lower.value()
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lower.value() - tol && x <= self.upper.value() + tol
    }

    /// True when `[lower, upper]` lies inside `self`, up to `tol`.
    pub fn encloses(&self, lower: f64, upper: f64, tol: f64) -> bool {
        self.contains(lower, tol) && self.contains(upper, tol)
    }

    pub fn intermediate(&self, name: &str) -> Option<f64> {
        self.intermediates.get(name).copied()
    }
}

fn bad_endpoint(which: &str, value: f64) -> Error {
    Error::Verification(format!("{which} bound {value} outside [0, 1]"))
}

/// `max{0, num/den}` tagged with its source.
fn floor_ratio(num: f64, den: f64, source: Formula) -> (f64, Formula) {
    let v = num / den;
    if v > 0.0 {
        (v, source)
    } else {
        (0.0, Formula::Floor)
    }
}

/// `min{1, num/den}` tagged with its source.
fn ceil_ratio(num: f64, den: f64, source: Formula) -> (f64, Formula) {
    let v = num / den;
    if v < 1.0 {
        (v, source)
    } else {
        (1.0, Formula::Ceiling)
    }
}
