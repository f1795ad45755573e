use std::collections::BTreeMap;

use super::{ceil_ratio, floor_ratio, Formula, PcInterval};
use crate::error::{Error, Result};
use crate::prob::{relative_risk, ConfoundedData, Prob, RiskRatio, TwoArmMargins, SUM_TOLERANCE};

/// Slack on RR >= 1 before monotonicity counts as falsified.
const MONOTONE_TOLERANCE: f64 = 1e-12;

fn margin_intermediates(m: &TwoArmMargins) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    out.insert("p_r1_given_e1".into(), m.treated.value());
    out.insert("p_r1_given_e0".into(), m.control.value());
    if let RiskRatio::Finite(rr) = relative_risk(m) {
        out.insert("rr".into(), rr);
    }
    out
}

/// Bounds from randomized-trial margins alone:
///
/// `max{0, 1 - 1/RR} <= PC <= min{1, Pr(R=0|E=0) / Pr(R=1|E=1)}`.
///
/// When Pr(R=1|E=1) = 0 the upper bound is 1 and `vacuous` is set to 1 in
/// the intermediates; an undefined or sub-unit RR gives a lower bound of 0.
pub fn bounds_basic(m: &TwoArmMargins) -> PcInterval {
    let (p1, p0) = (m.treated.value(), m.control.value());
    let mut intermediates = margin_intermediates(m);
    let (lower, upper) = if p1 > 0.0 {
        // 1 - 1/RR written as (p1 - p0)/p1 so that p0 = 0 needs no special case.
        (
            floor_ratio(p1 - p0, p1, Formula::RiskRatio),
            ceil_ratio(1.0 - p0, p1, Formula::ControlNonResponse),
        )
    } else {
        intermediates.insert("vacuous".into(), 1.0);
        ((0.0, Formula::Floor), (1.0, Formula::Vacuous))
    };
    PcInterval::from_endpoints(lower.0, upper.0, lower.1, upper.1, intermediates)
        .expect("basic bounds stay inside [0, 1] for valid margins")
}

/// Point value 1 - 1/RR under monotonicity (R_0 = 1 implies R_1 = 1).
pub fn bounds_monotone(m: &TwoArmMargins) -> Result<PcInterval> {
    let (p1, p0) = (m.treated.value(), m.control.value());
    if p1 <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    if p1 < p0 * (1.0 - MONOTONE_TOLERANCE) {
        return Err(Error::MonotonicityInfeasible {
            treated: p1,
            control: p0,
        });
    }
    let point = ((p1 - p0) / p1).max(0.0);
    Ok(PcInterval::point(
        Prob::snapped(point, 1e-12)?,
        Formula::Monotone,
        margin_intermediates(m),
    ))
}

/// Bounds when the individual's exposure choice may carry information about
/// their potential responses, using the experimental control rate Pr(R_0=1)
/// together with the observational (E, R) joint.
///
/// Inputs where Pr(R_0=1) falls outside `[Pr(E=0,R=1), 1 - Pr(E=0,R=0)]`
/// (beyond the sum tolerance) admit no joint distribution and are rejected.
pub fn bounds_confounded(data: &ConfoundedData) -> Result<PcInterval> {
    let obs = &data.observational;
    let r0 = data.control_rate.value();
    let case = obs.cell(1, 1);
    if case <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    let (min_r0, max_r0) = (obs.cell(0, 1), 1.0 - obs.cell(0, 0));
    if r0 < min_r0 - SUM_TOLERANCE || r0 > max_r0 + SUM_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "experimental Pr(R0=1) = {r0} must lie in [{min_r0}, {max_r0}] given the observational data"
        )));
    }
    let (mut lower, lower_src) = floor_ratio(obs.response_rate() - r0, case, Formula::ConfoundedLower);
    let (mut upper, upper_src) = ceil_ratio(1.0 - r0 - obs.cell(0, 0), case, Formula::ConfoundedUpper);
    // A tolerated inconsistency can push the raw ratios just past the unit interval.
    lower = lower.min(1.0);
    upper = upper.max(0.0);

    let mut intermediates = BTreeMap::new();
    intermediates.insert("control_rate".into(), r0);
    intermediates.insert("p_r1".into(), obs.response_rate());
    intermediates.insert("p_e1_r1".into(), case);
    intermediates.insert("p_e0_r0".into(), obs.cell(0, 0));
    PcInterval::from_endpoints(lower, upper, lower_src, upper_src, intermediates)
}
