use super::{bounds_basic, Formula, PcInterval};
use crate::error::{Error, Result};
use crate::prob::{CompleteMediatorTable, PartialMediatorTable};

/// Complete mediator: the lower bound is the basic one on the marginalized
/// margins; the upper bound is the smallest of four candidate products
/// divided by Pr(R=1|E=1).
///
/// With `a(e, m) = Pr(M=m|E=e)` and `b(m, r) = Pr(R=r|M=m)` the candidates are
///
/// ```text
/// a(0,0) b(0,0) + b(1,0) a(1,0)
/// a(1,1) b(0,0) + b(1,0) a(0,1)
/// a(0,0) b(1,1) + b(0,1) a(1,0)
/// a(1,1) b(1,1) + b(0,1) a(0,1)
/// ```
pub fn bounds_complete_mediator(t: &CompleteMediatorTable) -> Result<PcInterval> {
    let margins = t.margins();
    let treated_risk = margins.treated.value();
    if treated_risk <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let basic = bounds_basic(&margins);
    let a = |e, m| t.mediator(e, m);
    let b = |m, r| t.response(m, r);
    let candidates = [
        a(0, 0) * b(0, 0) + b(1, 0) * a(1, 0),
        a(1, 1) * b(0, 0) + b(1, 0) * a(0, 1),
        a(0, 0) * b(1, 1) + b(0, 1) * a(1, 0),
        a(1, 1) * b(1, 1) + b(0, 1) * a(0, 1),
    ];
    let best = candidates.iter().copied().fold(f64::INFINITY, f64::min);

    let mut intermediates = basic.intermediates.clone();
    for (i, c) in candidates.iter().enumerate() {
        intermediates.insert(format!("candidate_{}", i + 1), *c);
    }
    intermediates.insert("basic_upper".into(), basic.upper.value());

    let raw = best / treated_risk;
    let (upper, upper_src) = if raw < 1.0 {
        (raw, Formula::CompleteMediator)
    } else {
        (1.0, Formula::Ceiling)
    };
    PcInterval::from_endpoints(basic.lower.value(), upper, basic.lower_source, upper_src, intermediates)
}

/// Partial mediator: the lower bound is again the basic one. The mediator
/// upper bound `u` satisfies
///
/// ```text
/// Pr(R=1|E=1) u = sum over (m0, m1) of
///     min{Pr(R=0|E=0,M=m0), Pr(R=1|E=1,M=m1)} * min{Pr(M=m0|E=0), Pr(M=m1|E=1)}
/// ```
///
/// and can exceed the basic upper bound, so the reported upper bound is the
/// smaller of the two. Both raw values are kept in the intermediates.
pub fn bounds_partial_mediator(t: &PartialMediatorTable) -> Result<PcInterval> {
    let margins = t.margins();
    let treated_risk = margins.treated.value();
    if treated_risk <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let basic = bounds_basic(&margins);
    let mut intermediates = basic.intermediates.clone();
    let mut sum = 0.0;
    for m0 in 0..2 {
        for m1 in 0..2 {
            let term = t.response(0, m0, 0).min(t.response(1, m1, 1)) * t.mediator(0, m0).min(t.mediator(1, m1));
            intermediates.insert(format!("partub_term_{m0}{m1}"), term);
            sum += term;
        }
    }
    let mediator_upper = sum / treated_risk;
    let exceeds = mediator_upper > basic.upper.value();
    intermediates.insert("partub_upper".into(), mediator_upper);
    intermediates.insert("basic_upper".into(), basic.upper.value());
    intermediates.insert("partub_exceeds_basic".into(), if exceeds { 1.0 } else { 0.0 });

    let (upper, upper_src) = if exceeds {
        (basic.upper.value(), basic.upper_source)
    } else {
        (mediator_upper, Formula::PartialMediator)
    };
    PcInterval::from_endpoints(basic.lower.value(), upper, basic.lower_source, upper_src, intermediates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_mediator_example() {
        let t = CompleteMediatorTable::new([0.025, 0.25], [0.1, 0.9]).unwrap();
        let b = bounds_complete_mediator(&t).unwrap();
        assert!((b.lower.value() - 0.6).abs() < 1e-12);
        // min candidate 0.25*0.9 + 0.1*0.025 = 0.2275, over Pr(R=1|E=1) = 0.3
        assert!((b.upper.value() - 0.2275 / 0.3).abs() < 1e-12);
        assert_eq!(b.upper_source, Formula::CompleteMediator);
        assert!((b.intermediate("candidate_1").unwrap() - 0.9525).abs() < 1e-12);
        assert!((b.intermediate("candidate_2").unwrap() - 0.2275).abs() < 1e-12);
    }

    #[test]
    fn complete_mediator_inert_exposure() {
        let t = CompleteMediatorTable::new([0.4, 0.4], [0.2, 0.9]).unwrap();
        assert_eq!(bounds_complete_mediator(&t).unwrap().lower.value(), 0.0);
    }

    #[test]
    fn complete_mediator_deterministic_chain() {
        let t = CompleteMediatorTable::new([0.0, 1.0], [0.0, 1.0]).unwrap();
        let b = bounds_complete_mediator(&t).unwrap();
        assert_eq!((b.lower.value(), b.upper.value()), (1.0, 1.0));
    }

    #[test]
    fn complete_mediator_zero_treated_risk() {
        let t = CompleteMediatorTable::new([0.5, 0.0], [0.0, 1.0]).unwrap();
        assert_eq!(bounds_complete_mediator(&t), Err(Error::ZeroTreatedRisk));
    }

    #[test]
    fn partial_mediator_first_example() {
        let t = PartialMediatorTable::new([0.27, 0.019], [[0.02, 0.835], [0.685, 0.857]]).unwrap();
        let b = bounds_partial_mediator(&t).unwrap();
        let p1 = 0.981 * 0.685 + 0.019 * 0.857;
        let p0 = 0.73 * 0.02 + 0.27 * 0.835;
        assert!((b.lower.value() - (1.0 - p0 / p1)).abs() < 1e-12);
        let sum = 0.685 * 0.73 + 0.857 * 0.019 + 0.165 * 0.27 + 0.165 * 0.019;
        assert!((b.upper.value() - sum / p1).abs() < 1e-12);
        assert_eq!(b.upper_source, Formula::PartialMediator);
        assert_eq!(b.intermediate("partub_exceeds_basic"), Some(0.0));
    }

    #[test]
    fn partial_mediator_prefers_basic_upper() {
        let t = PartialMediatorTable::new([0.96, 0.74], [[0.02, 0.33], [0.91, 0.73]]).unwrap();
        let b = bounds_partial_mediator(&t).unwrap();
        assert!((b.lower.value() - (1.0 - 0.3176 / 0.7768)).abs() < 1e-12);
        assert!((b.upper.value() - 0.6824 / 0.7768).abs() < 1e-12);
        assert_eq!(b.upper_source, Formula::ControlNonResponse);
        let raw = b.intermediate("partub_upper").unwrap();
        assert!((raw - 0.7356 / 0.7768).abs() < 1e-12);
        assert_eq!(b.intermediate("partub_exceeds_basic"), Some(1.0));
    }

    #[test]
    fn partial_mediator_inert_mediator() {
        let t = PartialMediatorTable::new([0.3, 0.8], [[0.2, 0.2], [0.7, 0.7]]).unwrap();
        let b = bounds_partial_mediator(&t).unwrap();
        let basic = bounds_basic(&crate::prob::TwoArmMargins::new(0.7, 0.2).unwrap());
        assert!((b.lower.value() - basic.lower.value()).abs() < 1e-12);
        assert!((b.upper.value() - basic.upper.value()).abs() < 1e-12);
    }
}
