use std::collections::BTreeMap;

use super::{basic::bounds_confounded, bounds_basic, Formula, PcInterval};
use crate::error::{Error, Result};
use crate::prob::{ConfoundedData, CovariateTable, Prob, SUM_TOLERANCE};

/// Bounds for an individual whose covariate value is known: the basic
/// bounds applied to that stratum's conditional margins.
pub fn bounds_covariate_conditional(ct: &CovariateTable, label: &str) -> Result<PcInterval> {
    let mut b = bounds_basic(&ct.stratum(label)?.margins());
    b.intermediates.insert("p_x".into(), ct.stratum(label)?.p_x.value());
    Ok(b)
}

/// Shared Delta/Gamma computation. `weights[i]` is the weight of stratum
/// `i` in Pr(R=1|E=1); for randomized exposure that is Pr(X=x), otherwise
/// Pr(X=x|E=1).
fn delta_gamma_bounds(
    ct: &CovariateTable,
    weights: &[f64],
    lower_tag: Formula,
    upper_tag: Formula,
    mut intermediates: BTreeMap<String, f64>,
) -> Result<PcInterval> {
    let strata = ct.strata();
    let treated_risk: f64 = strata
        .iter()
        .zip(weights)
        .map(|(s, w)| w * s.p_r1_given_e1.value())
        .sum();
    if treated_risk <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let mut delta = 0.0;
    let mut gamma = 0.0;
    for (s, w) in strata.iter().zip(weights) {
        let (p1, p0) = (s.p_r1_given_e1.value(), s.p_r1_given_e0.value());
        delta += w * (p1 - p0).max(0.0);
        gamma += w * (p1 - (1.0 - p0)).max(0.0);
        if p1 > 0.0 {
            let b = bounds_basic(&s.margins());
            intermediates.insert(format!("lower[{}]", s.label), b.lower.value());
            intermediates.insert(format!("upper[{}]", s.label), b.upper.value());
        }
    }
    intermediates.insert("delta".into(), delta);
    intermediates.insert("gamma".into(), gamma);
    intermediates.insert("p_r1_given_e1".into(), treated_risk);

    let (lower, lower_src) = if delta > 0.0 {
        (delta / treated_risk, lower_tag)
    } else {
        (0.0, Formula::Floor)
    };
    let (upper, upper_src) = if gamma > 0.0 {
        (1.0 - gamma / treated_risk, upper_tag)
    } else {
        (1.0, Formula::Ceiling)
    };
    PcInterval::from_endpoints(lower, upper, lower_src, upper_src, intermediates)
}

/// Bounds when X is recorded in a randomized experiment but not for the
/// individual: `Delta / Pr(R=1|E=1) <= PC <= 1 - Gamma / Pr(R=1|E=1)`, with
/// Delta and Gamma weighting strata by Pr(X=x).
pub fn bounds_covariate_marginal(ct: &CovariateTable) -> Result<PcInterval> {
    if ct.has_exposure_model() {
        return Err(Error::UnexpectedExposureModel);
    }
    let weights: Vec<f64> = ct.strata().iter().map(|s| s.p_x.value()).collect();
    delta_gamma_bounds(ct, &weights, Formula::CovariateDelta, Formula::CovariateGamma, BTreeMap::new())
}

/// Same construction for a sufficient covariate, with strata weighted by
/// Pr(X=x|E=1) derived by Bayes from Pr(X=x) and Pr(E=1|X=x).
pub fn bounds_suffcov_marginal(ct: &CovariateTable) -> Result<PcInterval> {
    if !ct.has_exposure_model() {
        return Err(Error::MissingExposureModel);
    }
    let weights = ct.covariate_given_exposure(true)?;
    let mut intermediates = BTreeMap::new();
    intermediates.insert("p_e1".into(), ct.exposure_rate().unwrap_or_default());
    for (s, w) in ct.strata().iter().zip(&weights) {
        intermediates.insert(format!("weight[{}]", s.label), *w);
    }
    delta_gamma_bounds(
        ct,
        &weights,
        Formula::SufficientCovariateDelta,
        Formula::SufficientCovariateGamma,
        intermediates,
    )
}

/// Back-door adjustment: Pr(R_0=1) = sum_x Pr(R=1|E=0,X=x) Pr(X=x).
pub fn backdoor_control_rate(ct: &CovariateTable) -> Prob {
    let rate = ct
        .strata()
        .iter()
        .map(|s| s.p_r1_given_e0.value() * s.p_x.value())
        .sum();
    Prob::snapped(rate, SUM_TOLERANCE).expect("convex combination of probabilities")
}

/// Comparison baseline that discards X: rebuild the control rate with the
/// back-door formula and apply the confounded-scenario bounds to the (E, R)
/// joint implied by the table.
pub fn bounds_suffcov_tianpearl(ct: &CovariateTable) -> Result<PcInterval> {
    let observational = ct.implied_observational_joint()?;
    let control_rate = backdoor_control_rate(ct);
    bounds_confounded(&ConfoundedData {
        control_rate,
        observational,
    })
}

/// Pr(X=x | E=1, R=1), proportional to Pr(X=x) Pr(E=1|X=x) Pr(R=1|E=1,X=x).
/// Without an exposure model Pr(E=1|X=x) is taken as constant.
pub fn posterior_covariate_weights(ct: &CovariateTable) -> Result<Vec<(String, Prob)>> {
    let raw: Vec<f64> = ct
        .strata()
        .iter()
        .map(|s| {
            let e1 = s.p_e1_given_x.map_or(1.0, Prob::value);
            s.p_x.value() * e1 * s.p_r1_given_e1.value()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    ct.strata()
        .iter()
        .zip(raw)
        .map(|(s, w)| Ok((s.label.clone(), Prob::snapped(w / total, SUM_TOLERANCE)?)))
        .collect()
}

/// Averages per-stratum bounds l(x), u(x) under Pr(X=x | E=1, R=1), for an
/// individual whose covariate value is unobserved. Both lists must carry
/// the same labels in the same order.
pub fn bounds_with_covariate_composition(
    per_stratum: &[(String, PcInterval)],
    posterior_weights: &[(String, Prob)],
) -> Result<PcInterval> {
    if per_stratum.len() != posterior_weights.len() || per_stratum.is_empty() {
        return Err(Error::WeightMismatch(format!(
            "{} strata but {} weights",
            per_stratum.len(),
            posterior_weights.len()
        )));
    }
    let total: f64 = posterior_weights.iter().map(|(_, w)| w.value()).sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::WeightMismatch(format!("weights sum to {total}")));
    }
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut intermediates = BTreeMap::new();
    for ((label, interval), (wlabel, w)) in per_stratum.iter().zip(posterior_weights) {
        if label != wlabel {
            return Err(Error::WeightMismatch(format!(
                "stratum `{label}` paired with weight for `{wlabel}`"
            )));
        }
        lower += w.value() * interval.lower.value();
        upper += w.value() * interval.upper.value();
        intermediates.insert(format!("weight[{label}]"), w.value());
        intermediates.insert(format!("lower[{label}]"), interval.lower.value());
        intermediates.insert(format!("upper[{label}]"), interval.upper.value());
    }
    PcInterval::from_endpoints(lower, upper, Formula::Composition, Formula::Composition, intermediates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Stratum;

    fn stratum(label: &str, p_x: f64, e1: Option<f64>, r1: f64, r0: f64) -> Stratum {
        Stratum {
            label: label.into(),
            p_x: Prob::new(p_x).unwrap(),
            p_e1_given_x: e1.map(|v| Prob::new(v).unwrap()),
            p_r1_given_e1: Prob::new(r1).unwrap(),
            p_r1_given_e0: Prob::new(r0).unwrap(),
        }
    }

    /// Randomized exposure, X equiprobable.
    fn randomized_example() -> CovariateTable {
        CovariateTable::new(vec![
            stratum("0", 0.5, None, 0.12, 0.24),
            stratum("1", 0.5, None, 0.60, 0.12),
        ])
        .unwrap()
    }

    /// X drives both exposure and response.
    fn sufficient_example() -> CovariateTable {
        CovariateTable::new(vec![
            stratum("0", 0.5, Some(0.8), 0.8, 0.2),
            stratum("1", 0.5, Some(0.2), 0.2, 0.8),
        ])
        .unwrap()
    }

    #[test]
    fn conditional_on_each_stratum() {
        let t = randomized_example();
        let b1 = bounds_covariate_conditional(&t, "1").unwrap();
        assert!((b1.lower.value() - 0.8).abs() < 1e-12);
        assert_eq!(b1.upper.value(), 1.0);
        let b0 = bounds_covariate_conditional(&t, "0").unwrap();
        assert_eq!((b0.lower.value(), b0.upper.value()), (0.0, 1.0));
        assert_eq!(bounds_covariate_conditional(&t, "2"), Err(Error::UnknownStratum("2".into())));
    }

    #[test]
    fn marginal_over_randomized_covariate() {
        let b = bounds_covariate_marginal(&randomized_example()).unwrap();
        assert!((b.lower.value() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.upper.value(), 1.0);
        assert!((b.intermediate("delta").unwrap() - 0.24).abs() < 1e-12);
        assert_eq!(b.intermediate("gamma"), Some(0.0));
        assert_eq!(b.lower_source, Formula::CovariateDelta);
        assert_eq!(
            bounds_covariate_marginal(&sufficient_example()),
            Err(Error::UnexpectedExposureModel)
        );
    }

    #[test]
    fn single_and_identical_strata_reduce_to_basic() {
        let single = CovariateTable::new(vec![stratum("only", 1.0, None, 0.7, 0.2)]).unwrap();
        let twin = CovariateTable::new(vec![
            stratum("a", 0.3, None, 0.7, 0.2),
            stratum("b", 0.7, None, 0.7, 0.2),
        ])
        .unwrap();
        let basic = bounds_basic(&single.strata()[0].margins());
        for t in [single, twin] {
            let b = bounds_covariate_marginal(&t).unwrap();
            assert!((b.lower.value() - basic.lower.value()).abs() < 1e-12);
            assert!((b.upper.value() - basic.upper.value()).abs() < 1e-12);
        }
    }

    #[test]
    fn sufficient_covariate_example() {
        let t = sufficient_example();
        let b = bounds_suffcov_marginal(&t).unwrap();
        assert!((b.lower.value() - 0.48 / 0.68).abs() < 1e-12);
        assert_eq!(b.upper.value(), 1.0);
        let x0 = bounds_covariate_conditional(&t, "0").unwrap();
        assert!((x0.lower.value() - 0.75).abs() < 1e-12);
        let x1 = bounds_covariate_conditional(&t, "1").unwrap();
        assert_eq!(x1.lower.value(), 0.0);
    }

    #[test]
    fn constant_exposure_matches_randomized() {
        let strata = |e1: Option<f64>| {
            vec![
                stratum("0", 0.4, e1, 0.12, 0.24),
                stratum("1", 0.6, e1, 0.60, 0.12),
            ]
        };
        let suff = bounds_suffcov_marginal(&CovariateTable::new(strata(Some(0.37))).unwrap()).unwrap();
        let rand = bounds_covariate_marginal(&CovariateTable::new(strata(None)).unwrap()).unwrap();
        assert!((suff.lower.value() - rand.lower.value()).abs() < 1e-12);
        assert!((suff.upper.value() - rand.upper.value()).abs() < 1e-12);
    }

    #[test]
    fn backdoor_rate() {
        assert!((backdoor_control_rate(&sufficient_example()).value() - 0.5).abs() < 1e-12);
        let single = CovariateTable::new(vec![stratum("a", 1.0, Some(0.3), 0.4, 0.35)]).unwrap();
        assert_eq!(backdoor_control_rate(&single).value(), 0.35);
        let zero = CovariateTable::new(vec![
            stratum("a", 0.5, Some(0.3), 0.4, 0.0),
            stratum("b", 0.5, Some(0.6), 0.4, 0.0),
        ])
        .unwrap();
        assert_eq!(backdoor_control_rate(&zero).value(), 0.0);
    }

    #[test]
    fn tian_pearl_baseline() {
        let t = sufficient_example();
        let tp = bounds_suffcov_tianpearl(&t).unwrap();
        // (0.68 - 0.5) / 0.34
        assert!((tp.lower.value() - 0.18 / 0.34).abs() < 1e-12);
        let suff = bounds_suffcov_marginal(&t).unwrap();
        assert!(suff.lower > tp.lower);
    }

    #[test]
    fn tian_pearl_single_stratum_is_confounded_bounds() {
        let t = CovariateTable::new(vec![stratum("a", 1.0, Some(0.3), 0.6, 0.2)]).unwrap();
        let joint = crate::prob::ObservationalJoint::new([[0.7 * 0.8, 0.7 * 0.2], [0.3 * 0.4, 0.3 * 0.6]]).unwrap();
        let direct = bounds_confounded(&ConfoundedData {
            control_rate: Prob::new(0.2).unwrap(),
            observational: joint,
        })
        .unwrap();
        let tp = bounds_suffcov_tianpearl(&t).unwrap();
        assert!((tp.lower.value() - direct.lower.value()).abs() < 1e-12);
        assert!((tp.upper.value() - direct.upper.value()).abs() < 1e-12);
    }

    #[test]
    fn posterior_weights() {
        let w = posterior_covariate_weights(&sufficient_example()).unwrap();
        // 0.5*0.8*0.8 = 0.32 and 0.5*0.2*0.2 = 0.02
        assert!((w[0].1.value() - 0.32 / 0.34).abs() < 1e-12);
        assert!((w[1].1.value() - 0.02 / 0.34).abs() < 1e-12);

        let uniform = CovariateTable::new(vec![
            stratum("a", 0.5, None, 0.4, 0.1),
            stratum("b", 0.5, None, 0.4, 0.3),
        ])
        .unwrap();
        let w = posterior_covariate_weights(&uniform).unwrap();
        assert_eq!(w[0].1, w[1].1);

        let dead = CovariateTable::new(vec![
            stratum("a", 0.5, None, 0.0, 0.1),
            stratum("b", 0.5, None, 0.4, 0.3),
        ])
        .unwrap();
        assert_eq!(posterior_covariate_weights(&dead).unwrap()[0].1, Prob::ZERO);

        let none = CovariateTable::new(vec![stratum("a", 1.0, None, 0.0, 0.1)]).unwrap();
        assert_eq!(posterior_covariate_weights(&none), Err(Error::ZeroCaseProbability));
    }

    fn interval(lo: f64, hi: f64) -> PcInterval {
        PcInterval::from_endpoints(lo, hi, Formula::Floor, Formula::Ceiling, BTreeMap::new()).unwrap()
    }

    #[test]
    fn composition_examples() {
        let one = bounds_with_covariate_composition(
            &[("a".into(), interval(0.2, 0.7))],
            &[("a".into(), Prob::ONE)],
        )
        .unwrap();
        assert_eq!((one.lower.value(), one.upper.value()), (0.2, 0.7));

        let half = Prob::new(0.5).unwrap();
        let two = bounds_with_covariate_composition(
            &[("a".into(), interval(0.0, 1.0)), ("b".into(), interval(1.0, 1.0))],
            &[("a".into(), half), ("b".into(), half)],
        )
        .unwrap();
        assert_eq!((two.lower.value(), two.upper.value()), (0.5, 1.0));
    }

    #[test]
    fn composition_reproduces_sufficient_covariate_bound() {
        let t = sufficient_example();
        let per_stratum: Vec<_> = t
            .strata()
            .iter()
            .map(|s| (s.label.clone(), bounds_covariate_conditional(&t, &s.label).unwrap()))
            .collect();
        let weights = posterior_covariate_weights(&t).unwrap();
        let c = bounds_with_covariate_composition(&per_stratum, &weights).unwrap();
        let direct = bounds_suffcov_marginal(&t).unwrap();
        assert!((c.lower.value() - direct.lower.value()).abs() < 1e-12);
        assert!((c.upper.value() - direct.upper.value()).abs() < 1e-12);
    }

    #[test]
    fn composition_rejects_misaligned_weights() {
        let half = Prob::new(0.5).unwrap();
        let strata = [("a".to_string(), interval(0.0, 1.0)), ("b".to_string(), interval(0.0, 1.0))];
        assert!(matches!(
            bounds_with_covariate_composition(&strata, &[("a".into(), half)]),
            Err(Error::WeightMismatch(_))
        ));
        assert!(matches!(
            bounds_with_covariate_composition(&strata, &[("a".into(), half), ("c".into(), half)]),
            Err(Error::WeightMismatch(_))
        ));
        assert!(matches!(
            bounds_with_covariate_composition(&strata, &[("a".into(), half), ("b".into(), Prob::ONE)]),
            Err(Error::WeightMismatch(_))
        ));
    }
}
