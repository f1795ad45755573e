//! Validated probabilities and the observable tables each scenario consumes.
//!
//! Every table is immutable once constructed; constructors reject cells
//! outside `[0, 1]` and marginal sums that miss 1 by more than
//! [`SUM_TOLERANCE`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every "sums to one" check.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability in `[0, 1]`. NaN and infinities are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prob(f64);

impl Prob {
    pub const ZERO: Prob = Prob(0.0);
    pub const ONE: Prob = Prob(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Prob(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    /// Snaps values within `tol` of `[0, 1]` onto the boundary. Used where a
    /// quantity is a probability mathematically but accumulates rounding.
    pub(crate) fn snapped(value: f64, tol: f64) -> Result<Self> {
        if value < 0.0 && value >= -tol {
            Ok(Prob::ZERO)
        } else if value > 1.0 && value <= 1.0 + tol {
            Ok(Prob::ONE)
        } else {
            Prob::new(value)
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Prob {
        Prob(1.0 - self.0)
    }
}

impl TryFrom<f64> for Prob {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Prob::new(value)
    }
}

impl From<Prob> for f64 {
    fn from(p: Prob) -> f64 {
        p.0
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_sum(what: &str, sum: f64) -> Result<()> {
    if (sum - 1.0).abs() <= SUM_TOLERANCE {
        Ok(())
    } else {
        Err(Error::SumMismatch {
            what: what.to_string(),
            sum,
        })
    }
}

/// Response rates in the two arms of a randomized comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoArmMargins {
    /// Pr(R=1 | E=1)
    #[serde(rename = "p_r1_given_e1")]
    pub treated: Prob,
    /// Pr(R=1 | E=0)
    #[serde(rename = "p_r1_given_e0")]
    pub control: Prob,
}

impl TwoArmMargins {
    pub fn new(treated: f64, control: f64) -> Result<Self> {
        Ok(TwoArmMargins {
            treated: Prob::new(treated)?,
            control: Prob::new(control)?,
        })
    }

    /// Pr(R=1 | E=e).
    pub fn response(&self, exposed: bool) -> Prob {
        if exposed {
            self.treated
        } else {
            self.control
        }
    }
}

/// Causal risk ratio Pr(R=1|E=1) / Pr(R=1|E=0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskRatio {
    Finite(f64),
    /// Zero baseline risk with a positive treated risk.
    Infinite,
    /// Both arms have zero risk.
    Undefined,
}

impl RiskRatio {
    pub fn finite(self) -> Option<f64> {
        match self {
            RiskRatio::Finite(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for RiskRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskRatio::Finite(r) => r.fmt(f),
            RiskRatio::Infinite => f.write_str("inf"),
            RiskRatio::Undefined => f.write_str("undefined"),
        }
    }
}

pub fn relative_risk(m: &TwoArmMargins) -> RiskRatio {
    let (num, den) = (m.treated.value(), m.control.value());
    if den > 0.0 {
        RiskRatio::Finite(num / den)
    } else if num > 0.0 {
        RiskRatio::Infinite
    } else {
        RiskRatio::Undefined
    }
}

/// Observational joint distribution of exposure and response, indexed `[e][r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct ObservationalJoint {
    cells: [[Prob; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct RawJoint {
    p_e0_r0: f64,
    p_e0_r1: f64,
    p_e1_r0: f64,
    p_e1_r1: f64,
}

impl TryFrom<RawJoint> for ObservationalJoint {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        ObservationalJoint::new([[raw.p_e0_r0, raw.p_e0_r1], [raw.p_e1_r0, raw.p_e1_r1]])
    }
}

impl From<ObservationalJoint> for RawJoint {
    fn from(j: ObservationalJoint) -> Self {
        RawJoint {
            p_e0_r0: j.cell(0, 0),
            p_e0_r1: j.cell(0, 1),
            p_e1_r0: j.cell(1, 0),
            p_e1_r1: j.cell(1, 1),
        }
    }
}

impl ObservationalJoint {
    /// `cells[e][r]` = Pr(E=e, R=r).
    pub fn new(cells: [[f64; 2]; 2]) -> Result<Self> {
        let mut out = [[Prob::ZERO; 2]; 2];
        for e in 0..2 {
            for r in 0..2 {
                out[e][r] = Prob::new(cells[e][r])?;
            }
        }
        check_sum("observational joint", cells.iter().flatten().sum())?;
        Ok(ObservationalJoint { cells: out })
    }

    pub fn cell(&self, e: usize, r: usize) -> f64 {
        self.cells[e][r].value()
    }

    /// Pr(R=1).
    pub fn response_rate(&self) -> f64 {
        self.cell(0, 1) + self.cell(1, 1)
    }

    /// Pr(E=1).
    pub fn exposure_rate(&self) -> f64 {
        self.cell(1, 0) + self.cell(1, 1)
    }
}

/// Experimental control response rate plus observational data on people
/// who chose their own exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedData {
    /// Pr(R_0 = 1) from the externally assigned control arm.
    pub control_rate: Prob,
    pub observational: ObservationalJoint,
}

/// One covariate level and its conditional response rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: String,
    /// Pr(X=x)
    pub p_x: Prob,
    /// Pr(E=1 | X=x); present only when exposure depends on X.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e1_given_x: Option<Prob>,
    /// Pr(R=1 | E=1, X=x)
    pub p_r1_given_e1: Prob,
    /// Pr(R=1 | E=0, X=x)
    pub p_r1_given_e0: Prob,
}

impl Stratum {
    pub fn margins(&self) -> TwoArmMargins {
        TwoArmMargins {
            treated: self.p_r1_given_e1,
            control: self.p_r1_given_e0,
        }
    }
}

/// Covariate-stratified response rates. Strata keep their input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCovariateTable", into = "RawCovariateTable")]
pub struct CovariateTable {
    strata: Vec<Stratum>,
}

#[derive(Serialize, Deserialize)]
struct RawCovariateTable {
    strata: Vec<Stratum>,
}

impl TryFrom<RawCovariateTable> for CovariateTable {
    type Error = Error;

    fn try_from(raw: RawCovariateTable) -> Result<Self> {
        CovariateTable::new(raw.strata)
    }
}

impl From<CovariateTable> for RawCovariateTable {
    fn from(t: CovariateTable) -> Self {
        RawCovariateTable { strata: t.strata }
    }
}

impl CovariateTable {
    pub fn new(strata: Vec<Stratum>) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::new();
        for s in &strata {
            if !seen.insert(s.label.as_str()) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        let with_model = strata.iter().filter(|s| s.p_e1_given_x.is_some()).count();
        if with_model != 0 && with_model != strata.len() {
            return Err(Error::PartialExposureModel);
        }
        check_sum("Pr(X=x)", strata.iter().map(|s| s.p_x.value()).sum())?;
        Ok(CovariateTable { strata })
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn stratum(&self, label: &str) -> Result<&Stratum> {
        self.strata
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::UnknownStratum(label.to_string()))
    }

    pub fn has_exposure_model(&self) -> bool {
        self.strata[0].p_e1_given_x.is_some()
    }

    /// Pr(E=1). Without an exposure model exposure is independent of X and
    /// this returns `None`.
    pub fn exposure_rate(&self) -> Option<f64> {
        if !self.has_exposure_model() {
            return None;
        }
        Some(
            self.strata
                .iter()
                .map(|s| s.p_x.value() * s.p_e1_given_x.map_or(0.0, Prob::value))
                .sum(),
        )
    }

    /// Pr(X=x | E=e) per stratum. Falls back to Pr(X=x) when there is no
    /// exposure model.
    pub fn covariate_given_exposure(&self, exposed: bool) -> Result<Vec<f64>> {
        if !self.has_exposure_model() {
            return Ok(self.strata.iter().map(|s| s.p_x.value()).collect());
        }
        let arm = |s: &Stratum| {
            let e1 = s.p_e1_given_x.map_or(0.0, Prob::value);
            s.p_x.value() * if exposed { e1 } else { 1.0 - e1 }
        };
        let total: f64 = self.strata.iter().map(arm).sum();
        if total <= 0.0 {
            return Err(if exposed {
                Error::ZeroExposureProbability
            } else {
                Error::ZeroDenominator("Pr(E=0)".into())
            });
        }
        Ok(self.strata.iter().map(|s| arm(s) / total).collect())
    }

    /// Pr(R=1 | E=e) with X summed out.
    pub fn marginal_response(&self, exposed: bool) -> Result<f64> {
        let weights = self.covariate_given_exposure(exposed)?;
        Ok(self
            .strata
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * s.margins().response(exposed).value())
            .sum())
    }

    /// Marginal two-arm rates obtained by ignoring X.
    pub fn marginal_margins(&self) -> Result<TwoArmMargins> {
        Ok(TwoArmMargins {
            treated: Prob::snapped(self.marginal_response(true)?, SUM_TOLERANCE)?,
            control: Prob::snapped(self.marginal_response(false)?, SUM_TOLERANCE)?,
        })
    }

    /// Joint of (E, R) the table implies once X is summed out.
    pub fn implied_observational_joint(&self) -> Result<ObservationalJoint> {
        if !self.has_exposure_model() {
            return Err(Error::MissingExposureModel);
        }
        let mut cells = [[0.0; 2]; 2];
        for s in &self.strata {
            let e1 = s.p_e1_given_x.map_or(0.0, Prob::value);
            for (e, pe) in [(0, 1.0 - e1), (1, e1)] {
                let r1 = s.margins().response(e == 1).value();
                cells[e][1] += s.p_x.value() * pe * r1;
                cells[e][0] += s.p_x.value() * pe * (1.0 - r1);
            }
        }
        ObservationalJoint::new(cells)
    }
}

/// Complete mediator: E affects R only through M. Arrays are indexed by the
/// conditioning value (`[e=0, e=1]` and `[m=0, m=1]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompleteMediatorTable {
    /// Pr(M=1 | E=e)
    pub p_m1_given_e: [Prob; 2],
    /// Pr(R=1 | M=m)
    pub p_r1_given_m: [Prob; 2],
}

impl CompleteMediatorTable {
    pub fn new(p_m1_given_e: [f64; 2], p_r1_given_m: [f64; 2]) -> Result<Self> {
        Ok(CompleteMediatorTable {
            p_m1_given_e: [Prob::new(p_m1_given_e[0])?, Prob::new(p_m1_given_e[1])?],
            p_r1_given_m: [Prob::new(p_r1_given_m[0])?, Prob::new(p_r1_given_m[1])?],
        })
    }

    /// Pr(M=m | E=e).
    pub fn mediator(&self, e: usize, m: usize) -> f64 {
        let p = self.p_m1_given_e[e].value();
        if m == 1 {
            p
        } else {
            1.0 - p
        }
    }

    /// Pr(R=r | M=m).
    pub fn response(&self, m: usize, r: usize) -> f64 {
        let p = self.p_r1_given_m[m].value();
        if r == 1 {
            p
        } else {
            1.0 - p
        }
    }

    /// Pr(R=1 | E=e) = sum over m of Pr(R=1|M=m) Pr(M=m|E=e).
    pub fn margins(&self) -> TwoArmMargins {
        let arm = |e| (0..2).map(|m| self.response(m, 1) * self.mediator(e, m)).sum::<f64>();
        TwoArmMargins {
            treated: Prob::snapped(arm(1), SUM_TOLERANCE).expect("convex combination of probabilities"),
            control: Prob::snapped(arm(0), SUM_TOLERANCE).expect("convex combination of probabilities"),
        }
    }
}

/// Partial mediator: E acts on R both directly and through M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialMediatorTable {
    /// Pr(M=1 | E=e)
    pub p_m1_given_e: [Prob; 2],
    /// Pr(R=1 | E=e, M=m), indexed `[e][m]`.
    pub p_r1_given_e_m: [[Prob; 2]; 2],
}

impl PartialMediatorTable {
    pub fn new(p_m1_given_e: [f64; 2], p_r1_given_e_m: [[f64; 2]; 2]) -> Result<Self> {
        let mut r = [[Prob::ZERO; 2]; 2];
        for e in 0..2 {
            for m in 0..2 {
                r[e][m] = Prob::new(p_r1_given_e_m[e][m])?;
            }
        }
        Ok(PartialMediatorTable {
            p_m1_given_e: [Prob::new(p_m1_given_e[0])?, Prob::new(p_m1_given_e[1])?],
            p_r1_given_e_m: r,
        })
    }

    /// Pr(M=m | E=e).
    pub fn mediator(&self, e: usize, m: usize) -> f64 {
        let p = self.p_m1_given_e[e].value();
        if m == 1 {
            p
        } else {
            1.0 - p
        }
    }

    /// Pr(R=r | E=e, M=m).
    pub fn response(&self, e: usize, m: usize, r: usize) -> f64 {
        let p = self.p_r1_given_e_m[e][m].value();
        if r == 1 {
            p
        } else {
            1.0 - p
        }
    }

    /// Pr(R=1 | E=e) = sum over m of Pr(R=1|E=e,M=m) Pr(M=m|E=e).
    pub fn margins(&self) -> TwoArmMargins {
        let arm = |e| (0..2).map(|m| self.response(e, m, 1) * self.mediator(e, m)).sum::<f64>();
        TwoArmMargins {
            treated: Prob::snapped(arm(1), SUM_TOLERANCE).expect("convex combination of probabilities"),
            control: Prob::snapped(arm(0), SUM_TOLERANCE).expect("convex combination of probabilities"),
        }
    }
}

/// A mismatch between a supplied margin and the one implied by a mediator table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Exposure arm `e`.
    pub exposure: u8,
    /// Pr(R=1|E=e) implied by marginalizing over the mediator.
    pub implied: f64,
    /// Pr(R=1|E=e) as supplied.
    pub supplied: f64,
    /// `|implied - supplied|`.
    pub difference: f64,
}

/// Compares implied and supplied margins arm by arm. The R=0 comparison is
/// redundant (same magnitude), so one entry is reported per arm at most.
pub fn check_margin_consistency(
    implied: &TwoArmMargins,
    supplied: &TwoArmMargins,
    tol: f64,
) -> Vec<Discrepancy> {
    debug_assert!(tol > 0.0, "tolerance must be positive");
    [0u8, 1]
        .into_iter()
        .filter_map(|e| {
            let implied = implied.response(e == 1).value();
            let supplied = supplied.response(e == 1).value();
            let difference = (implied - supplied).abs();
            (difference > tol).then_some(Discrepancy {
                exposure: e,
                implied,
                supplied,
                difference,
            })
        })
        .collect()
}

/// Checks that Pr(R|E) = sum_m Pr(R|M=m) Pr(M=m|E) holds for the supplied margins.
pub fn check_mediator_consistency(
    table: &CompleteMediatorTable,
    margins: &TwoArmMargins,
    tol: f64,
) -> Vec<Discrepancy> {
    check_margin_consistency(&table.margins(), margins, tol)
}

pub fn check_partial_mediator_consistency(
    table: &PartialMediatorTable,
    margins: &TwoArmMargins,
    tol: f64,
) -> Vec<Discrepancy> {
    check_margin_consistency(&table.margins(), margins, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stratum(label: &str, p_x: f64, e1: Option<f64>, r1: f64, r0: f64) -> Stratum {
        Stratum {
            label: label.into(),
            p_x: Prob::new(p_x).unwrap(),
            p_e1_given_x: e1.map(|v| Prob::new(v).unwrap()),
            p_r1_given_e1: Prob::new(r1).unwrap(),
            p_r1_given_e0: Prob::new(r0).unwrap(),
        }
    }

    #[test]
    fn prob_rejects_out_of_range() {
        assert!(Prob::new(0.0).is_ok());
        assert!(Prob::new(1.0).is_ok());
        for bad in [-1e-12, 1.0 + 1e-12, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(Prob::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn prob_deserialization_validates() {
        assert!(serde_json::from_str::<Prob>("0.25").is_ok());
        assert!(serde_json::from_str::<Prob>("1.5").is_err());
    }

    #[test]
    fn relative_risk_examples() {
        let rr = relative_risk(&TwoArmMargins::new(0.30, 0.12).unwrap());
        assert!((rr.finite().unwrap() - 2.5).abs() < 1e-12);
        let rr = relative_risk(&TwoArmMargins::new(0.36, 0.18).unwrap());
        assert!((rr.finite().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(relative_risk(&TwoArmMargins::new(0.5, 0.0).unwrap()), RiskRatio::Infinite);
        assert_eq!(relative_risk(&TwoArmMargins::new(0.0, 0.0).unwrap()), RiskRatio::Undefined);
    }

    #[test]
    fn observational_joint_must_sum_to_one() {
        assert!(ObservationalJoint::new([[0.25; 2]; 2]).is_ok());
        assert!(matches!(
            ObservationalJoint::new([[0.25, 0.25], [0.25, 0.3]]),
            Err(Error::SumMismatch { .. })
        ));
        // Within tolerance.
        assert!(ObservationalJoint::new([[0.25, 0.25], [0.25, 0.25 + 5e-10]]).is_ok());
    }

    #[test]
    fn covariate_table_validation() {
        assert_eq!(CovariateTable::new(vec![]), Err(Error::EmptyTable));
        assert_eq!(
            CovariateTable::new(vec![
                stratum("a", 0.5, None, 0.1, 0.1),
                stratum("a", 0.5, None, 0.1, 0.1)
            ]),
            Err(Error::DuplicateLabel("a".into()))
        );
        assert_eq!(
            CovariateTable::new(vec![
                stratum("a", 0.5, Some(0.3), 0.1, 0.1),
                stratum("b", 0.5, None, 0.1, 0.1)
            ]),
            Err(Error::PartialExposureModel)
        );
        assert!(matches!(
            CovariateTable::new(vec![stratum("a", 0.6, None, 0.1, 0.1), stratum("b", 0.5, None, 0.1, 0.1)]),
            Err(Error::SumMismatch { .. })
        ));
    }

    #[test]
    fn covariate_marginals() {
        let t = CovariateTable::new(vec![
            stratum("0", 0.5, None, 0.12, 0.24),
            stratum("1", 0.5, None, 0.60, 0.12),
        ])
        .unwrap();
        let m = t.marginal_margins().unwrap();
        assert!((m.treated.value() - 0.36).abs() < 1e-12);
        assert!((m.control.value() - 0.18).abs() < 1e-12);
        assert_eq!(t.implied_observational_joint(), Err(Error::MissingExposureModel));
    }

    #[test]
    fn sufficient_covariate_joint() {
        let t = CovariateTable::new(vec![
            stratum("0", 0.5, Some(0.8), 0.8, 0.2),
            stratum("1", 0.5, Some(0.2), 0.2, 0.8),
        ])
        .unwrap();
        let j = t.implied_observational_joint().unwrap();
        assert!((j.cell(1, 1) - 0.34).abs() < 1e-12);
        assert!((j.cell(0, 1) - 0.34).abs() < 1e-12);
        assert!((j.response_rate() - 0.68).abs() < 1e-12);
        let w = t.covariate_given_exposure(true).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-12);
        assert!((t.marginal_response(true).unwrap() - 0.68).abs() < 1e-12);
    }

    #[test]
    fn mediator_consistency_examples() {
        let t = CompleteMediatorTable::new([0.025, 0.25], [0.1, 0.9]).unwrap();
        let table1 = TwoArmMargins::new(0.30, 0.12).unwrap();
        assert!(check_mediator_consistency(&t, &table1, 1e-6).is_empty());

        let off = TwoArmMargins::new(0.30, 0.50).unwrap();
        let d = check_mediator_consistency(&t, &off, 1e-6);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].exposure, 0);
        assert!((d[0].difference - 0.38).abs() < 1e-12);

        let c = 0.37;
        let inert = CompleteMediatorTable::new([0.2, 0.7], [c, c]).unwrap();
        assert!(check_mediator_consistency(&inert, &TwoArmMargins::new(c, c).unwrap(), 1e-9).is_empty());
    }

    #[test]
    fn partial_mediator_margins_match_worked_values() {
        let t = PartialMediatorTable::new([0.96, 0.74], [[0.02, 0.33], [0.91, 0.73]]).unwrap();
        let m = t.margins();
        assert!((m.control.value() - 0.3176).abs() < 1e-12);
        assert!((m.treated.value() - 0.7768).abs() < 1e-12);
    }
}
