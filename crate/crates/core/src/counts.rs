//! Raw count tables and plug-in estimation of the probabilities each
//! scenario needs. Counts are signed so that negative entries can be
//! reported as such instead of failing to parse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    CompleteMediatorTable, ConfoundedData, CovariateTable, ObservationalJoint, PartialMediatorTable,
    Prob, Stratum, TwoArmMargins,
};
use crate::scenario::{Scenario, ScenarioData};

/// Responders (`r1`) and non-responders (`r0`) in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub r1: i64,
    pub r0: i64,
}

impl OutcomeCounts {
    pub fn new(r1: i64, r0: i64) -> Self {
        OutcomeCounts { r1, r0 }
    }

    fn checked(&self, what: &str) -> Result<(f64, f64)> {
        if self.r1 < 0 || self.r0 < 0 {
            return Err(Error::NegativeCount(what.to_string()));
        }
        Ok((self.r1 as f64, self.total() as f64))
    }

    pub fn total(&self) -> i64 {
        self.r1 + self.r0
    }

    /// r1 / (r1 + r0).
    fn rate(&self, what: &str) -> Result<Prob> {
        let (r1, n) = self.checked(what)?;
        ratio(r1, n, what)
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<Prob> {
    if den <= 0.0 {
        return Err(Error::ZeroDenominator(what.to_string()));
    }
    Prob::new(num / den)
}

/// Counts per exposure arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub treated: OutcomeCounts,
    pub control: OutcomeCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfoundedCounts {
    /// The externally assigned control group of the experiment.
    pub experimental_control: OutcomeCounts,
    /// Self-selected exposure in the observational study.
    pub observational: ArmCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCounts {
    pub label: String,
    pub treated: OutcomeCounts,
    pub control: OutcomeCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateCounts {
    pub strata: Vec<StratumCounts>,
}

/// (E, M, R) counts; each field is the outcome split for one (e, m) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediatorCounts {
    pub e0_m0: OutcomeCounts,
    pub e0_m1: OutcomeCounts,
    pub e1_m0: OutcomeCounts,
    pub e1_m1: OutcomeCounts,
}

impl MediatorCounts {
    fn cell(&self, e: usize, m: usize) -> OutcomeCounts {
        match (e, m) {
            (0, 0) => self.e0_m0,
            (0, 1) => self.e0_m1,
            (1, 0) => self.e1_m0,
            _ => self.e1_m1,
        }
    }

    fn check(&self) -> Result<()> {
        for (e, m) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            self.cell(e, m).checked(&format!("cell E={e}, M={m}"))?;
        }
        Ok(())
    }

    /// Pr(M=1 | E=e).
    fn mediator_rates(&self) -> Result<[Prob; 2]> {
        let arm = |e| {
            let n1 = self.cell(e, 1).total() as f64;
            let n = n1 + self.cell(e, 0).total() as f64;
            ratio(n1, n, &format!("arm E={e}"))
        };
        Ok([arm(0)?, arm(1)?])
    }
}

/// Scenario-shaped integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountTable {
    Basic(ArmCounts),
    Confounded(ConfoundedCounts),
    Covariate(CovariateCounts),
    SufficientCovariate(CovariateCounts),
    CompleteMediator(MediatorCounts),
    PartialMediator(MediatorCounts),
}

impl CountTable {
    pub fn scenario(&self) -> Scenario {
        match self {
            CountTable::Basic(_) => Scenario::Basic,
            CountTable::Confounded(_) => Scenario::Confounded,
            CountTable::Covariate(_) => Scenario::Covariate,
            CountTable::SufficientCovariate(_) => Scenario::SufficientCovariate,
            CountTable::CompleteMediator(_) => Scenario::CompleteMediator,
            CountTable::PartialMediator(_) => Scenario::PartialMediator,
        }
    }

    pub fn from_json(scenario: Scenario, value: serde_json::Value) -> Result<Self> {
        fn parse<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
            serde_json::from_value(value).map_err(|e| Error::Validation(e.to_string()))
        }
        Ok(match scenario {
            Scenario::Basic => CountTable::Basic(parse(value)?),
            Scenario::Confounded => CountTable::Confounded(parse(value)?),
            Scenario::Covariate => CountTable::Covariate(parse(value)?),
            Scenario::SufficientCovariate => CountTable::SufficientCovariate(parse(value)?),
            Scenario::CompleteMediator => CountTable::CompleteMediator(parse(value)?),
            Scenario::PartialMediator => CountTable::PartialMediator(parse(value)?),
        })
    }
}

fn margins_from(arms: &ArmCounts, prefix: &str) -> Result<TwoArmMargins> {
    Ok(TwoArmMargins {
        treated: arms.treated.rate(&format!("{prefix}arm E=1"))?,
        control: arms.control.rate(&format!("{prefix}arm E=0"))?,
    })
}

fn covariate_table(counts: &CovariateCounts, exposure_model: bool) -> Result<CovariateTable> {
    let mut totals = Vec::with_capacity(counts.strata.len());
    for s in &counts.strata {
        let (_, n1) = s.treated.checked(&format!("stratum `{}` arm E=1", s.label))?;
        let (_, n0) = s.control.checked(&format!("stratum `{}` arm E=0", s.label))?;
        totals.push((n1, n0));
    }
    let grand: f64 = totals.iter().map(|(a, b)| a + b).sum();
    let mut strata = Vec::with_capacity(counts.strata.len());
    for (s, &(n1, n0)) in counts.strata.iter().zip(&totals) {
        let label = &s.label;
        strata.push(Stratum {
            label: label.clone(),
            p_x: ratio(n1 + n0, grand, "all strata")?,
            p_e1_given_x: if exposure_model {
                Some(ratio(n1, n1 + n0, &format!("stratum `{label}`"))?)
            } else {
                None
            },
            p_r1_given_e1: s.treated.rate(&format!("stratum `{label}` arm E=1"))?,
            p_r1_given_e0: s.control.rate(&format!("stratum `{label}` arm E=0"))?,
        });
    }
    CovariateTable::new(strata)
}

/// Plug-in estimates: every probability is a cell count over its denominator.
///
/// For covariate tables Pr(X=x) is the stratum share of all subjects and,
/// with an exposure model, Pr(E=1|X=x) is the treated share of the stratum.
/// For a complete mediator Pr(R=1|M=m) pools both exposure arms.
pub fn estimate_from_counts(counts: &CountTable) -> Result<ScenarioData> {
    Ok(match counts {
        CountTable::Basic(arms) => ScenarioData::Basic(margins_from(arms, "")?),
        CountTable::Confounded(c) => {
            let (_, _) = c.observational.treated.checked("observational arm E=1")?;
            let (_, _) = c.observational.control.checked("observational arm E=0")?;
            let cells = [
                [c.observational.control.r0, c.observational.control.r1],
                [c.observational.treated.r0, c.observational.treated.r1],
            ];
            let n: i64 = cells.iter().flatten().sum();
            if n <= 0 {
                return Err(Error::ZeroDenominator("observational study".into()));
            }
            let n = n as f64;
            let joint = ObservationalJoint::new(cells.map(|row| row.map(|v| v as f64 / n)))?;
            ScenarioData::Confounded(ConfoundedData {
                control_rate: c.experimental_control.rate("experimental control arm")?,
                observational: joint,
            })
        }
        CountTable::Covariate(c) => ScenarioData::Covariate(covariate_table(c, false)?),
        CountTable::SufficientCovariate(c) => ScenarioData::SufficientCovariate(covariate_table(c, true)?),
        CountTable::CompleteMediator(c) => {
            c.check()?;
            let response = |m| {
                let r1 = (c.cell(0, m).r1 + c.cell(1, m).r1) as f64;
                let n = (c.cell(0, m).total() + c.cell(1, m).total()) as f64;
                ratio(r1, n, &format!("mediator level M={m}"))
            };
            ScenarioData::CompleteMediator(CompleteMediatorTable {
                p_m1_given_e: c.mediator_rates()?,
                p_r1_given_m: [response(0)?, response(1)?],
            })
        }
        CountTable::PartialMediator(c) => {
            c.check()?;
            let mut r = [[Prob::ZERO; 2]; 2];
            for (e, row) in r.iter_mut().enumerate() {
                for (m, cell) in row.iter_mut().enumerate() {
                    *cell = c.cell(e, m).rate(&format!("cell E={e}, M={m}"))?;
                }
            }
            ScenarioData::PartialMediator(PartialMediatorTable {
                p_m1_given_e: c.mediator_rates()?,
                p_r1_given_e_m: r,
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basic(t: (i64, i64), c: (i64, i64)) -> CountTable {
        CountTable::Basic(ArmCounts {
            treated: OutcomeCounts::new(t.0, t.1),
            control: OutcomeCounts::new(c.0, c.1),
        })
    }

    #[test]
    fn aspirin_trial_counts() {
        let ScenarioData::Basic(m) = estimate_from_counts(&basic((30, 70), (12, 88))).unwrap() else {
            panic!("wrong scenario")
        };
        assert!((m.treated.value() - 0.30).abs() < 1e-15);
        assert!((m.control.value() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn all_zero_outcomes() {
        let ScenarioData::Basic(m) = estimate_from_counts(&basic((0, 10), (0, 10))).unwrap() else {
            panic!("wrong scenario")
        };
        assert_eq!(m.treated, Prob::ZERO);
        assert_eq!(m.control, Prob::ZERO);
    }

    #[test]
    fn empty_arm_is_zero_denominator() {
        assert!(matches!(
            estimate_from_counts(&basic((0, 0), (3, 4))),
            Err(Error::ZeroDenominator(s)) if s.contains("E=1")
        ));
    }

    #[test]
    fn negative_counts_rejected() {
        assert!(matches!(
            estimate_from_counts(&basic((-1, 5), (3, 4))),
            Err(Error::NegativeCount(_))
        ));
    }

    #[test]
    fn covariate_counts() {
        let counts = CovariateCounts {
            strata: vec![
                StratumCounts {
                    label: "0".into(),
                    treated: OutcomeCounts::new(64, 16),
                    control: OutcomeCounts::new(4, 16),
                },
                StratumCounts {
                    label: "1".into(),
                    treated: OutcomeCounts::new(4, 16),
                    control: OutcomeCounts::new(64, 16),
                },
            ],
        };
        let ScenarioData::SufficientCovariate(t) =
            estimate_from_counts(&CountTable::SufficientCovariate(counts.clone())).unwrap()
        else {
            panic!("wrong scenario")
        };
        let s0 = t.stratum("0").unwrap();
        assert_eq!(s0.p_x.value(), 0.5);
        assert_eq!(s0.p_e1_given_x.unwrap().value(), 0.8);
        assert_eq!(s0.p_r1_given_e1.value(), 0.8);
        assert_eq!(s0.p_r1_given_e0.value(), 0.2);

        let ScenarioData::Covariate(t) = estimate_from_counts(&CountTable::Covariate(counts)).unwrap() else {
            panic!("wrong scenario")
        };
        assert!(!t.has_exposure_model());
    }

    #[test]
    fn mediator_counts() {
        let counts = MediatorCounts {
            e0_m0: OutcomeCounts::new(1, 9),
            e0_m1: OutcomeCounts::new(9, 1),
            e1_m0: OutcomeCounts::new(3, 27),
            e1_m1: OutcomeCounts::new(63, 7),
        };
        let ScenarioData::CompleteMediator(t) = estimate_from_counts(&CountTable::CompleteMediator(counts)).unwrap()
        else {
            panic!("wrong scenario")
        };
        assert_eq!(t.p_m1_given_e[0].value(), 0.5);
        assert_eq!(t.p_m1_given_e[1].value(), 0.7);
        assert!((t.p_r1_given_m[0].value() - 0.1).abs() < 1e-15);
        assert!((t.p_r1_given_m[1].value() - 0.9).abs() < 1e-15);

        let ScenarioData::PartialMediator(t) = estimate_from_counts(&CountTable::PartialMediator(counts)).unwrap()
        else {
            panic!("wrong scenario")
        };
        assert_eq!(t.p_r1_given_e_m[1][1].value(), 0.9);

        let empty = MediatorCounts { e0_m1: OutcomeCounts::new(0, 0), ..counts };
        assert!(matches!(
            estimate_from_counts(&CountTable::PartialMediator(empty)),
            Err(Error::ZeroDenominator(_))
        ));
    }

    proptest! {
        #[test]
        fn estimates_remultiply_to_counts(
            n1 in 1i64..500, n0 in 1i64..500, f1 in 0.0f64..=1.0, f0 in 0.0f64..=1.0,
        ) {
            let r1 = (f1 * n1 as f64).floor() as i64;
            let r0 = (f0 * n0 as f64).floor() as i64;
            let ScenarioData::Basic(m) = estimate_from_counts(&basic((r1, n1 - r1), (r0, n0 - r0))).unwrap() else {
                unreachable!()
            };
            prop_assert_eq!((m.treated.value() * n1 as f64).round() as i64, r1);
            prop_assert_eq!((m.control.value() * n0 as f64).round() as i64, r0);
            prop_assert!((m.treated.value() * n1 as f64 - r1 as f64).abs() < 1e-9);
        }
    }
}
