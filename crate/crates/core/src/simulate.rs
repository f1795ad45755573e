//! Random structural models with a known probability of causation.
//!
//! Each model is a set of independent mechanism blocks whose atom
//! probabilities are drawn from a flat simplex. The observable tables a
//! scenario would report are computed exactly from the model, so the true
//! PC must fall inside any valid bound computed from those tables.
//!
//! Reproducibility contract: the generator is ChaCha8 seeded with
//! `seed_from_u64(seed)`; a uniform draw is `(next_u64() >> 11) * 2^-53`;
//! a k-atom simplex uses `k - 1` uniform draws, sorted, and takes the
//! spacings between `0`, the sorted draws and `1`. Draw order:
//!
//! | scenario          | draws                                                        |
//! |-------------------|--------------------------------------------------------------|
//! | basic             | response (3)                                                 |
//! | confounded        | confounder (1), then for u = 0, 1: exposure (1), response (3)|
//! | covariate         | levels (1), level weights (k - 1), per level: response (3)   |
//! | suffcov           | levels (1), level weights (k - 1), per level: exposure (1), response (3) |
//! | complete-mediator | mediator (3), response (3)                                   |
//! | partial-mediator  | mediator (3), response (15)                                  |
//!
//! The number of covariate levels is `k = 1 + floor(4 u)`. Batch member
//! `i` uses seed `seed + i` (wrapping).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{
    Block, CanonicalModel, COMPLETE_RESPONSE_VARS, MEDIATOR_VARS, PARTIAL_RESPONSE_VARS, RESPONSE_VARS,
};
use crate::prob::{
    CompleteMediatorTable, ConfoundedData, CovariateTable, ObservationalJoint, PartialMediatorTable, Prob,
    Stratum, TwoArmMargins,
};
use crate::scenario::{Scenario, ScenarioData};

/// Largest number of covariate levels a sampled model can have.
pub const MAX_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub scenario: Scenario,
    pub seed: u64,
    pub model: CanonicalModel,
    pub true_pc: Prob,
}

struct Draws(ChaCha8Rng);

impl Draws {
    fn new(seed: u64) -> Self {
        Draws(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn simplex(&mut self, atoms: usize) -> Vec<f64> {
        let mut cuts: Vec<f64> = (1..atoms).map(|_| self.uniform()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.push(1.0);
        let mut prev = 0.0;
        cuts.into_iter()
            .map(|c| {
                let gap = c - prev;
                prev = c;
                gap
            })
            .collect()
    }
}

fn stratum_label(i: usize) -> String {
    format!("x{i}")
}

/// Draws a model for `scenario`. Deterministic in `seed`.
pub fn sample_model(scenario: Scenario, seed: u64) -> Result<GroundTruthModel> {
    let mut d = Draws::new(seed);
    let pair = |label: String, d: &mut Draws, vars: &[&str]| Block::from_dense(label, vars, &d.simplex(1 << vars.len()));
    let blocks = match scenario {
        Scenario::Basic => vec![pair("response".into(), &mut d, &RESPONSE_VARS)],
        Scenario::Confounded => {
            let mut blocks = vec![Block::from_dense("confounder", &["U"], &d.simplex(2))];
            for u in 0..2 {
                blocks.push(Block::from_dense(format!("exposure u{u}"), &["E"], &d.simplex(2)));
                blocks.push(pair(format!("response u{u}"), &mut d, &RESPONSE_VARS));
            }
            blocks
        }
        Scenario::Covariate | Scenario::SufficientCovariate => {
            let levels = 1 + ((d.uniform() * MAX_LEVELS as f64) as usize).min(MAX_LEVELS - 1);
            let mut blocks = vec![Block::categorical("covariate", "X", &d.simplex(levels))];
            for i in 0..levels {
                if scenario == Scenario::SufficientCovariate {
                    blocks.push(Block::from_dense(format!("exposure {}", stratum_label(i)), &["E"], &d.simplex(2)));
                }
                blocks.push(pair(format!("stratum {}", stratum_label(i)), &mut d, &RESPONSE_VARS));
            }
            blocks
        }
        Scenario::CompleteMediator => vec![
            pair("mediator".into(), &mut d, &MEDIATOR_VARS),
            pair("response".into(), &mut d, &COMPLETE_RESPONSE_VARS),
        ],
        Scenario::PartialMediator => vec![
            pair("mediator".into(), &mut d, &MEDIATOR_VARS),
            pair("response".into(), &mut d, &PARTIAL_RESPONSE_VARS),
        ],
    };
    let model = CanonicalModel { blocks };
    let true_pc = pc_of(scenario, &model)?;
    Ok(GroundTruthModel {
        scenario,
        seed,
        model,
        true_pc,
    })
}

/// `runs` models with seeds `seed, seed + 1, ...`.
pub fn sample_batch(scenario: Scenario, seed: u64, runs: usize) -> Result<Vec<GroundTruthModel>> {
    (0..runs as u64).map(|i| sample_model(scenario, seed.wrapping_add(i))).collect()
}

/// Recomputes PC from the model's atoms.
pub fn true_pc(model: &GroundTruthModel) -> Result<Prob> {
    pc_of(model.scenario, &model.model)
}

fn get<'a>(model: &'a CanonicalModel, label: &str) -> Result<&'a Block> {
    model
        .block(label)
        .ok_or_else(|| Error::Validation(format!("model has no `{label}` block")))
}

/// Pr(E=1) from a one-variable exposure block.
fn exposure(model: &CanonicalModel, label: &str) -> Result<f64> {
    get(model, label)?
        .marginal("E")
        .ok_or_else(|| Error::Validation(format!("block `{label}` has no E variable")))
}

/// Mixture components: (weight, Pr(E=1), response block label).
fn components(scenario: Scenario, model: &CanonicalModel) -> Result<Vec<(f64, f64, String)>> {
    Ok(match scenario {
        Scenario::Basic => vec![(1.0, 1.0, "response".into())],
        Scenario::Confounded => {
            let pu1 = get(model, "confounder")?.marginal("U").unwrap_or(0.0);
            let mut out = Vec::new();
            for (u, w) in [(0, 1.0 - pu1), (1, pu1)] {
                out.push((w, exposure(model, &format!("exposure u{u}"))?, format!("response u{u}")));
            }
            out
        }
        Scenario::Covariate | Scenario::SufficientCovariate => {
            let mut out = Vec::new();
            for atom in &get(model, "covariate")?.atoms {
                let label = stratum_label(atom.config[0] as usize);
                let e = if scenario == Scenario::SufficientCovariate {
                    exposure(model, &format!("exposure {label}"))?
                } else {
                    1.0
                };
                out.push((atom.prob.value(), e, format!("stratum {label}")));
            }
            out
        }
        Scenario::CompleteMediator | Scenario::PartialMediator => {
            return Err(Error::Unsupported("mediator models have no mixture components".into()))
        }
    })
}

fn pc_of(scenario: Scenario, model: &CanonicalModel) -> Result<Prob> {
    // (weight among the exposed, R_0, R_1)
    let mut units: Vec<(f64, u8, u8)> = Vec::new();
    if scenario.has_mediator() {
        let partial = scenario == Scenario::PartialMediator;
        for m in &get(model, "mediator")?.atoms {
            for r in &get(model, "response")?.atoms {
                let (m0, m1) = (m.config[0] as usize, m.config[1] as usize);
                let outcome = if partial {
                    (r.config[m0], r.config[2 + m1])
                } else {
                    (r.config[m0], r.config[m1])
                };
                units.push((m.prob.value() * r.prob.value(), outcome.0, outcome.1));
            }
        }
    } else {
        for (w, e, label) in components(scenario, model)? {
            for a in &get(model, &label)?.atoms {
                units.push((w * e * a.prob.value(), a.config[0], a.config[1]));
            }
        }
    }
    let cases: f64 = units.iter().filter(|u| u.2 == 1).map(|u| u.0).sum();
    if cases <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    let caused: f64 = units.iter().filter(|u| u.1 == 0 && u.2 == 1).map(|u| u.0).sum();
    Prob::snapped(caused / cases, 1e-12)
}

fn p(v: f64) -> Result<Prob> {
    Prob::snapped(v, 1e-12)
}

impl GroundTruthModel {
    /// The tables this model would yield for its scenario.
    pub fn observables(&self) -> Result<ScenarioData> {
        let model = &self.model;
        let margin = |label: &str, var: &str| -> Result<f64> {
            get(model, label)?
                .marginal(var)
                .ok_or_else(|| Error::Validation(format!("block `{label}` has no {var} variable")))
        };
        Ok(match self.scenario {
            Scenario::Basic => ScenarioData::Basic(TwoArmMargins::new(
                margin("response", "R1")?,
                margin("response", "R0")?,
            )?),
            Scenario::Confounded => {
                let mut control = 0.0;
                let mut cells = [[0.0; 2]; 2];
                for (w, e, label) in components(self.scenario, model)? {
                    let r0 = margin(&label, "R0")?;
                    let r1 = margin(&label, "R1")?;
                    control += w * r0;
                    cells[0][0] += w * (1.0 - e) * (1.0 - r0);
                    cells[0][1] += w * (1.0 - e) * r0;
                    cells[1][0] += w * e * (1.0 - r1);
                    cells[1][1] += w * e * r1;
                }
                ScenarioData::Confounded(ConfoundedData {
                    control_rate: p(control)?,
                    observational: ObservationalJoint::new(cells)?,
                })
            }
            Scenario::Covariate | Scenario::SufficientCovariate => {
                let suff = self.scenario == Scenario::SufficientCovariate;
                let mut strata = Vec::new();
                for atom in &get(model, "covariate")?.atoms {
                    let label = stratum_label(atom.config[0] as usize);
                    let block = format!("stratum {label}");
                    let p_e1_given_x = if suff {
                        Some(p(exposure(model, &format!("exposure {label}"))?)?)
                    } else {
                        None
                    };
                    strata.push(Stratum {
                        p_x: atom.prob,
                        p_e1_given_x,
                        p_r1_given_e1: p(margin(&block, "R1")?)?,
                        p_r1_given_e0: p(margin(&block, "R0")?)?,
                        label,
                    });
                }
                let table = CovariateTable::new(strata)?;
                if suff {
                    ScenarioData::SufficientCovariate(table)
                } else {
                    ScenarioData::Covariate(table)
                }
            }
            Scenario::CompleteMediator => ScenarioData::CompleteMediator(CompleteMediatorTable::new(
                [margin("mediator", "M0")?, margin("mediator", "M1")?],
                [margin("response", "R_m0")?, margin("response", "R_m1")?],
            )?),
            Scenario::PartialMediator => {
                let r = |name: &str| margin("response", name);
                ScenarioData::PartialMediator(PartialMediatorTable::new(
                    [margin("mediator", "M0")?, margin("mediator", "M1")?],
                    [[r("R_e0m0")?, r("R_e0m1")?], [r("R_e1m0")?, r("R_e1m1")?]],
                )?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle;

    #[test]
    fn same_seed_same_model() {
        for sc in Scenario::ALL {
            assert_eq!(sample_model(sc, 7).unwrap(), sample_model(sc, 7).unwrap());
            assert_ne!(sample_model(sc, 7).unwrap().model, sample_model(sc, 8).unwrap().model);
        }
    }

    #[test]
    fn simplex_draws_sum_to_one() {
        let mut d = Draws::new(3);
        for k in 1..=16 {
            let s = d.simplex(k);
            assert_eq!(s.len(), k);
            assert!(s.iter().all(|&x| x >= 0.0));
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_draw_is_documented_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let expected = (rng.next_u64() >> 11) as f64 / 9007199254740992.0;
        assert_eq!(Draws::new(11).uniform(), expected);
    }

    #[test]
    fn batch_seeds_are_consecutive() {
        let batch = sample_batch(Scenario::Confounded, 40, 3).unwrap();
        for (i, m) in batch.iter().enumerate() {
            assert_eq!(m.seed, 40 + i as u64);
            assert_eq!(m, &sample_model(Scenario::Confounded, 40 + i as u64).unwrap());
        }
    }

    #[test]
    fn true_pc_of_pure_models() {
        let pure = |dist: [f64; 4]| GroundTruthModel {
            scenario: Scenario::Basic,
            seed: 0,
            model: CanonicalModel {
                blocks: vec![Block::from_dense("response", &RESPONSE_VARS, &dist)],
            },
            true_pc: Prob::ZERO,
        };
        // Dense order: (R0, R1) = (0,0), (1,0), (0,1), (1,1).
        assert_eq!(true_pc(&pure([0.0, 0.0, 1.0, 0.0])).unwrap().value(), 1.0);
        assert_eq!(true_pc(&pure([0.0, 0.0, 0.0, 1.0])).unwrap().value(), 0.0);
        let aspirin = pure([0.64, 0.06, 0.24, 0.06]);
        assert!((true_pc(&aspirin).unwrap().value() - 0.8).abs() < 1e-12);
        assert_eq!(
            aspirin.observables().unwrap(),
            ScenarioData::Basic(TwoArmMargins::new(0.30, 0.12).unwrap())
        );
        assert_eq!(true_pc(&pure([1.0, 0.0, 0.0, 0.0])), Err(Error::ZeroCaseProbability));
    }

    #[test]
    fn samples_validate_and_sit_inside_the_oracle_range() {
        for sc in Scenario::ALL {
            for seed in 0..50 {
                let m = sample_model(sc, seed).unwrap();
                assert!((true_pc(&m).unwrap().value() - m.true_pc.value()).abs() < 1e-12);
                let data = m.observables().unwrap();
                data.validate().unwrap();
                let r = oracle(&data, None).unwrap();
                let t = m.true_pc.value();
                assert!(r.min_pc.value() - 1e-9 <= t && t <= r.max_pc.value() + 1e-9, "{sc} seed {seed}");
            }
        }
    }

    #[test]
    fn covariate_level_counts_vary() {
        let mut seen = [false; MAX_LEVELS + 1];
        for seed in 0..200 {
            let m = sample_model(Scenario::Covariate, seed).unwrap();
            seen[m.model.block("covariate").unwrap().atoms.len()] = true;
        }
        assert_eq!(seen, [false, true, true, true, true]);
    }
}
