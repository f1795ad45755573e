//! Independent check of the closed-form bounds: the probability of
//! causation is optimized exactly over every potential-outcome
//! distribution that reproduces the observed tables.
//!
//! Each mechanism is a block of binary potential responses whose joint
//! distribution is only constrained through its margins. Its feasible set
//! is a polytope and [`Polytope::vertices`] lists all of its vertices. PC
//! is linear in a single block, separable across covariate strata, and
//! bilinear across the mediator and response blocks of the mediator
//! scenarios, so in every case the optimum sits on a vertex (or a pair of
//! vertices) and exhaustive evaluation is exact.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    CompleteMediatorTable, ConfoundedData, CovariateTable, PartialMediatorTable, Prob, TwoArmMargins,
};
use crate::scenario::ScenarioData;

mod canonical;
mod polytope;

pub use canonical::{Atom, Block, CanonicalModel};
pub use polytope::Polytope;

/// Variable names per block; bit `k` of an atom index is variable `k`.
pub const RESPONSE_VARS: [&str; 2] = ["R0", "R1"];
pub const CONFOUNDED_VARS: [&str; 3] = ["E", "R0", "R1"];
pub const MEDIATOR_VARS: [&str; 2] = ["M0", "M1"];
pub const COMPLETE_RESPONSE_VARS: [&str; 2] = ["R_m0", "R_m1"];
pub const PARTIAL_RESPONSE_VARS: [&str; 4] = ["R_e0m0", "R_e0m1", "R_e1m0", "R_e1m1"];
pub const JOINT_MECHANISM_VARS: [&str; 4] = ["M0", "M1", "R_m0", "R_m1"];

/// Two binary variables with fixed margins.
static PAIR: LazyLock<Polytope> = LazyLock::new(|| marginal_polytope(2));
/// Four binary variables with fixed margins.
static QUAD: LazyLock<Polytope> = LazyLock::new(|| marginal_polytope(4));
/// Joint (M0, M1, R_m0, R_m1) with Pr(M_e = 1) and Pr(M_e = m, R_m = 1)
/// fixed, which is what a complete-mediator table pins down when the two
/// mechanisms may be dependent.
static COUPLED: LazyLock<Polytope> = LazyLock::new(coupled_polytope);
/// (E, R0, R1) with the observational (E, R_E) joint and Pr(R0=1) fixed.
static CONFOUNDED: LazyLock<Polytope> = LazyLock::new(confounded_polytope);

fn bit(idx: usize, k: usize) -> u8 {
    ((idx >> k) & 1) as u8
}

/// Rows: total mass, then Pr(variable k = 1) for each k.
fn marginal_polytope(vars: usize) -> Polytope {
    let n = 1 << vars;
    let mut rows = vec![vec![1.0; n]];
    for k in 0..vars {
        rows.push((0..n).map(|i| f64::from(bit(i, k))).collect());
    }
    Polytope::new(rows)
}

fn confounded_polytope() -> Polytope {
    let observed = |i: usize| {
        let e = bit(i, 0);
        (e, if e == 1 { bit(i, 2) } else { bit(i, 1) })
    };
    let mut rows = vec![vec![1.0; 8]];
    for cell in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        rows.push((0..8).map(|i| f64::from(u8::from(observed(i) == cell))).collect());
    }
    rows.push((0..8).map(|i| f64::from(bit(i, 1))).collect());
    Polytope::new(rows)
}

fn coupled_polytope() -> Polytope {
    let mut rows = vec![vec![1.0; 16]];
    for e in 0..2 {
        rows.push((0..16).map(|i| f64::from(bit(i, e))).collect());
    }
    for e in 0..2 {
        for m in 0..2 {
            rows.push(
                (0..16)
                    .map(|i| f64::from(u8::from(bit(i, e) as usize == m && bit(i, 2 + m) == 1)))
                    .collect(),
            );
        }
    }
    Polytope::new(rows)
}

fn marginal_rhs(margins: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(margins.iter().copied()).collect()
}

/// Exact range of PC over the feasible set, with a witness distribution at
/// each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRange {
    pub min_pc: Prob,
    pub max_pc: Prob,
    pub argmin: CanonicalModel,
    pub argmax: CanonicalModel,
}

impl FeasibleRange {
    fn new(min: f64, max: f64, argmin: CanonicalModel, argmax: CanonicalModel) -> Result<Self> {
        let snap = |v: f64| {
            Prob::snapped(v, 1e-9).map_err(|_| Error::Verification(format!("oracle value {v} outside [0, 1]")))
        };
        Ok(FeasibleRange {
            min_pc: snap(min)?,
            max_pc: snap(max)?,
            argmin,
            argmax,
        })
    }
}

/// Whether the mediator and response mechanisms are independent of each
/// other. The closed-form mediator bounds assume independence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MechanismCoupling {
    #[default]
    Independent,
    /// Any joint distribution of the two mechanisms that reproduces the
    /// observed (E, M, R) table.
    Unrestricted,
}

/// Minimum and maximum of `value` over `items`; ties keep the first seen.
fn extremes<T, I>(items: I) -> Option<((f64, T), (f64, T))>
where
    T: Clone,
    I: IntoIterator<Item = (f64, T)>,
{
    let mut iter = items.into_iter();
    let first = iter.next()?;
    let (mut lo, mut hi) = (first.clone(), first);
    for item in iter {
        if item.0 < lo.0 {
            lo = item.clone();
        }
        if item.0 > hi.0 {
            hi = item;
        }
    }
    Some((lo, hi))
}

fn empty(what: &str) -> Error {
    Error::Infeasible(format!("no {what} distribution matches the data"))
}

/// Pr(R_{M0} = 0, R_{M1} = 1) for independent complete-mediator blocks.
pub(crate) fn complete_pair_numerator(mediator: &[f64], response: &[f64]) -> f64 {
    let mut total = 0.0;
    for (mc, pm) in mediator.iter().enumerate() {
        let (m0, m1) = (bit(mc, 0) as usize, bit(mc, 1) as usize);
        for (rc, pr) in response.iter().enumerate() {
            if bit(rc, m0) == 0 && bit(rc, m1) == 1 {
                total += pm * pr;
            }
        }
    }
    total
}

/// `q[m0][m1]` = Pr(R_{0,m0} = 0, R_{1,m1} = 1) for a partial-mediator response block.
fn partial_response_terms(response: &[f64]) -> [[f64; 2]; 2] {
    let mut q = [[0.0; 2]; 2];
    for (rc, pr) in response.iter().enumerate() {
        for (m0, row) in q.iter_mut().enumerate() {
            for (m1, cell) in row.iter_mut().enumerate() {
                if bit(rc, m0) == 0 && bit(rc, 2 + m1) == 1 {
                    *cell += pr;
                }
            }
        }
    }
    q
}

fn partial_pair_numerator(mediator: &[f64], q: &[[f64; 2]; 2]) -> f64 {
    mediator
        .iter()
        .enumerate()
        .map(|(mc, pm)| pm * q[bit(mc, 0) as usize][bit(mc, 1) as usize])
        .sum()
}

fn single(label: &str, vars: &[&str], probs: &[f64]) -> CanonicalModel {
    CanonicalModel {
        blocks: vec![Block::from_dense(label, vars, probs)],
    }
}

/// Randomized-trial margins: sweeps the free cell Pr(R0=0, R1=1) over its
/// feasible range; PC = Pr(R0=0, R1=1) / Pr(R1=1).
pub fn oracle_basic(m: &TwoArmMargins) -> Result<FeasibleRange> {
    let p1 = m.treated.value();
    if p1 <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let vertices = PAIR.vertices(&marginal_rhs(&[m.control.value(), p1]));
    let ((lo, lo_v), (hi, hi_v)) =
        extremes(vertices.into_iter().map(|v| (v[2] / p1, v))).ok_or_else(|| empty("(R0, R1)"))?;
    FeasibleRange::new(
        lo,
        hi,
        single("response", &RESPONSE_VARS, &lo_v),
        single("response", &RESPONSE_VARS, &hi_v),
    )
}

/// Confounded exposure: optimizes Pr(R0=0 | E=1, R1=1) over joint
/// distributions of (E, R0, R1) whose (E, R_E) margin is the observational
/// joint and whose R0 margin is the experimental control rate.
pub fn oracle_confounded(data: &ConfoundedData) -> Result<FeasibleRange> {
    let obs = &data.observational;
    let case = obs.cell(1, 1);
    if case <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    let rhs = [
        1.0,
        obs.cell(0, 0),
        obs.cell(0, 1),
        obs.cell(1, 0),
        case,
        data.control_rate.value(),
    ];
    // Atom 5 is E=1, R0=0, R1=1.
    let vertices = CONFOUNDED.vertices(&rhs);
    let ((lo, lo_v), (hi, hi_v)) = extremes(vertices.into_iter().map(|v| (v[5] / case, v)))
        .ok_or_else(|| empty("(E, R0, R1)"))?;
    FeasibleRange::new(
        lo,
        hi,
        single("exposure-response", &CONFOUNDED_VARS, &lo_v),
        single("exposure-response", &CONFOUNDED_VARS, &hi_v),
    )
}

fn stratum_block(label: &str, probs: &[f64]) -> Block {
    Block::from_dense(format!("stratum {label}"), &RESPONSE_VARS, probs)
}

/// Weight of each stratum among the exposed: Pr(X=x) Pr(E=1|X=x), with a
/// constant exposure probability when the table has no exposure model.
fn exposed_weights(ct: &CovariateTable) -> Vec<f64> {
    ct.strata()
        .iter()
        .map(|s| s.p_x.value() * s.p_e1_given_x.map_or(1.0, Prob::value))
        .collect()
}

/// Covariate scenarios: one independent (R0, R1) block per stratum. With
/// `condition_on` the individual's stratum is known and only that block
/// matters; otherwise PC mixes the strata by Pr(X=x | E=1, R=1), and since
/// the blocks are independent each is optimized on its own.
pub fn oracle_covariate(ct: &CovariateTable, condition_on: Option<&str>) -> Result<FeasibleRange> {
    if let Some(label) = condition_on {
        let s = ct.stratum(label)?;
        let mut r = oracle_basic(&s.margins()).map_err(|e| match e {
            Error::ZeroTreatedRisk => Error::ZeroCaseProbability,
            other => other,
        })?;
        r.argmin.blocks[0].label = format!("stratum {label}");
        r.argmax.blocks[0].label = format!("stratum {label}");
        return Ok(r);
    }
    let weights = exposed_weights(ct);
    let denominator: f64 = ct
        .strata()
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.p_r1_given_e1.value())
        .sum();
    if denominator <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    let (mut argmin, mut argmax) = (Vec::new(), Vec::new());
    for (s, w) in ct.strata().iter().zip(&weights) {
        let vertices = PAIR.vertices(&marginal_rhs(&[s.p_r1_given_e0.value(), s.p_r1_given_e1.value()]));
        let ((l, lv), (h, hv)) = extremes(vertices.into_iter().map(|v| (v[2], v)))
            .ok_or_else(|| empty(&format!("stratum `{}`", s.label)))?;
        lo += w * l;
        hi += w * h;
        argmin.push(stratum_block(&s.label, &lv));
        argmax.push(stratum_block(&s.label, &hv));
    }
    FeasibleRange::new(
        lo / denominator,
        hi / denominator,
        CanonicalModel { blocks: argmin },
        CanonicalModel { blocks: argmax },
    )
}

pub fn oracle_complete_mediator(t: &CompleteMediatorTable) -> Result<FeasibleRange> {
    oracle_complete_mediator_with(t, MechanismCoupling::Independent)
}

/// Complete mediator: PC = Pr(R_{M0} = 0 | R_{M1} = 1) where (M0, M1) are
/// the mediator's potential values and (R_m0, R_m1) the response's.
pub fn oracle_complete_mediator_with(
    t: &CompleteMediatorTable,
    coupling: MechanismCoupling,
) -> Result<FeasibleRange> {
    let p1 = t.margins().treated.value();
    if p1 <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let a = [t.p_m1_given_e[0].value(), t.p_m1_given_e[1].value()];
    let b = [t.p_r1_given_m[0].value(), t.p_r1_given_m[1].value()];
    match coupling {
        MechanismCoupling::Independent => {
            let mediator = PAIR.vertices(&marginal_rhs(&a));
            let response = PAIR.vertices(&marginal_rhs(&b));
            let pairs = mediator.iter().flat_map(|m| {
                response
                    .iter()
                    .map(move |r| (complete_pair_numerator(m, r) / p1, (m, r)))
            });
            let ((lo, (lm, lr)), (hi, (hm, hr))) = extremes(pairs).ok_or_else(|| empty("mechanism"))?;
            let model = |m: &[f64], r: &[f64]| CanonicalModel {
                blocks: vec![
                    Block::from_dense("mediator", &MEDIATOR_VARS, m),
                    Block::from_dense("response", &COMPLETE_RESPONSE_VARS, r),
                ],
            };
            FeasibleRange::new(lo, hi, model(lm, lr), model(hm, hr))
        }
        MechanismCoupling::Unrestricted => {
            let mut rhs = vec![1.0, a[0], a[1]];
            for e in 0..2 {
                rhs.extend(b.iter().enumerate().map(|(m, bm)| t.mediator(e, m) * bm));
            }
            let vertices = COUPLED.vertices(&rhs);
            let numerator = |v: &[f64]| -> f64 {
                v.iter()
                    .enumerate()
                    .filter(|&(c, _)| {
                        let (m0, m1) = (bit(c, 0) as usize, bit(c, 1) as usize);
                        bit(c, 2 + m0) == 0 && bit(c, 2 + m1) == 1
                    })
                    .map(|(_, p)| p)
                    .sum()
            };
            let ((lo, lv), (hi, hv)) = extremes(vertices.into_iter().map(|v| (numerator(&v) / p1, v)))
                .ok_or_else(|| empty("mechanism"))?;
            FeasibleRange::new(
                lo,
                hi,
                single("mechanisms", &JOINT_MECHANISM_VARS, &lv),
                single("mechanisms", &JOINT_MECHANISM_VARS, &hv),
            )
        }
    }
}

/// Partial mediator: PC = Pr(R_{0,M0} = 0 | R_{1,M1} = 1) with a 16-atom
/// response block over R_{e,m} and an independent (M0, M1) block.
pub fn oracle_partial_mediator(t: &PartialMediatorTable) -> Result<FeasibleRange> {
    let p1 = t.margins().treated.value();
    if p1 <= 0.0 {
        return Err(Error::ZeroTreatedRisk);
    }
    let a = [t.p_m1_given_e[0].value(), t.p_m1_given_e[1].value()];
    let c = &t.p_r1_given_e_m;
    let mediator = PAIR.vertices(&marginal_rhs(&a));
    let response = QUAD.vertices(&marginal_rhs(&[
        c[0][0].value(),
        c[0][1].value(),
        c[1][0].value(),
        c[1][1].value(),
    ]));
    let terms: Vec<[[f64; 2]; 2]> = response.iter().map(|r| partial_response_terms(r)).collect();
    let pairs = mediator.iter().flat_map(|m| {
        response
            .iter()
            .zip(&terms)
            .map(move |(r, q)| (partial_pair_numerator(m, q) / p1, (m, r)))
    });
    let ((lo, (lm, lr)), (hi, (hm, hr))) = extremes(pairs).ok_or_else(|| empty("mechanism"))?;
    let model = |m: &[f64], r: &[f64]| CanonicalModel {
        blocks: vec![
            Block::from_dense("mediator", &MEDIATOR_VARS, m),
            Block::from_dense("response", &PARTIAL_RESPONSE_VARS, r),
        ],
    };
    FeasibleRange::new(lo, hi, model(lm, lr), model(hm, hr))
}

/// Runs the oracle that matches `data`. `condition_on` selects a covariate
/// stratum and is ignored by scenarios without one.
pub fn oracle(data: &ScenarioData, condition_on: Option<&str>) -> Result<FeasibleRange> {
    match data {
        ScenarioData::Basic(m) => oracle_basic(m),
        ScenarioData::Confounded(c) => oracle_confounded(c),
        ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t) => oracle_covariate(t, condition_on),
        ScenarioData::CompleteMediator(t) => oracle_complete_mediator(t),
        ScenarioData::PartialMediator(t) => oracle_partial_mediator(t),
    }
}

fn block<'a>(model: &'a CanonicalModel, label: &str) -> Result<&'a Block> {
    model
        .block(label)
        .ok_or_else(|| Error::Validation(format!("model has no `{label}` block")))
}

/// Recomputes PC for a candidate model by summing over the joint
/// configurations of its blocks. Covariate strata are weighted by
/// Pr(X=x) Pr(E=1|X=x) from `data`.
pub fn evaluate_pc(data: &ScenarioData, model: &CanonicalModel) -> Result<f64> {
    // (weight, R_0, R_1) over all joint configurations among the exposed.
    let mut units: Vec<(f64, u8, u8)> = Vec::new();
    match data {
        ScenarioData::Basic(_) => {
            for a in &block(model, "response")?.atoms {
                units.push((a.prob.value(), a.config[0], a.config[1]));
            }
        }
        ScenarioData::Confounded(_) => {
            for a in block(model, "exposure-response")?.atoms.iter().filter(|a| a.config[0] == 1) {
                units.push((a.prob.value(), a.config[1], a.config[2]));
            }
        }
        ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t) => {
            for (s, w) in t.strata().iter().zip(exposed_weights(t)) {
                for a in &block(model, &format!("stratum {}", s.label))?.atoms {
                    units.push((w * a.prob.value(), a.config[0], a.config[1]));
                }
            }
        }
        ScenarioData::CompleteMediator(_) if model.block("mechanisms").is_some() => {
            for a in &block(model, "mechanisms")?.atoms {
                let c = &a.config;
                let response = |m: u8| c[2 + m as usize];
                units.push((a.prob.value(), response(c[0]), response(c[1])));
            }
        }
        ScenarioData::CompleteMediator(_) | ScenarioData::PartialMediator(_) => {
            let partial = matches!(data, ScenarioData::PartialMediator(_));
            for m in &block(model, "mediator")?.atoms {
                for r in &block(model, "response")?.atoms {
                    let (r0, r1) = if partial {
                        (r.config[m.config[0] as usize], r.config[2 + m.config[1] as usize])
                    } else {
                        (r.config[m.config[0] as usize], r.config[m.config[1] as usize])
                    };
                    units.push((m.prob.value() * r.prob.value(), r0, r1));
                }
            }
        }
    }
    let responders: f64 = units.iter().filter(|u| u.2 == 1).map(|u| u.0).sum();
    if responders <= 0.0 {
        return Err(Error::ZeroCaseProbability);
    }
    let caused: f64 = units.iter().filter(|u| u.1 == 0 && u.2 == 1).map(|u| u.0).sum();
    Ok(caused / responders)
}

/// Distributions of a two-variable block with margins (alpha for variable
/// 0, beta for variable 1), parametrized by t = Pr(v0=0, v1=1) on an even
/// grid of `resolution + 1` points.
fn pair_grid(alpha: f64, beta: f64, resolution: usize) -> Vec<[f64; 4]> {
    let lo = (beta - alpha).max(0.0);
    let hi = (1.0 - alpha).min(beta);
    (0..=resolution)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / resolution as f64;
            [1.0 - alpha - t, alpha - beta + t, t, beta - t]
        })
        .collect()
}

fn grid_extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Brute-force range of PC on an even grid over each block's free cell.
/// Only scenarios whose blocks have a single free parameter are supported
/// (basic, covariate, sufficient covariate, complete mediator). Used to
/// confirm that vertex enumeration misses nothing.
pub fn grid_range(data: &ScenarioData, resolution: usize) -> Result<(f64, f64)> {
    let resolution = resolution.max(1);
    match data {
        ScenarioData::Basic(m) => {
            let p1 = m.treated.value();
            if p1 <= 0.0 {
                return Err(Error::ZeroTreatedRisk);
            }
            let grid = pair_grid(m.control.value(), p1, resolution);
            Ok(grid_extremes(grid.iter().map(|d| d[2] / p1)))
        }
        ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t) => {
            let weights = exposed_weights(t);
            let mut lo = 0.0;
            let mut hi = 0.0;
            let mut den = 0.0;
            for (s, w) in t.strata().iter().zip(weights) {
                let grid = pair_grid(s.p_r1_given_e0.value(), s.p_r1_given_e1.value(), resolution);
                let (l, h) = grid_extremes(grid.iter().map(|d| d[2]));
                lo += w * l;
                hi += w * h;
                den += w * s.p_r1_given_e1.value();
            }
            if den <= 0.0 {
                return Err(Error::ZeroCaseProbability);
            }
            Ok((lo / den, hi / den))
        }
        ScenarioData::CompleteMediator(t) => {
            let p1 = t.margins().treated.value();
            if p1 <= 0.0 {
                return Err(Error::ZeroTreatedRisk);
            }
            let mg = pair_grid(t.p_m1_given_e[0].value(), t.p_m1_given_e[1].value(), resolution);
            let rg = pair_grid(t.p_r1_given_m[0].value(), t.p_r1_given_m[1].value(), resolution);
            Ok(grid_extremes(
                mg.iter()
                    .flat_map(|m| rg.iter().map(move |r| complete_pair_numerator(m, r) / p1)),
            ))
        }
        other => Err(Error::Unsupported(format!(
            "grid search for the {} scenario",
            other.scenario()
        ))),
    }
}
