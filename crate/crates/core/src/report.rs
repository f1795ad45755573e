//! Input documents, request dispatch and report emission.
//!
//! An input document is one JSON object:
//!
//! ```json
//! {
//!   "scenario": "basic",
//!   "probabilities": { "p_r1_given_e1": 0.30, "p_r1_given_e0": 0.12 }
//! }
//! ```
//!
//! `probabilities` and `counts` are mutually exclusive. Mediator documents
//! may add a `margins` object with the directly observed Pr(R=1|E=e); it is
//! checked against the margins implied by the mediator table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{
    bounds_basic, bounds_complete_mediator, bounds_confounded, bounds_covariate_conditional,
    bounds_covariate_marginal, bounds_monotone, bounds_partial_mediator, bounds_suffcov_marginal,
    bounds_suffcov_tianpearl, PcInterval,
};
use crate::counts::{estimate_from_counts, CountTable};
use crate::error::{Error, Result};
use crate::oracle::{oracle, CanonicalModel, FeasibleRange};
use crate::prob::{check_margin_consistency, Discrepancy, Prob, TwoArmMargins};
use crate::scenario::{Scenario, ScenarioData};
use crate::simulate::{sample_model, GroundTruthModel};

/// Default tolerance for the mediator margin check.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Slack for comparing oracle and closed-form endpoints.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<TwoArmMargins>,
}

/// Where the probabilities in a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Probabilities,
    Counts,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize to plain JSON")
    }

    /// A probabilities document for `data`; mediator documents also carry
    /// the implied margins so that they pass the consistency check.
    pub fn from_data(data: &ScenarioData) -> Document {
        let margins = match data {
            ScenarioData::CompleteMediator(t) => Some(t.margins()),
            ScenarioData::PartialMediator(t) => Some(t.margins()),
            _ => None,
        };
        Document {
            scenario: data.scenario(),
            probabilities: Some(data.to_json()),
            counts: None,
            margins,
        }
    }

    pub fn from_model(model: &GroundTruthModel) -> Result<Document> {
        Ok(Document::from_data(&model.observables()?))
    }

    /// Validated scenario data, estimating from counts when necessary.
    pub fn data(&self) -> Result<(ScenarioData, Provenance)> {
        match (&self.probabilities, &self.counts) {
            (Some(p), None) => Ok((ScenarioData::from_json(self.scenario, p.clone())?, Provenance::Probabilities)),
            (None, Some(c)) => {
                let data = estimate_from_counts(&CountTable::from_json(self.scenario, c.clone())?)?;
                data.validate()?;
                Ok((data, Provenance::Counts))
            }
            (Some(_), Some(_)) => Err(Error::Validation(
                "`probabilities` and `counts` are mutually exclusive".into(),
            )),
            (None, None) => Err(Error::Validation("document needs `probabilities` or `counts`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    pub scenario: Scenario,
    pub document: Document,
    /// The individual's own covariate level, when it is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
    #[serde(default)]
    pub verify: bool,
    #[serde(default)]
    pub monotone: bool,
    pub tolerance: f64,
    #[serde(default)]
    pub format: OutputFormat,
}

impl AnalysisRequest {
    pub fn new(scenario: Scenario, document: Document) -> Self {
        AnalysisRequest {
            scenario,
            document,
            covariate: None,
            verify: false,
            monotone: false,
            tolerance: DEFAULT_TOLERANCE,
            format: OutputFormat::Text,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.document.scenario != self.scenario {
            return Err(Error::ScenarioMismatch {
                expected: self.scenario.to_string(),
                found: self.document.scenario.to_string(),
            });
        }
        if self.covariate.is_some() && !self.scenario.has_covariate() {
            return Err(Error::Validation(format!(
                "a covariate level only applies to covariate scenarios, not `{}`",
                self.scenario
            )));
        }
        if self.monotone && self.scenario != Scenario::Basic {
            return Err(Error::Validation("monotonicity is only supported for the basic scenario".into()));
        }
        if self.monotone && self.verify {
            return Err(Error::Validation(
                "the oracle does not encode monotonicity; drop --verify or --monotone".into(),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Validation(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.document.margins.is_some() && !self.scenario.has_mediator() {
            return Err(Error::Validation("`margins` only applies to mediator scenarios".into()));
        }
        Ok(())
    }
}

/// Verbatim copy of the request, so a report can be re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub provenance: Provenance,
    pub request: AnalysisRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub scenario: Scenario,
    pub interval: PcInterval,
    /// Confounded-data bounds that ignore the covariate (sufficient covariate only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tian_pearl_baseline: Option<PcInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<FeasibleRange>,
    pub annotation: String,
    pub warnings: Vec<String>,
    pub discrepancies: Vec<Discrepancy>,
    pub input: InputEcho,
}

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_prob(p: Prob) -> Prob {
    Prob::new(round6(p.value()).clamp(0.0, 1.0)).expect("clamped")
}

fn round_interval(b: &PcInterval) -> PcInterval {
    PcInterval {
        lower: round_prob(b.lower),
        upper: round_prob(b.upper),
        lower_source: b.lower_source,
        upper_source: b.upper_source,
        intermediates: b.intermediates.iter().map(|(k, v)| (k.clone(), round6(*v))).collect(),
    }
}

fn round_model(m: &CanonicalModel) -> CanonicalModel {
    let mut m = m.clone();
    for block in &mut m.blocks {
        for atom in &mut block.atoms {
            atom.prob = round_prob(atom.prob);
        }
    }
    m
}

fn round_range(r: &FeasibleRange) -> FeasibleRange {
    FeasibleRange {
        min_pc: round_prob(r.min_pc),
        max_pc: round_prob(r.max_pc),
        argmin: round_model(&r.argmin),
        argmax: round_model(&r.argmax),
    }
}

fn round_discrepancy(d: &Discrepancy) -> Discrepancy {
    Discrepancy {
        exposure: d.exposure,
        implied: round6(d.implied),
        supplied: round6(d.supplied),
        difference: round6(d.difference),
    }
}

/// Balance-of-probabilities reading of an interval.
pub fn annotation(b: &PcInterval) -> &'static str {
    if b.lower.value() > 0.5 {
        "causation established on balance of probabilities (lower > 0.5)"
    } else if b.upper.value() < 0.5 {
        "causation rejected on balance of probabilities (upper < 0.5)"
    } else {
        "indeterminate: cannot reject causation"
    }
}

/// Closed-form bounds for validated data.
fn closed_form(data: &ScenarioData, covariate: Option<&str>, monotone: bool) -> Result<PcInterval> {
    match (data, covariate) {
        (ScenarioData::Basic(m), _) if monotone => bounds_monotone(m),
        (ScenarioData::Basic(m), _) => Ok(bounds_basic(m)),
        (ScenarioData::Confounded(c), _) => bounds_confounded(c),
        (ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t), Some(label)) => {
            bounds_covariate_conditional(t, label)
        }
        (ScenarioData::Covariate(t), None) => bounds_covariate_marginal(t),
        (ScenarioData::SufficientCovariate(t), None) => bounds_suffcov_marginal(t),
        (ScenarioData::CompleteMediator(t), _) => bounds_complete_mediator(t),
        (ScenarioData::PartialMediator(t), _) => bounds_partial_mediator(t),
    }
}

/// Compares the oracle range with the closed form. Endpoints must agree,
/// except for the partial mediator, whose bounds are not known to be sharp:
/// there the oracle range only has to lie inside the interval, and any gap
/// is reported as a warning.
fn verify(data: &ScenarioData, interval: &PcInterval, range: &FeasibleRange, warnings: &mut Vec<String>) -> Result<()> {
    let (lo, hi) = (range.min_pc.value(), range.max_pc.value());
    let (cl, cu) = (interval.lower.value(), interval.upper.value());
    if !interval.encloses(lo, hi, VERIFY_TOLERANCE) {
        return Err(Error::Verification(format!(
            "oracle range [{lo}, {hi}] is not inside the closed-form interval [{cl}, {cu}]"
        )));
    }
    let partial = matches!(data, ScenarioData::PartialMediator(_));
    for (which, bound, attained) in [("lower", cl, lo), ("upper", cu, hi)] {
        if (bound - attained).abs() <= VERIFY_TOLERANCE {
            continue;
        }
        if !partial {
            return Err(Error::Verification(format!(
                "oracle {which} end {attained} differs from the closed-form {which} bound {bound}"
            )));
        }
        warnings.push(format!(
            "{which} bound {} is not attained; the sharp {which} bound is {}",
            round6(bound),
            round6(attained)
        ));
    }
    Ok(())
}

/// Runs one analysis. Deterministic in the request.
pub fn run(request: &AnalysisRequest) -> Result<BoundsReport> {
    request.validate()?;
    let (data, provenance) = request.document.data()?;
    let covariate = request.covariate.as_deref();
    if let (Some(label), ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t)) = (covariate, &data) {
        t.stratum(label)?;
    }
    let interval = closed_form(&data, covariate, request.monotone)?;

    let mut warnings = Vec::new();
    if interval.intermediate("vacuous") == Some(1.0) {
        warnings.push("Pr(R=1|E=1) is zero, so the upper bound carries no information".into());
    }
    if interval.intermediate("partub_exceeds_basic") == Some(1.0) {
        warnings.push(format!(
            "mediator upper bound {} exceeds the basic upper bound; reporting the basic one",
            round6(interval.intermediate("partub_upper").unwrap_or(f64::NAN))
        ));
    }

    let mut discrepancies = Vec::new();
    if let Some(supplied) = &request.document.margins {
        let implied = match &data {
            ScenarioData::CompleteMediator(t) => t.margins(),
            ScenarioData::PartialMediator(t) => t.margins(),
            _ => unreachable!("validated: margins only with mediators"),
        };
        for d in check_margin_consistency(&implied, supplied, request.tolerance) {
            warnings.push(format!(
                "Pr(R=1|E={}) implied by the mediator table is {} but {} was supplied",
                d.exposure,
                round6(d.implied),
                round6(d.supplied)
            ));
            discrepancies.push(round_discrepancy(&d));
        }
    }

    let tian_pearl_baseline = match (&data, covariate) {
        (ScenarioData::SufficientCovariate(t), None) => Some(round_interval(&bounds_suffcov_tianpearl(t)?)),
        _ => None,
    };

    let oracle_range = if request.verify {
        let range = oracle(&data, covariate)?;
        verify(&data, &interval, &range, &mut warnings)?;
        Some(round_range(&range))
    } else {
        None
    };

    Ok(BoundsReport {
        scenario: request.scenario,
        annotation: annotation(&interval).to_string(),
        interval: round_interval(&interval),
        tian_pearl_baseline,
        oracle: oracle_range,
        warnings,
        discrepancies,
        input: InputEcho {
            provenance,
            request: request.clone(),
        },
    })
}

impl BoundsReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize to plain JSON")
    }

    pub fn from_json_str(text: &str) -> Result<BoundsReport> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Re-runs the echoed request.
    pub fn rerun(&self) -> Result<BoundsReport> {
        run(&self.input.request)
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Structured => self.to_json_string(),
            OutputFormat::Text => self.to_text(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let request = &self.input.request;
        let _ = write!(out, "scenario: {}", self.scenario);
        if let Some(x) = &request.covariate {
            let _ = write!(out, " (covariate level {x})");
        }
        if request.monotone {
            out.push_str(" (monotone)");
        }
        let provenance = match self.input.provenance {
            Provenance::Probabilities => "probabilities",
            Provenance::Counts => "counts",
        };
        let _ = writeln!(out, "\ninput: {provenance}");
        let _ = writeln!(out, "PC interval: {}", interval_text(&self.interval));
        let _ = writeln!(
            out,
            "  lower from {}, upper from {}",
            formula_name(&self.interval.lower_source),
            formula_name(&self.interval.upper_source)
        );
        if let Some(b) = &self.tian_pearl_baseline {
            let _ = writeln!(out, "Tian-Pearl baseline: {}", interval_text(b));
        }
        if let Some(r) = &self.oracle {
            let _ = writeln!(out, "oracle range: [{}, {}]", r.min_pc.value(), r.max_pc.value());
        }
        if !self.interval.intermediates.is_empty() {
            out.push_str("intermediates:\n");
            for (k, v) in &self.interval.intermediates {
                let _ = writeln!(out, "  {k} = {v}");
            }
        }
        let _ = writeln!(out, "{}", self.annotation);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn interval_text(b: &PcInterval) -> String {
    format!("[{}, {}]", b.lower.value(), b.upper.value())
}

fn formula_name<T: Serialize>(f: &T) -> String {
    match serde_json::to_value(f) {
        Ok(Value::String(s)) => s,
        _ => "?".into(),
    }
}

/// Compares the `margins` of a mediator document with those implied by its
/// table.
pub fn check_consistency(document: &Document, tolerance: f64) -> Result<Vec<Discrepancy>> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tolerance}")));
    }
    let supplied = document
        .margins
        .as_ref()
        .ok_or_else(|| Error::Validation("document has no `margins` to check".into()))?;
    let implied = match document.data()?.0 {
        ScenarioData::CompleteMediator(t) => t.margins(),
        ScenarioData::PartialMediator(t) => t.margins(),
        other => {
            return Err(Error::Validation(format!(
                "consistency checks need a mediator scenario, not `{}`",
                other.scenario()
            )))
        }
    };
    Ok(check_margin_consistency(&implied, supplied, tolerance)
        .iter()
        .map(round_discrepancy)
        .collect())
}

/// One simulated model checked against the closed-form interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub seed: u64,
    pub true_pc: f64,
    pub lower: f64,
    pub upper: f64,
    pub contained: bool,
}

/// Samples `runs` models starting at `seed` and checks that each true PC
/// lies in the closed-form interval computed from its observables.
pub fn simulate(scenario: Scenario, seed: u64, runs: usize) -> Result<Vec<(GroundTruthModel, SimulationRecord)>> {
    (0..runs as u64)
        .map(|i| {
            let model = sample_model(scenario, seed.wrapping_add(i))?;
            let interval = closed_form(&model.observables()?, None, false)?;
            let t = model.true_pc.value();
            let record = SimulationRecord {
                seed: model.seed,
                true_pc: round6(t),
                lower: round6(interval.lower.value()),
                upper: round6(interval.upper.value()),
                contained: interval.contains(t, VERIFY_TOLERANCE),
            };
            Ok((model, record))
        })
        .collect()
}

/// Tallies of a simulation batch, keyed for display.
pub fn simulation_summary(records: &[SimulationRecord]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    out.insert("runs", records.len());
    out.insert("contained", records.iter().filter(|r| r.contained).count());
    out.insert("violations", records.iter().filter(|r| !r.contained).count());
    out
}
