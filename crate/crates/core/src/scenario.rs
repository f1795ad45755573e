use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    CompleteMediatorTable, ConfoundedData, CovariateTable, PartialMediatorTable, TwoArmMargins,
};

/// The evidence situations the crate knows how to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Randomized trial margins only.
    #[serde(rename = "basic")]
    Basic,
    /// Experimental control rate plus observational data with possible confounding.
    #[serde(rename = "confounded")]
    Confounded,
    /// Randomized exposure, covariate observed in the data.
    #[serde(rename = "covariate")]
    Covariate,
    /// Covariate that drives both exposure and response.
    #[serde(rename = "suffcov")]
    SufficientCovariate,
    #[serde(rename = "complete-mediator")]
    CompleteMediator,
    #[serde(rename = "partial-mediator")]
    PartialMediator,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Basic,
        Scenario::Confounded,
        Scenario::Covariate,
        Scenario::SufficientCovariate,
        Scenario::CompleteMediator,
        Scenario::PartialMediator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Basic => "basic",
            Scenario::Confounded => "confounded",
            Scenario::Covariate => "covariate",
            Scenario::SufficientCovariate => "suffcov",
            Scenario::CompleteMediator => "complete-mediator",
            Scenario::PartialMediator => "partial-mediator",
        }
    }

    pub fn has_covariate(self) -> bool {
        matches!(self, Scenario::Covariate | Scenario::SufficientCovariate)
    }

    pub fn has_mediator(self) -> bool {
        matches!(self, Scenario::CompleteMediator | Scenario::PartialMediator)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Observable inputs for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioData {
    Basic(TwoArmMargins),
    Confounded(ConfoundedData),
    Covariate(CovariateTable),
    SufficientCovariate(CovariateTable),
    CompleteMediator(CompleteMediatorTable),
    PartialMediator(PartialMediatorTable),
}

impl ScenarioData {
    pub fn scenario(&self) -> Scenario {
        match self {
            ScenarioData::Basic(_) => Scenario::Basic,
            ScenarioData::Confounded(_) => Scenario::Confounded,
            ScenarioData::Covariate(_) => Scenario::Covariate,
            ScenarioData::SufficientCovariate(_) => Scenario::SufficientCovariate,
            ScenarioData::CompleteMediator(_) => Scenario::CompleteMediator,
            ScenarioData::PartialMediator(_) => Scenario::PartialMediator,
        }
    }

    /// Builds scenario data from the JSON `probabilities` section of an
    /// input document, enforcing the exposure-model rule for covariate tables.
    pub fn from_json(scenario: Scenario, value: serde_json::Value) -> Result<Self> {
        fn parse<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
            serde_json::from_value(value).map_err(|e| Error::Validation(e.to_string()))
        }
        let data = match scenario {
            Scenario::Basic => ScenarioData::Basic(parse(value)?),
            Scenario::Confounded => ScenarioData::Confounded(parse(value)?),
            Scenario::Covariate => ScenarioData::Covariate(parse(value)?),
            Scenario::SufficientCovariate => ScenarioData::SufficientCovariate(parse(value)?),
            Scenario::CompleteMediator => ScenarioData::CompleteMediator(parse(value)?),
            Scenario::PartialMediator => ScenarioData::PartialMediator(parse(value)?),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            ScenarioData::Basic(m) => serde_json::to_value(m),
            ScenarioData::Confounded(c) => serde_json::to_value(c),
            ScenarioData::Covariate(t) | ScenarioData::SufficientCovariate(t) => serde_json::to_value(t),
            ScenarioData::CompleteMediator(t) => serde_json::to_value(t),
            ScenarioData::PartialMediator(t) => serde_json::to_value(t),
        };
        v.expect("scenario tables serialize to plain JSON")
    }

    /// Scenario-level invariants not captured by the table types.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioData::Covariate(t) if t.has_exposure_model() => Err(Error::UnexpectedExposureModel),
            ScenarioData::SufficientCovariate(t) if !t.has_exposure_model() => {
                Err(Error::MissingExposureModel)
            }
            _ => Ok(()),
        }
    }
}
