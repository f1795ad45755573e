//! Bounds on the probability of causation, PC = Pr(R_0 = 0 | E = 1, R_1 = 1):
//! the chance that an exposed individual who showed the response would not
//! have shown it without the exposure.
//!
//! * [`bounds`] has the closed-form intervals for each evidence scenario.
//! * [`oracle`] re-derives the same intervals by exact optimization over all
//!   potential-outcome distributions consistent with the data.
//! * [`simulate`] draws random ground-truth models with known PC.
//! * [`report`] parses input documents and produces reports.

pub mod bounds;
pub mod counts;
pub mod error;
pub mod oracle;
pub mod prob;
pub mod report;
pub mod scenario;
pub mod simulate;

pub use bounds::{Formula, PcInterval};
pub use error::{Error, ErrorKind, Result};
pub use prob::{Prob, TwoArmMargins};
pub use scenario::{Scenario, ScenarioData};
