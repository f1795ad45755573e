#![allow(dead_code)]

use pc_bounds::prob::{CovariateTable, Prob, Stratum};
use pc_bounds::TwoArmMargins;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic uniform draws for test fixtures.
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn simplex(&mut self, k: usize) -> Vec<f64> {
        let mut cuts: Vec<f64> = (1..k).map(|_| self.uniform()).collect();
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

    pub fn margins(&mut self) -> TwoArmMargins {
        TwoArmMargins::new(self.uniform(), self.uniform()).unwrap()
    }
}

pub fn stratum(label: &str, p_x: f64, e1: Option<f64>, r1: f64, r0: f64) -> Stratum {
    Stratum {
        label: label.into(),
        p_x: Prob::new(p_x).unwrap(),
        p_e1_given_x: e1.map(|v| Prob::new(v).unwrap()),
        p_r1_given_e1: Prob::new(r1).unwrap(),
        p_r1_given_e0: Prob::new(r0).unwrap(),
    }
}

/// Randomized exposure with an equiprobable binary covariate.
pub fn randomized_covariate_example() -> CovariateTable {
    CovariateTable::new(vec![
        stratum("0", 0.5, None, 0.12, 0.24),
        stratum("1", 0.5, None, 0.60, 0.12),
    ])
    .unwrap()
}

/// A covariate that drives both exposure and response.
pub fn sufficient_covariate_example() -> CovariateTable {
    CovariateTable::new(vec![
        stratum("0", 0.5, Some(0.8), 0.8, 0.2),
        stratum("1", 0.5, Some(0.2), 0.2, 0.8),
    ])
    .unwrap()
}

pub fn close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: got {actual}, expected {expected} within {tol}"
    );
}
