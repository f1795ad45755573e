use serde::{Deserialize, Serialize};

use crate::prob::Prob;

/// One potential-response configuration and its probability. `config[k]`
/// is the value of the block's `k`-th variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub config: Vec<u8>,
    pub prob: Prob,
}

/// Distribution over all configurations of a set of binary potential
/// responses, e.g. `(R0, R1)` or `(M0, M1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub variables: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl Block {
    /// Atom `i` assigns variable `k` the value of bit `k` of `i`.
    pub fn from_dense(label: impl Into<String>, variables: &[&str], probs: &[f64]) -> Block {
        assert_eq!(probs.len(), 1 << variables.len(), "one probability per configuration");
        let atoms = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| Atom {
                config: (0..variables.len()).map(|k| ((i >> k) & 1) as u8).collect(),
                prob: Prob::snapped(p, 1e-9).expect("vertex coordinates are probabilities"),
            })
            .collect();
        Block {
            label: label.into(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            atoms,
        }
    }

    /// A single variable taking values `0..probs.len()`, e.g. a covariate
    /// with more than two levels.
    pub fn categorical(label: impl Into<String>, variable: &str, probs: &[f64]) -> Block {
        assert!(probs.len() <= 256, "too many levels");
        Block {
            label: label.into(),
            variables: vec![variable.to_string()],
            atoms: probs
                .iter()
                .enumerate()
                .map(|(i, &p)| Atom {
                    config: vec![i as u8],
                    prob: Prob::snapped(p, 1e-9).expect("level weights are probabilities"),
                })
                .collect(),
        }
    }

    /// Probabilities in dense bit-indexed order. Binary blocks only.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.variables.len()];
        for atom in &self.atoms {
            assert!(atom.config.iter().all(|&v| v <= 1), "dense layout needs binary variables");
            let idx = atom
                .config
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &v)| acc | ((v as usize) << k));
            out[idx] += atom.prob.value();
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob.value()).sum()
    }

    /// Pr(variable = 1) within this block.
    pub fn marginal(&self, variable: &str) -> Option<f64> {
        let k = self.variables.iter().position(|v| v == variable)?;
        Some(
            self.atoms
                .iter()
                .filter(|a| a.config[k] == 1)
                .map(|a| a.prob.value())
                .sum(),
        )
    }
}

/// Finite-atom distribution over potential responses, as a list of
/// mutually independent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalModel {
    pub blocks: Vec<Block>,
}

impl CanonicalModel {
    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_marginals() {
        let b = Block::from_dense("response", &["R0", "R1"], &[0.58, 0.12, 0.3, 0.0]);
        assert_eq!(b.atoms[1].config, vec![1, 0]);
        assert_eq!(b.dense(), vec![0.58, 0.12, 0.3, 0.0]);
        assert!((b.marginal("R0").unwrap() - 0.12).abs() < 1e-15);
        assert!((b.marginal("R1").unwrap() - 0.3).abs() < 1e-15);
        assert!(b.marginal("M0").is_none());
        assert!((b.total() - 1.0).abs() < 1e-15);
    }
}
