//! JSON and Graphviz renderings of a machine.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EpsilonMachine;
use crate::symbolize::Symbol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub id: usize,
    pub weight: f64,
    pub predictive: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDocument {
    pub from: usize,
    pub symbol: Symbol,
    pub to: usize,
}

/// `{states[{id, weight, predictive}], transitions[{from, symbol, to}], order, alphabet_size}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineDocument {
    pub states: Vec<StateDocument>,
    pub transitions: Vec<TransitionDocument>,
    pub order: usize,
    pub alphabet_size: usize,
}

impl From<&EpsilonMachine> for MachineDocument {
    fn from(m: &EpsilonMachine) -> Self {
        MachineDocument {
            states: m
                .states
                .iter()
                .map(|s| StateDocument {
                    id: s.id,
                    weight: s.weight,
                    predictive: s.predictive.clone(),
                })
                .collect(),
            transitions: m
                .transitions
                .iter()
                .map(|(&(from, symbol), &to)| TransitionDocument { from, symbol, to })
                .collect(),
            order: m.order,
            alphabet_size: m.alphabet_size,
        }
    }
}

impl EpsilonMachine {
    pub fn to_document(&self) -> MachineDocument {
        MachineDocument::from(self)
    }

    /// Graphviz digraph: nodes labeled with their weight, edges with
    /// `symbol | probability`.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let escaped = name.replace('\\', "\\\\").replace('"', "\\\"");
        writeln!(out, "digraph \"{escaped}\" {{").unwrap();
        writeln!(out, "  rankdir=LR;").unwrap();
        writeln!(out, "  node [shape=circle];").unwrap();
        for s in &self.states {
            writeln!(
                out,
                "  S{} [label=\"S{}\\nw={:.4}\"];",
                s.id, s.id, s.weight
            )
            .unwrap();
        }
        for (&(from, symbol), &to) in &self.transitions {
            let p = self.states[from].predictive[symbol as usize];
            writeln!(out, "  S{from} -> S{to} [label=\"{symbol} | {p:.4}\"];").unwrap();
        }
        out.push_str("}\n");
        out
    }
}
