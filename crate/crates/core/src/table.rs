// SPDX-License-Identifier: Apache-2.0

//! Tabular state-action values and greedy policies, with their CSV forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Real-valued estimates over `(state, action)` with visit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ValueRow {
    state: usize,
    action: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyRow {
    state: usize,
    greedy_action: usize,
}

impl ValueTable {
    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
            counts: vec![0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self, TableError> {
        if values.len() != n_states * n_actions {
            return Err(TableError::Shape(format!("{} values for {n_states}x{n_actions}", values.len())));
        }
        Ok(Self { n_states, n_actions, counts: vec![0; values.len()], values })
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Greedy action per state; ties go to the lowest action index.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s);
                let mut best = 0;
                for (a, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }

    pub fn same_shape(&self, other: &ValueTable) -> Result<(), TableError> {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return Err(TableError::Shape(format!(
                "{}x{} vs {}x{}",
                self.n_states, self.n_actions, other.n_states, other.n_actions
            )));
        }
        Ok(())
    }

    /// CSV with columns `state,action,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TableError> {
        let mut out = csv::Writer::from_writer(w);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.serialize(ValueRow { state: s, action: a, value: self.get(s, a) })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a `state,action,value` CSV; the shape is taken from the largest indices.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TableError> {
        let rows: Vec<ValueRow> = csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?;
        let n_states = rows.iter().map(|r| r.state + 1).max().unwrap_or(0);
        let n_actions = rows.iter().map(|r| r.action + 1).max().unwrap_or(0);
        let mut t = Self::filled(n_states, n_actions, 0.0);
        if rows.len() != n_states * n_actions {
            return Err(TableError::Shape(format!("{} rows for {n_states}x{n_actions}", rows.len())));
        }
        for r in rows {
            t.set(r.state, r.action, r.value);
        }
        Ok(t)
    }
}

/// CSV with columns `state,greedy_action`.
pub fn write_policy_csv<W: Write>(policy: &[usize], w: W) -> Result<(), TableError> {
    let mut out = csv::Writer::from_writer(w);
    for (state, &greedy_action) in policy.iter().enumerate() {
        out.serialize(PolicyRow { state, greedy_action })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_policy_csv<R: Read>(r: R) -> Result<Vec<usize>, TableError> {
    let rows: Vec<PolicyRow> = csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?;
    let mut policy = vec![0; rows.len()];
    for row in rows {
        *policy
            .get_mut(row.state)
            .ok_or_else(|| TableError::Shape(format!("state {} out of range", row.state)))? = row.greedy_action;
    }
    Ok(policy)
}
