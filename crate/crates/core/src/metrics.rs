// SPDX-License-Identifier: Apache-2.0

//! Evaluation quantities over epoch logs and value tables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Outcome;
use crate::table::ValueTable;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty log")]
    Empty,
    #[error("window must be >= 1")]
    Window,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("table has no positive entry")]
    AllZero,
    #[error("table has a negative or non-finite entry")]
    Negative,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One agent-environment interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub episode: u64,
    pub state: usize,
    pub action: usize,
    /// `none` unless the epoch ended the episode.
    pub outcome: Outcome,
    /// Spikes during the action-selection window.
    pub spikes: u64,
    /// Value-circuit spikes during the action-selection window.
    pub ltm_spikes: u64,
    /// Of those, spikes of the current state's value circuits.
    pub ltm_current_spikes: u64,
    /// Every spike in the epoch, including state loading, trajectory
    /// recording and replay.
    pub epoch_spikes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochLog {
    records: Vec<EpochRecord>,
}

impl EpochLog {
    pub fn push(&mut self, record: EpochRecord) {
        debug_assert_eq!(record.epoch, self.records.len() as u64);
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    /// The final `n` records (all of them if fewer).
    pub fn tail(&self, n: usize) -> &[EpochRecord] {
        &self.records[self.records.len().saturating_sub(n)..]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricError> {
        write_epochs_csv(&self.records, w)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, MetricError> {
        let mut rdr = csv::Reader::from_reader(r);
        let records = rdr.deserialize().collect::<Result<Vec<EpochRecord>, _>>()?;
        Ok(Self { records })
    }
}

pub fn write_epochs_csv<W: Write>(records: &[EpochRecord], w: W) -> Result<(), MetricError> {
    let mut wtr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wtr.write_record([
            "epoch",
            "episode",
            "state",
            "action",
            "outcome",
            "spikes",
            "ltm_spikes",
            "ltm_current_spikes",
            "epoch_spikes",
        ])?;
    }
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Mean optimal action per non-overlapping window; a trailing partial window
/// is dropped.
pub fn moa(records: &[EpochRecord], optimal_action: usize, window: usize) -> Result<Vec<f64>, MetricError> {
    if window == 0 {
        return Err(MetricError::Window);
    }
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(records
        .chunks_exact(window)
        .map(|c| c.iter().filter(|r| r.action == optimal_action).count() as f64 / window as f64)
        .collect())
}

/// Fraction of epochs choosing `optimal_action`.
pub fn moa_overall(records: &[EpochRecord], optimal_action: usize) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(records.iter().filter(|r| r.action == optimal_action).count() as f64 / records.len() as f64)
}

/// Mean of `reward -> 1`, `punish -> 0` over the records, ignoring `none`.
pub fn mean_return(records: &[EpochRecord]) -> Option<f64> {
    let scores: Vec<f64> = records.iter().filter_map(|r| r.outcome.score()).collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// [`mean_return`] per non-overlapping window; windows without any reward or
/// punish are `None`.
pub fn average_return(records: &[EpochRecord], window: usize) -> Result<Vec<Option<f64>>, MetricError> {
    if window == 0 {
        return Err(MetricError::Window);
    }
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(records.chunks_exact(window).map(mean_return).collect())
}

fn normalized(t: &ValueTable) -> Result<Vec<f64>, MetricError> {
    if t.values.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(MetricError::Negative);
    }
    let total: f64 = t.values.iter().sum();
    if total <= 0.0 {
        return Err(MetricError::AllZero);
    }
    Ok(t.values.iter().map(|v| v / total).collect())
}

fn entropy_bits(p: impl Iterator<Item = f64>) -> f64 {
    p.filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Jensen-Shannon divergence in bits between two value tables, each
/// normalized to sum 1 over all state-action entries.
pub fn js_divergence(p: &ValueTable, q: &ValueTable) -> Result<f64, MetricError> {
    p.same_shape(q).map_err(|e| MetricError::Shape(e.to_string()))?;
    let p = normalized(p)?;
    let q = normalized(q)?;
    let h_m = entropy_bits(p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)));
    let jsd = h_m - 0.5 * (entropy_bits(p.iter().copied()) + entropy_bits(q.iter().copied()));
    Ok(jsd.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyDiff {
    pub states: Vec<usize>,
    pub fraction: f64,
}

pub fn policy_diff(a: &[usize], b: &[usize]) -> Result<PolicyDiff, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Shape(format!("{} vs {} states", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    let states: Vec<usize> = (0..a.len()).filter(|&s| a[s] != b[s]).collect();
    let fraction = states.len() as f64 / a.len() as f64;
    Ok(PolicyDiff { states, fraction })
}

/// Mean decision-window spike count per epoch.
pub fn spikes_per_epoch(records: &[EpochRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.spikes as f64).sum::<f64>() / records.len() as f64
}

/// Share of value-circuit spikes produced by the current state's circuits.
pub fn current_state_ltm_fraction(records: &[EpochRecord]) -> Option<f64> {
    let all: u64 = records.iter().map(|r| r.ltm_spikes).sum();
    let current: u64 = records.iter().map(|r| r.ltm_current_spikes).sum();
    (all > 0).then(|| current as f64 / all as f64)
}

/// CSV with columns `window_index,value`; missing values are empty fields.
pub fn write_series_csv<W: Write>(series: &[Option<f64>], w: W) -> Result<(), MetricError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["window_index", "value"])?;
    for (i, v) in series.iter().enumerate() {
        wtr.write_record([i.to_string(), v.map(|x| x.to_string()).unwrap_or_default()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(r: R) -> Result<Vec<Option<f64>>, MetricError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let (_, v): (usize, Option<f64>) = row?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: u64, action: usize, outcome: Outcome) -> EpochRecord {
        EpochRecord {
            epoch,
            episode: epoch,
            state: 0,
            action,
            outcome,
            spikes: 0,
            ltm_spikes: 0,
            ltm_current_spikes: 0,
            epoch_spikes: 0,
        }
    }

    #[test]
    fn moa_lengths_and_values() {
        let log: Vec<_> = (0..2000).map(|i| rec(i, 3, Outcome::Reward)).collect();
        let s = moa(&log, 3, 100).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.iter().all(|&v| v == 1.0));
        assert_eq!(moa(&log[..250], 3, 100).unwrap().len(), 2);
        assert!(matches!(moa(&[], 0, 100), Err(MetricError::Empty)));
        assert!(matches!(moa(&log, 0, 0), Err(MetricError::Window)));
    }

    #[test]
    fn average_return_windows() {
        let alt: Vec<_> = (0..200).map(|i| rec(i, 0, if i % 2 == 0 { Outcome::Reward } else { Outcome::Punish })).collect();
        assert_eq!(average_return(&alt, 100).unwrap(), vec![Some(0.5), Some(0.5)]);
        let draws: Vec<_> = (0..100).map(|i| rec(i, 0, Outcome::Neutral)).collect();
        assert_eq!(average_return(&draws, 100).unwrap(), vec![None]);
        let mixed: Vec<_> = (0..4).map(|i| rec(i, 0, [Outcome::Reward, Outcome::Neutral, Outcome::Neutral, Outcome::Reward][i as usize])).collect();
        assert_eq!(average_return(&mixed, 4).unwrap(), vec![Some(1.0)]);
    }

    #[test]
    fn js_worked_example() {
        let p = ValueTable::from_values(1, 2, vec![0.5, 0.5]).unwrap();
        let q = ValueTable::from_values(1, 2, vec![1.0, 0.0]).unwrap();
        assert!((js_divergence(&p, &q).unwrap() - 0.311278).abs() < 1e-6);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let zero = ValueTable::filled(1, 2, 0.0);
        assert!(matches!(js_divergence(&p, &zero), Err(MetricError::AllZero)));
        let other = ValueTable::filled(2, 1, 0.5);
        assert!(matches!(js_divergence(&p, &other), Err(MetricError::Shape(_))));
    }

    #[test]
    fn policy_diff_cases() {
        assert_eq!(policy_diff(&[0, 1, 1], &[0, 1, 1]).unwrap(), PolicyDiff { states: vec![], fraction: 0.0 });
        assert_eq!(policy_diff(&[0, 1], &[1, 0]).unwrap().fraction, 1.0);
        assert!(policy_diff(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let log = EpochLog { records: (0..5).map(|i| rec(i, i as usize % 2, Outcome::Punish)).collect() };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("epoch,episode,state,action,outcome,spikes,"));
        assert_eq!(EpochLog::read_csv(buf.as_slice()).unwrap(), log);

        let series = vec![Some(0.25), None, Some(1.0)];
        let mut buf = Vec::new();
        write_series_csv(&series, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf), "window_index,value\n0,0.25\n1,\n2,1\n");
        assert_eq!(read_series_csv(buf.as_slice()).unwrap(), series);
    }

    #[test]
    fn spike_proxies() {
        assert_eq!(spikes_per_epoch(&[]), 0.0);
        let mut r = rec(0, 0, Outcome::Neutral);
        r.spikes = 10;
        r.ltm_spikes = 400;
        r.ltm_current_spikes = 4;
        assert_eq!(spikes_per_epoch(&[r, r]), 10.0);
        assert_eq!(current_state_ltm_fraction(&[r]), Some(0.01));
        assert_eq!(current_state_ltm_fraction(&[rec(0, 0, Outcome::Neutral)]), None);
    }
}
