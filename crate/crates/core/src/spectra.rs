//! Program spectra and element-level suspiciousness (Tarantula, Ochiai, D*).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub test_id: String,
    pub outcome: Outcome,
    pub executed: BTreeSet<String>,
}

/// The pass/fail traces recorded for one bug. Always has a failing trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSpectra {
    bug_id: String,
    traces: Vec<ExecutionTrace>,
    n_fail: usize,
    n_pass: usize,
}

/// Table 1 counts for one element: executed/not executed by failing/passing tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStats {
    pub failed_executed: usize,
    pub passed_executed: usize,
    pub failed_not_executed: usize,
    pub passed_not_executed: usize,
}

impl RawStats {
    pub fn total_failed(&self) -> usize {
        self.failed_executed + self.failed_not_executed
    }

    pub fn total_passed(&self) -> usize {
        self.passed_executed + self.passed_not_executed
    }

    /// Tarantula suspiciousness. With no passing tests the passing ratio is
    /// taken as 0; an element executed by nothing scores 0.
    pub fn tarantula(&self) -> f64 {
        tarantula_ratio(
            self.failed_executed,
            self.total_failed(),
            self.passed_executed,
            self.total_passed(),
        )
    }

    pub fn ochiai(&self) -> f64 {
        let denom =
            (self.total_failed() as f64 * (self.failed_executed + self.passed_executed) as f64)
                .sqrt();
        if denom == 0.0 {
            0.0
        } else {
            self.failed_executed as f64 / denom
        }
    }

    /// D* with the given exponent. Returns `f64::INFINITY` when the element
    /// is executed by every failing test and no passing test.
    pub fn dstar(&self, star: u32) -> f64 {
        let numer = (self.failed_executed as f64).powi(star as i32);
        let denom = (self.passed_executed + self.failed_not_executed) as f64;
        if denom == 0.0 {
            if numer == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            numer / denom
        }
    }
}

/// Shared Tarantula-shaped ratio, also used for word suspiciousness.
pub(crate) fn tarantula_ratio(fail_hit: usize, fail_total: usize, pass_hit: usize, pass_total: usize) -> f64 {
    if fail_total == 0 {
        return 0.0;
    }
    let fail_ratio = fail_hit as f64 / fail_total as f64;
    let pass_ratio = if pass_total == 0 {
        0.0
    } else {
        pass_hit as f64 / pass_total as f64
    };
    let denom = fail_ratio + pass_ratio;
    if denom == 0.0 {
        0.0
    } else {
        fail_ratio / denom
    }
}

impl ProgramSpectra {
    pub fn new(bug_id: impl Into<String>, traces: Vec<ExecutionTrace>) -> Result<Self> {
        let bug_id = bug_id.into();
        let n_fail = traces.iter().filter(|t| t.outcome == Outcome::Fail).count();
        if n_fail == 0 {
            return Err(Error::MalformedSpectra {
                bug_id,
                reason: "no failing trace".into(),
            });
        }
        let n_pass = traces.len() - n_fail;
        Ok(Self {
            bug_id,
            traces,
            n_fail,
            n_pass,
        })
    }

    pub fn bug_id(&self) -> &str {
        &self.bug_id
    }

    pub fn traces(&self) -> &[ExecutionTrace] {
        &self.traces
    }

    pub fn n_fail(&self) -> usize {
        self.n_fail
    }

    pub fn n_pass(&self) -> usize {
        self.n_pass
    }

    pub fn raw_stats(&self, element: &str) -> RawStats {
        let mut failed_executed = 0;
        let mut passed_executed = 0;
        for t in &self.traces {
            if t.executed.contains(element) {
                match t.outcome {
                    Outcome::Fail => failed_executed += 1,
                    Outcome::Pass => passed_executed += 1,
                }
            }
        }
        RawStats {
            failed_executed,
            passed_executed,
            failed_not_executed: self.n_fail - failed_executed,
            passed_not_executed: self.n_pass - passed_executed,
        }
    }

    /// Raw statistics for every element executed by at least one trace.
    /// Elements missing from the map have stats `(0, 0, n_f, n_s)`.
    pub fn stats_table(&self) -> BTreeMap<&str, RawStats> {
        let mut table: BTreeMap<&str, RawStats> = BTreeMap::new();
        for t in &self.traces {
            for e in &t.executed {
                let s = table.entry(e.as_str()).or_default();
                match t.outcome {
                    Outcome::Fail => s.failed_executed += 1,
                    Outcome::Pass => s.passed_executed += 1,
                }
            }
        }
        for s in table.values_mut() {
            s.failed_not_executed = self.n_fail - s.failed_executed;
            s.passed_not_executed = self.n_pass - s.passed_executed;
        }
        table
    }

    pub fn unexecuted_stats(&self) -> RawStats {
        RawStats {
            failed_executed: 0,
            passed_executed: 0,
            failed_not_executed: self.n_fail,
            passed_not_executed: self.n_pass,
        }
    }

    pub fn tarantula(&self, element: &str) -> f64 {
        self.raw_stats(element).tarantula()
    }

    pub fn ochiai(&self, element: &str) -> f64 {
        self.raw_stats(element).ochiai()
    }

    pub fn dstar(&self, element: &str, star: u32) -> f64 {
        self.raw_stats(element).dstar(star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SbflFormula {
    Tarantula,
    Ochiai,
    Dstar,
}

/// Scores every element of `elements` under `formula`. Infinite D* scores are
/// replaced by `f64::MAX` so they rank first while staying finite.
pub fn score_elements<'a, I>(
    spectra: &ProgramSpectra,
    elements: I,
    formula: SbflFormula,
    star: u32,
) -> Vec<(&'a str, f64)>
where
    I: IntoIterator<Item = &'a str>,
{
    let table = spectra.stats_table();
    let unexecuted = spectra.unexecuted_stats();
    elements
        .into_iter()
        .map(|e| {
            let s = table.get(e).copied().unwrap_or(unexecuted);
            let score = match formula {
                SbflFormula::Tarantula => s.tarantula(),
                SbflFormula::Ochiai => s.ochiai(),
                SbflFormula::Dstar => s.dstar(star),
            };
            (e, if score.is_infinite() { f64::MAX } else { score })
        })
        .collect()
}
