//! Detection and identification bookkeeping in the `k/total` layout.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::library::{Identification, UNIDENTIFIED};
use super::qtest::{Decision, QTest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Ratio {
    pub count: usize,
    pub total: usize,
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.count, self.total)
    }
}

/// Test results for one inspected record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionOutcome {
    pub path_id: String,
    pub state_label: String,
    pub realization_index: usize,
    pub detection: QTest,
    pub identification: Option<Identification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRatio {
    pub state: String,
    pub missed: Ratio,
}

/// Counts of each hypothesis assigned to records of one true damage state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationRow {
    pub true_state: String,
    /// Parallel to [`ConfusionTable::hypotheses`].
    pub assigned: Vec<usize>,
    pub unidentified: usize,
    pub total: usize,
}

impl IdentificationRow {
    /// `(--,0,3,0)`: misassignments per hypothesis, `--` on the diagonal.
    pub fn tuple(&self, hypotheses: &[String]) -> String {
        let cells: Vec<String> = hypotheses
            .iter()
            .zip(&self.assigned)
            .map(|(h, c)| if *h == self.true_state { "--".into() } else { c.to_string() })
            .collect();
        format!("({})", cells.join(","))
    }

    pub fn misclassified(&self, hypotheses: &[String]) -> usize {
        hypotheses
            .iter()
            .zip(&self.assigned)
            .filter(|(h, _)| **h != self.true_state)
            .map(|(_, c)| c)
            .sum::<usize>()
            + self.unidentified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub baseline_label: String,
    pub false_alarms: Ratio,
    pub missed_per_state: Vec<StateRatio>,
    pub hypotheses: Vec<String>,
    pub identification_matrix: Vec<IdentificationRow>,
}

/// Tallies false alarms on the baseline state, missed detections per damage
/// state, and identification assignments. Rows follow `damage_states` order.
pub fn summarize(outcomes: &[InspectionOutcome], baseline_label: &str, damage_states: &[String]) -> ConfusionTable {
    let mut false_alarms = Ratio::default();
    let mut missed: Vec<StateRatio> = damage_states
        .iter()
        .map(|s| StateRatio {
            state: s.clone(),
            missed: Ratio::default(),
        })
        .collect();
    let mut rows: Vec<IdentificationRow> = damage_states
        .iter()
        .map(|s| IdentificationRow {
            true_state: s.clone(),
            assigned: vec![0; damage_states.len()],
            unidentified: 0,
            total: 0,
        })
        .collect();
    for o in outcomes {
        if o.state_label == baseline_label {
            false_alarms.total += 1;
            if o.detection.decision == Decision::Damaged {
                false_alarms.count += 1;
            }
            continue;
        }
        let Some(k) = damage_states.iter().position(|s| *s == o.state_label) else {
            continue;
        };
        missed[k].missed.total += 1;
        if o.detection.decision == Decision::Healthy {
            missed[k].missed.count += 1;
        }
        if let Some(id) = &o.identification {
            rows[k].total += 1;
            match damage_states.iter().position(|s| *s == id.label) {
                Some(j) => rows[k].assigned[j] += 1,
                None => {
                    debug_assert_eq!(id.label, UNIDENTIFIED);
                    rows[k].unidentified += 1
                }
            }
        }
    }
    ConfusionTable {
        baseline_label: baseline_label.to_string(),
        false_alarms,
        missed_per_state: missed,
        hypotheses: damage_states.to_vec(),
        identification_matrix: rows,
    }
}

impl ConfusionTable {
    pub fn all_correct(&self) -> bool {
        self.false_alarms.count == 0
            && self.missed_per_state.iter().all(|m| m.missed.count == 0)
            && self
                .identification_matrix
                .iter()
                .all(|r| r.misclassified(&self.hypotheses) == 0)
    }
}

/// Identifies a table among several written to one CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableKey {
    pub path_id: String,
    pub method: String,
    pub covariance: String,
}

/// One row per table: key columns, `false_alarms`, one `missed:<state>` column
/// per damage state, then one `identification:<state>` tuple column per state.
/// All tables must share their damage-state list.
pub fn write_confusion_csv<W: Write>(tables: &[(TableKey, &ConfusionTable)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some((_, first)) = tables.first() else {
        return Ok(());
    };
    let mut header = vec![
        "path_id".to_string(),
        "method".into(),
        "covariance".into(),
        format!("false_alarms:{}", first.baseline_label),
    ];
    header.extend(first.hypotheses.iter().map(|h| format!("missed:{h}")));
    header.extend(first.hypotheses.iter().map(|h| format!("identification:{h}")));
    header.push("unidentified".into());
    w.write_record(&header)?;
    for (key, t) in tables {
        if t.hypotheses != first.hypotheses {
            return Err(Error::InvalidArgument("tables use different damage states".into()));
        }
        let mut row = vec![
            key.path_id.clone(),
            key.method.clone(),
            key.covariance.clone(),
            t.false_alarms.to_string(),
        ];
        row.extend(t.missed_per_state.iter().map(|m| m.missed.to_string()));
        row.extend(t.identification_matrix.iter().map(|r| r.tuple(&t.hypotheses)));
        row.push(
            t.identification_matrix
                .iter()
                .map(|r| r.unidentified)
                .sum::<usize>()
                .to_string(),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
