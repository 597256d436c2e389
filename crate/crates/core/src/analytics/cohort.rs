// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::scenario::fixture::STAGE_IDS;
use crate::session::{Rubric, ScoreReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentResult {
    pub student_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub rubric: Rubric,
    /// Stage id → completed without error.
    #[serde(default)]
    pub stages: BTreeMap<String, bool>,
}

impl StudentResult {
    pub fn from_report(student_id: impl Into<String>, report: &ScoreReport) -> Self {
        Self {
            student_id: student_id.into(),
            score: Some(report.score),
            rubric: report.rubric.clone(),
            stages: report.stages.clone(),
        }
    }
}

/// Results of one group (e.g. `VR`, `Traditional`, `T1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub group: String,
    pub students: Vec<StudentResult>,
}

impl CohortRecord {
    pub fn new(group: impl Into<String>) -> Self {
        Self { group: group.into(), students: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.students.len()
    }

    pub fn is_empty(&self) -> bool {
        self.students.is_empty()
    }

    /// Adds a student; ids must be unique within the cohort.
    pub fn push(&mut self, student: StudentResult) -> Result<(), String> {
        if self.students.iter().any(|s| s.student_id == student.student_id) {
            return Err(format!("duplicate student `{}` in group `{}`", student.student_id, self.group));
        }
        self.students.push(student);
        Ok(())
    }

    pub fn scores(&self) -> Vec<f64> {
        self.students.iter().filter_map(|s| s.score).collect()
    }

    pub fn band_distribution(&self) -> Result<super::BandDistribution, AnalyticsError> {
        super::band_distribution(&self.scores())
    }

    pub fn stage_table(&self) -> Result<Vec<super::StageRate>, AnalyticsError> {
        if self.is_empty() {
            return Err(AnalyticsError::EmptyCohort);
        }
        super::stage_correctness_table(self.students.iter().map(|s| (s.student_id.as_str(), &s.stages)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

#[derive(Debug, Deserialize)]
struct Row {
    student_id: String,
    group: String,
    score: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    q3: Option<f64>,
    s1: Option<u8>,
    s2: Option<u8>,
    s3: Option<u8>,
    s4: Option<u8>,
    s5: Option<u8>,
    s6: Option<u8>,
    s7: Option<u8>,
}

/// Reads `student_id,group,score,q1,q2,q3,s1..s7` rows, grouped by `group`
/// in order of first appearance. Empty cells mean "not recorded"; stage
/// cells are `0` or `1`.
pub fn read_cohorts_csv<R: Read>(input: R) -> Result<Vec<CohortRecord>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut cohorts: Vec<CohortRecord> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        let line = i + 2;
        let err = |message: String| CsvError::Row { row: line, message };
        if row.student_id.is_empty() || row.group.is_empty() {
            return Err(err("student_id and group are required".into()));
        }
        for (name, v) in [("score", row.score), ("q1", row.q1), ("q2", row.q2), ("q3", row.q3)] {
            if let Some(v) = v {
                if !(0.0..=100.0).contains(&v) {
                    return Err(err(format!("{name} {v} is outside [0, 100]")));
                }
            }
        }
        let cells = [row.s1, row.s2, row.s3, row.s4, row.s5, row.s6, row.s7];
        let mut stages = BTreeMap::new();
        for (stage, cell) in STAGE_IDS.iter().zip(cells) {
            match cell {
                None => {}
                Some(v @ (0 | 1)) => {
                    stages.insert((*stage).to_owned(), v == 1);
                }
                Some(v) => return Err(err(format!("{} must be 0 or 1, got {v}", stage.to_lowercase()))),
            }
        }
        if !seen.insert((row.group.clone(), row.student_id.clone())) {
            return Err(err(format!("duplicate student `{}` in group `{}`", row.student_id, row.group)));
        }
        let idx = match cohorts.iter().position(|c| c.group == row.group) {
            Some(idx) => idx,
            None => {
                cohorts.push(CohortRecord::new(row.group.clone()));
                cohorts.len() - 1
            }
        };
        cohorts[idx].students.push(StudentResult {
            student_id: row.student_id,
            score: row.score,
            rubric: Rubric { q1: row.q1, q2: row.q2, q3: row.q3 },
            stages,
        });
    }
    Ok(cohorts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
student_id,group,score,q1,q2,q3,s1,s2,s3,s4,s5,s6,s7
a,VR,88,90,85,70,1,1,1,1,1,1,1
b,VR,45.5,,,,1,0,1,1,1,1,0
c,Traditional,12,10,20,30,0,0,0,0,0,0,0
";

    #[test]
    fn groups_in_first_appearance_order() {
        let cohorts = read_cohorts_csv(CSV.as_bytes()).unwrap();
        assert_eq!(cohorts.iter().map(|c| c.group.as_str()).collect::<Vec<_>>(), ["VR", "Traditional"]);
        assert_eq!(cohorts[0].len(), 2);
        assert_eq!(cohorts[0].students[1].rubric, Rubric::default());
        assert!(!cohorts[0].students[1].stages["S2"]);
        let rates: Vec<f64> = cohorts[0].stage_table().unwrap().iter().map(|r| r.rate).collect();
        assert_eq!(rates, [100.0, 50.0, 100.0, 100.0, 100.0, 100.0, 50.0]);
    }

    #[test]
    fn rejects_bad_stage_cell() {
        let bad = CSV.replace("a,VR,88,90,85,70,1,1,1", "a,VR,88,90,85,70,1,2,1");
        assert!(matches!(read_cohorts_csv(bad.as_bytes()), Err(CsvError::Row { row: 2, .. })));
    }

    #[test]
    fn rejects_duplicate_student() {
        let dup = format!("{CSV}a,VR,1,,,,,,,,,,\n");
        assert!(matches!(read_cohorts_csv(dup.as_bytes()), Err(CsvError::Row { row: 5, .. })));
    }

    #[test]
    fn rejects_out_of_range_score() {
        let bad = CSV.replace("c,Traditional,12", "c,Traditional,120");
        assert!(read_cohorts_csv(bad.as_bytes()).is_err());
    }
}
