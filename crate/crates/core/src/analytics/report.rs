// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{band_distribution, round2, BandDistribution, CohortRecord, RubricDimension, ScoreBand};
use crate::scenario::fixture::STAGE_IDS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRate {
    pub stage: String,
    pub correct: usize,
    pub size: usize,
    /// Percent, two decimals.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricRow {
    pub dimension: RubricDimension,
    pub description: String,
    pub responses: usize,
    pub bands: BandDistribution,
}

/// Everything the cohort tables show for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub group: String,
    pub size: usize,
    pub mean_score: Option<f64>,
    pub score_bands: Option<BandDistribution>,
    /// Present when every student has a full S1..S7 map.
    pub stage_correctness: Option<Vec<StageRate>>,
    pub rubric: Vec<RubricRow>,
}

impl CohortReport {
    pub fn build(cohort: &CohortRecord) -> Self {
        let scores = cohort.scores();
        let mean_score = (!scores.is_empty()).then(|| round2(scores.iter().sum::<f64>() / scores.len() as f64));
        let complete_stages =
            !cohort.is_empty() && cohort.students.iter().all(|s| STAGE_IDS.iter().all(|id| s.stages.contains_key(*id)));
        let rubric = RubricDimension::ALL
            .into_iter()
            .filter_map(|dim| {
                let values: Vec<f64> = cohort
                    .students
                    .iter()
                    .filter_map(|s| match dim {
                        RubricDimension::Q1 => s.rubric.q1,
                        RubricDimension::Q2 => s.rubric.q2,
                        RubricDimension::Q3 => s.rubric.q3,
                    })
                    .collect();
                let bands = band_distribution(&values).ok()?;
                Some(RubricRow {
                    dimension: dim,
                    description: dim.description().to_owned(),
                    responses: values.len(),
                    bands,
                })
            })
            .collect();
        Self {
            group: cohort.group.clone(),
            size: cohort.len(),
            mean_score,
            score_bands: band_distribution(&scores).ok(),
            stage_correctness: if complete_stages { cohort.stage_table().ok() } else { None },
            rubric,
        }
    }
}

/// Plain-text tables: band shares per group, then correctness per stage.
pub fn render_text(reports: &[CohortReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Score bands (% of students)");
    let _ = write!(out, "{:<24}", "group");
    for b in ScoreBand::ALL {
        let _ = write!(out, "{:>9}", b.label());
    }
    out.push('\n');
    for r in reports {
        let label = format!("{} (n={})", r.group, r.size);
        if let Some(bands) = &r.score_bands {
            row(&mut out, &format!("{label} score"), &bands.percent);
        }
        for q in &r.rubric {
            row(&mut out, &format!("{label} {:?}", q.dimension), &q.bands.percent);
        }
        if r.score_bands.is_none() && r.rubric.is_empty() {
            let _ = writeln!(out, "{label:<24}{:>9}", "-");
        }
    }

    let with_stages: Vec<_> = reports.iter().filter_map(|r| Some((r, r.stage_correctness.as_ref()?))).collect();
    if !with_stages.is_empty() {
        let _ = writeln!(out, "\nStage correctness rate (%)");
        let _ = write!(out, "{:<24}", "group");
        for s in STAGE_IDS {
            let _ = write!(out, "{s:>9}");
        }
        out.push('\n');
        for (r, stages) in with_stages {
            let rates: Vec<f64> = stages.iter().map(|s| s.rate).collect();
            row(&mut out, &format!("{} (n={})", r.group, r.size), &rates);
        }
    }
    out
}

fn row(out: &mut String, label: &str, values: &[f64]) {
    let _ = write!(out, "{label:<24}");
    for v in values {
        let _ = write!(out, "{v:>9.2}");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::read_cohorts_csv;

    #[test]
    fn report_and_text() {
        let csv = "student_id,group,score,q1,q2,q3,s1,s2,s3,s4,s5,s6,s7\n\
                   a,VR,90,85,,70,1,1,1,1,1,1,1\n\
                   b,VR,30,65,,90,1,0,1,1,1,1,1\n";
        let cohort = &read_cohorts_csv(csv.as_bytes()).unwrap()[0];
        let r = CohortReport::build(cohort);
        assert_eq!(r.mean_score, Some(60.0));
        assert_eq!(r.score_bands.as_ref().unwrap().percent, [0.0, 50.0, 0.0, 0.0, 50.0]);
        assert_eq!(
            r.rubric.iter().map(|q| q.dimension).collect::<Vec<_>>(),
            [RubricDimension::Q1, RubricDimension::Q3]
        );
        assert_eq!(r.stage_correctness.as_ref().unwrap()[1].rate, 50.0);

        let text = render_text(&[r]);
        assert!(text.contains("VR (n=2) score"), "{text}");
        assert!(text.contains("    50.00"), "{text}");
        assert!(text.contains("Stage correctness"), "{text}");
    }

    #[test]
    fn empty_cohort_report() {
        let r = CohortReport::build(&CohortRecord::new("nobody"));
        assert_eq!(r.size, 0);
        assert!(r.score_bands.is_none() && r.stage_correctness.is_none() && r.rubric.is_empty());
        assert!(render_text(&[r]).contains("nobody (n=0)"));
    }
}
