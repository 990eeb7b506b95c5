//! Summary reporting: merge run summaries into a cost-sorted CSV with
//! Pareto-frontier membership.

use crate::pareto::{pareto_frontier, ParetoPoint};
use crate::runner::Summary;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("a report needs at least one summary")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Rows sorted by total cost ascending.
    pub points: Vec<ParetoPoint>,
    pub csv: String,
}

pub const CSV_HEADER: &str = "mode,task,model,n_items,accuracy,total_cost_usd,on_frontier";

fn point_label(summary: &Summary) -> String {
    format!(
        "{}/{}/{}",
        summary.task,
        summary.mode.as_str(),
        summary.model_id
    )
}

/// Build the merged report: one CSV row per summary, cost ascending, with
/// frontier membership from the dominance check.
pub fn summarize_report(summaries: &[Summary]) -> Result<Report, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::Empty);
    }
    let points: Vec<ParetoPoint> = summaries
        .iter()
        .map(|s| ParetoPoint::new(point_label(s), s.total_cost, s.accuracy))
        .collect();
    let marked = pareto_frontier(&points);

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for point in &marked {
        let summary = summaries
            .iter()
            .find(|s| point_label(s) == point.label)
            .expect("every point has a source summary");
        csv.push_str(&format!(
            "{},{},{},{},{:.6},{},{}\n",
            summary.mode.as_str(),
            summary.task,
            summary.model_id,
            summary.n_items,
            summary.accuracy,
            summary.total_cost.to_decimal_string(),
            !point.dominated,
        ));
    }
    Ok(Report {
        points: marked,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::PromptMode;
    use crate::gateway::Usd;
    use crate::task::TaskId;

    fn summary(mode: PromptMode, cost_nano: u128, accuracy: f64) -> Summary {
        Summary {
            task: TaskId::Aqua,
            mode,
            model_id: "gpt-4".into(),
            ensemble_size: 5,
            n_items: 5,
            n_correct: (accuracy * 5.0).round() as usize,
            accuracy,
            total_cost: Usd::from_nano(cost_nano),
            per_pair_accuracy: vec![],
            truncated: false,
        }
    }

    #[test]
    fn single_summary_yields_one_row() {
        let report = summarize_report(&[summary(PromptMode::CotZs, 10, 0.6)]).unwrap();
        let lines: Vec<&str> = report.csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("cot_zs,aqua,gpt-4,5,0.600000,"));
        assert!(lines[1].ends_with(",true"));
    }

    #[test]
    fn rows_sort_by_cost_and_mark_the_frontier() {
        let report = summarize_report(&[
            summary(PromptMode::Sc, 30, 0.55),
            summary(PromptMode::CotZs, 10, 0.6),
            summary(PromptMode::DivSe, 20, 0.8),
        ])
        .unwrap();
        let lines: Vec<&str> = report.csv.trim_end().lines().collect();
        assert!(lines[1].starts_with("cot_zs"));
        assert!(lines[2].starts_with("div_se"));
        assert!(lines[3].starts_with("sc"));
        // the SC run is dominated by the cheaper, better ensemble run
        assert!(lines[3].ends_with(",false"));
        assert!(lines[1].ends_with(",true"));
        assert!(lines[2].ends_with(",true"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(summarize_report(&[]), Err(ReportError::Empty));
    }
}
