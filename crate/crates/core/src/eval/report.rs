use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{AttackOutcome, MetricsReport};
use super::spam::Screening;

/// Metrics and screening for one outcomes file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub label: String,
    pub metrics: MetricsReport,
    pub screening: Option<Screening>,
    pub outcomes: Vec<AttackOutcome>,
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

/// Summary rows, one per report, with right-aligned columns.
pub fn render_summary(reports: &[Report]) -> String {
    let ks: Vec<usize> = reports
        .first()
        .map(|r| r.metrics.top_k.iter().map(|&(k, _)| k).collect())
        .unwrap_or_default();
    let mut header = vec!["run".to_string(), "n".into(), "ASR%".into(), "Boost".into()];
    header.extend(ks.iter().map(|k| format!("T{k}R%")));
    header.push("budget".into());
    let has_screen = reports.iter().any(|r| r.screening.is_some());
    if has_screen {
        header.extend(["spam".into(), "PPLx".into()]);
    }
    let mut rows = vec![header];
    for r in reports {
        let m = &r.metrics;
        let mut row = vec![r.label.clone(), m.n.to_string(), pct(m.asr), format!("{:.2}", m.boost)];
        row.extend(ks.iter().map(|&k| m.top(k).map(pct).unwrap_or_else(|| "-".into())));
        row.push(format!("{:.2}", m.mean_budget));
        if has_screen {
            match &r.screening {
                Some(s) => row.extend([format!("{:.4}", s.mean_spamicity), format!("{:.3}", s.mean_ppl_ratio)]),
                None => row.extend(["-".into(), "-".into()]),
            }
        }
        rows.push(row);
    }
    align(&rows)
}

/// Per-outcome rows for a single report.
pub fn render_outcomes(report: &Report) -> String {
    let mut rows = vec![["query", "doc", "before", "after", "boost", "budget", "W/P/S"].map(String::from).to_vec()];
    for o in &report.outcomes {
        rows.push(vec![
            o.query_id.clone(),
            o.doc_id.clone(),
            o.rank_before.to_string(),
            o.rank_after.to_string(),
            format!("{:+}", o.rank_before as i64 - o.rank_after as i64),
            o.budget.to_string(),
            format!("{}/{}/{}", o.counts[0], o.counts[1], o.counts[2]),
        ]);
    }
    align(&rows)
}

/// Screening rates per threshold.
pub fn render_screening(s: &Screening) -> String {
    let mut rows = vec![vec!["threshold".to_string(), "flagged%".into()]];
    rows.extend(s.rates.iter().map(|&(t, r)| vec![format!("{t:.4}"), pct(r)]));
    let mut out = align(&rows);
    let _ = writeln!(
        out,
        "perplexity original {:.3} attacked {:.3} ratio {:.3}",
        s.mean_ppl_original, s.mean_ppl_attacked, s.mean_ppl_ratio
    );
    out
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::compute_metrics;

    fn outcome(before: usize, after: usize) -> AttackOutcome {
        AttackOutcome {
            query_id: "q1".into(),
            doc_id: format!("d{before}"),
            rank_before: before,
            rank_after: after,
            budget: 7,
            counts: [1, 1, 0],
            mode: "full".into(),
            adversarial_text: String::new(),
        }
    }

    #[test]
    fn summary_columns_line_up() {
        let outs = vec![outcome(40, 10), outcome(90, 95), outcome(60, 60)];
        let metrics = compute_metrics(&outs, &[5, 10]).unwrap();
        let report = Report {
            label: "full".into(),
            metrics,
            screening: None,
            outcomes: outs,
        };
        let text = render_summary(&[report.clone()]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("run"));
        assert!(lines[1].contains("33.33"));
        assert!(lines[1].contains("8.33"));
        assert_eq!(lines[0].len(), lines[1].len());
        let table = render_outcomes(&report);
        assert!(table.contains("+30"));
        assert!(table.contains("-5"));
    }
}
