//! Report emission: machine-readable results CSV and JSON summary,
//! per-scarcity F1-delta tables (method minus scarce baseline), anomaly
//! score plots with threshold lines and incident shading, and
//! representativeness 2D histograms of training vs test data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::{
    apply_scarcity, split_70_30_30, Channel, ScadaSeries,
};

use super::f1::EvalError;
use super::matrix::{CellOutcome, MethodId, TurbineData};
use super::plot::{histogram2d_svg, score_plot_svg};

fn write(path: &Path, content: &str) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    std::fs::write(path, content).map_err(io_err)
}

/// `pair,weeks,method,F1,TP,FP,FN,TN` over every evaluated method run.
pub fn results_csv(outcomes: &[CellOutcome]) -> String {
    let mut out = String::from("pair,weeks,method,F1,TP,FP,FN,TN\n");
    for cell in outcomes {
        for run in &cell.runs {
            if let Some(r) = &run.report {
                out.push_str(&format!(
                    "{}:{},{},{},{:.4},{},{},{},{}\n",
                    cell.source_id,
                    cell.target_id,
                    cell.weeks,
                    run.method.as_str(),
                    r.f1,
                    r.tp,
                    r.fp,
                    r.fn_,
                    r.tn
                ));
            }
        }
    }
    out
}

/// Per-scarcity delta table: one row per pair, F1 change of fine-tuning and
/// domain mapping relative to the scarce-only baseline (percentage points).
pub fn delta_csv(outcomes: &[CellOutcome], weeks: u32) -> String {
    let mut out = String::from("target,source,scarce_f1,fine_tune_delta,domain_map_delta\n");
    for cell in outcomes.iter().filter(|c| c.weeks == weeks) {
        let f1 = |m: MethodId| -> Option<f64> {
            cell.runs
                .iter()
                .find(|r| r.method == m)
                .and_then(|r| r.report.as_ref())
                .map(|r| r.f1)
        };
        let (Some(scarce), Some(ft), Some(dm)) =
            (f1(MethodId::Scarce), f1(MethodId::FineTune), f1(MethodId::DomainMap))
        else {
            continue;
        };
        out.push_str(&format!(
            "{},{},{:.1},{:+.1},{:+.1}\n",
            cell.target_id,
            cell.source_id,
            scarce * 100.0,
            (ft - scarce) * 100.0,
            (dm - scarce) * 100.0
        ));
    }
    out
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    pair: String,
    weeks: u32,
    method: &'a str,
    threshold: f64,
    f1_vs_ground_truth: Option<f64>,
    f1_vs_labels: Option<f64>,
    tp: Option<usize>,
    fp: Option<usize>,
    #[serde(rename = "fn")]
    fn_: Option<usize>,
    tn: Option<usize>,
    degenerate: Option<bool>,
    test_windows: usize,
}

/// Machine-readable summary of every run in the matrix.
pub fn summary_json(outcomes: &[CellOutcome]) -> String {
    let rows: Vec<SummaryRow> = outcomes
        .iter()
        .flat_map(|cell| {
            cell.runs.iter().map(move |run| SummaryRow {
                pair: format!("{}:{}", cell.source_id, cell.target_id),
                weeks: cell.weeks,
                method: run.method.as_str(),
                threshold: run.threshold,
                f1_vs_ground_truth: run.report.as_ref().map(|r| r.f1),
                f1_vs_labels: run.label_report.as_ref().map(|r| r.f1),
                tp: run.report.as_ref().map(|r| r.tp),
                fp: run.report.as_ref().map(|r| r.fp),
                fn_: run.report.as_ref().map(|r| r.fn_),
                tn: run.report.as_ref().map(|r| r.tn),
                degenerate: run.report.as_ref().map(|r| r.degenerate),
                test_windows: cell.window_starts.len(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("summary serializes")
}

/// Representativeness histogram panels for one target turbine and scarcity:
/// full training vs scarce training vs (unfiltered) test, on the channel
/// pairs (rotor speed, rotor temperature) and (wind speed, stator
/// temperature).
fn representativeness_svgs(series: &ScadaSeries, weeks: u32) -> Result<Vec<(String, String)>, EvalError> {
    let full = split_70_30_30(series).map_err(|_| EvalError::NoReports)?;
    let scarce = apply_scarcity(&full, weeks).ok();
    let collect = |s: &ScadaSeries, cx: Channel, cy: Channel| -> Vec<(f64, f64)> {
        s.records.iter().map(|r| (r.value(cx), r.value(cy))).collect()
    };
    let mut out = Vec::new();
    for (name, cx, cy) in [
        ("rotor_speed_vs_rotor_temp", Channel::RotorMean, Channel::RotorTemp),
        ("wind_speed_vs_stator_temp", Channel::WindMean, Channel::StatorTemp),
    ] {
        let mut panels = vec![(
            "full training".to_string(),
            [collect(&full.train, cx, cy), collect(&full.validation, cx, cy)].concat(),
        )];
        if let Some(sc) = &scarce {
            panels.push((
                format!("{weeks}-week training"),
                [collect(&sc.train, cx, cy), collect(&sc.validation, cx, cy)].concat(),
            ));
        }
        panels.push(("test".to_string(), collect(&full.test, cx, cy)));
        let svg = histogram2d_svg(
            &format!("{} - {}", series.turbine_id, name.replace('_', " ")),
            cx.csv_name(),
            cy.csv_name(),
            &panels,
        );
        out.push((name.to_string(), svg));
    }
    Ok(out)
}

/// Write the full report set for a finished matrix. Returns the list of
/// files written.
pub fn emit_report(
    out_dir: &Path,
    outcomes: &[CellOutcome],
    data: &BTreeMap<String, TurbineData>,
) -> Result<Vec<PathBuf>, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::NoReports);
    }
    let report_dir = out_dir.join("report");
    let mut written = Vec::new();

    let path = report_dir.join("results.csv");
    write(&path, &results_csv(outcomes))?;
    written.push(path);

    let mut weeks: Vec<u32> = outcomes.iter().map(|c| c.weeks).collect();
    weeks.sort_unstable();
    weeks.dedup();
    for w in &weeks {
        let path = report_dir.join(format!("f1_deltas_w{w}.csv"));
        write(&path, &delta_csv(outcomes, *w))?;
        written.push(path);
    }

    let path = report_dir.join("summary.json");
    write(&path, &summary_json(outcomes))?;
    written.push(path);

    // anomaly-score plots, one per run
    for cell in outcomes {
        for run in &cell.runs {
            let title = format!(
                "{}→{} w{} {} (T={:.4}{})",
                cell.source_id,
                cell.target_id,
                cell.weeks,
                run.method.as_str(),
                run.threshold,
                run.report
                    .as_ref()
                    .map(|r| format!(", F1={:.3}", r.f1))
                    .unwrap_or_default()
            );
            let svg = score_plot_svg(&title, &run.scores, run.threshold, &cell.window_incidents);
            let path = report_dir.join("plots").join(format!(
                "{}__{}__w{}__{}.svg",
                cell.source_id,
                cell.target_id,
                cell.weeks,
                run.method.as_str()
            ));
            write(&path, &svg)?;
            written.push(path);
        }
    }

    // representativeness histograms per (target, weeks)
    let mut seen = std::collections::BTreeSet::new();
    for cell in outcomes {
        if !seen.insert((cell.target_id.clone(), cell.weeks)) {
            continue;
        }
        if let Some(t) = data.get(&cell.target_id) {
            for (name, svg) in representativeness_svgs(&t.series, cell.weeks)? {
                let path = report_dir
                    .join("histograms")
                    .join(format!("{}__w{}__{}.svg", cell.target_id, cell.weeks, name));
                write(&path, &svg)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::super::f1::EvaluationReport;
    use super::super::matrix::{CellOutcome, MethodId, MethodRun};
    use super::*;

    fn run(method: MethodId, f1: f64, threshold: f64) -> MethodRun {
        let report = (method != MethodId::GroundTruth).then_some(EvaluationReport {
            tp: 10,
            fp: 2,
            fn_: 3,
            tn: 20,
            f1,
            degenerate: false,
        });
        MethodRun {
            method,
            source_id: "A".into(),
            target_id: "B".into(),
            weeks: Some(2),
            threshold,
            scores: vec![0.1, 0.2, 0.6],
            decisions: vec![false, false, true],
            report,
            label_report: None,
        }
    }

    fn outcome() -> CellOutcome {
        CellOutcome {
            source_id: "A".into(),
            target_id: "B".into(),
            weeks: 2,
            window_starts: vec![0, 600, 1200],
            window_incidents: vec![false, true, false],
            test_windows_digest: "x".into(),
            runs: vec![
                run(MethodId::GroundTruth, 1.0, 0.5),
                run(MethodId::Scarce, 0.50, 0.4),
                run(MethodId::FineTune, 0.55, 0.45),
                run(MethodId::DomainMap, 0.70, 0.42),
            ],
        }
    }

    #[test]
    fn delta_columns_are_method_minus_scarce() {
        let csv = delta_csv(&[outcome()], 2);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "B,A,50.0,+5.0,+20.0");
    }

    #[test]
    fn results_csv_has_one_row_per_compared_method() {
        let csv = results_csv(&[outcome()]);
        assert_eq!(csv.lines().count(), 1 + 3, "header + three compared methods");
        assert!(csv.contains("A:B,2,domain_map,0.7000,10,2,3,20"));
    }

    #[test]
    fn empty_report_list_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = std::collections::BTreeMap::new();
        assert!(matches!(
            emit_report(dir.path(), &[], &data),
            Err(EvalError::NoReports)
        ));
    }

    #[test]
    fn emit_writes_tables_plots_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let data = std::collections::BTreeMap::new();
        let files = emit_report(dir.path(), &[outcome()], &data).unwrap();
        assert!(files.iter().any(|p| p.ends_with("results.csv")));
        assert!(files.iter().any(|p| p.to_string_lossy().contains("f1_deltas_w2")));
        assert!(files.iter().any(|p| p.ends_with("summary.json")));
        // one plot per run, each containing a threshold line
        let plots: Vec<_> = files
            .iter()
            .filter(|p| p.extension().is_some_and(|e| e == "svg"))
            .collect();
        assert_eq!(plots.len(), 4);
        for p in plots {
            let svg = std::fs::read_to_string(p).unwrap();
            assert!(svg.contains("id=\"threshold\""), "{p:?} missing threshold line");
        }
    }
}
