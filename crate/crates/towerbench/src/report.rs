//! CSV artifacts and terminal tables for evaluation results.
//!
//! Floats are written with shortest-roundtrip formatting, so reading a CSV
//! back yields bit-identical values. Evaluation CSVs carry one row per
//! level plus a trailing `Total` row.

use std::path::Path;

use anyhow::{bail, Context, Result};
use towerbench_core::ppo::CurvePoint;

use crate::eval::{EvalReport, GeneralizationReport, LevelScore, Spread, SweepRow};

const EVAL_HEADER: [&str; 7] = [
    "level",
    "success_mean",
    "success_std",
    "reward_mean",
    "reward_std",
    "decisions_mean",
    "decisions_std",
];

fn f(v: f64) -> String {
    format!("{v}")
}

fn parse_field(record: &csv::StringRecord, idx: usize) -> Result<f64> {
    let raw = record.get(idx).context("short CSV record")?;
    raw.parse::<f64>().with_context(|| format!("bad float {raw:?}"))
}

/// Writes an evaluation report, `Total` row last.
pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(EVAL_HEADER)?;
    for row in report.rows.iter().chain(core::iter::once(&report.total)) {
        w.write_record([
            row.level_id.as_str(),
            &f(row.success.mean),
            &f(row.success.std),
            &f(row.reward.mean),
            &f(row.reward.std),
            &f(row.decisions.mean),
            &f(row.decisions.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an evaluation CSV back, `Total` row included.
pub fn read_eval_csv(path: &Path) -> Result<Vec<LevelScore>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().ne(EVAL_HEADER) {
        bail!("unexpected evaluation CSV header in {}", path.display());
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        rows.push(LevelScore {
            level_id: record.get(0).context("missing level id")?.to_string(),
            success: Spread { mean: parse_field(&record, 1)?, std: parse_field(&record, 2)? },
            reward: Spread { mean: parse_field(&record, 3)?, std: parse_field(&record, 4)? },
            decisions: Spread {
                mean: parse_field(&record, 5)?,
                std: parse_field(&record, 6)?,
            },
        });
    }
    Ok(rows)
}

/// Writes a difficulty sweep: one row per difficulty, two columns
/// (`<agent>_mean`, `<agent>_std`) per agent.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let first = rows.first().context("empty sweep")?;
    let mut header = vec![String::from("difficulty")];
    for (name, _) in &first.scores {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.difficulty.to_string()];
        for (_, s) in &row.scores {
            record.push(f(s.mean));
            record.push(f(s.std));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a training curve: episode marker, windowed mean reward, windowed
/// success rate.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["episode", "mean_reward", "success_rate"])?;
    for point in curve {
        w.write_record([
            point.episode.to_string(),
            f(point.mean_reward),
            f(point.success_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a training curve CSV back.
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut curve = Vec::new();
    for record in r.records() {
        let record = record?;
        curve.push(CurvePoint {
            episode: record.get(0).context("missing episode")?.parse()?,
            mean_reward: parse_field(&record, 1)?,
            success_rate: parse_field(&record, 2)?,
        });
    }
    Ok(curve)
}

/// Writes a generalization comparison: one row per suite level with the
/// subset-trained, per-level-trained, and HAI success columns, then a
/// trailing `Mean` row.
pub fn write_generalization_csv(path: &Path, report: &GeneralizationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["level", "subset_success", "per_level_success", "hai_success"])?;
    for row in &report.rows {
        w.write_record([
            row.level_id.as_str(),
            &f(row.subset_success),
            &f(row.per_level_success),
            &f(row.hai_success),
        ])?;
    }
    w.write_record([
        "Mean",
        &f(report.subset_mean),
        &f(report.per_level_mean),
        &f(report.hai_mean),
    ])?;
    w.flush()?;
    Ok(())
}

/// Writes an action histogram: one row per action index.
pub fn write_histogram_csv(path: &Path, histogram: &crate::eval::Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["action", "frequency"])?;
    const NAMES: [&str; 5] = ["SowSun", "Attack", "Defense", "Prepare", "NoOp"];
    for (name, freq) in NAMES.iter().zip(histogram) {
        w.write_record([*name, &f(*freq)])?;
    }
    w.flush()?;
    Ok(())
}

/// Renders a generalization comparison as an aligned terminal table.
pub fn render_generalization_table(report: &GeneralizationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "subset size {}  training seeds {}\n",
        report.n, report.seeds
    ));
    for (s, subset) in report.subsets.iter().enumerate() {
        out.push_str(&format!("  seed {s}: {}\n", subset.join("+")));
    }
    out.push_str(&format!(
        "{:<8} {:>14} {:>17} {:>10}\n",
        "level", "subset-trained", "per-level-trained", "HAI"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<8} {:>14.1} {:>17.1} {:>10.1}\n",
            row.level_id, row.subset_success, row.per_level_success, row.hai_success
        ));
    }
    out.push_str(&format!(
        "{:<8} {:>14.1} {:>17.1} {:>10.1}\n",
        "Mean", report.subset_mean, report.per_level_mean, report.hai_mean
    ));
    out
}

/// Renders an evaluation report as an aligned terminal table.
pub fn render_eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "difficulty {}  episodes {}  seeds {}\n",
        report.difficulty, report.episodes, report.seeds
    ));
    out.push_str(&format!(
        "{:<8} {:>16} {:>16} {:>10}\n",
        "level", "success %", "reward", "decisions"
    ));
    for row in report.rows.iter().chain(core::iter::once(&report.total)) {
        out.push_str(&format!(
            "{:<8} {:>16} {:>16} {:>10.1}\n",
            row.level_id,
            format!("{:.1} ± {:.1}", row.success.mean, row.success.std),
            format!("{:.2} ± {:.2}", row.reward.mean, row.reward.std),
            row.decisions.mean,
        ));
    }
    out
}

/// Renders a sweep as an aligned terminal table.
pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        out.push_str(&format!("{:<12}", "difficulty"));
        for (name, _) in &first.scores {
            out.push_str(&format!(" {name:>16}"));
        }
        out.push('\n');
        for row in rows {
            out.push_str(&format!("{:<12}", row.difficulty));
            for (_, s) in &row.scores {
                out.push_str(&format!(" {:>16}", format!("{:.1} ± {:.1}", s.mean, s.std)));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Spread;

    fn sample_report() -> EvalReport {
        let mk = |id: &str, s: f64| LevelScore {
            level_id: id.to_string(),
            success: Spread { mean: s, std: 0.5 },
            reward: Spread { mean: s / 10.0, std: 0.25 },
            decisions: Spread { mean: 40.0 + s, std: 1.5 },
        };
        EvalReport {
            rows: vec![mk("S01", 87.3), mk("S02", 61.0 + 1.0 / 3.0)],
            total: mk("Total", 74.0),
            histogram: [0.4, 0.3, 0.2, 0.05, 0.05],
            episodes: 100,
            seeds: 5,
            difficulty: 100_000,
        }
    }

    #[test]
    fn eval_csv_roundtrips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        let report = sample_report();
        write_eval_csv(&path, &report).unwrap();
        let rows = read_eval_csv(&path).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], report.rows[0]);
        assert_eq!(rows[1], report.rows[1]);
        assert_eq!(rows[2], report.total);
    }

    #[test]
    fn eval_csv_rejects_foreign_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = read_eval_csv(&path).unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn curve_csv_roundtrips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let curve = vec![
            CurvePoint { episode: 50, mean_reward: -0.125, success_rate: 1.0 / 3.0 },
            CurvePoint { episode: 100, mean_reward: 2.75, success_rate: 0.52 },
        ];
        write_curve_csv(&path, &curve).unwrap();
        assert_eq!(read_curve_csv(&path).unwrap(), curve);
    }

    #[test]
    fn sweep_csv_names_agent_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![SweepRow {
            difficulty: 50_000,
            scores: vec![
                (String::from("HRL"), Spread { mean: 90.0, std: 2.0 }),
                (String::from("HAI"), Spread { mean: 80.0, std: 1.0 }),
            ],
        }];
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("difficulty,HRL_mean,HRL_std,HAI_mean,HAI_std\n"));
        assert!(text.contains("50000,90,2,80,1"));
    }

    #[test]
    fn generalization_csv_lists_levels_then_mean() {
        use crate::eval::{GeneralizationLevelRow, GeneralizationReport};
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("generalize.csv");
        let report = GeneralizationReport {
            n: 2,
            seeds: 3,
            subsets: vec![vec![String::from("S01"), String::from("S03")]],
            rows: vec![GeneralizationLevelRow {
                level_id: String::from("S01"),
                subset_success: 40.0,
                per_level_success: 55.0,
                hai_success: 30.0,
            }],
            subset_mean: 40.0,
            per_level_mean: 55.0,
            hai_mean: 30.0,
        };
        write_generalization_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("level,subset_success,per_level_success,hai_success\n"));
        assert!(text.contains("S01,40,55,30"));
        assert!(text.trim_end().ends_with("Mean,40,55,30"));
        assert!(render_generalization_table(&report).contains("S01+S03"));
    }

    #[test]
    fn histogram_csv_names_all_actions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("histogram.csv");
        write_histogram_csv(&path, &[0.5, 0.25, 0.125, 0.0625, 0.0625]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for name in ["SowSun", "Attack", "Defense", "Prepare", "NoOp"] {
            assert!(text.contains(name), "missing {name}");
        }
        assert!(text.contains("SowSun,0.5"));
    }

    #[test]
    fn tables_render_every_row() {
        let report = sample_report();
        let table = render_eval_table(&report);
        assert!(table.contains("S01") && table.contains("S02") && table.contains("Total"));
        let sweep = vec![SweepRow {
            difficulty: 0,
            scores: vec![(String::from("HAI"), Spread { mean: 75.0, std: 0.0 })],
        }];
        assert!(render_sweep_table(&sweep).contains("75.0"));
    }
}
