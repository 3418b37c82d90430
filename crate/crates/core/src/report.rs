//! Aggregation of evaluation records into per-bucket tables and plot series.
//!
//! Buckets are keyed by `(family, strategy, n)` and always emitted in that
//! sort order, so the same records give byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dataset::Family;
use crate::pipelines::{EvalRecord, FailureCause, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketStats {
    pub family: Family,
    pub strategy: Strategy,
    pub n: usize,
    pub total: usize,
    pub valid: usize,
    /// Percentage of valid records.
    pub accuracy: f64,
    pub failures: usize,
    /// Percentages over failing records; several can apply to one failure.
    pub missing_init_pct: Option<f64>,
    pub extra_init_pct: Option<f64>,
    pub missing_goal_pct: Option<f64>,
    pub extra_goal_pct: Option<f64>,
    pub avg_plan_length: Option<f64>,
    /// Percentage of records whose candidate solved to a validating plan.
    pub end_to_end_accuracy: Option<f64>,
    pub causes: BTreeMap<FailureCause, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub buckets: Vec<BucketStats>,
}

fn pct(part: usize, whole: usize) -> f64 {
    100.0 * part as f64 / whole as f64
}

pub fn aggregate(records: &[EvalRecord]) -> Report {
    let mut groups: BTreeMap<(Family, Strategy, usize), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.family, r.strategy, r.n)).or_default().push(r);
    }
    let buckets = groups
        .into_iter()
        .map(|((family, strategy, n), rs)| {
            let total = rs.len();
            let valid = rs.iter().filter(|r| r.valid).count();
            let failing: Vec<&&EvalRecord> = rs.iter().filter(|r| !r.valid).collect();
            let failures = failing.len();
            let rate = |f: fn(&EvalRecord) -> bool| {
                (failures > 0).then(|| pct(failing.iter().filter(|r| f(r)).count(), failures))
            };
            let lengths: Vec<usize> = rs.iter().filter_map(|r| r.plan_length).collect();
            let e2e: Vec<bool> = rs.iter().filter_map(|r| r.end_to_end_valid).collect();
            let mut causes = BTreeMap::new();
            for cause in failing.iter().filter_map(|r| r.failure_cause) {
                *causes.entry(cause).or_insert(0) += 1;
            }
            BucketStats {
                family,
                strategy,
                n,
                total,
                valid,
                accuracy: pct(valid, total),
                failures,
                missing_init_pct: rate(|r| r.flags.missing_init),
                extra_init_pct: rate(|r| r.flags.extra_init),
                missing_goal_pct: rate(|r| r.flags.missing_goal),
                extra_goal_pct: rate(|r| r.flags.extra_goal),
                avg_plan_length: (!lengths.is_empty())
                    .then(|| lengths.iter().sum::<usize>() as f64 / lengths.len() as f64),
                end_to_end_accuracy: (!e2e.is_empty()).then(|| pct(e2e.iter().filter(|v| **v).count(), e2e.len())),
                causes,
            }
        })
        .collect();
    Report { buckets }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.1}"))
}

fn causes_text(causes: &BTreeMap<FailureCause, usize>) -> String {
    if causes.is_empty() {
        return "-".into();
    }
    causes.iter().map(|(c, k)| format!("{c}:{k}")).collect::<Vec<_>>().join(" ")
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<12} {:>4} {:>6} {:>6} {:>8} {:>7} {:>7} {:>7} {:>7} {:>8} {:>6}  causes",
            "family", "strategy", "n", "total", "valid", "acc%", "m-init", "x-init", "m-goal", "x-goal", "avg-len", "e2e%"
        );
        for b in &self.buckets {
            let _ = writeln!(
                out,
                "{:<8} {:<12} {:>4} {:>6} {:>6} {:>8.1} {:>7} {:>7} {:>7} {:>7} {:>8} {:>6}  {}",
                b.family.as_str(),
                b.strategy.as_str(),
                b.n,
                b.total,
                b.valid,
                b.accuracy,
                opt(b.missing_init_pct),
                opt(b.extra_init_pct),
                opt(b.missing_goal_pct),
                opt(b.extra_goal_pct),
                opt(b.avg_plan_length),
                opt(b.end_to_end_accuracy),
                causes_text(&b.causes),
            );
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "family",
            "strategy",
            "n",
            "total",
            "valid",
            "accuracy",
            "failures",
            "missing_init_pct",
            "extra_init_pct",
            "missing_goal_pct",
            "extra_goal_pct",
            "avg_plan_length",
            "end_to_end_accuracy",
            "causes",
        ])?;
        for b in &self.buckets {
            w.write_record([
                b.family.as_str().to_string(),
                b.strategy.as_str().to_string(),
                b.n.to_string(),
                b.total.to_string(),
                b.valid.to_string(),
                format!("{:.1}", b.accuracy),
                b.failures.to_string(),
                opt_csv(b.missing_init_pct),
                opt_csv(b.extra_init_pct),
                opt_csv(b.missing_goal_pct),
                opt_csv(b.extra_goal_pct),
                opt_csv(b.avg_plan_length),
                opt_csv(b.end_to_end_accuracy),
                if b.causes.is_empty() { String::new() } else { causes_text(&b.causes) },
            ])?;
        }
        csv_string(w)
    }

    /// Long-form `(series, x, y)` rows: accuracy and average plan length
    /// against block count, one series per family and strategy.
    pub fn series_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "metric", "n", "value"])?;
        for metric in ["accuracy", "avg_plan_length"] {
            for b in &self.buckets {
                let value = match metric {
                    "accuracy" => Some(b.accuracy),
                    _ => b.avg_plan_length,
                };
                if let Some(v) = value {
                    let series = format!("{}/{}", b.family.as_str(), b.strategy.as_str());
                    w.write_record([series, metric.to_string(), b.n.to_string(), format!("{v:.3}")])?;
                }
            }
        }
        csv_string(w)
    }

    /// Write `report.txt`, `report.csv` and `series.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let to_io = |e: csv::Error| std::io::Error::other(e);
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("report.csv"), self.to_csv().map_err(to_io)?)?;
        std::fs::write(dir.join("series.csv"), self.series_csv().map_err(to_io)?)?;
        Ok(())
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, csv::Error> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::ErrorFlags;

    fn record(i: usize, valid: bool, flags: ErrorFlags) -> EvalRecord {
        EvalRecord {
            run_id: "t".into(),
            instance_id: format!("p{i:03}"),
            family: Family::Xxl,
            n: 5,
            strategy: Strategy::Dnc,
            backend_id: "b".into(),
            valid,
            failure_cause: (!valid).then_some(FailureCause::Mismatch),
            flags,
            plan_length: valid.then_some(10),
            end_to_end_valid: Some(valid),
            fact_failures: 0,
            multi_atom_facts: 0,
            compression_ratio: "1/1".into(),
            calls: 1,
            prompt_tokens: 0,
            completion_tokens: 0,
            wall_ms: 0,
            artifacts: vec![],
            detail: None,
            diff: None,
        }
    }

    #[test]
    fn accuracy_is_valid_over_total() {
        let rs: Vec<_> = (0..10).map(|i| record(i, i < 3, ErrorFlags::default())).collect();
        let b = &aggregate(&rs).buckets[0];
        assert_eq!((b.total, b.valid, b.failures), (10, 3, 7));
        assert!((b.accuracy - 30.0).abs() < 1e-9);
        assert_eq!(b.causes[&FailureCause::Mismatch], 7);
    }

    #[test]
    fn all_valid_has_no_error_rates() {
        let rs: Vec<_> = (0..4).map(|i| record(i, true, ErrorFlags::default())).collect();
        let b = &aggregate(&rs).buckets[0];
        assert_eq!(b.accuracy, 100.0);
        assert_eq!(b.extra_init_pct, None);
        assert_eq!(b.avg_plan_length, Some(10.0));
        assert!(aggregate(&rs).to_text().contains("100.0"));
    }

    #[test]
    fn error_rates_are_over_failures() {
        let xi = ErrorFlags { extra_init: true, ..Default::default() };
        let mg = ErrorFlags { missing_goal: true, ..Default::default() };
        let rs = vec![record(0, false, xi), record(1, false, xi), record(2, false, mg), record(3, true, ErrorFlags::default())];
        let report = aggregate(&rs);
        let b = &report.buckets[0];
        assert!((b.extra_init_pct.unwrap() - 200.0 / 3.0).abs() < 1e-9);
        assert!((b.missing_goal_pct.unwrap() - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(b.missing_init_pct, Some(0.0));
        let csv = report.to_csv().unwrap();
        assert!(csv.lines().nth(1).unwrap().contains(",66.7,33.3,"), "{csv}");
    }

    #[test]
    fn output_is_order_independent() {
        let mut rs: Vec<_> = (0..6).map(|i| record(i, i % 2 == 0, ErrorFlags::default())).collect();
        rs[1].n = 30;
        rs[3].strategy = Strategy::Planner;
        let a = aggregate(&rs);
        rs.reverse();
        let b = aggregate(&rs);
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.series_csv().unwrap(), b.series_csv().unwrap());
        assert_eq!(a.buckets.len(), 3);
    }
}
