//! Cross-seed summaries of experiment files: a mean-best-cost table per
//! problem size and mean/min/max best-cost curves per iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::records::{read_records, Record};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            mean,
            min,
            max,
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub mode: String,
    pub best_cost: Spread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iter: u64,
    pub mode: String,
    pub n: usize,
    pub best_cost: Spread,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateReport {
    /// Sorted by `(n, mode)`.
    pub rows: Vec<TableRow>,
    /// Sorted by `(mode, n, iter)`.
    pub curves: Vec<CurvePoint>,
}

/// Reads every file and folds the summary and iteration records across seeds.
/// Each file must hold a single problem size; all offending files are listed
/// in the error.
pub fn aggregate<P: AsRef<Path>>(paths: &[P]) -> Result<AggregateReport> {
    if paths.is_empty() {
        return Err(Error::invalid("no result files given"));
    }
    let mut problems: Vec<String> = Vec::new();
    let mut all: Vec<(PathBuf, Vec<Record>)> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        match read_records(path) {
            Ok(records) => {
                let sizes: BTreeSet<usize> = records.iter().map(Record::n).collect();
                if sizes.len() > 1 {
                    problems.push(format!("{}: mixed n {sizes:?}", path.display()));
                } else if records.is_empty() {
                    problems.push(format!("{}: no records", path.display()));
                } else {
                    all.push((path.to_path_buf(), records));
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Schema(problems.join("; ")));
    }

    let mut finals: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    let mut curves: BTreeMap<(String, usize, u64), Vec<f64>> = BTreeMap::new();
    for (_, records) in &all {
        for rec in records {
            match rec {
                Record::Summary(s) => finals
                    .entry((s.n, s.mode.clone()))
                    .or_default()
                    .push(s.best_cost as f64),
                Record::Iteration(r) => curves
                    .entry((r.mode.clone(), r.n, r.iter))
                    .or_default()
                    .push(r.best_cost as f64),
            }
        }
    }

    Ok(AggregateReport {
        rows: finals
            .into_iter()
            .map(|((n, mode), v)| TableRow {
                n,
                mode,
                best_cost: Spread::of(&v),
            })
            .collect(),
        curves: curves
            .into_iter()
            .map(|((mode, n, iter), v)| CurvePoint {
                iter,
                mode,
                n,
                best_cost: Spread::of(&v),
            })
            .collect(),
    })
}

impl AggregateReport {
    /// One row per `n`, one column per experiment, cells hold the mean best
    /// cost across seeds.
    pub fn render_table(&self) -> String {
        let modes: BTreeSet<&str> = self.rows.iter().map(|r| r.mode.as_str()).collect();
        let sizes: BTreeSet<usize> = self.rows.iter().map(|r| r.n).collect();
        let mut out = String::new();
        let _ = write!(out, "{:>6}", "n");
        for m in &modes {
            let _ = write!(out, " | {m:>16}");
        }
        out.push('\n');
        for n in sizes {
            let _ = write!(out, "{n:>6}");
            for m in &modes {
                match self.rows.iter().find(|r| r.n == n && r.mode == *m) {
                    Some(r) => {
                        let _ = write!(out, " | {:>16.1}", r.best_cost.mean);
                    }
                    None => {
                        let _ = write!(out, " | {:>16}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// `iter,algo,mean,min,max`; `algo` carries the problem size as well when
    /// more than one size is present.
    pub fn curves_csv(&self) -> String {
        let sizes: BTreeSet<usize> = self.curves.iter().map(|c| c.n).collect();
        let mut out = String::from("iter,algo,mean,min,max\n");
        for c in &self.curves {
            let algo = if sizes.len() > 1 {
                format!("{}-n{}", c.mode, c.n)
            } else {
                c.mode.clone()
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.iter, algo, c.best_cost.mean, c.best_cost.min, c.best_cost.max
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::records::{IterationRecord, SummaryRecord};
    use super::*;

    fn summary(mode: &str, n: usize, seed: u64, best: usize) -> Record {
        Record::Summary(SummaryRecord {
            mode: mode.into(),
            n,
            x: 4,
            y: 10,
            seed,
            iterations: 2,
            policy_steps: 8,
            train_best_cost: Some(best),
            best_cost: best,
            wall_ms: 0,
        })
    }

    fn iteration(mode: &str, n: usize, seed: u64, iter: u64, best: usize) -> Record {
        Record::Iteration(IterationRecord {
            iter,
            mode: mode.into(),
            n,
            x: 4,
            y: 10,
            cost_s0: best + 2,
            cost_sx: best + 1,
            cost_sxy: best,
            r_n: 1,
            best_cost: best,
            policy_loss: None,
            value_loss: None,
            entropy: None,
            wall_ms: 0,
            seed,
        })
    }

    fn write(dir: &Path, name: &str, records: &[Record]) -> PathBuf {
        let path = dir.join(name);
        let text: String = records.iter().map(|r| r.to_line() + "\n").collect();
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn single_seed_spread_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.jsonl",
            &[
                iteration("mode-b", 10, 1, 0, 7),
                summary("mode-b", 10, 1, 7),
            ],
        );
        let rep = aggregate(&[p]).unwrap();
        let s = rep.rows[0].best_cost;
        assert_eq!((s.mean, s.min, s.max), (7.0, 7.0, 7.0));
    }

    #[test]
    fn two_seed_mean() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.jsonl",
            &[summary("pure-rl", 10, 1, 10), summary("pure-rl", 10, 2, 20)],
        );
        let rep = aggregate(&[p]).unwrap();
        assert_eq!(rep.rows[0].best_cost.mean, 15.0);
        assert_eq!(rep.rows[0].best_cost.count, 2);
    }

    #[test]
    fn table_has_row_per_size_and_column_per_mode() {
        let dir = tempfile::tempdir().unwrap();
        let files = [
            write(dir.path(), "b50.jsonl", &[summary("mode-b", 50, 1, 22)]),
            write(dir.path(), "r50.jsonl", &[summary("pure-rl", 50, 1, 23)]),
            write(dir.path(), "b100.jsonl", &[summary("mode-b", 100, 1, 50)]),
            write(dir.path(), "r100.jsonl", &[summary("pure-rl", 100, 1, 51)]),
        ];
        let rep = aggregate(&files).unwrap();
        let table = rep.render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("mode-b") && lines[0].contains("pure-rl"));
        assert!(lines[1].trim_start().starts_with("50"));
        assert!(lines[2].trim_start().starts_with("100"));
    }

    #[test]
    fn mixed_sizes_in_one_file_rejected_with_all_offenders() {
        let dir = tempfile::tempdir().unwrap();
        let bad1 = write(
            dir.path(),
            "bad1.jsonl",
            &[summary("mode-b", 10, 1, 5), summary("mode-b", 11, 2, 5)],
        );
        let bad2 = dir.path().join("bad2.jsonl");
        std::fs::write(&bad2, "{\"kind\":\"summary\"}\n").unwrap();
        let good = write(dir.path(), "good.jsonl", &[summary("mode-b", 10, 1, 5)]);
        let err = aggregate(&[bad1, good, bad2]).unwrap_err().to_string();
        assert!(
            err.contains("bad1.jsonl") && err.contains("bad2.jsonl"),
            "{err}"
        );
        assert!(!err.contains("good.jsonl"));
    }

    #[test]
    fn curves_cover_every_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<Record> = (0..2)
            .flat_map(|seed| {
                (0..3).map(move |it| {
                    iteration("mode-b", 10, seed, it, 10 - it as usize - seed as usize)
                })
            })
            .collect();
        let p = write(dir.path(), "c.jsonl", &recs);
        let rep = aggregate(&[p]).unwrap();
        assert_eq!(rep.curves.len(), 3);
        let csv = rep.curves_csv();
        assert_eq!(csv.lines().next().unwrap(), "iter,algo,mean,min,max");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,mode-b,9.5,9,10");
        for c in &rep.curves {
            assert!(c.best_cost.min <= c.best_cost.mean && c.best_cost.mean <= c.best_cost.max);
        }
    }

    #[test]
    fn removing_a_seed_only_changes_its_contribution() {
        let dir = tempfile::tempdir().unwrap();
        let both = write(
            dir.path(),
            "both.jsonl",
            &[summary("mode-a", 10, 1, 6), summary("mode-a", 10, 2, 8)],
        );
        let one = write(dir.path(), "one.jsonl", &[summary("mode-a", 10, 1, 6)]);
        assert_eq!(aggregate(&[both]).unwrap().rows[0].best_cost.mean, 7.0);
        assert_eq!(aggregate(&[one]).unwrap().rows[0].best_cost.mean, 6.0);
    }
}
