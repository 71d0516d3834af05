//! CSV emission and parsing for run outputs.
//!
//! `records.csv` and `decisions.csv` are deterministic given a seed; wall
//! times go to a separate `timing.csv` which is not. Record reals carry ten
//! significant digits; decision diagnostics carry full precision so that
//! replaying the branch tags reproduces the learning-rate column exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::runner::{DecisionRecord, EpochRecord};

fn fmt_real(v: f64) -> String {
    format!("{v:.9e}")
}

fn fmt_opt_full(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Column layout of a record set: per-layer rates and MI columns appear for
/// layer-wise runs only.
pub fn records_header(lr_count: usize, ihy_count: usize) -> Vec<String> {
    let mut cols = vec!["epoch".to_string()];
    if lr_count <= 1 {
        cols.push("lr".into());
    } else {
        cols.extend((0..lr_count).map(|l| format!("lr_{l}")));
    }
    cols.extend(
        ["train_loss", "train_acc", "test_loss", "test_acc", "ihyll"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.extend((0..ihy_count).map(|l| format!("ihy_{l}")));
    cols.push("ixy".into());
    cols.push("branch".into());
    cols
}

pub fn records_to_csv(records: &[EpochRecord]) -> String {
    let (lr_count, ihy_count) = records
        .first()
        .map(|r| (r.lrs.len(), r.ihy_per_layer.len()))
        .unwrap_or((1, 0));
    let mut out = records_header(lr_count, ihy_count).join(",");
    out.push('\n');
    for r in records {
        let mut fields = vec![r.epoch.to_string()];
        fields.extend(r.lrs.iter().map(|&v| fmt_real(v)));
        for v in [r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.ihyll] {
            fields.push(fmt_real(v));
        }
        fields.extend(r.ihy_per_layer.iter().map(|&v| fmt_real(v)));
        fields.push(fmt_real(r.ixy));
        fields.push(
            r.branches
                .iter()
                .map(|b| b.as_str())
                .collect::<Vec<_>>()
                .join("|"),
        );
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Header row then one row per epoch, fixed column order, deterministic.
pub fn emit_csv(records: &[EpochRecord], path: &Path) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Decision log: one row per decision (per layer in layer-wise runs), full
/// float precision.
pub fn decisions_to_csv(decisions: &[DecisionRecord]) -> String {
    let mut out = String::from("epoch,policy,layer,branch,delta,d1,d2,lr_next\n");
    for d in decisions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            d.epoch,
            d.policy,
            d.layer.map(|l| l.to_string()).unwrap_or_default(),
            d.branch.as_str(),
            fmt_opt_full(d.delta),
            fmt_opt_full(d.d1),
            fmt_opt_full(d.d2),
            d.lr_next,
        ));
    }
    out
}

pub fn emit_decisions(decisions: &[DecisionRecord], path: &Path) -> Result<()> {
    std::fs::write(path, decisions_to_csv(decisions))?;
    Ok(())
}

/// Wall-clock bookkeeping, separated so the deterministic outputs stay
/// byte-reproducible.
pub fn emit_timing(records: &[EpochRecord], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_ms,probe_ms\n");
    for r in records {
        out.push_str(&format!("{},{:.3},{:.3}\n", r.epoch, r.train_ms, r.probe_ms));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a CSV written by this module back into header + string cells.
pub fn parse_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Param(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(Error::Param(format!(
                "{}: row has {} cells, header has {}",
                path.display(),
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    Ok((header, rows))
}

/// Merge several run directories' `records.csv` into one long-format table
/// `(run, epoch, metric, value)` for external plotting. Epochs are the union
/// across runs; a run missing an epoch or a metric gets the explicit marker
/// `NA`. Metrics are every record column except `epoch`, in first-seen order.
pub fn emit_comparison(run_dirs: &[std::path::PathBuf], path: &Path) -> Result<()> {
    struct Run {
        name: String,
        header: Vec<String>,
        by_epoch: std::collections::BTreeMap<usize, Vec<String>>,
    }

    let mut runs = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut epochs: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    for dir in run_dirs {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let (header, rows) = parse_csv(&dir.join("records.csv"))?;
        if header.first().map(String::as_str) != Some("epoch") {
            return Err(Error::Param(format!(
                "{}: records.csv must start with an epoch column",
                dir.display()
            )));
        }
        for col in header.iter().skip(1) {
            if !metrics.contains(col) {
                metrics.push(col.clone());
            }
        }
        let mut by_epoch = std::collections::BTreeMap::new();
        for row in rows {
            let epoch: usize = row[0]
                .parse()
                .map_err(|_| Error::Param(format!("bad epoch cell `{}`", row[0])))?;
            epochs.insert(epoch);
            by_epoch.insert(epoch, row);
        }
        runs.push(Run {
            name,
            header,
            by_epoch,
        });
    }

    let mut out = String::from("run,epoch,metric,value\n");
    for run in &runs {
        for &epoch in &epochs {
            for metric in &metrics {
                let value = run
                    .by_epoch
                    .get(&epoch)
                    .and_then(|row| {
                        run.header
                            .iter()
                            .position(|h| h == metric)
                            .map(|i| row[i].clone())
                    })
                    .unwrap_or_else(|| "NA".into());
                out.push_str(&format!("{},{epoch},{metric},{value}\n", run.name));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
