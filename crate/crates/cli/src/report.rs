//! CSV, JSON, and aligned-text renderings of reports.
//!
//! CSV and JSON carry full precision: every float is written in its shortest
//! decimal form that parses back to the same value. Text tables show error
//! rates as percentages with two decimals.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use seqmt::calibration::{Calibrated, CalibrationResult};
use seqmt::metrics::{MetricEstimate, MetricKind};
use seqmt::tables::{ProcedureResult, TableReport};
use seqmt::{ExperimentReport, SweepReport};

pub const RUN_HEADER: [&str; 13] = [
    "rule",
    "J",
    "m_or_bounds",
    "threshold",
    "reps",
    "seed",
    "ET",
    "ET_se",
    "metric",
    "value",
    "se",
    "n_effective",
    "horizon_hits",
];

/// One line of a run CSV: the experiment summary and one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub rule: String,
    #[serde(rename = "J")]
    pub j: usize,
    pub m_or_bounds: String,
    /// Threshold values separated by `;`.
    pub threshold: String,
    pub reps: usize,
    pub seed: u64,
    #[serde(rename = "ET")]
    pub et: f64,
    #[serde(rename = "ET_se")]
    pub et_se: f64,
    pub metric: Option<MetricKind>,
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub n_effective: Option<usize>,
    pub horizon_hits: usize,
}

impl RunRow {
    pub fn thresholds(&self) -> Result<Vec<f64>, std::num::ParseFloatError> {
        self.threshold.split(';').map(str::parse).collect()
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn csv_writer<W: Write>(w: W, header: &[&str]) -> io::Result<csv::Writer<W>> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header).map_err(to_io)?;
    Ok(out)
}

pub fn run_rows(report: &ExperimentReport) -> Vec<RunRow> {
    let base = RunRow {
        rule: report.rule.name().to_string(),
        j: report.config.j(),
        m_or_bounds: report.rule.bounds_label(),
        threshold: join(&report.rule.thresholds()),
        reps: report.config.replications,
        seed: report.config.master_seed,
        et: report.mean_stopping_time.value,
        et_se: report.mean_stopping_time.se,
        metric: None,
        value: None,
        se: None,
        n_effective: None,
        horizon_hits: report.horizon_hits,
    };
    if report.metrics.is_empty() {
        return vec![base];
    }
    report
        .metrics
        .iter()
        .map(|m| RunRow {
            metric: Some(m.metric),
            value: Some(m.estimate.value),
            se: Some(m.estimate.se),
            n_effective: Some(m.estimate.n_effective),
            ..base.clone()
        })
        .collect()
}

pub fn write_run_csv<W: Write>(report: &ExperimentReport, w: W) -> io::Result<()> {
    let mut out = csv_writer(w, &RUN_HEADER)?;
    for row in run_rows(report) {
        out.serialize(row).map_err(to_io)?;
    }
    out.flush()
}

pub fn read_run_csv<R: Read>(r: R) -> csv::Result<Vec<RunRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}

fn pct(e: &MetricEstimate) -> String {
    format!("{:.2} ({:.2})", 100.0 * e.value, 100.0 * e.se)
}

/// Rates as percentages, expected counts as counts.
fn metric_cell(kind: MetricKind, e: &MetricEstimate) -> String {
    match kind {
        MetricKind::Pfer | MetricKind::Pfer2 => format!("{:.4} ({:.4})", e.value, e.se),
        _ => pct(e),
    }
}

fn et_cell(e: &MetricEstimate) -> String {
    format!("{:.2} ({:.2})", e.value, e.se)
}

/// Left-aligned columns separated by two spaces.
fn write_table<W: Write>(w: &mut W, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (width, cell) in widths.iter_mut().zip(row) {
            *width = (*width).max(cell.len());
        }
    }
    let line = |w: &mut W, cells: Vec<&str>| -> io::Result<()> {
        let text: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &n)| format!("{c:<n$}"))
            .collect();
        writeln!(w, "{}", text.join("  ").trim_end())
    };
    line(w, header.to_vec())?;
    for row in rows {
        line(w, row.iter().map(String::as_str).collect())?;
    }
    Ok(())
}

pub fn write_run_text<W: Write>(report: &ExperimentReport, mut w: W) -> io::Result<()> {
    let c = &report.config;
    writeln!(
        w,
        "{} rule [{}], thresholds {}; J = {}, |A| = {}; {} replications, seed {}",
        report.rule.name(),
        report.rule.bounds_label(),
        join(&report.rule.thresholds()).replace(';', ", "),
        c.j(),
        c.truth.len(),
        c.replications,
        c.master_seed
    )?;
    writeln!(
        w,
        "ET {}, horizon hits {}",
        et_cell(&report.mean_stopping_time),
        report.horizon_hits
    )?;
    let rows: Vec<Vec<String>> = report
        .metrics
        .iter()
        .map(|m| {
            vec![
                m.metric.name().to_string(),
                metric_cell(m.metric, &m.estimate),
                m.estimate.n_effective.to_string(),
            ]
        })
        .collect();
    if !rows.is_empty() {
        writeln!(w)?;
        write_table(&mut w, &["metric", "value % (se)", "n"], &rows)?;
    }
    Ok(())
}

const CALIBRATION_HEADER: [&str; 11] = [
    "target",
    "chosen",
    "search_seed",
    "value",
    "FDR",
    "FDR_se",
    "FNR",
    "FNR_se",
    "ET",
    "ET_se",
    "accepted",
];

fn target_name(t: Calibrated) -> &'static str {
    match t {
        Calibrated::GapThreshold => "c",
        Calibrated::BhSampleSize => "bh_n",
        Calibrated::TopMSampleSize => "top_m_n",
    }
}

/// The search trace, one line per evaluated grid point.
pub fn write_calibration_csv<W: Write>(result: &CalibrationResult, w: W) -> io::Result<()> {
    let mut out = csv_writer(w, &CALIBRATION_HEADER)?;
    for p in &result.trace {
        out.write_record([
            target_name(result.grid.target).to_string(),
            result.chosen.to_string(),
            result.search_seed.to_string(),
            p.value.to_string(),
            p.fdr.value.to_string(),
            p.fdr.se.to_string(),
            p.fnr.value.to_string(),
            p.fnr.se.to_string(),
            p.mean_stopping_time.value.to_string(),
            p.mean_stopping_time.se.to_string(),
            p.accepted.to_string(),
        ])
        .map_err(to_io)?;
    }
    out.flush()
}

pub fn write_calibration_text<W: Write>(result: &CalibrationResult, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "chosen {} = {}; {} replications, search seed {}, evaluation seed {}",
        target_name(result.grid.target),
        result.chosen,
        result.replications,
        result.search_seed,
        result.evaluation_seed
    )?;
    let achieved: Vec<String> = result
        .achieved
        .iter()
        .map(|m| format!("{} {}%", m.metric.name(), pct(&m.estimate)))
        .collect();
    writeln!(
        w,
        "re-evaluated: ET {}, {}",
        et_cell(&result.achieved_stopping_time),
        achieved.join(", ")
    )?;
    writeln!(w)?;
    let rows: Vec<Vec<String>> = result
        .trace
        .iter()
        .map(|p| {
            vec![
                p.value.to_string(),
                pct(&p.fdr),
                pct(&p.fnr),
                et_cell(&p.mean_stopping_time),
                if p.accepted { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    write_table(
        &mut w,
        &["value", "FDR %", "FNR %", "ET", "accepted"],
        &rows,
    )
}

const TABLE_HEADER: [&str; 24] = [
    "table",
    "m",
    "c",
    "ET",
    "ET_se",
    "FDR",
    "FDR_se",
    "FNR",
    "FNR_se",
    "bh_n",
    "bh_savings",
    "bh_FDR",
    "bh_FDR_se",
    "bh_FNR",
    "bh_FNR_se",
    "bhm_n",
    "bhm_savings",
    "bhm_FDR",
    "bhm_FDR_se",
    "bhm_FNR",
    "bhm_FNR_se",
    "reps",
    "seed",
    "horizon_hits",
];

fn procedure_cells(p: &ProcedureResult) -> [String; 4] {
    [
        p.fdr.value.to_string(),
        p.fdr.se.to_string(),
        p.fnr.value.to_string(),
        p.fnr.se.to_string(),
    ]
}

/// Error rates and savings as fractions.
pub fn write_table_csv<W: Write>(report: &TableReport, w: W) -> io::Result<()> {
    let mut out = csv_writer(w, &TABLE_HEADER)?;
    for row in &report.rows {
        let r = &row.reference;
        let mut rec = vec![
            report.table.to_string(),
            r.m.to_string(),
            r.c.to_string(),
            row.gap.mean_stopping_time.value.to_string(),
            row.gap.mean_stopping_time.se.to_string(),
        ];
        rec.extend(procedure_cells(&row.gap));
        rec.push(r.bh_n.to_string());
        rec.push(row.bh_savings().to_string());
        rec.extend(procedure_cells(&row.bh));
        rec.push(r.bhm_n.to_string());
        rec.push(row.bhm_savings().to_string());
        rec.extend(procedure_cells(&row.bhm));
        rec.push(report.replications.to_string());
        rec.push(report.seed.to_string());
        rec.push(row.gap.horizon_hits.to_string());
        out.write_record(&rec).map_err(to_io)?;
    }
    out.flush()
}

pub fn write_table_text<W: Write>(report: &TableReport, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{}: J = {}, {} replications, seed {}; rates in %, standard errors in parentheses",
        report.table, report.j, report.replications, report.seed
    )?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let r = &row.reference;
            vec![
                r.m.to_string(),
                format!("{:.1}", r.c),
                et_cell(&row.gap.mean_stopping_time),
                pct(&row.gap.fdr),
                pct(&row.gap.fnr),
                format!("{} ({:.0}%)", r.bh_n, 100.0 * row.bh_savings()),
                pct(&row.bh.fdr),
                pct(&row.bh.fnr),
                format!("{} ({:.0}%)", r.bhm_n, 100.0 * row.bhm_savings()),
                pct(&row.bhm.fdr),
                pct(&row.bhm.fnr),
            ]
        })
        .collect();
    write_table(
        &mut w,
        &[
            "m",
            "c",
            "ET",
            "FDR",
            "FNR",
            "BH n (savings)",
            "BH FDR",
            "BH FNR",
            "BH_m n (savings)",
            "BH_m FDR",
            "BH_m FNR",
        ],
        &rows,
    )
}

const SWEEP_HEADER: [&str; 9] = [
    "rule",
    "alpha",
    "beta",
    "threshold",
    "ET",
    "ET_se",
    "kappa",
    "ratio",
    "horizon_hits",
];

pub fn write_sweep_csv<W: Write>(report: &SweepReport, w: W) -> io::Result<()> {
    let mut out = csv_writer(w, &SWEEP_HEADER)?;
    for row in &report.rows {
        out.write_record([
            report.rule.clone(),
            row.alpha.to_string(),
            row.beta.to_string(),
            join(&row.thresholds),
            row.mean_stopping_time.value.to_string(),
            row.mean_stopping_time.se.to_string(),
            row.kappa.to_string(),
            row.ratio.to_string(),
            row.horizon_hits.to_string(),
        ])
        .map_err(to_io)?;
    }
    out.flush()
}

pub fn write_sweep_text<W: Write>(report: &SweepReport, mut w: W) -> io::Result<()> {
    writeln!(w, "{} rule at formula thresholds", report.rule)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                format!("{:e}", r.alpha),
                format!("{:e}", r.beta),
                r.thresholds
                    .iter()
                    .map(|t| format!("{t:.4}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                et_cell(&r.mean_stopping_time),
                format!("{:.2}", r.kappa),
                format!("{:.4}", r.ratio),
                r.horizon_hits.to_string(),
            ]
        })
        .collect();
    write_table(
        &mut w,
        &[
            "alpha",
            "beta",
            "thresholds",
            "ET",
            "kappa",
            "ET/kappa",
            "horizon hits",
        ],
        &rows,
    )
}
