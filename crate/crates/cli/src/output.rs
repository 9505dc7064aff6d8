//! CSV tables and the plot script.
//!
//! Reals are written in scientific notation with ten significant digits,
//! lines end in `\n`, and the decimal separator is always `.`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use bcos::{fit_slope, ErrorReport, SchemeKind};

use crate::study::{StudyOutcome, TimingRow};

pub const ERRORS_HEADER: &str = "problem,scheme,theta1,theta2,theta3,theta4,K,N,M,seed,strong_X,strong_Y,strong_Z,strong_total,weak_Y0,weak_Z0,weak_total,picard_max,clamp_count";
pub const RATES_HEADER: &str = "problem,scheme,metric,slope,points";
pub const TIMING_HEADER: &str = "problem,scheme,K,N,seconds,picard_max";
pub const PLOT_SCRIPT: &str = "plot_errors.py";

pub const METRICS: [&str; 7] = ["strong_X", "strong_Y", "strong_Z", "strong_total", "weak_Y0", "weak_Z0", "weak_total"];

pub fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn metric(report: &ErrorReport, name: &str) -> f64 {
    match name {
        "strong_X" => report.strong.x,
        "strong_Y" => report.strong.y,
        "strong_Z" => report.strong.z,
        "strong_total" => report.strong.total(),
        "weak_Y0" => report.weak.y0,
        "weak_Z0" => report.weak.z0,
        "weak_total" => report.weak.total(),
        other => panic!("unknown metric {other}"),
    }
}

pub fn errors_csv(reports: &[ErrorReport]) -> String {
    let mut s = String::from(ERRORS_HEADER);
    s.push('\n');
    for r in reports {
        let mut fields = vec![r.problem.clone(), r.scheme.name().to_string()];
        fields.extend(r.theta.iter().map(|&t| sci(t)));
        fields.extend([r.k, r.n, r.paths].iter().map(usize::to_string));
        fields.push(r.seed.to_string());
        fields.extend(METRICS.iter().map(|m| sci(metric(r, m))));
        fields.push(r.picard_max.to_string());
        fields.push(r.clamp_count.to_string());
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Slope of each metric for one scheme; `None` when it cannot be fitted.
pub fn slopes(reports: &[ErrorReport], scheme: SchemeKind, horizon: f64) -> Vec<(&'static str, Option<f64>, usize)> {
    METRICS
        .iter()
        .map(|&m| {
            let pts: Vec<(usize, f64)> = reports
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| (r.n, metric(r, m)))
                .filter(|(_, e)| e.is_finite())
                .collect();
            (m, fit_slope(&pts, horizon), pts.len())
        })
        .collect()
}

pub fn rates_csv(reports: &[ErrorReport], horizon: f64) -> String {
    let mut s = String::from(RATES_HEADER);
    s.push('\n');
    let mut schemes: Vec<SchemeKind> = Vec::new();
    for r in reports {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
    }
    let problem = reports.first().map(|r| r.problem.as_str()).unwrap_or("");
    for scheme in schemes {
        for (m, slope, points) in slopes(reports, scheme, horizon) {
            let _ = writeln!(s, "{problem},{},{m},{},{points}", scheme.name(), sci(slope.unwrap_or(f64::NAN)));
        }
    }
    s
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = String::from(TIMING_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.problem, r.scheme.name(), r.k, r.n, sci(r.seconds), r.picard_max);
    }
    s
}

/// Matplotlib script drawing error against N for every metric, next to
/// reference slopes of order 1/2, 1 and 2.
pub fn plot_script() -> String {
    r#"#!/usr/bin/env python3
"""Log-log error curves from errors.csv in this directory."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
METRICS = ["strong_X", "strong_Y", "strong_Z", "strong_total", "weak_Y0", "weak_Z0", "weak_total"]

with open(os.path.join(HERE, "errors.csv"), newline="") as fh:
    rows = list(csv.DictReader(fh))

schemes = sorted({r["scheme"] for r in rows})
fig, axes = plt.subplots(2, 4, figsize=(16, 7))
for ax, metric in zip(axes.flat, METRICS):
    for scheme in schemes:
        pts = sorted(
            (int(r["N"]), float(r[metric]))
            for r in rows
            if r["scheme"] == scheme and float(r[metric]) > 0
        )
        if pts:
            ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=scheme)
    ns = sorted({int(r["N"]) for r in rows})
    vals = [float(r[metric]) for r in rows if float(r[metric]) > 0]
    if ns and vals:
        scale = max(vals)
        for order, style in [(0.5, ":"), (1.0, "--"), (2.0, "-.")]:
            ax.loglog(ns, [scale * (ns[0] / n) ** order for n in ns], "k" + style, lw=0.8, label=f"order {order:g}")
    ax.set_title(metric)
    ax.set_xlabel("N")
axes.flat[-1].axis("off")
axes.flat[0].legend(fontsize="small")
fig.suptitle(rows[0]["problem"] if rows else "")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "errors.png"), dpi=120)
"#
    .to_string()
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn write_study(dir: &Path, outcome: &StudyOutcome, horizon: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "errors.csv", &errors_csv(&outcome.reports))?;
    write(dir, "rates.csv", &rates_csv(&outcome.reports, horizon))?;
    write(dir, PLOT_SCRIPT, &plot_script())
}

pub fn write_timing(dir: &Path, rows: &[TimingRow]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "timing.csv", &timing_csv(rows))
}

/// Human-readable block for a single cell.
pub fn describe(report: &ErrorReport) -> String {
    let t = report.theta;
    format!(
        "problem      {}\nscheme       {}\ntheta        ({}, {}, {}, {})\nK, N, M      {}, {}, {}\nseed         {}\n\
         strong X     {}\nstrong Y     {}\nstrong Z     {}\nstrong total {}\n\
         weak Y0      {}\nweak Z0      {}\nweak total   {}\npicard max   {}\nclamp count  {}\n",
        report.problem,
        report.scheme,
        t[0],
        t[1],
        t[2],
        t[3],
        report.k,
        report.n,
        report.paths,
        report.seed,
        sci(report.strong.x),
        sci(report.strong.y),
        sci(report.strong.z),
        sci(report.strong.total()),
        sci(report.weak.y0),
        sci(report.weak.z0),
        sci(report.weak.total()),
        report.picard_max,
        report.clamp_count
    )
}
