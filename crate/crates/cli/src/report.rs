//! CSV and markdown emission for simulation reports.

use std::io::{self, Write};

/// One report row: a configuration point crossed with a criterion.
#[derive(Debug, Clone)]
pub struct SimRow {
    pub study: String,
    /// Design identifier for redrawn-design studies; empty otherwise.
    pub design: String,
    pub n: usize,
    pub p: usize,
    /// True support size (`k` in the nonzero study, `|m0|` for variable
    /// selection).
    pub k_signal: usize,
    pub s: f64,
    pub sigma: f64,
    pub criterion: String,
    pub k_constant: Option<f64>,
    pub reps: u64,
    pub risk: f64,
    pub risk_se: f64,
    pub oracle: f64,
    pub risk_ratio: f64,
    pub mean_dim: f64,
    pub pct_d0: f64,
    pub pct_d1: f64,
    pub pct_d2plus: f64,
    pub pct_dpos: f64,
    pub freq_eq_m0: f64,
    pub freq_eq_m0_se: f64,
    pub freq_contains_m0: f64,
    pub freq_contains_m0_se: f64,
    pub overfit_threshold: Option<usize>,
    pub pct_dim_ge_threshold: f64,
}

pub const CSV_HEADER: &str = "study,design,n,p,k,s,sigma,criterion,reps,risk,risk_se,oracle,risk_ratio,mean_dim,pct_d0,pct_d1,pct_d2plus,pct_dpos,freq_eq_m0,freq_eq_m0_se,freq_contains_m0,freq_contains_m0_se,overfit_threshold,pct_dim_ge_threshold";

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Write rows as CSV with a header; the output is byte-identical for a
/// given row list.
pub fn write_csv<W: Write>(rows: &[SimRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.study,
            r.design,
            r.n,
            r.p,
            r.k_signal,
            field(r.s),
            field(r.sigma),
            r.criterion,
            r.reps,
            field(r.risk),
            field(r.risk_se),
            field(r.oracle),
            field(r.risk_ratio),
            field(r.mean_dim),
            field(r.pct_d0),
            field(r.pct_d1),
            field(r.pct_d2plus),
            field(r.pct_dpos),
            field(r.freq_eq_m0),
            field(r.freq_eq_m0_se),
            field(r.freq_contains_m0),
            field(r.freq_contains_m0_se),
            r.overfit_threshold.map_or(String::new(), |t| t.to_string()),
            field(r.pct_dim_ge_threshold),
        )?;
    }
    Ok(())
}

fn md(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.3}")
    }
}

/// Compact table rendering of the main columns.
pub fn render_markdown(rows: &[SimRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "| study | design | n | k | s | sigma | criterion | risk | ratio | mean D | %D=0 | %D=1 | %D>=2 | m=m0 | m>=m0 |\n",
    );
    out.push_str(
        "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.study,
            if r.design.is_empty() { "-" } else { &r.design },
            r.n,
            r.k_signal,
            md(r.s),
            md(r.sigma),
            r.criterion,
            md(r.risk),
            md(r.risk_ratio),
            md(r.mean_dim),
            md(r.pct_d0),
            md(r.pct_d1),
            md(r.pct_d2plus),
            md(r.freq_eq_m0),
            md(r.freq_contains_m0),
        ));
    }
    out
}
