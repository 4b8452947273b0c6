//! CSV rendering. Leading `# key=value` lines carry run metadata, then one
//! header row; fields are comma-separated, lines end in LF, floats use
//! round-trip scientific notation.

use crate::samplers::{NbSample, RatioConfiguration};

/// Round-trip float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn header(meta: &[(String, String)], columns: &str) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(columns);
    out.push('\n');
    out
}

/// One simulated ratio configuration per row. Rows are padded to the widest
/// `above` block so every row has the same column count.
pub fn trials_csv(meta: &[(String, String)], rows: &[(u64, f64, RatioConfiguration)]) -> String {
    let width = rows.iter().map(|r| r.2.above.len()).max().unwrap_or(0);
    let mut cols = String::from("trial_index,t,r,n,w_rn,count_below");
    for k in 1..=width {
        cols.push_str(&format!(",above_{k}"));
    }
    let mut out = header(meta, &cols);
    for (trial, t, cfg) in rows {
        out.push_str(&format!(
            "{trial},{},{},{},{},{}",
            fmt_f64(*t),
            cfg.r,
            cfg.n,
            cfg.w_rn.map(fmt_f64).unwrap_or_default(),
            cfg.below.len()
        ));
        for k in 0..width {
            out.push(',');
            if let Some(v) = cfg.above.get(k) {
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Negative binomial process draws in long format, one point per row.
pub fn nb_points_csv(meta: &[(String, String)], rows: &[(u64, NbSample)]) -> String {
    let mut out = header(meta, "trial_index,rank,point");
    for (trial, s) in rows {
        for (rank, p) in s.points.iter().enumerate() {
            out.push_str(&format!("{trial},{},{}\n", rank + 1, fmt_f64(*p)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawRow {
    pub law: String,
    pub params: String,
    pub x: f64,
    pub density: f64,
    pub cdf: f64,
}

pub fn law_table_csv(meta: &[(String, String)], rows: &[LawRow]) -> String {
    let mut out = header(meta, "law,params,x,density,cdf");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.law,
            r.params,
            fmt_f64(r.x),
            fmt_f64(r.density),
            fmt_f64(r.cdf)
        ));
    }
    out
}

/// Splits CSV text into metadata pairs, header and data rows.
pub fn parse_csv(text: &str) -> (Vec<(String, String)>, Vec<String>, Vec<Vec<String>>) {
    let mut meta = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(kv) = line.strip_prefix("# ") {
            if let Some((k, v)) = kv.split_once('=') {
                meta.push((k.to_string(), v.to_string()));
            }
        } else if header.is_empty() {
            header = line.split(',').map(str::to_string).collect();
        } else {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    (meta, header, rows)
}
