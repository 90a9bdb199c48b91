//! Codebook sizes and decoding search spaces at the SCBS/MCBS, kept in
//! log2 so that `2^{nR}` is never formed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::log2_sum_exp2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Common codeword per index tuple, joint decoding.
    Jd,
    /// WZ binning plus one TD phase per UE.
    Wztd,
    /// WZ binning, common codeword per bin tuple.
    Wz,
    /// One TD phase per UE, no binning.
    Td,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Jd, Scheme::Wztd, Scheme::Wz, Scheme::Td];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Jd => "jd",
            Scheme::Wztd => "wztd",
            Scheme::Wz => "wz",
            Scheme::Td => "td",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jd" => Ok(Scheme::Jd),
            "wztd" => Ok(Scheme::Wztd),
            "wz" => Ok(Scheme::Wz),
            "td" => Ok(Scheme::Td),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s:?}"))),
        }
    }
}

fn check(n: f64, rates: &[&[f64]]) -> Result<()> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("codeword length {n}")));
    }
    let k = rates[0].len();
    if rates.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument(
            "rate vectors differ in length".into(),
        ));
    }
    if rates
        .iter()
        .flat_map(|r| r.iter())
        .any(|&x| !(x >= 0.0 && x.is_finite()))
    {
        return Err(Error::InvalidArgument(
            "rates must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn check_bins(rq: &[f64], rb: &[f64]) -> Result<()> {
    if let Some(k) = (0..rq.len()).find(|&k| rb[k] > rq[k]) {
        return Err(Error::InvalidArgument(format!(
            "bin rate {} exceeds quantization rate {} for UE {}",
            rb[k],
            rq[k],
            k + 1
        )));
    }
    Ok(())
}

/// log2 of the number of SCBS codewords.
pub fn codebook_log2(scheme: Scheme, n: f64, rq: &[f64], rb: &[f64]) -> Result<f64> {
    check(n, &[rq, rb])?;
    check_bins(rq, rb)?;
    Ok(match scheme {
        Scheme::Jd => n * rq.iter().sum::<f64>(),
        Scheme::Wztd => log2_sum_exp2(rb.iter().map(|r| n * r)),
        Scheme::Wz => n * rb.iter().sum::<f64>(),
        Scheme::Td => log2_sum_exp2(rq.iter().map(|r| n * r)),
    })
}

/// log2 of the number of likelihoods the MCBS evaluates.
pub fn decoding_log2(scheme: Scheme, n: f64, r: &[f64], rq: &[f64], rb: &[f64]) -> Result<f64> {
    check(n, &[r, rq, rb])?;
    check_bins(rq, rb)?;
    let k = r.len();
    let per_ue_tail = || (0..k).flat_map(|i| [n * (rq[i] - rb[i]), n * r[i]]);
    Ok(match scheme {
        Scheme::Jd => n * (0..k).map(|i| r[i] + rq[i]).sum::<f64>(),
        Scheme::Wztd => log2_sum_exp2(per_ue_tail().chain(rb.iter().map(|b| n * b))),
        Scheme::Wz => {
            log2_sum_exp2(std::iter::once(n * rb.iter().sum::<f64>()).chain(per_ue_tail()))
        }
        Scheme::Td => log2_sum_exp2((0..k).flat_map(|i| [n * rq[i], n * r[i]])),
    })
}

fn codebook_expr(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Jd => "2^(n*sum_k Rq_k)",
        Scheme::Wztd => "sum_k 2^(n*Rb_k)",
        Scheme::Wz => "2^(n*sum_k Rb_k)",
        Scheme::Td => "sum_k 2^(n*Rq_k)",
    }
}

fn decoding_expr(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Jd => "2^(n*sum_k (R_k+Rq_k))",
        Scheme::Wztd => "sum_k (2^(n*R_k) + 2^(n*(Rq_k-Rb_k)) + 2^(n*Rb_k))",
        Scheme::Wz => "2^(n*sum_k Rb_k) + sum_k (2^(n*(Rq_k-Rb_k)) + 2^(n*R_k))",
        Scheme::Td => "sum_k (2^(n*Rq_k) + 2^(n*R_k))",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub n: f64,
    pub scheme: Scheme,
    pub log2_codebook: f64,
    pub log2_decoding: f64,
    pub codebook_expr: String,
    pub decoding_expr: String,
}

pub fn report(
    scheme: Scheme,
    n: f64,
    r: &[f64],
    rq: &[f64],
    rb: &[f64],
) -> Result<ComplexityReport> {
    Ok(ComplexityReport {
        n,
        scheme,
        log2_codebook: codebook_log2(scheme, n, rq, rb)?,
        log2_decoding: decoding_log2(scheme, n, r, rq, rb)?,
        codebook_expr: codebook_expr(scheme).into(),
        decoding_expr: decoding_expr(scheme).into(),
    })
}

pub const DEFAULT_N: f64 = 100.0;

/// Per-UE rates of the codebook comparison table.
pub const TABLE_RATES: (f64, f64, f64) = (1.5, 1.0, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    /// `None` is the symbolic-K column.
    pub k: Option<usize>,
    pub wztd_expr: String,
    pub jd_expr: String,
    pub wztd_log2: Option<f64>,
    pub jd_log2: Option<f64>,
    pub wztd_decoding_log2: Option<f64>,
    pub jd_decoding_log2: Option<f64>,
}

/// Codebook-size table for `K` in `ks` plus a symbolic row, with
/// `R = 1.5`, `Rq = 1`, `Rb = 0.5` for every UE.
pub fn codebook_table(ks: &[usize], n: f64) -> Result<Vec<TableRow>> {
    let (r, rq, rb) = TABLE_RATES;
    let mut rows = Vec::with_capacity(ks.len() + 1);
    for &k in ks {
        let (rv, qv, bv) = (vec![r; k], vec![rq; k], vec![rb; k]);
        rows.push(TableRow {
            k: Some(k),
            wztd_expr: format!("{k}*2^({rb}n)"),
            jd_expr: format!("2^({}n)", rq * k as f64),
            wztd_log2: Some(codebook_log2(Scheme::Wztd, n, &qv, &bv)?),
            jd_log2: Some(codebook_log2(Scheme::Jd, n, &qv, &bv)?),
            wztd_decoding_log2: Some(decoding_log2(Scheme::Wztd, n, &rv, &qv, &bv)?),
            jd_decoding_log2: Some(decoding_log2(Scheme::Jd, n, &rv, &qv, &bv)?),
        });
    }
    rows.push(TableRow {
        k: None,
        wztd_expr: format!("K*2^({rb}n)"),
        jd_expr: "(2^n)^K".into(),
        wztd_log2: None,
        jd_log2: None,
        wztd_decoding_log2: None,
        jd_decoding_log2: None,
    });
    Ok(rows)
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

pub fn table_markdown(rows: &[TableRow], n: f64) -> String {
    let mut out = format!(
        "| K | WZTD codebook | JD codebook | log2 WZTD (n={n}) | log2 JD (n={n}) | log2 WZTD decoding | log2 JD decoding |\n"
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    for r in rows {
        let k = r.k.map_or_else(|| "K".to_string(), |k| k.to_string());
        out.push_str(&format!(
            "| {k} | {} | {} | {} | {} | {} | {} |\n",
            r.wztd_expr,
            r.jd_expr,
            cell(r.wztd_log2),
            cell(r.jd_log2),
            cell(r.wztd_decoding_log2),
            cell(r.jd_decoding_log2)
        ));
    }
    out
}

pub fn table_csv(rows: &[TableRow], n: f64) -> String {
    let mut out = format!("# qfhet complexity v1 n={n}\n");
    out.push_str("K,wztd_expr,jd_expr,log2_wztd,log2_jd,log2_wztd_decoding,log2_jd_decoding\n");
    for r in rows {
        let k = r.k.map_or_else(|| "K".to_string(), |k| k.to_string());
        out.push_str(&format!(
            "{k},{},{},{},{},{},{}\n",
            r.wztd_expr,
            r.jd_expr,
            cell(r.wztd_log2),
            cell(r.jd_log2),
            cell(r.wztd_decoding_log2),
            cell(r.jd_decoding_log2)
        ));
    }
    out
}
