//! Widom factors `W_n = a_1 ⋯ a_n / Cap^n`.

use rayon::prelude::*;
use rug::Float;

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::jacobi::{jacobi_coefficients, JacobiTable};
use crate::numeric::LogScalar;

#[derive(Clone, Debug)]
pub struct WidomSeries {
    /// `log W_1 … log W_N`.
    log_w: Vec<Float>,
    log_capacity: Float,
}

impl WidomSeries {
    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    /// `W_n`, `1 ≤ n ≤ N`.
    pub fn w(&self, n: usize) -> LogScalar {
        LogScalar::from_log(self.log_w[n - 1].clone())
    }

    pub fn log_capacity(&self) -> &Float {
        &self.log_capacity
    }

    pub fn is_dyadic(n: usize) -> bool {
        n.is_power_of_two()
    }
}

/// `W_1 … W_N`.
pub fn widom_factors(spec: &GammaSpec, n: usize) -> Result<WidomSeries> {
    let table = jacobi_coefficients(spec, n)?;
    widom_from_table(spec, &table)
}

/// `log W_n = ½ Σ_{i≤n} log a_i² − n log Cap`, carried at the table's working
/// precision and rounded at the end.
pub fn widom_from_table(spec: &GammaSpec, table: &JacobiTable) -> Result<WidomSeries> {
    let out = table.precision_bits();
    let work = table.working_bits();
    let log_cap = spec.with_precision(work)?.log_capacity()?;
    let log_w = (1..=table.len())
        .into_par_iter()
        .map(|n| {
            let half = Float::with_val(work, table.prefix_log(n) / 2u32);
            Float::with_val(out, half - Float::with_val(work, &log_cap * n as u64))
        })
        .collect();
    Ok(WidomSeries {
        log_w,
        log_capacity: Float::with_val(out, log_cap),
    })
}

/// `W_{2^s} = √(1-2γ_{s+1}) / (2 exp(Σ_{k>s} 2^{s-k} log γ_k))`.
pub fn widom_dyadic_closed(spec: &GammaSpec, s: u32) -> Result<LogScalar> {
    let prec = spec.precision();
    let g = spec.gamma_float(s + 1);
    let head = Float::with_val(prec, 1 - Float::with_val(prec, &g * 2u32)).ln() / 2u32;
    let log2 = Float::with_val(prec, rug::float::Constant::Log2);
    let tail = spec.weighted_log_tail(s)?;
    Ok(LogScalar::from_log(head - log2 - tail))
}

/// Extremes of `W_n` over the dyadic block `2^s ≤ n < 2^{s+1}`.
#[derive(Clone, Debug)]
pub struct BlockReport {
    pub s: u32,
    /// Inclusive range of indices examined.
    pub horizon: (usize, usize),
    pub argmin: usize,
    pub min: LogScalar,
    pub argmax: usize,
    pub max: LogScalar,
    /// The block minimum sits at `n = 2^s`.
    pub min_at_dyadic: bool,
}

/// Block extremes for level `s` from a fresh table.
pub fn widom_min_check(spec: &GammaSpec, s: u32) -> Result<BlockReport> {
    if !spec.jac3_regime() {
        return Err(Error::Domain("the block minimum check needs every gamma <= 1/6".into()));
    }
    let end = 1usize
        .checked_shl(s + 1)
        .ok_or_else(|| Error::Domain(format!("level {s} is too large")))?;
    let series = widom_factors(spec, end - 1)?;
    block_report(&series, s)
}

/// Block extremes for level `s` from an existing series.
pub fn block_report(series: &WidomSeries, s: u32) -> Result<BlockReport> {
    let start = 1usize << s;
    let end = (start << 1) - 1;
    if end > series.len() {
        return Err(Error::Domain(format!(
            "block {start}..={end} exceeds the series length {}",
            series.len()
        )));
    }
    let (mut argmin, mut argmax) = (start, start);
    for n in start..=end {
        if series.log_w[n - 1] < series.log_w[argmin - 1] {
            argmin = n;
        }
        if series.log_w[n - 1] > series.log_w[argmax - 1] {
            argmax = n;
        }
    }
    Ok(BlockReport {
        s,
        horizon: (start, end),
        argmin,
        min: series.w(argmin),
        argmax,
        max: series.w(argmax),
        min_at_dyadic: argmin == start,
    })
}
