//! Jacobi parameters `a_n` of the equilibrium measure (`b_n = 1/2` throughout).
//!
//! The table stores prefix sums `S[n] = Σ_{i≤n} log a_i²` with guard bits;
//! every block product is one subtraction and one exponential. At dyadic
//! indices `S[2^s] = log ‖Q_{2^s}‖²` is set directly, so the sums never drift
//! across levels.

use std::fs;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rug::Float;

use crate::error::{Error, Result};
use crate::gamma::{GammaSpec, MAX_PRECISION};
use crate::numeric::LogScalar;

/// Entries between checkpoint writes.
pub const CHECKPOINT_INTERVAL: usize = 1 << 16;

const MAGIC: &[u8; 8] = b"KGJACOBI";
const VERSION: u32 = 1;

/// Computed `a_1 … a_N`.
#[derive(Clone, Debug)]
pub struct JacobiTable {
    /// `prefix[n] = Σ_{i≤n} log a_i²`, `prefix[0] = 0`.
    prefix: Vec<Float>,
    precision_bits: u32,
    working_bits: u32,
    loss_high_water: f64,
    spec_hash: [u8; 32],
}

impl JacobiTable {
    /// `N`.
    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Precision of the reported values.
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Precision the prefix sums are carried at.
    pub fn working_bits(&self) -> u32 {
        self.working_bits
    }

    /// Largest cancellation seen in a rec2 numerator, in bits.
    pub fn loss_high_water(&self) -> f64 {
        self.loss_high_water
    }

    pub fn spec_hash(&self) -> &[u8; 32] {
        &self.spec_hash
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::Domain(format!(
                "index {n} outside the table 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `Σ_{i≤n} log a_i²` at working precision.
    pub fn prefix_log(&self, n: usize) -> &Float {
        &self.prefix[n]
    }

    /// `log a_n²`.
    pub fn log_a_sq(&self, n: usize) -> Float {
        Float::with_val(self.precision_bits, &self.prefix[n] - &self.prefix[n - 1])
    }

    pub fn log_a(&self, n: usize) -> LogScalar {
        LogScalar::from_log(self.log_a_sq(n) / 2u32)
    }

    /// `a_n`.
    pub fn a(&self, n: usize) -> Float {
        self.log_a(n).value()
    }

    pub fn a_values(&self) -> Vec<Float> {
        (1..=self.len()).map(|n| self.a(n)).collect()
    }

    pub fn log_a_values(&self) -> Vec<LogScalar> {
        (1..=self.len()).map(|n| self.log_a(n)).collect()
    }

    /// `∏_{i=lo}^{hi} a_i²` (empty product when `lo > hi`).
    pub fn product_sq(&self, lo: usize, hi: usize) -> Result<LogScalar> {
        if lo == 0 || hi > self.len() {
            return Err(Error::Domain(format!(
                "window {lo}..={hi} outside the table 1..={}",
                self.len()
            )));
        }
        if lo > hi {
            return Ok(LogScalar::one(self.precision_bits));
        }
        Ok(LogScalar::from_log(Float::with_val(
            self.precision_bits,
            &self.prefix[hi] - &self.prefix[lo - 1],
        )))
    }

    /// `‖Q_n‖² = a_1² ⋯ a_n²`.
    pub fn norm_sq(&self, n: usize) -> Result<LogScalar> {
        self.product_sq(1, n)
    }

    /// `a_1 ⋯ a_n`.
    pub fn norm(&self, n: usize) -> Result<LogScalar> {
        Ok(self.norm_sq(n)?.sqrt())
    }

    /// Drops entries beyond `n`.
    pub fn truncate(&mut self, n: usize) {
        self.prefix.truncate(n + 1);
    }
}

/// Knobs for [`jacobi_coefficients_with`].
#[derive(Clone, Debug, Default)]
pub struct JacobiOptions {
    /// Highest precision tried before giving up; defaults to 16x the output precision.
    pub max_precision_bits: Option<u32>,
    /// Resume from and periodically write to this file.
    pub checkpoint: Option<PathBuf>,
}

/// `a_1 … a_N` with default options.
pub fn jacobi_coefficients(spec: &GammaSpec, n: usize) -> Result<JacobiTable> {
    jacobi_coefficients_with(spec, n, &JacobiOptions::default())
}

/// Extra bits carried by the prefix sums; their magnitude grows with `N`.
const GUARD_BITS: u32 = 96;

/// `a_1 … a_N`. Restarts at doubled precision whenever a rec2 numerator
/// loses more than half the attempt's bits to cancellation.
pub fn jacobi_coefficients_with(
    spec: &GammaSpec,
    n: usize,
    options: &JacobiOptions,
) -> Result<JacobiTable> {
    if n == 0 {
        return Err(Error::Domain("the table needs N >= 1".into()));
    }
    let out = spec.precision();
    let ceiling = options
        .max_precision_bits
        .unwrap_or(out.saturating_mul(16))
        .clamp(out, MAX_PRECISION);

    let mut start = None;
    if let Some(path) = &options.checkpoint {
        if path.exists() {
            let mut table = read_checkpoint(path, spec)?;
            if table.len() >= n {
                table.truncate(n);
                return Ok(table);
            }
            start = Some(table);
        }
    }

    let mut attempt = start.as_ref().map_or(out, |t| t.working_bits - GUARD_BITS);
    loop {
        let mut table = start.take().unwrap_or_else(|| JacobiTable {
            prefix: vec![Float::new(attempt + GUARD_BITS)],
            precision_bits: out,
            working_bits: attempt + GUARD_BITS,
            loss_high_water: 0.0,
            spec_hash: spec.hash(),
        });
        let threshold = (attempt / 2) as f64;
        match extend(&mut table, spec, n, threshold, options.checkpoint.as_deref())? {
            None => return Ok(table),
            Some((index, loss)) => {
                if attempt >= ceiling {
                    return Err(Error::precision(
                        attempt,
                        format!("a_{index}: rec2 numerator lost {loss:.1} bits to cancellation"),
                    ));
                }
                attempt = (attempt * 2).min(ceiling);
            }
        }
    }
}

/// Appends entries until the table holds `n`. Returns the first index whose
/// cancellation exceeded `threshold` bits, leaving the table unchanged past
/// the last good entry.
fn extend(
    table: &mut JacobiTable,
    spec: &GammaSpec,
    n: usize,
    threshold: f64,
    checkpoint: Option<&Path>,
) -> Result<Option<(usize, f64)>> {
    let prec = table.working_bits;
    let work = spec.with_precision(prec)?;
    let top = usize::BITS - n.leading_zeros();
    let log_norm: Vec<Float> = (0..=top).map(|s| work.q_norm_sq(s).ln().clone()).collect();
    let norm: Vec<Float> = log_norm.iter().map(|l| Float::with_val(prec, l.exp_ref())).collect();
    let ln2 = Float::with_val(prec, rug::float::Constant::Log2).to_f64();

    table.prefix.reserve(n + 1 - table.prefix.len().min(n + 1));
    for m in table.prefix.len()..=n {
        let s = m.trailing_zeros();
        let odd = m >> s;
        let next = if odd == 1 {
            log_norm[s as usize].clone()
        } else {
            let k = (odd - 1) / 2;
            let even_end = k << (s + 1);
            let even_start = even_end - (1 << s);
            let block = Float::with_val(prec, &table.prefix[even_end] - &table.prefix[even_start]).exp();
            let num = Float::with_val(prec, &norm[s as usize] - &block);
            let loss = if num.cmp0() == Some(std::cmp::Ordering::Greater) {
                (Float::with_val(prec, &log_norm[s as usize] - num.clone().ln()).to_f64() / ln2).max(0.0)
            } else {
                f64::INFINITY
            };
            if loss > threshold {
                return Ok(Some((m, loss)));
            }
            table.loss_high_water = table.loss_high_water.max(loss);
            // a_m² = num / ∏_{i=even_end+1}^{m-1} a_i²
            let denom = Float::with_val(prec, &table.prefix[m - 1] - &table.prefix[even_end]);
            let log_a_sq = num.ln() - denom;
            Float::with_val(prec, &table.prefix[m - 1] + &log_a_sq)
        };
        table.prefix.push(next);
        if let Some(path) = checkpoint {
            if m % CHECKPOINT_INTERVAL == 0 || m == n {
                write_checkpoint(table, path)?;
            }
        }
    }
    Ok(None)
}

/// Writes a versioned binary record: magic, version, spec hash, precisions,
/// loss high-water mark, `N`, then `N + 1` prefix sums as exact hex strings.
pub fn write_checkpoint(table: &JacobiTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&table.spec_hash);
    buf.extend_from_slice(&table.precision_bits.to_le_bytes());
    buf.extend_from_slice(&table.working_bits.to_le_bytes());
    buf.extend_from_slice(&table.loss_high_water.to_bits().to_le_bytes());
    buf.extend_from_slice(&(table.len() as u64).to_le_bytes());
    for value in &table.prefix {
        let text = value.to_string_radix(16, None);
        buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
    }
    let tmp = path.with_extension("partial");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Config("checkpoint file is truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Loads a checkpoint written for `spec` at the same output precision.
pub fn read_checkpoint(path: &Path, spec: &GammaSpec) -> Result<JacobiTable> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes };
    if cur.take(8)? != MAGIC {
        return Err(Error::Config(format!("{} is not a Jacobi checkpoint", path.display())));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Config(format!("unsupported checkpoint version {version}")));
    }
    let hash: [u8; 32] = cur.take(32)?.try_into().unwrap();
    if hash != spec.hash() {
        return Err(Error::Config("checkpoint was written for a different gamma sequence".into()));
    }
    let precision_bits = cur.u32()?;
    if precision_bits != spec.precision() {
        return Err(Error::Config(format!(
            "checkpoint precision {precision_bits} differs from requested {}",
            spec.precision()
        )));
    }
    let working_bits = cur.u32()?;
    let loss_high_water = f64::from_bits(cur.u64()?);
    let n = cur.u64()? as usize;
    let mut prefix = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let len = cur.u32()? as usize;
        let text = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Config("checkpoint entry is not text".into()))?;
        let value = Float::parse_radix(text, 16)
            .map_err(|e| Error::Config(format!("bad checkpoint entry: {e}")))?;
        prefix.push(Float::with_val(working_bits, value));
    }
    if !cur.bytes.is_empty() {
        return Err(Error::Config("trailing bytes in checkpoint".into()));
    }
    Ok(JacobiTable {
        prefix,
        precision_bits,
        working_bits,
        loss_high_water,
        spec_hash: hash,
    })
}

/// `∏ a_i²` over the `2^s` indices ending at `n`.
pub fn block_product(table: &JacobiTable, n: usize, s: u32) -> Result<LogScalar> {
    let width = 1usize
        .checked_shl(s)
        .filter(|&w| w <= n)
        .ok_or_else(|| Error::Domain(format!("window of length 2^{s} ending at {n} starts before 1")))?;
    table.check_index(n)?;
    table.product_sq(n - width + 1, n)
}

/// Constants and brackets for the blocks at level `s`.
#[derive(Clone, Debug)]
pub struct Jac3Bounds {
    pub s: u32,
    /// `4γ²/(1-2γ)²` with `γ = γ_{s+1}`.
    pub c: Float,
    /// `2/(1+√(1-4c))`.
    pub big_c: Float,
    /// `‖Q_{2^s}‖²/C`, lower end for blocks ending at an odd multiple of `2^s`.
    pub lower: LogScalar,
    /// `‖Q_{2^s}‖²`, upper end for the same blocks.
    pub upper: LogScalar,
    /// `C‖Q_{2^{s+1}}‖²/‖Q_{2^s}‖²`, upper end for blocks ending at an even multiple.
    pub even_upper: LogScalar,
}

pub fn jac3_bounds(spec: &GammaSpec, s: u32) -> Result<Jac3Bounds> {
    if !spec.jac3_regime() {
        return Err(Error::Domain("block bounds need every gamma <= 1/6".into()));
    }
    let prec = spec.precision();
    let g = spec.gamma_float(s + 1);
    let one_minus = Float::with_val(prec, 1 - Float::with_val(prec, &g * 2u32));
    let c = Float::with_val(prec, g.square_ref()) * 4u32 / Float::with_val(prec, one_minus.square_ref());
    let root = Float::with_val(prec, 1 - Float::with_val(prec, &c * 4u32)).max(&Float::new(prec)).sqrt();
    let big_c = Float::with_val(prec, 2) / (root + 1u32);
    let log_c = Float::with_val(prec, big_c.ln_ref());
    let upper = spec.q_norm_sq(s);
    let lower = LogScalar::from_log(Float::with_val(prec, upper.ln() - &log_c));
    let ratio = &spec.q_norm_sq(s + 1) / &upper;
    let even_upper = LogScalar::from_log(Float::with_val(prec, ratio.ln() + &log_c));
    Ok(Jac3Bounds { s, c, big_c, lower, upper, even_upper })
}

/// One sample of `a_{j·2^s+n}` and its distance from `a_n` (`a_0 := 0`).
#[derive(Clone, Debug)]
pub struct LimitSample {
    pub s: u32,
    pub index: usize,
    pub a: Float,
    pub deviation: Float,
}

/// Samples `a_{j·2^s+n}` for `s` in `levels`, computing the table it needs.
pub fn limit_profile(
    spec: &GammaSpec,
    j: usize,
    n: usize,
    levels: RangeInclusive<u32>,
) -> Result<Vec<LimitSample>> {
    if !spec.jac3_regime() {
        return Err(Error::Domain("limit profiles need every gamma <= 1/6".into()));
    }
    let last = limit_index(j, n, *levels.end())?;
    let table = jacobi_coefficients(spec, last.max(n).max(1))?;
    limit_profile_from(&table, j, n, levels)
}

fn limit_index(j: usize, n: usize, s: u32) -> Result<usize> {
    j.checked_mul(1usize.checked_shl(s).unwrap_or(0))
        .filter(|&v| v > 0)
        .and_then(|v| v.checked_add(n))
        .ok_or_else(|| Error::Domain(format!("index j*2^s+n overflows for j={j}, s={s}")))
}

pub fn limit_profile_from(
    table: &JacobiTable,
    j: usize,
    n: usize,
    levels: RangeInclusive<u32>,
) -> Result<Vec<LimitSample>> {
    if j == 0 {
        return Err(Error::Domain("j must be positive".into()));
    }
    let prec = table.precision_bits();
    let base = if n == 0 { Float::new(prec) } else { table.a(n) };
    levels
        .map(|s| {
            let index = limit_index(j, n, s)?;
            table.check_index(index)?;
            let a = table.a(index);
            let deviation = Float::with_val(prec, &a - &base).abs();
            Ok(LimitSample { s, index, a, deviation })
        })
        .collect()
}
