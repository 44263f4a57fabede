//! The parameter sequence `γ`, the scales `r_s`, the capacity of `K(γ)` and
//! the norms `‖Q_{2^s}‖²`.

use std::fmt;
use std::sync::{Arc, RwLock};

use rug::{Float, Rational};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric::{half_precision_tolerance, parse_exact, LogScalar, DEFAULT_PRECISION};

pub const MIN_PRECISION: u32 = 32;
pub const MAX_PRECISION: u32 = 1 << 20;

/// Number of leading terms of a custom tail checked against the declared bound.
const CUSTOM_TAIL_SAMPLE: u64 = 1024;

/// A programmatic tail `t ↦ γ_{P+t}` (t ≥ 1) with a declared supremum.
///
/// Used for sequences that are neither constant nor periodic. The capacity of
/// such a set has no closed form here, but Jacobi parameters do not need it.
#[derive(Clone)]
pub struct CustomTail {
    pub name: String,
    pub rule: fn(u64) -> Rational,
    pub supremum: Rational,
}

impl fmt::Debug for CustomTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTail")
            .field("name", &self.name)
            .field("supremum", &self.supremum)
            .finish()
    }
}

/// How `γ_s` continues past the explicit prefix. Tail positions are 1-based:
/// position `t` is `γ_{P+t}`.
#[derive(Clone, Debug)]
pub enum Tail {
    Constant(Rational),
    Periodic(Vec<Rational>),
    /// `γ_{P+2j} = even`, `γ_{P+2j-1} = 1/(j + shift)`.
    AlternatingReciprocal { even: Rational, shift: u64 },
    Custom(CustomTail),
}

impl Tail {
    fn at(&self, t: u64) -> Rational {
        debug_assert!(t >= 1);
        match self {
            Tail::Constant(c) => c.clone(),
            Tail::Periodic(period) => period[((t - 1) % period.len() as u64) as usize].clone(),
            Tail::AlternatingReciprocal { even, shift } => {
                if t % 2 == 0 {
                    even.clone()
                } else {
                    Rational::from((1u64, t.div_ceil(2) + shift))
                }
            }
            Tail::Custom(custom) => (custom.rule)(t),
        }
    }

    /// Least upper bound of the tail values.
    fn supremum(&self) -> Rational {
        match self {
            Tail::Constant(c) => c.clone(),
            Tail::Periodic(p) => p.iter().max().cloned().unwrap_or_default(),
            Tail::AlternatingReciprocal { even, shift } => {
                let odd = Rational::from((1u64, 1 + shift));
                if *even > odd {
                    even.clone()
                } else {
                    odd
                }
            }
            Tail::Custom(c) => c.supremum.clone(),
        }
    }

    fn canonical(&self) -> String {
        match self {
            Tail::Constant(c) => format!("const:{c}"),
            Tail::Periodic(p) => format!("periodic:{}", join(p)),
            Tail::AlternatingReciprocal { even, shift } => {
                format!("alternating:even={even},shift={shift}")
            }
            Tail::Custom(c) => format!("custom:{}", c.name),
        }
    }
}

fn join(values: &[Rational]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn quarter() -> Rational {
    Rational::from((1, 4))
}

fn sixth() -> Rational {
    Rational::from((1, 6))
}

fn check_gamma(value: &Rational, what: &str) -> Result<()> {
    if value.cmp0() != std::cmp::Ordering::Greater {
        return Err(Error::Config(format!("{what} = {value} must be positive")));
    }
    if *value > quarter() {
        return Err(Error::Config(format!("{what} = {value} exceeds 1/4")));
    }
    Ok(())
}

/// Memoized `log r_s` and `log ‖Q_{2^s}‖²`. Filling is idempotent: any thread
/// extending the table writes the same values.
#[derive(Debug, Default)]
struct NormTable {
    log_r: RwLock<Vec<Float>>,
    log_norm: RwLock<Vec<Float>>,
}

/// The parameter sequence `γ = (γ_s)_{s≥1}` together with the working
/// precision used for every derived quantity.
#[derive(Clone, Debug)]
pub struct GammaSpec {
    prefix: Vec<Rational>,
    tail: Tail,
    precision_bits: u32,
    note: Option<String>,
    jac3_regime: bool,
    cache: Arc<NormTable>,
}

impl GammaSpec {
    pub fn new(prefix: Vec<Rational>, tail: Tail, precision_bits: u32) -> Result<Self> {
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision_bits) {
            return Err(Error::Config(format!(
                "precision_bits = {precision_bits} outside [{MIN_PRECISION}, {MAX_PRECISION}]"
            )));
        }
        for (i, g) in prefix.iter().enumerate() {
            check_gamma(g, &format!("gamma_{}", i + 1))?;
        }
        match &tail {
            Tail::Constant(c) => check_gamma(c, "tail constant")?,
            Tail::Periodic(p) => {
                if p.is_empty() {
                    return Err(Error::Config("periodic tail needs at least one value".into()));
                }
                for g in p {
                    check_gamma(g, "periodic tail value")?;
                }
            }
            Tail::AlternatingReciprocal { even, shift } => {
                check_gamma(even, "alternating even value")?;
                if *shift < 3 {
                    return Err(Error::Config(format!(
                        "alternating tail shift {shift} gives 1/{} > 1/4",
                        1 + shift
                    )));
                }
            }
            Tail::Custom(custom) => {
                check_gamma(&custom.supremum, "custom tail supremum")?;
                for t in 1..=CUSTOM_TAIL_SAMPLE {
                    let g = (custom.rule)(t);
                    check_gamma(&g, &format!("custom tail term {t}"))?;
                    if g > custom.supremum {
                        return Err(Error::Config(format!(
                            "custom tail term {t} = {g} exceeds its declared supremum"
                        )));
                    }
                }
            }
        }
        let sixth = sixth();
        let jac3_regime = prefix.iter().all(|g| *g <= sixth) && tail.supremum() <= sixth;
        Ok(GammaSpec {
            prefix,
            tail,
            precision_bits,
            note: None,
            jac3_regime,
            cache: Arc::new(NormTable::default()),
        })
    }

    pub fn constant(value: Rational, precision_bits: u32) -> Result<Self> {
        GammaSpec::new(Vec::new(), Tail::Constant(value), precision_bits)
    }

    /// Same sequence at a different working precision (fresh caches).
    pub fn with_precision(&self, precision_bits: u32) -> Result<Self> {
        let mut spec = GammaSpec::new(self.prefix.clone(), self.tail.clone(), precision_bits)?;
        spec.note = self.note.clone();
        Ok(spec)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Free-form remark attached by presets (e.g. an index shift).
    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    pub fn prefix(&self) -> &[Rational] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn precision(&self) -> u32 {
        self.precision_bits
    }

    /// `2^-(precision/2)`.
    pub fn tolerance(&self) -> Float {
        half_precision_tolerance(self.precision_bits)
    }

    /// True iff every `γ_s ≤ 1/6`.
    pub fn jac3_regime(&self) -> bool {
        self.jac3_regime
    }

    /// `γ_s` for `s ≥ 1`.
    pub fn gamma(&self, s: u32) -> Rational {
        assert!(s >= 1, "gamma is indexed from 1");
        let p = self.prefix.len() as u64;
        let s = s as u64;
        if s <= p {
            self.prefix[(s - 1) as usize].clone()
        } else {
            self.tail.at(s - p)
        }
    }

    pub fn gamma_float(&self, s: u32) -> Float {
        Float::with_val(self.precision_bits, &self.gamma(s))
    }

    fn log_gamma(&self, s: u32) -> Float {
        self.gamma_float(s).ln()
    }

    /// Canonical text form of the sequence (precision excluded).
    pub fn canonical(&self) -> String {
        format!("prefix=[{}];tail={}", join(&self.prefix), self.tail.canonical())
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    fn fill_log_r(&self, s: u32) -> Float {
        if let Some(v) = self.cache.log_r.read().unwrap().get(s as usize) {
            return v.clone();
        }
        let mut table = self.cache.log_r.write().unwrap();
        if table.is_empty() {
            table.push(Float::new(self.precision_bits));
        }
        while table.len() <= s as usize {
            let k = table.len() as u32;
            let prev = &table[k as usize - 1];
            let next = Float::with_val(self.precision_bits, prev * 2u32) + self.log_gamma(k);
            table.push(next);
        }
        table[s as usize].clone()
    }

    /// `r_s` with `r_0 = 1`, `r_s = γ_s r_{s-1}²`.
    pub fn r_value(&self, s: u32) -> LogScalar {
        LogScalar::from_log(self.fill_log_r(s))
    }

    /// Linear `r_s`.
    pub fn r_linear(&self, s: u32) -> Float {
        self.r_value(s).value()
    }

    /// `‖Q_{2^s}‖² = (1 - 2γ_{s+1}) r_s² / 4`.
    pub fn q_norm_sq(&self, s: u32) -> LogScalar {
        if let Some(v) = self.cache.log_norm.read().unwrap().get(s as usize) {
            return LogScalar::from_log(v.clone());
        }
        let upto: Vec<Float> = {
            let have = self.cache.log_norm.read().unwrap().len() as u32;
            (have..=s)
                .map(|k| {
                    let g = self.gamma(k + 1);
                    let factor = Rational::from(1) - Rational::from(2) * g;
                    let mut v = Float::with_val(self.precision_bits, &factor).ln();
                    v += Float::with_val(self.precision_bits, self.fill_log_r(k) * 2u32);
                    v -= Float::with_val(self.precision_bits, 4).ln();
                    v
                })
                .collect()
        };
        let mut table = self.cache.log_norm.write().unwrap();
        let start = s as usize + 1 - upto.len();
        for (i, v) in upto.into_iter().enumerate() {
            if table.len() == start + i {
                table.push(v);
            }
        }
        LogScalar::from_log(table[s as usize].clone())
    }

    /// `Σ_{k>s} 2^{s-k} log γ_k`, evaluated as a finite sum plus the closed
    /// form of the tail.
    pub fn weighted_log_tail(&self, s: u32) -> Result<Float> {
        let prec = self.precision_bits;
        let p = self.prefix.len() as u32;
        let mut acc = Float::new(prec);
        for k in (s + 1)..=p {
            let mut term = self.log_gamma(k);
            term >>= k - s;
            acc += term;
        }
        // tail positions already consumed before level max(s, P)
        let consumed = s.saturating_sub(p) as u64;
        let mut tail = self.tail_weighted_sum(consumed)?;
        tail >>= p.saturating_sub(s);
        acc += tail;
        Ok(acc)
    }

    /// `Σ_{u≥1} 2^{-u} log g_{t0+u}` over tail positions.
    fn tail_weighted_sum(&self, t0: u64) -> Result<Float> {
        let prec = self.precision_bits;
        match &self.tail {
            Tail::Constant(c) => Ok(Float::with_val(prec, c).ln()),
            Tail::Periodic(period) => {
                let len = period.len() as u64;
                let mut acc = Float::new(prec);
                for i in 1..=len {
                    let mut term = Float::with_val(prec, &self.tail.at(t0 + i)).ln();
                    term >>= i as u32;
                    acc += term;
                }
                let mut denom = Float::with_val(prec, 1);
                denom -= Float::with_val(prec, Float::i_exp(1, -(len as i32)));
                Ok(acc / denom)
            }
            Tail::AlternatingReciprocal { shift, .. } => {
                // |log g_t| ≤ log(t + shift + 1); the remainder after U terms is
                // below 2^-U (log(t0 + U + shift + 1) + 1).
                let guard = (((t0 + prec as u64 + shift + 64) as f64).ln().ln_1p() / 2f64.ln())
                    .ceil() as u64;
                let terms = prec as u64 + 8 + guard.max(1);
                let mut acc = Float::new(prec);
                for u in 1..=terms {
                    let mut term = Float::with_val(prec, &self.tail.at(t0 + u)).ln();
                    term >>= u as u32;
                    acc += term;
                }
                Ok(acc)
            }
            Tail::Custom(_) => Err(Error::NoClosedForm),
        }
    }

    /// `log Cap(K(γ)) = Σ_{k≥1} 2^{-k} log γ_k`.
    pub fn log_capacity(&self) -> Result<Float> {
        self.weighted_log_tail(0)
    }

    pub fn capacity(&self) -> Result<LogScalar> {
        Ok(LogScalar::from_log(self.log_capacity()?))
    }

    /// The capacity series truncated after `depth` terms. Works for any tail.
    pub fn log_capacity_truncated(&self, depth: u32) -> Float {
        let mut acc = Float::new(self.precision_bits);
        for k in 1..=depth {
            let mut term = self.log_gamma(k);
            term >>= k;
            acc += term;
        }
        acc
    }

    /// Smallest `γ_k` over `k ≤ depth`.
    pub fn min_gamma_upto(&self, depth: u32) -> Rational {
        (1..=depth.max(1)).map(|k| self.gamma(k)).min().unwrap()
    }
}

/// Accepts strings (`"1/6"`, `"0.25"`) as well as bare TOML numbers.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Text(String),
    Int(i64),
    Float(f64),
}

impl RawValue {
    fn exact(&self) -> Result<Rational> {
        match self {
            RawValue::Text(t) => parse_exact(t),
            RawValue::Int(i) => Ok(Rational::from(*i)),
            RawValue::Float(f) => parse_exact(&format!("{f:?}")),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTail {
    kind: String,
    values: Vec<RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    prefix: Vec<RawValue>,
    tail: RawTail,
    precision_bits: Option<u32>,
}

fn parse_values(raw: &[RawValue]) -> Result<Vec<Rational>> {
    raw.iter().map(RawValue::exact).collect()
}

fn tail_from(kind: &str, values: Vec<Rational>) -> Result<Tail> {
    match kind {
        "constant" | "const" => match <[Rational; 1]>::try_from(values) {
            Ok([v]) => Ok(Tail::Constant(v)),
            Err(v) => Err(Error::Config(format!(
                "constant tail takes exactly one value, got {}",
                v.len()
            ))),
        },
        "periodic" | "repeat" => Ok(Tail::Periodic(values)),
        other => Err(Error::Config(format!(
            "unknown tail kind `{other}` (expected constant or periodic)"
        ))),
    }
}

impl GammaSpec {
    /// Reads the structured text config:
    ///
    /// ```toml
    /// prefix = ["1/5", "1/7"]
    /// precision_bits = 256
    /// [tail]
    /// kind = "constant"   # or "periodic"
    /// values = ["1/6"]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad gamma config: {e}")))?;
        let prefix = parse_values(&raw.prefix)?;
        let tail = tail_from(&raw.tail.kind, parse_values(&raw.tail.values)?)?;
        GammaSpec::new(prefix, tail, raw.precision_bits.unwrap_or(DEFAULT_PRECISION))
    }

    /// Inline grammar: `const:<v>`, `periodic:<v1,...,vp>`,
    /// `list:<v1,...>;tail=const:<v>` or `list:<v1,...>;tail=periodic:<...>`.
    pub fn parse_inline(text: &str, precision_bits: u32) -> Result<Self> {
        let text = text.trim();
        let values = |list: &str| -> Result<Vec<Rational>> {
            list.split(',')
                .filter(|v| !v.trim().is_empty())
                .map(parse_exact)
                .collect()
        };
        let simple_tail = |t: &str| -> Result<Tail> {
            let (kind, rest) = t
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("malformed tail `{t}`")))?;
            tail_from(kind.trim(), values(rest)?)
        };
        if let Some(rest) = text.strip_prefix("list:") {
            let (list, tail) = rest.split_once(';').ok_or_else(|| {
                Error::Config("list: form needs `;tail=const:<v>` or `;tail=periodic:<...>`".into())
            })?;
            let tail = tail
                .trim()
                .strip_prefix("tail=")
                .ok_or_else(|| Error::Config(format!("expected `tail=` in `{tail}`")))?;
            GammaSpec::new(values(list)?, simple_tail(tail)?, precision_bits)
        } else if text.starts_with("const:") || text.starts_with("periodic:") {
            GammaSpec::new(Vec::new(), simple_tail(text)?, precision_bits)
        } else {
            Err(Error::Config(format!(
                "unrecognized gamma `{text}` (use const:, periodic: or list:...;tail=...)"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn close(a: &Float, b: &Rational, tol: f64) -> bool {
        let b = Float::with_val(a.prec(), b);
        crate::numeric::rel_diff(a, &b) < tol
    }

    #[test]
    fn r_value_examples() {
        let quarter = GammaSpec::constant(q(1, 4), 256).unwrap();
        assert_eq!(quarter.r_linear(0), 1);
        assert!(close(&quarter.r_linear(3), &q(1, 16384), 1e-70));
        let spec = GammaSpec::new(vec![q(1, 5), q(1, 6)], Tail::Constant(q(1, 6)), 256).unwrap();
        assert!(close(&spec.r_linear(2), &q(1, 150), 1e-70));
    }

    #[test]
    fn capacity_examples() {
        let quarter = GammaSpec::constant(q(1, 4), 256).unwrap();
        assert!(close(&quarter.capacity().unwrap().value(), &q(1, 4), 1e-70));
        let sixth = GammaSpec::constant(q(1, 6), 256).unwrap();
        assert!(close(&sixth.capacity().unwrap().value(), &q(1, 6), 1e-70));
        let mixed = GammaSpec::new(vec![q(1, 5)], Tail::Constant(q(1, 4)), 256).unwrap();
        let expected = Float::with_val(256, 20).sqrt().recip();
        assert!(crate::numeric::rel_diff(&mixed.capacity().unwrap().value(), &expected) < 1e-70);
    }

    #[test]
    fn periodic_capacity_matches_truncated_series() {
        let spec = GammaSpec::new(
            vec![q(1, 5), q(1, 7), q(1, 9)],
            Tail::Periodic(vec![q(1, 6), q(1, 10), q(1, 8)]),
            256,
        )
        .unwrap();
        let closed = spec.log_capacity().unwrap();
        let truncated = spec.log_capacity_truncated(300);
        assert!(Float::with_val(256, &closed - &truncated).abs() < 1e-75);
        for s in 0..10 {
            let tail = spec.weighted_log_tail(s).unwrap();
            let mut direct = Float::new(256);
            for k in (s + 1)..(s + 300) {
                let mut t = spec.log_gamma(k);
                t >>= k - s;
                direct += t;
            }
            assert!(Float::with_val(256, &tail - &direct).abs() < 1e-70, "s = {s}");
        }
    }

    #[test]
    fn alternating_tail_series() {
        let spec = GammaSpec::new(
            vec![],
            Tail::AlternatingReciprocal { even: q(1, 6), shift: 3 },
            256,
        )
        .unwrap();
        assert_eq!(spec.gamma(1), q(1, 4));
        assert_eq!(spec.gamma(2), q(1, 6));
        assert_eq!(spec.gamma(3), q(1, 5));
        assert!(!spec.jac3_regime());
        let closed = spec.log_capacity().unwrap();
        let truncated = spec.log_capacity_truncated(400);
        assert!(Float::with_val(256, &closed - &truncated).abs() < 1e-74);
    }

    #[test]
    fn custom_tail_has_no_closed_form() {
        fn decaying(t: u64) -> Rational {
            Rational::from((1u64, t + 5))
        }
        let spec = GammaSpec::new(
            vec![],
            Tail::Custom(CustomTail {
                name: "1/(t+5)".into(),
                rule: decaying,
                supremum: q(1, 6),
            }),
            128,
        )
        .unwrap();
        assert!(spec.jac3_regime());
        assert!(matches!(spec.capacity(), Err(Error::NoClosedForm)));
        assert_eq!(spec.gamma(7), q(1, 12));
    }

    #[test]
    fn norm_examples() {
        let quarter = GammaSpec::constant(q(1, 4), 256).unwrap();
        assert!(close(&quarter.q_norm_sq(0).value(), &q(1, 8), 1e-70));
        assert!(close(&quarter.q_norm_sq(1).value(), &q(1, 128), 1e-70));
        let sixth = GammaSpec::constant(q(1, 6), 256).unwrap();
        assert!(close(&sixth.q_norm_sq(1).value(), &q(1, 216), 1e-70));
        // out-of-order fills agree with in-order ones
        let fresh = GammaSpec::constant(q(1, 6), 256).unwrap();
        let deep = fresh.q_norm_sq(9);
        assert_eq!(deep, sixth.q_norm_sq(9));
        assert_eq!(fresh.q_norm_sq(3), sixth.q_norm_sq(3));
    }

    #[test]
    fn validation() {
        assert!(GammaSpec::constant(q(1, 3), 256).is_err());
        assert!(GammaSpec::constant(q(0, 1), 256).is_err());
        assert!(GammaSpec::constant(q(1, 4), 256).is_ok());
        assert!(GammaSpec::constant(q(1, 4), 8).is_err());
        assert!(GammaSpec::new(vec![], Tail::Periodic(vec![]), 256).is_err());
        assert!(GammaSpec::new(vec![q(3, 10)], Tail::Constant(q(1, 6)), 256).is_err());
        assert!(GammaSpec::constant(q(1, 6), 256).unwrap().jac3_regime());
        assert!(!GammaSpec::new(vec![q(1, 5)], Tail::Constant(q(1, 6)), 256)
            .unwrap()
            .jac3_regime());
    }

    #[test]
    fn inline_and_toml_configs() {
        let a = GammaSpec::parse_inline("list:1/5,0.125;tail=const:1/6", 128).unwrap();
        assert_eq!(a.gamma(1), q(1, 5));
        assert_eq!(a.gamma(2), q(1, 8));
        assert_eq!(a.gamma(3), q(1, 6));
        let b = GammaSpec::parse_inline("periodic:1/6,1/8", 128).unwrap();
        assert_eq!(b.gamma(3), q(1, 6));
        assert_eq!(b.gamma(4), q(1, 8));
        let c = GammaSpec::parse_inline("const:0.25", 128).unwrap();
        assert_eq!(c.gamma(99), q(1, 4));
        let d = GammaSpec::parse_inline("list:1/5;tail=periodic:1/6,1/7", 128).unwrap();
        assert_eq!(d.gamma(3), q(1, 7));
        assert!(GammaSpec::parse_inline("list:1/5", 128).is_err());
        assert!(GammaSpec::parse_inline("harmonic:1", 128).is_err());

        let toml = r#"
            prefix = ["1/5", 0.125]
            precision_bits = 320
            [tail]
            kind = "periodic"
            values = ["1/6", "1/10"]
        "#;
        let spec = GammaSpec::from_toml_str(toml).unwrap();
        assert_eq!(spec.precision(), 320);
        assert_eq!(spec.gamma(2), q(1, 8));
        assert_eq!(spec.gamma(4), q(1, 10));
        assert_eq!(spec.canonical(), "prefix=[1/5,1/8];tail=periodic:1/6,1/10");
        assert!(GammaSpec::from_toml_str("[tail]\nkind = \"constant\"\nvalues = [\"1/6\", \"1/7\"]").is_err());
        assert!(GammaSpec::from_toml_str("bogus = 1\n[tail]\nkind = \"constant\"\nvalues = [\"1/6\"]").is_err());
    }

    #[test]
    fn concurrent_readers_see_the_same_norms() {
        let spec = GammaSpec::constant(q(1, 7), 192).unwrap();
        let reference = GammaSpec::constant(q(1, 7), 192).unwrap();
        let expected: Vec<LogScalar> = (0..20).map(|s| reference.q_norm_sq(s)).collect();
        std::thread::scope(|scope| {
            for t in 0..8u32 {
                let spec = &spec;
                let expected = &expected;
                scope.spawn(move || {
                    for s in (0..20).rev().chain(0..20) {
                        let s = (s + t) % 20;
                        assert_eq!(spec.q_norm_sq(s), expected[s as usize]);
                    }
                });
            }
        });
    }

    proptest! {
        #[test]
        fn norm_ratio_invariant(gs in proptest::collection::vec(1u32..=600, 1..8), s in 0u32..6) {
            // γ = k/2400 ∈ (0, 1/4]
            let prefix: Vec<Rational> = gs.iter().map(|&k| Rational::from((k, 2400))).collect();
            let spec = GammaSpec::new(prefix, Tail::Constant(q(1, 6)), 192).unwrap();
            let ratio = &spec.q_norm_sq(s + 1) / &spec.q_norm_sq(s).square();
            let g1 = spec.gamma(s + 1);
            let g2 = spec.gamma(s + 2);
            let one = Rational::from(1);
            let expected = (one.clone() - Rational::from(2) * &g2) * Rational::from(4) * g1.clone() * &g1
                / ((one.clone() - Rational::from(2) * &g1) * (one - Rational::from(2) * &g1));
            prop_assert!(close(&ratio.value(), &expected, 1e-50));
            if spec.jac3_regime() {
                prop_assert!(ratio.value() < 0.25);
            }
        }

        #[test]
        fn capacity_is_monotone_in_each_gamma(gs in proptest::collection::vec(1u32..600, 1..6), idx in 0usize..6, bump in 1u32..50) {
            let prefix: Vec<Rational> = gs.iter().map(|&k| Rational::from((k, 2400))).collect();
            let idx = idx % prefix.len();
            let mut bigger = prefix.clone();
            bigger[idx] = Rational::from((gs[idx] + bump).min(600)) / 2400;
            prop_assume!(bigger[idx] > prefix[idx]);
            let a = GammaSpec::new(prefix, Tail::Constant(q(1, 5)), 128).unwrap();
            let b = GammaSpec::new(bigger, Tail::Constant(q(1, 5)), 128).unwrap();
            prop_assert!(b.log_capacity().unwrap() > a.log_capacity().unwrap());
        }

        #[test]
        fn truncation_error_bound(gs in proptest::collection::vec(1u32..=600, 1..10), d in 1u32..20) {
            let prefix: Vec<Rational> = gs.iter().map(|&k| Rational::from((k, 2400))).collect();
            let spec = GammaSpec::new(prefix, Tail::Periodic(vec![q(1, 9), q(1, 5)]), 128).unwrap();
            let full = spec.log_capacity().unwrap();
            let cut = spec.log_capacity_truncated(d);
            let err = Float::with_val(128, &full - &cut).abs();
            let min_gamma = spec.min_gamma_upto(4 * d + 40);
            let mut bound = Float::with_val(128, &min_gamma).ln().abs();
            bound >>= d;
            prop_assert!(err < bound);
            // doubling the depth shrinks the error
            let cut2 = spec.log_capacity_truncated(2 * d);
            prop_assert!(Float::with_val(128, &full - &cut2).abs() <= err);
        }
    }
}
