//! Moments of products of the dyadic orthogonal polynomials `Q_{2^k}` and
//! the expansion of a general `Q_n` over products fixed by the binary digits
//! of `n`.
//!
//! An [`AWord`] is a product `∏ Q_{2^{s_k}}^{i_k}` with distinct levels and
//! exponents in {1, 2}. Its integral against the equilibrium measure is
//! always zero or a product of squared norms `‖Q_{2^s}‖²`; [`Moment`] keeps
//! that structure exactly, so two independent evaluations can be compared
//! without rounding.

use std::fmt;

use rayon::prelude::*;
use rug::Float;

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::numeric::{half_precision_tolerance, LogScalar};
use crate::tower::q_pow2_values;

/// Default bound on the number of unknowns `k` in a Gram solve.
pub const DEFAULT_GRAM_LIMIT: u64 = 256;

/// `∏ Q_{2^{s_k}}^{i_k}` with `s_1 < s_2 < … < s_n` and `i_k ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AWord {
    /// `(level, exponent)`, ascending by level.
    factors: Vec<(u32, u8)>,
}

impl AWord {
    pub fn new(mut factors: Vec<(u32, u8)>) -> Result<Self> {
        factors.sort_unstable();
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("A-word levels must be distinct".into()));
        }
        if let Some(&(s, i)) = factors.iter().find(|f| f.1 != 1 && f.1 != 2) {
            return Err(Error::Domain(format!(
                "exponent {i} at level {s} is not in {{1, 2}}"
            )));
        }
        if factors.iter().any(|f| f.0 >= 120) {
            return Err(Error::Domain("A-word levels must be below 120".into()));
        }
        Ok(AWord { factors })
    }

    /// From per-level exponents (`exponents[s]` for level `s`), zeros dropped.
    pub fn from_exponents(exponents: &[u8]) -> Result<Self> {
        AWord::new(
            exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e != 0)
                .map(|(s, &e)| (s as u32, e))
                .collect(),
        )
    }

    /// Parses `"level:exp,level:exp,…"`, e.g. `"4:2,2:1"` for `Q_16² Q_4`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut factors = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (level, exp) = part.split_once(':').ok_or_else(|| {
                Error::Config(format!("A-word factor `{part}` is not `level:exponent`"))
            })?;
            let level: u32 = level
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad level in `{part}`")))?;
            let exp: u8 = exp
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad exponent in `{part}`")))?;
            factors.push((level, exp));
        }
        AWord::new(factors)
    }

    /// Every non-empty word whose levels are all `≤ max_level`.
    pub fn enumerate(max_level: u32) -> Vec<AWord> {
        let width = max_level as usize + 1;
        let total = 3usize.pow(width as u32);
        (1..total)
            .map(|mut code| {
                let mut exps = vec![0u8; width];
                for e in exps.iter_mut() {
                    *e = (code % 3) as u8;
                    code /= 3;
                }
                AWord::from_exponents(&exps).expect("enumerated words are valid")
            })
            .collect()
    }

    pub fn factors(&self) -> &[(u32, u8)] {
        &self.factors
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn top_level(&self) -> Option<u32> {
        self.factors.last().map(|f| f.0)
    }

    pub fn degree(&self) -> u128 {
        self.factors
            .iter()
            .map(|&(s, i)| (i as u128) << s)
            .sum()
    }

    /// Evaluates the product at `x`.
    pub fn eval(&self, spec: &GammaSpec, x: &Float) -> Float {
        let Some(top) = self.top_level() else {
            return Float::with_val(spec.precision(), 1);
        };
        self.eval_with(&q_pow2_values(spec, top, x), spec.precision())
    }

    /// Evaluates the product from precomputed `Q_{2^m}(x)` values.
    pub fn eval_with(&self, q_values: &[Float], prec: u32) -> Float {
        let mut acc = Float::with_val(prec, 1);
        for &(s, i) in &self.factors {
            let q = &q_values[s as usize];
            acc *= q;
            if i == 2 {
                acc *= q;
            }
        }
        acc
    }
}

impl fmt::Display for AWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .rev()
            .map(|(s, i)| format!("{s}:{i}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// The value of an A-word integral: zero, or `∏ ‖Q_{2^s}‖²` over a multiset
/// of levels (empty product = 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Moment {
    Zero,
    NormProduct(Vec<u32>),
}

impl Moment {
    fn product(mut levels: Vec<u32>) -> Self {
        levels.sort_unstable();
        Moment::NormProduct(levels)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Moment::Zero)
    }

    pub fn value(&self, spec: &GammaSpec) -> Option<LogScalar> {
        match self {
            Moment::Zero => None,
            Moment::NormProduct(levels) => {
                let mut log = Float::new(spec.precision());
                for &s in levels {
                    log += spec.q_norm_sq(s).ln();
                }
                Some(LogScalar::from_log(log))
            }
        }
    }

    /// Linear value, `0` for [`Moment::Zero`].
    pub fn to_float(&self, spec: &GammaSpec) -> Float {
        self.value(spec)
            .map_or_else(|| Float::new(spec.precision()), |v| v.value())
    }
}

/// Closed-form integral: with `c_k = (i_k - 1)^{s_k - s_{k-1} - 1}` and the
/// sentinel `i_{n+1} = 2`, the integral is `∏ c_k · ∏_k ‖Q_{2^{s_k}}‖^{2(i_{k+1}-1)}`.
///
/// Levels in the norm product are read as `s_k`. The bottom factor uses the
/// exponent `max(s_1, 1)`: a lone `Q_1` at the bottom is odd about `1/2` and
/// kills the integral just like a gap does.
pub fn closed_form(word: &AWord) -> Moment {
    let f = &word.factors;
    let mut previous: i64 = -1;
    for &(s, i) in f {
        let gap = s as i64 - previous - 1;
        let gap = if previous < 0 { gap.max(1) } else { gap };
        if i == 1 && gap > 0 {
            return Moment::Zero;
        }
        previous = s as i64;
    }
    let levels = f
        .iter()
        .enumerate()
        .filter(|&(k, _)| f.get(k + 1).map_or(2, |next| next.1) == 2)
        .map(|(_, &(s, _))| s)
        .collect();
    Moment::product(levels)
}

/// Integral by repeated reduction from the top factor:
/// (a) strip a squared top factor, (b) collapse a run of consecutive levels
/// with exponents `1, …, 1, 2`, (c) a run with a level gap vanishes,
/// (d) a run of ones reaching the bottom vanishes.
pub fn reduce(word: &AWord) -> Result<Moment> {
    let mut rest: Vec<(u32, u8)> = word.factors.clone();
    let mut levels = Vec::new();
    while let Some(&(top, exp)) = rest.last() {
        if exp == 2 {
            levels.push(top);
            rest.pop();
            continue;
        }
        // top exponent is 1; find the first square below it
        let Some(pos) = rest.iter().rposition(|f| f.1 == 2) else {
            return Ok(Moment::Zero);
        };
        let run = &rest[pos..];
        let consecutive = run
            .windows(2)
            .all(|w| w[1].0 == w[0].0 + 1);
        if !consecutive {
            return Ok(Moment::Zero);
        }
        if run.len() < 2 {
            return Err(Error::Internal(format!("no reduction applies to {word}")));
        }
        levels.push(top);
        rest.truncate(pos);
    }
    Ok(Moment::product(levels))
}

pub fn a_integral_closed(spec: &GammaSpec, word: &AWord) -> Option<LogScalar> {
    closed_form(word).value(spec)
}

pub fn a_integral_reduce(spec: &GammaSpec, word: &AWord) -> Result<Option<LogScalar>> {
    Ok(reduce(word)?.value(spec))
}

/// `n = 2^s (2k + 1)`.
pub fn decompose_index(n: u64) -> (u32, u64) {
    assert!(n >= 1, "index must be positive");
    let s = n.trailing_zeros();
    (s, ((n >> s) - 1) / 2)
}

/// `B_n = ∏ Q_{2^k}^{i_k}` for the binary digits `i_k` of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BWord {
    pub n: u64,
}

impl BWord {
    pub fn new(n: u64) -> Self {
        assert!(n >= 1);
        BWord { n }
    }

    /// Binary digits `i_0 … i_m` with `i_m = 1`.
    pub fn digits(&self) -> Vec<u8> {
        let m = 63 - self.n.leading_zeros();
        (0..=m).map(|k| ((self.n >> k) & 1) as u8).collect()
    }

    pub fn word(&self) -> AWord {
        AWord::from_exponents(&self.digits()).expect("binary digits form a valid word")
    }

    /// `B_a B_b` as an A-word over exponents {1, 2}.
    pub fn product(&self, other: &BWord) -> AWord {
        let (a, b) = (self.digits(), other.digits());
        let len = a.len().max(b.len());
        let exps: Vec<u8> = (0..len)
            .map(|k| a.get(k).copied().unwrap_or(0) + b.get(k).copied().unwrap_or(0))
            .collect();
        AWord::from_exponents(&exps).expect("sums of binary digits are in {0,1,2}")
    }

    /// `‖B_n‖² = ∏ ‖Q_{2^k}‖^{2 i_k}`.
    pub fn norm_sq(&self, spec: &GammaSpec) -> LogScalar {
        closed_form(&self.product(self))
            .value(spec)
            .expect("squares never integrate to zero")
    }
}

/// `Q_n = Σ_{j<k} c_j B_{(2j+1)2^s} + B_n` with `n = 2^s (2k + 1)`.
#[derive(Clone, Debug)]
pub struct QExpansion {
    pub n: u64,
    pub s: u32,
    pub k: u64,
    /// `c_0 … c_{k-1}`.
    pub coeffs: Vec<Float>,
    /// `‖Q_n‖²`.
    pub norm_sq: LogScalar,
    /// Bits lost to cancellation when forming `‖Q_n‖²`.
    pub norm_loss_bits: f64,
}

impl QExpansion {
    /// Degree of the `j`-th basis product.
    pub fn basis_degree(&self, j: u64) -> u64 {
        (2 * j + 1) << self.s
    }

    /// `(basis degree, coefficient)` pairs including the leading `1`.
    pub fn terms(&self) -> Vec<(u64, Float)> {
        let prec = self.norm_sq.prec();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| (self.basis_degree(j as u64), c.clone()))
            .chain(std::iter::once((self.n, Float::with_val(prec, 1))))
            .collect()
    }

    pub fn eval(&self, spec: &GammaSpec, x: &Float) -> Float {
        let prec = spec.precision();
        let top = 63 - self.n.leading_zeros();
        let qs = q_pow2_values(spec, top, x);
        let mut acc = BWord::new(self.n).word().eval_with(&qs, prec);
        for (j, c) in self.coeffs.iter().enumerate() {
            let b = BWord::new(self.basis_degree(j as u64)).word().eval_with(&qs, prec);
            acc += b * c;
        }
        acc
    }
}

fn gram_entry(a: u64, b: u64) -> Moment {
    closed_form(&BWord::new(a).product(&BWord::new(b)))
}

/// Cholesky solve of a symmetric positive definite system. `None` when a
/// pivot drops below `floor`.
fn cholesky_solve(matrix: &[Vec<Float>], rhs: &[Float], floor: &Float) -> Option<Vec<Float>> {
    let n = rhs.len();
    let prec = floor.prec();
    let mut l: Vec<Vec<Float>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let mut sum = matrix[i][j].clone();
            let other: &[Float] = if i == j { &row } else { &l[j] };
            for p in 0..j {
                sum -= Float::with_val(prec, &row[p] * &other[p]);
            }
            if i == j {
                if sum <= *floor {
                    return None;
                }
                row.push(sum.sqrt());
            } else {
                let d = &l[j][j];
                row.push(sum / d);
            }
        }
        l[i] = row;
    }
    let mut y = vec![Float::new(prec); n];
    for i in 0..n {
        let mut v = rhs[i].clone();
        for p in 0..i {
            v -= Float::with_val(prec, &l[i][p] * &y[p]);
        }
        y[i] = v / &l[i][i];
    }
    let mut x = vec![Float::new(prec); n];
    for i in (0..n).rev() {
        let mut v = y[i].clone();
        for p in (i + 1)..n {
            v -= Float::with_val(prec, &l[p][i] * &x[p]);
        }
        x[i] = v / &l[i][i];
    }
    Some(x)
}

/// Expansion of `Q_n` with the default Gram limit.
pub fn gram_expand_q(spec: &GammaSpec, n: u64) -> Result<QExpansion> {
    gram_expand_q_with_limit(spec, n, DEFAULT_GRAM_LIMIT)
}

/// Solves the `k × k` Gram system that makes `Q_n` orthogonal to
/// `B_{(2j+1)2^s}`, `j < k`. Rows and columns are scaled by `√G_jj` so the
/// system has unit diagonal however far apart the norms are.
pub fn gram_expand_q_with_limit(spec: &GammaSpec, n: u64, limit: u64) -> Result<QExpansion> {
    if n == 0 {
        return Err(Error::Domain("Q_n needs n >= 1".into()));
    }
    let (s, k) = decompose_index(n);
    if k > limit {
        return Err(Error::Domain(format!(
            "Q_{n} needs a {k}x{k} Gram system; the limit is {limit}"
        )));
    }
    if 63 - n.leading_zeros() >= 120 {
        return Err(Error::Domain(format!("degree {n} is too large")));
    }
    // The entries come from logs whose size grows like 2^top, so the solve
    // runs with guard bits and rounds back at the end.
    let out_prec = spec.precision();
    let top = 63 - n.leading_zeros();
    let work = spec.with_precision(out_prec + 40 + top)?;
    let spec = &work;
    let prec = spec.precision();
    let degree = |j: u64| (2 * j + 1) << s;
    let size = k as usize + 1;
    // log √G_jj
    let log_diag: Vec<Float> = (0..size)
        .map(|j| {
            let d = BWord::new(degree(j as u64)).norm_sq(spec);
            Float::with_val(prec, d.ln() / 2u32)
        })
        .collect();
    // scaled entries Ĝ_ij = G_ij / (√G_ii √G_jj), lower triangle incl. column k
    let scaled: Vec<Vec<Float>> = (0..size)
        .into_par_iter()
        .map(|i| {
            (0..size)
                .map(|j| match gram_entry(degree(i as u64), degree(j as u64)).value(spec) {
                    None => Float::new(prec),
                    Some(g) => {
                        let log = Float::with_val(prec, g.ln() - &log_diag[i]) - &log_diag[j];
                        log.exp()
                    }
                })
                .collect()
        })
        .collect();

    let unknowns = k as usize;
    let matrix: Vec<Vec<Float>> = scaled[..unknowns]
        .iter()
        .map(|row| row[..unknowns].to_vec())
        .collect();
    let rhs: Vec<Float> = scaled[..unknowns]
        .iter()
        .map(|row| Float::with_val(prec, -&row[unknowns]))
        .collect();
    let floor = half_precision_tolerance(out_prec);
    let solved = cholesky_solve(&matrix, &rhs, &floor).ok_or_else(|| {
        Error::precision(
            out_prec,
            format!("Gram matrix for Q_{n} lost positive definiteness ({k} unknowns)"),
        )
    })?;

    // ‖Q_n‖² / G_kk = 1 + Σ ĉ_j Ĝ_jk
    let mut ratio = Float::with_val(prec, 1);
    for (j, c) in solved.iter().enumerate() {
        ratio += Float::with_val(prec, c * &scaled[j][unknowns]);
    }
    if ratio.cmp0() != Some(std::cmp::Ordering::Greater) {
        return Err(Error::precision(
            out_prec,
            format!("norm of Q_{n} cancelled to a non-positive value"),
        ));
    }
    let norm_loss_bits = -ratio.to_f64().log2();
    if norm_loss_bits > (out_prec / 2) as f64 {
        return Err(Error::precision(
            out_prec,
            format!("norm of Q_{n} lost {norm_loss_bits:.1} bits to cancellation"),
        ));
    }
    let log_gkk = Float::with_val(prec, &log_diag[unknowns] * 2u32);
    let norm_sq = LogScalar::from_log(Float::with_val(out_prec, log_gkk + ratio.ln()));

    // c_j = ĉ_j √G_kk / √G_jj
    let coeffs = solved
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            let scale = Float::with_val(prec, &log_diag[unknowns] - &log_diag[j]).exp();
            Float::with_val(out_prec, c * scale)
        })
        .collect();

    Ok(QExpansion {
        n,
        s,
        k,
        coeffs,
        norm_sq,
        norm_loss_bits: norm_loss_bits.max(0.0),
    })
}

/// `Q_n(x)` from its expansion.
pub fn eval_q(spec: &GammaSpec, n: u64, x: &Float) -> Result<Float> {
    Ok(gram_expand_q(spec, n)?.eval(spec, x))
}

/// `‖Q_n‖² = ∫ Q_n B_n dμ`.
pub fn q_norm_general(spec: &GammaSpec, n: u64) -> Result<LogScalar> {
    Ok(gram_expand_q(spec, n)?.norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::Tail;
    use crate::numeric::rel_diff;
    use crate::tower::{chebyshev_nodes, eval_q_pow2};
    use proptest::prelude::*;
    use rug::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn sixth() -> GammaSpec {
        GammaSpec::constant(q(1, 6), 256).unwrap()
    }

    fn word(text: &str) -> AWord {
        AWord::parse(text).unwrap()
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose_index(12), (2, 1));
        assert_eq!(decompose_index(1), (0, 0));
        assert_eq!(decompose_index(40), (3, 2));
        assert_eq!(decompose_index(64), (6, 0));
    }

    #[test]
    fn word_parsing_and_validation() {
        let w = word("4:2,2:1");
        assert_eq!(w.factors(), &[(2, 1), (4, 2)]);
        assert_eq!(w.degree(), 36);
        assert_eq!(w.to_string(), "4:2,2:1");
        assert!(AWord::parse("3:3").is_err());
        assert!(AWord::parse("3:1,3:2").is_err());
        assert!(AWord::parse("x").is_err());
        assert_eq!(AWord::enumerate(2).len(), 26);
        assert_eq!(AWord::enumerate(6).len(), 2186);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form(&word("1:2")), Moment::NormProduct(vec![1]));
        assert_eq!(closed_form(&word("2:1")), Moment::Zero);
        assert_eq!(closed_form(&word("2:1,1:2")), Moment::NormProduct(vec![2]));
        // Q_4² must give ‖Q_4‖², not ‖Q_2‖²
        assert_eq!(closed_form(&word("2:2")), Moment::NormProduct(vec![2]));
        assert_eq!(closed_form(&word("1:2,0:1")), Moment::Zero);
        assert_eq!(closed_form(&word("0:2")), Moment::NormProduct(vec![0]));
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce(&word("3:1,2:1,1:2")).unwrap(), Moment::NormProduct(vec![3]));
        assert_eq!(reduce(&word("3:1,1:2")).unwrap(), Moment::Zero);
        assert_eq!(reduce(&word("2:1,1:1,0:1")).unwrap(), Moment::Zero);
        assert_eq!(
            reduce(&word("3:1,2:2,1:1,0:2")).unwrap(),
            Moment::NormProduct(vec![1, 3])
        );
        assert_eq!(reduce(&AWord::new(vec![]).unwrap()).unwrap(), Moment::NormProduct(vec![]));
    }

    #[test]
    fn triple_product_identity() {
        // ∫ Q_2 Q_2 Q_4 = ‖Q_4‖²
        let spec = sixth();
        let v = a_integral_closed(&spec, &word("2:1,1:2")).unwrap();
        assert_eq!(v, spec.q_norm_sq(2));
    }

    #[test]
    fn closed_form_agrees_with_reduction_on_all_small_words() {
        for w in AWord::enumerate(7) {
            assert_eq!(closed_form(&w), reduce(&w).unwrap(), "{w}");
        }
    }

    #[test]
    fn b_words() {
        let b = BWord::new(11);
        assert_eq!(b.digits(), vec![1, 1, 0, 1]);
        assert_eq!(b.word().degree(), 11);
        assert_eq!(BWord::new(3).product(&BWord::new(5)).factors(), &[(0, 2), (1, 1), (2, 1)]);
        let spec = sixth();
        let expected = &(&spec.q_norm_sq(0) * &spec.q_norm_sq(1)) * &spec.q_norm_sq(3);
        assert!(b.norm_sq(&spec).rel_diff(&expected) < 1e-70);
    }

    #[test]
    fn q3_coefficient() {
        let spec = GammaSpec::new(vec![q(1, 5), q(1, 7)], Tail::Constant(q(1, 6)), 256).unwrap();
        let e = gram_expand_q(&spec, 3).unwrap();
        assert_eq!((e.s, e.k), (0, 1));
        let (g1, g2) = (q(1, 5), q(1, 7));
        let one = Rational::from(1);
        let expected = -(one.clone() - Rational::from(2) * &g2) * g1.clone() * &g1
            / (one - Rational::from(2) * &g1);
        assert!(rel_diff(&e.coeffs[0], &Float::with_val(256, &expected)) < 1e-70);
    }

    #[test]
    fn q_five_times_dyadic_matches_printed_coefficients() {
        let spec = GammaSpec::new(vec![q(1, 5), q(1, 9), q(1, 7)], Tail::Periodic(vec![q(1, 6), q(1, 11)]), 256)
            .unwrap();
        for s in 0..5 {
            let e = gram_expand_q(&spec, 5 << s).unwrap();
            let n0 = spec.q_norm_sq(s).value();
            let n1 = spec.q_norm_sq(s + 1).value();
            let n2 = spec.q_norm_sq(s + 2).value();
            let a0 = Float::with_val(256, &n2 / &(Float::with_val(256, n0.square_ref()) - &n1));
            let a1 = -Float::with_val(256, &a0 * &n0) / &n1;
            assert!(rel_diff(&e.coeffs[0], &a0) < 1e-60, "s={s}");
            assert!(rel_diff(&e.coeffs[1], &a1) < 1e-60, "s={s}");
        }
    }

    #[test]
    fn q5_by_quadrature_gram() {
        // Independent route: Gram entries from ν_12 quadrature, 2x2 solve by hand.
        let spec = sixth();
        let nodes = chebyshev_nodes(&spec, 12).unwrap();
        let b = |m: u64| BWord::new(m).word();
        let g = |a: u64, c: u64| {
            let (wa, wc) = (b(a), b(c));
            nodes.integrate(|x| wa.eval(&spec, x) * wc.eval(&spec, x))
        };
        let (g11, g13, g33, g15, g35) = (g(1, 1), g(1, 3), g(3, 3), g(1, 5), g(3, 5));
        let det = Float::with_val(256, &g11 * &g33) - Float::with_val(256, &g13 * &g13);
        let c0 = (Float::with_val(256, -&g15) * &g33 + Float::with_val(256, &g13 * &g35)) / &det;
        let c1 = (Float::with_val(256, -&g35) * &g11 + Float::with_val(256, &g13 * &g15)) / &det;
        let e = gram_expand_q(&spec, 5).unwrap();
        assert!(rel_diff(&e.coeffs[0], &c0) < 1e-50);
        assert!(rel_diff(&e.coeffs[1], &c1) < 1e-50);
    }

    #[test]
    fn three_times_dyadic_coefficient() {
        let spec = sixth();
        for s in 0..8 {
            let e = gram_expand_q(&spec, 3 << s).unwrap();
            let expected = -(&spec.q_norm_sq(s + 1) / &spec.q_norm_sq(s)).value();
            assert!(rel_diff(&e.coeffs[0], &expected) < 1e-60);
        }
    }

    #[test]
    fn eval_examples() {
        let spec = sixth();
        let half = Float::with_val(256, 0.5);
        assert!(eval_q(&spec, 3, &half).unwrap().abs() < 1e-70);
        let x = Float::with_val(256, 0.37);
        let a = eval_q(&spec, 4, &x).unwrap();
        assert!(rel_diff(&a, &crate::tower::eval_q_pow2_via_norms(&spec, 2, &x)) < 1e-60);

        // Q_3 is not the Chebyshev polynomial for small γ_1
        let small = GammaSpec::new(vec![q(1, 100)], Tail::Constant(q(1, 6)), 256).unwrap();
        let l = crate::tower::basic_intervals(&small, 1).unwrap()[0].right.clone();
        let at_l = eval_q(&small, 3, &l).unwrap();
        let at_1 = eval_q(&small, 3, &Float::with_val(256, 1)).unwrap();
        assert!(rel_diff(&at_l, &at_1) > 1e-3);
    }

    #[test]
    fn norms_of_general_q() {
        let spec = sixth();
        for s in 0..6 {
            assert!(q_norm_general(&spec, 1 << s).unwrap().rel_diff(&spec.q_norm_sq(s)) < 1e-70);
        }
        let n1 = q_norm_general(&spec, 1).unwrap();
        assert!(rel_diff(&n1.value(), &Float::with_val(256, &q(1, 6))) < 1e-70);
    }

    #[test]
    fn expansion_uses_only_its_dyadic_class() {
        let spec = sixth();
        for n in [12u64, 40, 56, 88] {
            let e = gram_expand_q(&spec, n).unwrap();
            for (deg, _) in e.terms() {
                assert_eq!(deg.trailing_zeros(), n.trailing_zeros());
            }
        }
    }

    #[test]
    fn q_is_orthogonal_under_counting_measure() {
        let spec = GammaSpec::new(vec![q(1, 5)], Tail::Periodic(vec![q(1, 7), q(1, 6)]), 256).unwrap();
        let nodes = chebyshev_nodes(&spec, 14).unwrap();
        let expansions: Vec<QExpansion> = (1..=24).map(|n| gram_expand_q(&spec, n).unwrap()).collect();
        // values of every Q_n at every node
        let table: Vec<Vec<Float>> = nodes
            .nodes
            .par_iter()
            .map(|x| expansions.iter().map(|e| e.eval(&spec, x)).collect())
            .collect();
        let integrate = |f: &(dyn Fn(&[Float]) -> Float + Sync)| -> Float {
            crate::numeric::par_pairwise_sum(table.len(), 256, |i| f(&table[i])) >> 14u32
        };
        for a in 0..24 {
            let mean = integrate(&|row| row[a].clone());
            assert!(mean.abs() < 1e-60, "n={}", a + 1);
            let norm = integrate(&|row| Float::with_val(256, row[a].square_ref()));
            assert!(rel_diff(&norm, &expansions[a].norm_sq.value()) < 1e-50, "n={}", a + 1);
            for b in 0..a {
                let cross = integrate(&|row| Float::with_val(256, &row[a] * &row[b]));
                let scale = expansions[a].norm_sq.sqrt().value() * expansions[b].norm_sq.sqrt().value();
                assert!(Float::with_val(256, cross / scale).abs() < 1e-50, "{} {}", a + 1, b + 1);
            }
        }
    }

    #[test]
    fn b_words_of_different_classes_are_orthogonal() {
        let spec = sixth();
        let nodes = chebyshev_nodes(&spec, 12).unwrap();
        for (a, b) in [(1u64, 2u64), (3, 6), (5, 12), (4, 24), (7, 8), (6, 20)] {
            let (wa, wb) = (BWord::new(a).word(), BWord::new(b).word());
            let v = nodes.integrate(|x| wa.eval(&spec, x) * wb.eval(&spec, x));
            assert!(v.abs() < 1e-60, "B_{a} B_{b}");
            assert!(gram_entry(a, b).is_zero());
        }
    }

    #[test]
    fn gram_matrices_are_positive_definite() {
        for spec in [sixth(), GammaSpec::constant(q(1, 4), 256).unwrap(), GammaSpec::constant(q(1, 20), 256).unwrap()] {
            for s in 0..3u32 {
                let e = gram_expand_q(&spec, 65 << s).unwrap();
                assert_eq!(e.k, 32);
            }
        }
    }

    #[test]
    fn gram_limit_is_enforced() {
        let spec = sixth();
        assert!(matches!(gram_expand_q_with_limit(&spec, 21, 5), Err(Error::Domain(_))));
        assert!(gram_expand_q_with_limit(&spec, 11, 5).is_ok());
    }

    #[test]
    fn low_precision_expansion_tracks_high_precision() {
        let lo = GammaSpec::constant(q(1, 4), 32).unwrap();
        let hi = GammaSpec::constant(q(1, 4), 256).unwrap();
        let (a, b) = (gram_expand_q(&lo, 401).unwrap(), gram_expand_q(&hi, 401).unwrap());
        // a 32-bit log near -1111 resolves the value only to about 2^-21
        assert!(a.norm_sq.rel_diff(&b.norm_sq) < 1e-5);
        assert!(a.norm_sq.prec() == 32 && a.coeffs[0].prec() == 32);
        let last = a.coeffs.len() - 1;
        assert!(rel_diff(&Float::with_val(256, &a.coeffs[last]), &b.coeffs[last]) < 1e-8);
    }

    #[test]
    fn singular_system_is_rejected() {
        let one = Float::with_val(64, 1);
        let m = vec![vec![one.clone(), one.clone()], vec![one.clone(), one.clone()]];
        let floor = half_precision_tolerance(64);
        assert!(cholesky_solve(&m, &[one.clone(), one.clone()], &floor).is_none());
        let id = vec![vec![one.clone(), Float::new(64)], vec![Float::new(64), one.clone()]];
        let x = cholesky_solve(&id, &[one.clone(), one.clone()], &floor).unwrap();
        assert_eq!(x, vec![one.clone(), one]);
    }

    proptest! {
        #[test]
        fn closed_equals_reduce(exps in proptest::collection::vec(0u8..3, 1..14)) {
            prop_assume!(exps.iter().any(|&e| e != 0));
            let w = AWord::from_exponents(&exps).unwrap();
            prop_assert_eq!(closed_form(&w), reduce(&w).unwrap());
        }
    }

    #[test]
    fn eval_q_pow2_is_the_one_factor_word() {
        let spec = sixth();
        let x = Float::with_val(256, 0.9);
        assert_eq!(word("3:1").eval(&spec, &x), eval_q_pow2(&spec, 3, &x));
    }
}
