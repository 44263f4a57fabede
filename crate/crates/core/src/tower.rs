//! The polynomial tower `P_1 = x - 1`, `P_{2^{s+1}} = P_{2^s}(P_{2^s} + r_s)`,
//! its closed-form preimages, the basic intervals of `E_s` and the
//! Chebyshev node measures `ν_s`.

use std::cmp::Ordering;

use rug::Float;

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::numeric::par_pairwise_sum;

/// Below this level the two branches of a preimage are solved sequentially.
const PARALLEL_LEVEL: u32 = 10;

/// A closed basic interval `I_{j,s}` of `E_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub left: Float,
    pub right: Float,
    pub level: u32,
}

impl Interval {
    pub fn length(&self) -> Float {
        Float::with_val(self.left.prec(), &self.right - &self.left)
    }

    pub fn contains(&self, x: &Float) -> bool {
        *x >= self.left && *x <= self.right
    }
}

/// The zeros of `Q_{2^s}` carrying the uniform weight `2^-s`.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub level: u32,
    pub nodes: Vec<Float>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn prec(&self) -> u32 {
        self.nodes.first().map_or(crate::DEFAULT_PRECISION, Float::prec)
    }

    pub fn weight(&self) -> Float {
        Float::with_val(self.prec(), Float::i_exp(1, -(self.level as i32)))
    }

    /// `∫ f dν_s = 2^-s Σ_k f(x_k)` with a reproducible pairwise sum.
    pub fn integrate<F>(&self, f: F) -> Float
    where
        F: Fn(&Float) -> Float + Sync,
    {
        let mut total = par_pairwise_sum(self.nodes.len(), self.prec(), |i| f(&self.nodes[i]));
        total >>= self.level;
        total
    }
}

/// `P_{2^s}(x)`.
pub fn eval_p(spec: &GammaSpec, s: u32, x: &Float) -> Float {
    let prec = spec.precision();
    let mut p = Float::with_val(prec, x - 1u32);
    for m in 0..s {
        let shifted = Float::with_val(prec, &p + &spec.r_linear(m));
        p *= shifted;
    }
    p
}

/// `Q_{2^s}(x) = P_{2^s}(x) + r_s / 2`.
pub fn eval_q_pow2(spec: &GammaSpec, s: u32, x: &Float) -> Float {
    let mut half_r = spec.r_linear(s);
    half_r >>= 1;
    eval_p(spec, s, x) + half_r
}

/// `Q_{2^s}(x)` through `Q_1 = x - 1/2`, `Q_{2^{m+1}} = Q_{2^m}² - ‖Q_{2^m}‖²`.
pub fn eval_q_pow2_via_norms(spec: &GammaSpec, s: u32, x: &Float) -> Float {
    let prec = spec.precision();
    let mut q = Float::with_val(prec, x - 0.5f64);
    for m in 0..s {
        q.square_mut();
        q -= spec.q_norm_sq(m).value();
    }
    q
}

/// `[Q_1(x), Q_2(x), …, Q_{2^top}(x)]` in one pass over the tower.
pub fn q_pow2_values(spec: &GammaSpec, top: u32, x: &Float) -> Vec<Float> {
    let prec = spec.precision();
    let r: Vec<Float> = (0..=top).map(|m| spec.r_linear(m)).collect();
    let mut out = Vec::with_capacity(top as usize + 1);
    let mut p = Float::with_val(prec, x - 1u32);
    for m in 0..=top as usize {
        let mut half_r = r[m].clone();
        half_r >>= 1;
        out.push(Float::with_val(prec, &p + &half_r));
        if m < top as usize {
            let shifted = Float::with_val(prec, &p + &r[m]);
            p *= shifted;
        }
    }
    out
}

struct Solver<'a> {
    /// Linear `r_0 … r_s`.
    r: &'a [Float],
    prec: u32,
    tol: Float,
}

impl Solver<'_> {
    /// `√disc`, clamping tiny negative discriminants (tangency) to zero.
    fn root_of(&self, disc: Float, scale: &Float, level: u32) -> Result<Float> {
        if disc.cmp0() == Some(Ordering::Less) {
            let slack = Float::with_val(self.prec, scale * &self.tol);
            if Float::with_val(self.prec, -&disc) > slack {
                return Err(Error::Domain(format!(
                    "negative discriminant at level {level}: preimage is not real"
                )));
            }
            return Ok(Float::new(self.prec));
        }
        Ok(disc.sqrt())
    }

    /// Sorted real solutions of `P_{2^m}(x) = t`.
    fn solve(&self, m: u32, t: &Float) -> Result<Vec<Float>> {
        let prec = self.prec;
        match m {
            0 => Ok(vec![Float::with_val(prec, t + 1u32)]),
            1 => {
                // x² - x - t = 0
                let disc = Float::with_val(prec, t * 4u32) + 1u32;
                let root = self.root_of(disc, &Float::with_val(prec, 1), 1)?;
                let mut hi = root + 1u32;
                hi >>= 1;
                let mut lo = Float::with_val(prec, -t) / &hi;
                if lo.is_zero() {
                    lo = Float::new(prec);
                }
                Ok(vec![lo, hi])
            }
            _ => {
                // P_{2^{m-1}} = y with y² + r y - t = 0
                let r = &self.r[m as usize - 1];
                let r_sq = Float::with_val(prec, r.square_ref());
                let disc = Float::with_val(prec, &r_sq + &Float::with_val(prec, t * 4u32));
                let root = self.root_of(disc, &r_sq, m)?;
                let mut y_lo = -(root + r);
                y_lo >>= 1;
                let mut y_hi = Float::with_val(prec, -t) / &y_lo;
                if y_hi.is_zero() {
                    y_hi = Float::new(prec);
                }
                let (lo, hi) = if m > PARALLEL_LEVEL {
                    rayon::join(|| self.solve(m - 1, &y_lo), || self.solve(m - 1, &y_hi))
                } else {
                    (self.solve(m - 1, &y_lo), self.solve(m - 1, &y_hi))
                };
                let (lo, hi) = (lo?, hi?);
                // On the j-th basic interval of level m-1, P_{2^{m-1}} runs
                // from 0 down to -r_{m-1} for even j and back up for odd j.
                let mut out = Vec::with_capacity(lo.len() * 2);
                for (j, (a, b)) in lo.into_iter().zip(hi).enumerate() {
                    if j % 2 == 0 {
                        out.push(b);
                        out.push(a);
                    } else {
                        out.push(a);
                        out.push(b);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn r_table(spec: &GammaSpec, s: u32) -> Vec<Float> {
    (0..=s).map(|m| spec.r_linear(m)).collect()
}

/// All `2^s` real solutions of `P_{2^s}(x) = t`, ascending.
///
/// Valid for `t ∈ [-r_s, 0]`; a discriminant that is negative beyond the
/// working tolerance is a domain error.
pub fn preimage(spec: &GammaSpec, s: u32, t: &Float) -> Result<Vec<Float>> {
    let r = r_table(spec, s);
    let solver = Solver {
        r: &r,
        prec: spec.precision(),
        tol: spec.tolerance(),
    };
    solver.solve(s, &Float::with_val(spec.precision(), t))
}

/// The `2^s` basic intervals of `E_s = {-r_s ≤ P_{2^s} ≤ 0}`, left to right.
pub fn basic_intervals(spec: &GammaSpec, s: u32) -> Result<Vec<Interval>> {
    let prec = spec.precision();
    let zeros = preimage(spec, s, &Float::new(prec))?;
    let bottoms = preimage(spec, s, &(-spec.r_linear(s)))?;
    Ok(zeros
        .into_iter()
        .zip(bottoms)
        .map(|(a, b)| {
            let (left, right) = if a < b { (a, b) } else { (b, a) };
            Interval {
                left,
                right,
                level: s,
            }
        })
        .collect())
}

/// Zeros of `Q_{2^s} = P_{2^s} + r_s/2`, i.e. the support of `ν_s`.
pub fn chebyshev_nodes(spec: &GammaSpec, s: u32) -> Result<NodeSet> {
    let mut t = -spec.r_linear(s);
    t >>= 1;
    Ok(NodeSet {
        level: s,
        nodes: preimage(spec, s, &t)?,
    })
}

/// `∫ f dν_s`.
pub fn integrate_nu<F>(spec: &GammaSpec, s: u32, f: F) -> Result<Float>
where
    F: Fn(&Float) -> Float + Sync,
{
    Ok(chebyshev_nodes(spec, s)?.integrate(f))
}
