//! Independent reference values from the counting measures `ν_s`: recurrence
//! coefficients by Lanczos iteration over the nodes, and quadrature moments.
//!
//! `ν_s` integrates every polynomial of degree below `2^s` exactly as the
//! equilibrium measure does, so its first `2^{s-1}` recurrence coefficients
//! coincide with the true ones up to rounding.

use rayon::prelude::*;
use rug::Float;

use crate::algebra::{AWord, BWord};
use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::jacobi::jacobi_coefficients;
use crate::numeric::{half_precision_tolerance, par_pairwise_sum};
use crate::tower::{chebyshev_nodes, q_pow2_values, NodeSet};

/// Finitely many weighted points.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

impl DiscreteMeasure {
    /// Sorts the points; weights must be positive and sum to one.
    pub fn new(nodes: Vec<Float>, weights: Vec<Float>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Domain("nodes and weights must be non-empty and paired".into()));
        }
        if weights.iter().any(|w| w.cmp0() != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::Domain("weights must be positive".into()));
        }
        let prec = nodes[0].prec();
        let total = crate::numeric::pairwise_sum(&weights, prec);
        if Float::with_val(prec, &total - 1u32).abs() > half_precision_tolerance(prec) {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        let mut pairs: Vec<(Float, Float)> = nodes.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("nodes are finite"));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(DiscreteMeasure { nodes, weights })
    }

    /// `ν_s` from its nodes.
    pub fn from_nodes(set: &NodeSet) -> Self {
        let weight = set.weight();
        let mut nodes = set.nodes.clone();
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("nodes are finite"));
        DiscreteMeasure {
            weights: vec![weight; nodes.len()],
            nodes,
        }
    }

    /// `ν_s` for `spec`.
    pub fn counting(spec: &GammaSpec, s: u32) -> Result<Self> {
        Ok(Self::from_nodes(&chebyshev_nodes(spec, s)?))
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn prec(&self) -> u32 {
        self.nodes[0].prec()
    }

    /// `Σ w_i f(x_i)`, summed pairwise.
    pub fn integrate<F>(&self, f: F) -> Float
    where
        F: Fn(&Float) -> Float + Sync,
    {
        par_pairwise_sum(self.len(), self.prec(), |i| {
            Float::with_val(self.prec(), f(&self.nodes[i]) * &self.weights[i])
        })
    }
}

/// Three-term recurrence coefficients `a_1 … a_M`, `b_1 … b_M`.
#[derive(Clone, Debug)]
pub struct Recurrence {
    pub a: Vec<Float>,
    pub b: Vec<Float>,
}

impl Recurrence {
    /// `‖Q_n‖ = a_1 ⋯ a_n`.
    pub fn norm(&self, n: usize) -> Float {
        let prec = self.a[0].prec();
        self.a[..n].iter().fold(Float::with_val(prec, 1), |acc, a| acc * a)
    }
}

fn dot(u: &[Float], v: &[Float], prec: u32) -> Float {
    par_pairwise_sum(u.len(), prec, |i| Float::with_val(prec, &u[i] * &v[i]))
}

/// Lanczos iteration on `diag(x)` started from `√w`, with every new vector
/// reorthogonalized against all earlier ones.
pub fn stieltjes(measure: &DiscreteMeasure, m: usize) -> Result<Recurrence> {
    if m == 0 || m >= measure.len() {
        return Err(Error::Domain(format!(
            "need 1 <= M < {} nodes, got M = {m}",
            measure.len()
        )));
    }
    let prec = measure.prec();
    let x = &measure.nodes;
    let mut basis: Vec<Vec<Float>> = Vec::with_capacity(m + 1);
    basis.push(measure.weights.par_iter().map(|w| Float::with_val(prec, w.sqrt_ref())).collect());
    let mut a: Vec<Float> = Vec::with_capacity(m);
    let mut b: Vec<Float> = Vec::with_capacity(m);

    for j in 0..m {
        let q = &basis[j];
        let mut v: Vec<Float> = q
            .par_iter()
            .zip(x.par_iter())
            .map(|(qi, xi)| Float::with_val(prec, qi * xi))
            .collect();
        let bj = dot(q, &v, prec);
        let prev = if j > 0 { Some((&basis[j - 1], &a[j - 1])) } else { None };
        v.par_iter_mut().enumerate().for_each(|(i, vi)| {
            *vi -= Float::with_val(prec, &bj * &q[i]);
            if let Some((p, aj)) = prev {
                *vi -= Float::with_val(prec, aj * &p[i]);
            }
        });
        let coeffs: Vec<Float> = basis.iter().map(|u| dot(u, &v, prec)).collect();
        v.par_iter_mut().enumerate().for_each(|(i, vi)| {
            for (u, c) in basis.iter().zip(&coeffs) {
                *vi -= Float::with_val(prec, c * &u[i]);
            }
        });
        let a_sq = dot(&v, &v, prec);
        if a_sq.cmp0() != Some(std::cmp::Ordering::Greater) {
            return Err(Error::precision(
                prec,
                format!("Lanczos breakdown at step {}: a^2 = {a_sq}", j + 1),
            ));
        }
        let aj = a_sq.sqrt();
        v.par_iter_mut().for_each(|vi| *vi /= &aj);
        basis.push(v);
        a.push(aj);
        b.push(bj);
    }
    Ok(Recurrence { a, b })
}

/// Recursion-versus-oracle comparison of `a_1 … a_M`.
#[derive(Clone, Debug)]
pub struct JacobiComparison {
    pub s: u32,
    pub m: usize,
    pub tol: f64,
    /// `|a_n^{recursion} − a_n^{oracle}|`, `n = 1 … M`.
    pub deviations: Vec<Float>,
    pub max_deviation: Float,
    /// Index attaining `max_deviation`.
    pub worst_index: usize,
    pub pass: bool,
    /// `max |b_n − 1/2|` for the oracle.
    pub b_max_deviation: Float,
    /// Level of the coarser oracle used for the Cauchy check.
    pub cauchy_level: Option<u32>,
    /// `max |a_n^{ν_s} − a_n^{ν_{s-2}}|`.
    pub cauchy_max: Option<Float>,
}

fn max_abs_diff(u: &[Float], v: &[Float], prec: u32) -> (Vec<Float>, Float, usize) {
    let diffs: Vec<Float> = u
        .iter()
        .zip(v)
        .map(|(p, q)| Float::with_val(prec, p - q).abs())
        .collect();
    let (worst, max) = diffs
        .iter()
        .enumerate()
        .fold((0, Float::new(prec)), |(wi, wm), (i, d)| {
            if *d > wm {
                (i, d.clone())
            } else {
                (wi, wm)
            }
        });
    (diffs, max, worst + 1)
}

/// Compares the recursion with the Stieltjes oracle on `ν_s`. The oracle on
/// `ν_{s-2}` is run too when `M ≤ 2^{s-4}`, to separate oracle error from
/// recursion error.
pub fn compare_jacobi(spec: &GammaSpec, s: u32, m: usize, tol: f64) -> Result<JacobiComparison> {
    if s < 2 || m == 0 || m > 1usize << (s - 2) {
        return Err(Error::Domain(format!("need 1 <= M <= 2^(s-2); got s = {s}, M = {m}")));
    }
    let prec = spec.precision();
    let table = jacobi_coefficients(spec, m)?;
    let oracle = stieltjes(&DiscreteMeasure::counting(spec, s)?, m)?;
    let (deviations, max_deviation, worst_index) = max_abs_diff(&table.a_values(), &oracle.a, prec);
    let half = Float::with_val(prec, 0.5);
    let b_max_deviation = oracle
        .b
        .iter()
        .map(|b| Float::with_val(prec, b - &half).abs())
        .fold(Float::new(prec), |acc, d| acc.max(&d));

    let (cauchy_level, cauchy_max) = if s >= 4 && m <= 1usize << (s - 4) {
        let coarse = stieltjes(&DiscreteMeasure::counting(spec, s - 2)?, m)?;
        let (_, max, _) = max_abs_diff(&oracle.a, &coarse.a, prec);
        (Some(s - 2), Some(max))
    } else {
        (None, None)
    };
    let pass = max_deviation.to_f64() < tol;
    Ok(JacobiComparison {
        s,
        m,
        tol,
        deviations,
        max_deviation,
        worst_index,
        pass,
        b_max_deviation,
        cauchy_level,
        cauchy_max,
    })
}

/// `Q_{2^k}` values at every node of `ν_s` for `k ≤ top`, ready for moments.
pub struct MomentQuadrature {
    level: u32,
    top: u32,
    prec: u32,
    values: Vec<Vec<Float>>,
}

impl MomentQuadrature {
    pub fn new(spec: &GammaSpec, s: u32, top: u32) -> Result<Self> {
        let nodes = chebyshev_nodes(spec, s)?;
        let values = nodes
            .nodes
            .par_iter()
            .map(|x| q_pow2_values(spec, top, x))
            .collect();
        Ok(MomentQuadrature {
            level: s,
            top,
            prec: spec.precision(),
            values,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `∫ A dν_s`.
    pub fn moment(&self, word: &AWord) -> Result<Float> {
        if word.top_level().is_some_and(|t| t > self.top) {
            return Err(Error::Domain(format!(
                "word {word} reaches above level {}",
                self.top
            )));
        }
        let mut total = par_pairwise_sum(self.values.len(), self.prec, |i| {
            word.eval_with(&self.values[i], self.prec)
        });
        total >>= self.level;
        Ok(total)
    }

    /// `∫ B_a B_b dν_s`.
    pub fn gram_entry(&self, a: u64, b: u64) -> Result<Float> {
        self.moment(&BWord::new(a).product(&BWord::new(b)))
    }
}
