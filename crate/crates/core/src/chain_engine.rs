//! Exact inference and sampling on finite-alphabet chains.
//!
//! A chain over positions `0..n` carries a unary weight `u_k(x_k)` at every
//! position and a pairwise table `t_k(x_{k-1}, x_k)` between neighbours. The
//! unnormalized mass of a path is
//!
//! ```text
//! g(x) = u_0(x_0) * prod_{k>=1} g_k(x_{k-1}, x_k),   g_k(a, b) = t_k(a, b) * u_k(b)
//! ```
//!
//! which is the usual pairwise chain form with the unary weight of each
//! position folded into the factor on its left. Sampling is done by
//! backward filtering followed by forward sampling.
//!
//! All weights are stored as a linear table scaled to a maximum of one plus a
//! separate natural-log scale, so products over thousands of factors never
//! underflow. A linear entry of `0.0` is zero mass (`-inf` in the log view).

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::logspace::ln_nonneg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain has no positions")]
    Empty,
    #[error("pair table {index} is {rows}x{cols} but adjacent alphabets are {left}x{right}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        left: usize,
        right: usize,
    },
    #[error("invalid weight {value} at position {position}")]
    InvalidWeight { position: usize, value: f64 },
    #[error("chain is infeasible: every symbol has zero mass at position {position}")]
    Infeasible { position: usize },
    #[error("chain has more than {limit} paths, too many to enumerate")]
    TooManyPaths { limit: usize },
}

/// Pairwise table `t(a, b)` between two adjacent positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    rows: usize,
    cols: usize,
    lin: Vec<f64>,
    log_scale: f64,
}

impl PairTable {
    /// Builds a table from nonnegative linear entries in row-major order.
    pub fn from_linear(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, ChainError> {
        assert_eq!(values.len(), rows * cols, "pair table size");
        if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ChainError::InvalidWeight {
                position: 0,
                value: bad,
            });
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        let (lin, log_scale) = if max > 0.0 {
            (values.iter().map(|v| v / max).collect(), max.ln())
        } else {
            (values, 0.0)
        };
        Ok(Self {
            rows,
            cols,
            lin,
            log_scale,
        })
    }

    /// Builds a table from natural-log entries (`-inf` = zero mass).
    pub fn from_log(rows: usize, cols: usize, log_values: &[f64]) -> Result<Self, ChainError> {
        assert_eq!(log_values.len(), rows * cols, "pair table size");
        if let Some(&bad) = log_values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
            return Err(ChainError::InvalidWeight {
                position: 0,
                value: bad,
            });
        }
        let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(Self {
                rows,
                cols,
                lin: vec![0.0; rows * cols],
                log_scale: 0.0,
            });
        }
        Ok(Self {
            rows,
            cols,
            lin: log_values.iter().map(|v| (v - max).exp()).collect(),
            log_scale: max,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn linear(&self, a: usize, b: usize) -> f64 {
        self.lin[a * self.cols + b]
    }

    pub fn log_value(&self, a: usize, b: usize) -> f64 {
        ln_nonneg(self.linear(a, b)) + self.log_scale
    }

    #[inline]
    fn row(&self, a: usize) -> &[f64] {
        &self.lin[a * self.cols..(a + 1) * self.cols]
    }
}

/// A finite-alphabet chain with pairwise potentials.
#[derive(Debug, Clone)]
pub struct ChainModel {
    offsets: Vec<usize>,
    unary: Vec<f64>,
    unary_scale: Vec<f64>,
    pairs: Vec<Arc<PairTable>>,
}

impl ChainModel {
    pub(crate) fn with_capacity(positions: usize, symbols: usize) -> Self {
        let mut offsets = Vec::with_capacity(positions + 1);
        offsets.push(0);
        Self {
            offsets,
            unary: Vec::with_capacity(symbols),
            unary_scale: Vec::with_capacity(positions),
            pairs: Vec::with_capacity(positions.saturating_sub(1)),
        }
    }

    /// Appends a position whose unary weights are `lin * exp(log_scale)`.
    /// `pair` links it to the previous position and must be `None` only for
    /// the first one. Dimensions are checked in debug builds only; this is
    /// the hot path used by the strip builders.
    pub(crate) fn push_scaled(&mut self, lin: &[f64], log_scale: f64, pair: Option<Arc<PairTable>>) {
        debug_assert_eq!(pair.is_some(), !self.unary_scale.is_empty());
        if let Some(p) = &pair {
            debug_assert_eq!(p.rows, self.alphabet_size(self.len() - 1));
            debug_assert_eq!(p.cols, lin.len());
            self.pairs.push(Arc::clone(p));
        }
        let max = lin.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && max != 1.0 {
            self.unary.extend(lin.iter().map(|v| v / max));
            self.unary_scale.push(log_scale + max.ln());
        } else {
            self.unary.extend_from_slice(lin);
            self.unary_scale.push(if max > 0.0 { log_scale } else { 0.0 });
        }
        self.offsets.push(self.unary.len());
    }

    /// Builds a chain from natural-log unary vectors (one per position) and
    /// natural-log pair tables (one per adjacent pair, row-major,
    /// `sizes[k-1] x sizes[k]`).
    pub fn from_log_parts(unary: &[Vec<f64>], pairs: &[Vec<f64>]) -> Result<Self, ChainError> {
        if unary.is_empty() {
            return Err(ChainError::Empty);
        }
        if pairs.len() + 1 != unary.len() {
            return Err(ChainError::DimensionMismatch {
                index: pairs.len(),
                rows: 0,
                cols: 0,
                left: unary.len(),
                right: 0,
            });
        }
        let total = unary.iter().map(Vec::len).sum();
        let mut chain = Self::with_capacity(unary.len(), total);
        for (k, u) in unary.iter().enumerate() {
            if let Some(&bad) = u.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
                return Err(ChainError::InvalidWeight {
                    position: k,
                    value: bad,
                });
            }
            let pair = if k == 0 {
                None
            } else {
                let (rows, cols) = (unary[k - 1].len(), u.len());
                if pairs[k - 1].len() != rows * cols {
                    return Err(ChainError::DimensionMismatch {
                        index: k - 1,
                        rows: pairs[k - 1].len() / cols.max(1),
                        cols,
                        left: rows,
                        right: cols,
                    });
                }
                Some(Arc::new(PairTable::from_log(rows, cols, &pairs[k - 1]).map_err(
                    |e| match e {
                        ChainError::InvalidWeight { value, .. } => ChainError::InvalidWeight {
                            position: k,
                            value,
                        },
                        other => other,
                    },
                )?))
            };
            let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                let zeros = vec![0.0; u.len()];
                chain.push_scaled(&zeros, 0.0, pair);
            } else {
                let lin: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
                chain.push_scaled(&lin, max, pair);
            }
        }
        Ok(chain)
    }

    /// Chain in the pure pairwise form `p(x) ∝ prod_k g_k(x_{k-1}, x_k)`
    /// with a uniform first position. `pair_logs[k]` links positions `k` and
    /// `k + 1`.
    pub fn from_pairwise_log(sizes: &[usize], pair_logs: &[Vec<f64>]) -> Result<Self, ChainError> {
        let unary: Vec<Vec<f64>> = sizes.iter().map(|&q| vec![0.0; q]).collect();
        Self::from_log_parts(&unary, pair_logs)
    }

    pub fn len(&self) -> usize {
        self.unary_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary_scale.is_empty()
    }

    pub fn alphabet_size(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    #[inline]
    fn unary_lin(&self, k: usize) -> &[f64] {
        &self.unary[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn log_unary(&self, k: usize, x: usize) -> f64 {
        ln_nonneg(self.unary_lin(k)[x]) + self.unary_scale[k]
    }

    /// `ln g_k(a, b)` for `k >= 1`, the factor joining positions `k-1` and `k`.
    pub fn log_potential(&self, k: usize, a: usize, b: usize) -> f64 {
        assert!(k >= 1 && k < self.len());
        self.pairs[k - 1].log_value(a, b) + self.log_unary(k, b)
    }

    /// Natural log of the unnormalized mass of a path.
    pub fn log_path_weight(&self, path: &[usize]) -> f64 {
        assert_eq!(path.len(), self.len());
        let mut acc = self.log_unary(0, path[0]);
        for k in 1..path.len() {
            acc += self.log_potential(k, path[k - 1], path[k]);
        }
        acc
    }

    /// Natural log of the total mass; `-inf` when the chain is infeasible.
    pub fn log_partition(&self) -> f64 {
        match backward_filter(self) {
            Ok(msgs) => chain_normalization(&msgs),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Backward sum-product messages, one vector per position.
///
/// Each vector is stored scaled to a maximum of one; `log_scale[k]` restores
/// the absolute value, so `ln mu_k(x) = ln(lin) + log_scale[k]`. The message
/// at the last position is all ones.
#[derive(Debug, Clone)]
pub struct BackwardMessages {
    offsets: Vec<usize>,
    lin: Vec<f64>,
    log_scale: Vec<f64>,
    log_norm: f64,
}

impl BackwardMessages {
    pub fn len(&self) -> usize {
        self.log_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_scale.is_empty()
    }

    #[inline]
    fn lin_at(&self, k: usize) -> &[f64] {
        &self.lin[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn log_message(&self, k: usize, x: usize) -> f64 {
        ln_nonneg(self.lin_at(k)[x]) + self.log_scale[k]
    }
}

/// Computes the backward messages
/// `mu_k(a) = sum_b g_{k+1}(a, b) mu_{k+1}(b)` with `mu_{n-1} = 1`.
pub fn backward_filter(chain: &ChainModel) -> Result<BackwardMessages, ChainError> {
    let n = chain.len();
    if n == 0 {
        return Err(ChainError::Empty);
    }
    let total = chain.unary.len();
    let mut lin = vec![0.0; total];
    let mut log_scale = vec![0.0; n];
    let last = chain.offsets[n - 1]..chain.offsets[n];
    lin[last].fill(1.0);

    let mut tmp: Vec<f64> = Vec::new();
    for k in (0..n - 1).rev() {
        // tmp(b) = u_{k+1}(b) * mu_{k+1}(b)
        let next = chain.offsets[k + 1]..chain.offsets[k + 2];
        tmp.clear();
        tmp.extend(
            chain
                .unary_lin(k + 1)
                .iter()
                .zip(&lin[next])
                .map(|(u, m)| u * m),
        );
        let pair = &chain.pairs[k];
        let (lo, hi) = (chain.offsets[k], chain.offsets[k + 1]);
        let mut max = 0.0f64;
        for (a, slot) in lin[lo..hi].iter_mut().enumerate() {
            let s: f64 = pair.row(a).iter().zip(&tmp).map(|(t, v)| t * v).sum();
            *slot = s;
            max = max.max(s);
        }
        if max <= 0.0 {
            return Err(ChainError::Infeasible { position: k });
        }
        let inv = 1.0 / max;
        lin[lo..hi].iter_mut().for_each(|v| *v *= inv);
        log_scale[k] =
            log_scale[k + 1] + chain.unary_scale[k + 1] + pair.log_scale + max.ln();
    }

    let first: f64 = chain
        .unary_lin(0)
        .iter()
        .zip(&lin[chain.offsets[0]..chain.offsets[1]])
        .map(|(u, m)| u * m)
        .sum();
    if first <= 0.0 {
        return Err(ChainError::Infeasible { position: 0 });
    }
    let log_norm = first.ln() + chain.unary_scale[0] + log_scale[0];
    Ok(BackwardMessages {
        offsets: chain.offsets.clone(),
        lin,
        log_scale,
        log_norm,
    })
}

/// `ln sum_x g(x)`, available as a by-product of the backward pass.
pub fn chain_normalization(msgs: &BackwardMessages) -> f64 {
    msgs.log_norm
}

/// Draws an index from nonnegative weights with a single uniform variate,
/// scanning cumulative sums in natural order. Zero-weight entries are never
/// returned.
#[inline]
fn categorical(weights: impl Iterator<Item = f64> + Clone, total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = usize::MAX;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    // rounding left target >= acc; fall back to the last symbol with mass
    debug_assert!(last_positive != usize::MAX);
    last_positive
}

/// An exact draw from `p(x) ∝ g(x)` with its unnormalized log mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub path: Vec<usize>,
    pub log_weight: f64,
}

pub fn forward_sample<R: Rng + ?Sized>(
    chain: &ChainModel,
    msgs: &BackwardMessages,
    rng: &mut R,
) -> ChainSample {
    let mut path = Vec::with_capacity(chain.len());
    forward_sample_into(chain, msgs, rng, &mut path);
    let log_weight = chain.log_path_weight(&path);
    ChainSample { path, log_weight }
}

/// Forward sampling into a caller-owned buffer, without computing the path
/// weight.
pub fn forward_sample_into<R: Rng + ?Sized>(
    chain: &ChainModel,
    msgs: &BackwardMessages,
    rng: &mut R,
    path: &mut Vec<usize>,
) {
    path.clear();
    let n = chain.len();
    let weights0 = chain
        .unary_lin(0)
        .iter()
        .zip(msgs.lin_at(0))
        .map(|(u, m)| u * m);
    let total: f64 = weights0.clone().sum();
    let mut prev = categorical(weights0, total, rng.random::<f64>());
    path.push(prev);
    for k in 1..n {
        let row = chain.pairs[k - 1].row(prev);
        let weights = row
            .iter()
            .zip(chain.unary_lin(k))
            .zip(msgs.lin_at(k))
            .map(|((t, u), m)| t * u * m);
        let total: f64 = weights.clone().sum();
        debug_assert!(total > 0.0, "sampled into a zero-mass state");
        prev = categorical(weights, total, rng.random::<f64>());
        path.push(prev);
    }
}

/// Transition probabilities `p(x_k = b | x_{k-1} = a) = g_k(a, b) mu_k(b) / mu_{k-1}(a)`
/// evaluated term by term in the log domain. Returns `None` when
/// `mu_{k-1}(a)` is zero.
pub fn transition_row(
    chain: &ChainModel,
    msgs: &BackwardMessages,
    k: usize,
    a: usize,
) -> Option<Vec<f64>> {
    assert!(k >= 1 && k < chain.len());
    let denom = msgs.log_message(k - 1, a);
    if denom == f64::NEG_INFINITY {
        return None;
    }
    Some(
        (0..chain.alphabet_size(k))
            .map(|b| (chain.log_potential(k, a, b) + msgs.log_message(k, b) - denom).exp())
            .collect(),
    )
}

/// Marginal distribution of the first position, `∝ u_0(x) mu_0(x)`.
pub fn initial_distribution(chain: &ChainModel, msgs: &BackwardMessages) -> Vec<f64> {
    (0..chain.alphabet_size(0))
        .map(|x| (chain.log_unary(0, x) + msgs.log_message(0, x) - msgs.log_norm).exp())
        .collect()
}

/// Binary chain where two adjacent ones are forbidden.
pub fn hard_square_chain(n: usize) -> Result<ChainModel, ChainError> {
    let kappa = vec![0.0, 0.0, 0.0, f64::NEG_INFINITY];
    ChainModel::from_pairwise_log(&vec![2; n], &vec![kappa; n.saturating_sub(1)])
}

/// Outcome of [`sampler_self_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerCheck {
    pub paths: usize,
    pub draws: usize,
    /// total variation between sampled and enumerated path frequencies
    pub tv_distance: f64,
    /// largest `|sum(row) - 1|` over all transition rows with nonzero mass
    pub max_row_error: f64,
}

/// Largest chain (in number of paths) [`sampler_self_check`] enumerates.
pub const SELF_CHECK_MAX_PATHS: usize = 1 << 20;

/// Draws `draws` paths, compares their frequencies with the exact path
/// probabilities, and checks every transition row.
pub fn sampler_self_check<R: Rng + ?Sized>(
    chain: &ChainModel,
    draws: usize,
    rng: &mut R,
) -> Result<SamplerCheck, ChainError> {
    let sizes: Vec<usize> = (0..chain.len()).map(|k| chain.alphabet_size(k)).collect();
    let paths = sizes
        .iter()
        .try_fold(1usize, |acc, &q| acc.checked_mul(q).filter(|v| *v <= SELF_CHECK_MAX_PATHS))
        .ok_or(ChainError::TooManyPaths {
            limit: SELF_CHECK_MAX_PATHS,
        })?;
    let msgs = backward_filter(chain)?;

    let index = |path: &[usize]| path.iter().zip(&sizes).fold(0, |acc, (&x, &q)| acc * q + x);
    let mut counts = vec![0u64; paths];
    let mut path = Vec::with_capacity(chain.len());
    for _ in 0..draws {
        forward_sample_into(chain, &msgs, rng, &mut path);
        counts[index(&path)] += 1;
    }

    let mut tv = 0.0;
    let mut current = vec![0usize; sizes.len()];
    for i in 0..paths {
        let mut rest = i;
        for k in (0..sizes.len()).rev() {
            current[k] = rest % sizes[k];
            rest /= sizes[k];
        }
        let exact = (chain.log_path_weight(&current) - msgs.log_norm).exp();
        tv += (counts[i] as f64 / draws.max(1) as f64 - exact).abs();
    }

    let mut max_row_error: f64 = 0.0;
    for k in 1..chain.len() {
        for a in 0..sizes[k - 1] {
            if let Some(row) = transition_row(chain, &msgs, k, a) {
                max_row_error = max_row_error.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    Ok(SamplerCheck {
        paths,
        draws,
        tv_distance: 0.5 * tv,
        max_row_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logspace::log_sum_exp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const NEG: f64 = f64::NEG_INFINITY;

    fn hard_square_chain(n: usize) -> ChainModel {
        super::hard_square_chain(n).unwrap()
    }

    /// Every path of a small chain with its log mass, by brute force.
    fn enumerate(chain: &ChainModel) -> Vec<(Vec<usize>, f64)> {
        let n = chain.len();
        let mut out = Vec::new();
        let mut path = vec![0usize; n];
        loop {
            out.push((path.clone(), chain.log_path_weight(&path)));
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                path[k] += 1;
                if path[k] < chain.alphabet_size(k) {
                    break;
                }
                path[k] = 0;
            }
        }
    }

    #[test]
    fn two_position_hard_square_messages() {
        let chain = hard_square_chain(2);
        let msgs = backward_filter(&chain).unwrap();
        assert!((msgs.log_message(0, 0) - 2f64.ln()).abs() < 1e-15);
        assert!(msgs.log_message(0, 1).abs() < 1e-15);
        assert_eq!(msgs.log_message(1, 0), 0.0);
        assert_eq!(msgs.log_message(1, 1), 0.0);
        assert!((chain_normalization(&msgs) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_chain_normalization() {
        let chain = ChainModel::from_pairwise_log(&[2, 2, 2], &vec![vec![0.0; 4]; 2]).unwrap();
        assert!((chain.log_partition() - 8f64.ln()).abs() < 1e-14);
        let chain = ChainModel::from_pairwise_log(&[3; 5], &vec![vec![0.0; 9]; 4]).unwrap();
        assert!((chain.log_partition() - 5.0 * 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn three_position_hard_square_is_five() {
        assert!((hard_square_chain(3).log_partition() - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn infeasible_chain() {
        let zero = vec![NEG; 4];
        let chain = ChainModel::from_pairwise_log(&[2, 2], &[zero]).unwrap();
        assert!(matches!(
            backward_filter(&chain),
            Err(ChainError::Infeasible { position: 0 })
        ));
        assert_eq!(chain.log_partition(), NEG);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = ChainModel::from_pairwise_log(&[2, 3], &[vec![0.0; 4]]).unwrap_err();
        assert!(matches!(err, ChainError::DimensionMismatch { .. }));
    }

    #[test]
    fn single_nonzero_path_is_always_drawn() {
        // only 1 -> 0 -> 1 carries mass
        let pairs = vec![vec![NEG, NEG, 0.0, NEG], vec![NEG, 0.0, NEG, NEG]];
        let chain = ChainModel::from_pairwise_log(&[2, 2, 2], &pairs).unwrap();
        let msgs = backward_filter(&chain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = forward_sample(&chain, &msgs, &mut rng);
            assert_eq!(s.path, vec![1, 0, 1]);
            assert_eq!(s.log_weight, 0.0);
        }
    }

    #[test]
    fn recursion_holds_for_random_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sizes = [3usize, 2, 4, 3, 2];
        let unary: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&q| (0..q).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let pairs: Vec<Vec<f64>> = sizes
            .windows(2)
            .map(|w| {
                (0..w[0] * w[1])
                    .map(|_| {
                        if rng.random::<f64>() < 0.2 {
                            NEG
                        } else {
                            rng.random::<f64>() * 6.0 - 3.0
                        }
                    })
                    .collect()
            })
            .collect();
        let chain = ChainModel::from_log_parts(&unary, &pairs).unwrap();
        let msgs = backward_filter(&chain).unwrap();
        for k in 0..sizes.len() - 1 {
            for a in 0..sizes[k] {
                let terms: Vec<f64> = (0..sizes[k + 1])
                    .map(|b| chain.log_potential(k + 1, a, b) + msgs.log_message(k + 1, b))
                    .collect();
                let expect = log_sum_exp(&terms);
                let got = msgs.log_message(k, a);
                if expect == NEG {
                    assert_eq!(got, NEG);
                } else {
                    assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
        }
        // normalization equals brute-force sum over paths
        let all: Vec<f64> = enumerate(&chain).into_iter().map(|(_, w)| w).collect();
        let brute = log_sum_exp(&all);
        assert!((chain_normalization(&msgs) - brute).abs() < 1e-12 * brute.abs().max(1.0));
    }

    #[test]
    fn transition_rows_are_stochastic() {
        let chain = hard_square_chain(5);
        let msgs = backward_filter(&chain).unwrap();
        for k in 1..5 {
            for a in 0..2 {
                let row = transition_row(&chain, &msgs, k, a).unwrap();
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_messages_survive_long_chains() {
        // 2000 positions of weight 1e-3 each would underflow a linear product
        let n = 2000;
        let unary = vec![vec![(1e-3f64).ln(), (1e-3f64).ln()]; n];
        let pairs = vec![vec![0.0, 0.0, 0.0, NEG]; n - 1];
        let chain = ChainModel::from_log_parts(&unary, &pairs).unwrap();
        let z = chain.log_partition();
        assert!(z.is_finite());
        // Fibonacci growth: ln Z ≈ n ln(phi) + n ln(1e-3) + const
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let approx = n as f64 * (phi.ln() + (1e-3f64).ln());
        assert!((z - approx).abs() < 2.0);
    }

    #[test]
    fn self_check_on_five_positions() {
        let chain = hard_square_chain(5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let check = sampler_self_check(&chain, 100_000, &mut rng).unwrap();
        assert_eq!(check.paths, 32);
        assert!(check.tv_distance < 0.01, "{}", check.tv_distance);
        assert!(check.max_row_error < 1e-12);
    }
}
