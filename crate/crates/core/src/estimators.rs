//! Monte Carlo partition function estimators.
//!
//! * Ogata-Tanemura: `1/Z ≈ (1 / (K |S|)) sum_k 1/f(x_k)` for `x_k ~ p_f`
//!   with known support size `|S|`. Applied to the side marginal `f_A`
//!   (whose support is easy to count) it works for indicator targets too.
//! * Importance ratios between tempered targets
//!   `R_j = mean_k f(x_k)^(alpha_{j-1} - alpha_j)`, `x_k ~ q_j ∝ g_j`.
//! * Multilayer importance sampling: `Z_f = Z_{g_J} prod_j R_j`.
//!
//! Every estimator streams its terms through an [`EstimatorAccumulator`] in
//! the log domain, so `1/f` terms are just negated logs.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid_model::{Configuration, GridError, GridSpec, Side, SupportCount};
use crate::logspace::{to_log2, LN_2};
use crate::seed::{SeedTree, TAG_BASE};
use crate::tree_gibbs::{run_chain, ChainSchedule, TargetError, TargetSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("estimator needs at least one sample")]
    NoSamples,
    #[error("sample {index} has zero mass, its reciprocal is undefined")]
    ZeroMassSample { index: u64 },
    #[error("support size of the target is unknown (it is the partition function itself)")]
    UnknownSupport,
    #[error("invalid layer schedule: {0}")]
    InvalidSchedule(String),
    #[error("layer {j} outside 1..={layers}")]
    LayerOutOfRange { j: usize, layers: usize },
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `ln` of a positive sum, kept as `shift + ln(sum)` and rescaled whenever a
/// larger term arrives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LogSum {
    shift: f64,
    sum: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        shift: f64::NEG_INFINITY,
        sum: 0.0,
    };

    #[inline]
    fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if self.shift == f64::NEG_INFINITY {
            self.shift = t;
            self.sum = 1.0;
        } else if t > self.shift {
            self.sum = self.sum * (self.shift - t).exp() + 1.0;
            self.shift = t;
        } else {
            self.sum += (t - self.shift).exp();
        }
    }

    fn merge(&mut self, other: &LogSum) {
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        if self.shift == f64::NEG_INFINITY {
            *self = *other;
        } else if other.shift > self.shift {
            self.sum = self.sum * (self.shift - other.shift).exp() + other.sum;
            self.shift = other.shift;
        } else {
            self.sum += other.sum * (other.shift - self.shift).exp();
        }
    }

    /// `ln(self / other)`, exact when both hold equal terms.
    fn ln_ratio(&self, other: &LogSum) -> f64 {
        if self.sum == 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.sum / other.sum).ln() + (self.shift - other.shift)
    }
}

/// Streaming (optionally weighted) mean of terms `t_k = exp(log_term_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorAccumulator {
    count: u64,
    terms: LogSum,
    squares: LogSum,
    weights: LogSum,
}

impl Default for EstimatorAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl EstimatorAccumulator {
    pub fn new() -> Self {
        Self {
            count: 0,
            terms: LogSum::EMPTY,
            squares: LogSum::EMPTY,
            weights: LogSum::EMPTY,
        }
    }

    #[inline]
    pub fn push(&mut self, log_term: f64) {
        self.push_weighted(log_term, 0.0);
    }

    /// Adds a term with weight `exp(log_weight)`. Feeding every state of a
    /// small model with its exact probability turns the running mean into
    /// the exact expectation of the estimator.
    pub fn push_weighted(&mut self, log_term: f64, log_weight: f64) {
        debug_assert!(!log_term.is_nan());
        self.count += 1;
        self.terms.push(log_term + log_weight);
        self.squares.push(2.0 * log_term + log_weight);
        self.weights.push(log_weight);
    }

    pub fn merge(&mut self, other: &EstimatorAccumulator) {
        self.count += other.count;
        self.terms.merge(&other.terms);
        self.squares.merge(&other.squares);
        self.weights.merge(&other.weights);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `ln` of the (weighted) mean of the terms.
    pub fn log_mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.terms.ln_ratio(&self.weights))
    }

    /// Delta-method standard error of `ln(mean)`: `sd(t) / (mean(t) sqrt(K))`.
    /// Samples are treated as independent. `NaN` with fewer than two terms.
    pub fn stderr_log_mean(&self) -> f64 {
        if self.count < 2 || self.terms.sum == 0.0 {
            return f64::NAN;
        }
        let second = self.squares.ln_ratio(&self.weights);
        let first = self.terms.ln_ratio(&self.weights);
        let rel_var = ((second - 2.0 * first).exp() - 1.0).max(0.0);
        (rel_var / self.count as f64).sqrt()
    }
}

/// A natural-log estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub ln: f64,
    pub stderr_ln: f64,
    pub samples: u64,
}

impl LogEstimate {
    pub fn log2(&self) -> f64 {
        to_log2(self.ln)
    }

    pub fn stderr_log2(&self) -> f64 {
        self.stderr_ln / LN_2
    }
}

/// One point of a running estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub index: u64,
    pub log2_estimate: f64,
    pub stderr: f64,
}

/// Running estimate vs. number of samples for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub points: Vec<TracePoint>,
}

/// How to sample a running estimate: log-spaced checkpoints, and a divisor
/// applied to the log2 value (e.g. `N` to report bits per symbol).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSpec {
    pub per_decade: u32,
    pub divisor: f64,
}

impl TraceSpec {
    pub fn per_symbol(grid: &GridSpec) -> Self {
        Self {
            per_decade: 20,
            divisor: grid.n() as f64,
        }
    }
}

#[derive(Debug, Clone)]
struct TraceRecorder {
    spec: TraceSpec,
    next: u64,
    trace: Trace,
}

impl TraceRecorder {
    fn new(id: impl Into<String>, spec: TraceSpec) -> Self {
        Self {
            spec,
            next: 1,
            trace: Trace {
                id: id.into(),
                points: Vec::new(),
            },
        }
    }

    fn observe(&mut self, index: u64, estimate: impl FnOnce() -> Option<LogEstimate>) {
        if index < self.next {
            return;
        }
        if let Some(e) = estimate() {
            self.push(index, &e);
        }
        let step = 10f64.powf(1.0 / self.spec.per_decade.max(1) as f64);
        self.next = ((index as f64 * step).ceil() as u64).max(index + 1);
    }

    fn push(&mut self, index: u64, e: &LogEstimate) {
        self.trace.points.push(TracePoint {
            index,
            log2_estimate: e.log2() / self.spec.divisor,
            stderr: e.stderr_log2() / self.spec.divisor,
        });
    }

    fn finish(mut self, index: u64, e: Option<LogEstimate>) -> Trace {
        if let Some(e) = e {
            if self.trace.points.last().map(|p| p.index) != Some(index) {
                self.push(index, &e);
            }
        }
        self.trace
    }
}

/// Streaming Ogata-Tanemura estimator of `ln Z` from `ln f` of samples
/// drawn from `p_f`, given `ln |S_f|`.
#[derive(Debug, Clone)]
pub struct OgataTanemura {
    support: SupportCount,
    acc: EstimatorAccumulator,
    zero_mass_at: Option<u64>,
}

impl OgataTanemura {
    pub fn new(support: SupportCount) -> Self {
        Self {
            support,
            acc: EstimatorAccumulator::new(),
            zero_mass_at: None,
        }
    }

    #[inline]
    pub fn push(&mut self, log_f: f64) {
        self.push_weighted(log_f, 0.0);
    }

    pub fn push_weighted(&mut self, log_f: f64, log_weight: f64) {
        if log_f == f64::NEG_INFINITY && self.zero_mass_at.is_none() {
            self.zero_mass_at = Some(self.acc.count());
        }
        self.acc.push_weighted(-log_f, log_weight);
    }

    pub fn accumulator(&self) -> &EstimatorAccumulator {
        &self.acc
    }

    /// `ln` of the reciprocal-mean estimate `Gamma_hat`.
    pub fn log_gamma(&self) -> Result<f64, EstimatorError> {
        self.check()?;
        Ok(self.acc.log_mean().expect("checked") - self.support.ln())
    }

    fn check(&self) -> Result<(), EstimatorError> {
        if let Some(index) = self.zero_mass_at {
            return Err(EstimatorError::ZeroMassSample { index });
        }
        if self.acc.count() == 0 {
            return Err(EstimatorError::NoSamples);
        }
        Ok(())
    }

    /// `ln Z = -ln Gamma_hat`.
    pub fn estimate(&self) -> Result<LogEstimate, EstimatorError> {
        Ok(LogEstimate {
            ln: -self.log_gamma()?,
            stderr_ln: self.acc.stderr_log_mean(),
            samples: self.acc.count(),
        })
    }
}

fn ogata_tanemura_from<I: IntoIterator<Item = f64>>(
    log_f: I,
    support: SupportCount,
) -> Result<LogEstimate, EstimatorError> {
    let mut ot = OgataTanemura::new(support);
    for v in log_f {
        ot.push(v);
    }
    ot.estimate()
}

/// Tree-based Ogata-Tanemura: `ln Z` from the by-product side marginals
/// `ln f_A(x_A^(k))` (or `ln f_B`) and the side's support count.
pub fn ogata_tanemura_tree<I: IntoIterator<Item = f64>>(
    log_f_side: I,
    support: SupportCount,
) -> Result<LogEstimate, EstimatorError> {
    ogata_tanemura_from(log_f_side, support)
}

/// Plain Ogata-Tanemura on full configurations. Needs `f > 0` on every
/// sample and a known support size, so it cannot serve indicator targets;
/// see [`ogata_tanemura_direct_for`].
pub fn ogata_tanemura_direct<I: IntoIterator<Item = f64>>(
    log_f: I,
    support: SupportCount,
) -> Result<LogEstimate, EstimatorError> {
    ogata_tanemura_from(log_f, support)
}

/// [`ogata_tanemura_direct`] with the support taken from the target;
/// rejects targets whose support size is unknown.
pub fn ogata_tanemura_direct_for<I: IntoIterator<Item = f64>>(
    target: &TargetSpec,
    log_f: I,
) -> Result<LogEstimate, EstimatorError> {
    let support = target.full_support().ok_or(EstimatorError::UnknownSupport)?;
    ogata_tanemura_direct(log_f, support)
}

/// Exponents `1 = alpha_0 > alpha_1 > ... > alpha_J >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSchedule {
    alphas: Vec<f64>,
}

impl LayerSchedule {
    /// `alpha_j = 2^-j`, `j = 0..=layers`.
    pub fn geometric(layers: usize) -> Result<Self, EstimatorError> {
        if layers == 0 {
            return Err(EstimatorError::InvalidSchedule(
                "need at least one layer".into(),
            ));
        }
        Ok(Self {
            alphas: (0..=layers).map(|j| 0.5f64.powi(j as i32)).collect(),
        })
    }

    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self, EstimatorError> {
        if alphas.len() < 2 {
            return Err(EstimatorError::InvalidSchedule(
                "need alpha_0 and at least one layer".into(),
            ));
        }
        if alphas[0] != 1.0 {
            return Err(EstimatorError::InvalidSchedule(format!(
                "alpha_0 must be 1, got {}",
                alphas[0]
            )));
        }
        if alphas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(EstimatorError::InvalidSchedule(
                "exponents must be strictly decreasing".into(),
            ));
        }
        if *alphas.last().unwrap() < 0.0 {
            return Err(EstimatorError::InvalidSchedule(
                "exponents must be nonnegative".into(),
            ));
        }
        Ok(Self { alphas })
    }

    /// `J`.
    pub fn layers(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alpha(&self, j: usize) -> f64 {
        self.alphas[j]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn last(&self) -> f64 {
        *self.alphas.last().unwrap()
    }
}

/// `ln` of one importance-ratio term `exp(delta * log_value)`, with
/// `0 * -inf = 0`.
#[inline]
fn ratio_term(delta: f64, log_value: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else {
        delta * log_value
    }
}

/// `ln R_j = ln mean_k exp((alpha_{j-1} - alpha_j) * log_value_k)`, where
/// `log_value_k` is the log of the tempered factor at sample `k ~ q_j`.
pub fn importance_ratio<I: IntoIterator<Item = f64>>(
    log_values: I,
    schedule: &LayerSchedule,
    j: usize,
) -> Result<LogEstimate, EstimatorError> {
    if j == 0 || j > schedule.layers() {
        return Err(EstimatorError::LayerOutOfRange {
            j,
            layers: schedule.layers(),
        });
    }
    let delta = schedule.alpha(j - 1) - schedule.alpha(j);
    let mut acc = EstimatorAccumulator::new();
    for v in log_values {
        acc.push(ratio_term(delta, v));
    }
    let ln = acc.log_mean().ok_or(EstimatorError::NoSamples)?;
    Ok(LogEstimate {
        ln,
        stderr_ln: acc.stderr_log_mean(),
        samples: acc.count(),
    })
}

/// A family of targets `g_alpha` whose exponent is annealed.
pub trait TemperedFamily: Sync {
    fn grid(&self) -> &GridSpec;

    /// The target `g_alpha` to sample from.
    fn layer_target(&self, alpha: f64) -> Result<TargetSpec, TargetError>;

    /// `ln` of the factor carrying the exponent, so that
    /// `g_a(x) / g_b(x) = exp((a - b) * log_tempered_factor(x))`.
    fn log_tempered_factor(&self, x: &Configuration) -> f64;
}

/// `g_alpha = f^alpha`.
#[derive(Debug, Clone)]
pub struct KernelTempering {
    grid: GridSpec,
}

impl KernelTempering {
    pub fn new(grid: &GridSpec) -> Self {
        Self { grid: grid.clone() }
    }
}

impl TemperedFamily for KernelTempering {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn layer_target(&self, alpha: f64) -> Result<TargetSpec, TargetError> {
        TargetSpec::tempered(&self.grid, alpha)
    }

    fn log_tempered_factor(&self, x: &Configuration) -> f64 {
        crate::grid_model::evaluate_f(&self.grid, x).expect("configuration matches grid")
    }
}

/// `g_alpha = f * prod_n p(y_n | x_n)^alpha`: the constraint keeps exponent
/// one and only the channel likelihood is tempered.
#[derive(Debug, Clone)]
pub struct ChannelTempering {
    grid: GridSpec,
    log_lik: Vec<[f64; 2]>,
}

impl ChannelTempering {
    pub fn new(grid: &GridSpec, log_lik: Vec<[f64; 2]>) -> Self {
        assert_eq!(log_lik.len(), grid.n());
        Self {
            grid: grid.clone(),
            log_lik,
        }
    }

    pub fn log_lik(&self) -> &[[f64; 2]] {
        &self.log_lik
    }
}

impl TemperedFamily for ChannelTempering {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn layer_target(&self, alpha: f64) -> Result<TargetSpec, TargetError> {
        TargetSpec::with_channel(&self.grid, &self.log_lik, alpha)
    }

    fn log_tempered_factor(&self, x: &Configuration) -> f64 {
        let m = self.grid.m();
        (0..self.grid.n())
            .map(|n| self.log_lik[n][x.get(n / m, n % m) as usize])
            .sum()
    }
}

/// Both tree-based Ogata-Tanemura estimates from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SideEstimates {
    pub a: LogEstimate,
    pub b: LogEstimate,
    pub traces: Vec<Trace>,
}

impl SideEstimates {
    /// Mean of the A and B log-estimates.
    pub fn combined(&self) -> LogEstimate {
        LogEstimate {
            ln: 0.5 * (self.a.ln + self.b.ln),
            stderr_ln: 0.5 * (self.a.stderr_ln + self.b.stderr_ln),
            samples: self.a.samples,
        }
    }
}

/// Runs one tree-based Gibbs chain on `target` and feeds the by-product side
/// marginals into the two Ogata-Tanemura estimators.
pub fn tree_ogata_tanemura(
    target: &TargetSpec,
    chain: ChainSchedule,
    seeds: &SeedTree,
    trace: Option<(&str, TraceSpec)>,
) -> Result<SideEstimates, EstimatorError> {
    let mut ot_a = OgataTanemura::new(target.log_support_count(Side::A)?);
    let mut ot_b = OgataTanemura::new(target.log_support_count(Side::B)?);
    let mut rec = trace.map(|(id, spec)| {
        (
            TraceRecorder::new(format!("{id}A"), spec),
            TraceRecorder::new(format!("{id}B"), spec),
        )
    });
    for (i, s) in run_chain(target, chain, seeds.rng()).enumerate() {
        ot_a.push(s.log_f_a);
        ot_b.push(s.log_f_b);
        if let Some((ra, rb)) = rec.as_mut() {
            let k = i as u64 + 1;
            ra.observe(k, || ot_a.estimate().ok());
            rb.observe(k, || ot_b.estimate().ok());
        }
    }
    let (a, b) = (ot_a.estimate()?, ot_b.estimate()?);
    let traces = match rec {
        Some((ra, rb)) => vec![ra.finish(a.samples, Some(a)), rb.finish(b.samples, Some(b))],
        None => Vec::new(),
    };
    Ok(SideEstimates { a, b, traces })
}

/// How `Z_{g_J}` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseEstimate {
    /// supplied exactly, natural log
    Known(f64),
    /// tree-based Ogata-Tanemura on `g_J`, mean of the A and B estimates
    TreeOgataTanemura,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerConfig {
    pub schedule: LayerSchedule,
    pub chain: ChainSchedule,
    pub base: BaseEstimate,
    pub trace: Option<TraceSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerEstimate {
    /// `ln Z_f`
    pub log_z: LogEstimate,
    /// `ln R_j`, `j = 1..=J`
    pub layer_ratios: Vec<LogEstimate>,
    /// `ln Z_{g_J}`
    pub base: LogEstimate,
    pub traces: Vec<Trace>,
}

/// Runs the layer chains `q_1, ..., q_J` (layer `j` on stream `seeds/j`) and,
/// if requested, the base chain on `seeds/TAG_BASE`, all in parallel.
pub fn multilayer_estimate<F: TemperedFamily>(
    family: &F,
    config: &MultilayerConfig,
    seeds: &SeedTree,
) -> Result<MultilayerEstimate, EstimatorError> {
    let schedule = &config.schedule;
    let layers = schedule.layers();

    let run_layer = |j: usize| -> Result<(LogEstimate, Option<Trace>), EstimatorError> {
        let target = family.layer_target(schedule.alpha(j))?;
        let delta = schedule.alpha(j - 1) - schedule.alpha(j);
        let mut acc = EstimatorAccumulator::new();
        let mut rec = config.trace.map(|spec| TraceRecorder::new(format!("R{j}"), spec));
        for (i, s) in run_chain(&target, config.chain, seeds.child(j as u64).rng()).enumerate() {
            acc.push(ratio_term(delta, family.log_tempered_factor(&s.config)));
            if let Some(r) = rec.as_mut() {
                r.observe(i as u64 + 1, || {
                    acc.log_mean().map(|ln| LogEstimate {
                        ln,
                        stderr_ln: acc.stderr_log_mean(),
                        samples: acc.count(),
                    })
                });
            }
        }
        let est = LogEstimate {
            ln: acc.log_mean().ok_or(EstimatorError::NoSamples)?,
            stderr_ln: acc.stderr_log_mean(),
            samples: acc.count(),
        };
        Ok((est, rec.map(|r| r.finish(est.samples, Some(est)))))
    };

    let run_base = || -> Result<(LogEstimate, Vec<Trace>), EstimatorError> {
        match config.base {
            BaseEstimate::Known(ln) => Ok((
                LogEstimate {
                    ln,
                    stderr_ln: 0.0,
                    samples: 0,
                },
                Vec::new(),
            )),
            BaseEstimate::TreeOgataTanemura => {
                let target = family.layer_target(schedule.last())?;
                let sides = tree_ogata_tanemura(
                    &target,
                    config.chain,
                    &seeds.child(TAG_BASE),
                    config.trace.map(|t| ("Zbase_", t)),
                )?;
                Ok((sides.combined(), sides.traces))
            }
        }
    };

    let (layer_results, base) = rayon::join(
        || {
            (1..=layers)
                .into_par_iter()
                .map(run_layer)
                .collect::<Result<Vec<_>, _>>()
        },
        run_base,
    );
    let layer_results = layer_results?;
    let (base, base_traces) = base?;

    let mut traces = Vec::new();
    let mut layer_ratios = Vec::with_capacity(layers);
    for (est, trace) in layer_results {
        layer_ratios.push(est);
        traces.extend(trace);
    }
    traces.extend(base_traces);

    let ln = base.ln + layer_ratios.iter().map(|r| r.ln).sum::<f64>();
    let var = base.stderr_ln.powi(2) + layer_ratios.iter().map(|r| r.stderr_ln.powi(2)).sum::<f64>();
    Ok(MultilayerEstimate {
        log_z: LogEstimate {
            ln,
            stderr_ln: var.sqrt(),
            samples: config.chain.samples as u64,
        },
        layer_ratios,
        base,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_model::ConstraintKind;

    #[test]
    fn constant_marginal_recovers_support() {
        // f_A = 1 on its support, so Z = |S_{f_A}|
        let s = SupportCount::from_count(25.0);
        let est = ogata_tanemura_tree([0.0], s).unwrap();
        assert_eq!(est.ln, 25f64.ln());
    }

    #[test]
    fn direct_constant_target() {
        let (c, s) = (3.5f64, 12.0f64);
        let est = ogata_tanemura_direct([c.ln()], SupportCount::from_count(s)).unwrap();
        assert!((est.ln - (c * s).ln()).abs() < 1e-14);
    }

    #[test]
    fn direct_two_point_expectation() {
        // f(0) = 1, f(1) = 3, exact weights p = (1/4, 3/4): E[Gamma] = 1/4
        let mut ot = OgataTanemura::new(SupportCount::from_count(2.0));
        ot.push_weighted(0.0, 0.25f64.ln());
        ot.push_weighted(3f64.ln(), 0.75f64.ln());
        assert!((ot.log_gamma().unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn direct_rejects_indicator_and_zero_mass() {
        let g = GridSpec::hard_square(3, 1).unwrap();
        let t = TargetSpec::indicator(&g);
        assert_eq!(
            ogata_tanemura_direct_for(&t, [0.0]),
            Err(EstimatorError::UnknownSupport)
        );
        assert_eq!(
            ogata_tanemura_direct([0.0, f64::NEG_INFINITY], SupportCount::from_count(2.0)),
            Err(EstimatorError::ZeroMassSample { index: 1 })
        );
        assert_eq!(
            ogata_tanemura_tree(std::iter::empty(), SupportCount::from_count(2.0)),
            Err(EstimatorError::NoSamples)
        );
    }

    #[test]
    fn equal_exponents_give_unit_ratio() {
        // zero exponent difference: exactly one regardless of sample values
        let mut acc = EstimatorAccumulator::new();
        for v in [0.3, -7.0, 123.4, f64::NEG_INFINITY] {
            acc.push(ratio_term(0.0, v));
        }
        assert_eq!(acc.log_mean(), Some(0.0));
    }

    #[test]
    fn two_point_ratio_expectation() {
        // f in {1, 4}; q_1 ∝ f^(1/2) = {1, 2}/3; E[f^(1/2)] = 5/3
        let mut acc = EstimatorAccumulator::new();
        acc.push_weighted(0.5 * 0.0, (1.0f64 / 3.0).ln());
        acc.push_weighted(0.5 * 4f64.ln(), (2.0f64 / 3.0).ln());
        assert!((acc.log_mean().unwrap() - (5.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn layer_index_checked() {
        let s = LayerSchedule::geometric(3).unwrap();
        assert!(matches!(
            importance_ratio([0.0], &s, 0),
            Err(EstimatorError::LayerOutOfRange { .. })
        ));
        assert!(matches!(
            importance_ratio([0.0], &s, 4),
            Err(EstimatorError::LayerOutOfRange { .. })
        ));
        assert_eq!(
            importance_ratio(std::iter::empty(), &s, 1),
            Err(EstimatorError::NoSamples)
        );
    }

    #[test]
    fn schedule_validation() {
        let g = LayerSchedule::geometric(6).unwrap();
        assert_eq!(g.layers(), 6);
        assert_eq!(g.alpha(0), 1.0);
        assert_eq!(g.alpha(3), 0.125);
        assert_eq!(g.last(), 1.0 / 64.0);
        assert!(LayerSchedule::geometric(0).is_err());
        assert!(LayerSchedule::from_alphas(vec![0.9, 0.5]).is_err());
        assert!(LayerSchedule::from_alphas(vec![1.0, 0.5, 0.5]).is_err());
        assert!(LayerSchedule::from_alphas(vec![1.0, -0.5]).is_err());
        assert!(LayerSchedule::from_alphas(vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn accumulator_stderr_and_merge() {
        let mut a = EstimatorAccumulator::new();
        let mut b = EstimatorAccumulator::new();
        let mut all = EstimatorAccumulator::new();
        for i in 0..100 {
            let t = (i as f64 * 0.37).sin();
            all.push(t);
            if i < 40 {
                a.push(t)
            } else {
                b.push(t)
            }
        }
        a.merge(&b);
        assert_eq!(a.count(), 100);
        assert!((a.log_mean().unwrap() - all.log_mean().unwrap()).abs() < 1e-14);
        assert!((a.stderr_log_mean() - all.stderr_log_mean()).abs() < 1e-12);
        // direct check against linear formulas
        let xs: Vec<f64> = (0..100).map(|i| ((i as f64 * 0.37).sin()).exp()).collect();
        let mean = xs.iter().sum::<f64>() / 100.0;
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / 100.0;
        let se = ((m2 / (mean * mean) - 1.0) / 100.0).sqrt();
        assert!((all.stderr_log_mean() - se).abs() < 1e-12);
        assert!(EstimatorAccumulator::new().log_mean().is_none());
    }

    #[test]
    fn tree_ot_on_three_by_three() {
        let g = GridSpec::hard_square(3, 1).unwrap();
        let t = TargetSpec::indicator(&g);
        let est = tree_ogata_tanemura(&t, ChainSchedule::for_grid(&g, 100_000), &SeedTree::new(21), None)
            .unwrap();
        let truth = 63f64.log2();
        assert!((est.a.log2() - truth).abs() < 0.05, "{}", est.a.log2());
        assert!((est.b.log2() - truth).abs() < 0.05, "{}", est.b.log2());
    }

    #[test]
    fn multilayer_near_identity_layer() {
        // alpha_1 = 1 - eps with the exact base Z_{g_1}: the single ratio is ~1
        let k = ConstraintKind::smoothed(0.1).unwrap();
        let g = GridSpec::new(3, 1, k).unwrap();
        let eps = 1e-6;
        let z = |alpha: f64| {
            let model = crate::grid_model::FactorModel::new(&g, alpha, None).unwrap();
            let mut terms = Vec::new();
            for bits in 0u64..512 {
                let rows = (0..3).map(|r| (bits >> (3 * r)) & 7).collect();
                terms.push(model.log_value(&Configuration::from_rows(3, rows)).unwrap());
            }
            crate::logspace::log_sum_exp(&terms)
        };
        let config = MultilayerConfig {
            schedule: LayerSchedule::from_alphas(vec![1.0, 1.0 - eps]).unwrap(),
            chain: ChainSchedule::for_grid(&g, 2000),
            base: BaseEstimate::Known(z(1.0 - eps)),
            trace: None,
        };
        let est = multilayer_estimate(&KernelTempering::new(&g), &config, &SeedTree::new(5)).unwrap();
        assert!((est.log_z.ln - z(1.0)).abs() < 1e-5);
    }

    #[test]
    fn traces_are_log_spaced_and_end_at_k() {
        let g = GridSpec::hard_square(3, 1).unwrap();
        let t = TargetSpec::indicator(&g);
        let spec = TraceSpec { per_decade: 5, divisor: 9.0 };
        let est = tree_ogata_tanemura(&t, ChainSchedule::for_grid(&g, 1000), &SeedTree::new(1), Some(("C_", spec)))
            .unwrap();
        assert_eq!(est.traces.len(), 2);
        let tr = &est.traces[0];
        assert_eq!(tr.id, "C_A");
        assert_eq!(tr.points.first().unwrap().index, 1);
        assert_eq!(tr.points.last().unwrap().index, 1000);
        assert!(tr.points.windows(2).all(|w| w[0].index < w[1].index));
        assert!(tr.points.len() <= 20);
        assert!((tr.points.last().unwrap().log2_estimate - est.a.log2() / 9.0).abs() < 1e-15);
    }
}
