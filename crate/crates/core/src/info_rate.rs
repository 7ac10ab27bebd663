//! Uniform-input information rate of the constrained grid over a memoryless
//! bipolar AWGN channel, `y_n = (-1)^{x_n} + noise`, `SNR = 1/sigma^2`.
//!
//! `I/N = H(Y)/N - H(Y|X)/N`. The second term has a closed form; the first
//! is a double loop: draw `x` from the constraint by Gibbs sampling, push it
//! through the channel, and estimate `log2 p(y)` for each output by
//! multilayer importance sampling over `g_j = f * p(y|x)^{alpha_j}` (the
//! indicator is never tempered) with a tree-based Ogata-Tanemura base layer.
//! `p(y) = Z_{f p(y|.)} / Z_f`, and `ln Z_f` is supplied once per grid.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::capacity::{exact_log_z_transfer_matrix, ENUMERATION_MAX_CELLS};
use crate::estimators::{
    multilayer_estimate, BaseEstimate, ChannelTempering, EstimatorError, LayerSchedule,
    LogEstimate, MultilayerConfig, Trace, TraceSpec,
};
use crate::grid_model::{Configuration, FactorModel, GridError, GridSpec};
use crate::logspace::{log_sum_exp, to_log2, LN_2};
use crate::seed::{SeedTree, TAG_INNER, TAG_NOISE, TAG_OUTER};
use crate::tree_gibbs::{ChainSchedule, GibbsSampler, TargetError, TargetSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoRateError {
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoise(f64),
    #[error("output has {got} values, grid has {expected} cells")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("enumeration budget exceeded: {0} cells")]
    OverBudget(usize),
    #[error("information rate needs at least one outer sample")]
    NoOuterSamples,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Memoryless AWGN channel with input levels `(-1)^x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    sigma2: f64,
}

impl ChannelModel {
    pub fn new(sigma2: f64) -> Result<Self, InfoRateError> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(InfoRateError::InvalidNoise(sigma2));
        }
        Ok(Self { sigma2 })
    }

    /// `sigma^2 = 10^(-snr_db / 10)`.
    pub fn from_snr_db(snr_db: f64) -> Result<Self, InfoRateError> {
        Self::new(10f64.powf(-snr_db / 10.0))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }

    #[inline]
    pub fn level(x: bool) -> f64 {
        if x {
            -1.0
        } else {
            1.0
        }
    }

    /// `ln p(y | x)` for one cell.
    #[inline]
    pub fn log_density(&self, y: f64, x: bool) -> f64 {
        let d = y - Self::level(x);
        -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln() - d * d / (2.0 * self.sigma2)
    }

    /// `[ln p(y_n | 0), ln p(y_n | 1)]` per cell.
    pub fn log_likelihoods(&self, y: &[f64]) -> Vec<[f64; 2]> {
        y.iter()
            .map(|&v| [self.log_density(v, false), self.log_density(v, true)])
            .collect()
    }
}

/// A channel output with the input that produced it. The input is kept for
/// diagnostics only and never reaches the inner estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSample {
    pub y: Vec<f64>,
    pub x: Configuration,
}

impl OutputSample {
    /// `y_n = (-1)^{x_n} + sigma * noise_n` for given standard normal noise.
    pub fn from_noise(x: &Configuration, channel: &ChannelModel, noise: &[f64]) -> Self {
        let m = x.m();
        assert_eq!(noise.len(), m * m);
        let sigma = channel.sigma2.sqrt();
        let y = noise
            .iter()
            .enumerate()
            .map(|(n, z)| ChannelModel::level(x.get(n / m, n % m)) + sigma * z)
            .collect();
        Self { y, x: x.clone() }
    }

    /// `ln p(y | x)` of the stored input.
    pub fn log_conditional_density(&self, channel: &ChannelModel) -> f64 {
        let m = self.x.m();
        self.y
            .iter()
            .enumerate()
            .map(|(n, &v)| channel.log_density(v, self.x.get(n / m, n % m)))
            .sum()
    }
}

pub fn simulate_output<R: Rng + ?Sized>(
    x: &Configuration,
    channel: &ChannelModel,
    rng: &mut R,
) -> OutputSample {
    let noise: Vec<f64> = (0..x.n()).map(|_| rng.sample(StandardNormal)).collect();
    OutputSample::from_noise(x, channel, &noise)
}

/// `H(Y|X)/N = (1/2) log2(2 pi e sigma^2)` bits per symbol.
pub fn conditional_entropy_rate(channel: &ChannelModel) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * channel.sigma2).log2()
}

/// Estimate of `ln p(y)` by multilayer importance sampling on the channel
/// family, given `ln Z_f`.
pub fn log_p_y(
    y: &[f64],
    grid: &GridSpec,
    channel: &ChannelModel,
    config: &MultilayerConfig,
    log_z_f: f64,
    seeds: &SeedTree,
) -> Result<(LogEstimate, Vec<Trace>), InfoRateError> {
    if y.len() != grid.n() {
        return Err(InfoRateError::DimensionMismatch {
            expected: grid.n(),
            got: y.len(),
        });
    }
    let family = ChannelTempering::new(grid, channel.log_likelihoods(y));
    let est = multilayer_estimate(&family, config, seeds)?;
    Ok((
        LogEstimate {
            ln: est.log_z.ln - log_z_f,
            ..est.log_z
        },
        est.traces,
    ))
}

/// Exact `ln p(y) = ln sum_x f(x) p(y|x) - ln Z_f` by enumeration.
pub fn exact_log_p_y(
    y: &[f64],
    grid: &GridSpec,
    channel: &ChannelModel,
) -> Result<f64, InfoRateError> {
    let (m, n) = (grid.m(), grid.n());
    if n > ENUMERATION_MAX_CELLS {
        return Err(InfoRateError::OverBudget(n));
    }
    if y.len() != n {
        return Err(InfoRateError::DimensionMismatch { expected: n, got: y.len() });
    }
    let plain = FactorModel::plain(grid);
    let lik = channel.log_likelihoods(y);
    let mut joint = Vec::new();
    let mut prior = Vec::new();
    for bits in 0u64..1 << n {
        let rows = (0..m).map(|r| (bits >> (r * m)) & ((1 << m) - 1)).collect();
        let x = Configuration::from_rows(m, rows);
        let lf = plain.log_value(&x)?;
        if lf == f64::NEG_INFINITY {
            continue;
        }
        let ll: f64 = (0..n).map(|i| lik[i][((bits >> i) & 1) as usize]).sum();
        joint.push(lf + ll);
        prior.push(lf);
    }
    Ok(log_sum_exp(&joint) - log_sum_exp(&prior))
}

/// `J` used when none is given: 3 at 0 dB, 6 at 6 dB, one more layer per
/// 2 dB, at least 1.
pub fn default_layers(snr_db: f64) -> usize {
    (3.0 + (snr_db / 2.0).round()).clamp(1.0, 12.0) as usize
}

/// Layer exponents for one SNR.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerPolicy {
    /// `alpha_j = 2^-j` with [`default_layers`]
    BySnr,
    /// `alpha_j = 2^-j` with this `J` everywhere
    Geometric(usize),
    Fixed(LayerSchedule),
}

impl LayerPolicy {
    pub fn schedule(&self, snr_db: f64) -> Result<LayerSchedule, EstimatorError> {
        match self {
            LayerPolicy::BySnr => LayerSchedule::geometric(default_layers(snr_db)),
            LayerPolicy::Geometric(j) => LayerSchedule::geometric(*j),
            LayerPolicy::Fixed(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoRateConfig {
    /// outer samples `L`
    pub outer: usize,
    /// sweeps of the fresh chain that draws each input `x^(l)`
    pub outer_burn_in: usize,
    /// chain schedule of every inner layer and base chain
    pub inner: ChainSchedule,
    pub layers: LayerPolicy,
    /// `ln Z_f` of the input constraint
    pub log_z_f: f64,
    /// record traces of the inner estimators of the first output
    pub trace: Option<TraceSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoRateResult {
    pub snr_db: f64,
    pub sigma2: f64,
    pub outer: usize,
    pub layers: usize,
    pub k: usize,
    /// `log2 p(y^(l))` estimates
    pub log2_p_y: Vec<f64>,
    /// `log2 p(y^(l) | x^(l))`
    pub log2_p_y_given_x: Vec<f64>,
    /// `H(Y)/N` estimate
    pub h_y: f64,
    /// closed-form `H(Y|X)/N`
    pub h_y_given_x: f64,
    /// `H(Y)/N - H(Y|X)/N`
    pub info_rate: f64,
    /// standard error over the outer samples
    pub stderr: f64,
    /// `mean (log2 p(y|x) - log2 p(y)) / N`, same target, lower variance
    pub paired_info_rate: f64,
    pub paired_stderr: f64,
    pub traces: Vec<Trace>,
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Draws input `l` with a fresh chain on `f` started at all zeros.
fn draw_input(target: &TargetSpec, burn_in: usize, seeds: &SeedTree) -> Configuration {
    let mut rng = seeds.rng();
    let mut sampler = GibbsSampler::new(target);
    for _ in 0..burn_in.max(1) {
        sampler.sweep(&mut rng);
    }
    sampler.into_state().current
}

/// The double-loop estimator at every SNR in `snr_db`.
///
/// Inputs, noise and inner-chain streams depend only on `l`, so all SNRs
/// share common random numbers, which keeps the curve smooth in SNR.
pub fn estimate_info_rate(
    grid: &GridSpec,
    snr_db: &[f64],
    config: &InfoRateConfig,
    seeds: &SeedTree,
) -> Result<Vec<InfoRateResult>, InfoRateError> {
    if config.outer == 0 {
        return Err(InfoRateError::NoOuterSamples);
    }
    let channels = snr_db
        .iter()
        .map(|&s| ChannelModel::from_snr_db(s))
        .collect::<Result<Vec<_>, _>>()?;
    let schedules = snr_db
        .iter()
        .map(|&s| config.layers.schedule(s))
        .collect::<Result<Vec<_>, _>>()?;

    let target = TargetSpec::indicator(grid);
    let n = grid.n();
    let inputs: Vec<(Configuration, Vec<f64>)> = (0..config.outer)
        .into_par_iter()
        .map(|l| {
            let x = draw_input(&target, config.outer_burn_in, &seeds.child(TAG_OUTER).child(l as u64));
            let mut rng = seeds.child(TAG_NOISE).child(l as u64).rng();
            let noise = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (x, noise)
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..channels.len())
        .flat_map(|s| (0..config.outer).map(move |l| (s, l)))
        .collect();
    let inner = tasks
        .par_iter()
        .map(|&(s, l)| {
            let (x, noise) = &inputs[l];
            let out = OutputSample::from_noise(x, &channels[s], noise);
            let ml = MultilayerConfig {
                schedule: schedules[s].clone(),
                chain: config.inner,
                base: BaseEstimate::TreeOgataTanemura,
                trace: if l == 0 { config.trace } else { None },
            };
            let (est, traces) = log_p_y(
                &out.y,
                grid,
                &channels[s],
                &ml,
                config.log_z_f,
                &seeds.child(TAG_INNER).child(l as u64),
            )?;
            Ok((est.log2(), to_log2(out.log_conditional_density(&channels[s])), traces))
        })
        .collect::<Result<Vec<_>, InfoRateError>>()?;

    let nf = n as f64;
    let mut results = Vec::with_capacity(channels.len());
    for (s, chunk) in inner.chunks(config.outer).enumerate() {
        let log2_p_y: Vec<f64> = chunk.iter().map(|c| c.0).collect();
        let log2_p_y_given_x: Vec<f64> = chunk.iter().map(|c| c.1).collect();
        let per_symbol: Vec<f64> = log2_p_y.iter().map(|v| -v / nf).collect();
        let paired: Vec<f64> = chunk.iter().map(|c| (c.1 - c.0) / nf).collect();
        let (h_y, stderr) = mean_and_stderr(&per_symbol);
        let (paired_info_rate, paired_stderr) = mean_and_stderr(&paired);
        let h_y_given_x = conditional_entropy_rate(&channels[s]);
        results.push(InfoRateResult {
            snr_db: snr_db[s],
            sigma2: channels[s].sigma2(),
            outer: config.outer,
            layers: schedules[s].layers(),
            k: config.inner.samples,
            log2_p_y,
            log2_p_y_given_x,
            h_y,
            h_y_given_x,
            info_rate: h_y - h_y_given_x,
            stderr,
            paired_info_rate,
            paired_stderr,
            traces: chunk[0].2.clone(),
        });
    }
    Ok(results)
}

/// `ln Z_f` for the input distribution from the transfer matrix when the
/// grid is small enough.
pub fn exact_input_log_z(grid: &GridSpec) -> Option<f64> {
    exact_log_z_transfer_matrix(grid).ok()
}

/// Per-symbol bits from a natural log over the whole grid.
pub fn bits_per_symbol(grid: &GridSpec, ln: f64) -> f64 {
    ln / LN_2 / grid.n() as f64
}
