//! Tree-based (blocked) Gibbs sampling over the A/B strip partition.
//!
//! One sweep redraws every A strip exactly from its conditional given the
//! current B cells, then every B strip given the new A cells. Each strip draw
//! is a backward filter plus forward sample on the strip's row-slice chain,
//! and the chain normalizations summed over one side give the exact marginal
//! of the other side for free:
//!
//! ```text
//! f_A(x_A) = F_A-internal(x_A) * prod_{B strips} Z_strip(x_A)
//! ```

use rand::Rng;
use thiserror::Error;

use crate::chain_engine::{backward_filter, chain_normalization, forward_sample_into};
use crate::grid_model::{Configuration, FactorModel, GridError, GridSpec, Side, SupportCount};
use crate::logspace::LN_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("exponent must be in [0, 1], got {0}")]
    InvalidExponent(f64),
    #[error("initial configuration has zero target mass")]
    InfeasibleStart,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The distribution a chain samples from, up to normalization.
///
/// Two families are supported and always chosen explicitly:
///
/// * `f(x)^alpha` ([`TargetSpec::tempered`]), with `0^0 = 1` so `alpha = 0`
///   is uniform over all of `{0,1}^N`;
/// * `f(x) * prod_n p(y_n | x_n)^beta` ([`TargetSpec::with_channel`]), where
///   the kernel keeps exponent 1 and only the channel term is tempered.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    alpha: f64,
    channel_exponent: Option<f64>,
    model: FactorModel,
}

impl TargetSpec {
    /// Plain `f`.
    pub fn indicator(grid: &GridSpec) -> Self {
        Self {
            alpha: 1.0,
            channel_exponent: None,
            model: FactorModel::plain(grid),
        }
    }

    /// `f^alpha`.
    pub fn tempered(grid: &GridSpec, alpha: f64) -> Result<Self, TargetError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(TargetError::InvalidExponent(alpha));
        }
        Ok(Self {
            alpha,
            channel_exponent: None,
            model: FactorModel::new(grid, alpha, None)?,
        })
    }

    /// `f(x) * prod_n exp(beta * log_lik[n][x_n])`.
    pub fn with_channel(
        grid: &GridSpec,
        log_lik: &[[f64; 2]],
        beta: f64,
    ) -> Result<Self, TargetError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(TargetError::InvalidExponent(beta));
        }
        let cells = log_lik.iter().map(|l| [beta * l[0], beta * l[1]]).collect();
        Ok(Self {
            alpha: 1.0,
            channel_exponent: Some(beta),
            model: FactorModel::new(grid, 1.0, Some(cells))?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.model.grid()
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn channel_exponent(&self) -> Option<f64> {
        self.channel_exponent
    }

    pub fn log_value(&self, x: &Configuration) -> f64 {
        self.model.log_value(x).expect("configuration matches grid")
    }

    /// Support size of the marginal on `side`.
    pub fn log_support_count(&self, side: Side) -> Result<SupportCount, GridError> {
        self.model.log_support_count(side)
    }

    /// `|X| = 2^N` when the target is strictly positive everywhere; `None`
    /// when some kernel entry (raised to `alpha`) vanishes, in which case the
    /// support size is itself a partition function.
    pub fn full_support(&self) -> Option<SupportCount> {
        let zero_kernel = self
            .grid()
            .constraint()
            .powf(self.alpha)
            .iter()
            .flatten()
            .any(|v| *v == 0.0);
        (!zero_kernel).then(|| SupportCount::from_ln(self.grid().n() as f64 * LN_2))
    }
}

/// Current position of one Gibbs chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub current: Configuration,
    /// completed sweeps
    pub k: u64,
    /// `ln f_A(x_A^(k))`, from the B-strip normalizations of the last B draw
    pub last_log_f_a: f64,
    /// `ln f_B(x_B^(k-1))`, from the A-strip normalizations of the last A
    /// draw, which conditions on the B cells left by the previous sweep
    pub last_log_f_b: f64,
}

/// One emitted sample with its by-product side marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSample {
    pub config: Configuration,
    /// `ln f_A` of this sample's A cells
    pub log_f_a: f64,
    /// `ln f_B` of the B cells the A draw conditioned on (one sweep behind)
    pub log_f_b: f64,
}

pub struct GibbsSampler<'t> {
    target: &'t TargetSpec,
    state: GibbsState,
    path: Vec<usize>,
}

impl<'t> GibbsSampler<'t> {
    /// Starts from the all-zeros configuration.
    pub fn new(target: &'t TargetSpec) -> Self {
        Self::from_configuration(target, Configuration::zeros(target.grid().m()))
            .expect("all-zeros has positive mass for kernels with kappa(0,0) > 0")
    }

    pub fn from_configuration(
        target: &'t TargetSpec,
        start: Configuration,
    ) -> Result<Self, TargetError> {
        if start.m() != target.grid().m() {
            return Err(GridError::DimensionMismatch {
                expected: target.grid().m(),
                got: start.m(),
            }
            .into());
        }
        if target.log_value(&start) == f64::NEG_INFINITY {
            return Err(TargetError::InfeasibleStart);
        }
        Ok(Self {
            target,
            state: GibbsState {
                current: start,
                k: 0,
                last_log_f_a: f64::NAN,
                last_log_f_b: f64::NAN,
            },
            path: Vec::new(),
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn into_state(self) -> GibbsState {
        self.state
    }

    /// Redraws all strips of `side`; returns the sum of their log
    /// normalizations.
    fn draw_side<R: Rng + ?Sized>(&mut self, side: Side, rng: &mut R) -> f64 {
        let model = self.target.model();
        let mut total = 0.0;
        for strip in model.grid().strips_on(side) {
            let chain = model.strip_chain(&self.state.current, strip);
            let msgs = backward_filter(&chain)
                .expect("strip conditional of a feasible state is feasible");
            total += chain_normalization(&msgs);
            forward_sample_into(&chain, &msgs, rng, &mut self.path);
            for (r, &s) in self.path.iter().enumerate() {
                self.state
                    .current
                    .set_slice(r, strip.first_col, strip.width, s);
            }
        }
        total
    }

    /// One full sweep: A strips left to right, then B strips.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let model = self.target.model();
        let norm_a = self.draw_side(Side::A, rng);
        self.state.last_log_f_b = model.log_internal(&self.state.current, Side::B) + norm_a;
        let norm_b = self.draw_side(Side::B, rng);
        self.state.last_log_f_a = model.log_internal(&self.state.current, Side::A) + norm_b;
        self.state.k += 1;
        debug_assert!(self.target.log_value(&self.state.current) > f64::NEG_INFINITY);
    }

    pub fn sample(&self) -> GibbsSample {
        GibbsSample {
            config: self.state.current.clone(),
            log_f_a: self.state.last_log_f_a,
            log_f_b: self.state.last_log_f_b,
        }
    }
}

/// One sweep as a pure state transition.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: GibbsState,
    target: &TargetSpec,
    rng: &mut R,
) -> Result<GibbsState, TargetError> {
    let (k, a, b) = (state.k, state.last_log_f_a, state.last_log_f_b);
    let mut sampler = GibbsSampler::from_configuration(target, state.current)?;
    sampler.state.k = k;
    sampler.state.last_log_f_a = a;
    sampler.state.last_log_f_b = b;
    sampler.sweep(rng);
    Ok(sampler.into_state())
}

/// Burn-in, sample count and thinning for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSchedule {
    pub burn_in: usize,
    pub samples: usize,
    pub thinning: usize,
}

impl ChainSchedule {
    /// `samples` draws with burn-in `10 * m` and no thinning.
    pub fn for_grid(grid: &GridSpec, samples: usize) -> Self {
        Self {
            burn_in: 10 * grid.m(),
            samples,
            thinning: 1,
        }
    }

    pub fn sweeps(&self) -> usize {
        self.burn_in + self.samples * self.thinning
    }
}

/// Lazily runs a chain: `burn_in` sweeps, then one sample every `thinning`
/// sweeps until `samples` have been emitted.
pub struct ChainRun<'t, R> {
    sampler: GibbsSampler<'t>,
    rng: R,
    schedule: ChainSchedule,
    emitted: usize,
    burned: bool,
}

impl<'t, R: Rng> Iterator for ChainRun<'t, R> {
    type Item = GibbsSample;

    fn next(&mut self) -> Option<GibbsSample> {
        if self.emitted >= self.schedule.samples {
            return None;
        }
        if !self.burned {
            for _ in 0..self.schedule.burn_in {
                self.sampler.sweep(&mut self.rng);
            }
            self.burned = true;
        }
        for _ in 0..self.schedule.thinning.max(1) {
            self.sampler.sweep(&mut self.rng);
        }
        self.emitted += 1;
        Some(self.sampler.sample())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.schedule.samples - self.emitted;
        (left, Some(left))
    }
}

pub fn run_chain<R: Rng>(target: &TargetSpec, schedule: ChainSchedule, rng: R) -> ChainRun<'_, R> {
    ChainRun {
        sampler: GibbsSampler::new(target),
        rng,
        schedule,
        emitted: 0,
        burned: false,
    }
}
