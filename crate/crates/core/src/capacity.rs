//! Noiseless capacity `C_M = log2(Z_f) / N` of the M×M grid, by tree-based
//! Ogata-Tanemura over several independent chains, plus two exact oracles.

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{tree_ogata_tanemura, EstimatorError, LogEstimate, Trace, TraceSpec};
use crate::grid_model::{GridError, GridSpec};
use crate::logspace::{ln_nonneg, to_log2};
use crate::seed::SeedTree;
use crate::tree_gibbs::{ChainSchedule, TargetSpec};

/// Largest grid the enumeration oracle accepts.
pub const ENUMERATION_MAX_CELLS: usize = 25;
/// Largest side the transfer-matrix oracle accepts.
pub const TRANSFER_MATRIX_MAX_SIDE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("{what} budget exceeded: {size} > {limit}")]
    OverBudget {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("capacity needs at least one path")]
    NoPaths,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Both tree-based estimates of one chain, in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub path: usize,
    pub a: LogEstimate,
    pub b: LogEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub m: usize,
    pub strip_width: usize,
    pub k: usize,
    /// mean of all per-path A and B estimates of `log2(Z) / N`
    pub capacity: f64,
    pub stderr: f64,
    /// max - min over the per-path estimates
    pub spread: f64,
    pub paths: Vec<PathEstimate>,
    pub traces: Vec<Trace>,
}

impl CapacityEstimate {
    /// Every per-path estimate in bits per symbol, A then B for each path.
    pub fn per_path_capacities(&self) -> Vec<f64> {
        let n = (self.m * self.m) as f64;
        self.paths
            .iter()
            .flat_map(|p| [p.a.log2() / n, p.b.log2() / n])
            .collect()
    }
}

/// Runs `paths` independent chains on the indicator target (chain `p` on
/// stream `seeds/p`) and combines their A and B estimates.
pub fn estimate_capacity(
    grid: &GridSpec,
    chain: ChainSchedule,
    paths: usize,
    seeds: &SeedTree,
    trace: Option<TraceSpec>,
) -> Result<CapacityEstimate, CapacityError> {
    if paths == 0 {
        return Err(CapacityError::NoPaths);
    }
    let target = TargetSpec::indicator(grid);
    let runs = (0..paths)
        .into_par_iter()
        .map(|p| {
            let id = format!("path{p}_");
            tree_ogata_tanemura(&target, chain, &seeds.child(p as u64), trace.map(|t| (id.as_str(), t)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = grid.n() as f64;
    let mut path_estimates = Vec::with_capacity(paths);
    let mut traces = Vec::new();
    for (p, run) in runs.into_iter().enumerate() {
        path_estimates.push(PathEstimate {
            path: p,
            a: run.a,
            b: run.b,
        });
        traces.extend(run.traces);
    }

    let values: Vec<f64> = path_estimates
        .iter()
        .flat_map(|p| [p.a.log2() / n, p.b.log2() / n])
        .collect();
    let capacity = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    // A and B of one chain are strongly correlated, so paths are the
    // independent replicates; one path falls back to the delta method
    let stderr = if paths >= 2 {
        let per_path: Vec<f64> = values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        let mean = per_path.iter().sum::<f64>() / paths as f64;
        let var = per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        (var / paths as f64).sqrt()
    } else {
        let p = &path_estimates[0];
        0.5 * (p.a.stderr_log2() + p.b.stderr_log2()) / n
    };

    Ok(CapacityEstimate {
        m: grid.m(),
        strip_width: grid.strip_width(),
        k: chain.samples,
        capacity,
        stderr,
        spread,
        paths: path_estimates,
        traces,
    })
}

/// Bit masks over a row-major `m×m` word: cells with a right neighbour.
fn horizontal_mask(m: usize) -> u64 {
    let mut mask = 0u64;
    for r in 0..m {
        for c in 0..m - 1 {
            mask |= 1 << (r * m + c);
        }
    }
    mask
}

/// `ln Z_f` by summing `f` over all `2^N` configurations.
///
/// Each configuration is one word with cell `(r, c)` at bit `r*m + c`, so the
/// four pair-type counts in both directions are popcounts.
pub fn exact_log_z_enumeration(grid: &GridSpec) -> Result<f64, CapacityError> {
    let (m, n) = (grid.m(), grid.n());
    if n > ENUMERATION_MAX_CELLS {
        return Err(CapacityError::OverBudget {
            what: "enumeration cells",
            size: n,
            limit: ENUMERATION_MAX_CELLS,
        });
    }
    let kappa = grid.constraint().table();
    let log_k = [
        [ln_nonneg(kappa[0][0]), ln_nonneg(kappa[0][1])],
        [ln_nonneg(kappa[1][0]), ln_nonneg(kappa[1][1])],
    ];
    let all = (1u64 << n) - 1;
    let h_mask = horizontal_mask(m);
    let v_mask = all >> m;

    // pairs (x, neighbour) restricted to `mask`, counted by type (a, b)
    let pair_counts = |x: u64, shift: usize, mask: u64| -> [[u32; 2]; 2] {
        let nb = x >> shift;
        let (nx, nnb) = (!x, !nb);
        [
            [(nx & nnb & mask).count_ones(), (nx & nb & mask).count_ones()],
            [(x & nnb & mask).count_ones(), (x & nb & mask).count_ones()],
        ]
    };
    let log_f = |x: u64| -> f64 {
        let h = pair_counts(x, 1, h_mask);
        let v = pair_counts(x, m, v_mask);
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let c = h[a][b] + v[a][b];
                if c > 0 {
                    acc += c as f64 * log_k[a][b];
                }
            }
        }
        acc
    };

    // fixed chunking keeps the floating-point summation order deterministic
    let total = 1u64 << n;
    let chunk = 1u64 << 16.min(n);
    let partial: Vec<(f64, f64)> = (0..total / chunk)
        .into_par_iter()
        .map(|i| {
            let mut shift = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for x in i * chunk..(i + 1) * chunk {
                let t = log_f(x);
                if t == f64::NEG_INFINITY {
                    continue;
                }
                if t > shift {
                    sum = sum * (shift - t).exp() + 1.0;
                    shift = t;
                } else {
                    sum += (t - shift).exp();
                }
            }
            (shift, sum)
        })
        .collect();
    let terms: Vec<f64> = partial
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(shift, sum)| shift + sum.ln())
        .collect();
    Ok(crate::logspace::log_sum_exp(&terms))
}

/// `ln Z_f` by the row-to-row transfer operator.
///
/// The vector over row states is multiplied, one row at a time, by the
/// vertical kernel (applied as a 2×2 transform per column, which factorizes
/// the `2^M × 2^M` operator) and by the horizontal weight of the new row.
/// For the (1,∞) kernel the per-column transform is the subset-sum
/// recursion and infeasible rows stay at zero. The vector is rescaled to
/// max 1 after every row, with the scale kept in the log domain.
pub fn exact_log_z_transfer_matrix(grid: &GridSpec) -> Result<f64, CapacityError> {
    let m = grid.m();
    if m > TRANSFER_MATRIX_MAX_SIDE {
        return Err(CapacityError::OverBudget {
            what: "transfer-matrix side",
            size: m,
            limit: TRANSFER_MATRIX_MAX_SIDE,
        });
    }
    let kappa = grid.constraint().table();
    let states = 1usize << m;
    let row_weight: Vec<f64> = (0..states)
        .map(|r| {
            (0..m - 1)
                .map(|c| kappa[(r >> c) & 1][(r >> (c + 1)) & 1])
                .product()
        })
        .collect();

    let mut v = row_weight.clone();
    let mut log_scale = rescale(&mut v);
    for _ in 1..m {
        for c in 0..m {
            let bit = 1usize << c;
            for s in 0..states {
                if s & bit == 0 {
                    let (v0, v1) = (v[s], v[s | bit]);
                    v[s] = kappa[0][0] * v0 + kappa[1][0] * v1;
                    v[s | bit] = kappa[0][1] * v0 + kappa[1][1] * v1;
                }
            }
        }
        for (x, w) in v.iter_mut().zip(&row_weight) {
            *x *= w;
        }
        log_scale += rescale(&mut v);
    }
    let total: f64 = v.iter().sum();
    Ok(log_scale + ln_nonneg(total))
}

/// Divides by the maximum and returns its log.
fn rescale(v: &mut [f64]) -> f64 {
    let max = v.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return f64::NEG_INFINITY;
    }
    for x in v.iter_mut() {
        *x /= max;
    }
    max.ln()
}

/// `C_M` from an exact `ln Z_f`.
pub fn capacity_from_log_z(grid: &GridSpec, log_z: f64) -> f64 {
    to_log2(log_z) / grid.n() as f64
}

/// Exact `ln Z_f` by whichever oracle fits the budget: transfer matrix for
/// `M <= 20`, else `None`.
pub fn exact_log_z(grid: &GridSpec) -> Option<f64> {
    if grid.m() <= TRANSFER_MATRIX_MAX_SIDE {
        exact_log_z_transfer_matrix(grid).ok()
    } else {
        None
    }
}
