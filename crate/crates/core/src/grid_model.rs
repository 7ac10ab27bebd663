//! The M×M binary grid with pairwise constraints, its vertical strip
//! partition, and the reduction of a strip (with everything else fixed) to a
//! chain over row slices.
//!
//! Cells are indexed row-major: cell `(r, c)` has linear index `r * m + c`.
//! A [`Configuration`] packs each row into one `u64`, bit `c` holding column
//! `c`, which caps the side length at 64.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::chain_engine::{ChainModel, PairTable};
use crate::logspace::ln_nonneg;

pub const MAX_SIDE: usize = 64;
/// Strip chains have `2^width` symbols per position.
pub const MAX_STRIP_WIDTH: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("m must be in 1..={MAX_SIDE}, got {0}")]
    InvalidSide(usize),
    #[error("strip_width must be in 1..=min(m, {MAX_STRIP_WIDTH}), got {width} for m = {m}")]
    InvalidStripWidth { width: usize, m: usize },
    #[error("kernel entries must be finite and nonnegative")]
    InvalidKernel,
    #[error("unknown constraint {0:?}")]
    UnknownConstraint(String),
    #[error("configuration has side {got}, grid has side {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("configuration needs {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("strip {0} does not exist")]
    NoSuchStrip(usize),
    #[error("neighbour cell ({row}, {col}) of the strip is not fixed")]
    MissingNeighbor { row: usize, col: usize },
    #[error("cell weights must be finite, cell {0} is not")]
    InvalidCellWeight(usize),
    #[error("cell weight table has {got} entries, grid has {expected} cells")]
    CellCount { expected: usize, got: usize },
    #[error("support of the side marginal is not determined by the zero configuration (kernel forbids a pair containing 0)")]
    SupportNotZeroDetermined,
}

/// Which half of the strip partition a strip belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// Pairwise kernel `kappa(a, b)` on binary values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintKind {
    table: [[f64; 2]; 2],
}

impl ConstraintKind {
    /// The (1,∞) run-length-limited kernel: two adjacent ones are forbidden.
    pub fn rll_1inf() -> Self {
        Self {
            table: [[1.0, 1.0], [1.0, 0.0]],
        }
    }

    pub fn from_table(table: [[f64; 2]; 2]) -> Result<Self, GridError> {
        if table.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GridError::InvalidKernel);
        }
        Ok(Self { table })
    }

    /// Hard-square kernel with `kappa(1,1) = eps` instead of zero.
    pub fn smoothed(eps: f64) -> Result<Self, GridError> {
        Self::from_table([[1.0, 1.0], [1.0, eps]])
    }

    pub fn from_name(name: &str) -> Result<Self, GridError> {
        match name {
            "rll_1inf" => Ok(Self::rll_1inf()),
            other => Err(GridError::UnknownConstraint(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        if self.is_rll_1inf() {
            "rll_1inf"
        } else {
            "custom"
        }
    }

    pub fn is_rll_1inf(&self) -> bool {
        *self == Self::rll_1inf()
    }

    #[inline]
    pub fn value(&self, a: bool, b: bool) -> f64 {
        self.table[a as usize][b as usize]
    }

    pub fn table(&self) -> [[f64; 2]; 2] {
        self.table
    }

    pub fn has_zeros(&self) -> bool {
        self.table.iter().flatten().any(|v| *v == 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.table[0][1] == self.table[1][0]
    }

    /// `kappa^alpha` with the convention `0^0 = 1`.
    pub fn powf(&self, alpha: f64) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = if alpha == 0.0 {
                    1.0
                } else {
                    self.table[a][b].powf(alpha)
                };
            }
        }
        out
    }
}

/// One vertical strip of consecutive columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strip {
    pub index: usize,
    pub first_col: usize,
    pub width: usize,
    pub side: Side,
}

impl Strip {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.first_col..self.first_col + self.width
    }
}

/// Geometry of the grid and its A/B strip partition.
///
/// Strips are consecutive column groups of `strip_width`, left to right; the
/// last one takes the remainder. Even-indexed strips are side A, odd ones B.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    m: usize,
    strip_width: usize,
    constraint: ConstraintKind,
    strips: Vec<Strip>,
}

impl GridSpec {
    pub fn new(m: usize, strip_width: usize, constraint: ConstraintKind) -> Result<Self, GridError> {
        if m == 0 || m > MAX_SIDE {
            return Err(GridError::InvalidSide(m));
        }
        if strip_width == 0 || strip_width > m || strip_width > MAX_STRIP_WIDTH {
            return Err(GridError::InvalidStripWidth {
                width: strip_width,
                m,
            });
        }
        let strips = (0..m)
            .step_by(strip_width)
            .enumerate()
            .map(|(index, first_col)| Strip {
                index,
                first_col,
                width: strip_width.min(m - first_col),
                side: if index % 2 == 0 { Side::A } else { Side::B },
            })
            .collect();
        Ok(Self {
            m,
            strip_width,
            constraint,
            strips,
        })
    }

    /// Grid with the (1,∞) kernel.
    pub fn hard_square(m: usize, strip_width: usize) -> Result<Self, GridError> {
        Self::new(m, strip_width, ConstraintKind::rll_1inf())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.m * self.m
    }

    pub fn strip_width(&self) -> usize {
        self.strip_width
    }

    pub fn constraint(&self) -> &ConstraintKind {
        &self.constraint
    }

    pub fn strips(&self) -> &[Strip] {
        &self.strips
    }

    pub fn strips_on(&self, side: Side) -> impl Iterator<Item = &Strip> + '_ {
        self.strips.iter().filter(move |s| s.side == side)
    }

    pub fn side_of_column(&self, col: usize) -> Side {
        self.strips[col / self.strip_width].side
    }

    /// Number of cells on one side.
    pub fn side_cells(&self, side: Side) -> usize {
        self.strips_on(side).map(|s| s.width * self.m).sum()
    }

    /// Bit mask of the columns belonging to `side`.
    pub fn side_mask(&self, side: Side) -> u64 {
        self.strips_on(side)
            .fold(0u64, |acc, s| acc | (width_mask(s.width) << s.first_col))
    }

    /// Collapses every row slice of every strip on `side` into one node,
    /// joins nodes that share an adjacent cell pair, and reports whether the
    /// result is a forest. This is what makes the conditional of one side
    /// given the other exactly samplable.
    pub fn collapsed_graph_is_forest(&self, side: Side) -> bool {
        let m = self.m;
        // node id of cell (r, c) when c is on `side`
        let node = |r: usize, c: usize| -> Option<usize> {
            let strip = &self.strips[c / self.strip_width];
            (strip.side == side).then_some(strip.index * m + r)
        };
        let mut parent: Vec<usize> = (0..self.strips.len() * m).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut edges = std::collections::BTreeSet::new();
        for r in 0..m {
            for c in 0..m {
                let Some(u) = node(r, c) else { continue };
                for (r2, c2) in [(r + 1, c), (r, c + 1)] {
                    if r2 >= m || c2 >= m {
                        continue;
                    }
                    if let Some(v) = node(r2, c2) {
                        if u != v {
                            edges.insert((u.min(v), u.max(v)));
                        }
                    }
                }
            }
        }
        for (u, v) in edges {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                return false;
            }
            parent[ru] = rv;
        }
        true
    }
}

#[inline]
pub(crate) fn width_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// One assignment of the grid, rows packed into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    m: usize,
    rows: Vec<u64>,
}

impl Configuration {
    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1 && m <= MAX_SIDE);
        Self {
            m,
            rows: vec![0; m],
        }
    }

    /// From `m * m` values in row-major order; any nonzero byte is a one.
    pub fn from_bits(m: usize, bits: &[u8]) -> Result<Self, GridError> {
        if m == 0 || m > MAX_SIDE {
            return Err(GridError::InvalidSide(m));
        }
        if bits.len() != m * m {
            return Err(GridError::BitCount {
                expected: m * m,
                got: bits.len(),
            });
        }
        let mut x = Self::zeros(m);
        for (i, &b) in bits.iter().enumerate() {
            x.set(i / m, i % m, b != 0);
        }
        Ok(x)
    }

    /// From packed row words; bits at or above column `m` are dropped.
    pub fn from_rows(m: usize, rows: Vec<u64>) -> Self {
        assert_eq!(rows.len(), m);
        let mask = width_mask(m);
        Self {
            m,
            rows: rows.into_iter().map(|r| r & mask).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.m * self.m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.rows[r] >> c) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        if v {
            self.rows[r] |= 1 << c;
        } else {
            self.rows[r] &= !(1 << c);
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> u64 {
        self.rows[r]
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    #[inline]
    pub fn slice(&self, r: usize, first_col: usize, width: usize) -> usize {
        ((self.rows[r] >> first_col) & width_mask(width)) as usize
    }

    #[inline]
    pub fn set_slice(&mut self, r: usize, first_col: usize, width: usize, value: usize) {
        let mask = width_mask(width) << first_col;
        self.rows[r] = (self.rows[r] & !mask) | (((value as u64) << first_col) & mask);
    }

    /// Row-major bit vector.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.n())
            .map(|i| self.get(i / self.m, i % self.m) as u8)
            .collect()
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Keeps only the columns of `side`, zeroing the rest.
    pub fn restricted_to(&self, grid: &GridSpec, side: Side) -> Configuration {
        let mask = grid.side_mask(side);
        Self {
            m: self.m,
            rows: self.rows.iter().map(|r| r & mask).collect(),
        }
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Configuration({}x{})", self.m, self.m)?;
        for r in 0..self.m {
            let line: String = (0..self.m)
                .map(|c| if self.get(r, c) { '1' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

/// Values for a subset of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialConfiguration {
    values: Configuration,
    known: Vec<u64>,
}

impl PartialConfiguration {
    pub fn unknown(m: usize) -> Self {
        Self {
            values: Configuration::zeros(m),
            known: vec![0; m],
        }
    }

    pub fn assign(&mut self, r: usize, c: usize, v: bool) {
        self.values.set(r, c, v);
        self.known[r] |= 1 << c;
    }

    /// Assigns every cell of `side` from `x`.
    pub fn from_side(grid: &GridSpec, x: &Configuration, side: Side) -> Self {
        let mask = grid.side_mask(side);
        Self {
            values: x.restricted_to(grid, side),
            known: vec![mask; grid.m()],
        }
    }

    pub fn is_known(&self, r: usize, c: usize) -> bool {
        (self.known[r] >> c) & 1 == 1
    }

    pub fn values(&self) -> &Configuration {
        &self.values
    }
}

/// Log-domain count of a support set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCount {
    ln: f64,
}

impl SupportCount {
    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan());
        Self { ln }
    }

    pub fn from_count(count: f64) -> Self {
        Self::from_ln(ln_nonneg(count))
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn log2(&self) -> f64 {
        crate::logspace::to_log2(self.ln)
    }

    /// The count as an `f64`; only meaningful when it fits.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

/// Tables shared by every strip of one width.
#[derive(Debug, Clone)]
struct WidthTables {
    /// vertical compatibility between consecutive row slices
    pair: Arc<PairTable>,
    /// horizontal factors inside one row slice
    intra: Vec<f64>,
    /// `left[v][s]`: factor between a left neighbour with value `v` and slice `s`
    left: [Vec<f64>; 2],
    /// `right[v][s]`: factor between slice `s` and a right neighbour with value `v`
    right: [Vec<f64>; 2],
}

impl WidthTables {
    fn new(width: usize, k: &[[f64; 2]; 2]) -> Self {
        let q = 1usize << width;
        let bit = |s: usize, i: usize| (s >> i) & 1;
        let mut pair = Vec::with_capacity(q * q);
        for a in 0..q {
            for b in 0..q {
                pair.push((0..width).map(|i| k[bit(a, i)][bit(b, i)]).product());
            }
        }
        let intra = (0..q)
            .map(|s| (1..width).map(|i| k[bit(s, i - 1)][bit(s, i)]).product())
            .collect();
        let left = [0, 1].map(|v| (0..q).map(|s| k[v][bit(s, 0)]).collect());
        let right = [0, 1].map(|v| (0..q).map(|s| k[bit(s, width - 1)][v]).collect());
        Self {
            pair: Arc::new(PairTable::from_linear(q, q, pair).expect("kernel validated")),
            intra,
            left,
            right,
        }
    }
}

#[derive(Debug, Clone)]
struct CellWeights {
    log: Vec<[f64; 2]>,
    /// `exp(log - scale)`, so the larger entry is 1
    lin: Vec<[f64; 2]>,
    scale: Vec<f64>,
}

/// A nonnegative function on the grid of the form
///
/// ```text
/// F(x) = prod_{adjacent (k, l)} kappa(x_k, x_l)^alpha * prod_n w_n(x_n)
/// ```
///
/// with optional per-cell weights. Plain `f` is `alpha = 1` with no cell
/// weights. `0^0` is taken as 1, so `alpha = 0` makes the kernel part
/// uniform.
#[derive(Debug, Clone)]
pub struct FactorModel {
    grid: GridSpec,
    kernel_exponent: f64,
    kernel_lin: [[f64; 2]; 2],
    kernel_log: [[f64; 2]; 2],
    cells: Option<CellWeights>,
    widths: Vec<Option<WidthTables>>,
}

impl FactorModel {
    pub fn plain(grid: &GridSpec) -> Self {
        Self::new(grid, 1.0, None).expect("plain model is always valid")
    }

    /// `kernel_exponent` must be in `[0, 1]`; `cell_log_weights`, if given,
    /// holds `ln w_n(0), ln w_n(1)` per cell in row-major order.
    pub fn new(
        grid: &GridSpec,
        kernel_exponent: f64,
        cell_log_weights: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GridError> {
        assert!(
            (0.0..=1.0).contains(&kernel_exponent),
            "kernel exponent {kernel_exponent} outside [0, 1]"
        );
        let kernel_lin = grid.constraint().powf(kernel_exponent);
        let kernel_log = kernel_lin.map(|row| row.map(ln_nonneg));
        let cells = match cell_log_weights {
            None => None,
            Some(log) => {
                if log.len() != grid.n() {
                    return Err(GridError::CellCount {
                        expected: grid.n(),
                        got: log.len(),
                    });
                }
                if let Some(i) = log.iter().position(|w| !(w[0].is_finite() && w[1].is_finite())) {
                    return Err(GridError::InvalidCellWeight(i));
                }
                let scale: Vec<f64> = log.iter().map(|w| w[0].max(w[1])).collect();
                let lin = log
                    .iter()
                    .zip(&scale)
                    .map(|(w, s)| [(w[0] - s).exp(), (w[1] - s).exp()])
                    .collect();
                Some(CellWeights { log, lin, scale })
            }
        };
        let mut widths = vec![None; grid.strip_width() + 1];
        for s in grid.strips() {
            if widths[s.width].is_none() {
                widths[s.width] = Some(WidthTables::new(s.width, &kernel_lin));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            kernel_exponent,
            kernel_lin,
            kernel_log,
            cells,
            widths,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kernel_exponent(&self) -> f64 {
        self.kernel_exponent
    }

    pub fn has_cell_weights(&self) -> bool {
        self.cells.is_some()
    }

    /// `ln kappa(a, b)^alpha`.
    #[inline]
    pub fn log_kernel(&self, a: bool, b: bool) -> f64 {
        self.kernel_log[a as usize][b as usize]
    }

    #[inline]
    pub fn log_cell(&self, n: usize, v: bool) -> f64 {
        self.cells.as_ref().map_or(0.0, |c| c.log[n][v as usize])
    }

    fn check_dims(&self, x: &Configuration) -> Result<(), GridError> {
        if x.m() != self.grid.m() {
            return Err(GridError::DimensionMismatch {
                expected: self.grid.m(),
                got: x.m(),
            });
        }
        Ok(())
    }

    /// `ln F(x)` by a direct scan over all adjacent pairs and cells.
    pub fn log_value(&self, x: &Configuration) -> Result<f64, GridError> {
        self.check_dims(x)?;
        let m = self.grid.m();
        let mut acc = 0.0;
        for r in 0..m {
            for c in 0..m {
                let v = x.get(r, c);
                if c + 1 < m {
                    acc += self.log_kernel(v, x.get(r, c + 1));
                }
                if r + 1 < m {
                    acc += self.log_kernel(v, x.get(r + 1, c));
                }
                acc += self.log_cell(r * m + c, v);
                if acc == f64::NEG_INFINITY {
                    return Ok(acc);
                }
            }
        }
        Ok(acc)
    }

    /// `ln` of the factors that involve only cells of `side`: horizontal and
    /// vertical kernels inside each strip and the cell weights.
    pub fn log_internal(&self, x: &Configuration, side: Side) -> f64 {
        let m = self.grid.m();
        let mut acc = 0.0;
        for strip in self.grid.strips_on(side) {
            for r in 0..m {
                for c in strip.columns() {
                    let v = x.get(r, c);
                    if c + 1 < strip.first_col + strip.width {
                        acc += self.log_kernel(v, x.get(r, c + 1));
                    }
                    if r + 1 < m {
                        acc += self.log_kernel(v, x.get(r + 1, c));
                    }
                    acc += self.log_cell(r * m + c, v);
                }
            }
        }
        acc
    }

    /// The chain over the row slices of `strip`, with every cell outside the
    /// strip taken from `x`. Symbol `s` at position `r` sets column
    /// `strip.first_col + i` to bit `i` of `s`. The chain's total mass is
    /// `sum over strip assignments of F`, restricted to the factors touching
    /// the strip.
    pub fn strip_chain(&self, x: &Configuration, strip: &Strip) -> ChainModel {
        let m = self.grid.m();
        let w = strip.width;
        let q = 1usize << w;
        let tables = self.widths[w].as_ref().expect("tables for every strip width");
        let mut chain = ChainModel::with_capacity(m, m * q);
        let mut buf = vec![0.0; q];
        let has_left = strip.first_col > 0;
        let has_right = strip.first_col + w < m;
        for r in 0..m {
            buf.copy_from_slice(&tables.intra);
            if has_left {
                let v = x.get(r, strip.first_col - 1) as usize;
                buf.iter_mut()
                    .zip(&tables.left[v])
                    .for_each(|(b, k)| *b *= k);
            }
            if has_right {
                let v = x.get(r, strip.first_col + w) as usize;
                buf.iter_mut()
                    .zip(&tables.right[v])
                    .for_each(|(b, k)| *b *= k);
            }
            let mut scale = 0.0;
            if let Some(cells) = &self.cells {
                let base = r * m + strip.first_col;
                for i in 0..w {
                    let [w0, w1] = cells.lin[base + i];
                    scale += cells.scale[base + i];
                    for (s, b) in buf.iter_mut().enumerate() {
                        *b *= if (s >> i) & 1 == 1 { w1 } else { w0 };
                    }
                }
            }
            let pair = (r > 0).then(|| Arc::clone(&tables.pair));
            chain.push_scaled(&buf, scale, pair);
        }
        chain
    }

    /// `ln |{x_side : F(x_side, 0) > 0}|`, a product of strip chain counts
    /// because strips on one side decouple once the other side is all zero.
    /// This equals the support size of the side marginal whenever no kernel
    /// entry involving a 0 vanishes.
    pub fn log_support_count(&self, side: Side) -> Result<SupportCount, GridError> {
        let k = self.kernel_lin;
        if k[0][0] == 0.0 || k[0][1] == 0.0 || k[1][0] == 0.0 {
            return Err(GridError::SupportNotZeroDetermined);
        }
        Ok(self.zeroed_support(side))
    }

    fn zeroed_support(&self, side: Side) -> SupportCount {
        let indicator = self.kernel_lin.map(|row| row.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
        let zeros = Configuration::zeros(self.grid.m());
        let mut ln = 0.0;
        for strip in self.grid.strips_on(side) {
            let tables = WidthTables::new(strip.width, &indicator);
            let support_model = FactorModel {
                grid: self.grid.clone(),
                kernel_exponent: 1.0,
                kernel_lin: indicator,
                kernel_log: indicator.map(|row| row.map(ln_nonneg)),
                cells: None,
                widths: {
                    let mut v = vec![None; strip.width + 1];
                    v[strip.width] = Some(tables);
                    v
                },
            };
            ln += support_model.strip_chain(&zeros, strip).log_partition();
        }
        SupportCount::from_ln(ln)
    }
}

/// `ln f(x)` for the grid's kernel: the product over all horizontally and
/// vertically adjacent pairs. For the (1,∞) kernel this is `0` or `-inf`.
pub fn evaluate_f(grid: &GridSpec, x: &Configuration) -> Result<f64, GridError> {
    if x.m() != grid.m() {
        return Err(GridError::DimensionMismatch {
            expected: grid.m(),
            got: x.m(),
        });
    }
    let m = grid.m();
    let k = grid.constraint();
    let mut acc = 0.0;
    for r in 0..m {
        for c in 0..m {
            let v = x.get(r, c);
            if c + 1 < m {
                acc += ln_nonneg(k.value(v, x.get(r, c + 1)));
            }
            if r + 1 < m {
                acc += ln_nonneg(k.value(v, x.get(r + 1, c)));
            }
        }
    }
    Ok(acc)
}

/// The chain of `strip` under plain `f` given the fixed cells next to it.
pub fn restrict_to_strip(
    grid: &GridSpec,
    fixed: &PartialConfiguration,
    strip_index: usize,
) -> Result<ChainModel, GridError> {
    let strip = *grid
        .strips()
        .get(strip_index)
        .ok_or(GridError::NoSuchStrip(strip_index))?;
    if fixed.values().m() != grid.m() {
        return Err(GridError::DimensionMismatch {
            expected: grid.m(),
            got: fixed.values().m(),
        });
    }
    let mut neighbours = Vec::new();
    if strip.first_col > 0 {
        neighbours.push(strip.first_col - 1);
    }
    if strip.first_col + strip.width < grid.m() {
        neighbours.push(strip.first_col + strip.width);
    }
    for &col in &neighbours {
        for row in 0..grid.m() {
            if !fixed.is_known(row, col) {
                return Err(GridError::MissingNeighbor { row, col });
            }
        }
    }
    Ok(FactorModel::plain(grid).strip_chain(fixed.values(), &strip))
}

/// `|S_{f_side}| = sum_{x_side} 1[f(x_side, 0) > 0]`, computed per strip.
pub fn count_support_zeroed(grid: &GridSpec, side: Side) -> SupportCount {
    FactorModel::plain(grid).zeroed_support(side)
}
