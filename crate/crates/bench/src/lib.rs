//! Shared fixtures for the criterion benches.

use rll2d::{ChainModel, Configuration, FactorModel, GridSpec, TargetSpec};

/// Hard-square grid and its indicator target.
pub fn hard_square(m: usize, w: usize) -> (GridSpec, TargetSpec) {
    let grid = GridSpec::hard_square(m, w).expect("valid grid");
    let target = TargetSpec::indicator(&grid);
    (grid, target)
}

/// The chain of the first strip with every other cell at zero.
pub fn first_strip_chain(grid: &GridSpec) -> ChainModel {
    FactorModel::plain(grid).strip_chain(&Configuration::zeros(grid.m()), &grid.strips()[0])
}
