use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::geometry::{eval_grid, AnchorArray, Environment, EvalGrid, Position};
use crate::measurement::MeasurementSet;
use crate::solver::{levenberg_marquardt, SolverOptions};

use super::{Likelihood, LikelihoodSpec};

/// Exhaustive search: the lattice point with the lowest score, ties going to
/// the lowest row-major index.
pub fn grid_search_locate(
    meas: &MeasurementSet,
    array: &AnchorArray,
    env: &Environment,
    resolution: f64,
    spec: &LikelihoodSpec,
) -> Result<Position> {
    let grid = eval_grid(env, resolution)?;
    let lik = Likelihood::new(meas, array, spec)?;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..grid.len() {
        let s = lik.eval(&grid.point(k));
        if s < best.0 {
            best = (s, k);
        }
    }
    Ok(grid.point(best.1))
}

/// Score at every lattice point, row-major.
pub fn likelihood_surface(lik: &Likelihood, grid: &EvalGrid) -> Vec<f64> {
    grid.points().map(|p| lik.eval(&p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Side of the initial cells, meters.
    pub initial_cell: f64,
    /// Stop splitting once every residual varies by less than this many
    /// sigmas across a cell.
    pub leaf_sigmas: f64,
    /// Hard floor on cell half-width, meters.
    pub min_half_width: f64,
    /// Leaves polished by least squares.
    pub polish_count: usize,
    /// Safety cap on processed cells.
    pub max_cells: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { initial_cell: 0.1, leaf_sigmas: 1.0, min_half_width: 2.5e-4, polish_count: 3, max_cells: 400_000 }
    }
}

struct Cell {
    lower: f64,
    seq: u64,
    center: Position,
    hx: f64,
    hy: f64,
    score: f64,
    leaf: bool,
    split_x: bool,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    // Reversed so the max-heap pops the lowest bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower.total_cmp(&self.lower).then(other.seq.cmp(&self.seq))
    }
}

/// Global minimiser of the score over the room.
///
/// Best-first branch and bound over axis-aligned cells: each cell carries a
/// lower bound on the score inside it, cells whose bound exceeds the best
/// score seen are discarded, and the rest are halved until the score is
/// nearly flat across them. The lowest surviving cells are then polished by
/// Levenberg–Marquardt on the whitened residuals.
pub fn locate_refined(lik: &Likelihood, env: &Environment, opts: &RefineOptions) -> Position {
    let nx = (env.width / opts.initial_cell).ceil().max(1.0) as usize;
    let ny = (env.height / opts.initial_cell).ceil().max(1.0) as usize;
    let (hx0, hy0) = (env.width / nx as f64 / 2.0, env.height / ny as f64 / 2.0);

    let mut seq = 0u64;
    let mut best = (f64::INFINITY, env.center());
    let mut make = |center: Position, hx: f64, hy: f64, best: &mut (f64, Position)| -> Cell {
        let b = lik.cell_bounds(center, hx, hy);
        if b.center_score < best.0 {
            *best = (b.center_score, center);
        }
        seq += 1;
        let leaf = b.spread_in_sigmas <= opts.leaf_sigmas || hx.max(hy) <= opts.min_half_width;
        Cell { lower: b.lower_bound, seq, center, hx, hy, score: b.center_score, leaf, split_x: b.split_x }
    };

    let mut heap = BinaryHeap::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = Position::new((2 * ix + 1) as f64 * hx0, (2 * iy + 1) as f64 * hy0);
            heap.push(make(c, hx0, hy0, &mut best));
        }
    }

    let mut leaves: Vec<(f64, u64, Position)> = Vec::new();
    let mut processed = 0usize;
    while let Some(cell) = heap.pop() {
        if cell.lower > best.0 {
            break;
        }
        processed += 1;
        if processed > opts.max_cells {
            log::debug!("refined locate hit the cell cap; using the best centre so far");
            break;
        }
        if cell.leaf {
            leaves.push((cell.score, cell.seq, cell.center));
            continue;
        }
        // Halve along the axis that dominates the bound, so cells stretch
        // along the likelihood ridges instead of tiling them with squares.
        let (hx, hy, step) = if cell.split_x {
            (cell.hx / 2.0, cell.hy, Position::new(cell.hx / 2.0, 0.0))
        } else {
            (cell.hx, cell.hy / 2.0, Position::new(0.0, cell.hy / 2.0))
        };
        heap.push(make(cell.center - step, hx, hy, &mut best));
        heap.push(make(cell.center + step, hx, hy, &mut best));
    }

    leaves.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut starts: Vec<Position> = vec![best.1];
    for &(_, _, c) in &leaves {
        if starts.len() >= opts.polish_count.max(1) {
            break;
        }
        if starts.iter().all(|s| s.distance(&c) > 1e-3) {
            starts.push(c);
        }
    }

    let solver = SolverOptions { max_iterations: 50, step_tolerance: 1e-8, ..SolverOptions::default() };
    let residuals = |p: Position, r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| lik.residuals(p, r, j);
    let mut answer = best;
    for s in starts {
        let sol = levenberg_marquardt(&residuals, s, &solver);
        let p = env.clamp(sol.position);
        let score = lik.eval(&p);
        if score < answer.0 {
            answer = (score, p);
        }
    }
    answer.1
}
