//! Likelihood surfaces around one tag, and the distinct minima that remain
//! plausible on each.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use uwbloc_core::estimator::{likelihood_surface, Likelihood, Modality};
use uwbloc_core::geometry::{eval_grid, Environment, EvalGrid, Position};
use uwbloc_core::measurement::sample_measurements;
use uwbloc_core::solver::{levenberg_marquardt, SolverOptions};

use crate::error::Result;
use crate::scenario::{Layout, Scenario};
use crate::table::ResultTable;
use crate::trial::trial_rng;

pub const SURFACE_COLUMNS: [&str; 8] = ["n_antennas", "aperture_m", "spacing_m", "x", "y", "pdoa_nll", "tdoa_nll", "fused_nll"];
pub const MINIMA_COLUMNS: [&str; 7] = ["n_antennas", "aperture_m", "modality", "x", "y", "nll", "threshold"];

/// Minima closer than this are the same lobe.
pub const MERGE_RADIUS_M: f64 = 0.10;
pub const THRESHOLD_PROBABILITY: f64 = 0.999;

const MODALITIES: [(Modality, &str); 3] =
    [(Modality::PdoaOnly, "pdoa_only"), (Modality::TdoaOnly, "tdoa_only"), (Modality::Fused, "fused")];

#[derive(Debug, Clone)]
pub struct AmbiguityMaps {
    pub surfaces: ResultTable,
    pub minima: ResultTable,
}

/// Score a location may reach and still be consistent with the packet: the
/// `THRESHOLD_PROBABILITY` quantile of χ² with one degree of freedom per
/// residual.
pub fn threshold(lik: &Likelihood) -> f64 {
    ChiSquared::new(lik.dim() as f64).map(|c| c.inverse_cdf(THRESHOLD_PROBABILITY)).unwrap_or(f64::INFINITY)
}

/// Distinct sub-threshold minima of `lik`, best first.
///
/// Every lattice point no higher than its eight neighbours seeds a
/// least-squares polish; polished points under the threshold are kept unless
/// a better one lies within `merge_radius`.
pub fn sub_threshold_minima(lik: &Likelihood, env: &Environment, grid: &EvalGrid, merge_radius: f64) -> Vec<(Position, f64)> {
    let surface = likelihood_surface(lik, grid);
    let limit = threshold(lik);
    let opts = SolverOptions { max_iterations: 50, step_tolerance: 1e-9, ..SolverOptions::default() };
    let residuals = |p: Position, r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| lik.residuals(p, r, j);

    let mut found: Vec<(Position, f64)> = Vec::new();
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let v = surface[grid.index_of(ix, iy)];
            let mut is_min = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= grid.nx as i64 || jy >= grid.ny as i64 {
                        continue;
                    }
                    let w = surface[grid.index_of(jx as usize, jy as usize)];
                    // Plateaus keep only their first point in row-major order.
                    let earlier = (dy, dx) < (0, 0);
                    if w < v || (earlier && w == v) {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                let p = env.clamp(levenberg_marquardt(&residuals, grid.point_at(ix, iy), &opts).position);
                let s = lik.eval(&p);
                if s <= limit {
                    found.push((p, s));
                }
            }
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut kept: Vec<(Position, f64)> = Vec::new();
    for (p, s) in found {
        if kept.iter().all(|(q, _)| q.distance(&p) > merge_radius) {
            kept.push((p, s));
        }
    }
    kept
}

/// One packet from a tag at `tag`, scored on the lattice for every
/// `(aperture, N)` linear array.
pub fn run_ambiguity_maps(base: &Scenario, tag: Position, apertures: &[f64], n_list: &[usize]) -> Result<AmbiguityMaps> {
    let env = base.environment;
    let grid = eval_grid(&env, base.grid_res)?;
    let digest = base.digest();
    let mut surfaces = ResultTable::new(&SURFACE_COLUMNS, base.seed, &digest);
    let mut minima = ResultTable::new(&MINIMA_COLUMNS, base.seed, &digest);
    surfaces.set_meta("tag", format!("{:.9e} {:.9e}", tag.x, tag.y));
    minima.set_meta("tag", format!("{:.9e} {:.9e}", tag.x, tag.y));

    let mut cell = 0u64;
    for &aperture in apertures {
        for &n in n_list {
            let s = Scenario { layout: Layout::Ula { count: n, aperture }, ..base.clone() };
            let array = s.array()?;
            let spacing = if n > 1 { aperture / (n - 1) as f64 } else { 0.0 };
            let m = sample_measurements(&tag, &array, &s.plan(), &s.noise, &mut trial_rng(base.seed, cell, 0))?;
            cell += 1;

            let liks = MODALITIES
                .iter()
                .map(|(modality, _)| Likelihood::new(&m, &array, &s.likelihood_spec().with_modality(*modality)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let maps: Vec<Vec<f64>> = liks.iter().map(|l| likelihood_surface(l, &grid)).collect();
            for (k, p) in grid.points().enumerate() {
                surfaces.push(vec![
                    n.into(),
                    aperture.into(),
                    spacing.into(),
                    p.x.into(),
                    p.y.into(),
                    maps[0][k].into(),
                    maps[1][k].into(),
                    maps[2][k].into(),
                ]);
            }
            for (lik, (_, name)) in liks.iter().zip(MODALITIES) {
                let limit = threshold(lik);
                for (p, nll) in sub_threshold_minima(lik, &env, &grid, MERGE_RADIUS_M) {
                    minima.push(vec![n.into(), aperture.into(), name.into(), p.x.into(), p.y.into(), nll.into(), limit.into()]);
                }
            }
        }
    }
    Ok(AmbiguityMaps { surfaces, minima })
}
