//! Two-dimensional Levenberg–Marquardt with an optional multi-start fallback.
//!
//! Problems are supplied as a closure that fills a residual vector and its
//! Jacobian rows (`∂r_k/∂x`, `∂r_k/∂y`) for a candidate position.

use crate::geometry::{eval_grid, Environment, Position};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub initial_damping: f64,
    pub max_iterations: usize,
    /// Converged once an accepted step is shorter than this, meters.
    pub step_tolerance: f64,
    /// Spacing of the fallback seed lattice, meters.
    pub seed_spacing: f64,
    pub seed_count: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            max_iterations: 100,
            step_tolerance: 1e-7,
            seed_spacing: 0.25,
            seed_count: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub position: Position,
    /// Sum of squared residuals at `position`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True when no start converged inside the environment; `position` is
    /// then the best unconstrained result.
    pub flagged: bool,
}

/// Residual callback: fill `r` and `jac` (cleared by the solver) for `p`.
pub trait Residuals {
    fn eval(&self, p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>);

    fn cost(&self, p: Position) -> f64 {
        let (mut r, mut j) = (Vec::new(), Vec::new());
        self.eval(p, &mut r, &mut j);
        r.iter().map(|v| v * v).sum()
    }
}

impl<F> Residuals for F
where
    F: Fn(Position, &mut Vec<f64>, &mut Vec<[f64; 2]>),
{
    fn eval(&self, p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>) {
        self(p, r, jac)
    }
}

/// Damped Gauss–Newton from `start`, damping `×10` on rejection and `÷10`
/// on acceptance.
pub fn levenberg_marquardt<R: Residuals + ?Sized>(problem: &R, start: Position, opts: &SolverOptions) -> Solution {
    let (mut r, mut jac) = (Vec::new(), Vec::new());
    let mut p = start;
    let eval = |p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>| -> f64 {
        r.clear();
        jac.clear();
        problem.eval(p, r, jac);
        r.iter().map(|v| v * v).sum()
    };
    let mut cost = eval(p, &mut r, &mut jac);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    if !cost.is_finite() {
        return Solution { position: p, cost, iterations, converged, flagged: false };
    }
    while iterations < opts.max_iterations {
        iterations += 1;
        let (mut a, mut b, mut c, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (rk, jk) in r.iter().zip(&jac) {
            a += jk[0] * jk[0];
            b += jk[0] * jk[1];
            c += jk[1] * jk[1];
            gx += jk[0] * rk;
            gy += jk[1] * rk;
        }
        if cost == 0.0 || (gx == 0.0 && gy == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            // Marquardt scaling keeps the step invariant to residual units.
            let (da, dc) = (a * (1.0 + lambda) + 1e-300, c * (1.0 + lambda) + 1e-300);
            let det = da * dc - b * b;
            if !(det.is_finite() && det > 0.0) {
                lambda = raise(lambda);
                continue;
            }
            let dx = -(dc * gx - b * gy) / det;
            let dy = -(da * gy - b * gx) / det;
            let cand = Position::new(p.x + dx, p.y + dy);
            let (mut r2, mut j2) = (Vec::with_capacity(r.len()), Vec::with_capacity(jac.len()));
            let c2 = eval(cand, &mut r2, &mut j2);
            if c2.is_finite() && c2 <= cost {
                let step = dx.hypot(dy);
                p = cand;
                cost = c2;
                r = r2;
                jac = j2;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step < opts.step_tolerance {
                    converged = true;
                }
                break;
            }
            lambda = raise(lambda);
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Solution { position: p, cost, iterations, converged, flagged: false }
}

fn raise(lambda: f64) -> f64 {
    if lambda > 0.0 {
        lambda * 10.0
    } else {
        1e-3
    }
}

/// Solve from the environment centre; if that start fails to converge or
/// leaves the room, restart from the best seeds of a coarse lattice and keep
/// the lowest-cost converged in-room answer.
pub fn solve_in_environment<R: Residuals + ?Sized>(problem: &R, env: &Environment, opts: &SolverOptions) -> Solution {
    let first = levenberg_marquardt(problem, env.center(), opts);
    if first.converged && env.contains(&first.position) {
        return first;
    }
    let grid = match eval_grid(env, opts.seed_spacing.min(env.width.min(env.height))) {
        Ok(g) => g,
        Err(_) => return Solution { flagged: true, ..first },
    };
    let mut seeds: Vec<(f64, usize)> = grid
        .points()
        .enumerate()
        .map(|(k, p)| (problem.cost(p), k))
        .filter(|(c, _)| c.is_finite())
        .collect();
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    seeds.truncate(opts.seed_count);

    let mut best_in: Option<Solution> = None;
    let mut best_any = first;
    for (_, k) in seeds {
        let s = levenberg_marquardt(problem, grid.point(k), opts);
        if s.cost < best_any.cost {
            best_any = s;
        }
        if s.converged && env.contains(&s.position) && best_in.map_or(true, |b| s.cost < b.cost) {
            best_in = Some(s);
        }
    }
    match best_in {
        Some(s) => s,
        None => Solution { flagged: true, ..best_any },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranges_problem(anchors: Vec<Position>, truth: Position) -> impl Fn(Position, &mut Vec<f64>, &mut Vec<[f64; 2]>) {
        let ranges: Vec<f64> = anchors.iter().map(|a| a.distance(&truth)).collect();
        move |p: Position, r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| {
            for (a, &rho) in anchors.iter().zip(&ranges) {
                let d = p.distance(a).max(1e-12);
                r.push(d - rho);
                j.push([(p.x - a.x) / d, (p.y - a.y) / d]);
            }
        }
    }

    #[test]
    fn exact_ranges_converge_to_truth() {
        let anchors = vec![Position::new(0.0, 0.0), Position::new(3.0, 0.0), Position::new(0.0, 3.0)];
        let truth = Position::new(1.1, 2.2);
        let prob = ranges_problem(anchors, truth);
        let s = solve_in_environment(&prob, &Environment::default(), &SolverOptions::default());
        assert!(s.converged && !s.flagged);
        assert!(s.position.distance(&truth) < 1e-9);
    }

    #[test]
    fn collinear_anchors_pick_in_room_mirror() {
        let anchors: Vec<Position> = (0..6).map(|k| Position::new(1.0 + 0.2 * k as f64, 0.0)).collect();
        let truth = Position::new(0.7, 1.3);
        let prob = ranges_problem(anchors, truth);
        let s = solve_in_environment(&prob, &Environment::default(), &SolverOptions::default());
        assert!(s.position.distance(&truth) < 1e-6, "{s:?}");
    }

    #[test]
    fn deterministic() {
        let anchors = vec![Position::new(0.0, 0.0), Position::new(3.0, 0.0), Position::new(0.0, 3.0)];
        let prob = ranges_problem(anchors, Position::new(2.0, 0.4));
        let a = solve_in_environment(&prob, &Environment::default(), &SolverOptions::default());
        let b = solve_in_environment(&prob, &Environment::default(), &SolverOptions::default());
        assert_eq!(a, b);
    }
}
