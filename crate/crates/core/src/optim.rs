//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Used by both the completion solver and the coherence minimizer. The
//! search direction comes from the usual two-loop recursion with the
//! `s.y / y.y` initial Hessian scaling; pairs with non-positive curvature
//! are skipped.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    /// Stored correction pairs.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 15_000,
            grad_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after each accepted step, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

impl LbfgsResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Minimizes `objective`, which returns `f(x)` and writes the gradient into
/// its second argument.
pub fn minimize<F>(mut objective: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut f = objective(&x, &mut g);
    let mut trace = vec![f];
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsResult {
            grad_norm: f64::NAN,
            x,
            f,
            iterations: 0,
            termination: Termination::NonFinite,
            trace,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < cfg.max_iter {
        let gnorm = norm(&g);
        if gnorm < cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut dir = two_loop(&g, &history);
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = line_search(&mut objective, &x, f, slope, &dir, alpha0, cfg);
        if accepted.is_none() && !history.is_empty() {
            // retry from steepest descent with a fresh memory
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
            accepted = line_search(
                &mut objective,
                &x,
                f,
                slope,
                &dir,
                (1.0 / gnorm).min(1.0),
                cfg,
            );
        }
        let Some(p) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = p.x;
        g = p.g;
        f = p.f;
        trace.push(f);
        iterations += 1;
        let _ = p.alpha;
    }
    if termination == Termination::MaxIterations && norm(&g) < cfg.grad_tol {
        termination = Termination::GradientTolerance;
    }
    LbfgsResult {
        grad_norm: norm(&g),
        x,
        f,
        iterations,
        termination,
        trace,
    }
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn line_search<F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    dir: &[f64],
    alpha_init: f64,
    cfg: &LbfgsConfig,
) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut eval = |alpha: f64| -> Point {
        let xn: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
        let mut gn = vec![0.0; x.len()];
        let mut fv = objective(&xn, &mut gn);
        if gn.iter().any(|v| !v.is_finite()) {
            fv = f64::NAN;
        }
        let slope = dot(&gn, dir);
        Point {
            alpha,
            f: fv,
            slope,
            x: xn,
            g: gn,
        }
    };
    let armijo = |p: &Point| p.f.is_finite() && p.f <= f0 + cfg.c1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -cfg.c2 * slope0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: x.to_vec(),
        g: Vec::new(),
    };
    let mut alpha = alpha_init;
    for i in 0..cfg.max_line_search {
        let p = eval(alpha);
        if !armijo(&p) || (i > 0 && p.f >= prev.f) {
            return zoom(&mut eval, prev, p, f0, slope0, cfg);
        }
        if curvature(&p) {
            return Some(p);
        }
        if p.slope >= 0.0 {
            return zoom(&mut eval, p, prev, f0, slope0, cfg);
        }
        alpha *= 2.0;
        prev = p;
    }
    (prev.alpha > 0.0).then_some(prev)
}

fn zoom<E>(
    eval: &mut E,
    mut lo: Point,
    mut hi: Point,
    f0: f64,
    slope0: f64,
    cfg: &LbfgsConfig,
) -> Option<Point>
where
    E: FnMut(f64) -> Point,
{
    for _ in 0..cfg.max_line_search {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= 1e-16 * b.max(1e-300) {
            break;
        }
        let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (lo.alpha + hi.alpha));
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (lo.alpha + hi.alpha);
        }
        let p = eval(alpha);
        let sufficient = p.f.is_finite() && p.f <= f0 + cfg.c1 * alpha * slope0;
        if !sufficient || p.f >= lo.f {
            hi = p;
        } else {
            if p.slope.abs() <= -cfg.c2 * slope0 {
                return Some(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    // lo always satisfies sufficient decrease once it has moved off zero
    (lo.alpha > 0.0 && lo.f < f0).then_some(lo)
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(p: &Point, q: &Point) -> Option<f64> {
    if !(p.f.is_finite() && q.f.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let alpha = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    alpha.is_finite().then_some(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let n = x.len();
        let mut f = 0.0;
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        f
    }

    #[test]
    fn solves_rosenbrock() {
        let res = minimize(
            rosenbrock,
            vec![-1.2, 1.0, -1.2, 1.0],
            &LbfgsConfig::default(),
        );
        assert!(res.converged(), "{:?}", res.termination);
        assert!(res.x.iter().all(|v| (v - 1.0).abs() < 1e-6));
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_converges_quickly() {
        let diag = [1.0, 10.0, 100.0, 1000.0];
        let res = minimize(
            |x, g| {
                let mut f = 0.0;
                for i in 0..4 {
                    f += 0.5 * diag[i] * x[i] * x[i];
                    g[i] = diag[i] * x[i];
                }
                f
            },
            vec![1.0; 4],
            &LbfgsConfig::default(),
        );
        assert!(res.converged());
        assert!(res.iterations < 30);
        assert!(res.f < 1e-15);
    }

    #[test]
    fn non_finite_start() {
        let res = minimize(|_, _| f64::NAN, vec![0.0], &LbfgsConfig::default());
        assert_eq!(res.termination, Termination::NonFinite);
    }

    #[test]
    fn iteration_cap() {
        let cfg = LbfgsConfig {
            max_iter: 3,
            ..Default::default()
        };
        let res = minimize(rosenbrock, vec![-1.2, 1.0], &cfg);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.termination, Termination::MaxIterations);
    }
}
