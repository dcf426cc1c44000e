//! Orthant-wise limited-memory quasi-Newton (OWL-QN) for
//! `loss(x) + l1 * |x|_1` with a smooth `loss`.
//!
//! Steps use backtracking on the Armijo condition along the projected
//! direction, so the reported objective never increases.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwlqnOptions {
    pub l1: f64,
    /// Number of correction pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `|f_prev - f| / max(|f_prev|, 1)` falls below this.
    pub tolerance: f64,
    pub max_backtracks: usize,
}

impl Default for OwlqnOptions {
    fn default() -> Self {
        OwlqnOptions {
            l1: 0.0,
            memory: 10,
            max_iterations: 300,
            tolerance: 1e-6,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// The pseudo-gradient vanished: `x` is optimal.
    Stationary,
    MaxIterations,
    /// No step along the search direction decreased the objective.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct OwlqnResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: Status,
    /// Objective at the start and after every iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pseudo_gradient(x: &[f64], g: &[f64], l1: f64, out: &mut [f64]) {
    for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(g) {
        *o = if xi > 0.0 {
            gi + l1
        } else if xi < 0.0 {
            gi - l1
        } else if gi + l1 < 0.0 {
            gi + l1
        } else if gi - l1 > 0.0 {
            gi - l1
        } else {
            0.0
        };
    }
}

fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Minimizes `f(x) + l1 * |x|_1` where `f` writes its gradient into the
/// second argument and returns its value.
pub fn minimize(mut f: impl FnMut(&[f64], &mut [f64]) -> f64, x0: Vec<f64>, opts: &OwlqnOptions) -> OwlqnResult {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut obj = f(&x, &mut g) + opts.l1 * l1_norm(&x);
    let mut history = vec![obj];
    let mut pg = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut alpha_buf = vec![0.0; opts.memory];

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        pseudo_gradient(&x, &g, opts.l1, &mut pg);
        if pg.iter().all(|&v| v == 0.0) {
            status = Status::Stationary;
            break;
        }

        // Two-loop recursion on -pg.
        for (d, p) in dir.iter_mut().zip(&pg) {
            *d = -p;
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (alpha_buf[k] - b) * si;
            }
        }
        // Keep only components that agree in sign with -pg.
        for (d, p) in dir.iter_mut().zip(&pg) {
            if *d * -p <= 0.0 {
                *d = 0.0;
            }
        }
        if dot(&dir, &pg) >= 0.0 {
            pairs.clear();
            for (d, p) in dir.iter_mut().zip(&pg) {
                *d = -p;
            }
        }

        let orthant: Vec<f64> = x
            .iter()
            .zip(&pg)
            .map(|(&xi, &p)| if xi != 0.0 { xi.signum() } else { -p.signum() })
            .collect();
        let mut step = if pairs.is_empty() {
            1.0 / dot(&pg, &pg).sqrt()
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                let v = x[i] + step * dir[i];
                x_new[i] = if v * orthant[i] > 0.0 { v } else { 0.0 };
            }
            let new_obj = f(&x_new, &mut g_new) + opts.l1 * l1_norm(&x_new);
            let decrease: f64 = (0..n).map(|i| pg[i] * (x_new[i] - x[i])).sum();
            if new_obj.is_finite() && new_obj <= obj + 1e-4 * decrease && new_obj <= obj {
                accepted = Some(new_obj);
                break;
            }
            step *= 0.5;
        }
        let Some(new_obj) = accepted else {
            status = Status::LineSearchFailed;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        let prev = obj;
        obj = new_obj;
        history.push(obj);
        if (prev - obj).abs() / prev.abs().max(1.0) < opts.tolerance {
            status = Status::Converged;
            break;
        }
    }
    OwlqnResult {
        x,
        objective: obj,
        iterations,
        status,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64], g: &mut [f64]) -> f64 {
        // 0.5 * sum (x_i - c_i)^2 with c = [3, -0.5, 0.2]
        let c = [3.0, -0.5, 0.2];
        let mut v = 0.0;
        for i in 0..3 {
            g[i] = x[i] - c[i];
            v += 0.5 * g[i] * g[i];
        }
        v
    }

    #[test]
    fn smooth_quadratic() {
        let r = minimize(
            quadratic,
            vec![0.0; 3],
            &OwlqnOptions {
                tolerance: 1e-14,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 3.0).abs() < 1e-6 && (r.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn l1_soft_thresholds() {
        // Minimizer of 0.5 (x - c)^2 + l |x| is sign(c) max(|c| - l, 0).
        let r = minimize(
            quadratic,
            vec![0.0; 3],
            &OwlqnOptions {
                l1: 1.0,
                tolerance: 1e-14,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 2.0).abs() < 1e-6, "{:?}", r.x);
        assert_eq!(r.x[1], 0.0);
        assert_eq!(r.x[2], 0.0);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
