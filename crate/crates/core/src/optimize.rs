//! Box-constrained Nelder–Mead with deterministic multistart.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    /// Stop once the simplex diameter drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_starts: usize,
    /// Initial simplex edge as a fraction of the box width.
    pub init_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            max_starts: 11,
            init_step: 0.1,
        }
    }
}

/// Outcome of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Smallest and largest finite value seen.
    pub range: (f64, f64),
}

/// Outcome of a multistart search.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub starts_used: usize,
    pub failure: Option<String>,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let s: f64 = simplex[i]
                .iter()
                .zip(&simplex[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d = d.max(s.sqrt());
        }
    }
    d
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead from `x0` with every trial point projected onto the box.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NmOptions,
) -> LocalResult {
    let d = x0.len();
    let mut lo_seen = f64::INFINITY;
    let mut hi_seen = f64::NEG_INFINITY;
    let mut eval = |x: &[f64]| {
        let v = sanitize(f(x));
        if v.is_finite() {
            lo_seen = lo_seen.min(v);
            hi_seen = hi_seen.max(v);
        }
        v
    };

    let mut start = x0.to_vec();
    project(&mut start, bounds);
    let mut simplex = vec![start.clone()];
    for i in 0..d {
        let (lo, hi) = bounds[i];
        let step = opts.init_step * (hi - lo);
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|x| x[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut x, bounds);
            x
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < values[d].min(fr) || (fc <= values[d] && fc.is_finite()) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=d {
            let mut x: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            project(&mut x, bounds);
            values[i] = eval(&x);
            simplex[i] = x;
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("simplex is nonempty");
    LocalResult {
        x: simplex[best].clone(),
        value: values[best],
        converged,
        iterations,
        range: (lo_seen, hi_seen),
    }
}

/// Box center followed by the points of the `{0.2, 0.5, 0.8}^d` grid,
/// thinned evenly when the total exceeds `max_starts`.
pub fn start_points(bounds: &[(f64, f64)], max_starts: usize) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let at = |fracs: &[f64]| -> Vec<f64> {
        fracs
            .iter()
            .zip(bounds)
            .map(|(t, &(lo, hi))| lo + t * (hi - lo))
            .collect()
    };
    let center = at(&vec![0.5; d]);
    let levels = [0.2, 0.5, 0.8];
    let total = 3usize.pow(d as u32);
    let mut grid = Vec::with_capacity(total);
    for idx in 0..total {
        let mut k = idx;
        let fracs: Vec<f64> = (0..d)
            .map(|_| {
                let l = levels[k % 3];
                k /= 3;
                l
            })
            .collect();
        if fracs.iter().all(|&t| t == 0.5) {
            continue;
        }
        grid.push(at(&fracs));
    }
    let room = max_starts.max(1) - 1;
    let mut out = vec![center];
    if grid.len() <= room {
        out.extend(grid);
    } else if room > 0 {
        let last = (grid.len() - 1) as f64;
        for i in 0..room {
            let j = if room == 1 {
                0
            } else {
                (i as f64 * last / (room - 1) as f64).round() as usize
            };
            out.push(grid[j].clone());
        }
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Multistart Nelder–Mead. The best start wins by value, ties by the
/// lexicographically smallest point. A flat objective yields the box
/// center with `converged = false`.
pub fn minimize_box<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    bounds: &[(f64, f64)],
    opts: &NmOptions,
) -> MultiResult {
    let starts = start_points(bounds, opts.max_starts);
    let center = starts[0].clone();
    let runs: Vec<LocalResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(f, x0, bounds, opts))
        .collect();

    let starts_used = runs.len();
    let lo = runs.iter().map(|r| r.range.0).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.range.1).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return MultiResult {
            x: center,
            value: f64::INFINITY,
            converged: false,
            starts_used,
            failure: Some("objective is not finite at any trial point".into()),
        };
    }
    if hi - lo <= 1e-14 * lo.abs().max(1.0) {
        return MultiResult {
            value: sanitize(f(&center)),
            x: center,
            converged: false,
            starts_used,
            failure: Some("objective is flat over the search".into()),
        };
    }
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex_cmp(&a.x, &b.x)))
        .expect("at least one start");
    MultiResult {
        converged: best.converged,
        failure: (!best.converged).then(|| format!("no convergence within {} iterations", opts.max_iter)),
        x: best.x,
        value: best.value,
        starts_used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_box() {
        let f = |x: &[f64]| (x[0] + 1.3).powi(2);
        let r = minimize_box(&f, &[(-5.0, -0.05)], &NmOptions::default());
        assert!(r.converged);
        assert!((r.x[0] + 1.3).abs() < 1e-6);
    }

    #[test]
    fn optimum_on_boundary() {
        let f = |x: &[f64]| x[0] + x[1];
        let r = minimize_box(&f, &[(0.0, 1.0), (2.0, 3.0)], &NmOptions::default());
        assert!(r.x[0].abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_3d() {
        let f = |x: &[f64]| {
            (0..2)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum()
        };
        let opts = NmOptions {
            max_iter: 3000,
            ..Default::default()
        };
        let r = minimize_box(&f, &[(-2.0, 2.0); 3], &opts);
        for v in r.x {
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn flat_objective_returns_center() {
        let f = |_: &[f64]| 3.0;
        let r = minimize_box(&f, &[(-10.0, -0.1)], &NmOptions::default());
        assert!(!r.converged);
        assert!((r.x[0] + 5.05).abs() < 1e-12);
        assert!(r.failure.is_some());
    }

    #[test]
    fn infinite_objective_fails() {
        let f = |_: &[f64]| f64::INFINITY;
        let r = minimize_box(&f, &[(0.0, 1.0)], &NmOptions::default());
        assert!(!r.converged);
        assert!(r.failure.unwrap().contains("finite"));
    }

    #[test]
    fn nan_treated_as_infinite() {
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                (x[0] - 0.25).powi(2)
            }
        };
        let r = minimize_box(&f, &[(0.0, 1.0)], &NmOptions::default());
        assert!((r.x[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn start_counts() {
        assert_eq!(start_points(&[(0.0, 1.0)], 11).len(), 3);
        assert_eq!(start_points(&[(0.0, 1.0); 2], 11).len(), 9);
        let s3 = start_points(&[(0.0, 1.0); 3], 11);
        assert_eq!(s3.len(), 11);
        assert_eq!(s3[0], vec![0.5; 3]);
        let mut uniq = s3.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 11);
    }

    #[test]
    fn tie_break_prefers_smaller_point() {
        // zero on the whole interval [-0.5, 0.5], so every start ties
        let f = |x: &[f64]| (x[0] * x[0] - 0.25).max(0.0);
        let bounds = [(-1.0, 1.0)];
        let opts = NmOptions::default();
        let r = minimize_box(&f, &bounds, &opts);
        assert_eq!(r.value, 0.0);
        for x0 in start_points(&bounds, opts.max_starts) {
            let local = nelder_mead(&f, &x0, &bounds, &opts);
            assert!(local.value > 0.0 || r.x[0] <= local.x[0]);
        }
    }
}
