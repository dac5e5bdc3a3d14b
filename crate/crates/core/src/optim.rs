//! Deterministic local optimizers: a box-bounded limited-memory quasi-Newton
//! method, Nelder–Mead, golden-section search and central-difference
//! gradients.
//!
//! All routines minimize. Callers maximizing a likelihood pass its negative.

use std::collections::VecDeque;

use crate::error::{Error, Result};

type ValueFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
type GradFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

/// A scalar objective with optional analytic gradient and box bounds.
pub struct Objective<'a> {
    value: ValueFn<'a>,
    gradient: Option<GradFn<'a>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> Objective<'a> {
    /// Unbounded objective in `dim` coordinates.
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + 'a) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), self.lower.len(), "lower bound dimension");
        assert_eq!(upper.len(), self.upper.len(), "upper bound dimension");
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    /// Analytic gradient when supplied, central differences otherwise.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => {
                let grad = g(x);
                if grad.iter().all(|v| v.is_finite()) {
                    Ok(grad)
                } else {
                    Err(Error::NonFinite { point: x.to_vec() })
                }
            }
            None => finite_diff_gradient(self, x),
        }
    }

    fn project(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the projected gradient at `argmin` (NaN for
    /// derivative-free methods).
    pub gradient_norm: f64,
    /// Objective value after each accepted iteration, starting with `f(x0)`.
    pub trace: Vec<f64>,
    /// Accepted iterates, populated when `record_path` is set.
    pub path: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct QuasiNewtonOptions {
    pub memory: usize,
    pub gradient_tol: f64,
    pub relative_tol: f64,
    pub max_iter: usize,
    pub record_path: bool,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            gradient_tol: 1e-8,
            relative_tol: 1e-12,
            max_iter: 500,
            record_path: false,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gradient components that can move the point without leaving the box.
fn projected_gradient(obj: &Objective<'_>, x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let at_lower = xi <= obj.lower[i];
            let at_upper = xi >= obj.upper[i];
            if (at_lower && gi > 0.0) || (at_upper && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Two-loop recursion on the free coordinates.
fn lbfgs_direction(
    g: &[f64],
    free: &[bool],
    memory: &VecDeque<(Vec<f64>, Vec<f64>)>,
) -> Vec<f64> {
    let masked = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(free)
            .map(|(x, &f)| if f { *x } else { 0.0 })
            .collect()
    };
    let mut q = masked(g);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = memory
        .iter()
        .map(|(s, y)| (masked(s), masked(y)))
        .collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let sy = dot(s, y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.last() {
        let yy = dot(y, y);
        let sy = dot(s, y);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y), a) in pairs.iter().zip(alphas.iter().rev()) {
        let sy = dot(s, y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Box-bounded limited-memory quasi-Newton minimization.
///
/// Search directions come from the two-loop recursion restricted to the
/// coordinates not held at an active bound; trial points are projected back
/// into the box and accepted under an Armijo condition measured along the
/// projected step, so every iterate is feasible and no accepted step raises
/// the objective.
pub fn minimize_quasi_newton(
    obj: &Objective<'_>,
    x0: &[f64],
    opts: &QuasiNewtonOptions,
) -> Result<OptResult> {
    if x0.len() != obj.dim() {
        return Err(Error::InvalidInput(format!(
            "start has {} coordinates, objective has {}",
            x0.len(),
            obj.dim()
        )));
    }
    if !obj.contains(x0) {
        return Err(Error::InvalidInput(format!("start {x0:?} lies outside the bounds")));
    }
    let mut x = x0.to_vec();
    let mut f = obj.eval(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite { point: x });
    }
    let mut g = obj.gradient_at(&x)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(opts.memory);
    let mut trace = vec![f];
    let mut path = if opts.record_path { vec![x.clone()] } else { Vec::new() };
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let pg = projected_gradient(obj, &x, &g);
        if inf_norm(&pg) < opts.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let free: Vec<bool> = pg
            .iter()
            .zip(&g)
            .map(|(p, gi)| *p != 0.0 || *gi == 0.0)
            .collect();
        let mut d = lbfgs_direction(&g, &free, &memory);
        if dot(&d, &g) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            memory.clear();
            d = pg.iter().map(|v| -v).collect();
        }
        let mut alpha = if memory.is_empty() {
            (1.0 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..64 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            obj.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            let decrease = dot(&g, &step);
            if inf_norm(&step) == 0.0 {
                break;
            }
            let ft = obj.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * decrease && ft <= f {
                accepted = Some((trial, ft, step));
                break;
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new, s)) = accepted else {
            if memory.is_empty() {
                // No feasible decrease along steepest descent.
                break;
            }
            memory.clear();
            continue;
        };
        if !f_new.is_finite() {
            return Err(Error::NonFinite { point: x_new });
        }
        let g_new = obj.gradient_at(&x_new)?;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        let rel = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        if opts.record_path {
            path.push(x.clone());
        }
        if rel <= opts.relative_tol {
            converged = true;
            break;
        }
    }

    let gradient_norm = inf_norm(&projected_gradient(obj, &x, &g));
    if gradient_norm < opts.gradient_tol {
        converged = true;
    }
    Ok(OptResult {
        argmin: x,
        value: f,
        converged,
        iterations,
        gradient_norm,
        trace,
        path,
    })
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Convergence threshold on max − min over the simplex values.
    pub value_tol: f64,
    /// Also required for convergence: every vertex within this distance
    /// (infinity norm, scaled by `1 + |x_best|`) of the best vertex.
    pub point_tol: f64,
    pub max_iter: usize,
    /// Initial edge length per coordinate; `None` uses 5% of |x0ᵢ| (or
    /// 2.5e-4 for zero coordinates).
    pub initial_step: Option<Vec<f64>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            value_tol: 1e-10,
            point_tol: 1e-8,
            max_iter: 2000,
            initial_step: None,
        }
    }
}

/// Nelder–Mead downhill simplex. Non-finite objective values are treated as
/// `+∞`, so the simplex retreats from regions where the objective is
/// undefined. Bounds on the objective are ignored.
pub fn minimize_nelder_mead(
    obj: &Objective<'_>,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<OptResult> {
    let n = x0.len();
    if n == 0 || n != obj.dim() {
        return Err(Error::InvalidInput("Nelder–Mead needs a non-empty start".into()));
    }
    let eval = |x: &[f64]| {
        let v = obj.eval(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite { point: x0.to_vec() });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = match &opts.initial_step {
            Some(s) => s[i],
            None if x0[i] != 0.0 => 0.05 * x0[i].abs(),
            None => 2.5e-4,
        };
        v[i] += step;
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut trace = vec![f0];
    let mut iterations = 0;
    let mut converged = false;
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
    };
    order(&mut simplex);

    while iterations < opts.max_iter {
        let spread = simplex[n].1 - simplex[0].1;
        let best = &simplex[0].0;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
            .fold(0.0, f64::max);
        if spread < opts.value_tol && size < opts.point_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(opts.reflection);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(opts.reflection * opts.contraction);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-opts.contraction);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for (vi, bi) in v.iter_mut().zip(&best) {
                        *vi = bi + opts.shrink * (*vi - bi);
                    }
                    *fv = eval(v);
                }
            }
        }
        order(&mut simplex);
        trace.push(simplex[0].1);
    }

    let (argmin, value) = simplex.swap_remove(0);
    Ok(OptResult {
        argmin,
        value,
        converged,
        iterations,
        gradient_norm: f64::NAN,
        trace,
        path: Vec::new(),
    })
}

/// Central-difference gradient with per-coordinate step `max(1e-6, 1e-6·|xᵢ|)`.
pub fn finite_diff_gradient(obj: &Objective<'_>, x: &[f64]) -> Result<Vec<f64>> {
    central_difference(|p| obj.eval(p), x)
}

pub(crate) fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = (1e-6 * x[i].abs()).max(1e-6);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            let mut bad = x.to_vec();
            bad[i] += if fp.is_finite() { -h } else { h };
            return Err(Error::NonFinite { point: bad });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Central-difference Hessian with per-coordinate step `max(1e-4, 1e-4·|xᵢ|)`.
pub fn central_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| (1e-4 * v.abs()).max(1e-4)).collect();
    let mut probe = x.to_vec();
    let eval = |probe: &[f64]| -> Result<f64> {
        let v = f(probe);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: probe.to_vec() })
        }
    };
    let f0 = eval(x)?;
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        probe[i] = x[i] + h[i];
        let fp = eval(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = eval(&probe)?;
        probe[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                probe[i] = x[i] + si * h[i];
                probe[j] = x[j] + sj * h[j];
                let v = eval(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    Ok(hess)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
/// Returns `(argmin, value)`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // Endpoints can beat the interior when the minimum sits on the boundary.
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(mid, fm), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_of_a_cubic() {
        // f = x²y + 3y² has Hessian [[2y, 2x], [2x, 6]].
        let h = central_hessian(|p| p[0] * p[0] * p[1] + 3.0 * p[1] * p[1], &[1.5, -2.0]).unwrap();
        let want = [[-4.0, 3.0], [3.0, 6.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[i][j] - want[i][j]).abs() < 1e-6, "{i},{j}: {}", h[i][j]);
            }
        }
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    }

    #[test]
    fn qn_quadratic() {
        let obj = Objective::new(1, |x| (x[0] - 3.0).powi(2)).with_gradient(|x| vec![2.0 * (x[0] - 3.0)]);
        let r = minimize_quasi_newton(&obj, &[0.0], &QuasiNewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn qn_rosenbrock() {
        let obj = Objective::new(2, rosenbrock).with_gradient(rosenbrock_grad);
        let r = minimize_quasi_newton(&obj, &[-1.2, 1.0], &QuasiNewtonOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.argmin[0] - 1.0).abs() < 1e-6, "{:?}", r.argmin);
        assert!((r.argmin[1] - 1.0).abs() < 1e-6, "{:?}", r.argmin);
    }

    #[test]
    fn qn_rosenbrock_without_gradient() {
        let obj = Objective::new(2, rosenbrock);
        let r = minimize_quasi_newton(&obj, &[-1.2, 1.0], &QuasiNewtonOptions::default()).unwrap();
        assert!((r.argmin[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn qn_active_bound() {
        let obj = Objective::new(1, |x| (x[0] - 3.0).powi(2))
            .with_gradient(|x| vec![2.0 * (x[0] - 3.0)])
            .with_bounds(vec![5.0], vec![f64::INFINITY]);
        let r = minimize_quasi_newton(&obj, &[7.0], &QuasiNewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.argmin[0], 5.0);
    }

    #[test]
    fn qn_rejects_non_finite_start() {
        let obj = Objective::new(1, |x| x[0].ln());
        let err = minimize_quasi_newton(&obj, &[-1.0], &QuasiNewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn qn_iteration_cap_reports_non_converged() {
        let obj = Objective::new(2, rosenbrock).with_gradient(rosenbrock_grad);
        let opts = QuasiNewtonOptions { max_iter: 3, ..Default::default() };
        let r = minimize_quasi_newton(&obj, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn qn_descent_and_feasibility_along_path() {
        let obj = Objective::new(2, rosenbrock)
            .with_gradient(rosenbrock_grad)
            .with_bounds(vec![-2.0, -0.5], vec![0.8, 2.0]);
        let opts = QuasiNewtonOptions { record_path: true, ..Default::default() };
        let r = minimize_quasi_newton(&obj, &[-1.2, 1.0], &opts).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for p in &r.path {
            assert!(p[0] >= -2.0 && p[0] <= 0.8 && p[1] >= -0.5 && p[1] <= 2.0);
        }
        assert!((r.argmin[0] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn nm_v_shape() {
        let obj = Objective::new(1, |x| (x[0] - 2.0).abs());
        let r = minimize_nelder_mead(&obj, &[0.0], &NelderMeadOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nm_correlated_quadratic() {
        // f = ½(x−a)ᵀA(x−a) with A = [[2, 1.2], [1.2, 1]]; argmin a.
        let a = [1.5, -0.7];
        let obj = Objective::new(2, move |x| {
            let (u, v) = (x[0] - a[0], x[1] - a[1]);
            0.5 * (2.0 * u * u + 2.4 * u * v + v * v)
        });
        let r = minimize_nelder_mead(&obj, &[0.0, 0.0], &NelderMeadOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - a[0]).abs() < 1e-4);
        assert!((r.argmin[1] - a[1]).abs() < 1e-4);
        let tight = NelderMeadOptions { value_tol: 1e-16, ..Default::default() };
        let r = minimize_nelder_mead(&obj, &[0.0, 0.0], &tight).unwrap();
        assert!((r.argmin[0] - a[0]).abs() < 1e-6);
        assert!((r.argmin[1] - a[1]).abs() < 1e-6);
    }

    #[test]
    fn nm_restart_does_not_increase() {
        let obj = Objective::new(2, rosenbrock);
        let r1 = minimize_nelder_mead(&obj, &[-1.2, 1.0], &NelderMeadOptions::default()).unwrap();
        let r2 = minimize_nelder_mead(&obj, &r1.argmin, &NelderMeadOptions::default()).unwrap();
        assert!(r2.value <= r1.value);
    }

    #[test]
    fn nm_iteration_cap() {
        let obj = Objective::new(2, rosenbrock);
        let opts = NelderMeadOptions { max_iter: 5, ..Default::default() };
        let r = minimize_nelder_mead(&obj, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn fd_gradient_of_square() {
        let obj = Objective::new(1, |x| x[0] * x[0]);
        let g = finite_diff_gradient(&obj, &[3.0]).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-5);
    }

    #[test]
    fn fd_gradient_at_stationary_point() {
        let obj = Objective::new(2, |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2));
        let g = finite_diff_gradient(&obj, &[1.0, -2.0]).unwrap();
        assert!(inf_norm(&g) < 1e-6);
    }

    #[test]
    fn fd_gradient_reports_non_finite_probe() {
        let obj = Objective::new(1, |x| x[0].ln());
        assert!(matches!(
            finite_diff_gradient(&obj, &[0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn golden_section_finds_interior_and_boundary_minima() {
        let (x, _) = golden_section(|t| (t - 1.3).powi(2), -5.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
        let (x, _) = golden_section(|t| t, 0.0, 1.0, 1e-10);
        assert!(x < 1e-8);
    }

    #[test]
    fn deterministic_results() {
        let obj = Objective::new(2, rosenbrock).with_gradient(rosenbrock_grad);
        let a = minimize_quasi_newton(&obj, &[-1.2, 1.0], &QuasiNewtonOptions::default()).unwrap();
        let b = minimize_quasi_newton(&obj, &[-1.2, 1.0], &QuasiNewtonOptions::default()).unwrap();
        assert_eq!(a.argmin, b.argmin);
        assert_eq!(a.iterations, b.iterations);
    }
}
