//! Box-constrained minimization by projected gradient descent with
//! Barzilai-Borwein trial steps and an Armijo backtracking safeguard, plus a
//! damped Newton polish for smooth problems with interior minimizers.

use crate::util::solve_linear;

pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub pg_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Infinity norm of `x - P(x - g)`, the first-order optimality measure for
/// box constraints.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..x.len() {
        let stepped = (x[i] - g[i]).clamp(lo[i], hi[i]);
        norm = norm.max((x[i] - stepped).abs());
    }
    norm
}

/// Minimizes a smooth convex function over a box.
///
/// Stops when the projected-gradient infinity norm drops below `pg_tol` or
/// after `max_iter` iterations.
pub(crate) fn minimize_box(
    f_g: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    pg_tol: f64,
    max_iter: usize,
) -> DescentOutcome {
    let n = x0.len();
    let mut x = x0;
    project(&mut x, lo, hi);
    let (mut value, mut grad) = f_g(&x);
    if n == 0 {
        return DescentOutcome {
            x,
            value,
            grad,
            pg_norm: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let mut step = {
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax > 0.0 {
            (0.1 / gmax).clamp(1e-8, 1.0)
        } else {
            1.0
        }
    };
    let mut prev_x: Option<Vec<f64>> = None;
    let mut prev_grad: Option<Vec<f64>> = None;

    let mut pg_norm = projected_gradient_norm(&x, &grad, lo, hi);
    for iter in 0..max_iter {
        if pg_norm < pg_tol {
            return DescentOutcome {
                x,
                value,
                grad,
                pg_norm,
                iterations: iter,
                converged: true,
            };
        }

        // Barzilai-Borwein trial step from the previous displacement.
        if let (Some(px), Some(pg)) = (&prev_x, &prev_grad) {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..n {
                let s = x[i] - px[i];
                let y = grad[i] - pg[i];
                ss += s * s;
                sy += s * y;
            }
            step = if sy > 1e-300 {
                (ss / sy).clamp(1e-12, 1e12)
            } else {
                (step * 2.0).min(1e12)
            };
        }

        // Armijo backtracking on the projected arc. Near the minimum the
        // true decrease drops below evaluation noise, so a step within noise
        // of the current value is still accepted when it improves the
        // first-order optimality measure.
        let noise = 1e-13 * value.abs().max(1e-300);
        let mut trial_step = step;
        let mut accepted = false;
        for _ in 0..70 {
            let mut xt: Vec<f64> = (0..n).map(|i| x[i] - trial_step * grad[i]).collect();
            project(&mut xt, lo, hi);
            let decrease: f64 = (0..n).map(|i| grad[i] * (x[i] - xt[i])).sum();
            if decrease <= 0.0 {
                break;
            }
            let (vt, gt) = f_g(&xt);
            let armijo = vt <= value - 1e-4 * decrease;
            let noise_ok = vt <= value + noise
                && projected_gradient_norm(&xt, &gt, lo, hi) < 0.9 * pg_norm;
            if armijo || noise_ok {
                prev_x = Some(std::mem::replace(&mut x, xt));
                prev_grad = Some(std::mem::replace(&mut grad, gt));
                value = value.min(vt);
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if !accepted {
            // no admissible decrease left at this scale
            return DescentOutcome {
                x,
                value,
                grad,
                pg_norm,
                iterations: iter,
                converged: pg_norm < pg_tol,
            };
        }
        pg_norm = projected_gradient_norm(&x, &grad, lo, hi);
    }

    DescentOutcome {
        x,
        value,
        grad,
        pg_norm,
        iterations: max_iter,
        converged: pg_norm < pg_tol,
    }
}

/// Damped Newton steps on the first-order system of a smooth convex
/// objective over a box; polishes an iterate whose minimizer is interior.
///
/// `g_h` returns the gradient and Hessian. Steps are accepted while the
/// projected-gradient norm strictly improves; on failure the step halves.
/// Returns the improved point (possibly the input).
pub(crate) fn newton_polish_box(
    g_h: &mut dyn FnMut(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>),
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    pg_tol: f64,
    max_steps: usize,
) -> Vec<f64> {
    let n = x0.len();
    if n == 0 {
        return x0;
    }
    let mut x = x0;
    let (mut grad, mut hess) = g_h(&x);
    let mut pg = projected_gradient_norm(&x, &grad, lo, hi);
    for _ in 0..max_steps {
        if pg < pg_tol {
            break;
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(delta) = solve_linear(hess.clone(), rhs) else {
            break;
        };
        let mut improved = false;
        let mut scale = 1.0;
        for _ in 0..12 {
            let mut xt: Vec<f64> = x
                .iter()
                .zip(&delta)
                .map(|(a, d)| a + scale * d)
                .collect();
            project(&mut xt, lo, hi);
            let (gt, ht) = g_h(&xt);
            let pgt = projected_gradient_norm(&xt, &gt, lo, hi);
            if pgt < pg {
                x = xt;
                grad = gt;
                hess = ht;
                pg = pgt;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_polish_quadratic() {
        // min (x-0.3)^2 + 4(y-0.6)^2: gradient zero at the interior optimum
        let mut g_h = |x: &[f64]| {
            (
                vec![2.0 * (x[0] - 0.3), 8.0 * (x[1] - 0.6)],
                vec![vec![2.0, 0.0], vec![0.0, 8.0]],
            )
        };
        let out = newton_polish_box(
            &mut g_h,
            vec![0.9, 0.1],
            &[0.0, 0.0],
            &[1.0, 1.0],
            1e-14,
            20,
        );
        assert!((out[0] - 0.3).abs() < 1e-14);
        assert!((out[1] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn quadratic_in_box() {
        // min (x - 2)^2 + 10 (y + 1)^2 over [0, 1]^2
        let mut f = |x: &[f64]| {
            let v = (x[0] - 2.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 2.0), 20.0 * (x[1] + 1.0)])
        };
        let out = minimize_box(&mut f, vec![0.3, 0.7], &[0.0, 0.0], &[1.0, 1.0], 1e-12, 10_000);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-12);
        assert!(out.x[1].abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let mut f = |x: &[f64]| {
            let v = 0.5 * (x[0] * x[0] + 999.0 * x[1] * x[1]);
            (v, vec![x[0], 999.0 * x[1]])
        };
        let out = minimize_box(
            &mut f,
            vec![180.0, 152.0],
            &[-1e6, -1e6],
            &[1e6, 1e6],
            1e-10,
            50_000,
        );
        assert!(out.converged, "pg norm {}", out.pg_norm);
        assert!(out.x[0].abs() < 1e-8);
        assert!(out.x[1].abs() < 1e-8);
    }

    #[test]
    fn empty_dimension() {
        let mut f = |_: &[f64]| (3.0, vec![]);
        let out = minimize_box(&mut f, vec![], &[], &[], 1e-10, 10);
        assert!(out.converged);
        assert_eq!(out.value, 3.0);
    }
}
