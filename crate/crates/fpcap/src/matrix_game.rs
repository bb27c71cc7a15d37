//! Finite zero-sum matrix games solved by optimistic multiplicative-weight
//! updates on both sides. Averages always converge; last iterates converge
//! fast when the equilibrium is pure, so the certificate keeps whichever is
//! better. The returned gap is exact for the given matrix.

/// Solves a matrix game (row player maximizes). Returns mixed strategies and
/// their exact duality gap on the matrix.
pub(crate) fn solve_matrix_game(
    matrix: &[Vec<f64>],
    max_iters: usize,
    gap_tol: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let r = matrix.len();
    let c = matrix[0].len();
    if r == 1 && c == 1 {
        return (vec![1.0], vec![1.0], 0.0);
    }
    let scale = matrix
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-12);
    let eta = 0.5 / scale;

    let mul = |y: &[f64]| -> Vec<f64> {
        matrix
            .iter()
            .map(|row| row.iter().zip(y).map(|(m, yj)| m * yj).sum())
            .collect()
    };
    let mul_t = |x: &[f64]| -> Vec<f64> {
        (0..c)
            .map(|j| matrix.iter().zip(x).map(|(row, xi)| row[j] * xi).sum())
            .collect()
    };
    let gap_of = |x: &[f64], y: &[f64]| -> f64 {
        let up = mul(y).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let low = mul_t(x).into_iter().fold(f64::INFINITY, f64::min);
        up - low
    };

    let mut x = vec![1.0 / r as f64; r];
    let mut y = vec![1.0 / c as f64; c];
    let mut x_sum = vec![0.0; r];
    let mut y_sum = vec![0.0; c];
    let mut prev_u = mul(&y);
    let mut prev_v = mul_t(&x);
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;

    let normalize = |v: &mut Vec<f64>| {
        let total: f64 = v.iter().sum();
        for e in v.iter_mut() {
            *e /= total;
        }
    };

    for t in 1..=max_iters {
        let u = mul(&y);
        let v = mul_t(&x);
        for i in 0..r {
            x[i] *= (eta * (2.0 * u[i] - prev_u[i])).exp();
        }
        normalize(&mut x);
        for j in 0..c {
            y[j] *= (-eta * (2.0 * v[j] - prev_v[j])).exp();
        }
        normalize(&mut y);
        prev_u = u;
        prev_v = v;
        for i in 0..r {
            x_sum[i] += x[i];
        }
        for j in 0..c {
            y_sum[j] += y[j];
        }

        if t % 100 == 0 || t == max_iters {
            let mut xa = x_sum.clone();
            let mut ya = y_sum.clone();
            normalize(&mut xa);
            normalize(&mut ya);
            for (cx, cy) in [(&xa, &ya), (&x, &y)] {
                let g = gap_of(cx, cy);
                if best.as_ref().is_none_or(|(_, _, bg)| g < *bg) {
                    best = Some((cx.clone(), cy.clone(), g));
                }
            }
            if best.as_ref().is_some_and(|(_, _, g)| *g < gap_tol) {
                break;
            }
        }
    }
    best.expect("at least one certificate")
}
