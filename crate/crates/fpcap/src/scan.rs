//! Grid scan plus derivative refinement for one-dimensional maximization
//! over the unit interval.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Maximizer {
    pub w: f64,
    pub value: f64,
}

/// Locates the local maximizers of a smooth function on (0, 1).
///
/// `f` must be defined on the closed interval; `df`/`d2f` only in the
/// interior. Each grid candidate is refined by safeguarded Newton steps on
/// `df` (bisection fallback keeps the iterate bracketed). Maximizers closer
/// than `merge_distance` are merged, keeping the higher value.
pub(crate) fn local_maximizers(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    grid_n: usize,
    merge_distance: f64,
) -> Vec<Maximizer> {
    let n = grid_n.max(17);
    let step = 1.0 / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(i as f64 * step)).collect();

    let mut found: Vec<Maximizer> = Vec::new();
    for i in 1..n - 1 {
        if values[i] >= values[i - 1] && values[i] >= values[i + 1] {
            let refined = refine(f, df, d2f, (i - 1) as f64 * step, i as f64 * step, (i + 1) as f64 * step);
            let grid = Maximizer {
                w: i as f64 * step,
                value: values[i],
            };
            found.push(if refined.value >= grid.value { refined } else { grid });
        }
    }
    if found.is_empty() {
        // flat or monotone sampling; fall back to the best grid point
        let (i, &v) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        found.push(Maximizer {
            w: (i as f64 * step).clamp(step, 1.0 - step),
            value: v,
        });
    }

    found.sort_by(|a, b| a.w.total_cmp(&b.w));
    let mut merged: Vec<Maximizer> = Vec::new();
    for m in found {
        match merged.last_mut() {
            Some(last) if m.w - last.w < merge_distance => {
                if m.value > last.value {
                    *last = m;
                }
            }
            _ => merged.push(m),
        }
    }
    merged
}

/// Global maximum over (0, 1).
pub(crate) fn global_maximum(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    grid_n: usize,
    merge_distance: f64,
) -> Maximizer {
    local_maximizers(f, df, d2f, grid_n, merge_distance)
        .into_iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one maximizer")
}

fn refine(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    mut lo: f64,
    start: f64,
    mut hi: f64,
) -> Maximizer {
    let mut x = start;
    for _ in 0..80 {
        let g = df(x);
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let h = d2f(x);
        let newton = if h < 0.0 { x - g / h } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-17 {
            x = next;
            break;
        }
        x = next;
    }
    Maximizer { w: x, value: f(x) }
}
