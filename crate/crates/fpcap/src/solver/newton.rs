//! Newton polish of the saddle stationarity system.
//!
//! Given a symmetric support structure (mirror pairs plus an optional atom at
//! 1/2), solves the square system consisting of the value equations and
//! `d C / d w = 0` at each support atom, the weighted symmetrized channel
//! stationarity for each free coordinate, and the weight normalization.
//!
//! Unknowns are kept feasible by transforms: pair positions live in (0, 1/2)
//! through a scaled logistic, weights through squares, free channel
//! coordinates through logits. The Jacobian is taken by central differences.

use crate::error::{Error, Result};
use crate::payoff::{
    payoff, payoff_grad_p, payoff_grad_w, CoalitionSize, CodeDistribution, CollusionChannel,
    SupportAtom,
};
use crate::util::solve_linear;

/// Symmetric support structure handed to the polish.
#[derive(Debug, Clone)]
pub(crate) struct Structure {
    /// Mirror pairs `(w, per-side weight)` with `w < 1/2`.
    pub pairs: Vec<(f64, f64)>,
    /// Weight of a self-paired atom at `w = 1/2`, if present.
    pub center: Option<f64>,
    /// Free channel coordinates `p_1 ..= p_floor((k-1)/2)`.
    pub free_p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Polished {
    pub distribution: CodeDistribution,
    pub channel: CollusionChannel,
    /// Game value `k * capacity`.
    pub value: f64,
    /// Final residual infinity norm of the stationarity system.
    pub residual: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    (p / (1.0 - p)).ln()
}

/// Transform coordinate layout: `[pair logits | weight roots | p logits | v]`.
struct Layout {
    k: CoalitionSize,
    n_pairs: usize,
    has_center: bool,
    n_free: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        2 * self.n_pairs + usize::from(self.has_center) + self.n_free + 1
    }

    fn pack(&self, s: &Structure, value: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for &(w, _) in &s.pairs {
            x.push(logit((2.0 * w).clamp(1e-15, 1.0 - 1e-15)));
        }
        for &(_, mu) in &s.pairs {
            x.push(mu.max(1e-12).sqrt());
        }
        if let Some(mu) = s.center {
            x.push(mu.max(1e-12).sqrt());
        }
        for &p in &s.free_p {
            x.push(logit(p));
        }
        x.push(value);
        x
    }

    /// Decodes positions, per-side weights, center weight, channel, value.
    #[allow(clippy::type_complexity)]
    fn unpack(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Option<f64>, CollusionChannel, f64)> {
        let r = self.n_pairs;
        let s = usize::from(self.has_center);
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        // transform saturation means the structure is degenerating; the value
        // unknown (last coordinate) is unconstrained
        if x[..x.len() - 1].iter().any(|v| v.abs() > 36.0) {
            return None;
        }
        let ws: Vec<f64> = x[..r].iter().map(|&a| 0.5 * sigmoid(a)).collect();
        let mus: Vec<f64> = x[r..2 * r].iter().map(|&t| t * t).collect();
        let center = self.has_center.then(|| x[2 * r] * x[2 * r]);
        let free: Vec<f64> = x[2 * r + s..2 * r + s + self.n_free]
            .iter()
            .map(|&b| sigmoid(b))
            .collect();
        let channel = CollusionChannel::from_free_symmetric(self.k, &free).ok()?;
        let value = x[self.dim() - 1];
        if ws.iter().any(|&w| w <= 1e-12 || w >= 0.5 - 1e-12) {
            return None;
        }
        Some((ws, mus, center, channel, value))
    }

    /// Stationarity residual vector; `None` when the point is degenerate.
    fn residual(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (ws, mus, center, channel, value) = self.unpack(x)?;
        let kk = self.k.get();
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.support_len());
        for (w, mu) in ws.iter().zip(&mus) {
            atoms.push((*w, *mu));
            atoms.push((1.0 - *w, *mu));
        }
        if let Some(mu) = center {
            atoms.push((0.5, mu));
        }

        let mut f = Vec::with_capacity(self.dim());
        for &w in &ws {
            f.push(payoff(w, &channel).ok()? - value);
        }
        if center.is_some() {
            f.push(payoff(0.5, &channel).ok()? - value);
        }
        for &w in &ws {
            f.push(payoff_grad_w(w, &channel).ok()?);
        }
        if self.n_free > 0 {
            let mut acc = vec![0.0; self.n_free];
            for &(w, mu) in &atoms {
                let g = payoff_grad_p(w, &channel).ok()?;
                for z in 1..=self.n_free {
                    acc[z - 1] += mu * (g[z] - g[kk - z]);
                }
            }
            f.extend(acc);
        }
        let total: f64 = 2.0 * mus.iter().sum::<f64>() + center.unwrap_or(0.0);
        f.push(total - 1.0);
        Some(f)
    }

    fn support_len(&self) -> usize {
        2 * self.n_pairs + usize::from(self.has_center)
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const JACOBIAN_STEP: f64 = 1e-6;
const RESIDUAL_TARGET: f64 = 1e-11;
const MAX_ITERATIONS: usize = 120;

/// Runs the damped Newton iteration from `structure`; an estimate of the game
/// value seeds the last unknown.
pub(crate) fn polish(
    k: CoalitionSize,
    structure: &Structure,
    value_estimate: f64,
) -> Result<Polished> {
    if structure.pairs.is_empty() && structure.center.is_none() {
        return Err(Error::Domain("empty support structure".into()));
    }
    if structure.free_p.len() != k.free_coordinates() {
        return Err(Error::Domain(format!(
            "structure has {} free coordinates, k = {k} needs {}",
            structure.free_p.len(),
            k.free_coordinates()
        )));
    }
    let layout = Layout {
        k,
        n_pairs: structure.pairs.len(),
        has_center: structure.center.is_some(),
        n_free: structure.free_p.len(),
    };
    let n = layout.dim();
    let mut x = layout.pack(structure, value_estimate);
    let mut f = layout
        .residual(&x)
        .ok_or_else(|| Error::Domain("degenerate structure".into()))?;

    let mut best_norm = f64::INFINITY;
    let mut no_progress = 0usize;
    for _ in 0..MAX_ITERATIONS {
        let current = norm_inf(&f);
        if current < RESIDUAL_TARGET {
            break;
        }
        // a wrong structure leaves a positive residual floor; stop grinding
        // once improvements become marginal
        if current > 0.97 * best_norm {
            no_progress += 1;
            if no_progress >= 6 {
                return Err(Error::Domain(format!(
                    "newton flatlined at residual {current:.3e}"
                )));
            }
        } else {
            no_progress = 0;
        }
        best_norm = best_norm.min(current);
        // central-difference Jacobian, step scaled per coordinate
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let step = JACOBIAN_STEP * (1.0 + x[j].abs());
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += step;
            lo[j] -= step;
            let fh = layout
                .residual(&hi)
                .ok_or_else(|| Error::Domain("jacobian step left feasible region".into()))?;
            let fl = layout
                .residual(&lo)
                .ok_or_else(|| Error::Domain("jacobian step left feasible region".into()))?;
            for i in 0..n {
                jac[i][j] = (fh[i] - fl[i]) / (2.0 * step);
            }
        }
        // row equilibration: the value/derivative rows at near-boundary atoms
        // are orders of magnitude stiffer than the rest
        let mut scales = vec![1.0; n];
        for i in 0..n {
            let scale = jac[i].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if scale > 1e-300 {
                scales[i] = scale;
                for v in jac[i].iter_mut() {
                    *v /= scale;
                }
            }
        }
        let scaled = |f: &[f64]| -> Vec<f64> {
            f.iter().zip(&scales).map(|(v, s)| v / s).collect()
        };
        let fs = scaled(&f);
        let rhs: Vec<f64> = fs.iter().map(|v| -v).collect();
        let base_norm = norm2(&fs);

        let mut accepted = false;
        if let Some(delta) = solve_linear(jac.clone(), rhs) {
            let mut alpha = 1.0f64;
            for _ in 0..25 {
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                if let Some(ft) = layout.residual(&trial) {
                    if norm2(&scaled(&ft)) < (1.0 - 1e-4 * alpha) * base_norm {
                        x = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // Levenberg-Marquardt fallback: always yields a descent direction
            // for the scaled squares, riding out near-singular Jacobians
            let mut normal = vec![vec![0.0; n]; n];
            let mut grad = vec![0.0; n];
            for i in 0..n {
                for a in 0..n {
                    grad[a] += jac[i][a] * fs[i];
                    for b in a..n {
                        normal[a][b] += jac[i][a] * jac[i][b];
                    }
                }
            }
            for a in 0..n {
                for b in 0..a {
                    normal[a][b] = normal[b][a];
                }
            }
            let mut damping = 1e-6f64;
            while damping <= 1e6 {
                let mut lhs = normal.clone();
                for (a, row) in lhs.iter_mut().enumerate() {
                    row[a] += damping * normal[a][a].max(1e-12);
                }
                let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
                if let Some(delta) = solve_linear(lhs, rhs) {
                    let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
                    if let Some(ft) = layout.residual(&trial) {
                        if norm2(&scaled(&ft)) < base_norm {
                            x = trial;
                            f = ft;
                            accepted = true;
                            break;
                        }
                    }
                }
                damping *= 10.0;
            }
        }
        if !accepted {
            return Err(Error::Domain(format!(
                "newton stalled at residual {:.3e}",
                norm_inf(&f)
            )));
        }
    }
    if norm_inf(&f) >= RESIDUAL_TARGET {
        let worst = f
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, v)| (i, *v))
            .unwrap_or((0, 0.0));
        return Err(Error::Domain(format!(
            "newton missed residual target: {:.3e} (row {} of {}: {:.3e})",
            norm_inf(&f),
            worst.0,
            f.len(),
            worst.1
        )));
    }

    let (ws, mus, center, channel, value) = layout
        .unpack(&x)
        .ok_or_else(|| Error::Domain("degenerate polished point".into()))?;
    // exact renormalization before constructing the distribution
    let total = 2.0 * mus.iter().sum::<f64>() + center.unwrap_or(0.0);
    let mut atoms = Vec::with_capacity(layout.support_len());
    for (w, mu) in ws.iter().zip(&mus) {
        if *mu <= 1e-12 {
            return Err(Error::Domain("polished pair weight vanished".into()));
        }
        atoms.push(SupportAtom { w: *w, weight: mu / total });
        atoms.push(SupportAtom { w: 1.0 - *w, weight: mu / total });
    }
    if let Some(mu) = center {
        if mu <= 1e-12 {
            return Err(Error::Domain("polished center weight vanished".into()));
        }
        atoms.push(SupportAtom { w: 0.5, weight: mu / total });
    }
    let distribution = CodeDistribution::new(atoms)?;
    let residual = norm_inf(&f);
    Ok(Polished {
        distribution,
        channel,
        value,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polish_center_only_k2() {
        let k = CoalitionSize::new(2).unwrap();
        let s = Structure {
            pairs: vec![],
            center: Some(0.9),
            free_p: vec![],
        };
        let out = polish(k, &s, 0.4).unwrap();
        assert!((out.value - 0.5).abs() < 1e-10);
        assert_eq!(out.distribution.len(), 1);
        assert!((out.distribution.atoms()[0].w - 0.5).abs() < 1e-12);
        assert!((out.distribution.atoms()[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(out.channel.probs(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn polish_rejects_wrong_free_count() {
        let k = CoalitionSize::new(5).unwrap();
        let s = Structure {
            pairs: vec![(0.3, 0.5)],
            center: None,
            free_p: vec![0.2],
        };
        assert!(polish(k, &s, 0.1).is_err());
    }
}
