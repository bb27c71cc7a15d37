//! Single-letter payoff of the binary fingerprinting game.
//!
//! The maximizer picks a time-sharing bias `w`, the coalition picks a
//! collusion channel `p` with `p[z] = P(Y=1 | Z=z)` where `Z` counts the
//! ones held by the `k` colluders. The payoff in bits is
//!
//! ```text
//! C(w, p) = h2(alpha(w)' p) - alpha(w)' h2(p)
//! ```
//!
//! with `alpha(w)` the Binomial(k, w) pmf. An equivalent KL-divergence form
//! is kept as an independent implementation for cross-validation.

use crate::error::{Error, Result};

pub(crate) const LN_2: f64 = std::f64::consts::LN_2;

/// Largest `k` for which binomial coefficients are accumulated directly;
/// beyond this the log-domain route is used.
const DIRECT_BINOMIAL_MAX_K: usize = 25;

/// Number of colluders `k >= 1`. Vectors indexed by the agreement count `z`
/// always hold `k + 1` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoalitionSize(usize);

impl CoalitionSize {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("coalition size must be at least 1".into()));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Length of a `z`-indexed vector, `k + 1`.
    pub fn vector_len(self) -> usize {
        self.0 + 1
    }

    /// Cardinality bound `floor((k+1)/2)` on the optimal time-sharing support.
    pub fn max_support(self) -> usize {
        (self.0 + 1) / 2
    }

    /// Indices of channel coordinates not pinned by marking or symmetry:
    /// `z = 1 ..= floor((k-1)/2)`.
    pub fn free_coordinates(self) -> usize {
        self.0.saturating_sub(1) / 2
    }
}

impl std::fmt::Display for CoalitionSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Collusion channel `p[z] = P(Y=1 | Z=z)`, `z = 0..=k`.
///
/// The marking assumption pins `p[0] = 0` and `p[k] = 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CollusionChannel {
    k: CoalitionSize,
    probs: Vec<f64>,
}

impl CollusionChannel {
    /// Builds a channel from the full probability vector `(p_0, ..., p_k)`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidChannel(format!(
                "need at least 2 entries, got {}",
                probs.len()
            )));
        }
        let k = CoalitionSize::new(probs.len() - 1)?;
        for (z, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidChannel(format!("p[{z}] = {p} outside [0, 1]")));
            }
        }
        if probs[0] != 0.0 {
            return Err(Error::InvalidChannel(format!(
                "marking violated: p[0] = {} != 0",
                probs[0]
            )));
        }
        if probs[k.get()] != 1.0 {
            return Err(Error::InvalidChannel(format!(
                "marking violated: p[k] = {} != 1",
                probs[k.get()]
            )));
        }
        Ok(Self { k, probs })
    }

    /// Builds a Lemma-1-symmetric channel from its free coordinates
    /// `p_1 ..= p_floor((k-1)/2)`; mirrored coordinates are `1 - p_z` and the
    /// midpoint is pinned to 1/2 for even `k`.
    pub fn from_free_symmetric(k: CoalitionSize, free: &[f64]) -> Result<Self> {
        let kk = k.get();
        if free.len() != k.free_coordinates() {
            return Err(Error::InvalidChannel(format!(
                "expected {} free coordinates for k = {kk}, got {}",
                k.free_coordinates(),
                free.len()
            )));
        }
        let mut probs = vec![0.0; kk + 1];
        probs[kk] = 1.0;
        for (i, &p) in free.iter().enumerate() {
            let z = i + 1;
            probs[z] = p;
            probs[kk - z] = 1.0 - p;
        }
        if kk % 2 == 0 && kk >= 2 {
            probs[kk / 2] = 0.5;
        }
        Self::new(probs)
    }

    pub fn k(&self) -> CoalitionSize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The mirror channel `q[z] = 1 - p[k-z]`; marking is preserved.
    pub fn mirrored(&self) -> Self {
        let kk = self.k.get();
        let mut probs: Vec<f64> = (0..=kk).map(|z| 1.0 - self.probs[kk - z]).collect();
        probs[0] = 0.0;
        probs[kk] = 1.0;
        Self { k: self.k, probs }
    }

    /// `max_z |p_z - (1 - p_{k-z})|`, zero for a Lemma-1-symmetric channel.
    pub fn symmetry_residual(&self) -> f64 {
        let kk = self.k.get();
        (0..=kk)
            .map(|z| (self.probs[z] - (1.0 - self.probs[kk - z])).abs())
            .fold(0.0, f64::max)
    }

    /// Average with the mirror channel; endpoints stay exactly 0 and 1.
    pub fn symmetrized(&self) -> Self {
        let kk = self.k.get();
        let mut probs: Vec<f64> = (0..=kk)
            .map(|z| 0.5 * (self.probs[z] + 1.0 - self.probs[kk - z]))
            .collect();
        probs[0] = 0.0;
        probs[kk] = 1.0;
        if kk % 2 == 0 {
            probs[kk / 2] = 0.5;
        }
        Self { k: self.k, probs }
    }
}

/// One support atom of a [`CodeDistribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportAtom {
    pub w: f64,
    pub weight: f64,
}

/// Finitely supported time-sharing distribution on the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CodeDistribution {
    atoms: Vec<SupportAtom>,
}

impl CodeDistribution {
    /// Minimal separation between distinct atoms.
    pub const MIN_SEPARATION: f64 = 1e-9;

    /// Tolerance on the weight normalization.
    pub const WEIGHT_TOLERANCE: f64 = 1e-12;

    pub fn new(mut atoms: Vec<SupportAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for a in &atoms {
            if !a.w.is_finite() || a.w <= 0.0 || a.w >= 1.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom w = {} outside (0, 1)",
                    a.w
                )));
            }
            if !a.weight.is_finite() || a.weight <= 0.0 || a.weight > 1.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {} outside (0, 1]",
                    a.weight
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > Self::WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        atoms.sort_by(|a, b| a.w.total_cmp(&b.w));
        for pair in atoms.windows(2) {
            if pair[1].w - pair[0].w < Self::MIN_SEPARATION {
                return Err(Error::InvalidDistribution(format!(
                    "atoms {} and {} closer than {}",
                    pair[0].w,
                    pair[1].w,
                    Self::MIN_SEPARATION
                )));
            }
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(w: f64) -> Result<Self> {
        Self::new(vec![SupportAtom { w, weight: 1.0 }])
    }

    pub fn atoms(&self) -> &[SupportAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Right-continuous CDF at `w`.
    pub fn cdf(&self, w: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.w <= w)
            .map(|a| a.weight)
            .sum()
    }

    /// Mirror-symmetry residual about `w = 1/2`: every atom must pair with an
    /// atom at `1 - w` of equal weight (an atom at 1/2 is self-paired). The
    /// residual is the worst position/weight mismatch over the best pairing.
    pub fn mirror_residual(&self) -> f64 {
        let n = self.atoms.len();
        let mut worst: f64 = 0.0;
        for a in &self.atoms {
            let target = 1.0 - a.w;
            // nearest mirrored atom
            let mut best = f64::INFINITY;
            let mut best_idx = 0;
            for (j, b) in self.atoms.iter().enumerate() {
                let d = (b.w - target).abs();
                if d < best {
                    best = d;
                    best_idx = j;
                }
            }
            let b = self.atoms[(best_idx).min(n - 1)];
            worst = worst.max(best).max((a.weight - b.weight).abs());
        }
        worst
    }

    /// Kolmogorov distance to a continuous CDF `f`, evaluated at the jumps.
    pub fn kolmogorov_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut below = 0.0;
        let mut worst: f64 = 0.0;
        for a in &self.atoms {
            let target = f(a.w);
            worst = worst.max((below - target).abs());
            below += a.weight;
            worst = worst.max((below - target).abs());
        }
        worst
    }
}

/// Binomial pmf `alpha_z(w) = C(k, z) w^z (1-w)^(k-z)` and, when requested,
/// its derivative in `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialWeights {
    pub alpha: Vec<f64>,
    pub dalpha_dw: Option<Vec<f64>>,
}

#[inline]
pub(crate) fn h2(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "h2 domain: {p}");
    let mut s = 0.0;
    if p > 0.0 {
        s -= p * p.log2();
    }
    let q = 1.0 - p;
    if q > 0.0 {
        s -= q * q.log2();
    }
    s
}

/// `h2'(y) = log2((1-y)/y)` for `y` in (0, 1).
#[inline]
pub(crate) fn h2_prime(y: f64) -> f64 {
    ((1.0 - y) / y).log2()
}

/// `h2''(y) = -1 / (y (1-y) ln 2)` for `y` in (0, 1).
#[inline]
pub(crate) fn h2_second(y: f64) -> f64 {
    -1.0 / (y * (1.0 - y) * LN_2)
}

/// Binary entropy `h2(p)` in bits, with the `0 log 0 = 0` convention.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary_entropy: p = {p} outside [0, 1]")));
    }
    Ok(h2(p))
}

/// Binary KL divergence `d2(p || q)` in bits.
///
/// `q` on the boundary is only admissible when `p = q`; otherwise the
/// divergence is infinite and an error is returned so callers must guard.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("kl_bernoulli: p = {p} outside [0, 1]")));
    }
    if !q.is_finite() || !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("kl_bernoulli: q = {q} outside [0, 1]")));
    }
    if p == q {
        return Ok(0.0);
    }
    if q <= 0.0 || q >= 1.0 {
        return Err(Error::InfiniteDivergence { p, q });
    }
    let mut d = 0.0;
    if p > 0.0 {
        d += p * (p / q).log2();
    }
    if p < 1.0 {
        d += (1.0 - p) * ((1.0 - p) / (1.0 - q)).log2();
    }
    Ok(d)
}

fn check_w(w: f64) -> Result<()> {
    if !w.is_finite() || !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("w = {w} outside [0, 1]")));
    }
    Ok(())
}

fn check_w_interior(w: f64) -> Result<()> {
    if !w.is_finite() || w <= 0.0 || w >= 1.0 {
        return Err(Error::Domain(format!("w = {w} outside (0, 1)")));
    }
    Ok(())
}

/// Binomial weights `alpha(w)`, optionally with `d alpha / d w`.
///
/// The derivative uses the identity `alpha_z'(w) w (1-w) = alpha_z(w) (z - kw)`
/// in the interior and one-sided limits at the endpoints.
pub fn binomial_weights(k: CoalitionSize, w: f64, with_derivative: bool) -> Result<BinomialWeights> {
    check_w(w)?;
    let alpha = binomial_pmf(k, w);
    let dalpha_dw = with_derivative.then(|| binomial_pmf_derivative(k, w, &alpha));
    Ok(BinomialWeights { alpha, dalpha_dw })
}

pub(crate) fn binomial_pmf(k: CoalitionSize, w: f64) -> Vec<f64> {
    let kk = k.get();
    let mut alpha = vec![0.0; kk + 1];
    if w == 0.0 {
        alpha[0] = 1.0;
        return alpha;
    }
    if w == 1.0 {
        alpha[kk] = 1.0;
        return alpha;
    }
    let q = 1.0 - w;
    if kk <= DIRECT_BINOMIAL_MAX_K {
        // C(k, z) is exact in u64 up to k = 25; accumulate powers directly.
        let mut wp = vec![0.0; kk + 1];
        let mut qp = vec![0.0; kk + 1];
        wp[0] = 1.0;
        qp[0] = 1.0;
        for i in 1..=kk {
            wp[i] = wp[i - 1] * w;
            qp[i] = qp[i - 1] * q;
        }
        let mut c = 1u64;
        for z in 0..=kk {
            alpha[z] = c as f64 * wp[z] * qp[kk - z];
            if z < kk {
                c = c * (kk - z) as u64 / (z + 1) as u64;
            }
        }
    } else {
        // Log-domain route to dodge overflow in the coefficients.
        let lw = w.ln();
        let lq = q.ln();
        let mut log_c = 0.0;
        for z in 0..=kk {
            alpha[z] = (log_c + z as f64 * lw + (kk - z) as f64 * lq).exp();
            if z < kk {
                log_c += ((kk - z) as f64 / (z + 1) as f64).ln();
            }
        }
    }
    alpha
}

fn binomial_pmf_derivative(k: CoalitionSize, w: f64, alpha: &[f64]) -> Vec<f64> {
    let kk = k.get();
    let mut d = vec![0.0; kk + 1];
    if w == 0.0 {
        d[0] = -(kk as f64);
        d[1] = kk as f64;
        return d;
    }
    if w == 1.0 {
        d[kk] = kk as f64;
        d[kk - 1] = -(kk as f64);
        return d;
    }
    let denom = w * (1.0 - w);
    for z in 0..=kk {
        d[z] = alpha[z] * (z as f64 - kk as f64 * w) / denom;
    }
    d
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn h2_slice(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| h2(x)).collect()
}

/// Payoff evaluation from precomputed pieces; hot path for grid scans.
#[inline]
pub(crate) fn payoff_from_parts(alpha: &[f64], probs: &[f64], h2_probs: &[f64]) -> f64 {
    h2(dot(alpha, probs)) - dot(alpha, h2_probs)
}

/// The payoff `C(w, p)` in bits, entropy form.
///
/// Marking forces the value 0 at `w = 0` and `w = 1`; those are returned
/// exactly rather than by limit evaluation.
pub fn payoff(w: f64, channel: &CollusionChannel) -> Result<f64> {
    check_w(w)?;
    if w == 0.0 || w == 1.0 {
        return Ok(0.0);
    }
    let alpha = binomial_pmf(channel.k(), w);
    let h2p = h2_slice(channel.probs());
    Ok(payoff_from_parts(&alpha, channel.probs(), &h2p))
}

/// The payoff as a binomial mixture of KL divergences; an independent
/// implementation kept for cross-validation of [`payoff`].
pub fn payoff_kl_form(w: f64, channel: &CollusionChannel) -> Result<f64> {
    check_w(w)?;
    if w == 0.0 || w == 1.0 {
        // the single surviving term is d2(p_z || p_z) = 0
        return Ok(0.0);
    }
    let alpha = binomial_pmf(channel.k(), w);
    let y_hat = dot(&alpha, channel.probs());
    let mut total = 0.0;
    for (z, &a) in alpha.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        total += a * kl_bernoulli(channel.probs()[z], y_hat)?;
    }
    Ok(total)
}

/// `d C(w, p) / d w` at interior `w`.
pub fn payoff_grad_w(w: f64, channel: &CollusionChannel) -> Result<f64> {
    check_w_interior(w)?;
    let weights = binomial_weights(channel.k(), w, true)?;
    let dalpha = weights.dalpha_dw.as_ref().expect("derivative requested");
    let y_hat = dot(&weights.alpha, channel.probs());
    let h2p = h2_slice(channel.probs());
    Ok(dot(dalpha, channel.probs()) * h2_prime(y_hat) - dot(dalpha, &h2p))
}

/// `d^2 C(w, p) / d w^2` at interior `w`; used for the maximizer test at
/// support atoms and to refine one-dimensional searches.
pub fn payoff_hess_w(w: f64, channel: &CollusionChannel) -> Result<f64> {
    check_w_interior(w)?;
    let k = channel.k();
    let kk = k.get() as f64;
    let alpha = binomial_pmf(k, w);
    let denom = w * (1.0 - w);
    let mut dalpha = vec![0.0; alpha.len()];
    let mut ddalpha = vec![0.0; alpha.len()];
    for (z, &a) in alpha.iter().enumerate() {
        let u = (z as f64 - kk * w) / denom;
        let du = (-kk * denom - (z as f64 - kk * w) * (1.0 - 2.0 * w)) / (denom * denom);
        dalpha[z] = a * u;
        ddalpha[z] = a * (u * u + du);
    }
    let y_hat = dot(&alpha, channel.probs());
    let dy = dot(&dalpha, channel.probs());
    let h2p = h2_slice(channel.probs());
    Ok(dot(&ddalpha, channel.probs()) * h2_prime(y_hat) + dy * dy * h2_second(y_hat)
        - dot(&ddalpha, &h2p))
}

/// Gradient of the payoff in the channel coordinates.
///
/// Entry `z` is `alpha_z(w) (h2'(y_hat) - h2'(p_z))`. The coordinates frozen
/// by marking (`z = 0` and `z = k`) are reported as 0 by convention so the
/// vector composes with box projections without special cases.
pub fn payoff_grad_p(w: f64, channel: &CollusionChannel) -> Result<Vec<f64>> {
    check_w_interior(w)?;
    let kk = channel.k().get();
    for z in 1..kk {
        let p = channel.probs()[z];
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::BoundaryGradient { index: z, value: p });
        }
    }
    let alpha = binomial_pmf(channel.k(), w);
    let y_hat = dot(&alpha, channel.probs());
    let base = h2_prime(y_hat);
    let mut grad = vec![0.0; kk + 1];
    for z in 1..kk {
        grad[z] = alpha[z] * (base - h2_prime(channel.probs()[z]));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Independent combinatorial oracle: Pascal's triangle times plain powers.
    fn binomial_oracle(k: usize, w: f64) -> Vec<f64> {
        let mut row = vec![1.0f64];
        for _ in 0..k {
            let mut next = vec![1.0; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        (0..=k)
            .map(|z| row[z] * w.powi(z as i32) * (1.0 - w).powi((k - z) as i32))
            .collect()
    }

    fn channel(probs: &[f64]) -> CollusionChannel {
        CollusionChannel::new(probs.to_vec()).unwrap()
    }

    fn random_channel(k: usize, rng: &mut SplitMix64) -> CollusionChannel {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        for z in 1..k {
            probs[z] = rng.next_f64();
        }
        channel(&probs)
    }

    #[test]
    fn entropy_anchors() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // h2(1/4) = 2 - (3/4) log2 3, an independent closed-form route
        let expected = 2.0 - 0.75 * 3.0f64.log2();
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.811278124459133, epsilon = 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn kl_anchors() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(kl_bernoulli(0.0, 0.5).unwrap(), 1.0);
        // d2(1/2 || 1/4) = 1 - (1/2) log2 3
        let expected = 1.0 - 0.5 * 3.0f64.log2();
        assert_abs_diff_eq!(kl_bernoulli(0.5, 0.25).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.207518749639422, epsilon = 1e-15);
        // boundary q is fine only when p == q
        assert_eq!(kl_bernoulli(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(kl_bernoulli(1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            kl_bernoulli(0.3, 0.0),
            Err(Error::InfiniteDivergence { .. })
        ));
        assert!(matches!(
            kl_bernoulli(0.3, 1.0),
            Err(Error::InfiniteDivergence { .. })
        ));
        assert!(kl_bernoulli(0.5, 0.5).unwrap() == 0.0);
    }

    #[test]
    fn kl_nonnegative_random() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..2000 {
            let p = rng.next_f64();
            let q = 0.001 + 0.998 * rng.next_f64();
            let d = kl_bernoulli(p, q).unwrap();
            assert!(d >= 0.0, "d2({p}||{q}) = {d}");
            if (p - q).abs() > 1e-12 {
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn binomial_weight_anchors() {
        let k2 = CoalitionSize::new(2).unwrap();
        let k3 = CoalitionSize::new(3).unwrap();
        let w = binomial_weights(k2, 0.5, false).unwrap();
        assert_eq!(w.alpha, vec![0.25, 0.5, 0.25]);
        let w = binomial_weights(k3, 0.0, true).unwrap();
        assert_eq!(w.alpha, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(w.dalpha_dw.unwrap(), vec![-3.0, 3.0, 0.0, 0.0]);
        let w = binomial_weights(k3, 1.0, true).unwrap();
        assert_eq!(w.dalpha_dw.unwrap(), vec![0.0, 0.0, -3.0, 3.0]);
        let w = binomial_weights(k2, 0.25, false).unwrap();
        for (a, b) in w.alpha.iter().zip(binomial_oracle(2, 0.25)) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.alpha[0], 0.5625, epsilon = 1e-15);
        assert_abs_diff_eq!(w.alpha[1], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(w.alpha[2], 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn binomial_log_route_matches_oracle() {
        // k = 30 exercises the log-domain branch; Pascal row is exact in f64.
        let k = CoalitionSize::new(30).unwrap();
        for &w in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            let got = binomial_weights(k, w, true).unwrap();
            let want = binomial_oracle(30, w);
            for z in 0..=30 {
                assert_abs_diff_eq!(got.alpha[z], want[z], epsilon = 1e-13);
            }
            let sum: f64 = got.alpha.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            let dsum: f64 = got.dalpha_dw.unwrap().iter().sum();
            assert_abs_diff_eq!(dsum, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn binomial_derivative_identity() {
        let mut rng = SplitMix64::new(11);
        for k in [1usize, 2, 3, 7, 26, 37] {
            let ks = CoalitionSize::new(k).unwrap();
            for _ in 0..50 {
                let w = 0.01 + 0.98 * rng.next_f64();
                let bw = binomial_weights(ks, w, true).unwrap();
                let d = bw.dalpha_dw.unwrap();
                let sum: f64 = bw.alpha.iter().sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
                assert!(d.iter().sum::<f64>().abs() < 1e-10);
                for z in 0..=k {
                    let lhs = d[z] * w * (1.0 - w);
                    let rhs = bw.alpha[z] * (z as f64 - k as f64 * w);
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn payoff_anchors() {
        let c = channel(&[0.0, 0.5, 1.0]);
        assert_eq!(payoff(0.0, &c).unwrap(), 0.0);
        assert_eq!(payoff(1.0, &c).unwrap(), 0.0);
        // h2(1/2) - (1/2) h2(1/2) = 1/2
        assert_abs_diff_eq!(payoff(0.5, &c).unwrap(), 0.5, epsilon = 1e-15);
        // k = 1: Y = X, payoff is h2(w)
        let c1 = channel(&[0.0, 1.0]);
        assert_abs_diff_eq!(payoff(0.5, &c1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(payoff(0.3, &c1).unwrap(), h2(0.3), epsilon = 1e-15);
    }

    #[test]
    fn kl_form_anchors() {
        let c = channel(&[0.0, 0.5, 1.0]);
        // 1/4 d2(0||1/2) + 1/2 d2(1/2||1/2) + 1/4 d2(1||1/2), assembled from
        // the divergence routine directly
        let by_terms = 0.25 * kl_bernoulli(0.0, 0.5).unwrap()
            + 0.5 * kl_bernoulli(0.5, 0.5).unwrap()
            + 0.25 * kl_bernoulli(1.0, 0.5).unwrap();
        assert_abs_diff_eq!(by_terms, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(payoff_kl_form(0.5, &c).unwrap(), by_terms, epsilon = 1e-15);
        assert_eq!(payoff_kl_form(0.0, &c).unwrap(), 0.0);
        let c1 = channel(&[0.0, 1.0]);
        assert_abs_diff_eq!(payoff_kl_form(0.3, &c1).unwrap(), h2(0.3), epsilon = 1e-14);
    }

    #[test]
    fn grad_w_anchors() {
        let c = channel(&[0.0, 0.5, 1.0]);
        assert_abs_diff_eq!(payoff_grad_w(0.5, &c).unwrap(), 0.0, epsilon = 1e-12);
        // k = 1 payoff is h2(w); h2'(1/4) = log2 3
        let c1 = channel(&[0.0, 1.0]);
        assert_abs_diff_eq!(
            payoff_grad_w(0.25, &c1).unwrap(),
            3.0f64.log2(),
            epsilon = 1e-13
        );
        assert!(payoff_grad_w(0.0, &c).is_err());
        assert!(payoff_grad_w(1.0, &c).is_err());
    }

    #[test]
    fn grad_p_anchors() {
        let c = channel(&[0.0, 0.5, 1.0]);
        let g = payoff_grad_p(0.5, &c).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-12);
        // y_hat = 1/4 at w = 1/4, so entry 1 is (3/8) (log2 3 - 0)
        let g = payoff_grad_p(0.25, &c).unwrap();
        assert_abs_diff_eq!(g[1], 0.375 * 3.0f64.log2(), epsilon = 1e-13);
        // boundary coordinate
        let cb = channel(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            payoff_grad_p(0.5, &cb),
            Err(Error::BoundaryGradient { index: 1, .. })
        ));
    }

    #[test]
    fn grads_match_central_differences() {
        let mut rng = SplitMix64::new(23);
        let step = 1e-6;
        for k in 1..=10usize {
            for _ in 0..20 {
                let c = {
                    // keep interior coordinates away from 0/1 so the p-gradient exists
                    let mut probs = vec![0.0; k + 1];
                    probs[k] = 1.0;
                    for z in 1..k {
                        probs[z] = 0.05 + 0.9 * rng.next_f64();
                    }
                    channel(&probs)
                };
                let w = 0.05 + 0.9 * rng.next_f64();
                let fd = (payoff(w + step, &c).unwrap() - payoff(w - step, &c).unwrap())
                    / (2.0 * step);
                assert_abs_diff_eq!(payoff_grad_w(w, &c).unwrap(), fd, epsilon = 1e-5);

                let fd2 = (payoff_grad_w(w + step, &c).unwrap()
                    - payoff_grad_w(w - step, &c).unwrap())
                    / (2.0 * step);
                assert_abs_diff_eq!(payoff_hess_w(w, &c).unwrap(), fd2, epsilon = 1e-4);

                let g = payoff_grad_p(w, &c).unwrap();
                for z in 1..k {
                    let mut hi = c.probs().to_vec();
                    let mut lo = c.probs().to_vec();
                    hi[z] += step;
                    lo[z] -= step;
                    let fd = (payoff(w, &channel(&hi)).unwrap()
                        - payoff(w, &channel(&lo)).unwrap())
                        / (2.0 * step);
                    assert_abs_diff_eq!(g[z], fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn interleaving_grad_w_matches_difference_oracle() {
        let c = channel(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let step = 1e-6;
        let fd =
            (payoff(0.3 + step, &c).unwrap() - payoff(0.3 - step, &c).unwrap()) / (2.0 * step);
        assert_abs_diff_eq!(payoff_grad_w(0.3, &c).unwrap(), fd, epsilon = 1e-5);
    }

    #[test]
    fn channel_validation() {
        assert!(CollusionChannel::new(vec![0.0]).is_err());
        assert!(CollusionChannel::new(vec![0.1, 1.0]).is_err());
        assert!(CollusionChannel::new(vec![0.0, 0.9]).is_err());
        assert!(CollusionChannel::new(vec![0.0, 1.5, 1.0]).is_err());
        let c = channel(&[0.0, 0.2, 0.7, 1.0]);
        assert_eq!(c.k().get(), 3);
        let m = c.mirrored();
        assert_abs_diff_eq!(m.probs()[1], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.probs()[2], 0.8, epsilon = 1e-15);
        assert_eq!(m.probs()[0], 0.0);
        assert_eq!(m.probs()[3], 1.0);
        assert!(c.symmetry_residual() > 0.0);
        assert_abs_diff_eq!(c.symmetrized().symmetry_residual(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn symmetric_builder() {
        let k4 = CoalitionSize::new(4).unwrap();
        let c = CollusionChannel::from_free_symmetric(k4, &[0.2]).unwrap();
        assert_eq!(c.probs(), &[0.0, 0.2, 0.5, 0.8, 1.0]);
        let k2 = CoalitionSize::new(2).unwrap();
        let c = CollusionChannel::from_free_symmetric(k2, &[]).unwrap();
        assert_eq!(c.probs(), &[0.0, 0.5, 1.0]);
        let k1 = CoalitionSize::new(1).unwrap();
        let c = CollusionChannel::from_free_symmetric(k1, &[]).unwrap();
        assert_eq!(c.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn distribution_validation() {
        assert!(CodeDistribution::new(vec![]).is_err());
        assert!(CodeDistribution::point_mass(0.0).is_err());
        assert!(CodeDistribution::point_mass(0.5).is_ok());
        // weights must normalize
        assert!(CodeDistribution::new(vec![
            SupportAtom { w: 0.3, weight: 0.5 },
            SupportAtom { w: 0.7, weight: 0.4 },
        ])
        .is_err());
        // atoms must be separated
        assert!(CodeDistribution::new(vec![
            SupportAtom { w: 0.5, weight: 0.5 },
            SupportAtom { w: 0.5 + 1e-10, weight: 0.5 },
        ])
        .is_err());
        let d = CodeDistribution::new(vec![
            SupportAtom { w: 0.7, weight: 0.25 },
            SupportAtom { w: 0.3, weight: 0.75 },
        ])
        .unwrap();
        // sorted on construction
        assert_eq!(d.atoms()[0].w, 0.3);
        assert_abs_diff_eq!(d.cdf(0.3), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(0.69), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(0.7), 1.0, epsilon = 1e-15);
        assert!(d.mirror_residual() > 0.4);
        let sym = CodeDistribution::new(vec![
            SupportAtom { w: 0.3, weight: 0.25 },
            SupportAtom { w: 0.7, weight: 0.25 },
            SupportAtom { w: 0.5, weight: 0.5 },
        ])
        .unwrap();
        assert!(sym.mirror_residual() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

        #[test]
        fn payoff_forms_agree_and_are_bounded(
            k in 1usize..=10,
            w in 1e-3f64..0.999,
            seed in 0u64..u64::MAX,
        ) {
            let mut rng = SplitMix64::new(seed);
            for _ in 0..20 {
                let c = random_channel(k, &mut rng);
                let a = payoff(w, &c).unwrap();
                let b = payoff_kl_form(w, &c).unwrap();
                prop_assert!((a - b).abs() < 1e-12, "entropy {a} vs kl {b}");
                let alpha = binomial_pmf(c.k(), w);
                let y_hat: f64 = alpha.iter().zip(c.probs()).map(|(x, y)| x * y).sum();
                prop_assert!(a >= -1e-15);
                prop_assert!(a <= h2(y_hat) + 1e-15);
                prop_assert!(h2(y_hat) <= 1.0 + 1e-15);
            }
        }

        #[test]
        fn payoff_symmetry_covariance(
            k in 1usize..=10,
            w in 1e-3f64..0.999,
            seed in 0u64..u64::MAX,
        ) {
            let mut rng = SplitMix64::new(seed);
            let c = random_channel(k, &mut rng);
            let a = payoff(w, &c).unwrap();
            let b = payoff(1.0 - w, &c.mirrored()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn payoff_convex_in_channel(
            k in 1usize..=10,
            w in 1e-3f64..0.999,
            lambda in 1e-6f64..1.0,
            seed in 0u64..u64::MAX,
        ) {
            let mut rng = SplitMix64::new(seed);
            let c1 = random_channel(k, &mut rng);
            let c2 = random_channel(k, &mut rng);
            let mix: Vec<f64> = c1
                .probs()
                .iter()
                .zip(c2.probs())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let mut mix = mix;
            mix[0] = 0.0;
            mix[k] = 1.0;
            let cm = CollusionChannel::new(mix).unwrap();
            let lhs = payoff(w, &cm).unwrap();
            let rhs = lambda * payoff(w, &c1).unwrap() + (1.0 - lambda) * payoff(w, &c2).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
