//! Independent brute-force solver for small coalitions.
//!
//! Discretizes both strategy spaces — a dense grid over the time-sharing
//! bias and a product grid over the free channel coordinates — and solves
//! the resulting finite matrix game. Column generation keeps the working
//! matrix small; the reported gap is certified by exact best-response scans
//! over the full grids, so the result is ground truth for the discretized
//! game regardless of how the subgames were solved.
//!
//! The channel grid is exponential in `k`, so only `k <= 3` is supported.

use crate::error::{Error, Result};
use crate::matrix_game::solve_matrix_game;
use crate::payoff::{binomial_pmf, h2, CoalitionSize, CollusionChannel};

/// Endpoint clip on the `w` grid; the payoff vanishes at the endpoints so
/// clipping cannot hide the optimum.
const W_CLIP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Nodes on the `w` grid over `[W_CLIP, 1 - W_CLIP]`.
    pub w_nodes: usize,
    /// Nodes per free channel coordinate.
    pub p_nodes: usize,
    /// Certified duality-gap target on the game-value scale.
    pub gap_tol: f64,
    /// Column-generation round limit.
    pub max_rounds: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            w_nodes: 401,
            p_nodes: 201,
            gap_tol: 1e-4,
            max_rounds: 64,
        }
    }
}

/// The discretized game: `w` rows against channel-grid columns. Payoff
/// entries are computed on demand (the full matrix for `k = 3` at doubled
/// grids would not fit comfortably in memory).
#[derive(Debug, Clone)]
pub struct DiscretizedGame {
    k: CoalitionSize,
    w_nodes: Vec<f64>,
    p_levels: Vec<f64>,
    alphas: Vec<Vec<f64>>,
    h2_levels: Vec<f64>,
}

impl DiscretizedGame {
    pub fn new(k: CoalitionSize, options: &OracleOptions) -> Result<Self> {
        if k.get() > 3 {
            return Err(Error::UnsupportedCoalition(k.get()));
        }
        if options.w_nodes < 3 || options.p_nodes < 2 {
            return Err(Error::Domain("oracle grids too small".into()));
        }
        let n = options.w_nodes;
        let w_nodes: Vec<f64> = (0..n)
            .map(|i| W_CLIP + i as f64 * (1.0 - 2.0 * W_CLIP) / (n - 1) as f64)
            .collect();
        let p = options.p_nodes;
        let p_levels: Vec<f64> = (0..p).map(|j| j as f64 / (p - 1) as f64).collect();
        let alphas = w_nodes.iter().map(|&w| binomial_pmf(k, w)).collect();
        let h2_levels = p_levels.iter().map(|&t| h2(t)).collect();
        Ok(Self {
            k,
            w_nodes,
            p_levels,
            alphas,
            h2_levels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.w_nodes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.p_levels.len().pow(self.free_coords() as u32)
    }

    pub fn w_nodes(&self) -> &[f64] {
        &self.w_nodes
    }

    fn free_coords(&self) -> usize {
        self.k.get() - 1
    }

    fn col_digits(&self, col: usize, digits: &mut [usize]) {
        let p = self.p_levels.len();
        let mut c = col;
        for d in digits.iter_mut() {
            *d = c % p;
            c /= p;
        }
    }

    /// The channel encoded by a column index.
    pub fn channel(&self, col: usize) -> CollusionChannel {
        let kk = self.k.get();
        let mut digits = vec![0usize; self.free_coords()];
        self.col_digits(col, &mut digits);
        let mut probs = vec![0.0; kk + 1];
        probs[kk] = 1.0;
        for (z, &d) in digits.iter().enumerate() {
            probs[z + 1] = self.p_levels[d];
        }
        CollusionChannel::new(probs).expect("grid channel is valid")
    }

    /// Payoff of row `row` against column `col`.
    pub fn payoff(&self, row: usize, col: usize) -> f64 {
        let kk = self.k.get();
        let alpha = &self.alphas[row];
        let mut digits = [0usize; 2];
        self.col_digits(col, &mut digits[..kk - 1]);
        let mut y_hat = alpha[kk];
        let mut mix_h2 = 0.0;
        for z in 1..kk {
            let level = digits[z - 1];
            y_hat += alpha[z] * self.p_levels[level];
            mix_h2 += alpha[z] * self.h2_levels[level];
        }
        h2(y_hat) - mix_h2
    }

    /// Column index closest to the interleaving attack.
    fn interleaving_col(&self) -> usize {
        let kk = self.k.get();
        let p = self.p_levels.len();
        let mut col = 0;
        for z in (1..kk).rev() {
            let level = ((z as f64 / kk as f64) * (p - 1) as f64).round() as usize;
            col = col * p + level;
        }
        col
    }
}

/// Ground-truth solution of the discretized game.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Game value divided by `k` (midpoint of the certified bracket).
    pub capacity: f64,
    /// Certified duality gap on the game-value scale.
    pub gap: f64,
    /// Mixed strategy over `w` grid nodes (atoms above 1e-9).
    pub w_strategy: Vec<(f64, f64)>,
    /// Best pure grid channel found for the coalition.
    pub channel: CollusionChannel,
    pub rounds: usize,
}

/// Solves the discretized game to a certified gap below `options.gap_tol`.
pub fn oracle_solve(k: CoalitionSize, options: &OracleOptions) -> Result<OracleSolution> {
    let game = DiscretizedGame::new(k, options)?;
    let n_rows = game.n_rows();
    let n_cols = game.n_cols();

    let mut active_cols = vec![game.interleaving_col()];
    let mut active_rows = {
        let c0 = active_cols[0];
        let best = (0..n_rows)
            .max_by(|&a, &b| game.payoff(a, c0).total_cmp(&game.payoff(b, c0)))
            .expect("rows nonempty");
        vec![best]
    };

    let mut subgame_iters = 50_000usize;
    let mut best: Option<(f64, f64, Vec<f64>, usize)> = None; // (upper, lower, row strategy, argmin col)

    for round in 1..=options.max_rounds {
        let submatrix: Vec<Vec<f64>> = active_rows
            .iter()
            .map(|&i| active_cols.iter().map(|&j| game.payoff(i, j)).collect())
            .collect();
        let (x, y, _) = solve_matrix_game(&submatrix, subgame_iters, options.gap_tol / 20.0);

        // exact best responses against the full grids certify the bracket
        let mut upper = f64::NEG_INFINITY;
        let mut best_row = 0;
        for i in 0..n_rows {
            let v: f64 = active_cols
                .iter()
                .zip(&y)
                .map(|(&j, &yj)| yj * game.payoff(i, j))
                .sum();
            if v > upper {
                upper = v;
                best_row = i;
            }
        }
        let mut lower = f64::INFINITY;
        let mut best_col = 0;
        for j in 0..n_cols {
            let v: f64 = active_rows
                .iter()
                .zip(&x)
                .map(|(&i, &xi)| xi * game.payoff(i, j))
                .sum();
            if v < lower {
                lower = v;
                best_col = j;
            }
        }

        if best
            .as_ref()
            .is_none_or(|(u, l, _, _)| upper - lower < u - l)
        {
            best = Some((upper, lower, x.clone(), best_col));
        }
        let (u, l, _, _) = *best.as_ref().unwrap();
        if u - l < options.gap_tol {
            let (upper, lower, x, col) = best.unwrap();
            let mut w_strategy: Vec<(f64, f64)> = active_rows
                .iter()
                .zip(&x)
                .filter(|&(_, &xi)| xi > 1e-9)
                .map(|(&i, &xi)| (game.w_nodes[i], xi))
                .collect();
            w_strategy.sort_by(|a, b| a.0.total_cmp(&b.0));
            return Ok(OracleSolution {
                capacity: 0.5 * (upper + lower) / k.get() as f64,
                gap: upper - lower,
                w_strategy,
                channel: game.channel(col),
                rounds: round,
            });
        }

        let mut grew = false;
        if !active_rows.contains(&best_row) {
            active_rows.push(best_row);
            grew = true;
        }
        if !active_cols.contains(&best_col) {
            active_cols.push(best_col);
            grew = true;
        }
        if !grew {
            // the bracket is limited by subgame accuracy, not by the grids
            subgame_iters = (subgame_iters * 2).min(4_000_000);
        }
    }

    let (upper, lower, _, _) = best.expect("at least one round ran");
    Err(Error::GateFailed {
        what: format!("oracle column generation for k = {k}"),
        change: upper - lower,
    })
}
