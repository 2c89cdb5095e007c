//! Runtime correctness harnesses: conjugacy grid oracles for the scalar
//! conditionals and Monte Carlo prior diagnostics for the rank indicators.
//!
//! The grid oracle never touches the model's algebra paths: means are rebuilt
//! with naive loops directly from the parameter values, so a bug in the
//! sampler or coefficient construction cannot cancel out of the comparison.

use crate::config::ModelConfig;
use crate::dataset::{MultiviewDataset, View, ViewKind};
use crate::dist::{log_inverse_gamma_pdf, Rng};
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::sampler::{
    draw_auxiliary, draw_intercept, draw_node_density, draw_noise_variance,
    geweke::draw_prior_state, GammaCache,
};
use crate::state::{ModelDims, ParameterState};

const LN_2PI: f64 = 1.8378770664093453;

/// One conditional's empirical-vs-grid comparison.
#[derive(Debug, Clone)]
pub struct ConjugacyRow {
    pub name: String,
    pub max_cdf_gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConjugacyReport {
    pub rows: Vec<ConjugacyRow>,
    pub n_draws: usize,
    pub grid_points: usize,
}

impl ConjugacyReport {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.max_cdf_gap).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Mu(usize),
    Sigma2(usize),
    Alpha(usize, usize),
    Eta(usize),
}

impl Target {
    fn name(&self) -> String {
        match self {
            Target::Mu(m) => format!("mu_{}", m + 1),
            Target::Sigma2(m) => format!("sigma2_{}", m + 1),
            Target::Alpha(m, a) => format!("alpha_{}_{}", a + 1, m + 1),
            Target::Eta(p) => format!("eta_{}", p + 1),
        }
    }
}

/// Naive per-cell mean: mu + sum_p x * (sum_r lambda beta beta) + aux.
fn naive_mean(
    state: &ParameterState,
    data: &MultiviewDataset,
    es: &EdgeSet,
    i: usize,
    m: usize,
    e: usize,
) -> f64 {
    let (k1, k2) = es.pair(e);
    let mut u = state.mu[m];
    for p in 0..state.dims.key {
        let mut g = 0.0;
        for r in 0..state.dims.rank {
            let col = m * state.dims.rank + r;
            g += f64::from(state.lambda_at(p, m, r)) * state.beta[p][(k1, col)] * state.beta[p][(k2, col)];
        }
        u += data.x(i, p) * g;
    }
    for a in 0..state.dims.aux {
        u += data.x_aux(i, a) * state.alpha_at(m, a);
    }
    u
}

/// Unnormalized log posterior of one scalar conditional, by brute force:
/// log prior(theta) + full log likelihood with theta substituted.
fn naive_log_posterior(
    base: &ParameterState,
    data: &MultiviewDataset,
    config: &ModelConfig,
    target: Target,
    theta: f64,
) -> f64 {
    let mut state = base.clone();
    let prior = match target {
        Target::Mu(m) => {
            state.mu[m] = theta;
            -0.5 * theta * theta
        }
        Target::Sigma2(m) => {
            if theta <= 0.0 {
                return f64::NEG_INFINITY;
            }
            state.sigma2[m] = theta;
            log_inverse_gamma_pdf(theta, config.a_sigma, config.b_sigma)
        }
        Target::Alpha(m, a) => {
            state.alpha[m * state.dims.aux + a] = theta;
            -0.5 * theta * theta
        }
        Target::Eta(p) => {
            if theta <= 0.0 || theta >= 1.0 {
                return f64::NEG_INFINITY;
            }
            // Beta(a, b) prior and Bernoulli likelihood of the indicators;
            // the edge data is independent of eta given xi.
            let (a_eta, b_eta) = (config.a_eta, config.b_eta);
            let log_prior = (a_eta - 1.0) * theta.ln() + (b_eta - 1.0) * (1.0 - theta).ln();
            let mut ll = 0.0;
            for k in 0..state.dims.nodes {
                ll += if state.xi[p][k] {
                    theta.ln()
                } else {
                    (1.0 - theta).ln()
                };
            }
            return log_prior + ll;
        }
    };
    let es = data.edge_set();
    let mut ll = 0.0;
    for m in 0..data.n_views() {
        let s2 = state.sigma2[m];
        for i in 0..data.n() {
            for e in 0..data.n_edges() {
                let u = naive_mean(&state, data, &es, i, m, e);
                let resid = data.edges(i, m)[e] - u;
                ll += -0.5 * (LN_2PI + s2.ln()) - resid * resid / (2.0 * s2);
            }
        }
    }
    prior + ll
}

/// Max |empirical CDF - grid CDF| over the grid.
fn max_cdf_gap(draws: &mut [f64], grid: &[f64], log_post: &[f64]) -> f64 {
    draws.sort_by(f64::total_cmp);
    let max_lp = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = log_post.iter().map(|&lp| (lp - max_lp).exp()).collect();
    let mut cdf = vec![0.0; grid.len()];
    for j in 1..grid.len() {
        cdf[j] = cdf[j - 1] + 0.5 * (dens[j - 1] + dens[j]) * (grid[j] - grid[j - 1]);
    }
    let total = cdf[grid.len() - 1];
    let n = draws.len() as f64;
    let mut gap: f64 = 0.0;
    let mut idx = 0usize;
    for j in 0..grid.len() {
        while idx < draws.len() && draws[idx] <= grid[j] {
            idx += 1;
        }
        let emp = idx as f64 / n;
        gap = gap.max((cdf[j] / total - emp).abs());
    }
    gap
}

fn sample_stats(draws: &[f64]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// The fixed tiny instance all conjugacy checks run on:
/// n=2, K=3, M=2, R=1, P=1, one auxiliary predictor.
fn tiny_instance(seed: u64) -> Result<(MultiviewDataset, ParameterState, ModelConfig)> {
    let (n, nodes, views) = (2usize, 3usize, 2usize);
    let config = ModelConfig {
        r: 1,
        ..ModelConfig::default()
    };
    let dims = ModelDims {
        nodes,
        views,
        key: 1,
        aux: 1,
        rank: 1,
    };
    let mut rng = Rng::for_stream(seed, 0);
    let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let xa: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let mut state = draw_prior_state(&dims, &config, &mut rng)?;
    // A mixed activation pattern with nonzero coefficients everywhere else
    // exercises every residual path; node 2 stays inactive for the eta check.
    state.xi[0] = vec![true, false, true];
    for k in 0..nodes {
        let v = if state.xi[0][k] {
            0.5 + rng.uniform()
        } else {
            0.0
        };
        state.beta[0][(k, 0)] = v;
        state.beta[0][(k, 1)] = v - 0.2 * f64::from(u8::from(state.xi[0][k]));
    }
    state.lambda[0] = vec![1, 1];
    state.sigma2 = vec![0.8, 1.3];
    // Data drawn from the model at the fixed state so residuals are moderate.
    let q = EdgeSet::new(nodes).len();
    let es = EdgeSet::new(nodes);
    let shell = MultiviewDataset::new(
        n,
        nodes,
        (0..views)
            .map(|_| View {
                kind: ViewKind::Continuous,
                weights: vec![0.0; n * q],
            })
            .collect(),
        x.clone(),
        1,
        xa.clone(),
        1,
    )?;
    let mut view_data = Vec::with_capacity(views);
    for m in 0..views {
        let mut weights = Vec::with_capacity(n * q);
        for i in 0..n {
            for e in 0..q {
                let u = naive_mean(&state, &shell, &es, i, m, e);
                weights.push(u + state.sigma2[m].sqrt() * rng.standard_normal());
            }
        }
        view_data.push(View {
            kind: ViewKind::Continuous,
            weights,
        });
    }
    let data = MultiviewDataset::new(n, nodes, view_data, x, 1, xa, 1)?;
    Ok((data, state, config))
}

/// Grid-oracle check of every scalar conditional (intercepts, noise
/// variances, auxiliaries, node density) on the tiny instance.
pub fn conjugacy_check(n_draws: usize, grid_points: usize, seed: u64) -> Result<ConjugacyReport> {
    if n_draws < 1000 || grid_points < 3 {
        return Err(Error::Config(
            "conjugacy check needs >= 1000 draws and >= 3 grid points".into(),
        ));
    }
    let (data, state, config) = tiny_instance(seed)?;
    let gammas = GammaCache::new(&state)?;
    let targets = [
        Target::Mu(0),
        Target::Mu(1),
        Target::Sigma2(0),
        Target::Sigma2(1),
        Target::Alpha(0, 0),
        Target::Alpha(1, 0),
        Target::Eta(0),
    ];
    let rows = crate::exec::map_indexed(targets.len(), |t| -> Result<ConjugacyRow> {
        let target = targets[t];
        let mut rng = Rng::for_stream(seed, 10 + t as u64);
        let mut draws = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let v = match target {
                Target::Mu(m) => draw_intercept(&data, &state, &gammas, m, &mut rng),
                Target::Sigma2(m) => draw_noise_variance(
                    &data,
                    &state,
                    &gammas,
                    m,
                    config.a_sigma,
                    config.b_sigma,
                    &mut rng,
                )?,
                Target::Alpha(m, a) => draw_auxiliary(&data, &state, &gammas, m, a, &mut rng),
                Target::Eta(p) => {
                    draw_node_density(&state, p, config.a_eta, config.b_eta, &mut rng)?
                }
            };
            draws.push(v);
        }
        let (mean, sd) = sample_stats(&draws);
        let mut lo = mean - 8.0 * sd;
        let mut hi = mean + 8.0 * sd;
        match target {
            Target::Sigma2(_) => lo = lo.max(1e-12),
            Target::Eta(_) => {
                lo = lo.max(1e-9);
                hi = hi.min(1.0 - 1e-9);
            }
            _ => {}
        }
        let grid: Vec<f64> = (0..grid_points)
            .map(|j| lo + (hi - lo) * j as f64 / (grid_points - 1) as f64)
            .collect();
        let log_post: Vec<f64> = grid
            .iter()
            .map(|&g| naive_log_posterior(&state, &data, &config, target, g))
            .collect();
        Ok(ConjugacyRow {
            name: target.name(),
            max_cdf_gap: max_cdf_gap(&mut draws, &grid, &log_post),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ConjugacyReport {
        rows,
        n_draws,
        grid_points,
    })
}

/// One rank's E|lambda| comparison.
#[derive(Debug, Clone)]
pub struct AbsLambdaRow {
    pub rank: usize,
    pub estimate: f64,
    pub analytic: f64,
    pub std_error: f64,
}

/// Monte Carlo prior diagnostics for the rank-indicator prior.
#[derive(Debug, Clone)]
pub struct PriorDiagnostics {
    pub rank: usize,
    pub omega: f64,
    pub n_draws: usize,
    /// P(lambda^(1) = ... = lambda^(R) = 1) under the prior.
    pub all_ones_estimate: f64,
    /// prod_r 1/(2 + r^omega)
    pub all_ones_analytic: f64,
    pub all_ones_std_error: f64,
    /// 1/(2 + R^omega)^R
    pub all_ones_lower_bound: f64,
    pub abs_lambda: Vec<AbsLambdaRow>,
}

impl PriorDiagnostics {
    /// All estimates within `z` standard errors of their analytic values and
    /// the all-ones probability above its lower bound.
    pub fn passes(&self, z: f64) -> bool {
        let all_ones_ok = (self.all_ones_estimate - self.all_ones_analytic).abs()
            <= z * self.all_ones_std_error
            && self.all_ones_estimate >= self.all_ones_lower_bound;
        all_ones_ok
            && self
                .abs_lambda
                .iter()
                .all(|row| (row.estimate - row.analytic).abs() <= z * row.std_error)
    }
}

/// Estimate the prior probability that every rank stays active with
/// lambda = +1, and E|lambda| per rank, against their analytic values.
pub fn prior_diagnostics(rank: usize, omega: f64, n_draws: usize, seed: u64) -> Result<PriorDiagnostics> {
    if rank == 0 || !(omega > 1.0) {
        return Err(Error::Config(format!(
            "prior diagnostics need rank >= 1 and omega > 1 (got {rank}, {omega})"
        )));
    }
    let mut rng = Rng::from_seed(seed);
    let mut all_ones = 0usize;
    let mut abs_sum = vec![0.0f64; rank];
    for _ in 0..n_draws {
        let mut ones = true;
        for r in 0..rank {
            let alpha = [((r + 1) as f64).powf(omega), 1.0, 1.0];
            let pi = crate::dist::sample_dirichlet(&alpha, &mut rng)?;
            let branch = crate::dist::sample_categorical_log(
                &[pi[0].ln(), pi[1].ln(), pi[2].ln()],
                &mut rng,
            );
            let lam = [0i8, 1, -1][branch];
            ones &= lam == 1;
            abs_sum[r] += f64::from(lam.abs());
        }
        all_ones += usize::from(ones);
    }
    let n = n_draws as f64;
    let p_hat = all_ones as f64 / n;
    let analytic: f64 = (1..=rank).map(|r| 1.0 / (2.0 + (r as f64).powf(omega))).product();
    let bound = (2.0 + (rank as f64).powf(omega)).powi(-(rank as i32));
    let abs_lambda = (0..rank)
        .map(|r| {
            let est = abs_sum[r] / n;
            AbsLambdaRow {
                rank: r + 1,
                estimate: est,
                analytic: 2.0 / (2.0 + ((r + 1) as f64).powf(omega)),
                std_error: (est * (1.0 - est) / n).sqrt(),
            }
        })
        .collect();
    Ok(PriorDiagnostics {
        rank,
        omega,
        n_draws,
        all_ones_estimate: p_hat,
        all_ones_analytic: analytic,
        all_ones_std_error: (p_hat * (1.0 - p_hat) / n).sqrt(),
        all_ones_lower_bound: bound,
        abs_lambda,
    })
}
