//! Gibbs sampler: full-conditional updates, the chain runner, and the
//! correctness harnesses (Geweke joint-distribution test, conjugacy grid
//! oracles, prior diagnostics).

pub mod checks;
pub mod geweke;
mod updates;

pub use updates::{
    draw_auxiliary, draw_intercept, draw_latent_covariance, draw_node_block, draw_node_density,
    draw_noise_variance, draw_rank_indicator, draw_rank_probabilities, node_block_design,
    node_slab_probability, rank_stats, GammaCache, NodeBlockDesign, NodeBlockDraw,
};

use crate::config::ModelConfig;
use crate::dataset::MultiviewDataset;
use crate::dist::Rng;
use crate::error::{Error, Result};
use crate::state::{ModelDims, ParameterState};

/// Deliberate corruption hooks for the Geweke fault-injection variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Halve the conditional variance of the intercept draw.
    InterceptVarianceHalved,
    /// Halve the covariance of the slab draw in the node-block update.
    SlabVarianceHalved,
}

/// One full sweep in the fixed scan order:
/// intercepts, noise variances, auxiliaries, node blocks (k outer, p inner),
/// rank indicators, J, pi, eta.
pub fn gibbs_sweep(
    state: &mut ParameterState,
    gammas: &mut GammaCache,
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    rng: &mut Rng,
) -> Result<()> {
    gibbs_sweep_faulted(state, gammas, dataset, config, rng, Fault::None)
}

/// [`gibbs_sweep`] with an optional injected fault; only the Geweke harness
/// should ever pass anything but `Fault::None`.
pub fn gibbs_sweep_faulted(
    state: &mut ParameterState,
    gammas: &mut GammaCache,
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    rng: &mut Rng,
    fault: Fault,
) -> Result<()> {
    let dims = state.dims;
    let mu_scale = if fault == Fault::InterceptVarianceHalved {
        0.5
    } else {
        1.0
    };
    let slab_scale = if fault == Fault::SlabVarianceHalved {
        0.5
    } else {
        1.0
    };
    for m in 0..dims.views {
        state.mu[m] = updates::draw_intercept_scaled(dataset, state, gammas, m, rng, mu_scale);
    }
    for m in 0..dims.views {
        state.sigma2[m] = updates::draw_noise_variance(
            dataset,
            state,
            gammas,
            m,
            config.a_sigma,
            config.b_sigma,
            rng,
        )?;
    }
    for m in 0..dims.views {
        for a in 0..dims.aux {
            state.alpha[m * dims.aux + a] =
                updates::draw_auxiliary(dataset, state, gammas, m, a, rng);
        }
    }
    for k in 0..dims.nodes {
        for p in 0..dims.key {
            let draw =
                updates::draw_node_block_scaled(dataset, state, gammas, p, k, rng, slab_scale)?;
            state.xi[p][k] = draw.active;
            for (c, &v) in draw.coeffs.iter().enumerate() {
                state.beta[p][(k, c)] = v;
            }
            gammas.refresh_node(state, dataset, p, k);
        }
    }
    for p in 0..dims.key {
        for m in 0..dims.views {
            let stats = updates::rank_stats(dataset, state, gammas, p, m);
            for r in 0..dims.rank {
                let old = state.lambda_at(p, m, r);
                let new = updates::draw_rank_indicator_with(&stats, state, gammas, p, m, r, rng);
                updates::apply_rank_draw(gammas, state, p, m, r, old, new);
                state.lambda[p][m * dims.rank + r] = new;
            }
            // Reset accumulated rank-one deltas to exact values.
            gammas.rebuild(state, p, m)?;
        }
    }
    let nu = config.resolved_nu(dims.views);
    for p in 0..dims.key {
        state.j[p] = updates::draw_latent_covariance(state, p, nu, rng)?;
    }
    for p in 0..dims.key {
        for m in 0..dims.views {
            for r in 0..dims.rank {
                state.pi[p][m * dims.rank + r] =
                    updates::draw_rank_probabilities(state, p, m, r, config.omega, rng)?;
            }
        }
    }
    for p in 0..dims.key {
        state.eta[p] = updates::draw_node_density(state, p, config.a_eta, config.b_eta, rng)?;
    }
    Ok(())
}

/// Schedule metadata attached to a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Stream index of the generator that ran this chain.
    pub stream: u64,
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub dims: ModelDims,
    pub n_edges: usize,
    pub schedule: Schedule,
    /// `mu[draw][m]`
    pub mu: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    /// `alpha[draw][m * aux + a]`
    pub alpha: Vec<Vec<f64>>,
    /// `eta[draw][p]`
    pub eta: Vec<Vec<f64>>,
    /// `lambda[draw][(p * views + m) * rank + r]`
    pub lambda: Vec<Vec<i8>>,
    /// `xi[draw][p * nodes + k]`
    pub xi: Vec<Vec<bool>>,
    /// `gamma[draw][(p * views + m) * n_edges + e]`
    pub gamma: Vec<Vec<f64>>,
    pub log_likelihood: Vec<f64>,
}

impl ChainOutput {
    pub fn n_retained(&self) -> usize {
        self.mu.len()
    }

    /// Retained coefficient draws for one (p, m, edge) cell.
    pub fn gamma_series(&self, p: usize, m: usize, e: usize) -> Vec<f64> {
        let off = (p * self.dims.views + m) * self.n_edges + e;
        self.gamma.iter().map(|draw| draw[off]).collect()
    }

    /// Posterior inclusion probability of node k for predictor p.
    pub fn pip(&self, p: usize, k: usize) -> f64 {
        let off = p * self.dims.nodes + k;
        let hits = self.xi.iter().filter(|draw| draw[off]).count();
        hits as f64 / self.n_retained() as f64
    }
}

/// Run one chain: fixed sweep order, burn-in, thinning; deterministic given
/// (dataset, config, rng stream).
pub fn run_chain(
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    rng: &mut Rng,
) -> Result<ChainOutput> {
    run_chain_stream(dataset, config, rng, 0)
}

fn run_chain_stream(
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    rng: &mut Rng,
    stream: u64,
) -> Result<ChainOutput> {
    config.validate(dataset.n_views())?;
    if !dataset.all_continuous() {
        return Err(Error::Unsupported(
            "the sampler supports continuous (identity link) views only; \
             binary views have no Gaussian conditionals"
                .into(),
        ));
    }
    if dataset.n_key() == 0 {
        return Err(Error::Config("at least one key predictor is required".into()));
    }
    let mut state = ParameterState::init(dataset, config, rng);
    let mut gammas = GammaCache::new(&state)?;
    let dims = state.dims;
    let retained = config.retained();
    let mut out = ChainOutput {
        dims,
        n_edges: dataset.n_edges(),
        schedule: Schedule {
            n_iter: config.n_iter,
            n_burnin: config.n_burnin,
            thin: config.thin,
            seed: config.seed,
            stream,
        },
        mu: Vec::with_capacity(retained),
        sigma2: Vec::with_capacity(retained),
        alpha: Vec::with_capacity(retained),
        eta: Vec::with_capacity(retained),
        lambda: Vec::with_capacity(retained),
        xi: Vec::with_capacity(retained),
        gamma: Vec::with_capacity(retained),
        log_likelihood: Vec::with_capacity(retained),
    };
    for t in 1..=config.n_iter {
        gibbs_sweep(&mut state, &mut gammas, dataset, config, rng).map_err(|e| match e {
            Error::Numerical {
                context,
                min_eigenvalue,
            } => Error::Numerical {
                context: format!("iteration {t}: {context}"),
                min_eigenvalue,
            },
            other => other,
        })?;
        let keep = t > config.n_burnin && (t - config.n_burnin) % config.thin == 0;
        if keep {
            record_draw(&mut out, &state, &gammas, dataset);
        }
        if t % 100 == 0 {
            let active: usize = state
                .xi
                .iter()
                .map(|v| v.iter().filter(|&&x| x).count())
                .sum();
            log::info!(
                "sweep {t}/{}: log-likelihood {:.3}, active nodes {active}",
                config.n_iter,
                log_likelihood_cached(&state, &gammas, dataset)
            );
        }
    }
    debug_assert_eq!(out.n_retained(), retained);
    Ok(out)
}

fn record_draw(
    out: &mut ChainOutput,
    state: &ParameterState,
    gammas: &GammaCache,
    dataset: &MultiviewDataset,
) {
    let dims = state.dims;
    out.mu.push(state.mu.clone());
    out.sigma2.push(state.sigma2.clone());
    out.alpha.push(state.alpha.clone());
    out.eta.push(state.eta.clone());
    let mut lambda = Vec::with_capacity(dims.key * dims.views * dims.rank);
    let mut gamma = Vec::with_capacity(dims.key * dims.views * out.n_edges);
    for p in 0..dims.key {
        lambda.extend_from_slice(&state.lambda[p]);
        for m in 0..dims.views {
            gamma.extend_from_slice(gammas.slice(p, m));
        }
    }
    out.lambda.push(lambda);
    let mut xi = Vec::with_capacity(dims.key * dims.nodes);
    for p in 0..dims.key {
        xi.extend_from_slice(&state.xi[p]);
    }
    out.xi.push(xi);
    out.gamma.push(gamma);
    out.log_likelihood
        .push(log_likelihood_cached(state, gammas, dataset));
}

/// Gaussian log likelihood reusing the coefficient cache.
fn log_likelihood_cached(
    state: &ParameterState,
    gammas: &GammaCache,
    dataset: &MultiviewDataset,
) -> f64 {
    const LN_2PI: f64 = 1.8378770664093453;
    let mut total = 0.0;
    for m in 0..state.dims.views {
        let sigma2 = state.sigma2[m];
        let ln_norm = -0.5 * (LN_2PI + sigma2.ln());
        for i in 0..dataset.n() {
            let aux = state.aux_effect(dataset, i, m);
            let y = dataset.edges(i, m);
            for e in 0..dataset.n_edges() {
                let mut u = state.mu[m] + aux;
                for p in 0..state.dims.key {
                    u += dataset.x(i, p) * gammas.slice(p, m)[e];
                }
                let resid = y[e] - u;
                total += ln_norm - resid * resid / (2.0 * sigma2);
            }
        }
    }
    total
}

/// Run `n_chains` chains on generator streams 0..n_chains, in parallel when
/// the `parallel` feature is on. Output is identical for any worker count.
pub fn run_chains(
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    n_chains: usize,
) -> Result<Vec<ChainOutput>> {
    crate::exec::map_indexed(n_chains, |c| {
        let mut rng = Rng::for_stream(config.seed, c as u64);
        run_chain_stream(dataset, config, &mut rng, c as u64)
    })
    .into_iter()
    .collect()
}

/// Independent-learning baseline: fit each view in its own single-view model
/// sharing all hyperparameters. Returns `chains[view][chain]`.
pub fn run_independent(
    dataset: &MultiviewDataset,
    config: &ModelConfig,
    n_chains: usize,
) -> Result<Vec<Vec<ChainOutput>>> {
    let views = dataset.n_views();
    let flat = crate::exec::map_indexed(views * n_chains, |idx| {
        let m = idx / n_chains;
        let single = dataset.single_view(m);
        let stream = idx as u64;
        let mut rng = Rng::for_stream(config.seed, stream);
        run_chain_stream(&single, config, &mut rng, stream)
    });
    let mut per_view: Vec<Vec<ChainOutput>> = Vec::with_capacity(views);
    let mut it = flat.into_iter();
    for _ in 0..views {
        let mut chains = Vec::with_capacity(n_chains);
        for _ in 0..n_chains {
            chains.push(it.next().expect("exact length")?);
        }
        per_view.push(chains);
    }
    Ok(per_view)
}
