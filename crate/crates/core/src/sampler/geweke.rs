//! Geweke-style joint-distribution test of the Gibbs sampler.
//!
//! Two simulators target the same joint distribution of (parameters, data):
//!
//! * marginal-conditional: draw parameters from the prior, then data from
//!   the model — exact i.i.d. samples of the joint;
//! * successive-conditional: alternate one Gibbs sweep given the data with
//!   redrawing the data given the parameters — a Markov chain whose
//!   stationary distribution is the same joint iff every full conditional
//!   is correct.
//!
//! Matching moments of monitored statistics across the two simulators is
//! evidence the conditionals are right; a z-score blowing up pinpoints a
//! broken update. Predictors are held fixed: the model is conditional on x.

use crate::config::ModelConfig;
use crate::dataset::{MultiviewDataset, View, ViewKind};
use crate::dist::{sample_beta, sample_categorical_log, sample_dirichlet, sample_inverse_gamma, sample_inverse_wishart, sample_mvn, sample_normal, Rng};
use crate::error::Result;
use crate::model::linear_predictor;
use crate::sampler::{gibbs_sweep_faulted, Fault, GammaCache};
use crate::state::{ModelDims, ParameterState};

use nalgebra::{DMatrix, DVector};

/// Dimensions and schedule of one Geweke run. Hyperparameters ride in
/// `model`; its MCMC schedule fields are ignored.
#[derive(Debug, Clone)]
pub struct GewekeConfig {
    pub n: usize,
    pub nodes: usize,
    pub views: usize,
    pub key: usize,
    pub aux: usize,
    pub model: ModelConfig,
    pub n_samples: usize,
    pub seed: u64,
    pub fault: Fault,
}

impl GewekeConfig {
    /// Desk-scale default: n=3, K=4, R=2, M=2, one key and one auxiliary
    /// predictor. Priors are tightened (a_sigma=3, nu=RM+4) so every
    /// monitored statistic has finite variance under the joint.
    pub fn desk(n_samples: usize, seed: u64, fault: Fault) -> Self {
        GewekeConfig {
            n: 3,
            nodes: 4,
            views: 2,
            key: 1,
            aux: 1,
            model: ModelConfig {
                r: 2,
                omega: 2.0,
                a_eta: 1.0,
                b_eta: 1.0,
                a_sigma: 3.0,
                b_sigma: 3.0,
                nu: Some(8.0),
                ..ModelConfig::default()
            },
            n_samples,
            seed,
            fault,
        }
    }

    fn dims(&self) -> ModelDims {
        ModelDims {
            nodes: self.nodes,
            views: self.views,
            key: self.key,
            aux: self.aux,
            rank: self.model.r,
        }
    }
}

/// One monitored statistic's comparison.
#[derive(Debug, Clone)]
pub struct GewekeStatistic {
    pub name: String,
    pub mean_marginal: f64,
    pub mean_successive: f64,
    /// Combined standard error of the mean difference.
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub statistics: Vec<GewekeStatistic>,
    pub n_samples: usize,
    pub fault: Fault,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.statistics
            .iter()
            .map(|s| s.z.abs())
            .fold(0.0, f64::max)
    }
}

/// Draw a full parameter state from the prior.
pub fn draw_prior_state(
    dims: &ModelDims,
    config: &ModelConfig,
    rng: &mut Rng,
) -> Result<ParameterState> {
    let latent = dims.latent();
    let mut mu = Vec::with_capacity(dims.views);
    let mut sigma2 = Vec::with_capacity(dims.views);
    for _ in 0..dims.views {
        mu.push(rng.standard_normal());
        sigma2.push(sample_inverse_gamma(config.a_sigma, config.b_sigma, rng)?);
    }
    let alpha = (0..dims.views * dims.aux)
        .map(|_| rng.standard_normal())
        .collect();
    let nu = config.resolved_nu(dims.views);
    let identity = DMatrix::<f64>::identity(latent, latent);
    let mut beta = Vec::with_capacity(dims.key);
    let mut xi = Vec::with_capacity(dims.key);
    let mut lambda = Vec::with_capacity(dims.key);
    let mut pi = Vec::with_capacity(dims.key);
    let mut j = Vec::with_capacity(dims.key);
    let mut eta = Vec::with_capacity(dims.key);
    for _ in 0..dims.key {
        let jp = sample_inverse_wishart(nu, &identity, rng)?;
        let ep = sample_beta(config.a_eta, config.b_eta, rng)?;
        let mut pi_p = Vec::with_capacity(dims.views * dims.rank);
        let mut lam_p = Vec::with_capacity(dims.views * dims.rank);
        for _ in 0..dims.views {
            for r in 0..dims.rank {
                let alpha_r = [((r + 1) as f64).powf(config.omega), 1.0, 1.0];
                let triple = sample_dirichlet(&alpha_r, rng)?;
                let branch = sample_categorical_log(
                    &[triple[0].ln(), triple[1].ln(), triple[2].ln()],
                    rng,
                );
                pi_p.push([triple[0], triple[1], triple[2]]);
                lam_p.push([0i8, 1, -1][branch]);
            }
        }
        let mut beta_p = DMatrix::<f64>::zeros(dims.nodes, latent);
        let mut xi_p = vec![false; dims.nodes];
        let zero_mean = DVector::<f64>::zeros(latent);
        for k in 0..dims.nodes {
            xi_p[k] = rng.bernoulli(ep);
            if xi_p[k] {
                let draw = sample_mvn(&zero_mean, &jp, rng)?;
                for c in 0..latent {
                    beta_p[(k, c)] = draw[c];
                }
            }
        }
        beta.push(beta_p);
        xi.push(xi_p);
        lambda.push(lam_p);
        pi.push(pi_p);
        j.push(jp);
        eta.push(ep);
    }
    Ok(ParameterState {
        dims: *dims,
        mu,
        sigma2,
        alpha,
        beta,
        xi,
        lambda,
        pi,
        j,
        eta,
    })
}

/// Redraw every edge weight from the model given the current parameters,
/// keeping the predictors.
pub fn redraw_data(
    state: &ParameterState,
    dataset: &MultiviewDataset,
    rng: &mut Rng,
) -> Result<MultiviewDataset> {
    let q = dataset.n_edges();
    let mut views = Vec::with_capacity(dataset.n_views());
    for m in 0..dataset.n_views() {
        let mut weights = Vec::with_capacity(dataset.n() * q);
        let sd = state.sigma2[m].sqrt();
        for i in 0..dataset.n() {
            let u = linear_predictor(state, dataset, i, m)?;
            for mean in u {
                weights.push(sample_normal(mean, sd, rng));
            }
        }
        views.push(View {
            kind: ViewKind::Continuous,
            weights,
        });
    }
    let x: Vec<f64> = (0..dataset.n())
        .flat_map(|i| (0..dataset.n_key()).map(move |p| dataset.x(i, p)))
        .collect();
    let xa: Vec<f64> = (0..dataset.n())
        .flat_map(|i| (0..dataset.n_aux()).map(move |a| dataset.x_aux(i, a)))
        .collect();
    MultiviewDataset::new(
        dataset.n(),
        dataset.nodes(),
        views,
        x,
        dataset.n_key(),
        xa,
        dataset.n_aux(),
    )
}

fn statistic_names(cfg: &GewekeConfig) -> Vec<String> {
    let mut names = Vec::new();
    for m in 0..cfg.views {
        names.push(format!("mu_{}", m + 1));
        names.push(format!("mu_sq_{}", m + 1));
        names.push(format!("sigma2_{}", m + 1));
    }
    for m in 0..cfg.views {
        for a in 0..cfg.aux {
            names.push(format!("alpha_{}_{}", a + 1, m + 1));
        }
    }
    for p in 0..cfg.key {
        names.push(format!("eta_{}", p + 1));
    }
    names.push("sum_abs_lambda".into());
    names.push("n_active".into());
    names.push("mean_abs_gamma".into());
    names.push("mean_sq_beta".into());
    names
}

fn collect_statistics(state: &ParameterState, out: &mut Vec<f64>) -> Result<()> {
    let dims = state.dims;
    for m in 0..dims.views {
        out.push(state.mu[m]);
        out.push(state.mu[m] * state.mu[m]);
        out.push(state.sigma2[m]);
    }
    for m in 0..dims.views {
        for a in 0..dims.aux {
            out.push(state.alpha_at(m, a));
        }
    }
    for p in 0..dims.key {
        out.push(state.eta[p]);
    }
    let mut lambda_sum = 0.0;
    for p in 0..dims.key {
        for l in &state.lambda[p] {
            lambda_sum += f64::from(l.abs());
        }
    }
    out.push(lambda_sum);
    let active: usize = state
        .xi
        .iter()
        .map(|v| v.iter().filter(|&&x| x).count())
        .sum();
    out.push(active as f64);
    let gammas = crate::model::all_coefficients(state)?;
    let mut abs_sum = 0.0;
    let mut cells = 0usize;
    for per_m in &gammas {
        for slice in per_m {
            for g in slice {
                abs_sum += g.abs();
                cells += 1;
            }
        }
    }
    out.push(abs_sum / cells as f64);
    let mut sq = 0.0;
    let mut n_beta = 0usize;
    for p in 0..dims.key {
        for v in state.beta[p].iter() {
            sq += v * v;
            n_beta += 1;
        }
    }
    out.push(sq / n_beta as f64);
    Ok(())
}

/// Mean and batch-means standard error of one statistic's series.
fn mean_and_batch_se(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch = n / n_batches;
    let mut batch_means = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let lo = b * batch;
        let hi = lo + batch;
        batch_means.push(series[lo..hi].iter().sum::<f64>() / batch as f64);
    }
    let bm = batch_means.iter().sum::<f64>() / n_batches as f64;
    let var = batch_means
        .iter()
        .map(|&x| (x - bm).powi(2))
        .sum::<f64>()
        / (n_batches - 1) as f64;
    (mean, (var / n_batches as f64).sqrt())
}

/// Run the joint-distribution test and return z-scores for every monitored
/// statistic's mean difference.
pub fn geweke_joint_test(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let dims = cfg.dims();
    let names = statistic_names(cfg);
    let n_stats = names.len();

    // Fixed predictor design, shared by both simulators.
    let mut rng_x = Rng::for_stream(cfg.seed, 0);
    let x: Vec<f64> = (0..cfg.n * cfg.key).map(|_| rng_x.standard_normal()).collect();
    let xa: Vec<f64> = (0..cfg.n * cfg.aux).map(|_| rng_x.standard_normal()).collect();
    let q = crate::edges::EdgeSet::new(cfg.nodes).len();
    let blank_views = || {
        (0..cfg.views)
            .map(|_| View {
                kind: ViewKind::Continuous,
                weights: vec![0.0; cfg.n * q],
            })
            .collect::<Vec<_>>()
    };
    let shell = MultiviewDataset::new(
        cfg.n,
        cfg.nodes,
        blank_views(),
        x.clone(),
        cfg.key,
        xa.clone(),
        cfg.aux,
    )?;

    // The two simulator arms are independent; run them via the work-unit map.
    let arms = crate::exec::map_indexed(2, |arm| -> Result<Vec<Vec<f64>>> {
        let mut rng = Rng::for_stream(cfg.seed, 1 + arm as u64);
        let mut series = vec![Vec::with_capacity(cfg.n_samples); n_stats];
        if arm == 0 {
            // Marginal-conditional: i.i.d. prior draws. The data redraw does
            // not change any monitored statistic but keeps both arms
            // structurally identical.
            let mut buf = Vec::with_capacity(n_stats);
            for _ in 0..cfg.n_samples {
                let state = draw_prior_state(&dims, &cfg.model, &mut rng)?;
                let _data = redraw_data(&state, &shell, &mut rng)?;
                buf.clear();
                collect_statistics(&state, &mut buf)?;
                for (s, v) in series.iter_mut().zip(&buf) {
                    s.push(*v);
                }
            }
        } else {
            // Successive-conditional: Gibbs sweep against the current data,
            // then redraw the data given the new parameters.
            let mut state = draw_prior_state(&dims, &cfg.model, &mut rng)?;
            let mut data = redraw_data(&state, &shell, &mut rng)?;
            let mut gammas = GammaCache::new(&state)?;
            let mut buf = Vec::with_capacity(n_stats);
            for _ in 0..cfg.n_samples {
                gibbs_sweep_faulted(&mut state, &mut gammas, &data, &cfg.model, &mut rng, cfg.fault)?;
                data = redraw_data(&state, &data, &mut rng)?;
                buf.clear();
                collect_statistics(&state, &mut buf)?;
                for (s, v) in series.iter_mut().zip(&buf) {
                    s.push(*v);
                }
            }
        }
        Ok(series)
    });
    let mut arms = arms.into_iter();
    let marginal = arms.next().expect("two arms")?;
    let successive = arms.next().expect("two arms")?;

    let statistics = names
        .into_iter()
        .enumerate()
        .map(|(s, name)| {
            let (m1, se1) = mean_and_batch_se(&marginal[s]);
            let (m2, se2) = mean_and_batch_se(&successive[s]);
            let se = (se1 * se1 + se2 * se2).sqrt();
            GewekeStatistic {
                name,
                mean_marginal: m1,
                mean_successive: m2,
                se,
                z: (m1 - m2) / se,
            }
        })
        .collect();
    Ok(GewekeReport {
        statistics,
        n_samples: cfg.n_samples,
        fault: cfg.fault,
    })
}
