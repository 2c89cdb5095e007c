//! Synthetic-truth and dataset generation for the simulation studies.
//!
//! The generator follows the two-view recipe: node activations are
//! Bernoulli(eta0); active nodes get stacked latent vectors from
//! N(mu_beta0, Sigma_beta0) with unit diagonal and 0.5 off-diagonal
//! correlation; the true coefficient for edge (k1, k2) on view m is
//! beta_{m,k1}^T beta_{m,k2} / 2; edges are Gaussian with view-specific
//! noise around the identity-link linear predictor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{MultiviewDataset, View, ViewKind};
use crate::dist::{sample_mvn, sample_normal, Rng};
use crate::edges::EdgeSet;
use crate::error::{Error, Result};

/// One simulation scenario. `sigma2`, `mu0` and `alpha0` are per view.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub nodes: usize,
    /// Probability of a node being active (eta0).
    pub node_density: f64,
    /// True latent rank R0.
    pub true_rank: usize,
    /// Fitted rank R for model runs on this scenario.
    pub fitted_rank: usize,
    pub sigma2: Vec<f64>,
    pub mu0: Vec<f64>,
    pub alpha0: Vec<f64>,
    /// Off-diagonal correlation of the latent covariance.
    #[serde(default = "default_latent_corr")]
    pub latent_corr: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_latent_corr() -> f64 {
    0.5
}

fn default_replications() -> usize {
    1
}

impl Scenario {
    pub fn n_views(&self) -> usize {
        self.sigma2.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.node_density > 0.0 && self.node_density <= 1.0) {
            return Err(Error::Config(format!(
                "node density must lie in (0, 1] (got {})",
                self.node_density
            )));
        }
        if self.true_rank == 0 || self.true_rank > self.fitted_rank {
            return Err(Error::Config(format!(
                "need 1 <= true rank <= fitted rank (got {} and {})",
                self.true_rank, self.fitted_rank
            )));
        }
        if self.sigma2.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("noise variances must be positive".into()));
        }
        let m = self.n_views();
        if m == 0 || self.mu0.len() != m || self.alpha0.len() != m {
            return Err(Error::Config(
                "sigma2, mu0 and alpha0 must all have one entry per view".into(),
            ));
        }
        if !(self.latent_corr > -1.0 && self.latent_corr < 1.0) {
            return Err(Error::Config(format!(
                "latent correlation must lie in (-1, 1) (got {})",
                self.latent_corr
            )));
        }
        if self.n == 0 || self.nodes < 2 || self.replications == 0 {
            return Err(Error::Config("n, K and replications must be positive".into()));
        }
        Ok(())
    }
}

fn base_scenario(name: &str, n: usize, nodes: usize, density: f64, r0: usize, r: usize) -> Scenario {
    Scenario {
        name: name.to_string(),
        n,
        nodes,
        node_density: density,
        true_rank: r0,
        fitted_rank: r,
        sigma2: vec![1.0, 0.5],
        mu0: vec![0.2, 0.8],
        alpha0: vec![0.4, -0.1],
        latent_corr: 0.5,
        replications: 1,
        seed: 0,
    }
}

/// The six full-scale scenarios: (eta0, R0, R) combinations at n=150, K=40.
pub fn scenario_table() -> Vec<Scenario> {
    [
        (0.7, 4, 5),
        (0.5, 4, 8),
        (0.3, 4, 8),
        (0.7, 3, 5),
        (0.5, 3, 8),
        (0.3, 3, 8),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(density, r0, r))| {
        base_scenario(&format!("table1-{}", i + 1), 150, 40, density, r0, r)
    })
    .collect()
}

/// Desk-scale variants that keep the full-scale structure but run in
/// minutes: `desk-small` (K=20) and `desk-tiny` (K=10).
pub fn desk_scenarios() -> Vec<Scenario> {
    vec![
        base_scenario("desk-small", 150, 20, 0.5, 3, 5),
        base_scenario("desk-tiny", 60, 10, 0.5, 2, 4),
    ]
}

/// Scenario registry lookup by name.
pub fn named_scenario(name: &str) -> Option<Scenario> {
    scenario_table()
        .into_iter()
        .chain(desk_scenarios())
        .find(|s| s.name == name)
}

/// Names of every registered scenario.
pub fn scenario_names() -> Vec<String> {
    scenario_table()
        .into_iter()
        .chain(desk_scenarios())
        .map(|s| s.name)
        .collect()
}

/// Ground truth drawn for one replication.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub xi0: Vec<bool>,
    /// Per view, a K x R0 latent matrix (rows of inactive nodes are zero).
    pub beta0: Vec<DMatrix<f64>>,
    /// Per view, the true coefficients over the upper triangle.
    pub gamma0: Vec<Vec<f64>>,
    pub mu0: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Draw node activations and latent vectors, then assemble the true
/// coefficient matrices gamma0 = beta^T beta / 2 per view.
pub fn generate_truth(scenario: &Scenario, rng: &mut Rng) -> Result<SyntheticTruth> {
    scenario.validate()?;
    let m = scenario.n_views();
    let r0 = scenario.true_rank;
    let stacked = m * r0;
    // Latent mean redrawn per truth; equicorrelated covariance.
    let mu_beta = DVector::from_fn(stacked, |_, _| rng.standard_normal());
    let rho = scenario.latent_corr;
    let cov = DMatrix::from_fn(stacked, stacked, |i, j| if i == j { 1.0 } else { rho });
    let mut xi0 = vec![false; scenario.nodes];
    let mut beta0: Vec<DMatrix<f64>> = (0..m)
        .map(|_| DMatrix::zeros(scenario.nodes, r0))
        .collect();
    for k in 0..scenario.nodes {
        xi0[k] = rng.bernoulli(scenario.node_density);
        if xi0[k] {
            let draw = sample_mvn(&mu_beta, &cov, rng)?;
            for view in 0..m {
                for r in 0..r0 {
                    beta0[view][(k, r)] = draw[view * r0 + r];
                }
            }
        }
    }
    let es = EdgeSet::new(scenario.nodes);
    let gamma0 = (0..m)
        .map(|view| {
            es.pairs()
                .map(|(k1, k2)| {
                    let mut dot = 0.0;
                    for r in 0..r0 {
                        dot += beta0[view][(k1, r)] * beta0[view][(k2, r)];
                    }
                    dot / 2.0
                })
                .collect()
        })
        .collect();
    Ok(SyntheticTruth {
        xi0,
        beta0,
        gamma0,
        mu0: scenario.mu0.clone(),
        alpha0: scenario.alpha0.clone(),
        sigma2: scenario.sigma2.clone(),
    })
}

/// Draw predictors and edges from the identity-link model at the truth.
pub fn generate_dataset(
    truth: &SyntheticTruth,
    scenario: &Scenario,
    rng: &mut Rng,
) -> Result<MultiviewDataset> {
    let n = scenario.n;
    let m = scenario.n_views();
    let q = EdgeSet::new(scenario.nodes).len();
    let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let x_aux: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let mut views = Vec::with_capacity(m);
    for view in 0..m {
        let sd = truth.sigma2[view].sqrt();
        let mut weights = Vec::with_capacity(n * q);
        for i in 0..n {
            for e in 0..q {
                let mean =
                    truth.mu0[view] + x[i] * truth.gamma0[view][e] + x_aux[i] * truth.alpha0[view];
                weights.push(sample_normal(mean, sd, rng));
            }
        }
        views.push(View {
            kind: ViewKind::Continuous,
            weights,
        });
    }
    MultiviewDataset::new(n, scenario.nodes, views, x, 1, x_aux, 1)
}
