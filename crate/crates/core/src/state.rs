//! One full draw of all model unknowns.

use nalgebra::{Cholesky, DMatrix};

use crate::config::ModelConfig;
use crate::dataset::MultiviewDataset;
use crate::dist::Rng;
use crate::error::{Error, Result};

/// Problem dimensions shared by state, sampler and outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub nodes: usize,
    pub views: usize,
    pub key: usize,
    pub aux: usize,
    pub rank: usize,
}

impl ModelDims {
    pub fn from_dataset(dataset: &MultiviewDataset, rank: usize) -> Self {
        ModelDims {
            nodes: dataset.nodes(),
            views: dataset.n_views(),
            key: dataset.n_key(),
            aux: dataset.n_aux(),
            rank,
        }
    }

    /// Length of one stacked latent vector, RM.
    pub fn latent(&self) -> usize {
        self.rank * self.views
    }
}

/// All model unknowns for one sweep.
///
/// The stacked latent vector for (predictor p, node k) is row k of
/// `beta[p]`, with columns `[m*R .. (m+1)*R]` holding view m's block.
#[derive(Debug, Clone)]
pub struct ParameterState {
    pub dims: ModelDims,
    /// Per-view intercepts.
    pub mu: Vec<f64>,
    /// Per-view noise variances (continuous views).
    pub sigma2: Vec<f64>,
    /// Auxiliary coefficients, view-major: `alpha[m * aux + a]`.
    pub alpha: Vec<f64>,
    /// Per-predictor K x RM latent matrices.
    pub beta: Vec<DMatrix<f64>>,
    /// Node-inclusion indicators, `xi[p][k]`.
    pub xi: Vec<Vec<bool>>,
    /// Rank indicators in {-1, 0, 1}, `lambda[p][m * R + r]`.
    pub lambda: Vec<Vec<i8>>,
    /// Probability triples (lambda = 0, 1, -1), `pi[p][m * R + r]`.
    pub pi: Vec<Vec<[f64; 3]>>,
    /// Per-predictor RM x RM slab covariances.
    pub j: Vec<DMatrix<f64>>,
    /// Per-predictor node-inclusion probabilities.
    pub eta: Vec<f64>,
}

impl ParameterState {
    /// Overdispersed-but-proper start: per-view data mean/variance for mu and
    /// sigma2, all nodes active with small random latents, lambda all 1, pi at
    /// its prior mean, J = I, eta = 1/2.
    pub fn init(dataset: &MultiviewDataset, config: &ModelConfig, rng: &mut Rng) -> Self {
        let dims = ModelDims::from_dataset(dataset, config.r);
        let q = dataset.n_edges();
        let cells = (dataset.n() * q) as f64;
        let mut mu = Vec::with_capacity(dims.views);
        let mut sigma2 = Vec::with_capacity(dims.views);
        for m in 0..dims.views {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for i in 0..dataset.n() {
                for &y in dataset.edges(i, m) {
                    sum += y;
                    sumsq += y * y;
                }
            }
            let mean = sum / cells;
            let var = (sumsq / cells - mean * mean).max(1e-6);
            mu.push(mean);
            sigma2.push(var);
        }
        let latent = dims.latent();
        let beta = (0..dims.key)
            .map(|_| DMatrix::from_fn(dims.nodes, latent, |_, _| 0.1f64.sqrt() * rng.standard_normal()))
            .collect();
        let pi_triple: Vec<[f64; 3]> = (0..dims.views)
            .flat_map(|_| {
                (0..dims.rank).map(|r| {
                    let w = ((r + 1) as f64).powf(config.omega);
                    let total = w + 2.0;
                    [w / total, 1.0 / total, 1.0 / total]
                })
            })
            .collect();
        ParameterState {
            dims,
            mu,
            sigma2,
            alpha: vec![0.0; dims.views * dims.aux],
            beta,
            xi: vec![vec![true; dims.nodes]; dims.key],
            lambda: vec![vec![1; dims.views * dims.rank]; dims.key],
            pi: vec![pi_triple; dims.key],
            j: vec![DMatrix::identity(latent, latent); dims.key],
            eta: vec![0.5; dims.key],
        }
    }

    pub fn alpha_at(&self, m: usize, a: usize) -> f64 {
        self.alpha[m * self.dims.aux + a]
    }

    pub fn lambda_at(&self, p: usize, m: usize, r: usize) -> i8 {
        self.lambda[p][m * self.dims.rank + r]
    }

    pub fn pi_at(&self, p: usize, m: usize, r: usize) -> [f64; 3] {
        self.pi[p][m * self.dims.rank + r]
    }

    /// View m's K x R latent block for predictor p.
    pub fn beta_view(&self, p: usize, m: usize) -> DMatrix<f64> {
        let r = self.dims.rank;
        self.beta[p].columns(m * r, r).into_owned()
    }

    /// Auxiliary contribution to every cell of view m for subject i.
    pub fn aux_effect(&self, dataset: &MultiviewDataset, i: usize, m: usize) -> f64 {
        (0..self.dims.aux)
            .map(|a| dataset.x_aux(i, a) * self.alpha_at(m, a))
            .sum()
    }

    /// Verify every structural invariant; used by tests and debug checks.
    pub fn check_invariants(&self) -> Result<()> {
        for (m, &s) in self.sigma2.iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::InvalidState(format!("sigma2[{m}] = {s} <= 0")));
            }
        }
        for (p, &e) in self.eta.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidState(format!("eta[{p}] = {e} outside (0,1)")));
            }
        }
        for p in 0..self.dims.key {
            for triple in &self.pi[p] {
                let total: f64 = triple.iter().sum();
                if (total - 1.0).abs() > 1e-9 || triple.iter().any(|&w| w < 0.0) {
                    return Err(Error::InvalidState(format!("pi triple {triple:?} not a simplex")));
                }
            }
            for l in &self.lambda[p] {
                if ![-1i8, 0, 1].contains(l) {
                    return Err(Error::InvalidState(format!("lambda value {l} outside {{-1,0,1}}")));
                }
            }
            if Cholesky::new(self.j[p].clone()).is_none() {
                return Err(Error::InvalidState(format!("J[{p}] not positive definite")));
            }
            for k in 0..self.dims.nodes {
                let zero = self.beta[p].row(k).iter().all(|&b| b == 0.0);
                if self.xi[p][k] && zero {
                    // Active with exactly-zero latents has prior probability 0
                    // but is not structurally inconsistent; only the converse is.
                    continue;
                }
                if !self.xi[p][k] && !zero {
                    return Err(Error::InvalidState(format!(
                        "xi[{p}][{k}] = 0 but latent vector is nonzero"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{View, ViewKind};

    fn tiny_dataset() -> MultiviewDataset {
        let n = 2;
        let q = 3; // K = 3
        let views = (0..2)
            .map(|m| View {
                kind: ViewKind::Continuous,
                weights: (0..n * q).map(|i| (i + m) as f64 * 0.1).collect(),
            })
            .collect();
        MultiviewDataset::new(n, 3, views, vec![0.5, -0.5], 1, vec![1.0, 2.0], 1).unwrap()
    }

    #[test]
    fn init_satisfies_invariants() {
        let data = tiny_dataset();
        let cfg = ModelConfig {
            r: 2,
            ..ModelConfig::default()
        };
        let mut rng = Rng::from_seed(1);
        let state = ParameterState::init(&data, &cfg, &mut rng);
        state.check_invariants().unwrap();
        assert_eq!(state.mu.len(), 2);
        assert_eq!(state.beta[0].shape(), (3, 4));
        // Per-view moments match the data.
        let mean0: f64 = (0..2).flat_map(|i| data.edges(i, 0).to_vec()).sum::<f64>() / 6.0;
        assert!((state.mu[0] - mean0).abs() < 1e-12);
    }
}
