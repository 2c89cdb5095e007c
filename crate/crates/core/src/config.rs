//! Model configuration: dimensions, hyperparameters, MCMC schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_rank() -> usize {
    5
}
fn default_omega() -> f64 {
    2.0
}
fn default_one() -> f64 {
    1.0
}
fn default_n_iter() -> usize {
    5000
}
fn default_n_burnin() -> usize {
    1000
}
fn default_thin() -> usize {
    2
}

/// Hyperparameters and schedule for one sampler run.
///
/// `nu` defaults to RM + 2, the smallest integer for which the
/// inverse-Wishart prior mean of the slab covariance exists.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Fitted latent rank R.
    #[serde(default = "default_rank")]
    pub r: usize,
    /// Dirichlet decay exponent for rank-usage shrinkage; must be > 1.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Beta prior on the node-inclusion probability eta.
    #[serde(default = "default_one")]
    pub a_eta: f64,
    #[serde(default = "default_one")]
    pub b_eta: f64,
    /// Inverse-gamma prior on the per-view noise variances.
    #[serde(default = "default_one")]
    pub a_sigma: f64,
    #[serde(default = "default_one")]
    pub b_sigma: f64,
    /// Inverse-Wishart degrees of freedom; `None` resolves to RM + 2.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_n_burnin")]
    pub n_burnin: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            r: default_rank(),
            omega: default_omega(),
            a_eta: 1.0,
            b_eta: 1.0,
            a_sigma: 1.0,
            b_sigma: 1.0,
            nu: None,
            n_iter: default_n_iter(),
            n_burnin: default_n_burnin(),
            thin: default_thin(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Degrees of freedom for the slab covariance prior given M views.
    pub fn resolved_nu(&self, n_views: usize) -> f64 {
        self.nu
            .unwrap_or_else(|| (self.r * n_views) as f64 + 2.0)
    }

    /// Number of retained draws, floor((n_iter - n_burnin) / thin).
    pub fn retained(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }

    pub fn validate(&self, n_views: usize) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("fitted rank R must be positive".into()));
        }
        if !(self.omega > 1.0) {
            return Err(Error::Config(format!("omega must be > 1 (got {})", self.omega)));
        }
        for (name, v) in [
            ("a_eta", self.a_eta),
            ("b_eta", self.b_eta),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0 (got {v})")));
            }
        }
        let dim = (self.r * n_views) as f64;
        let nu = self.resolved_nu(n_views);
        if !(nu > dim - 1.0) {
            return Err(Error::Config(format!(
                "nu must exceed RM - 1 = {} (got {nu})",
                dim - 1.0
            )));
        }
        if self.n_burnin >= self.n_iter {
            return Err(Error::Config(format!(
                "n_burnin {} must be below n_iter {}",
                self.n_burnin, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }
}
