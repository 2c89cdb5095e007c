//! Deterministic model algebra: symmetric low-rank coefficient construction,
//! linear predictors, and the Gaussian log likelihood.
//!
//! The coefficient matrix for one (key predictor, view) pair is
//! Gamma = B Lambda B^T with B the K x R latent matrix and Lambda the
//! diagonal of rank indicators in {-1, 0, 1}; only the upper triangle is
//! ever stored.

use nalgebra::DMatrix;

use crate::dataset::MultiviewDataset;
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::state::ParameterState;

const LN_2PI: f64 = 1.8378770664093453;

/// Upper-triangular entries of B Lambda B^T in canonical edge order.
pub fn build_coefficient_matrix(b_pm: &DMatrix<f64>, lambda: &[i8]) -> Result<Vec<f64>> {
    let (nodes, rank) = b_pm.shape();
    if rank != lambda.len() {
        return Err(Error::Config(format!(
            "latent block has {rank} columns but lambda has {} entries",
            lambda.len()
        )));
    }
    let edges = EdgeSet::new(nodes);
    let mut gamma = vec![0.0; edges.len()];
    for (idx, (k1, k2)) in edges.pairs().enumerate() {
        let mut sum = 0.0;
        for (r, &l) in lambda.iter().enumerate() {
            if l != 0 {
                sum += f64::from(l) * b_pm[(k1, r)] * b_pm[(k2, r)];
            }
        }
        gamma[idx] = sum;
    }
    Ok(gamma)
}

/// Coefficient vectors for every (p, m), indexed `[p][m]`.
pub fn all_coefficients(state: &ParameterState) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..state.dims.key)
        .map(|p| {
            (0..state.dims.views)
                .map(|m| {
                    let block = state.beta_view(p, m);
                    let lam: Vec<i8> = (0..state.dims.rank)
                        .map(|r| state.lambda_at(p, m, r))
                        .collect();
                    build_coefficient_matrix(&block, &lam)
                })
                .collect()
        })
        .collect()
}

/// Mean vector u_{i,m,.} over all edges: mu_m + sum_p x_ip gamma_pm + aux.
pub fn linear_predictor(
    state: &ParameterState,
    dataset: &MultiviewDataset,
    i: usize,
    m: usize,
) -> Result<Vec<f64>> {
    let gammas: Vec<Vec<f64>> = (0..state.dims.key)
        .map(|p| {
            let block = state.beta_view(p, m);
            let lam: Vec<i8> = (0..state.dims.rank)
                .map(|r| state.lambda_at(p, m, r))
                .collect();
            build_coefficient_matrix(&block, &lam)
        })
        .collect::<Result<_>>()?;
    Ok(linear_predictor_with(&gammas, state, dataset, i, m))
}

/// Same as [`linear_predictor`] but with the per-predictor coefficient
/// vectors for view m already built (hot path of the sampler).
pub fn linear_predictor_with(
    gammas_m: &[Vec<f64>],
    state: &ParameterState,
    dataset: &MultiviewDataset,
    i: usize,
    m: usize,
) -> Vec<f64> {
    let q = dataset.n_edges();
    let base = state.mu[m] + state.aux_effect(dataset, i, m);
    let mut u = vec![base; q];
    for (p, gamma) in gammas_m.iter().enumerate() {
        let x = dataset.x(i, p);
        if x != 0.0 {
            for (cell, g) in u.iter_mut().zip(gamma) {
                *cell += x * g;
            }
        }
    }
    u
}

/// Total Gaussian log likelihood over all subjects, views and edges.
pub fn log_likelihood(state: &ParameterState, dataset: &MultiviewDataset) -> Result<f64> {
    if !dataset.all_continuous() {
        return Err(Error::Unsupported(
            "log likelihood requires continuous views only".into(),
        ));
    }
    for (m, &s) in state.sigma2.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::InvalidState(format!("sigma2[{m}] = {s} <= 0")));
        }
    }
    let gammas = all_coefficients(state)?;
    let mut total = 0.0;
    for m in 0..dataset.n_views() {
        let sigma2 = state.sigma2[m];
        let ln_norm = -0.5 * (LN_2PI + sigma2.ln());
        let per_p: Vec<Vec<f64>> = (0..state.dims.key).map(|p| gammas[p][m].clone()).collect();
        for i in 0..dataset.n() {
            let u = linear_predictor_with(&per_p, state, dataset, i, m);
            for (&y, &mean) in dataset.edges(i, m).iter().zip(&u) {
                let resid = y - mean;
                total += ln_norm - resid * resid / (2.0 * sigma2);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::dataset::{View, ViewKind};
    use crate::dist::Rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_lambda_kills_everything() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let gamma = build_coefficient_matrix(&b, &[0, 0]).unwrap();
        assert!(gamma.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_term_product() {
        // K=2, R=1, lambda=(1), beta_1=(2), beta_2=(3) -> gamma = 6.
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 3.0]);
        let gamma = build_coefficient_matrix(&b, &[1]).unwrap();
        assert_eq!(gamma, vec![6.0]);
    }

    #[test]
    fn signed_two_term_sum() {
        // K=2, R=2, lambda=(1,-1), beta_1=(1,2), beta_2=(3,4) -> 1*3 - 2*4 = -5.
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let gamma = build_coefficient_matrix(&b, &[1, -1]).unwrap();
        assert_eq!(gamma, vec![-5.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            build_coefficient_matrix(&b, &[1]),
            Err(Error::Config(_))
        ));
    }

    fn dataset_with(
        n: usize,
        nodes: usize,
        views: usize,
        x: Vec<f64>,
        x_aux: Vec<f64>,
        fill: impl Fn(usize, usize, usize) -> f64,
    ) -> MultiviewDataset {
        let q = EdgeSet::new(nodes).len();
        let fill = &fill;
        let view_data = (0..views)
            .map(|m| View {
                kind: ViewKind::Continuous,
                weights: (0..n)
                    .flat_map(|i| (0..q).map(move |e| fill(i, m, e)))
                    .collect(),
            })
            .collect();
        MultiviewDataset::new(n, nodes, view_data, x, 1, x_aux, 1).unwrap()
    }

    fn blank_state(dataset: &MultiviewDataset, r: usize) -> ParameterState {
        let cfg = ModelConfig {
            r,
            ..ModelConfig::default()
        };
        let mut rng = Rng::from_seed(0);
        let mut state = ParameterState::init(dataset, &cfg, &mut rng);
        for p in 0..state.dims.key {
            state.beta[p].fill(0.0);
            state.xi[p].iter_mut().for_each(|x| *x = false);
        }
        state.alpha.fill(0.0);
        state.mu.fill(0.0);
        state
    }

    #[test]
    fn intercept_only_predictor() {
        let data = dataset_with(1, 3, 1, vec![1.0], vec![0.0], |_, _, _| 0.0);
        let mut state = blank_state(&data, 1);
        state.mu[0] = 0.2;
        let u = linear_predictor(&state, &data, 0, 0).unwrap();
        assert_eq!(u, vec![0.2, 0.2, 0.2]);
    }

    #[test]
    fn key_predictor_substitution() {
        // P=1, x=1, gamma from the -5 example, mu=0, alpha=0.
        let data = dataset_with(1, 2, 1, vec![1.0], vec![0.0], |_, _, _| 0.0);
        let mut state = blank_state(&data, 2);
        state.xi[0][0] = true;
        state.xi[0][1] = true;
        state.beta[0] = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        state.lambda[0] = vec![1, -1];
        let u = linear_predictor(&state, &data, 0, 0).unwrap();
        assert_relative_eq!(u[0], -5.0, epsilon = 1e-12);
    }

    #[test]
    fn auxiliary_effect_is_uniform() {
        // x=0, x_aux=1, alpha = 0.4 -> constant 0.4 (the paper's alpha_1).
        let data = dataset_with(1, 3, 1, vec![0.0], vec![1.0], |_, _, _| 0.0);
        let mut state = blank_state(&data, 1);
        state.alpha[0] = 0.4;
        let u = linear_predictor(&state, &data, 0, 0).unwrap();
        for v in u {
            assert_relative_eq!(v, 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_likelihood_single_cell() {
        // One cell, y = u, sigma2 = 1 -> -log(2*pi)/2.
        let data = dataset_with(1, 2, 1, vec![0.0], vec![0.0], |_, _, _| 0.0);
        let mut state = blank_state(&data, 1);
        state.sigma2[0] = 1.0;
        let ll = log_likelihood(&state, &data).unwrap();
        assert_relative_eq!(ll, -0.5 * LN_2PI, epsilon = 1e-12);
        // Residual 2 at unit variance subtracts 2 more.
        let data2 = dataset_with(1, 2, 1, vec![0.0], vec![0.0], |_, _, _| 2.0);
        let ll2 = log_likelihood(&state, &data2).unwrap();
        assert_relative_eq!(ll2, -0.5 * LN_2PI - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_rejects_nonpositive_variance() {
        let data = dataset_with(1, 2, 1, vec![0.0], vec![0.0], |_, _, _| 0.0);
        let mut state = blank_state(&data, 1);
        state.sigma2[0] = 0.0;
        assert!(matches!(
            log_likelihood(&state, &data),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn log_likelihood_matches_bruteforce_oracle() {
        // Independent per-cell density sum on a random n=2, K=3, M=2 instance.
        let mut rng = Rng::from_seed(33);
        let mut weights = Vec::new();
        for _ in 0..2 * 2 * 3 {
            weights.push(rng.standard_normal());
        }
        let w = weights.clone();
        let data = dataset_with(2, 3, 2, vec![0.7, -0.3], vec![0.2, 1.1], move |i, m, e| {
            w[(m * 2 + i) * 3 + e]
        });
        let cfg = ModelConfig {
            r: 2,
            ..ModelConfig::default()
        };
        let mut state = ParameterState::init(&data, &cfg, &mut rng);
        state.alpha = vec![0.3, -0.6];
        state.lambda[0] = vec![1, -1, 0, 1];
        let got = log_likelihood(&state, &data).unwrap();

        // Oracle: rebuild means cell by cell with naive loops.
        let es = data.edge_set();
        let mut want = 0.0;
        for m in 0..2 {
            let bl = state.beta_view(0, m);
            for i in 0..2 {
                for (idx, (k1, k2)) in es.pairs().enumerate() {
                    let mut g = 0.0;
                    for r in 0..2 {
                        g += f64::from(state.lambda_at(0, m, r)) * bl[(k1, r)] * bl[(k2, r)];
                    }
                    let u = state.mu[m] + data.x(i, 0) * g + data.x_aux(i, 0) * state.alpha_at(m, 0);
                    let y = data.edges(i, m)[idx];
                    let s2 = state.sigma2[m];
                    want += -0.5 * (LN_2PI + s2.ln()) - (y - u).powi(2) / (2.0 * s2);
                }
            }
        }
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    proptest! {
        /// gamma agrees with a dense B Lambda B^T triple loop, node-nullity
        /// holds, and the diagonal is implicitly zero (never stored).
        #[test]
        fn coefficients_match_dense_triple_loop(
            seed in 0u64..1000,
            nodes in 2usize..7,
            rank in 1usize..4,
        ) {
            let mut rng = Rng::from_seed(seed);
            let b = DMatrix::from_fn(nodes, rank, |_, _| rng.standard_normal());
            let lambda: Vec<i8> = (0..rank).map(|_| (rng.uniform() * 3.0) as i8 - 1).collect();
            let gamma = build_coefficient_matrix(&b, &lambda).unwrap();
            let es = EdgeSet::new(nodes);
            for (idx, (k1, k2)) in es.pairs().enumerate() {
                let mut dense = 0.0;
                for r in 0..rank {
                    dense += f64::from(lambda[r]) * b[(k1, r)] * b[(k2, r)];
                }
                prop_assert!((gamma[idx] - dense).abs() <= 1e-12);
                // Symmetry is structural: (k1,k2) is the only stored copy.
                prop_assert!(es.index(k1, k2) == idx);
            }
        }

        /// Zeroing node k's latent row zeroes exactly the K-1 incident edges.
        #[test]
        fn node_nullity(seed in 0u64..1000, nodes in 3usize..7, target in 0usize..3) {
            let target = target.min(nodes - 1);
            let mut rng = Rng::from_seed(seed);
            // Latents bounded away from zero so non-incident edges stay nonzero.
            let b = DMatrix::from_fn(nodes, 2, |_, _| 1.0 + rng.uniform());
            let mut masked = b.clone();
            for r in 0..2 {
                masked[(target, r)] = 0.0;
            }
            let gamma = build_coefficient_matrix(&masked, &[1, 1]).unwrap();
            let es = EdgeSet::new(nodes);
            for (idx, (k1, k2)) in es.pairs().enumerate() {
                if k1 == target || k2 == target {
                    prop_assert!(gamma[idx] == 0.0);
                } else {
                    prop_assert!(gamma[idx] != 0.0);
                }
            }
        }
    }
}
