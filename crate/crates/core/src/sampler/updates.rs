//! Full-conditional draws, one function per update.
//!
//! Every function is a pure draw: it reads the current state and returns the
//! new value without mutating anything, so the chain runner owns all
//! assignment and cache maintenance and harnesses can re-draw from a fixed
//! state as often as they like.

use nalgebra::{DMatrix, DVector};

use crate::dataset::MultiviewDataset;
use crate::dist::{
    sample_beta, sample_categorical_log, sample_dirichlet, sample_inverse_gamma,
    sample_inverse_wishart, sample_normal, Rng, SpikeSlabEvidence,
};
use crate::error::{Error, Result};
use crate::state::ParameterState;

/// Cached coefficient vectors gamma[p][m][edge], kept exactly in sync with
/// the latent state by the chain runner.
#[derive(Debug, Clone)]
pub struct GammaCache {
    gamma: Vec<Vec<Vec<f64>>>,
}

impl GammaCache {
    pub fn new(state: &ParameterState) -> Result<Self> {
        Ok(GammaCache {
            gamma: crate::model::all_coefficients(state)?,
        })
    }

    pub fn slice(&self, p: usize, m: usize) -> &[f64] {
        &self.gamma[p][m]
    }

    /// Recompute one (p, m) slice from scratch.
    pub fn rebuild(&mut self, state: &ParameterState, p: usize, m: usize) -> Result<()> {
        let block = state.beta_view(p, m);
        let lam: Vec<i8> = (0..state.dims.rank)
            .map(|r| state.lambda_at(p, m, r))
            .collect();
        self.gamma[p][m] = crate::model::build_coefficient_matrix(&block, &lam)?;
        Ok(())
    }

    /// Recompute, for every view, the K-1 entries incident to node k after a
    /// node-block draw for predictor p.
    pub fn refresh_node(&mut self, state: &ParameterState, dataset: &MultiviewDataset, p: usize, k: usize) {
        let es = dataset.edge_set();
        let rank = state.dims.rank;
        for m in 0..state.dims.views {
            for &(edge, other) in &es.incident(k) {
                let mut sum = 0.0;
                for r in 0..rank {
                    let l = state.lambda_at(p, m, r);
                    if l != 0 {
                        sum += f64::from(l)
                            * state.beta[p][(k, m * rank + r)]
                            * state.beta[p][(other, m * rank + r)];
                    }
                }
                self.gamma[p][m][edge] = sum;
            }
        }
    }

    /// Additive update of one slice after a rank-indicator change.
    fn apply_rank_delta(&mut self, p: usize, m: usize, delta: i8, d: &[f64]) {
        if delta == 0 {
            return;
        }
        let scale = f64::from(delta);
        for (g, &dv) in self.gamma[p][m].iter_mut().zip(d) {
            *g += scale * dv;
        }
    }
}

/// Residual of cell (i, m, e) against everything except the intercept.
fn residual_no_mu(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    i: usize,
    m: usize,
    e: usize,
    aux: f64,
) -> f64 {
    let mut resid = dataset.edges(i, m)[e] - aux;
    for p in 0..state.dims.key {
        resid -= dataset.x(i, p) * gammas.slice(p, m)[e];
    }
    resid
}

/// Appendix-B item 1/2: mu_m | - ~ N(S / (sigma2 + nq), sigma2 / (sigma2 + nq))
/// with S the sum of residuals excluding the intercept.
pub fn draw_intercept(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    m: usize,
    rng: &mut Rng,
) -> f64 {
    draw_intercept_scaled(dataset, state, gammas, m, rng, 1.0)
}

pub(crate) fn draw_intercept_scaled(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    m: usize,
    rng: &mut Rng,
    var_scale: f64,
) -> f64 {
    let q = dataset.n_edges();
    let mut sum = 0.0;
    for i in 0..dataset.n() {
        let aux = state.aux_effect(dataset, i, m);
        for e in 0..q {
            sum += residual_no_mu(dataset, state, gammas, i, m, e, aux);
        }
    }
    let nq = (dataset.n() * q) as f64;
    let sigma2 = state.sigma2[m];
    let mean = sum / (sigma2 + nq);
    let var = sigma2 / (sigma2 + nq) * var_scale;
    sample_normal(mean, var.sqrt(), rng)
}

/// Appendix-B item 3/4: sigma2_m | - ~ IG(a + nq/2, b + rss/2) where the
/// residuals include the intercept.
pub fn draw_noise_variance(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    m: usize,
    config_a: f64,
    config_b: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let q = dataset.n_edges();
    let mut rss = 0.0;
    for i in 0..dataset.n() {
        let aux = state.aux_effect(dataset, i, m);
        for e in 0..q {
            let r = residual_no_mu(dataset, state, gammas, i, m, e, aux) - state.mu[m];
            rss += r * r;
        }
    }
    let shape = config_a + (dataset.n() * q) as f64 / 2.0;
    sample_inverse_gamma(shape, config_b + rss / 2.0, rng)
}

/// Appendix-B item 5/6: conjugate draw for one auxiliary coefficient; the
/// residuals exclude this coefficient's own contribution but keep every
/// other auxiliary predictor's.
pub fn draw_auxiliary(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    m: usize,
    a: usize,
    rng: &mut Rng,
) -> f64 {
    let q = dataset.n_edges();
    let mut cross = 0.0;
    let mut xsq = 0.0;
    for i in 0..dataset.n() {
        let xa = dataset.x_aux(i, a);
        xsq += xa * xa;
        let mut aux_others = 0.0;
        for a2 in 0..state.dims.aux {
            if a2 != a {
                aux_others += dataset.x_aux(i, a2) * state.alpha_at(m, a2);
            }
        }
        for e in 0..q {
            let z = residual_no_mu(dataset, state, gammas, i, m, e, aux_others) - state.mu[m];
            cross += xa * z;
        }
    }
    let sigma2 = state.sigma2[m];
    let denom = sigma2 + q as f64 * xsq;
    sample_normal(cross / denom, (sigma2 / denom).sqrt(), rng)
}

/// Stacked design for the collapsed node update (Appendix-B item 7): the
/// residual vector over the Mn(K-1) cells incident to node k, the design
/// matrix with per-view blocks x_i U_m Lambda_m, and the noise diagonal.
#[derive(Debug)]
pub struct NodeBlockDesign {
    pub z: DVector<f64>,
    pub u: DMatrix<f64>,
    pub noise_diag: DVector<f64>,
}

pub fn node_block_design(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    k: usize,
) -> NodeBlockDesign {
    let es = dataset.edge_set();
    let nodes = state.dims.nodes;
    let views = state.dims.views;
    let rank = state.dims.rank;
    let rows_per_subject = views * (nodes - 1);
    let d = dataset.n() * rows_per_subject;
    let latent = state.dims.latent();
    let mut z = DVector::<f64>::zeros(d);
    let mut u = DMatrix::<f64>::zeros(d, latent);
    let mut noise = DVector::<f64>::zeros(d);
    for m in 0..views {
        let incident = es.incident(k);
        for i in 0..dataset.n() {
            let xi = dataset.x(i, p);
            let aux = state.aux_effect(dataset, i, m);
            let y = dataset.edges(i, m);
            for (t, &(edge, other)) in incident.iter().enumerate() {
                let row = i * rows_per_subject + m * (nodes - 1) + t;
                let mut resid = y[edge] - state.mu[m] - aux;
                for p2 in 0..state.dims.key {
                    if p2 != p {
                        resid -= dataset.x(i, p2) * gammas.slice(p2, m)[edge];
                    }
                }
                z[row] = resid;
                noise[row] = state.sigma2[m];
                for r in 0..rank {
                    let l = state.lambda_at(p, m, r);
                    if l != 0 {
                        u[(row, m * rank + r)] =
                            xi * f64::from(l) * state.beta[p][(other, m * rank + r)];
                    }
                }
            }
        }
    }
    NodeBlockDesign {
        z,
        u,
        noise_diag: noise,
    }
}

/// The node evidence exploits the design's block structure: row blocks are
/// x_i D_m per (subject, view) with D_m = U_m Lambda_m shared across
/// subjects, so U^T A^-1 U collapses to per-view Gram matrices and the
/// Woodbury evidence costs O(Mn(K-1) + M(K-1)R^2 + (RM)^3) per node.
/// Algebraically identical to running `spike_slab_evidence` on the
/// materialized design from [`node_block_design`].
fn node_evidence(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    k: usize,
) -> Result<SpikeSlabEvidence> {
    let es = dataset.edge_set();
    let nodes = state.dims.nodes;
    let views = state.dims.views;
    let rank = state.dims.rank;
    let latent = state.dims.latent();
    let incident = es.incident(k);
    let n = dataset.n();
    let dim = views * n * (nodes - 1);
    let sxx: f64 = (0..n).map(|i| dataset.x(i, p) * dataset.x(i, p)).sum();
    let mut quad_diag = 0.0;
    let mut ln_det_diag = 0.0;
    let mut uau = DMatrix::<f64>::zeros(latent, latent);
    let mut h = DVector::<f64>::zeros(latent);
    let mut w = vec![0.0f64; nodes - 1];
    for m in 0..views {
        let sigma2 = state.sigma2[m];
        ln_det_diag += (n * (nodes - 1)) as f64 * sigma2.ln();
        let mut ssq = 0.0;
        w.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let x = dataset.x(i, p);
            let aux = state.aux_effect(dataset, i, m);
            let y = dataset.edges(i, m);
            for (t, &(edge, _)) in incident.iter().enumerate() {
                let mut z = y[edge] - state.mu[m] - aux;
                for p2 in 0..state.dims.key {
                    if p2 != p {
                        z -= dataset.x(i, p2) * gammas.slice(p2, m)[edge];
                    }
                }
                ssq += z * z;
                w[t] += x * z;
            }
        }
        quad_diag += ssq / sigma2;
        // D_m[t, r] = lambda_r * beta_{other_t, (m, r)}; Gram and projection
        // land in view m's diagonal block of the capacitance inputs.
        for r1 in 0..rank {
            let l1 = f64::from(state.lambda_at(p, m, r1));
            if l1 == 0.0 {
                continue;
            }
            let c1 = m * rank + r1;
            let mut proj = 0.0;
            for (t, &(_, other)) in incident.iter().enumerate() {
                proj += state.beta[p][(other, c1)] * w[t];
            }
            h[c1] = l1 * proj / sigma2;
            for r2 in r1..rank {
                let l2 = f64::from(state.lambda_at(p, m, r2));
                if l2 == 0.0 {
                    continue;
                }
                let c2 = m * rank + r2;
                let mut gram = 0.0;
                for &(_, other) in &incident {
                    gram += state.beta[p][(other, c1)] * state.beta[p][(other, c2)];
                }
                let value = l1 * l2 * sxx * gram / sigma2;
                uau[(c1, c2)] = value;
                uau[(c2, c1)] = value;
            }
        }
    }
    crate::dist::evidence_from_parts(quad_diag, ln_det_diag, dim, &uau, h, &state.j[p]).map_err(
        |e| match e {
            Error::Numerical {
                context,
                min_eigenvalue,
            } => Error::Numerical {
                context: format!("node block (p={}, k={}): {context}", p + 1, k + 1),
                min_eigenvalue,
            },
            other => other,
        },
    )
}

/// Appendix-B item 8: the collapsed inclusion probability
/// pi_k = eta N(z | 0, A + UJU^T) / [eta N(z | 0, A + UJU^T) + (1-eta) N(z | 0, A)],
/// computed in log domain.
pub fn node_slab_probability(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    k: usize,
) -> Result<f64> {
    let evidence = node_evidence(dataset, state, gammas, p, k)?;
    Ok(slab_probability(state.eta[p], &evidence))
}

fn slab_probability(eta: f64, evidence: &SpikeSlabEvidence) -> f64 {
    let log_odds = eta.ln() - (-eta).ln_1p() + evidence.log_slab - evidence.log_spike;
    1.0 / (1.0 + (-log_odds).exp())
}

/// Result of one joint (xi, beta) node draw.
#[derive(Debug)]
pub struct NodeBlockDraw {
    pub active: bool,
    /// Stacked latent vector of length RM; zero when inactive.
    pub coeffs: DVector<f64>,
    /// The collapsed inclusion probability used for the Bernoulli draw.
    pub slab_probability: f64,
}

/// Appendix-B items 7-8 jointly: draw xi from its collapsed conditional,
/// then beta from the slab posterior N(C^-1 h, C^-1) when active.
pub fn draw_node_block(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<NodeBlockDraw> {
    draw_node_block_scaled(dataset, state, gammas, p, k, rng, 1.0)
}

pub(crate) fn draw_node_block_scaled(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    k: usize,
    rng: &mut Rng,
    var_scale: f64,
) -> Result<NodeBlockDraw> {
    let evidence = node_evidence(dataset, state, gammas, p, k)?;
    let prob = slab_probability(state.eta[p], &evidence);
    let latent = state.dims.latent();
    if !rng.bernoulli(prob) {
        return Ok(NodeBlockDraw {
            active: false,
            coeffs: DVector::zeros(latent),
            slab_probability: prob,
        });
    }
    let mean = evidence.capacitance.solve(&evidence.h);
    let eps = DVector::from_fn(latent, |_, _| rng.standard_normal());
    // C = L L^T, so L^-T eps ~ N(0, C^-1).
    let spread = evidence
        .capacitance
        .l()
        .transpose()
        .solve_upper_triangular(&eps)
        .ok_or_else(|| Error::Numerical {
            context: format!("singular capacitance factor at node block (p={}, k={})", p + 1, k + 1),
            min_eigenvalue: 0.0,
        })?;
    Ok(NodeBlockDraw {
        active: true,
        coeffs: mean + spread * var_scale.sqrt(),
        slab_probability: prob,
    })
}

/// Per-(p, m) sufficient statistics for the rank-indicator draws: residuals
/// exclude predictor p's own coefficient contribution and are folded into
/// w_e = sum_i x_ip z_ie and sxx = sum_i x_ip^2, so each candidate branch
/// costs O(Q).
#[derive(Debug)]
pub struct RankStats {
    w: Vec<f64>,
    sxx: f64,
}

pub fn rank_stats(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    m: usize,
) -> RankStats {
    let q = dataset.n_edges();
    let mut w = vec![0.0; q];
    let mut sxx = 0.0;
    for i in 0..dataset.n() {
        let x = dataset.x(i, p);
        sxx += x * x;
        let aux = state.aux_effect(dataset, i, m);
        let y = dataset.edges(i, m);
        for e in 0..q {
            let mut z = y[e] - state.mu[m] - aux;
            for p2 in 0..state.dims.key {
                if p2 != p {
                    z -= dataset.x(i, p2) * gammas.slice(p2, m)[e];
                }
            }
            w[e] += x * z;
        }
    }
    RankStats { w, sxx }
}

/// Appendix-B items 9-10: categorical draw of lambda over {0, 1, -1} with
/// log weights log pi + full-view Gaussian likelihood, each branch built by
/// a rank-one delta on the cached coefficients.
pub fn draw_rank_indicator(
    dataset: &MultiviewDataset,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    m: usize,
    r: usize,
    rng: &mut Rng,
) -> i8 {
    let stats = rank_stats(dataset, state, gammas, p, m);
    draw_rank_indicator_with(&stats, state, gammas, p, m, r, rng)
}

/// Unnormalized log weights of the branches lambda in {0, 1, -1}; branch
/// likelihoods differ only through the rank-one delta on gamma, so each
/// costs O(Q) given the sufficient statistics.
pub(crate) fn rank_log_weights(
    stats: &RankStats,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    m: usize,
    r: usize,
) -> [f64; 3] {
    let edges = crate::edges::EdgeSet::new(state.dims.nodes);
    let rank = state.dims.rank;
    let current = f64::from(state.lambda_at(p, m, r));
    let gamma = gammas.slice(p, m);
    // Rank-one direction d_e = beta_{k1 r} beta_{k2 r} for view m.
    let col = m * rank + r;
    let d: Vec<f64> = edges
        .pairs()
        .map(|(k1, k2)| state.beta[p][(k1, col)] * state.beta[p][(k2, col)])
        .collect();
    let pi = state.pi_at(p, m, r);
    let sigma2 = state.sigma2[m];
    let branches = [0.0f64, 1.0, -1.0];
    let mut log_w = [0.0f64; 3];
    for (b, &s) in branches.iter().enumerate() {
        let shift = s - current;
        // Gaussian exponent pieces that differ across branches:
        // sum_e [-2 gamma_e w_e + sxx gamma_e^2] / (2 sigma2).
        let mut acc = 0.0;
        for e in 0..gamma.len() {
            let g = gamma[e] + shift * d[e];
            acc += -2.0 * g * stats.w[e] + stats.sxx * g * g;
        }
        log_w[b] = pi[b].ln() - acc / (2.0 * sigma2);
    }
    log_w
}

pub(crate) fn draw_rank_indicator_with(
    stats: &RankStats,
    state: &ParameterState,
    gammas: &GammaCache,
    p: usize,
    m: usize,
    r: usize,
    rng: &mut Rng,
) -> i8 {
    let log_w = rank_log_weights(stats, state, gammas, p, m, r);
    let idx = sample_categorical_log(&log_w, rng);
    [0i8, 1, -1][idx]
}

/// Rank-one coefficient direction used to update the cache after a
/// lambda draw; shared with [`draw_rank_indicator_with`].
pub(crate) fn apply_rank_draw(
    gammas: &mut GammaCache,
    state: &ParameterState,
    p: usize,
    m: usize,
    r: usize,
    old: i8,
    new: i8,
) {
    if old == new {
        return;
    }
    let rank = state.dims.rank;
    let col = m * rank + r;
    let edges = crate::edges::EdgeSet::new(state.dims.nodes);
    let d: Vec<f64> = edges
        .pairs()
        .map(|(k1, k2)| state.beta[p][(k1, col)] * state.beta[p][(k2, col)])
        .collect();
    gammas.apply_rank_delta(p, m, new - old, &d);
}

/// Appendix-B item 11: J_p | - ~ IW(nu + #active, I + sum over active nodes
/// of beta beta^T).
pub fn draw_latent_covariance(
    state: &ParameterState,
    p: usize,
    nu: f64,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    let latent = state.dims.latent();
    let mut scale = DMatrix::<f64>::identity(latent, latent);
    let mut active = 0usize;
    for k in 0..state.dims.nodes {
        if state.xi[p][k] {
            active += 1;
            let row = state.beta[p].row(k).transpose();
            scale += &row * row.transpose();
        }
    }
    sample_inverse_wishart(nu + active as f64, &scale, rng)
}

/// Appendix-B items 12-13: Dirichlet(r^omega + I(lambda=0), 1 + I(lambda=1),
/// 1 + I(lambda=-1)) with 1-based rank r.
pub fn draw_rank_probabilities(
    state: &ParameterState,
    p: usize,
    m: usize,
    r: usize,
    omega: f64,
    rng: &mut Rng,
) -> Result<[f64; 3]> {
    let lam = state.lambda_at(p, m, r);
    let alpha = [
        ((r + 1) as f64).powf(omega) + f64::from(u8::from(lam == 0)),
        1.0 + f64::from(u8::from(lam == 1)),
        1.0 + f64::from(u8::from(lam == -1)),
    ];
    let draw = sample_dirichlet(&alpha, rng)?;
    Ok([draw[0], draw[1], draw[2]])
}

/// Appendix-B item 14: eta_p | - ~ Beta(a + #active, b + K - #active).
pub fn draw_node_density(
    state: &ParameterState,
    p: usize,
    a_eta: f64,
    b_eta: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let active = state.xi[p].iter().filter(|&&x| x).count();
    let k = state.dims.nodes;
    sample_beta(a_eta + active as f64, b_eta + (k - active) as f64, rng)
}
