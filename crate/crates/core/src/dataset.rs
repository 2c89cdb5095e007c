//! Multiview graph dataset: n subjects, M views on a shared node set, plus
//! key and auxiliary predictor matrices.

use serde::{Deserialize, Serialize};

use crate::edges::EdgeSet;
use crate::error::{Error, Result};

/// Edge-weight type of one view. Binary views are representable here but the
/// sampler rejects them; only continuous views are fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Continuous,
    Binary,
}

/// One view's edge weights for all subjects, stored subject-major: the slice
/// `[i*Q .. (i+1)*Q]` holds subject i's upper-triangular vector.
#[derive(Debug, Clone)]
pub struct View {
    pub kind: ViewKind,
    pub weights: Vec<f64>,
}

/// n subjects x M symmetric K x K graph views + predictor vectors.
#[derive(Debug, Clone)]
pub struct MultiviewDataset {
    n: usize,
    nodes: usize,
    views: Vec<View>,
    /// n x P, row-major (subject-major).
    x: Vec<f64>,
    p: usize,
    /// n x P_aux, row-major.
    x_aux: Vec<f64>,
    p_aux: usize,
}

impl MultiviewDataset {
    pub fn new(
        n: usize,
        nodes: usize,
        views: Vec<View>,
        x: Vec<f64>,
        p: usize,
        x_aux: Vec<f64>,
        p_aux: usize,
    ) -> Result<Self> {
        if n == 0 || nodes < 2 || views.is_empty() {
            return Err(Error::Config(format!(
                "dataset needs n >= 1, K >= 2, M >= 1 (got n={n}, K={nodes}, M={})",
                views.len()
            )));
        }
        let q = EdgeSet::new(nodes).len();
        for (m, view) in views.iter().enumerate() {
            if view.weights.len() != n * q {
                return Err(Error::Config(format!(
                    "view {} has {} weights, expected n*Q = {}",
                    m + 1,
                    view.weights.len(),
                    n * q
                )));
            }
            if let Some(bad) = view.weights.iter().find(|w| !w.is_finite()) {
                return Err(Error::Config(format!(
                    "view {} contains non-finite weight {bad}",
                    m + 1
                )));
            }
        }
        if x.len() != n * p || x_aux.len() != n * p_aux {
            return Err(Error::Config(
                "predictor matrix sizes do not match n*P / n*P_aux".into(),
            ));
        }
        if x.iter().chain(x_aux.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("predictors contain non-finite values".into()));
        }
        Ok(MultiviewDataset {
            n,
            nodes,
            views,
            x,
            p,
            x_aux,
            p_aux,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_key(&self) -> usize {
        self.p
    }

    pub fn n_aux(&self) -> usize {
        self.p_aux
    }

    pub fn edge_set(&self) -> EdgeSet {
        EdgeSet::new(self.nodes)
    }

    pub fn n_edges(&self) -> usize {
        self.edge_set().len()
    }

    pub fn view_kind(&self, m: usize) -> ViewKind {
        self.views[m].kind
    }

    pub fn all_continuous(&self) -> bool {
        self.views.iter().all(|v| v.kind == ViewKind::Continuous)
    }

    /// Subject i's upper-triangular edge vector for view m.
    pub fn edges(&self, i: usize, m: usize) -> &[f64] {
        let q = self.n_edges();
        &self.views[m].weights[i * q..(i + 1) * q]
    }

    pub fn x(&self, i: usize, p: usize) -> f64 {
        self.x[i * self.p + p]
    }

    pub fn x_aux(&self, i: usize, a: usize) -> f64 {
        self.x_aux[i * self.p_aux + a]
    }

    /// Dataset restricted to a single view (used by independent-learning fits).
    pub fn single_view(&self, m: usize) -> MultiviewDataset {
        MultiviewDataset {
            n: self.n,
            nodes: self.nodes,
            views: vec![self.views[m].clone()],
            x: self.x.clone(),
            p: self.p,
            x_aux: self.x_aux.clone(),
            p_aux: self.p_aux,
        }
    }

    /// Split subjects into a leading training set and trailing held-out set.
    pub fn split(&self, n_train: usize) -> Result<(MultiviewDataset, MultiviewDataset)> {
        if n_train == 0 || n_train >= self.n {
            return Err(Error::Config(format!(
                "split point {n_train} outside 1..{}",
                self.n
            )));
        }
        let take = |lo: usize, hi: usize| {
            let q = self.n_edges();
            let views = self
                .views
                .iter()
                .map(|v| View {
                    kind: v.kind,
                    weights: v.weights[lo * q..hi * q].to_vec(),
                })
                .collect();
            MultiviewDataset {
                n: hi - lo,
                nodes: self.nodes,
                views,
                x: self.x[lo * self.p..hi * self.p].to_vec(),
                p: self.p,
                x_aux: self.x_aux[lo * self.p_aux..hi * self.p_aux].to_vec(),
                p_aux: self.p_aux,
            }
        };
        Ok((take(0, n_train), take(n_train, self.n)))
    }
}
