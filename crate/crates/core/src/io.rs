//! File contracts for datasets, truths, chain summaries, reports and run
//! metadata.
//!
//! All files are UTF-8 with LF line endings and `.` decimal separators.
//! Floats are written with Rust's shortest round-trip formatting, so
//! re-reading a summary reproduces the in-memory values exactly and writers
//! are byte-deterministic. Readers reject malformed input with the offending
//! line number; nothing is silently repaired except the documented
//! normalization of an edge's node pair to (min, max).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::dataset::{MultiviewDataset, View, ViewKind};
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::metrics::{quantile_sorted, EvaluationReport, MetricRow};
use crate::sampler::ChainOutput;
use crate::simulate::{Scenario, SyntheticTruth};

pub const EDGES_FILE: &str = "edges.csv";
pub const PREDICTORS_FILE: &str = "predictors.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const EDGE_SUMMARY_FILE: &str = "edge_coef_summary.csv";
pub const NODE_INCLUSION_FILE: &str = "node_inclusion.csv";
pub const SCALARS_FILE: &str = "scalars.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const RUN_META_FILE: &str = "run_meta.json";

/// Paths of one dataset bundle (a directory with the three files).
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub dir: PathBuf,
}

impl DatasetBundle {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DatasetBundle { dir: dir.into() }
    }

    pub fn edges_path(&self) -> PathBuf {
        self.dir.join(EDGES_FILE)
    }

    pub fn predictors_path(&self) -> PathBuf {
        self.dir.join(PREDICTORS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "P")]
    p: usize,
    #[serde(rename = "P_aux")]
    p_aux: usize,
    /// Absent means all views are continuous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    view_kinds: Option<Vec<ViewKind>>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write `edges.csv`, `predictors.csv` and `manifest.json`.
pub fn write_dataset(dataset: &MultiviewDataset, bundle: &DatasetBundle) -> Result<()> {
    let es = dataset.edge_set();
    let mut edges = String::from("subject_id,view,node_a,node_b,weight\n");
    for i in 0..dataset.n() {
        for m in 0..dataset.n_views() {
            let row = dataset.edges(i, m);
            for (e, (k1, k2)) in es.pairs().enumerate() {
                let _ = writeln!(
                    edges,
                    "{},{},{},{},{}",
                    i + 1,
                    m + 1,
                    k1 + 1,
                    k2 + 1,
                    row[e]
                );
            }
        }
    }
    write_file(&bundle.edges_path(), &edges)?;

    let mut preds = String::from("subject_id");
    for p in 0..dataset.n_key() {
        let _ = write!(preds, ",key_{}", p + 1);
    }
    for a in 0..dataset.n_aux() {
        let _ = write!(preds, ",aux_{}", a + 1);
    }
    preds.push('\n');
    for i in 0..dataset.n() {
        let _ = write!(preds, "{}", i + 1);
        for p in 0..dataset.n_key() {
            let _ = write!(preds, ",{}", dataset.x(i, p));
        }
        for a in 0..dataset.n_aux() {
            let _ = write!(preds, ",{}", dataset.x_aux(i, a));
        }
        preds.push('\n');
    }
    write_file(&bundle.predictors_path(), &preds)?;

    let kinds: Vec<ViewKind> = (0..dataset.n_views()).map(|m| dataset.view_kind(m)).collect();
    let manifest = Manifest {
        n: dataset.n(),
        k: dataset.nodes(),
        m: dataset.n_views(),
        p: dataset.n_key(),
        p_aux: dataset.n_aux(),
        view_kinds: if kinds.iter().any(|&k| k == ViewKind::Binary) {
            Some(kinds)
        } else {
            None
        },
    };
    write_json(&bundle.manifest_path(), &manifest)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    raw: &str,
) -> Result<T> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {field} from {raw:?}")))
}

/// Read and validate a dataset bundle.
pub fn read_dataset(bundle: &DatasetBundle) -> Result<MultiviewDataset> {
    let manifest_path = bundle.manifest_path();
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.n == 0 || manifest.k < 2 || manifest.m == 0 {
        return Err(Error::parse(
            &manifest_path,
            0,
            "manifest needs n >= 1, K >= 2, M >= 1",
        ));
    }
    if let Some(kinds) = &manifest.view_kinds {
        if kinds.len() != manifest.m {
            return Err(Error::parse(
                &manifest_path,
                0,
                format!("view_kinds has {} entries but M = {}", kinds.len(), manifest.m),
            ));
        }
    }
    let es = EdgeSet::new(manifest.k);
    let q = es.len();

    // Edge table.
    let path = bundle.edges_path();
    let text = read_file(&path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "subject_id,view,node_a,node_b,weight")) => {}
        other => {
            return Err(Error::parse(
                &path,
                1,
                format!(
                    "expected header subject_id,view,node_a,node_b,weight (got {:?})",
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            ))
        }
    }
    let mut weights: Vec<Vec<f64>> = vec![vec![f64::NAN; manifest.n * q]; manifest.m];
    let mut seen: Vec<Vec<bool>> = vec![vec![false; manifest.n * q]; manifest.m];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::parse(
                &path,
                lineno,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        }
        let subject: usize = parse_field(&path, lineno, "subject_id", cols[0])?;
        let view: usize = parse_field(&path, lineno, "view", cols[1])?;
        let a: usize = parse_field(&path, lineno, "node_a", cols[2])?;
        let b: usize = parse_field(&path, lineno, "node_b", cols[3])?;
        let weight: f64 = parse_field(&path, lineno, "weight", cols[4])?;
        if subject == 0 || subject > manifest.n {
            return Err(Error::parse(
                &path,
                lineno,
                format!("subject_id {subject} outside 1..={}", manifest.n),
            ));
        }
        if view == 0 || view > manifest.m {
            return Err(Error::parse(
                &path,
                lineno,
                format!("view {view} outside 1..={}", manifest.m),
            ));
        }
        if a == 0 || a > manifest.k || b == 0 || b > manifest.k {
            return Err(Error::parse(
                &path,
                lineno,
                format!("node index outside 1..={}", manifest.k),
            ));
        }
        if a == b {
            return Err(Error::parse(
                &path,
                lineno,
                format!("self-loop ({a},{a}) is not a stored edge"),
            ));
        }
        if !weight.is_finite() {
            return Err(Error::parse(&path, lineno, "weight is not finite"));
        }
        let (k1, k2) = (a.min(b) - 1, a.max(b) - 1);
        let cell = (subject - 1) * q + es.index(k1, k2);
        if seen[view - 1][cell] {
            return Err(Error::parse(
                &path,
                lineno,
                format!("duplicate row for subject {subject}, view {view}, edge ({a},{b})"),
            ));
        }
        seen[view - 1][cell] = true;
        weights[view - 1][cell] = weight;
    }
    for m in 0..manifest.m {
        if let Some(cell) = seen[m].iter().position(|&s| !s) {
            let subject = cell / q + 1;
            let (k1, k2) = es.pair(cell % q);
            return Err(Error::parse(
                &path,
                0,
                format!(
                    "missing edge row for subject {subject}, view {}, pair ({},{})",
                    m + 1,
                    k1 + 1,
                    k2 + 1
                ),
            ));
        }
    }

    // Predictor table.
    let path = bundle.predictors_path();
    let text = read_file(&path)?;
    let mut lines = text.lines().enumerate();
    let mut expected = String::from("subject_id");
    for p in 0..manifest.p {
        let _ = write!(expected, ",key_{}", p + 1);
    }
    for a in 0..manifest.p_aux {
        let _ = write!(expected, ",aux_{}", a + 1);
    }
    match lines.next() {
        Some((_, header)) if header == expected => {}
        other => {
            return Err(Error::parse(
                &path,
                1,
                format!(
                    "expected header {expected:?} (got {:?})",
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            ))
        }
    }
    let mut x = vec![f64::NAN; manifest.n * manifest.p];
    let mut x_aux = vec![f64::NAN; manifest.n * manifest.p_aux];
    let mut seen_subject = vec![false; manifest.n];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 1 + manifest.p + manifest.p_aux {
            return Err(Error::parse(
                &path,
                lineno,
                format!(
                    "expected {} columns, found {}",
                    1 + manifest.p + manifest.p_aux,
                    cols.len()
                ),
            ));
        }
        let subject: usize = parse_field(&path, lineno, "subject_id", cols[0])?;
        if subject == 0 || subject > manifest.n {
            return Err(Error::parse(
                &path,
                lineno,
                format!("subject_id {subject} outside 1..={}", manifest.n),
            ));
        }
        if seen_subject[subject - 1] {
            return Err(Error::parse(
                &path,
                lineno,
                format!("duplicate predictor row for subject {subject}"),
            ));
        }
        seen_subject[subject - 1] = true;
        for p in 0..manifest.p {
            let v: f64 = parse_field(&path, lineno, "key predictor", cols[1 + p])?;
            if !v.is_finite() {
                return Err(Error::parse(&path, lineno, "key predictor is not finite"));
            }
            x[(subject - 1) * manifest.p + p] = v;
        }
        for a in 0..manifest.p_aux {
            let v: f64 = parse_field(&path, lineno, "auxiliary predictor", cols[1 + manifest.p + a])?;
            if !v.is_finite() {
                return Err(Error::parse(&path, lineno, "auxiliary predictor is not finite"));
            }
            x_aux[(subject - 1) * manifest.p_aux + a] = v;
        }
    }
    if let Some(missing) = seen_subject.iter().position(|&s| !s) {
        return Err(Error::parse(
            &path,
            0,
            format!("missing predictor row for subject {}", missing + 1),
        ));
    }

    let kinds = manifest
        .view_kinds
        .unwrap_or_else(|| vec![ViewKind::Continuous; manifest.m]);
    let views = weights
        .into_iter()
        .zip(kinds)
        .map(|(w, kind)| View { kind, weights: w })
        .collect();
    MultiviewDataset::new(
        manifest.n,
        manifest.k,
        views,
        x,
        manifest.p,
        x_aux,
        manifest.p_aux,
    )
}

/// Serialized ground truth for later scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub scenario: Scenario,
    pub seed: u64,
    pub replication: usize,
    pub xi0: Vec<bool>,
    /// Per view, upper-triangular true coefficients in canonical order.
    pub gamma0: Vec<Vec<f64>>,
    pub mu0: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl TruthFile {
    pub fn new(truth: &SyntheticTruth, scenario: &Scenario, seed: u64, replication: usize) -> Self {
        TruthFile {
            scenario: scenario.clone(),
            seed,
            replication,
            xi0: truth.xi0.clone(),
            gamma0: truth.gamma0.clone(),
            mu0: truth.mu0.clone(),
            alpha0: truth.alpha0.clone(),
            sigma2: truth.sigma2.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Per-edge posterior summaries plus node inclusion, as written to disk.
#[derive(Debug, Clone)]
pub struct ChainSummaryFile {
    pub key: usize,
    pub views: usize,
    pub nodes: usize,
    pub n_edges: usize,
    /// Indexed `(p * views + m) * n_edges + e`.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
    /// Indexed `p * nodes + k`.
    pub pip: Vec<f64>,
    pub selected: Vec<bool>,
}

/// Write `edge_coef_summary.csv`, `node_inclusion.csv` and `scalars.csv`.
pub fn write_chain_summary(chain: &ChainOutput, dir: &Path) -> Result<()> {
    let dims = chain.dims;
    let es = EdgeSet::new(dims.nodes);
    let mut edge_csv = String::from("predictor,view,node_a,node_b,mean,sd,q025,q975\n");
    for p in 0..dims.key {
        for m in 0..dims.views {
            for (e, (k1, k2)) in es.pairs().enumerate() {
                let mut series = chain.gamma_series(p, m, e);
                let n = series.len() as f64;
                let mean = series.iter().sum::<f64>() / n;
                let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                series.sort_by(f64::total_cmp);
                let q025 = quantile_sorted(&series, 0.025);
                let q975 = quantile_sorted(&series, 0.975);
                let _ = writeln!(
                    edge_csv,
                    "{},{},{},{},{},{},{},{}",
                    p + 1,
                    m + 1,
                    k1 + 1,
                    k2 + 1,
                    mean,
                    sd,
                    q025,
                    q975
                );
            }
        }
    }
    write_file(&dir.join(EDGE_SUMMARY_FILE), &edge_csv)?;

    let mut node_csv = String::from("predictor,node,pip,selected\n");
    for p in 0..dims.key {
        for k in 0..dims.nodes {
            let pip = chain.pip(p, k);
            let _ = writeln!(
                node_csv,
                "{},{},{},{}",
                p + 1,
                k + 1,
                pip,
                u8::from(pip > 0.5)
            );
        }
    }
    write_file(&dir.join(NODE_INCLUSION_FILE), &node_csv)?;

    let mut scalars = String::from("draw");
    for m in 0..dims.views {
        let _ = write!(scalars, ",mu_{}", m + 1);
    }
    for m in 0..dims.views {
        let _ = write!(scalars, ",sigma2_{}", m + 1);
    }
    for m in 0..dims.views {
        for a in 0..dims.aux {
            let _ = write!(scalars, ",alpha_{}_{}", a + 1, m + 1);
        }
    }
    for p in 0..dims.key {
        let _ = write!(scalars, ",eta_{}", p + 1);
    }
    scalars.push('\n');
    for s in 0..chain.n_retained() {
        let _ = write!(scalars, "{}", s + 1);
        for m in 0..dims.views {
            let _ = write!(scalars, ",{}", chain.mu[s][m]);
        }
        for m in 0..dims.views {
            let _ = write!(scalars, ",{}", chain.sigma2[s][m]);
        }
        for m in 0..dims.views {
            for a in 0..dims.aux {
                let _ = write!(scalars, ",{}", chain.alpha[s][m * dims.aux + a]);
            }
        }
        for p in 0..dims.key {
            let _ = write!(scalars, ",{}", chain.eta[s][p]);
        }
        scalars.push('\n');
    }
    write_file(&dir.join(SCALARS_FILE), &scalars)
}

/// Read back the summary files written by [`write_chain_summary`].
pub fn read_chain_summary(dir: &Path) -> Result<ChainSummaryFile> {
    let path = dir.join(EDGE_SUMMARY_FILE);
    let text = read_file(&path)?;
    let mut rows: Vec<(usize, usize, usize, usize, f64, f64, f64, f64)> = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "predictor,view,node_a,node_b,mean,sd,q025,q975")) => {}
        _ => return Err(Error::parse(&path, 1, "bad edge summary header")),
    }
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::parse(&path, lineno, "expected 8 columns"));
        }
        rows.push((
            parse_field(&path, lineno, "predictor", cols[0])?,
            parse_field(&path, lineno, "view", cols[1])?,
            parse_field(&path, lineno, "node_a", cols[2])?,
            parse_field(&path, lineno, "node_b", cols[3])?,
            parse_field(&path, lineno, "mean", cols[4])?,
            parse_field(&path, lineno, "sd", cols[5])?,
            parse_field(&path, lineno, "q025", cols[6])?,
            parse_field(&path, lineno, "q975", cols[7])?,
        ));
    }
    if rows.is_empty() {
        return Err(Error::parse(&path, 0, "edge summary has no rows"));
    }
    let key = rows.iter().map(|r| r.0).max().unwrap();
    let views = rows.iter().map(|r| r.1).max().unwrap();
    let nodes = rows.iter().map(|r| r.3).max().unwrap();
    let es = EdgeSet::new(nodes);
    let q = es.len();
    if rows.len() != key * views * q {
        return Err(Error::parse(
            &path,
            0,
            format!("expected {} rows for P·M·Q, found {}", key * views * q, rows.len()),
        ));
    }
    let total = key * views * q;
    let (mut mean, mut sd) = (vec![f64::NAN; total], vec![f64::NAN; total]);
    let (mut q025, mut q975) = (vec![f64::NAN; total], vec![f64::NAN; total]);
    for (p, m, a, b, mn, s, lo, hi) in rows {
        let idx = ((p - 1) * views + (m - 1)) * q + es.index(a - 1, b - 1);
        mean[idx] = mn;
        sd[idx] = s;
        q025[idx] = lo;
        q975[idx] = hi;
    }

    let path = dir.join(NODE_INCLUSION_FILE);
    let text = read_file(&path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "predictor,node,pip,selected")) => {}
        _ => return Err(Error::parse(&path, 1, "bad node inclusion header")),
    }
    let mut pip = vec![f64::NAN; key * nodes];
    let mut selected = vec![false; key * nodes];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::parse(&path, lineno, "expected 4 columns"));
        }
        let p: usize = parse_field(&path, lineno, "predictor", cols[0])?;
        let k: usize = parse_field(&path, lineno, "node", cols[1])?;
        let slot = (p - 1) * nodes + (k - 1);
        pip[slot] = parse_field(&path, lineno, "pip", cols[2])?;
        let sel: u8 = parse_field(&path, lineno, "selected", cols[3])?;
        selected[slot] = sel != 0;
    }
    Ok(ChainSummaryFile {
        key,
        views,
        nodes,
        n_edges: q,
        mean,
        sd,
        q025,
        q975,
        pip,
        selected,
    })
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `report.csv` (one row per scalar metric).
pub fn write_report(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut text = String::from("metric,predictor,view,value,stderr\n");
    for row in &report.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            row.metric,
            fmt_opt(row.predictor),
            fmt_opt(row.view),
            row.value,
            row.stderr.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    write_file(path, &text)
}

pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "metric,predictor,view,value,stderr")) => {}
        _ => return Err(Error::parse(path, 1, "bad report header")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::parse(path, lineno, "expected 5 columns"));
        }
        let opt = |raw: &str, field: &str| -> Result<Option<usize>> {
            if raw.is_empty() {
                Ok(None)
            } else {
                parse_field(path, lineno, field, raw).map(Some)
            }
        };
        rows.push(MetricRow {
            metric: cols[0].to_string(),
            predictor: opt(cols[1], "predictor")?,
            view: opt(cols[2], "view")?,
            value: parse_field(path, lineno, "value", cols[3])?,
            stderr: if cols[4].is_empty() {
                None
            } else {
                Some(parse_field(path, lineno, "stderr", cols[4])?)
            },
        });
    }
    Ok(EvaluationReport {
        rows,
        pips: Vec::new(),
    })
}

/// Resolved invocation record, sufficient to reproduce a run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
    /// Where each resolved config field came from: flag, file or default.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sources: BTreeMap<String, String>,
}

pub fn write_run_meta(meta: &RunMeta, dir: &Path) -> Result<()> {
    write_json(&dir.join(RUN_META_FILE), meta)
}

pub fn read_run_meta(dir: &Path) -> Result<RunMeta> {
    read_json(&dir.join(RUN_META_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Rng;
    use crate::simulate;
    use proptest::prelude::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("mvnet-io-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_dataset(seed: u64) -> MultiviewDataset {
        let sc = simulate::named_scenario("desk-tiny").unwrap();
        let sc = simulate::Scenario {
            n: 4,
            nodes: 5,
            ..sc
        };
        let mut rng = Rng::from_seed(seed);
        let truth = simulate::generate_truth(&sc, &mut rng).unwrap();
        simulate::generate_dataset(&truth, &sc, &mut rng).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_identity() {
        let dir = temp_dir("roundtrip");
        let data = small_dataset(3);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let back = read_dataset(&bundle).unwrap();
        assert_eq!(back.n(), data.n());
        assert_eq!(back.nodes(), data.nodes());
        for m in 0..data.n_views() {
            for i in 0..data.n() {
                assert_eq!(back.edges(i, m), data.edges(i, m));
            }
        }
        for i in 0..data.n() {
            assert_eq!(back.x(i, 0), data.x(i, 0));
            assert_eq!(back.x_aux(i, 0), data.x_aux(i, 0));
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn writers_are_deterministic() {
        let dir_a = temp_dir("det-a");
        let dir_b = temp_dir("det-b");
        let data = small_dataset(9);
        write_dataset(&data, &DatasetBundle::new(&dir_a)).unwrap();
        write_dataset(&data, &DatasetBundle::new(&dir_b)).unwrap();
        for name in [EDGES_FILE, PREDICTORS_FILE, MANIFEST_FILE] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
        fs::remove_dir_all(&dir_a).unwrap();
        fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn self_loop_rejected_with_line_number() {
        let dir = temp_dir("selfloop");
        let data = small_dataset(5);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let path = bundle.edges_path();
        let mut text = read_file(&path).unwrap();
        // Corrupt the first data row into a self-loop.
        text = text.replacen("1,1,1,2,", "1,1,2,2,", 1);
        fs::write(&path, text).unwrap();
        match read_dataset(&bundle) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("self-loop"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_cell_names_subject_view_pair() {
        let dir = temp_dir("missing");
        let data = small_dataset(6);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let path = bundle.edges_path();
        let text = read_file(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(3); // drop subject 1, view 1, pair (1,4)
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        match read_dataset(&bundle) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("missing edge row"), "{message}");
                assert!(message.contains("(1,4)"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn duplicate_row_rejected() {
        let dir = temp_dir("dup");
        let data = small_dataset(7);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let path = bundle.edges_path();
        let text = read_file(&path).unwrap();
        let second_row = text.lines().nth(1).unwrap().to_string();
        fs::write(&path, format!("{text}{second_row}\n")).unwrap();
        match read_dataset(&bundle) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reversed_node_pair_is_normalized() {
        let dir = temp_dir("swap");
        let data = small_dataset(8);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let path = bundle.edges_path();
        let text = read_file(&path).unwrap();
        // Swap node columns of the first data row: 1,1,1,2 -> 1,1,2,1.
        let swapped = text.replacen("1,1,1,2,", "1,1,2,1,", 1);
        fs::write(&path, swapped).unwrap();
        let back = read_dataset(&bundle).unwrap();
        assert_eq!(back.edges(0, 0), data.edges(0, 0));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn nan_weight_rejected() {
        let dir = temp_dir("nan");
        let data = small_dataset(10);
        let bundle = DatasetBundle::new(&dir);
        write_dataset(&data, &bundle).unwrap();
        let path = bundle.edges_path();
        let text = read_file(&path).unwrap();
        let first_row = text.lines().nth(1).unwrap();
        let broken = text.replacen(first_row, &{
            let mut cols: Vec<&str> = first_row.split(',').collect();
            cols[4] = "NaN";
            cols.join(",")
        }, 1);
        fs::write(&path, broken).unwrap();
        match read_dataset(&bundle) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("not finite"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn chain_summary_round_trip_and_counts() {
        let dir = temp_dir("summary");
        let sc = simulate::Scenario {
            n: 6,
            nodes: 4,
            ..simulate::named_scenario("desk-tiny").unwrap()
        };
        let mut rng = Rng::from_seed(11);
        let truth = simulate::generate_truth(&sc, &mut rng).unwrap();
        let data = simulate::generate_dataset(&truth, &sc, &mut rng).unwrap();
        let cfg = ModelConfig {
            r: 2,
            n_iter: 120,
            n_burnin: 20,
            thin: 2,
            ..ModelConfig::default()
        };
        let mut chain_rng = Rng::from_seed(1);
        let chain = crate::sampler::run_chain(&data, &cfg, &mut chain_rng).unwrap();
        write_chain_summary(&chain, &dir).unwrap();

        // Row counts: P*M*Q edges and one scalars row per retained draw.
        let edge_text = read_file(&dir.join(EDGE_SUMMARY_FILE)).unwrap();
        assert_eq!(edge_text.lines().count() - 1, 1 * 2 * 6);
        let scalars = read_file(&dir.join(SCALARS_FILE)).unwrap();
        assert_eq!(scalars.lines().count() - 1, chain.n_retained());

        let summary = read_chain_summary(&dir).unwrap();
        assert_eq!(summary.n_edges, 6);
        // Exact round trip of the in-memory values.
        let series = chain.gamma_series(0, 0, 0);
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        assert_eq!(summary.mean[0], mean);
        assert_eq!(summary.pip[2], chain.pip(0, 2));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn report_round_trip() {
        let dir = temp_dir("report");
        let report = EvaluationReport {
            rows: vec![
                MetricRow {
                    metric: "mse".into(),
                    predictor: Some(1),
                    view: Some(2),
                    value: 0.125,
                    stderr: None,
                },
                MetricRow {
                    metric: "auc".into(),
                    predictor: Some(1),
                    view: None,
                    value: 0.9875,
                    stderr: Some(0.001953125),
                },
            ],
            pips: Vec::new(),
        };
        let path = dir.join(REPORT_FILE);
        write_report(&report, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back.rows, report.rows);
        fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        /// Random shortest-round-trip floats survive the CSV cycle exactly.
        #[test]
        fn float_round_trip(bits in proptest::collection::vec(any::<u32>(), 4)) {
            let dir = temp_dir(&format!("prop{}", bits[0]));
            let values: Vec<f64> = bits.iter().map(|&b| f64::from(b) / 1024.0 - 2000.0).collect();
            let report = EvaluationReport {
                rows: values
                    .iter()
                    .map(|&v| MetricRow {
                        metric: "x".into(),
                        predictor: None,
                        view: None,
                        value: v,
                        stderr: None,
                    })
                    .collect(),
                pips: Vec::new(),
            };
            let path = dir.join(REPORT_FILE);
            write_report(&report, &path).unwrap();
            let back = read_report(&path).unwrap();
            for (a, b) in back.rows.iter().zip(&report.rows) {
                prop_assert!(a.value == b.value);
            }
            fs::remove_dir_all(&dir).unwrap();
        }
    }
}
