//! Method selectors behind one interface: MetaInf's boosted-tree
//! meta-learner, the baselines it is compared with, and a ground-truth
//! oracle used for evaluation.

pub mod als;
pub mod kmeans;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{HardwareProfile, MethodConfig, PerformanceTensor, RankedMethod, TaskProfile};
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::eval::synth::SynthSpec;
use crate::perfdb::RecordStore;
use crate::predictor::features::{assemble, layout_for};
use crate::predictor::{train_gbm, train_ridge, FeatureLayout, GbmHyperparams, GbmModel, RidgeModel, TargetTransform};
use als::{als, AlsParams};
use kmeans::{kmeans, nearest};

pub const SELECTOR_FORMAT: &str = "metainf-selector";
pub const SELECTOR_VERSION: u32 = 1;

/// Anything that can order the candidate methods for a context.
pub trait MethodRanker {
    /// All candidate methods, ascending predicted runtime, ties broken by
    /// method index.
    fn rank_methods(&self, task: &TaskProfile, hw: &HardwareProfile) -> Result<Vec<RankedMethod>>;
}

impl<F> MethodRanker for F
where
    F: Fn(&TaskProfile, &HardwareProfile) -> Result<Vec<RankedMethod>>,
{
    fn rank_methods(&self, task: &TaskProfile, hw: &HardwareProfile) -> Result<Vec<RankedMethod>> {
        self(task, hw)
    }
}

/// Sorts `(method, runtime)` scores into a ranking.
pub fn rank_scores(scores: impl IntoIterator<Item = (MethodConfig, f64)>) -> Vec<RankedMethod> {
    let mut out: Vec<RankedMethod> = scores
        .into_iter()
        .map(|(method, predicted_runtime_s)| RankedMethod {
            method,
            predicted_runtime_s,
        })
        .collect();
    out.sort_by(|a, b| {
        a.predicted_runtime_s
            .total_cmp(&b.predicted_runtime_s)
            .then(a.method.index().cmp(&b.method.index()))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Metainf,
    GlobalBest,
    Isac,
    Argosmart,
    Alors,
    Ridge,
    Oracle,
}

impl SelectorKind {
    /// The learned selectors compared in evaluation reports.
    pub const COMPARED: [SelectorKind; 6] = [
        SelectorKind::Metainf,
        SelectorKind::GlobalBest,
        SelectorKind::Isac,
        SelectorKind::Argosmart,
        SelectorKind::Alors,
        SelectorKind::Ridge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Metainf => "metainf",
            SelectorKind::GlobalBest => "global_best",
            SelectorKind::Isac => "isac",
            SelectorKind::Argosmart => "argosmart",
            SelectorKind::Alors => "alors",
            SelectorKind::Ridge => "ridge",
            SelectorKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        [SelectorKind::Oracle]
            .into_iter()
            .chain(SelectorKind::COMPARED)
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown selector `{s}`")))
    }
}

/// Ground truth consulted by the oracle selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTruth {
    Tensor(PerformanceTensor),
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorSpec {
    Metainf {
        hyperparams: GbmHyperparams,
    },
    GlobalBest,
    Isac {
        clusters: usize,
        restarts: usize,
        seed: u64,
    },
    Argosmart {
        neighbors: usize,
    },
    Alors {
        params: AlsParams,
        /// Ridge penalty of the embedding → latent-factor map.
        cold_start_lambda: f64,
    },
    Ridge {
        lambda: f64,
    },
    Oracle {
        truth: OracleTruth,
    },
}

impl SelectorSpec {
    /// Default parameters for a learned selector kind. The oracle needs
    /// explicit truth and has no default.
    pub fn default_for(kind: SelectorKind) -> Result<Self> {
        Ok(match kind {
            SelectorKind::Metainf => SelectorSpec::Metainf {
                hyperparams: GbmHyperparams::default(),
            },
            SelectorKind::GlobalBest => SelectorSpec::GlobalBest,
            SelectorKind::Isac => SelectorSpec::Isac {
                clusters: 3,
                restarts: 10,
                seed: 0,
            },
            SelectorKind::Argosmart => SelectorSpec::Argosmart { neighbors: 1 },
            SelectorKind::Alors => SelectorSpec::Alors {
                params: AlsParams::default(),
                cold_start_lambda: 0.1,
            },
            SelectorKind::Ridge => SelectorSpec::Ridge { lambda: 1.0 },
            SelectorKind::Oracle => return Err(Error::invalid("the oracle selector needs ground truth")),
        })
    }

    pub fn kind(&self) -> SelectorKind {
        match self {
            SelectorSpec::Metainf { .. } => SelectorKind::Metainf,
            SelectorSpec::GlobalBest => SelectorKind::GlobalBest,
            SelectorSpec::Isac { .. } => SelectorKind::Isac,
            SelectorSpec::Argosmart { .. } => SelectorKind::Argosmart,
            SelectorSpec::Alors { .. } => SelectorKind::Alors,
            SelectorSpec::Ridge { .. } => SelectorKind::Ridge,
            SelectorSpec::Oracle { .. } => SelectorKind::Oracle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SelectorSpec::Metainf { hyperparams } => hyperparams.validate(),
            SelectorSpec::Isac { clusters, restarts, .. } if *clusters == 0 || *restarts == 0 => {
                Err(Error::invalid("isac needs clusters >= 1 and restarts >= 1"))
            }
            SelectorSpec::Argosmart { neighbors: 0 } => Err(Error::invalid("argosmart needs neighbors >= 1")),
            SelectorSpec::Alors { cold_start_lambda, .. } if !(*cold_start_lambda >= 0.0) => {
                Err(Error::invalid("alors cold-start lambda must be >= 0"))
            }
            SelectorSpec::Ridge { lambda } if !(*lambda >= 0.0) => Err(Error::invalid("ridge lambda must be >= 0")),
            _ => Ok(()),
        }
    }
}

/// Historical measurements with the profiles of every axis entry.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub tensor: PerformanceTensor,
    /// Aligned with `tensor.tasks()`.
    pub tasks: Vec<TaskProfile>,
    /// Aligned with `tensor.hardware()`.
    pub hardware: Vec<HardwareProfile>,
}

impl TrainingData {
    pub fn from_store(store: &RecordStore) -> Result<Self> {
        let tensor = store.assemble_tensor()?;
        let tasks = tensor.tasks().iter().map(|t| store.task_or_placeholder(t)).collect();
        let hardware = tensor.hardware().iter().map(|h| store.hardware_or_placeholder(h)).collect();
        let data = TrainingData { tensor, tasks, hardware };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, _, h) = self.tensor.shape();
        if n < 2 {
            return Err(Error::invalid(format!("training needs at least 2 tasks, got {n}")));
        }
        if self.tasks.len() != n || self.hardware.len() != h {
            return Err(Error::Integrity("profiles do not match tensor axes".into()));
        }
        Ok(())
    }

    /// Fits an embedding space over this data's axes.
    pub fn fit_space(
        &self,
        style: crate::embedding::PromptStyle,
        rank: usize,
        embedder: std::sync::Arc<crate::embedding::Embedder>,
    ) -> Result<EmbeddingSpace> {
        EmbeddingSpace::fit(&self.tasks, self.tensor.methods(), &self.hardware, style, rank, embedder)
    }
}

/// Mean of the present values; `None` if there are none.
fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Per-hardware and hardware-marginal mean runtime tables over a task subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTable {
    /// `[hardware][method]`.
    pub per_hardware: Vec<Vec<Option<f64>>>,
    /// `[method]`.
    pub marginal: Vec<Option<f64>>,
}

impl MeanTable {
    fn build(tensor: &PerformanceTensor, tasks: &[usize]) -> Self {
        let (_, m, h) = tensor.shape();
        let per_hardware = (0..h)
            .map(|k| (0..m).map(|j| mean(tasks.iter().map(|&i| tensor.get(i, j, k)))).collect())
            .collect();
        let marginal = (0..m)
            .map(|j| mean(tasks.iter().flat_map(|&i| (0..h).map(move |k| (i, k))).map(|(i, k)| tensor.get(i, j, k))))
            .collect();
        MeanTable { per_hardware, marginal }
    }

    fn scores(&self, hw: Option<usize>) -> impl Iterator<Item = f64> + '_ {
        let row = match hw {
            Some(k) => &self.per_hardware[k],
            None => &self.marginal,
        };
        row.iter().map(|v| v.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedState {
    Metainf {
        model: GbmModel,
    },
    GlobalBest {
        table: MeanTable,
    },
    Isac {
        centroids: Vec<Vec<f64>>,
        tables: Vec<MeanTable>,
    },
    Argosmart {
        neighbors: usize,
        task_vectors: Vec<Vec<f64>>,
        tensor: PerformanceTensor,
    },
    Alors {
        task_ids: Vec<String>,
        task_factors: Vec<Vec<f64>>,
        /// `[method * hardware + hw]`.
        col_factors: Vec<Vec<f64>>,
        cold_start: Vec<RidgeModel>,
    },
    Ridge {
        model: RidgeModel,
        means: Vec<f64>,
        scales: Vec<f64>,
    },
    Oracle {
        truth: OracleTruth,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSelector {
    pub format: String,
    pub version: u32,
    pub kind: SelectorKind,
    pub methods: Vec<MethodConfig>,
    pub hardware_ids: Vec<String>,
    pub space: Option<EmbeddingSpace>,
    pub state: FittedState,
}

fn training_rows(data: &TrainingData, space: &EmbeddingSpace) -> Result<(Vec<(Vec<f64>, f64)>, FeatureLayout)> {
    let tv: Vec<Vec<f64>> = data.tasks.iter().map(|t| space.task_vector(t)).collect::<Result<_>>()?;
    let mv: Vec<Vec<f64>> = data.tensor.methods().iter().map(|m| space.method_vector(*m)).collect::<Result<_>>()?;
    let hv: Vec<Vec<f64>> = data.hardware.iter().map(|h| space.hardware_vector(h)).collect::<Result<_>>()?;
    let methods = data.tensor.methods();
    let rows = data
        .tensor
        .present_cells()
        .map(|(i, j, k, y)| {
            (
                assemble(&tv[i], &mv[j], &hv[k], &data.tasks[i], methods[j], &data.hardware[k]),
                y,
            )
        })
        .collect();
    Ok((rows, layout_for(space)))
}

fn standardize(rows: &[(Vec<f64>, f64)]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].0.len();
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for (x, _) in rows {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for (x, _) in rows {
        for ((s, v), m) in scales.iter_mut().zip(x).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scales = scales.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
    (means, scales)
}

fn scale_row(x: &[f64], means: &[f64], scales: &[f64]) -> Vec<f64> {
    x.iter().zip(means).zip(scales).map(|((v, m), s)| (v - m) / s).collect()
}

/// Fits a selector on historical data, using `space` for every embedding.
pub fn fit(spec: &SelectorSpec, data: &TrainingData, space: &EmbeddingSpace) -> Result<FittedSelector> {
    spec.validate()?;
    data.validate()?;
    let tensor = &data.tensor;
    let (n, m, h) = tensor.shape();
    let all_tasks: Vec<usize> = (0..n).collect();
    let task_vectors = || -> Result<Vec<Vec<f64>>> { data.tasks.iter().map(|t| space.task_vector(t)).collect() };
    let state = match spec {
        SelectorSpec::Metainf { hyperparams } => {
            let (rows, layout) = training_rows(data, space)?;
            FittedState::Metainf {
                model: train_gbm(&rows, hyperparams, layout, TargetTransform::Log)?,
            }
        }
        SelectorSpec::GlobalBest => FittedState::GlobalBest {
            table: MeanTable::build(tensor, &all_tasks),
        },
        SelectorSpec::Isac {
            clusters,
            restarts,
            seed,
        } => {
            if n < *clusters {
                return Err(Error::invalid(format!("isac with {clusters} clusters needs at least {clusters} tasks, got {n}")));
            }
            let vectors = task_vectors()?;
            let km = kmeans(&vectors, *clusters, *restarts, *seed)?;
            let mut members = vec![Vec::new(); km.centroids.len()];
            for (i, v) in vectors.iter().enumerate() {
                members[nearest(&km.centroids, v)].push(i);
            }
            let tables = members.iter().map(|tasks| MeanTable::build(tensor, tasks)).collect();
            FittedState::Isac {
                centroids: km.centroids,
                tables,
            }
        }
        SelectorSpec::Argosmart { neighbors } => FittedState::Argosmart {
            neighbors: *neighbors,
            task_vectors: task_vectors()?,
            tensor: tensor.clone(),
        },
        SelectorSpec::Alors {
            params,
            cold_start_lambda,
        } => {
            let cells: Vec<(usize, usize, f64)> = tensor.present_cells().map(|(i, j, k, y)| (i, j * h + k, y.ln())).collect();
            let f = als(n, m * h, &cells, params)?;
            let vectors = task_vectors()?;
            let cold_start = (0..params.rank)
                .map(|d| {
                    let rows: Vec<(Vec<f64>, f64)> = vectors.iter().zip(&f.row_factors).map(|(x, u)| (x.clone(), u[d])).collect();
                    train_ridge(&rows, *cold_start_lambda)
                })
                .collect::<Result<_>>()?;
            FittedState::Alors {
                task_ids: tensor.tasks().to_vec(),
                task_factors: f.row_factors,
                col_factors: f.col_factors,
                cold_start,
            }
        }
        SelectorSpec::Ridge { lambda } => {
            let (rows, _) = training_rows(data, space)?;
            let (means, scales) = standardize(&rows);
            let scaled: Vec<(Vec<f64>, f64)> = rows.iter().map(|(x, y)| (scale_row(x, &means, &scales), y.ln())).collect();
            FittedState::Ridge {
                model: train_ridge(&scaled, *lambda)?,
                means,
                scales,
            }
        }
        SelectorSpec::Oracle { truth } => FittedState::Oracle { truth: truth.clone() },
    };
    let uses_space = !matches!(state, FittedState::GlobalBest { .. } | FittedState::Oracle { .. });
    Ok(FittedSelector {
        format: SELECTOR_FORMAT.into(),
        version: SELECTOR_VERSION,
        kind: spec.kind(),
        methods: tensor.methods().to_vec(),
        hardware_ids: tensor.hardware().to_vec(),
        space: uses_space.then(|| space.clone()),
        state,
    })
}

/// An oracle over the given truth, ranking `methods`.
pub fn oracle(truth: OracleTruth, methods: Vec<MethodConfig>) -> FittedSelector {
    let hardware_ids = match &truth {
        OracleTruth::Tensor(t) => t.hardware().to_vec(),
        OracleTruth::Synthetic(s) => s.hardware_profiles().into_iter().map(|h| h.id).collect(),
    };
    FittedSelector {
        format: SELECTOR_FORMAT.into(),
        version: SELECTOR_VERSION,
        kind: SelectorKind::Oracle,
        methods,
        hardware_ids,
        space: None,
        state: FittedState::Oracle { truth },
    }
}

impl FittedSelector {
    fn space(&self) -> Result<&EmbeddingSpace> {
        self.space.as_ref().ok_or_else(|| Error::Integrity(format!("{} selector has no embedding space", self.kind)))
    }

    fn hardware_index(&self, hw: &HardwareProfile) -> Option<usize> {
        self.hardware_ids.iter().position(|h| *h == hw.id)
    }

    fn features(&self, task: &TaskProfile, hw: &HardwareProfile) -> Result<Vec<Vec<f64>>> {
        let space = self.space()?;
        let t = space.task_vector(task)?;
        let h = space.hardware_vector(hw)?;
        self.methods
            .iter()
            .map(|m| Ok(assemble(&t, &space.method_vector(*m)?, &h, task, *m, hw)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sel: FittedSelector = serde_json::from_str(s)?;
        if sel.format != SELECTOR_FORMAT {
            return Err(Error::invalid(format!("not a selector file (format `{}`)", sel.format)));
        }
        if sel.version != SELECTOR_VERSION {
            return Err(Error::Version {
                found: sel.version,
                expected: SELECTOR_VERSION,
            });
        }
        Ok(sel)
    }

    /// The embedding space this selector scores with, if any.
    pub fn embedding_space(&self) -> Option<&EmbeddingSpace> {
        self.space.as_ref()
    }
}

impl MethodRanker for FittedSelector {
    fn rank_methods(&self, task: &TaskProfile, hw: &HardwareProfile) -> Result<Vec<RankedMethod>> {
        let methods = self.methods.iter().copied();
        let scores: Vec<f64> = match &self.state {
            FittedState::Metainf { model } => self
                .features(task, hw)?
                .iter()
                .map(|x| model.predict(x))
                .collect::<Result<_>>()?,
            FittedState::Ridge { model, means, scales } => self
                .features(task, hw)?
                .iter()
                .map(|x| Ok(model.predict(&scale_row(x, means, scales))?.exp()))
                .collect::<Result<_>>()?,
            FittedState::GlobalBest { table } => table.scores(self.hardware_index(hw)).collect(),
            FittedState::Isac { centroids, tables } => {
                let c = nearest(centroids, &self.space()?.task_vector(task)?);
                tables[c].scores(self.hardware_index(hw)).collect()
            }
            FittedState::Argosmart {
                neighbors,
                task_vectors,
                tensor,
            } => {
                let q = self.space()?.task_vector(task)?;
                let mut order: Vec<(f64, usize)> = task_vectors
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                    .collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let near: Vec<usize> = order.iter().take(*neighbors).map(|p| p.1).collect();
                let (_, _, h) = tensor.shape();
                let k = self.hardware_index(hw);
                (0..self.methods.len())
                    .map(|j| {
                        let cells = near.iter().flat_map(|&i| match k {
                            Some(k) => vec![tensor.get(i, j, k)],
                            None => (0..h).map(|k| tensor.get(i, j, k)).collect(),
                        });
                        mean(cells).unwrap_or(f64::INFINITY)
                    })
                    .collect()
            }
            FittedState::Alors {
                task_ids,
                task_factors,
                col_factors,
                cold_start,
            } => {
                let u: Vec<f64> = match task_ids.iter().position(|t| *t == task.id) {
                    Some(i) => task_factors[i].clone(),
                    None => {
                        let x = self.space()?.task_vector(task)?;
                        cold_start.iter().map(|r| r.predict(&x)).collect::<Result<_>>()?
                    }
                };
                let h = self.hardware_ids.len();
                let k = self.hardware_index(hw);
                (0..self.methods.len())
                    .map(|j| {
                        let cols: Vec<&Vec<f64>> = match k {
                            Some(k) => vec![&col_factors[j * h + k]],
                            None => (0..h).map(|k| &col_factors[j * h + k]).collect(),
                        };
                        let log_rt = cols.iter().map(|c| crate::linalg::dot(&u, c)).sum::<f64>() / cols.len() as f64;
                        log_rt.exp()
                    })
                    .collect()
            }
            FittedState::Oracle { truth } => self
                .methods
                .iter()
                .map(|m| match truth {
                    OracleTruth::Tensor(t) => t.lookup(&task.id, *m, &hw.id).ok_or_else(|| Error::UnknownId {
                        kind: "task or hardware",
                        id: format!("{} on {}", task.id, hw.id),
                    }),
                    OracleTruth::Synthetic(spec) => spec.true_runtime(task, *m, hw),
                })
                .collect::<Result<_>>()?,
        };
        Ok(rank_scores(methods.zip(scores)))
    }
}
