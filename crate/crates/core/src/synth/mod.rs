//! Desk-scale end-to-end benchmark: synthetic world, warmup training, gradient
//! features, selection, and retraining on the selected subset.

mod model;
mod world;

pub use model::{per_example_gradient, softmax, train_sgd, ModelParams, TrainerConfig};
pub use world::{
    default_mixtures, generate_multitask, Examples, SyntheticSpec, TaskLabels, TaskSet, World,
    WorldLabels,
};

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{selection_size, Strategy};
use crate::datastore::{FeatureShard, ScoreTable};
use crate::error::{Error, Result};
use crate::influence::{stream_task_scores, InnerProduct};
use crate::projection::{normalize_rows, project_block, splitmix64, ProjectionSpec};
use crate::selection::{rel_metric, select, EvalReport, Provenance, SelectionResult};

// Independent RNG streams derived from the trainer seed.
const WARMUP_SUBSET: u64 = 0x5741_524d_5355_4253;
const WARMUP_ORDER: u64 = 0x5741_524d_4f52_4452;
const EVAL_ORDER: u64 = 0x4556_414c_4f52_4452;
const RANDOM_PICK: u64 = 0x5241_4e44_5049_434b;

fn stream_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ tag)
}

/// The warmup subset: a seeded random `ceil(r * N)` slice of the pool,
/// returned sorted.
pub fn warmup_ids(world: &World, config: &TrainerConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let m = selection_size(world.pool.len(), config.warmup_ratio)?;
    let mut ids: Vec<usize> = (0..world.pool.len()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(
        config.seed,
        WARMUP_SUBSET,
    )));
    ids.truncate(m);
    ids.sort_unstable();
    Ok(ids)
}

/// Trains from zero parameters on the warmup subset.
pub fn sgd_warmup(world: &World, config: &TrainerConfig) -> Result<ModelParams> {
    let ids = warmup_ids(world, config)?;
    let mut params = ModelParams::zeros(world.spec.n_classes, world.spec.feature_dim);
    train_sgd(
        &mut params,
        |i| world.pool.x(i).to_vec(),
        &world.pool.labels,
        &ids,
        config.learning_rate,
        config.epochs,
        stream_seed(config.seed, WARMUP_ORDER),
    )?;
    Ok(params)
}

/// Mean cross-entropy over `ids` of the pool.
pub fn mean_loss(params: &ModelParams, examples: &Examples, ids: &[usize]) -> f64 {
    ids.iter()
        .map(|&i| params.loss(examples.x(i), examples.labels[i]))
        .sum::<f64>()
        / ids.len() as f64
}

/// Per-example gradients of every row of `examples`, one shard row each.
pub fn gradient_shard(params: &ModelParams, examples: &Examples, base_id: u64) -> FeatureShard {
    let values: Vec<f32> = (0..examples.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            per_example_gradient(params, examples.x(i), examples.labels[i])
                .into_iter()
                .map(|v| v as f32)
        })
        .collect();
    FeatureShard::new(params.num_params(), base_id, values).expect("gradient rows")
}

/// Classification accuracy of `params` on each task's validation set.
pub fn task_accuracy(params: &ModelParams, world: &World) -> Vec<f64> {
    world
        .tasks
        .iter()
        .map(|t| {
            let ex = &t.examples;
            let hits = (0..ex.len())
                .filter(|&i| params.predict(ex.x(i)) == ex.labels[i])
                .count();
            hits as f64 / ex.len() as f64
        })
        .collect()
}

/// Trains a fresh model on exactly `ids` and reports per-task accuracy.
/// Training order depends on the trainer seed only, not on the order of `ids`.
pub fn evaluate_subset(world: &World, ids: &[usize], config: &TrainerConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if ids.is_empty() {
        return Err(Error::Empty("cannot train on an empty selection".into()));
    }
    if let Some(bad) = ids.iter().find(|&&i| i >= world.pool.len()) {
        return Err(Error::InvalidArgument(format!(
            "selected id {bad} outside pool of {}",
            world.pool.len()
        )));
    }
    let mut params = ModelParams::zeros(world.spec.n_classes, world.spec.feature_dim);
    train_sgd(
        &mut params,
        |i| world.pool.x(i).to_vec(),
        &world.pool.labels,
        ids,
        config.learning_rate,
        config.epochs,
        stream_seed(config.seed, EVAL_ORDER),
    )?;
    Ok(task_accuracy(&params, world))
}

/// A selection strategy, or the uniform random baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    Strategy(Strategy),
    Random,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionMethod::Strategy(s) => s.fmt(f),
            SelectionMethod::Random => f.write_str("random"),
        }
    }
}

impl From<Strategy> for SelectionMethod {
    fn from(s: Strategy) -> Self {
        SelectionMethod::Strategy(s)
    }
}

/// Uniformly random `ceil(p * n)` ids, seeded.
pub fn random_select(n: usize, p: f64, seed: u64) -> Result<SelectionResult> {
    let m = selection_size(n, p)?;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(seed, RANDOM_PICK)));
    ids.truncate(m);
    let provenance = ids
        .iter()
        .enumerate()
        .map(|(pos, &id)| Provenance {
            id,
            key: pos as f64,
            tie_break: 0.0,
        })
        .collect();
    let mut result = SelectionResult::new("random", m, ids, provenance);
    result.ratio = Some(p);
    result.seed = Some(seed);
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Projected gradient dimension.
    pub proj_dim: usize,
    pub proj_seed: u64,
    pub block_rows: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            proj_dim: 64,
            proj_seed: 0,
            block_rows: 256,
        }
    }
}

/// Projects then unit-normalizes a gradient shard block by block.
pub fn project_and_normalize(
    spec: &ProjectionSpec,
    shard: &FeatureShard,
    block_rows: usize,
) -> Result<FeatureShard> {
    let blocks = shard
        .split(block_rows)
        .iter()
        .map(|b| Ok(normalize_rows(&project_block(spec, b)?).shard))
        .collect::<Result<Vec<_>>>()?;
    FeatureShard::concat(&blocks)
}

/// Everything upstream of selection, computed once and reused across
/// strategies and ratios.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub world: World,
    pub trainer: TrainerConfig,
    pub warmup: ModelParams,
    pub projection: ProjectionSpec,
    pub table: ScoreTable,
    /// Per-task accuracy of a model trained on the whole pool.
    pub full_scores: Vec<f64>,
}

impl Prepared {
    pub fn new(
        spec: &SyntheticSpec,
        trainer: &TrainerConfig,
        pipeline: &PipelineConfig,
    ) -> Result<Self> {
        let world = generate_multitask(spec)?;
        let warmup = sgd_warmup(&world, trainer)?;
        let projection =
            ProjectionSpec::rademacher(pipeline.proj_seed, warmup.num_params(), pipeline.proj_dim);
        let pool = project_and_normalize(
            &projection,
            &gradient_shard(&warmup, &world.pool, 0),
            pipeline.block_rows,
        )?;
        let tasks = world
            .tasks
            .iter()
            .map(|t| {
                let g = gradient_shard(&warmup, &t.examples, 0);
                Ok((
                    t.name.clone(),
                    project_and_normalize(&projection, &g, pipeline.block_rows)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let table = stream_task_scores(
            pool.split(pipeline.block_rows).into_iter().map(Ok),
            &tasks,
            InnerProduct::Cosine,
        )?;
        let all: Vec<usize> = (0..world.pool.len()).collect();
        let full_scores = evaluate_subset(&world, &all, trainer)?;
        Ok(Prepared {
            world,
            trainer: trainer.clone(),
            warmup,
            projection,
            table,
            full_scores,
        })
    }

    pub fn select(&self, p: f64, method: SelectionMethod) -> Result<SelectionResult> {
        match method {
            SelectionMethod::Strategy(s) => select(&self.table, p, s),
            SelectionMethod::Random => random_select(self.table.n(), p, self.trainer.seed),
        }
    }

    pub fn run(&self, p: f64, method: SelectionMethod) -> Result<EndToEndReport> {
        let selection = self.select(p, method)?;
        let subset_scores = evaluate_subset(&self.world, &selection.selected, &self.trainer)?;
        let eval = rel_metric(&subset_scores, &self.full_scores)?;
        let distractors = selection
            .selected
            .iter()
            .filter(|&&i| self.world.is_distractor(i))
            .count();
        Ok(EndToEndReport {
            method: method.to_string(),
            ratio: p,
            distractor_fraction_selected: distractors as f64 / selection.selected.len() as f64,
            distractor_fraction_pool: self.world.distractor_count() as f64
                / self.world.pool.len() as f64,
            selection,
            eval,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub method: String,
    pub ratio: f64,
    pub selection: SelectionResult,
    pub eval: EvalReport,
    pub distractor_fraction_selected: f64,
    pub distractor_fraction_pool: f64,
}

/// Generate, warm up, extract and project gradients, score, select at ratio
/// `p`, retrain on the subset and compare against full-pool training.
pub fn end_to_end(
    spec: &SyntheticSpec,
    trainer: &TrainerConfig,
    p: f64,
    method: SelectionMethod,
) -> Result<EndToEndReport> {
    Prepared::new(spec, trainer, &PipelineConfig::default())?.run(p, method)
}
