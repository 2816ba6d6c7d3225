//! A seeded multitask classification universe: a labelled training pool with
//! injected label noise, and one validation set per task drawn from a
//! task-specific class mixture.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::datastore::FeatureShard;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub feature_dim: usize,
    pub n_classes: usize,
    pub n_tasks: usize,
    pub pool_size: usize,
    pub val_per_task: usize,
    /// Fraction of pool examples whose label is replaced by a wrong class.
    pub distractor_fraction: f64,
    /// Per-task class mixtures used to draw validation sets.
    pub mixtures: Vec<Vec<f64>>,
    /// Class mixture of the training pool.
    pub pool_mixture: Vec<f64>,
    /// Standard deviation of each coordinate of a class mean.
    pub class_spread: f64,
    /// Standard deviation of the isotropic noise around a class mean.
    pub noise_std: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::new(0)
    }
}

impl SyntheticSpec {
    pub fn new(seed: u64) -> Self {
        let (n_classes, n_tasks) = (10, 5);
        SyntheticSpec {
            seed,
            feature_dim: 20,
            n_classes,
            n_tasks,
            pool_size: 2000,
            val_per_task: 50,
            distractor_fraction: 0.2,
            mixtures: default_mixtures(n_tasks, n_classes),
            pool_mixture: default_pool_mixture(n_classes),
            class_spread: 0.8,
            noise_std: 0.4,
        }
    }

    pub fn with_distractors(mut self, fraction: f64) -> Self {
        self.distractor_fraction = fraction;
        self
    }

    /// Resizes the task/class layout, regenerating default mixtures.
    pub fn with_layout(mut self, n_tasks: usize, n_classes: usize) -> Self {
        self.n_tasks = n_tasks;
        self.n_classes = n_classes;
        self.mixtures = default_mixtures(n_tasks, n_classes);
        self.pool_mixture = default_pool_mixture(n_classes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.feature_dim == 0 || self.pool_size == 0 || self.val_per_task == 0 {
            return bad("feature_dim, pool_size and val_per_task must be positive".into());
        }
        if self.n_classes < 2 {
            return bad("need at least two classes".into());
        }
        if self.n_tasks == 0 {
            return bad("need at least one task".into());
        }
        if !(0.0..1.0).contains(&self.distractor_fraction) {
            return bad(format!(
                "distractor fraction {} is outside [0, 1)",
                self.distractor_fraction
            ));
        }
        if !(self.class_spread >= 0.0 && self.noise_std >= 0.0) {
            return bad("spreads must be non-negative".into());
        }
        if self.mixtures.len() != self.n_tasks {
            return bad(format!(
                "{} mixtures for {} tasks",
                self.mixtures.len(),
                self.n_tasks
            ));
        }
        let is_distribution = |m: &[f64]| {
            m.len() == self.n_classes
                && m.iter().all(|w| *w >= 0.0)
                && (m.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        for (k, m) in self.mixtures.iter().enumerate() {
            if !is_distribution(m) {
                return bad(format!("mixture {k} is not a distribution over classes"));
            }
        }
        if !is_distribution(&self.pool_mixture) {
            return bad("pool mixture is not a distribution over classes".into());
        }
        Ok(())
    }
}

fn relevant_classes(n_classes: usize) -> usize {
    n_classes.div_ceil(2).max(3.min(n_classes))
}

/// Fraction of the default pool drawn from task-relevant classes.
pub const RELEVANT_POOL_MASS: f64 = 0.3;

/// Pool mixture putting `RELEVANT_POOL_MASS` evenly on the relevant classes
/// and the rest evenly on the off-target ones.
pub fn default_pool_mixture(n_classes: usize) -> Vec<f64> {
    let relevant = relevant_classes(n_classes);
    if relevant == n_classes {
        return vec![1.0 / n_classes as f64; n_classes];
    }
    (0..n_classes)
        .map(|c| {
            if c < relevant {
                RELEVANT_POOL_MASS / relevant as f64
            } else {
                (1.0 - RELEVANT_POOL_MASS) / (n_classes - relevant) as f64
            }
        })
        .collect()
}

/// Validation mixtures over the first `ceil(n_classes / 2)` ("relevant")
/// classes; the remaining classes appear only in the pool, as off-target
/// data. Task `k` puts `focus_mass` on three consecutive relevant classes
/// starting at `k` (wrapping) and spreads the rest evenly over the other
/// relevant classes. `focus_mass` grows with `k` from 0.55 to 0.95, so tasks' influence
/// scores sit on different scales.
pub fn default_mixtures(n_tasks: usize, n_classes: usize) -> Vec<Vec<f64>> {
    let relevant = relevant_classes(n_classes);
    let focus_len = 3.min(relevant);
    (0..n_tasks)
        .map(|k| {
            let focus_mass = if focus_len == relevant {
                1.0
            } else if n_tasks == 1 {
                0.75
            } else {
                0.55 + 0.4 * k as f64 / (n_tasks - 1) as f64
            };
            let focus: Vec<usize> = (0..focus_len).map(|j| (k + j) % relevant).collect();
            let rest = relevant - focus_len;
            (0..n_classes)
                .map(|c| {
                    if focus.contains(&c) {
                        focus_mass / focus_len as f64
                    } else if c < relevant {
                        (1.0 - focus_mass) / rest as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Row-major features with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_shard(&self, base_id: u64) -> FeatureShard {
        let values = self.features.iter().map(|&v| v as f32).collect();
        FeatureShard::new(self.dim, base_id, values).expect("dim divides feature length")
    }

    pub fn from_shard(shard: &FeatureShard, labels: Vec<usize>) -> Result<Self> {
        if shard.count() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                shard.count(),
                labels.len()
            )));
        }
        Ok(Examples {
            dim: shard.dim(),
            features: shard.values().iter().map(|&v| f64::from(v)).collect(),
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub name: String,
    pub examples: Examples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: SyntheticSpec,
    /// Pool with observed (possibly corrupted) labels.
    pub pool: Examples,
    pub true_labels: Vec<usize>,
    pub tasks: Vec<TaskSet>,
}

impl World {
    pub fn is_distractor(&self, i: usize) -> bool {
        self.pool.labels[i] != self.true_labels[i]
    }

    pub fn distractor_count(&self) -> usize {
        (0..self.pool.len()).filter(|&i| self.is_distractor(i)).count()
    }

    pub fn task_names(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.name.clone()).collect()
    }

    /// Label data needed to rebuild the world from its feature shards.
    pub fn labels(&self) -> WorldLabels {
        WorldLabels {
            spec: self.spec.clone(),
            pool_labels: self.pool.labels.clone(),
            true_labels: self.true_labels.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskLabels {
                    name: t.name.clone(),
                    labels: t.examples.labels.clone(),
                })
                .collect(),
        }
    }

    pub fn from_parts(
        labels: WorldLabels,
        pool: &FeatureShard,
        vals: &[FeatureShard],
    ) -> Result<Self> {
        if vals.len() != labels.tasks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} validation shards for {} tasks",
                vals.len(),
                labels.tasks.len()
            )));
        }
        if labels.true_labels.len() != labels.pool_labels.len() {
            return Err(Error::DimensionMismatch("pool label lengths differ".into()));
        }
        let tasks = labels
            .tasks
            .into_iter()
            .zip(vals)
            .map(|(t, shard)| {
                Ok(TaskSet {
                    name: t.name,
                    examples: Examples::from_shard(shard, t.labels)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(World {
            spec: labels.spec,
            pool: Examples::from_shard(pool, labels.pool_labels)?,
            true_labels: labels.true_labels,
            tasks,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLabels {
    pub name: String,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLabels {
    pub spec: SyntheticSpec,
    pub pool_labels: Vec<usize>,
    pub true_labels: Vec<usize>,
    pub tasks: Vec<TaskLabels>,
}

fn draw_point(
    rng: &mut ChaCha8Rng,
    mean: &[f64],
    noise: &Normal<f64>,
    out: &mut Vec<f64>,
) {
    // Rounded through f32 so the in-memory world equals its on-disk form.
    out.extend(mean.iter().map(|m| f64::from((m + noise.sample(rng)) as f32)));
}

/// Builds a world deterministically from `spec`.
pub fn generate_multitask(spec: &SyntheticSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spread = Normal::new(0.0, spec.class_spread).expect("valid spread");
    let noise = Normal::new(0.0, spec.noise_std).expect("valid noise");
    let d = spec.feature_dim;

    let means: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..d).map(|_| spread.sample(&mut rng)).collect())
        .collect();

    let mut features = Vec::with_capacity(spec.pool_size * d);
    let mut true_labels = Vec::with_capacity(spec.pool_size);
    let pool_pick = WeightedIndex::new(&spec.pool_mixture).expect("validated mixture");
    for _ in 0..spec.pool_size {
        let c = pool_pick.sample(&mut rng);
        draw_point(&mut rng, &means[c], &noise, &mut features);
        true_labels.push(c);
    }

    let n_distract = (spec.distractor_fraction * spec.pool_size as f64).round() as usize;
    let mut ids: Vec<usize> = (0..spec.pool_size).collect();
    ids.shuffle(&mut rng);
    let mut labels = true_labels.clone();
    for &i in &ids[..n_distract] {
        let shift = rng.random_range(1..spec.n_classes);
        labels[i] = (true_labels[i] + shift) % spec.n_classes;
    }

    let tasks = spec
        .mixtures
        .iter()
        .enumerate()
        .map(|(k, mix)| {
            let pick = WeightedIndex::new(mix).expect("validated mixture");
            let mut f = Vec::with_capacity(spec.val_per_task * d);
            let mut l = Vec::with_capacity(spec.val_per_task);
            for _ in 0..spec.val_per_task {
                let c = pick.sample(&mut rng);
                draw_point(&mut rng, &means[c], &noise, &mut f);
                l.push(c);
            }
            TaskSet {
                name: format!("task{k}"),
                examples: Examples {
                    dim: d,
                    features: f,
                    labels: l,
                },
            }
        })
        .collect();

    Ok(World {
        spec: spec.clone(),
        pool: Examples {
            dim: d,
            features,
            labels,
        },
        true_labels,
        tasks,
    })
}
