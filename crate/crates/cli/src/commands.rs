use std::fs;
use std::path::Path;

use consel_core::aggregation::{rank_table, thresholds, vote_tally, Strategy};
use consel_core::datastore::{
    read_score_table, read_shard, stream_blocks_from, write_score_table, write_shard,
    FeatureShard, Manifest,
};
use consel_core::influence::{build_all_task_scores_with, InnerProduct};
use consel_core::projection::{normalize_rows, project_block, ProjectionSpec};
use consel_core::selection::{
    aggregate, parse_ids, rel_metric, specialist_overlap, vote_distribution_stats,
    SelectionResult,
};
use consel_core::synth::{
    evaluate_subset, generate_multitask, gradient_shard, mean_loss, sgd_warmup, warmup_ids,
    ModelParams, SyntheticSpec, TrainerConfig, World, WorldLabels,
};
use consel_core::{Error, Result};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{
    EvalArgs, GenSynthArgs, GradsArgs, InfluenceArgs, OverlapArgs, ProjectArgs, SelectArgs,
    StatsArgs, TrainerArgs, WarmupArgs, WorldArgs,
};

#[derive(Serialize, Deserialize)]
struct ModelFile {
    trainer: TrainerConfig,
    params: ModelParams,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_ids(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ids(&text)
}

fn trainer_config(a: &TrainerArgs) -> Result<TrainerConfig> {
    let config = TrainerConfig {
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        warmup_ratio: a.warmup_ratio,
        seed: a.seed,
    };
    config.validate()?;
    Ok(config)
}

fn check_ratios(ratios: &[f64]) -> Result<()> {
    match ratios.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        Some(p) => Err(Error::InvalidArgument(format!("ratio {p} is outside (0, 1]"))),
        None => Ok(()),
    }
}

fn load_world(a: &WorldArgs) -> Result<(Manifest, World)> {
    let manifest = Manifest::load(&a.manifest)?;
    let labels_path = match &a.world {
        Some(p) => p.clone(),
        None => manifest.root().join("world.json"),
    };
    let labels: WorldLabels = read_json(&labels_path)?;
    let parts = manifest
        .train_shards
        .iter()
        .map(|s| Ok(read_shard(&manifest.resolve(&s.path))?.with_base_id(s.base_id)))
        .collect::<Result<Vec<_>>>()?;
    let pool = FeatureShard::concat(&parts)?;
    let vals = manifest
        .tasks
        .iter()
        .map(|t| read_shard(&manifest.resolve(&t.val_shard)))
        .collect::<Result<Vec<_>>>()?;
    let world = World::from_parts(labels, &pool, &vals)?;
    if world.task_names() != manifest.task_names() {
        return Err(Error::InvalidManifest(
            "label file and manifest list different tasks".into(),
        ));
    }
    Ok((manifest, world))
}

pub fn gen_synth(a: &GenSynthArgs) -> Result<()> {
    let mut spec = SyntheticSpec::new(a.seed)
        .with_distractors(a.distractors)
        .with_layout(a.tasks, a.classes);
    spec.pool_size = a.pool_size;
    spec.val_per_task = a.val_per_task;
    spec.feature_dim = a.feature_dim;
    let world = generate_multitask(&spec)?;

    create_dir(&a.out)?;
    let mut manifest = Manifest::new(spec.feature_dim, &a.out);
    write_shard(&world.pool.to_shard(0), &a.out.join("pool.bin"))?;
    manifest.push_train_shard("pool.bin", world.pool.len() as u64);
    for task in &world.tasks {
        let file = format!("val_{}.bin", task.name);
        write_shard(&task.examples.to_shard(0), &a.out.join(&file))?;
        manifest.push_task(&task.name, file, task.examples.len() as u64);
    }
    manifest.save(&a.out.join("manifest.json"))?;
    write_json(&a.out.join("world.json"), &world.labels())?;
    info!(
        "wrote world with {} pool examples ({} distractors) and {} tasks to {}",
        world.pool.len(),
        world.distractor_count(),
        world.tasks.len(),
        a.out.display()
    );
    Ok(())
}

pub fn warmup(a: &WarmupArgs) -> Result<()> {
    let (_, world) = load_world(&a.world)?;
    let trainer = trainer_config(&a.trainer)?;
    let params = sgd_warmup(&world, &trainer)?;
    let ids = warmup_ids(&world, &trainer)?;
    let before = mean_loss(
        &ModelParams::zeros(world.spec.n_classes, world.spec.feature_dim),
        &world.pool,
        &ids,
    );
    info!(
        "warmup on {} examples: loss {before:.4} -> {:.4}",
        ids.len(),
        mean_loss(&params, &world.pool, &ids)
    );
    write_json(&a.out, &ModelFile { trainer, params })
}

pub fn grads(a: &GradsArgs) -> Result<()> {
    let (_, world) = load_world(&a.world)?;
    let model: ModelFile = read_json(&a.model)?;
    let params = model.params;
    if params.n_classes != world.spec.n_classes || params.feature_dim != world.spec.feature_dim {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{}, world needs {}x{}",
            params.n_classes, params.feature_dim, world.spec.n_classes, world.spec.feature_dim
        )));
    }
    create_dir(&a.out)?;
    let mut manifest = Manifest::new(params.num_params(), &a.out);
    write_shard(&gradient_shard(&params, &world.pool, 0), &a.out.join("pool.bin"))?;
    manifest.push_train_shard("pool.bin", world.pool.len() as u64);
    for task in &world.tasks {
        let file = format!("val_{}.bin", task.name);
        write_shard(&gradient_shard(&params, &task.examples, 0), &a.out.join(&file))?;
        manifest.push_task(&task.name, file, task.examples.len() as u64);
    }
    manifest.save(&a.out.join("manifest.json"))?;
    info!("wrote {}-dim gradients to {}", params.num_params(), a.out.display());
    Ok(())
}

fn project_file(
    spec: &ProjectionSpec,
    src: &Path,
    dst: &Path,
    block_rows: usize,
    base_id: u64,
) -> Result<usize> {
    let mut zero_rows = 0;
    let mut blocks = Vec::new();
    for block in stream_blocks_from(src, block_rows, base_id)? {
        let out = normalize_rows(&project_block(spec, &block?)?);
        zero_rows += out.zero_rows;
        blocks.push(out.shard);
    }
    if let Some(parent) = dst.parent() {
        create_dir(parent)?;
    }
    write_shard(&FeatureShard::concat(&blocks)?.with_base_id(0), dst)?;
    Ok(zero_rows)
}

pub fn project(a: &ProjectArgs) -> Result<()> {
    if a.block_rows == 0 {
        return Err(Error::InvalidArgument("--block-rows must be positive".into()));
    }
    let input = Manifest::load(&a.manifest)?;
    let spec = ProjectionSpec::rademacher(a.seed, input.feature_dim, a.proj_dim);
    spec.validate()?;
    create_dir(&a.out)?;
    let mut output = input.clone();
    output.set_root(&a.out);
    output.feature_dim = a.proj_dim;
    output.projection = Some(spec);
    output.normalized = true;

    let mut zero_rows = 0;
    for s in &input.train_shards {
        zero_rows += project_file(
            &spec,
            &input.resolve(&s.path),
            &output.resolve(&s.path),
            a.block_rows,
            s.base_id,
        )?;
    }
    for t in &input.tasks {
        zero_rows += project_file(
            &spec,
            &input.resolve(&t.val_shard),
            &output.resolve(&t.val_shard),
            a.block_rows,
            0,
        )?;
    }
    output.save(&a.out.join("manifest.json"))?;
    info!(
        "projected {} -> {} dims into {} ({zero_rows} zero rows)",
        input.feature_dim,
        a.proj_dim,
        a.out.display()
    );
    Ok(())
}

pub fn influence(a: &InfluenceArgs) -> Result<()> {
    if a.block_rows == 0 {
        return Err(Error::InvalidArgument("--block-rows must be positive".into()));
    }
    let manifest = Manifest::load(&a.manifest)?;
    manifest.validate_files()?;
    let mode = if a.raw {
        InnerProduct::Raw
    } else {
        InnerProduct::Cosine
    };
    let table = build_all_task_scores_with(&manifest, a.block_rows, mode)?;
    write_score_table(&table, &a.out)?;
    info!(
        "wrote {} x {} score table to {}",
        table.n(),
        table.k(),
        a.out.display()
    );
    Ok(())
}

fn stem(strategy: Strategy, p: f64) -> String {
    format!("{}_p{p}", strategy.name())
}

pub fn select(a: &SelectArgs, dry_run: bool) -> Result<()> {
    check_ratios(&a.ratios)?;
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.parse::<Strategy>())
        .collect::<Result<Vec<_>>>()?;
    let table = read_score_table(&a.scores)?;
    create_dir(&a.out)?;
    for &p in &a.ratios {
        for &strategy in &strategies {
            let stem = stem(strategy, p);
            if dry_run {
                let keys = match strategy {
                    Strategy::Vote => {
                        let tally = vote_tally(&table, &thresholds(&table, p)?)?;
                        serde_json::json!({
                            "strategy": strategy,
                            "p": p,
                            "thresholds": tally.thresholds.taus,
                            "votes": tally.votes,
                        })
                    }
                    Strategy::RoundRobin | Strategy::MinRank => {
                        let ranks = rank_table(&table);
                        let rows: Vec<&[usize]> = (0..table.n()).map(|i| ranks.ranks_of(i)).collect();
                        serde_json::json!({ "strategy": strategy, "p": p, "ranks": rows })
                    }
                    _ => serde_json::to_value(aggregate(&table, strategy).expect("key-based"))
                        .expect("serializable ranking"),
                };
                write_json(&a.out.join(format!("{stem}.keys.json")), &keys)?;
            } else {
                let mut result = consel_core::selection::select(&table, p, strategy)?;
                result.seed = a.seed;
                let ids_path = a.out.join(format!("{stem}.ids"));
                fs::write(&ids_path, result.ids_text()).map_err(|e| Error::io(&ids_path, e))?;
                write_json(&a.out.join(format!("{stem}.json")), &result.report_json())?;
                info!("{stem}: selected {} of {}", result.size, table.n());
            }
        }
    }
    Ok(())
}

pub fn stats(a: &StatsArgs) -> Result<()> {
    check_ratios(&a.ratios)?;
    let table = read_score_table(&a.scores)?;
    write_json(&a.out, &vote_distribution_stats(&table, &a.ratios)?)
}

pub fn overlap(a: &OverlapArgs) -> Result<()> {
    check_ratios(&[a.ratio])?;
    let table = read_score_table(&a.scores)?;
    let ids = read_ids(&a.selection)?;
    let generalist = SelectionResult::new("external", ids.len(), ids.clone(), Vec::new());
    let report = specialist_overlap(&table, a.ratio, &generalist)?;
    let mut value = serde_json::to_value(&report).expect("serializable report");
    if let Some(other) = &a.other {
        let other = read_ids(other)?;
        let shared = ids.iter().filter(|i| other.contains(i)).count();
        let frac = if ids.is_empty() {
            0.0
        } else {
            shared as f64 / ids.len() as f64
        };
        value["selection_overlap"] = serde_json::json!(frac);
    }
    write_json(&a.out, &value)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (_, world) = load_world(&a.world)?;
    let trainer = trainer_config(&a.trainer)?;
    let ids = read_ids(&a.selection)?;
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("selection lists an id twice".into()));
    }
    let subset = evaluate_subset(&world, &ids, &trainer)?;
    let all: Vec<usize> = (0..world.pool.len()).collect();
    let full = evaluate_subset(&world, &all, &trainer)?;
    let report = rel_metric(&subset, &full)?;
    let distractors = ids.iter().filter(|&&i| world.is_distractor(i)).count();
    info!("mean Rel {:.4} over {} tasks", report.mean_rel, report.rel.len());
    write_json(
        &a.out,
        &serde_json::json!({
            "selected": ids.len(),
            "pool": world.pool.len(),
            "eval": report,
            "distractor_fraction_selected": distractors as f64 / ids.len() as f64,
            "distractor_fraction_pool": world.distractor_count() as f64 / world.pool.len() as f64,
            "trainer": trainer,
        }),
    )
}
