#![allow(clippy::needless_range_loop)]

mod common;

use consel_core::datastore::{FeatureShard, Manifest};
use consel_core::influence::{
    build_all_task_scores, build_all_task_scores_with, influence_matrix, stream_task_scores,
    task_mean_scores, vds_delta_features, InnerProduct,
};
use consel_core::projection::normalize_rows;
use consel_core::Error;
use rand::Rng;
use tempfile::tempdir;

fn blocks(shard: &FeatureShard, rows: usize) -> impl Iterator<Item = consel_core::Result<FeatureShard>> {
    shard.split(rows).into_iter().map(Ok)
}

#[test]
fn matrix_and_means_match_double_loop() {
    let mut rng = common::rng(100);
    for _ in 0..20 {
        let n = rng.random_range(1..=100);
        let v = rng.random_range(1..=20);
        let d = rng.random_range(1..=64);
        let train = common::unit_rows(&mut rng, n, d);
        let val = common::unit_rows(&mut rng, v, d);
        let (ts, vs) = (common::shard_of(d, 0, &train), common::shard_of(d, 0, &val));
        let m = influence_matrix(blocks(&ts, 17), &vs, "t", InnerProduct::Cosine).unwrap();
        let oracle = common::naive_matrix(&train, &val);
        for i in 0..n {
            for j in 0..v {
                assert!((m.get(i, j) - oracle[i][j]).abs() <= 1e-12);
                assert!(m.get(i, j).abs() <= 1.0 + 1e-9);
            }
        }
        let means = task_mean_scores(&m).unwrap();
        for (a, b) in means.scores.iter().zip(common::naive_means(&train, &val)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn toy_manifest_matches_brute_force() {
    let mut rng = common::rng(101);
    let d = 8;
    let train = common::unit_rows(&mut rng, 20, d);
    let tasks = vec![
        ("alpha", common::unit_rows(&mut rng, 3, d)),
        ("beta", common::unit_rows(&mut rng, 3, d)),
    ];
    let dir = tempdir().unwrap();
    let split = vec![train[..12].to_vec(), train[12..].to_vec()];
    common::write_toy_manifest(dir.path(), d, &split, &tasks);
    let manifest = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    let table = build_all_task_scores(&manifest, 5).unwrap();
    assert_eq!(table.task_names(), ["alpha", "beta"]);
    assert_eq!((table.n(), table.k()), (20, 2));
    for (k, (_, val)) in tasks.iter().enumerate() {
        let oracle = common::naive_means(&train, val);
        for i in 0..20 {
            assert!((table.get(i, k) - oracle[i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn streaming_equals_materialized_bit_for_bit() {
    let mut rng = common::rng(102);
    let d = 16;
    let train = common::shard_of(d, 0, &common::unit_rows(&mut rng, 61, d));
    let tasks: Vec<(String, FeatureShard)> = (0..3)
        .map(|k| (format!("t{k}"), common::shard_of(d, 0, &common::unit_rows(&mut rng, 4 + k, d))))
        .collect();
    let reference = stream_task_scores(blocks(&train, 61), &tasks, InnerProduct::Cosine).unwrap();
    for rows in [1, 3, 10, 64] {
        let t = stream_task_scores(blocks(&train, rows), &tasks, InnerProduct::Cosine).unwrap();
        assert_eq!(t, reference);
    }
    for (k, (name, val)) in tasks.iter().enumerate() {
        let m = influence_matrix(blocks(&train, 7), val, name, InnerProduct::Cosine).unwrap();
        let means = task_mean_scores(&m).unwrap().scores;
        let col = reference.column(k);
        assert_eq!(
            means.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            col.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn swapping_roles_transposes_entries() {
    let mut rng = common::rng(103);
    let a = common::unit_rows(&mut rng, 5, 6);
    let b = common::unit_rows(&mut rng, 4, 6);
    let (sa, sb) = (common::shard_of(6, 0, &a), common::shard_of(6, 0, &b));
    let ab = influence_matrix(blocks(&sa, 5), &sb, "ab", InnerProduct::Cosine).unwrap();
    let ba = influence_matrix(blocks(&sb, 4), &sa, "ba", InnerProduct::Cosine).unwrap();
    for i in 0..5 {
        for j in 0..4 {
            assert_eq!(ab.get(i, j), ba.get(j, i));
        }
    }
}

#[test]
fn permuting_tasks_permutes_columns() {
    let mut rng = common::rng(104);
    let d = 5;
    let train = common::unit_rows(&mut rng, 9, d);
    let a = common::unit_rows(&mut rng, 2, d);
    let b = common::unit_rows(&mut rng, 3, d);
    let dir1 = tempdir().unwrap();
    let dir2 = tempdir().unwrap();
    let m1 = common::write_toy_manifest(dir1.path(), d, std::slice::from_ref(&train), &[("a", a.clone()), ("b", b.clone())]);
    let m2 = common::write_toy_manifest(dir2.path(), d, &[train], &[("b", b), ("a", a)]);
    let t1 = build_all_task_scores(&m1, 4).unwrap();
    let t2 = build_all_task_scores(&m2, 4).unwrap();
    assert_eq!(t1.column(0), t2.column(1));
    assert_eq!(t1.column(1), t2.column(0));
}

#[test]
fn single_task_reduces_to_task_mean() {
    let mut rng = common::rng(105);
    let train = common::unit_rows(&mut rng, 11, 4);
    let val = common::unit_rows(&mut rng, 3, 4);
    let dir = tempdir().unwrap();
    let m = common::write_toy_manifest(dir.path(), 4, std::slice::from_ref(&train), &[("only", val.clone())]);
    let table = build_all_task_scores(&m, 3).unwrap();
    let matrix = influence_matrix(
        blocks(&common::shard_of(4, 0, &train), 11),
        &common::shard_of(4, 0, &val),
        "only",
        InnerProduct::Cosine,
    )
    .unwrap();
    assert_eq!(table.column(0), task_mean_scores(&matrix).unwrap().scores);
}

#[test]
fn cosine_requires_normalized_inputs() {
    let raw = FeatureShard::new(2, 0, vec![3.0, 4.0]).unwrap();
    let unit = FeatureShard::new(2, 0, vec![0.6, 0.8]).unwrap();
    let err = influence_matrix(blocks(&raw, 1), &unit, "t", InnerProduct::Cosine).unwrap_err();
    assert!(matches!(err, Error::NotNormalized(_)), "{err}");
    let err = influence_matrix(blocks(&unit, 1), &raw, "t", InnerProduct::Cosine).unwrap_err();
    assert!(matches!(err, Error::NotNormalized(_)), "{err}");
    let m = influence_matrix(blocks(&raw, 1), &raw, "t", InnerProduct::Raw).unwrap();
    assert_eq!(m.get(0, 0), 25.0);

    let mut rng = common::rng(106);
    let dir = tempdir().unwrap();
    let mut manifest = common::write_toy_manifest(
        dir.path(),
        3,
        &[common::unit_rows(&mut rng, 4, 3)],
        &[("t", common::unit_rows(&mut rng, 2, 3))],
    );
    manifest.normalized = false;
    assert!(matches!(
        build_all_task_scores(&manifest, 2),
        Err(Error::NotNormalized(_))
    ));
    assert!(build_all_task_scores_with(&manifest, 2, InnerProduct::Raw).is_ok());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let a = FeatureShard::new(2, 0, vec![1.0, 0.0]).unwrap();
    let b = FeatureShard::new(3, 0, vec![1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(
        influence_matrix(blocks(&a, 1), &b, "t", InnerProduct::Raw),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn vds_delta_is_elementwise_and_zero_when_identical() {
    let mut rng = common::rng(107);
    let clean: Vec<f32> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
    let noise: Vec<f32> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c = FeatureShard::new(6, 10, clean.clone()).unwrap();
    let n = FeatureShard::new(6, 10, noise.clone()).unwrap();
    let delta = vds_delta_features(&c, &n).unwrap();
    for (i, v) in delta.values().iter().enumerate() {
        assert_eq!(*v, clean[i] - noise[i]);
    }
    assert_eq!(delta.base_id(), 10);

    let zeros = FeatureShard::new(6, 10, vec![0.0; 30]).unwrap();
    assert_eq!(vds_delta_features(&c, &zeros).unwrap(), c);

    let same = normalize_rows(&vds_delta_features(&c, &c).unwrap()).shard;
    let val = common::shard_of(6, 0, &common::unit_rows(&mut rng, 3, 6));
    let m = influence_matrix(blocks(&same.with_base_id(0), 2), &val, "vds", InnerProduct::Cosine)
        .unwrap();
    assert!(m.entries.iter().all(|&e| e == 0.0));

    let shifted = FeatureShard::new(6, 0, noise).unwrap();
    assert!(vds_delta_features(&c, &shifted).is_err());
}
