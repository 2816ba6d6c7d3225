mod common;

use consel_core::datastore::FeatureShard;
use consel_core::projection::{normalize_rows, project_block, projection_entry, ProjectionSpec};
use proptest::prelude::*;

fn bits(shard: &FeatureShard) -> Vec<u32> {
    shard.values().iter().map(|v| v.to_bits()).collect()
}

fn gaussian_shard(seed: u64, count: usize, dim: usize) -> FeatureShard {
    let mut rng = common::rng(seed);
    let rows: Vec<Vec<f32>> = common::gaussian_rows(&mut rng, count, dim)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as f32).collect())
        .collect();
    common::shard_of(dim, 0, &rows)
}

#[test]
fn matches_explicit_matrix_product() {
    let spec = ProjectionSpec::rademacher(11, 37, 9);
    let x = gaussian_shard(1, 5, 37);
    let y = project_block(&spec, &x).unwrap();
    for r in 0..5 {
        for o in 0..9 {
            let want: f64 = (0..37)
                .map(|c| projection_entry(&spec, o, c).unwrap() * f64::from(x.row(r)[c]))
                .sum();
            assert!((f64::from(y.row(r)[o]) - want).abs() <= 1e-6 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn block_partition_does_not_change_bits() {
    let spec = ProjectionSpec::rademacher(5, 210, 64);
    let x = gaussian_shard(2, 103, 210);
    let whole = project_block(&spec, &x).unwrap();
    for rows in [1, 7, 50, 103] {
        let parts: Vec<FeatureShard> = x
            .split(rows)
            .iter()
            .map(|b| project_block(&spec, b).unwrap())
            .collect();
        let joined = FeatureShard::concat(&parts).unwrap();
        assert_eq!(bits(&joined), bits(&whole));
        assert_eq!(joined.base_id(), 0);
    }
}

#[test]
fn worker_count_does_not_change_bits() {
    let spec = ProjectionSpec::rademacher(9, 300, 48);
    let x = gaussian_shard(3, 64, 300);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| project_block(&spec, &x).unwrap())
    };
    assert_eq!(bits(&run(1)), bits(&run(8)));
}

#[test]
fn linearity_within_tolerance() {
    let spec = ProjectionSpec::rademacher(13, 512, 128);
    let x = gaussian_shard(4, 20, 512);
    let y = gaussian_shard(5, 20, 512);
    let (a, b) = (0.75f32, -1.5f32);
    let combo: Vec<f32> = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(u, v)| a * u + b * v)
        .collect();
    let combo = FeatureShard::new(512, 0, combo).unwrap();
    let (px, py, pc) = (
        project_block(&spec, &x).unwrap(),
        project_block(&spec, &y).unwrap(),
        project_block(&spec, &combo).unwrap(),
    );
    for r in 0..20 {
        let want: Vec<f64> = px
            .row(r)
            .iter()
            .zip(py.row(r))
            .map(|(u, v)| f64::from(a) * f64::from(*u) + f64::from(b) * f64::from(*v))
            .collect();
        let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = pc
            .row(r)
            .iter()
            .zip(&want)
            .map(|(g, w)| (f64::from(*g) - w).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-5 * norm, "row {r}: {err} vs {norm}");
    }
}

#[test]
fn preserves_cosines_statistically() {
    let spec = ProjectionSpec::rademacher(21, 1024, 256);
    let mut rng = common::rng(6);
    let rows: Vec<Vec<f32>> = common::unit_rows(&mut rng, 400, 1024);
    let x = common::shard_of(1024, 0, &rows);
    let px = project_block(&spec, &x).unwrap();
    let cos = |a: &[f32], b: &[f32]| {
        let d = common::naive_dot(a, b);
        d / (common::naive_dot(a, a) * common::naive_dot(b, b)).sqrt()
    };
    let errs: Vec<f64> = (0..200)
        .map(|p| (cos(px.row(2 * p), px.row(2 * p + 1)) - cos(x.row(2 * p), x.row(2 * p + 1))).abs())
        .collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    // Error scale is about 1/sqrt(256).
    assert!(mean < 0.06, "mean error {mean}");
    assert!(errs.iter().all(|&e| e < 0.3));
}

#[test]
fn zero_rows_stay_zero_through_normalization() {
    let shard = FeatureShard::new(3, 4, vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0]).unwrap();
    let out = normalize_rows(&shard);
    assert_eq!(out.zero_rows, 1);
    assert_eq!(out.shard.row(0), &[0.0, 0.0, 0.0]);
    assert_eq!(out.shard.base_id(), 4);
    let r = out.shard.row(1);
    assert!((f64::from(r[0]) - 1.0 / 3.0).abs() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent_and_unit(
        dim in 1usize..16,
        rows in prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 16), 1..20),
    ) {
        let rows: Vec<Vec<f32>> = rows.into_iter().map(|r| r[..dim].to_vec()).collect();
        let shard = common::shard_of(dim, 0, &rows);
        let once = normalize_rows(&shard).shard;
        let twice = normalize_rows(&once).shard;
        for (a, b) in once.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        for r in once.rows() {
            let n = common::naive_dot(r, r).sqrt();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn entries_are_pure_and_scaled(seed in any::<u64>(), in_dim in 1usize..500, out_dim in 1usize..100, r in any::<prop::sample::Index>(), c in any::<prop::sample::Index>()) {
        let spec = ProjectionSpec::rademacher(seed, in_dim, out_dim);
        let (row, col) = (r.index(out_dim), c.index(in_dim));
        let e = projection_entry(&spec, row, col).unwrap();
        prop_assert_eq!(e, projection_entry(&spec, row, col).unwrap());
        prop_assert!((e.abs() - 1.0 / (out_dim as f64).sqrt()).abs() < 1e-15);
    }
}
