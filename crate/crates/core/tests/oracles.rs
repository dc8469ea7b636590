//! Independent reference checks for metrics, data generation and the
//! structural properties of the refinement units.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use pointup::cloud::{extract_patches, merge_patches, Point, PointCloud};
use pointup::dataset::{
    add_noise, build_dataset, load_dataset, make_pair, sample_surface, save_dataset, shape_for, DatasetConfig, Pose,
    ShapeKind, ShapeSpec, Split, Surface,
};
use pointup::gradcheck::perturbed_model;
use pointup::metrics::{error_map, hausdorff, p2f};
use pointup::model::refiner::{global_refine, local_refine};
use pointup::model::{forward, init_params, ModelConfig, Variant};
use pointup::tensor::{Array, Graph, IndexArray};

fn d2(a: &Point, b: &Point) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn random_points(rng: &mut impl Rng, n: usize, spread: f64) -> Vec<Point> {
    (0..n)
        .map(|_| [0, 1, 2].map(|_| rng.gen_range(-spread..spread)))
        .collect()
}

#[test]
fn hausdorff_dominates_every_nearest_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (na, nb) = (rng.gen_range(1..80), rng.gen_range(1..80));
        let a = random_points(&mut rng, na, 1.0);
        let b = random_points(&mut rng, nb, 1.0);
        let hd = hausdorff(&a, &b).unwrap();
        for e in error_map(&a, &b).unwrap().into_iter().chain(error_map(&b, &a).unwrap()) {
            assert!(e <= hd);
        }
    }
}

/// Every shape kind in a random pose, queried at points scattered around
/// the surface, against the nearest of a dense surface sample.
#[test]
fn p2f_agrees_with_dense_surface_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dense_n = 200_000;
    for kind in ShapeKind::ALL {
        let geometry = ShapeSpec::new(shape_for(kind, 0.5), Pose::random(&mut rng, 1.0)).unwrap();
        let dense = geometry.sample_random(dense_n, &mut rng);
        let spacing = (geometry.surface.area() / dense_n as f64).sqrt();
        let queries: Vec<Point> = geometry
            .sample_random(100, &mut rng)
            .into_iter()
            .map(|p| [0, 1, 2].map(|i| p[i] + rng.gen_range(-0.1..0.1)))
            .collect();
        let analytic = p2f(&queries, &geometry).unwrap();
        for (q, exact) in queries.iter().zip(&analytic.distances) {
            let sampled = dense.iter().map(|p| d2(p, q)).fold(f64::INFINITY, f64::min).sqrt();
            assert!(
                (exact - sampled).abs() <= 2.0 * spacing,
                "{kind}: analytic {exact} vs sampled {sampled} (spacing {spacing})"
            );
        }
    }
}

#[test]
fn generated_targets_lie_on_their_surfaces() {
    for (i, kind) in ShapeKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let geometry = ShapeSpec::new(shape_for(kind, 0.3), Pose::random(&mut rng, 1.0)).unwrap();
        let target = sample_surface(&geometry, 256, 3).unwrap();
        assert!(
            p2f(target.points(), &geometry)
                .unwrap()
                .distances
                .iter()
                .all(|&d| d < 1e-9),
            "{kind}"
        );
    }
}

#[test]
fn unbiased_pairs_are_exact_subsets() {
    for kind in ShapeKind::ALL {
        let geometry = ShapeSpec::at_origin(shape_for(kind, 0.7)).unwrap();
        let pair = make_pair(&geometry, 32, 4, 0.0, 9).unwrap();
        assert_eq!((pair.input.len(), pair.target.len()), (32, 128));
        for p in pair.input.points() {
            assert!(pair.target.points().contains(p));
        }
    }
}

#[test]
fn oversampled_fps_is_more_uniform_than_random_sampling() {
    // Coefficient of variation of the nearest-neighbor spacing.
    let cv = |pts: &[Point]| {
        let nn: Vec<f64> = (0..pts.len())
            .map(|i| {
                (0..pts.len())
                    .filter(|&j| j != i)
                    .map(|j| d2(&pts[i], &pts[j]))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect();
        let mean = nn.iter().sum::<f64>() / nn.len() as f64;
        let var = nn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nn.len() as f64;
        var.sqrt() / mean
    };
    let geometry = ShapeSpec::at_origin(Surface::Sphere { radius: 1.0 }).unwrap();
    let fps_cloud = sample_surface(&geometry, 512, 1).unwrap();
    let random = geometry.sample_random(512, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(cv(fps_cloud.points()) < 0.5 * cv(&random));
}

#[test]
fn biased_inputs_concentrate_near_the_first_target_point() {
    // Mean distance from the biased subset to target point 0 shrinks as
    // the bias grows, on average over seeds.
    let geometry = ShapeSpec::at_origin(Surface::Sphere { radius: 1.0 }).unwrap();
    let spread = |bias: f64| {
        (0..20)
            .map(|s| {
                let pair = make_pair(&geometry, 32, 4, bias, s).unwrap();
                let anchor = pair.target.points()[0];
                pair.input.points().iter().map(|p| d2(p, &anchor).sqrt()).sum::<f64>() / 32.0
            })
            .sum::<f64>()
    };
    assert!(spread(1.0) < spread(0.0));
}

#[test]
fn noise_has_the_requested_magnitude() {
    let geometry = ShapeSpec::at_origin(Surface::Sphere { radius: 1.0 }).unwrap();
    let clean = sample_surface(&geometry, 2000, 0).unwrap();
    let sigma = 0.01;
    let noisy = add_noise(&clean, sigma, 4).unwrap();
    let rms = (clean
        .points()
        .iter()
        .zip(noisy.points())
        .map(|(a, b)| d2(a, b))
        .sum::<f64>()
        / 2000.0)
        .sqrt();
    let expected = sigma * 3f64.sqrt();
    assert!((rms - expected).abs() < 0.05 * expected, "rms {rms} vs {expected}");
}

#[test]
fn dataset_is_a_pure_function_of_its_config_and_reloads_exactly() {
    let cfg = DatasetConfig {
        train_per_kind: 2,
        test_per_kind: 1,
        n: 16,
        r: 2,
        seed: 8,
        ..Default::default()
    };
    let a = build_dataset(&cfg).unwrap();
    assert_eq!(a, build_dataset(&cfg).unwrap());
    assert_ne!(a, build_dataset(&DatasetConfig { seed: 9, ..cfg }).unwrap());
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&a, dir.path()).unwrap();
    assert!(dir.path().join("pair_00000_input.xyz").exists());
    assert!(dir.path().join("pair_00000_target.xyz").exists());
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, a);
    assert_eq!(loaded.split(Split::Test).count(), 5);
}

#[test]
fn merging_hits_the_target_count_and_covers_the_surface() {
    // Consolidated output of identity "upsampling" on overlapping patches
    // covers the shape about as well as a random subset of equal size.
    let geometry = ShapeSpec::at_origin(Surface::Torus {
        major_radius: 1.0,
        minor_radius: 0.3,
    })
    .unwrap();
    let cloud = sample_surface(&geometry, 600, 2).unwrap();
    let patches = extract_patches(&cloud, 30, 64).unwrap();
    let merged = merge_patches(&patches, 400).unwrap();
    assert_eq!(merged.len(), 400);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let subset: Vec<Point> = cloud.points().choose_multiple(&mut rng, 400).copied().collect();
    let worst = |pts: &[Point]| error_map(cloud.points(), pts).unwrap().into_iter().fold(0.0, f64::max);
    assert!(worst(merged.points()) <= worst(&subset));
}

fn refiner_config() -> ModelConfig {
    ModelConfig {
        n: 12,
        r: 2,
        c: 16,
        feat_blocks: 1,
        feat_knn: 4,
        k: 5,
        attn_reduction: 4,
        variant: Variant::Full,
    }
}

fn random_array(rng: &mut impl Rng, shape: &[usize]) -> Array {
    Array::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

#[test]
fn local_unit_ignores_a_global_translation() {
    let cfg = refiner_config();
    let model = perturbed_model(&cfg, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = cfg.n * cfg.r;
    let coarse = random_array(&mut rng, &[m, 3]);
    let features = random_array(&mut rng, &[m, cfg.c + 2]);
    let run = |pts: Array| {
        let mut g = Graph::new();
        let params = model.params.bind_constant(&mut g);
        let q = g.constant(pts);
        let f = g.constant(features.clone());
        let out = local_refine(&mut g, q, f, &params, &cfg).unwrap().output;
        g.value(out).clone()
    };
    let shift = [3.0, -7.5, 0.25];
    let moved = Array::from_fn(&[m, 3], |i| coarse.data()[i] + shift[i % 3]);
    assert!(run(coarse).max_abs_diff(&run(moved)) < 1e-9);
}

#[test]
fn global_unit_is_permutation_equivariant() {
    let cfg = refiner_config();
    let model = perturbed_model(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = cfg.n * cfg.r;
    let coarse = random_array(&mut rng, &[m, 3]);
    let features = random_array(&mut rng, &[m, cfg.c + 2]);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let run = |pts: &Array, feats: &Array| {
        let mut g = Graph::new();
        let params = model.params.bind_constant(&mut g);
        let q = g.constant(pts.clone());
        let f = g.constant(feats.clone());
        let out = global_refine(&mut g, q, f, &params, &cfg).unwrap().output;
        g.value(out).clone()
    };
    let permute = |a: &Array| {
        let mut g = Graph::new();
        let x = g.constant(a.clone());
        let y = g.gather(x, IndexArray::new(vec![m], perm.clone()).unwrap(), 0).unwrap();
        g.value(y).clone()
    };
    let direct = run(&coarse, &features);
    let permuted = run(&permute(&coarse), &permute(&features));
    assert!(permute(&direct).max_abs_diff(&permuted) < 1e-9);
}

#[test]
fn refined_points_are_coarse_plus_offsets_for_trained_like_weights() {
    let cfg = refiner_config();
    let model = perturbed_model(&cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut g = Graph::new();
    let params = model.params.bind_constant(&mut g);
    let x = g.constant(random_array(&mut rng, &[cfg.n, 3]));
    let nodes = forward(&mut g, x, &params, &cfg).unwrap();
    let (q, qc, dq) = (
        g.value(nodes.output),
        g.value(nodes.coarse),
        g.value(nodes.delta.unwrap()),
    );
    assert!(qc.max_abs_diff(q) > 1e-3);
    for i in 0..q.len() {
        assert_eq!(q.data()[i], qc.data()[i] + dq.data()[i]);
    }
}

#[test]
fn parameter_count_does_not_depend_on_the_rate() {
    for variant in Variant::ALL {
        let counts: Vec<usize> = [2, 4, 16]
            .into_iter()
            .map(|r| {
                let cfg = ModelConfig {
                    r,
                    variant,
                    ..refiner_config()
                };
                init_params(&cfg, 0).unwrap().scalar_count()
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]), "{variant}: {counts:?}");
    }
}

#[test]
fn whole_cloud_counts_scale_with_the_rate() {
    let geometry = ShapeSpec::at_origin(Surface::Cylinder {
        radius: 0.5,
        height: 2.0,
    })
    .unwrap();
    let cloud = PointCloud::new(sample_surface(&geometry, 90, 0).unwrap().into_points()).unwrap();
    for r in [2, 3, 5] {
        let cfg = ModelConfig { r, ..refiner_config() };
        let model = pointup::model::Model::new(cfg, 1).unwrap();
        assert_eq!(
            pointup::pipeline::upsample_cloud(&model, &cloud, None).unwrap().len(),
            90 * r
        );
    }
}
