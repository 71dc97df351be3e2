use super::*;
use crate::geometry::PointCloud;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn test_config(kernel: KernelFamily) -> ModelConfig {
    ModelConfig {
        task: Task::Classify,
        kernel,
        widths: vec![6, 8],
        radii: vec![0.4, 0.8],
        subsample: vec![16, 8],
        classes: 3,
        max_neighbors: 16,
        seed: 7,
    }
}

fn ball_cloud<T: Real>(n: usize, seed: u64) -> PointCloud<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    while pts.len() < n {
        let p = [
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r > 1.0 || r < 1e-3 {
            continue;
        }
        pts.push([T::of(p[0]), T::of(p[1]), T::of(p[2])]);
        normals.push([T::of(p[0] / r), T::of(p[1] / r), T::of(p[2] / r)]);
    }
    PointCloud::new(pts).unwrap().with_normals(normals).unwrap()
}

#[test]
fn invalid_configs_name_the_field() {
    let mut c = test_config(KernelFamily::PotentialLinear);
    c.radii = vec![0.8, 0.4];
    let err = Model::<f64>::build(c).unwrap_err().to_string();
    assert!(err.contains("radii"), "{err}");

    let mut c = test_config(KernelFamily::PotentialLinear);
    c.widths = vec![6];
    let err = Model::<f64>::build(c).unwrap_err().to_string();
    assert!(err.contains("widths"), "{err}");

    let mut c = test_config(KernelFamily::PotentialLinear);
    c.classes = 1;
    let err = Model::<f64>::build(c).unwrap_err().to_string();
    assert!(err.contains("classes"), "{err}");
}

#[test]
fn param_count_is_deterministic_across_builds() {
    for kernel in KernelFamily::ALL {
        let a = Model::<f64>::new_initialized(test_config(kernel)).unwrap();
        let b = Model::<f64>::new_initialized(test_config(kernel)).unwrap();
        assert_eq!(a.param_count(), b.param_count(), "{kernel:?}");
        assert!(a.param_count() > 0);
    }
}

#[test]
fn classify_and_segment_output_shapes() {
    let cloud = ball_cloud::<f64>(40, 1);
    for kernel in KernelFamily::ALL {
        let model = Model::new_initialized(test_config(kernel)).unwrap();
        let logits = model.forward_eval(&cloud).unwrap();
        assert_eq!(logits.dim(), (1, 3), "{kernel:?}");
    }
    let mut seg_cfg = test_config(KernelFamily::PotentialQuadratic);
    seg_cfg.task = Task::Segment;
    let model = Model::new_initialized(seg_cfg).unwrap();
    let logits = model.forward_eval(&cloud).unwrap();
    assert_eq!(logits.dim(), (40, 3));
}

#[test]
fn init_is_bit_identical_per_seed() {
    for kernel in [KernelFamily::PotentialMlp, KernelFamily::Discrete, KernelFamily::Continuous]
    {
        let mut a = Model::<f64>::new_initialized(test_config(kernel)).unwrap();
        let mut b = Model::<f64>::new_initialized(test_config(kernel)).unwrap();
        let mut va = Vec::new();
        a.visit_params(&mut |s| va.extend_from_slice(s.value));
        let mut vb = Vec::new();
        b.visit_params(&mut |s| vb.extend_from_slice(s.value));
        assert_eq!(va.len(), vb.len());
        assert!(va.iter().zip(&vb).all(|(x, y)| x == y), "{kernel:?}");
    }
}

#[test]
fn quadratic_init_forward_equals_linear_twin() {
    // B starts at zero and consumes no RNG draws, so quadratic and linear
    // models share a, d, W for one seed; their first forwards must agree.
    let cloud = ball_cloud::<f64>(40, 2);
    let quad = Model::new_initialized(test_config(KernelFamily::PotentialQuadratic)).unwrap();
    let lin = Model::new_initialized(test_config(KernelFamily::PotentialLinear)).unwrap();
    let lq = quad.forward_eval(&cloud).unwrap();
    let ll = lin.forward_eval(&cloud).unwrap();
    for (a, b) in lq.iter().zip(ll.iter()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn init_potential_magnitude_is_order_one() {
    // Monte Carlo estimate of mean |p̃_k(y)| over the block-0 ball.
    let model = Model::<f64>::new_initialized(test_config(KernelFamily::PotentialQuadratic))
        .unwrap();
    let bank = model.field_bank(0).unwrap();
    let r = model.block_radius(0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..4000 {
        let y = loop {
            let c = [
                rng.random_range(-r..r),
                rng.random_range(-r..r),
                rng.random_range(-r..r),
            ];
            if c[0] * c[0] + c[1] * c[1] + c[2] * c[2] <= r * r {
                break c;
            }
        };
        for p in bank.eval_quadratic(y).unwrap() {
            total += p.abs();
            count += 1;
        }
    }
    let mean = total / count as f64;
    assert!((0.1..=2.0).contains(&mean), "mean |p| = {mean}");
}

#[test]
fn forward_is_deterministic() {
    let cloud = ball_cloud::<f32>(64, 4);
    let model = Model::new_initialized(test_config(KernelFamily::PotentialQuadratic)).unwrap();
    let a = model.forward_eval(&cloud).unwrap();
    let b = model.forward_eval(&cloud).unwrap();
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
}

#[test]
fn argmax_class_survives_translation() {
    let cloud = ball_cloud::<f64>(64, 5);
    let model = Model::new_initialized(test_config(KernelFamily::PotentialQuadratic)).unwrap();
    let base = model.forward_eval(&cloud).unwrap();
    let mut moved = cloud.clone();
    moved.translate([3.5, -1.25, 0.5]);
    let shifted = model.forward_eval(&moved).unwrap();
    let a = crate::layers::argmax_rows(&base);
    let b = crate::layers::argmax_rows(&shifted);
    assert_eq!(a, b);
    for (x, y) in base.iter().zip(shifted.iter()) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cloud = ball_cloud::<f32>(48, 6);
    let mut model =
        Model::<f32>::new_initialized(test_config(KernelFamily::PotentialQuadratic)).unwrap();
    model.set_step(1234);
    let before = model.forward_eval(&cloud).unwrap();

    let bytes = checkpoint::checkpoint_bytes(&model).unwrap();
    let restored = checkpoint::checkpoint_from_bytes(&bytes).unwrap();
    assert_eq!(restored.step(), 1234);
    assert_eq!(restored.config(), model.config());
    let after = restored.forward_eval(&cloud).unwrap();
    assert!(before.iter().zip(after.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn checkpoint_error_categories_are_distinct() {
    let model =
        Model::<f32>::new_initialized(test_config(KernelFamily::PotentialLinear)).unwrap();
    let bytes = checkpoint::checkpoint_bytes(&model).unwrap();

    // Corrupt magic.
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        checkpoint::checkpoint_from_bytes(&bad),
        Err(Error::CorruptCheckpoint(_))
    ));

    // Bumped version.
    let mut bad = bytes.clone();
    bad[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        checkpoint::checkpoint_from_bytes(&bad),
        Err(Error::VersionMismatch { found: 2, supported: 1 })
    ));

    // Truncated mid-block.
    let bad = &bytes[..bytes.len() - 3];
    assert!(matches!(
        checkpoint::checkpoint_from_bytes(bad),
        Err(Error::CorruptCheckpoint(_))
    ));

    // Whole trailing block removed: the final key goes missing.
    let tail = {
        let key = b"head1.bias";
        4 + key.len() + 8 + model.config().classes * 4
    };
    let bad = &bytes[..bytes.len() - tail];
    assert!(matches!(
        checkpoint::checkpoint_from_bytes(bad),
        Err(Error::MissingKey(k)) if k == "head1.bias"
    ));
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pfcv");
    let model =
        Model::<f32>::new_initialized(test_config(KernelFamily::Continuous)).unwrap();
    checkpoint::save_checkpoint(&model, &path).unwrap();
    let loaded = checkpoint::load_checkpoint(&path).unwrap();
    assert_eq!(loaded.config(), model.config());
    assert_eq!(loaded.param_count(), model.param_count());
}

#[test]
fn linear_normal_requires_cloud_normals() {
    let cloud = PointCloud::<f64>::new(
        ball_cloud::<f64>(30, 7).positions().to_vec(),
    )
    .unwrap();
    let model =
        Model::new_initialized(test_config(KernelFamily::PotentialLinearNormal)).unwrap();
    assert!(matches!(model.forward_eval(&cloud), Err(Error::InvalidArgument(_))));
}
