use proptest::prelude::*;
use xsobolev::energy::{generic_xs_distance_sq, EnergyKernel};
use xsobolev::parallel::with_threads;
use xsobolev::train::{checkpoint, generate, xsvae_train, Activation, Architecture, TrainConfig};
use xsobolev::{
    build_kernel_table, latent_loss, latent_loss_gradient, sample_normal_cloud,
    xs_energy_distance_sq, HsParams, PointCloud, QuadOrders, Seed, SobolevKernel, TableMethod,
    XiEvaluator, XiMethod,
};

#[test]
fn csv_files_round_trip_into_distances() {
    let dir = tempfile::tempdir().unwrap();
    let a = sample_normal_cloud(3, 40, Seed::new(1));
    let b = sample_normal_cloud(3, 50, Seed::new(2));
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    a.write_csv(&pa).unwrap();
    b.write_csv(&pb).unwrap();
    let (ra, rb) = (
        PointCloud::read_csv(&pa).unwrap(),
        PointCloud::read_csv(&pb).unwrap(),
    );
    assert_eq!(
        xs_energy_distance_sq(&a, &b).unwrap().total,
        xs_energy_distance_sq(&ra, &rb).unwrap().total
    );
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let a = sample_normal_cloud(4, 300, Seed::new(3));
    let b = sample_normal_cloud(4, 200, Seed::new(4).with_stream(1));
    let ev = XiEvaluator::new(4, XiMethod::PoissonExact).unwrap();
    let run = || {
        let d = xs_energy_distance_sq(&a, &b).unwrap().total;
        let l = latent_loss(&a, &ev).unwrap().total;
        let g = latent_loss_gradient(&a, &ev).unwrap();
        let s = sample_normal_cloud(4, 10_000, Seed::new(5));
        (d, l, g, s.into_vec())
    };
    assert_eq!(with_threads(1, run), with_threads(3, run));
}

#[test]
fn table_kernel_distance_is_a_metric_square() {
    let params = HsParams::new(1.5, 3).unwrap();
    let table = build_kernel_table(
        params,
        12.0,
        256,
        TableMethod::Quadrature(QuadOrders::default()),
    )
    .unwrap();
    let k = SobolevKernel::Table(table);
    let a = sample_normal_cloud(3, 30, Seed::new(6));
    let b = PointCloud::new(a.as_slice().iter().map(|x| x + 0.5).collect(), 3).unwrap();
    let ab = generic_xs_distance_sq(&k, &a, &b).unwrap();
    let ba = generic_xs_distance_sq(&k, &b, &a).unwrap();
    assert_eq!(ab.total, ba.total);
    assert!(ab.total > 0.0);
    assert!(generic_xs_distance_sq(&k, &a, &a).unwrap().total.abs() < 1e-12);
}

#[test]
fn energy_kernel_through_generic_path_matches_dedicated_one() {
    let a = sample_normal_cloud(2, 25, Seed::new(7));
    let b = sample_normal_cloud(2, 35, Seed::new(8));
    let generic = generic_xs_distance_sq(&EnergyKernel, &a, &b).unwrap().total;
    let direct = xs_energy_distance_sq(&a, &b).unwrap().total;
    assert!((generic - direct).abs() <= 1e-12 * direct.abs().max(1.0));
}

#[test]
fn checkpoint_reload_generates_identical_samples() {
    let data = sample_normal_cloud(3, 64, Seed::new(9));
    let arch = Architecture {
        data_dim: 3,
        hidden: vec![8],
        latent_dim: 2,
        output: Activation::Sigmoid,
    };
    let mut cfg = TrainConfig::new(arch, Seed::new(10));
    cfg.epochs = 3;
    cfg.batch_size = 16;
    let (state, _) = xsvae_train(&data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&state, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.params(), state.params());
    assert_eq!(
        generate(&back, 20, Seed::new(11)).unwrap().into_vec(),
        generate(&state, 20, Seed::new(11)).unwrap().into_vec()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn translation_and_rotation_leave_distance_unchanged(
        shift in -3.0f64..3.0,
        angle in 0.0f64..std::f64::consts::TAU,
        seed in 0u64..1000,
    ) {
        let a = sample_normal_cloud(2, 12, Seed::new(seed));
        let b = sample_normal_cloud(2, 9, Seed::new(seed).with_stream(1));
        let (c, s) = (angle.cos(), angle.sin());
        let move_cloud = |p: &PointCloud| {
            let data: Vec<f64> = p.points().flat_map(|x| [c * x[0] - s * x[1] + shift, s * x[0] + c * x[1] - shift]).collect();
            PointCloud::new(data, 2).unwrap()
        };
        let d = xs_energy_distance_sq(&a, &b).unwrap().total;
        let moved = xs_energy_distance_sq(&move_cloud(&a), &move_cloud(&b)).unwrap().total;
        prop_assert!((d - moved).abs() <= 1e-12 * d.max(1.0));
    }
}
