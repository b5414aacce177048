use unroll_core::data::{gen_synthetic, DictKind, SyntheticSpec};
use unroll_core::model::{
    Architecture, HypothesisClassSpec, MapKind, Params, SharingSchedule, WeightBlock,
};
use unroll_core::numkit::{random_gaussian_matrix, spectral_norm, Matrix, SeededRng};
use unroll_core::train::{
    adam_step, grad_check, project_params, train, value_and_grad, AdamState, GradCheckOptions,
    LossKind, TrainConfig,
};
use unroll_core::Error;

fn class(layers: usize, w_inf: f64, r1: f64, r2: f64, lambda0: f64) -> HypothesisClassSpec {
    HypothesisClassSpec {
        w_inf,
        tau0: vec![0.8; layers],
        r1,
        lambda0: vec![lambda0; layers],
        r2,
        b_in: 1.0,
        b_out: 1.0,
        delta: 0.05,
        enforce_tau_b2_le_1: false,
    }
}

fn measurement(rng: &mut SeededRng, n: usize, big_n: usize) -> Matrix {
    let a = random_gaussian_matrix(rng, n, big_n);
    a.scale(0.99 / spectral_norm(&a).unwrap())
}

fn dense_arch(rng: &mut SeededRng, schedule: SharingSchedule, b_out: f64) -> Architecture {
    let kind = MapKind::Dense {
        a: measurement(rng, 4, 6),
        atoms: 6,
    };
    let spaces = vec![kind; schedule.num_spaces()];
    Architecture::unpooled(schedule, spaces, b_out).unwrap()
}

#[test]
fn scalar_threshold_derivative_by_hand() {
    let arch = Architecture::unpooled(
        SharingSchedule::shared(1),
        vec![MapKind::Dense {
            a: Matrix::identity(1),
            atoms: 1,
        }],
        10.0,
    )
    .unwrap();
    let params = Params::new(vec![WeightBlock::Dense(Matrix::identity(1))], vec![1.0], vec![0.5]);
    let y = Matrix::from_rows(&[&[2.0]]);
    let x = Matrix::zeros(1, 1);
    let (value, g) = value_and_grad(&arch, &params, &y, &x, LossKind::Mse).unwrap();
    // h = 2 − λ = 1.5, loss = h², d/dλ = −2h, d/dτ = 2h(y − λ).
    assert!((value - 2.25).abs() < 1e-15);
    assert!((g.lambda[0] + 3.0).abs() < 1e-10);
    assert!((g.tau[0] - 4.5).abs() < 1e-10);
}

#[test]
fn gradients_match_finite_differences_across_kinds() {
    let mut rng = SeededRng::new(100);
    let mut worst: f64 = 0.0;
    for case in 0..24u64 {
        let layers = 1 + (case as usize % 4);
        let arch = match case % 3 {
            0 => dense_arch(&mut rng, SharingSchedule::shared(layers), 1.5),
            1 => dense_arch(&mut rng, SharingSchedule::alternating(layers), 1.5),
            _ => Architecture::unpooled(
                SharingSchedule::shared(layers),
                vec![MapKind::Conv {
                    a: measurement(&mut rng, 5, 8),
                    kernel_len: 3,
                }],
                1.5,
            )
            .unwrap(),
        };
        let opts = GradCheckOptions {
            check_tau: case % 2 == 0,
            check_lambda: case % 4 < 2,
            loss: if case % 5 == 0 { LossKind::L2 } else { LossKind::Mse },
            ortho_weight: if case % 3 == 0 { 0.1 } else { 0.0 },
            ..GradCheckOptions::default()
        };
        let spec = class(layers, 1.0, 0.3, 0.05, 0.1);
        let report = grad_check(&arch, &spec, 1000 + case, 1e-5, &opts).unwrap();
        worst = worst.max(report.max_rel_err);
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn dead_and_linear_networks() {
    let mut rng = SeededRng::new(5);
    let arch = dense_arch(&mut rng, SharingSchedule::shared(3), 1e3);
    // Thresholds far above every pre-activation: the network outputs zero and
    // the only nonzero weight gradient would come through the final map.
    let dead = class(3, 1.0, 0.0, 0.0, 1e4);
    let params = unroll_core::train::sample_params(&arch, &dead, &mut rng).unwrap();
    let y = random_gaussian_matrix(&mut rng, 4, 5);
    let x = random_gaussian_matrix(&mut rng, 6, 5);
    let (_, g) = value_and_grad(&arch, &params, &y, &x, LossKind::Mse).unwrap();
    assert!(g.blocks[0].values().iter().all(|v| *v == 0.0));
    assert!(g.tau.iter().chain(&g.lambda).all(|v| *v == 0.0));
    grad_check(&arch, &dead, 1, 1e-8, &GradCheckOptions::default()).unwrap();

    let linear = class(3, 1.0, 0.0, 0.0, 1e-3);
    let opts = GradCheckOptions {
        fd_step: 1e-5,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&arch, &linear, 2, 1e-8, &opts).unwrap();
    assert!(report.max_rel_err < 1e-8);
}

#[test]
fn shared_gradient_is_sum_of_unshared() {
    let mut rng = SeededRng::new(9);
    let a = measurement(&mut rng, 4, 6);
    let phi = random_gaussian_matrix(&mut rng, 6, 6).scale(0.3);
    let kind = MapKind::Dense { a, atoms: 6 };
    let shared = Architecture::unpooled(SharingSchedule::shared(2), vec![kind.clone()], 2.0).unwrap();
    let unshared =
        Architecture::unpooled(SharingSchedule::unshared(2), vec![kind; 3], 2.0).unwrap();
    let p_shared = Params::new(vec![WeightBlock::Dense(phi.clone())], vec![0.9; 2], vec![0.05; 2]);
    let p_unshared = Params::new(
        vec![WeightBlock::Dense(phi); 3],
        vec![0.9; 2],
        vec![0.05; 2],
    );
    let y = random_gaussian_matrix(&mut rng, 4, 7);
    let x = random_gaussian_matrix(&mut rng, 6, 7);
    let (v1, g1) = value_and_grad(&shared, &p_shared, &y, &x, LossKind::Mse).unwrap();
    let (v2, g2) = value_and_grad(&unshared, &p_unshared, &y, &x, LossKind::Mse).unwrap();
    assert!((v1 - v2).abs() < 1e-14);
    for k in 0..36 {
        let sum: f64 = g2.blocks.iter().map(|b| b.values()[k]).sum();
        assert!((g1.blocks[0].values()[k] - sum).abs() < 1e-10);
    }
}

#[test]
fn projection_examples() {
    let spec = class(2, 1.0, 0.1, 0.02, 0.1);
    let inside = Params::new(
        vec![WeightBlock::Dense(Matrix::identity(3).scale(0.5))],
        vec![0.8, 0.75],
        vec![0.1, 0.11],
    );
    assert_eq!(project_params(&inside, &spec).unwrap(), inside);

    let outside = Params::new(
        vec![WeightBlock::Dense(Matrix::identity(3).scale(2.0))],
        vec![0.8 + 0.2, 0.1],
        vec![1.0, 0.0],
    );
    let once = project_params(&outside, &spec).unwrap();
    assert!((once.tau[0] - 0.9).abs() < 1e-15);
    assert!((once.tau[1] - 0.7).abs() < 1e-15);
    assert!((once.lambda[0] - 0.12).abs() < 1e-15 && (once.lambda[1] - 0.08).abs() < 1e-15);
    assert!((once.blocks[0].values()[0] - 1.0).abs() < 1e-12);
    let twice = project_params(&once, &spec).unwrap();
    for (a, b) in twice.blocks[0].values().iter().zip(once.blocks[0].values()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(twice.tau, once.tau);
}

#[test]
fn adam_with_projection_stays_in_class() {
    let mut rng = SeededRng::new(44);
    let arch = dense_arch(&mut rng, SharingSchedule::alternating(3), 1.0);
    let spec = class(3, 0.7, 0.1, 0.03, 0.1);
    let mut params = unroll_core::train::sample_params(&arch, &spec, &mut rng).unwrap();
    let mut state = AdamState::new(&params);
    let cfg = TrainConfig {
        learning_rate: 0.5,
        train_tau: true,
        train_lambda: true,
        ..TrainConfig::default()
    };
    for _ in 0..30 {
        let y = random_gaussian_matrix(&mut rng, 4, 6);
        let x = random_gaussian_matrix(&mut rng, 6, 6);
        let (_, g) = value_and_grad(&arch, &params, &y, &x, LossKind::Mse).unwrap();
        adam_step(&mut state, &mut params, &g, &cfg);
        params = project_params(&params, &spec).unwrap();
        assert!(spec.contains(&params, 1e-9).unwrap());
    }
}

fn desk_data(m_train: usize) -> unroll_core::data::TrainTest {
    gen_synthetic(&SyntheticSpec {
        big_n: 20,
        n: 10,
        s: 3,
        m_train,
        m_test: 200,
        dict_kind: DictKind::Orthogonal,
        seed: 3,
    })
    .unwrap()
}

fn desk_arch(data: &unroll_core::data::TrainTest, layers: usize) -> Architecture {
    Architecture::unpooled(
        SharingSchedule::shared(layers),
        vec![MapKind::Dense {
            a: data.train.a.clone(),
            atoms: 20,
        }],
        data.train.input_bound().max(data.train.output_bound()),
    )
    .unwrap()
}

#[test]
fn training_is_deterministic_and_improves() {
    let data = desk_data(600);
    let layers = 6;
    let arch = desk_arch(&data, layers);
    let mut spec = class(layers, 1.0, 0.0, 0.0, 0.01);
    spec.tau0 = vec![1.0; layers];
    let cfg = TrainConfig {
        seed: 12,
        ortho_weight: 0.1,
        ..TrainConfig::default()
    };
    let a = train(&arch, &spec, &data.train, &data.test, &cfg).unwrap();
    let b = train(&arch, &spec, &data.train, &data.test, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), 11);
    assert!(a.last().train_mse < a.history[0].train_mse);

    let zero = TrainConfig { epochs: 0, ..cfg };
    let z = train(&arch, &spec, &data.train, &data.test, &zero).unwrap();
    assert_eq!(z.params, z.initial);
    assert_eq!(z.history.len(), 1);
}

#[test]
fn invalid_config_is_rejected() {
    let data = desk_data(10);
    let arch = desk_arch(&data, 2);
    let spec = class(2, 1.0, 0.0, 0.0, 0.01);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(&arch, &spec, &data.train, &data.test, &cfg),
        Err(Error::InvalidSpec(_))
    ));
}
