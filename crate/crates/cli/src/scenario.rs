//! Scenario wiring: data law, architecture and class for one grid point.

use std::path::PathBuf;

use unroll_core::data::{
    gen_synthetic, load_idx, mnist_dataset, normalize_measurement, Dataset, DictKind, SyntheticSpec,
};
use unroll_core::model::{Architecture, HypothesisClassSpec, MapKind, SharingSchedule};
use unroll_core::numkit::{random_gaussian_matrix, SeededRng};
use unroll_core::train::TrainConfig;

use crate::config::{ExperimentConfig, GridPoint, Scenario, MNIST_PIXELS};
use crate::exit::CliError;

pub const DATA_DIR_ENV: &str = "UNROLL_DATA_DIR";

/// Mixed into the trial seed for parameter initialization and batching so it
/// does not replay the data stream.
pub const INIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything needed to train and evaluate one trial.
#[derive(Clone, Debug)]
pub struct Instance {
    pub point: GridPoint,
    pub seed: u64,
    pub arch: Architecture,
    pub spec: HypothesisClassSpec,
    pub train_config: TrainConfig,
    pub train: Dataset,
    pub test: Dataset,
    /// Code width `p`.
    pub p: usize,
    /// Kernel length, 0 for dense scenarios.
    pub kernel_len: usize,
}

pub fn dict_kind(scenario: Scenario) -> DictKind {
    match scenario {
        Scenario::NonOrthogonal | Scenario::LearnedThresholds => DictKind::GaussianNonOrthogonal,
        _ => DictKind::Orthogonal,
    }
}

pub fn synthetic_spec(cfg: &ExperimentConfig, p: &GridPoint, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        big_n: p.big_n,
        n: p.n,
        s: p.s,
        m_train: p.m_train,
        m_test: cfg.m_test,
        dict_kind: dict_kind(cfg.scenario),
        seed,
    }
}

fn mnist_data(cfg: &ExperimentConfig, p: &GridPoint, seed: u64) -> Result<(Dataset, Dataset), CliError> {
    let dir = std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .ok_or_else(|| CliError::runtime(format!("{DATA_DIR_ENV} is not set")))?;
    let train_images = load_idx(dir.join("train-images-idx3-ubyte"))?;
    let test_images = load_idx(dir.join("t10k-images-idx3-ubyte"))?;
    let mut rng = SeededRng::new(seed);
    let a = normalize_measurement(&random_gaussian_matrix(&mut rng, p.n, MNIST_PIXELS))?;
    Ok((
        mnist_dataset(&train_images, &a, p.m_train)?,
        mnist_dataset(&test_images, &a, cfg.m_test)?,
    ))
}

/// Generates the data for `seed` and builds the network and class around it.
pub fn build_instance(cfg: &ExperimentConfig, p: &GridPoint, seed: u64) -> Result<Instance, CliError> {
    let (train, test) = if cfg.scenario == Scenario::Mnist {
        mnist_data(cfg, p, seed)?
    } else {
        let d = gen_synthetic(&synthetic_spec(cfg, p, seed))?;
        (d.train, d.test)
    };
    let b_in = cfg.class.b_in.unwrap_or_else(|| train.input_bound());
    let b_out = cfg.class.b_out.unwrap_or(b_in);
    if !(b_in > 0.0 && b_out > 0.0) {
        return Err(CliError::runtime("training measurements are all zero"));
    }
    let a = train.a.clone();
    let dense = |atoms| MapKind::Dense { a: a.clone(), atoms };
    let layers = p.layers;
    let (schedule, spaces, width, kernel_len) = match cfg.scenario {
        Scenario::Overcomplete => (SharingSchedule::shared(layers), vec![dense(2 * p.big_n)], 2 * p.big_n, 0),
        Scenario::Alternating => (
            SharingSchedule::alternating(layers),
            vec![dense(p.big_n), dense(p.big_n)],
            p.big_n,
            0,
        ),
        Scenario::Convolutional => (
            SharingSchedule::shared(layers),
            vec![MapKind::Conv { a: a.clone(), kernel_len: cfg.kernel_len }],
            p.big_n,
            cfg.kernel_len,
        ),
        _ => (SharingSchedule::shared(layers), vec![dense(p.big_n)], p.big_n, 0),
    };
    let arch = Architecture::unpooled(schedule, spaces, b_out)?;
    let spec = HypothesisClassSpec {
        w_inf: cfg.w_inf(),
        tau0: vec![cfg.class.tau0; layers],
        r1: cfg.class.r1,
        lambda0: vec![cfg.class.lambda0; layers],
        r2: cfg.r2(),
        b_in,
        b_out,
        delta: cfg.class.delta,
        enforce_tau_b2_le_1: cfg.class.enforce_tau_b2_le_1,
    };
    spec.validate(layers)?;
    let train_config = TrainConfig {
        learning_rate: cfg.train.learning_rate,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        train_tau: cfg.train_tau(),
        train_lambda: cfg.train_lambda(),
        ortho_weight: cfg.ortho_weight(),
        seed: seed ^ INIT_STREAM,
    };
    Ok(Instance {
        point: *p,
        seed,
        arch,
        spec,
        train_config,
        train,
        test,
        p: width,
        kernel_len,
    })
}
