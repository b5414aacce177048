use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::exit::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Orthogonal,
    Overcomplete,
    NonOrthogonal,
    Alternating,
    Convolutional,
    LearnedThresholds,
    Mnist,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Orthogonal => "orthogonal",
            Scenario::Overcomplete => "overcomplete",
            Scenario::NonOrthogonal => "non_orthogonal",
            Scenario::Alternating => "alternating",
            Scenario::Convolutional => "convolutional",
            Scenario::LearnedThresholds => "learned_thresholds",
            Scenario::Mnist => "mnist",
        }
    }
}

/// Pixels of one MNIST image, the signal dimension of the mnist scenario.
pub const MNIST_PIXELS: usize = 784;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    #[serde(rename = "N")]
    pub big_n: Vec<usize>,
    pub n: Vec<usize>,
    pub s: Vec<usize>,
    #[serde(rename = "L")]
    pub layers: Vec<usize>,
    pub m_train: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            big_n: vec![64],
            n: vec![32],
            s: vec![4],
            layers: vec![16],
            m_train: vec![2000],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub s: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    pub m_train: usize,
}

/// Optimizer settings. Unset flags take the scenario default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_tau: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_lambda: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ortho_weight: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 128,
            train_tau: None,
            train_lambda: None,
            ortho_weight: None,
        }
    }
}

/// Hypothesis class. `tau0` and `lambda0` are broadcast to every layer;
/// unset values take the scenario or data default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_inf: Option<f64>,
    pub tau0: f64,
    pub r1: f64,
    pub lambda0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_out: Option<f64>,
    pub delta: f64,
    pub enforce_tau_b2_le_1: bool,
}

impl Default for ClassSection {
    fn default() -> Self {
        ClassSection {
            w_inf: None,
            tau0: 1.0,
            r1: 0.0,
            lambda0: 0.05,
            r2: None,
            b_in: None,
            b_out: None,
            delta: 0.05,
            enforce_tau_b2_le_1: false,
        }
    }
}

/// Overrides for `bound`. Any unset value comes from the generated data of
/// the first grid point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_fro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub gradient_cases: usize,
    pub gradient_tolerance: f64,
    pub output_cases: usize,
    pub perturbation_cases: usize,
    pub psi_grid: usize,
    /// Multiplies every left-hand side before comparison. Anything above 1
    /// is a harness self-test and should make the suite fail.
    pub lhs_inflation: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            gradient_cases: 100,
            gradient_tolerance: 1e-5,
            output_cases: 1000,
            perturbation_cases: 1000,
            psi_grid: 20,
            lhs_inflation: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub grid: Grid,
    pub m_test: usize,
    pub kernel_len: usize,
    pub train: TrainSection,
    pub class: ClassSection,
    pub repeats: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Wall-clock seconds in `runtime_s`. Off by default so result files are
    /// reproducible byte for byte.
    pub record_runtime: bool,
    pub bound: BoundSection,
    pub verify: VerifySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Orthogonal,
            grid: Grid::default(),
            m_test: 5000,
            kernel_len: 7,
            train: TrainSection::default(),
            class: ClassSection::default(),
            repeats: 10,
            seed: 0,
            output: None,
            record_runtime: false,
            bound: BoundSection::default(),
            verify: VerifySection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Full experiment sizes.
    pub fn apply_paper_scale(&mut self) {
        self.grid.m_train = vec![10_000];
        self.m_test = 50_000;
        self.grid.big_n = vec![120];
        self.kernel_len = 7;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        for (name, values) in [
            ("N", &g.big_n),
            ("n", &g.n),
            ("s", &g.s),
            ("L", &g.layers),
            ("m_train", &g.m_train),
        ] {
            if values.is_empty() {
                return Err(CliError::config(format!("grid axis {name} is empty")));
            }
            if values.contains(&0) {
                return Err(CliError::config(format!("grid axis {name} contains 0")));
            }
        }
        if self.repeats == 0 {
            return Err(CliError::config("repeats must be at least 1"));
        }
        if self.m_test == 0 {
            return Err(CliError::config("m_test must be at least 1"));
        }
        let c = &self.class;
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(CliError::config(format!("delta must lie in (0, 1), got {}", c.delta)));
        }
        if !(c.tau0 > 0.0 && c.lambda0 > 0.0) {
            return Err(CliError::config("tau0 and lambda0 must be positive"));
        }
        if !(c.r1 >= 0.0 && c.r1 < c.tau0) {
            return Err(CliError::config(format!("r1 must lie in [0, tau0), got {}", c.r1)));
        }
        let r2 = self.r2();
        if !(r2 >= 0.0 && r2 < c.lambda0) {
            return Err(CliError::config(format!("r2 must lie in [0, lambda0), got {r2}")));
        }
        for (name, v) in [("w_inf", c.w_inf), ("b_in", c.b_in), ("b_out", c.b_out)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        let t = &self.train;
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(CliError::config("learning_rate must be positive"));
        }
        if t.batch_size == 0 {
            return Err(CliError::config("batch_size must be positive"));
        }
        if let Some(w) = t.ortho_weight {
            if !(w >= 0.0) {
                return Err(CliError::config("ortho_weight must be nonnegative"));
            }
        }
        for p in self.points() {
            if p.n > p.big_n || p.s > p.big_n {
                return Err(CliError::config(format!(
                    "grid point N={} n={} s={}: need n <= N and s <= N",
                    p.big_n, p.n, p.s
                )));
            }
            if self.scenario == Scenario::Convolutional && self.kernel_len > p.big_n {
                return Err(CliError::config(format!(
                    "kernel_len {} exceeds N = {}",
                    self.kernel_len, p.big_n
                )));
            }
        }
        if self.kernel_len == 0 {
            return Err(CliError::config("kernel_len must be positive"));
        }
        let v = &self.verify;
        if !(v.gradient_tolerance > 0.0 && v.lhs_inflation > 0.0) {
            return Err(CliError::config("verify tolerances must be positive"));
        }
        if let Some(m) = self.bound.m {
            if m == 0 {
                return Err(CliError::config("bound.m must be at least 1"));
            }
        }
        Ok(())
    }

    /// Cartesian product of the grid axes in the order N, n, s, L, m_train.
    /// The mnist scenario pins N to the image size.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let big_ns = if self.scenario == Scenario::Mnist {
            vec![MNIST_PIXELS]
        } else {
            g.big_n.clone()
        };
        let mut out = Vec::new();
        for &big_n in &big_ns {
            for &n in &g.n {
                for &s in &g.s {
                    for &layers in &g.layers {
                        for &m_train in &g.m_train {
                            out.push(GridPoint { big_n, n, s, layers, m_train });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn w_inf(&self) -> f64 {
        self.class.w_inf.unwrap_or(match self.scenario {
            Scenario::Convolutional => 1.0,
            _ => 2.0,
        })
    }

    pub fn r2(&self) -> f64 {
        self.class.r2.unwrap_or(match self.scenario {
            Scenario::LearnedThresholds => 0.5 * self.class.lambda0,
            _ => 0.0,
        })
    }

    pub fn ortho_weight(&self) -> f64 {
        self.train.ortho_weight.unwrap_or(match self.scenario {
            Scenario::Orthogonal => 0.1,
            _ => 0.0,
        })
    }

    pub fn train_tau(&self) -> bool {
        self.train.train_tau.unwrap_or(false)
    }

    pub fn train_lambda(&self) -> bool {
        self.train
            .train_lambda
            .unwrap_or(self.scenario == Scenario::LearnedThresholds)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one trial: the base seed XOR a stable hash of the scenario, grid
/// point and trial index.
pub fn trial_seed(base: u64, scenario: Scenario, p: &GridPoint, trial: usize) -> u64 {
    let key = format!(
        "{}|{}|{}|{}|{}|{}|{}",
        scenario.as_str(),
        p.big_n,
        p.n,
        p.s,
        p.layers,
        p.m_train,
        trial
    );
    base ^ fnv1a(key.as_bytes())
}
