use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 37] = [
    "scenario", "N", "n", "s", "p", "kernel_len", "L", "J", "K", "m_train", "m_test", "seed",
    "trial", "epochs", "lr", "r1", "r2", "train_mse", "test_mse", "train_l2", "test_l2",
    "ge_signed", "ge_abs", "alpha", "alpha_mode", "b_inf", "d_inf", "w_inf", "y_fro", "KL", "ML",
    "OL", "QL", "rad_bound", "bound_thm1", "bound_cor1", "runtime_s",
];

/// One trained network: sizes, losses, and every bound constant. `bound_cor1`
/// is NaN when the corollary does not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub s: usize,
    pub p: usize,
    pub kernel_len: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "J")]
    pub spaces: usize,
    #[serde(rename = "K")]
    pub weights: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub seed: u64,
    pub trial: usize,
    pub epochs: usize,
    pub lr: f64,
    pub r1: f64,
    pub r2: f64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub train_l2: f64,
    pub test_l2: f64,
    pub ge_signed: f64,
    pub ge_abs: f64,
    pub alpha: f64,
    pub alpha_mode: String,
    pub b_inf: f64,
    pub d_inf: f64,
    pub w_inf: f64,
    pub y_fro: f64,
    #[serde(rename = "KL")]
    pub k_l: f64,
    #[serde(rename = "ML")]
    pub m_l: f64,
    #[serde(rename = "OL")]
    pub o_l: f64,
    #[serde(rename = "QL")]
    pub q_l: f64,
    pub rad_bound: f64,
    pub bound_thm1: f64,
    pub bound_cor1: f64,
    pub runtime_s: f64,
}

/// 17 significant digits, which round-trips every finite double.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl ResultRow {
    pub fn to_record(&self) -> Vec<String> {
        let i = |v: usize| v.to_string();
        let f = fmt_float;
        vec![
            self.scenario.clone(),
            i(self.big_n),
            i(self.n),
            i(self.s),
            i(self.p),
            i(self.kernel_len),
            i(self.layers),
            i(self.spaces),
            i(self.weights),
            i(self.m_train),
            i(self.m_test),
            self.seed.to_string(),
            i(self.trial),
            i(self.epochs),
            f(self.lr),
            f(self.r1),
            f(self.r2),
            f(self.train_mse),
            f(self.test_mse),
            f(self.train_l2),
            f(self.test_l2),
            f(self.ge_signed),
            f(self.ge_abs),
            f(self.alpha),
            self.alpha_mode.clone(),
            f(self.b_inf),
            f(self.d_inf),
            f(self.w_inf),
            f(self.y_fro),
            f(self.k_l),
            f(self.m_l),
            f(self.o_l),
            f(self.q_l),
            f(self.rad_bound),
            f(self.bound_thm1),
            f(self.bound_cor1),
            f(self.runtime_s),
        ]
    }
}

pub fn write_results<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.write_record(row.to_record())?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        let missing: Vec<&str> = RESULT_COLUMNS
            .iter()
            .copied()
            .filter(|c| !header.iter().any(|h| h == c))
            .collect();
        return Err(Error::SchemaMismatch(if missing.is_empty() {
            format!("unexpected header {header:?}")
        } else {
            format!("missing columns {missing:?}")
        }));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::SchemaMismatch(e.to_string())))
        .collect()
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(std::io::BufWriter::new(file), rows)
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(std::io::BufReader::new(file))
}
