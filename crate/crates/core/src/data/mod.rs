//! Datasets: synthetic sparse signals, MNIST images, and result files.

pub mod container;
pub mod idx;
pub mod results;
pub mod synthetic;

pub use container::{decode_dataset, encode_dataset, read_container, write_container};
pub use idx::{load_idx, mnist_dataset, write_idx, IdxTensor};
pub use results::{
    fmt_float, read_results, read_results_csv, write_results, write_results_csv, ResultRow,
    RESULT_COLUMNS,
};
pub use synthetic::{
    gen_synthetic, normalize_measurement, sparse_codes, Dataset, DictKind, SyntheticSpec,
    TrainTest, MEASUREMENT_NORM,
};
