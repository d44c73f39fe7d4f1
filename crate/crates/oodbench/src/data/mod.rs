//! Dataset containers, ingestion, synthetic benchmark generation, and the
//! split/balance/partition-assembly rules of the evaluation protocol.

mod io;
mod sample;
pub mod splits;
mod synthetic;

pub use io::{load_csv, load_raw_u8};
pub use sample::{BenchmarkData, LabeledSample, OodLabel, Partition, UseCase, OUT_CLASS_SENTINEL};
pub use splits::{
    assemble_split, balance, split_each_partition_half, split_in_data, AssembleMode, AssembledOut,
};
pub use synthetic::{
    blur_moving_average, contrast_squash, make_synthetic_benchmark, transpose_square,
    SyntheticSpec,
};
