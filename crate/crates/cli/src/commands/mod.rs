mod benchmark;
mod compare;
mod dataset;
mod eval;
mod render;
mod train;

pub use benchmark::benchmark;
pub use compare::compare;
pub use dataset::{dataset, DatasetArgs};
pub use eval::{eval, EvalArgs};
pub use render::render;
pub use train::{train, TrainArgs};

use std::path::Path;

use vastate::data::{
    load_dataset, make_split_compositions, Dataset, SplitStreams, MAX_COMPOSITIONS,
};

use crate::error::{usage, CliResult};

fn check_composition(index: usize) -> CliResult<usize> {
    if !(1..=MAX_COMPOSITIONS).contains(&index) {
        return Err(usage(format!(
            "composition index {index} outside 1..={MAX_COMPOSITIONS}"
        )));
    }
    Ok(index)
}

/// Loads a dataset directory and cuts the requested 1-based composition.
fn load_composition(dir: &Path, index: usize) -> CliResult<(Dataset, SplitStreams)> {
    check_composition(index)?;
    let ds = load_dataset(dir)?;
    let comps = make_split_compositions(&ds.recordings, MAX_COMPOSITIONS)?;
    let streams = comps[index - 1].streams(&ds.recordings)?;
    Ok((ds, streams))
}
