use std::path::PathBuf;

use vastate::data::{build_dataset_with, load_wav, write_dataset, OracleKind, ParamGrid};

use crate::error::{usage, CliResult};
use crate::manifest::{create_dir, RunManifest};

pub struct DatasetArgs {
    pub effect: OracleKind,
    pub grid: Option<String>,
    pub levels: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub duration: f64,
    pub material: Option<PathBuf>,
    pub force: bool,
}

pub fn dataset(a: DatasetArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("dataset");
    manifest.seed = Some(a.seed);
    if !a.force && a.out.read_dir().is_ok_and(|mut d| d.next().is_some()) {
        return Err(usage(format!(
            "{} exists and is not empty; pass --force to overwrite",
            a.out.display()
        )));
    }
    let grid = match (&a.grid, a.levels) {
        (Some(g), _) => ParamGrid::parse(a.effect, g)?,
        (None, Some(n)) => ParamGrid::uniform(a.effect, n)?,
        (None, None) => ParamGrid::parse(a.effect, "")?,
    };
    let material = a.material.as_deref().map(load_wav).transpose()?;
    let ds = build_dataset_with(a.effect, &grid, a.seed, a.duration, material.as_deref())?;
    create_dir(&a.out)?;
    for p in write_dataset(&a.out, &ds)? {
        manifest.add(&a.out, &p);
    }
    manifest.finish(&a.out)?;
    log::info!(
        "wrote {} combination(s) of {} to {}",
        ds.recordings.len(),
        a.effect,
        a.out.display()
    );
    Ok(())
}
