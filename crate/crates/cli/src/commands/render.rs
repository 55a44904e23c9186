use std::path::Path;

use vastate::data::{load_wav, save_wav};
use vastate::model::{load_checkpoint, parse_schedule_csv, ParamSchedule};

use crate::error::{usage, CliResult};
use crate::manifest::{create_dir, read_to_string, RunManifest};

pub const RENDER_FILE: &str = "render.wav";

pub fn render(
    checkpoint: &Path,
    input: &Path,
    out: &Path,
    params: Option<&str>,
    schedule: Option<&Path>,
) -> CliResult<()> {
    let mut manifest = RunManifest::start("render");
    let model = load_checkpoint(checkpoint)?.to_model()?;
    let p = model.config().cond_dim;
    let sched = match (params, schedule) {
        (Some(list), _) => {
            let vals = list
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad parameter value '{v}'")))
                })
                .collect::<CliResult<Vec<f64>>>()?;
            ParamSchedule::constant(vals)?
        }
        (None, Some(path)) => parse_schedule_csv(&read_to_string(path)?)?,
        (None, None) if p == 0 => ParamSchedule::constant(vec![])?,
        (None, None) => {
            return Err(usage(format!(
                "model takes {p} parameters; pass --params or --schedule"
            )))
        }
    };
    let x = load_wav(input)?;
    let y = model.render(&x, &sched)?;
    create_dir(out)?;
    let path = out.join(RENDER_FILE);
    save_wav(&path, &y)?;
    manifest.add(out, &path);
    manifest.finish(out)?;
    log::info!("rendered {} samples to {}", y.len(), path.display());
    Ok(())
}
