use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vastate::cells::WINDOW;
use vastate::model::{load_checkpoint, Architecture, FlopsBreakdown, Model, ModelConfig};

use crate::error::{usage, CliResult};
use crate::manifest::{create_dir, write, RunManifest};

pub const BENCHMARK_FILE: &str = "benchmark.json";

#[derive(Debug, Serialize)]
pub struct BenchmarkReport {
    pub architecture: Architecture,
    pub parameters: usize,
    pub flops: FlopsBreakdown,
    pub flops_deviation_pct: f64,
    pub samples: usize,
    pub seconds: f64,
    pub samples_per_second: f64,
    pub real_time_factor: f64,
    pub algorithmic_latency_samples: usize,
    pub algorithmic_latency_ms: f64,
}

/// Single-threaded streaming throughput of `model` over `n` noise samples.
pub fn measure(model: &Model, n: usize) -> CliResult<BenchmarkReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let p = vec![0.5; model.config().cond_dim];
    let mut state = model.initial_state();
    let mut sink = 0.0;
    let start = Instant::now();
    for &v in &x {
        sink += model.process_sample(&mut state, v, &p)?;
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(sink);
    let fs = f64::from(model.config().sample_rate);
    let sps = n as f64 / secs;
    let flops = model.count_flops();
    Ok(BenchmarkReport {
        architecture: model.architecture(),
        parameters: model.count_params(),
        flops_deviation_pct: 100.0 * flops.deviation(),
        flops,
        samples: n,
        seconds: secs,
        samples_per_second: sps,
        real_time_factor: sps / fs,
        algorithmic_latency_samples: WINDOW,
        algorithmic_latency_ms: 1000.0 * WINDOW as f64 / fs,
    })
}

pub fn benchmark(
    checkpoint: Option<&Path>,
    arch: Option<Architecture>,
    cond_dim: usize,
    out: &Path,
    seconds: f64,
) -> CliResult<()> {
    let mut manifest = RunManifest::start("benchmark");
    let model = match (checkpoint, arch) {
        (Some(c), _) => load_checkpoint(c)?.to_model()?,
        (None, Some(a)) => Model::init(ModelConfig::new(a, cond_dim), 0)?,
        (None, None) => return Err(usage("pass --checkpoint or --arch")),
    };
    if !(seconds > 0.0) {
        return Err(usage("--seconds must be positive"));
    }
    let n = (seconds * f64::from(model.config().sample_rate)) as usize;
    let r = measure(&model, n.max(1))?;
    println!(
        "{}: {} params, {} FLOPs/sample ({:+.1}% vs reference {}), {:.0} samples/s, real-time factor {:.1}, latency {} samples ({:.3} ms)",
        r.architecture,
        r.parameters,
        r.flops.total,
        r.flops_deviation_pct,
        r.flops.reference_total,
        r.samples_per_second,
        r.real_time_factor,
        r.algorithmic_latency_samples,
        r.algorithmic_latency_ms
    );
    create_dir(out)?;
    let path = out.join(BENCHMARK_FILE);
    write(
        &path,
        (serde_json::to_string_pretty(&r).expect("report serializes") + "\n").as_bytes(),
    )?;
    manifest.add(out, &path);
    manifest.finish(out)?;
    Ok(())
}
