use std::fs;
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::output::Output;
use crate::registry;

/// Resolves `config`, runs its experiment and writes `manifest.json` next
/// to the artifacts. Failed checks are reported in the manifest, not as
/// errors.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let config = config.resolved()?;
    let exp = registry::find(&config.experiment)?;
    let dir = &config.out_dir;
    let unwritable = |e: std::io::Error| {
        CliError::Config(format!("output directory {} is not writable: {e}", dir.display()))
    };
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".ganlab-write-probe");
    fs::write(&probe, b"").map_err(unwritable)?;
    let _ = fs::remove_file(&probe);

    let start = Instant::now();
    let mut out = Output::new(dir);
    let checks = (exp.run)(&config, &mut out)?;
    let manifest = RunManifest {
        experiment: config.experiment.clone(),
        artifacts: out.into_files(),
        checks,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    for f in &manifest.artifacts {
        if !dir.join(f).is_file() {
            return Err(CliError::Io {
                path: dir.join(f),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "listed artifact is missing"),
            });
        }
    }
    manifest.write(dir)?;
    Ok(manifest)
}

/// Runs `work` for every seed on its own thread, each writing under
/// `seed-N/`, and merges outputs in seed-list order.
pub fn per_seed<T, F>(seeds: &[u64], out: &mut Output, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut Output) -> Result<T> + Sync,
{
    let work = &work;
    let results: Vec<Result<(T, Output)>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut child = out.child(format!("seed-{seed}"));
                s.spawn(move || work(seed, &mut child).map(|t| (t, child)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        let (v, child) = r?;
        out.absorb(child);
        values.push(v);
    }
    Ok(values)
}
