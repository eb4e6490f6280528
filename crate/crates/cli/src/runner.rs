//! Resumable sweep execution: a worker pool simulates trajectories and a
//! single writer thread appends their records.

use std::io::Write;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Instant;

use anyhow::Context;
use mipt::protocols::{run_ancilla_trajectory, run_trajectory, ProtocolConfig};
use rayon::prelude::*;

use crate::manifest::Manifest;
use crate::records::{open_for_append, ResultRecord};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Progress lines on stderr.
    pub progress: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub simulated: usize,
    pub skipped: usize,
}

pub fn run(manifest: &Manifest, opts: &RunOptions) -> anyhow::Result<RunSummary> {
    let mut manifest = manifest.clone();
    if let Some(seed) = opts.seed {
        manifest.master_seed = seed;
    }
    let output = opts.output.clone().unwrap_or_else(|| manifest.output.clone());
    let configs = manifest.configs()?;
    let ancilla = manifest.ancilla;

    let (file, done) = open_for_append(&output)?;
    let tasks: Vec<(&ProtocolConfig, u64)> = configs
        .iter()
        .flat_map(|c| (0..c.n_trajectories as u64).map(move |id| (c, id)))
        .collect();
    let total = tasks.len();
    let todo: Vec<(&ProtocolConfig, u64)> = tasks
        .into_iter()
        .filter(|(c, id)| !done.contains(&ResultRecord::config_key(c, *id, ancilla)))
        .collect();
    let skipped = total - todo.len();
    let n_todo = todo.len();

    let workers = opts.workers.or(manifest.workers).unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;

    let (tx, rx) = mpsc::channel::<ResultRecord>();
    let progress = opts.progress;
    let writer = std::thread::spawn(move || -> anyhow::Result<usize> {
        let mut out = std::io::BufWriter::new(file);
        let start = Instant::now();
        let mut written = 0usize;
        let step = (n_todo / 20).max(1);
        for rec in rx {
            out.write_all(rec.to_line().as_bytes())?;
            out.flush()?;
            written += 1;
            if progress && (written.is_multiple_of(step) || written == n_todo) {
                eprintln!("{written}/{n_todo} trajectories ({:.1} s)", start.elapsed().as_secs_f64());
            }
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        Ok(written)
    });

    let result: anyhow::Result<()> = pool.install(|| {
        todo.par_iter().try_for_each_with(tx, |tx, &(cfg, id)| {
            let rec = if ancilla {
                ResultRecord::ancilla(cfg, id, run_ancilla_trajectory(cfg, id)?)
            } else {
                ResultRecord::stationary(cfg, id, &run_trajectory(cfg, id)?)
            };
            tx.send(rec).context("writer thread stopped")
        })
    });
    let written = writer.join().expect("writer thread panicked")?;
    result?;
    Ok(RunSummary { output, simulated: written, skipped })
}
