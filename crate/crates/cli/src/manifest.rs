//! Sweep manifests.
//!
//! ```toml
//! format_version = 1
//! output = "results/chrc.jsonl"
//! master_seed = 7
//! n_trajectories = 500
//! workers = 8            # optional, default: available parallelism
//! ancilla = false        # record S_R(t) instead of stationary observables
//!
//! [[sweep]]
//! protocol = "chrc"
//! sizes = [16, 32, 64]
//! cluster_sizes = [2]
//! p_grid = { start = 0.28, stop = 0.38, step = 0.01 }
//!
//! [[sweep]]
//! protocol = "lrhrc"
//! sizes = [16, 32]
//! alphas = [1.5, 3.5]
//! p = [0.1, 0.15, 0.2]
//! steps = 128            # optional, default 4L
//! distance = "linear"    # or "chordal"
//! n_trajectories = 100   # optional per-sweep override
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mipt::protocols::{Distance, ProtocolConfig, UnitaryKind};
use serde::Deserialize;

pub const MANIFEST_VERSION: u32 = 1;

/// Sweep values of `p` are rounded to this many decimals.
const P_DECIMALS: i32 = 6;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub output: PathBuf,
    pub master_seed: u64,
    pub n_trajectories: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub ancilla: bool,
    #[serde(rename = "sweep")]
    pub sweeps: Vec<Sweep>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolName {
    Chrc,
    Lrhrc,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub protocol: ProtocolName,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub p_grid: Option<PGrid>,
    #[serde(default)]
    pub cluster_sizes: Vec<usize>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub distance: Distance,
    #[serde(default)]
    pub n_trajectories: Option<usize>,
}

pub fn round_p(p: f64) -> f64 {
    let s = 10f64.powi(P_DECIMALS);
    (p * s).round() / s
}

impl PGrid {
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) {
            bail!("p_grid needs step > 0 and stop >= start");
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| round_p(self.start + self.step * k as f64)).collect())
    }
}

impl Sweep {
    fn p_values(&self) -> anyhow::Result<Vec<f64>> {
        let mut ps: Vec<f64> = self.p.iter().map(|&p| round_p(p)).collect();
        if let Some(g) = &self.p_grid {
            ps.extend(g.values()?);
        }
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        if ps.is_empty() {
            bail!("sweep has neither `p` nor `p_grid`");
        }
        Ok(ps)
    }

    fn kinds(&self) -> anyhow::Result<Vec<UnitaryKind>> {
        match self.protocol {
            ProtocolName::Chrc => {
                if !self.alphas.is_empty() {
                    bail!("`alphas` given for a chrc sweep");
                }
                if self.cluster_sizes.is_empty() {
                    bail!("chrc sweep needs `cluster_sizes`");
                }
                Ok(self.cluster_sizes.iter().map(|&m| UnitaryKind::Chrc { m }).collect())
            }
            ProtocolName::Lrhrc => {
                if !self.cluster_sizes.is_empty() {
                    bail!("`cluster_sizes` given for an lrhrc sweep");
                }
                if self.alphas.is_empty() {
                    bail!("lrhrc sweep needs `alphas`");
                }
                Ok(self.alphas.iter().map(|&alpha| UnitaryKind::Lrhrc { alpha, distance: self.distance }).collect())
            }
        }
    }
}

impl Manifest {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let m: Manifest = toml::from_str(text).context("parsing manifest")?;
        if m.format_version != MANIFEST_VERSION {
            bail!("unsupported manifest format_version {} (expected {MANIFEST_VERSION})", m.format_version);
        }
        if m.sweeps.is_empty() {
            bail!("manifest has no [[sweep]] tables");
        }
        if m.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        m.configs()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in manifest {}", path.display()))
    }

    /// Every configuration of the sweep, validated, in manifest order.
    pub fn configs(&self) -> anyhow::Result<Vec<ProtocolConfig>> {
        let mut out = Vec::new();
        for (i, sweep) in self.sweeps.iter().enumerate() {
            let ctx = || format!("sweep #{}", i + 1);
            if sweep.sizes.is_empty() {
                bail!("{}: empty `sizes`", ctx());
            }
            let ps = sweep.p_values().with_context(ctx)?;
            for kind in sweep.kinds().with_context(ctx)? {
                for &size in &sweep.sizes {
                    for &p in &ps {
                        let cfg = ProtocolConfig::new(kind, size, p)
                            .with_steps(sweep.steps.unwrap_or(4 * size))
                            .with_seed(self.master_seed)
                            .with_trajectories(sweep.n_trajectories.unwrap_or(self.n_trajectories));
                        cfg.validate().with_context(ctx)?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
format_version = 1
output = "out.jsonl"
master_seed = 3
n_trajectories = 4

[[sweep]]
protocol = "chrc"
sizes = [8]
cluster_sizes = [2, 4]
p = [0.1, 0.2]

[[sweep]]
protocol = "lrhrc"
sizes = [8, 12]
alphas = [2.0]
p_grid = { start = 0.1, stop = 0.3, step = 0.1 }
steps = 5
"#;

    #[test]
    fn expands_sweeps() {
        let m = Manifest::from_toml(BASIC).unwrap();
        let c = m.configs().unwrap();
        assert_eq!(c.len(), 4 + 6);
        assert_eq!(c[0].steps, 32);
        assert_eq!(c[4].steps, 5);
        assert_eq!(c[4].p, 0.1);
        assert_eq!(c[6].p, 0.3);
        assert!(c.iter().all(|c| c.n_trajectories == 4 && c.master_seed == 3));
    }

    #[test]
    fn grid_values_are_rounded() {
        let g = PGrid { start: 0.1, stop: 0.3, step: 0.01 };
        let v = g.values().unwrap();
        assert_eq!(v.len(), 21);
        assert_eq!(v[7], 0.17);
        assert_eq!(*v.last().unwrap(), 0.3);
    }

    #[test]
    fn rejects_bad_manifests() {
        let cases = [
            BASIC.replace("format_version = 1", "format_version = 9"),
            BASIC.replace("sizes = [8]", "sizes = [10]"),
            BASIC.replace("cluster_sizes = [2, 4]", "cluster_sizes = [3]"),
            BASIC.replace("p = [0.1, 0.2]", "p = [1.5]"),
            BASIC.replace("p = [0.1, 0.2]", ""),
            BASIC.replace("steps = 5", "stepz = 5"),
            BASIC.replace("alphas = [2.0]", "alphas = [-1.0]"),
            BASIC.replace("n_trajectories = 4", "n_trajectories = 4\nworkers = 0"),
        ];
        for text in cases {
            assert!(Manifest::from_toml(&text).is_err(), "{text}");
        }
    }
}
