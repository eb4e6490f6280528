//! Line-delimited JSON result records, one per trajectory.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use anyhow::{bail, Context};
use mipt::protocols::{Distance, ProtocolConfig, TrajectoryObservables, UnitaryKind};
use serde::{Deserialize, Serialize};

pub const RECORD_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub format_version: u32,
    pub protocol: String,
    #[serde(rename = "L")]
    pub size: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Distance>,
    pub p: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub trajectory_id: u64,
    pub master_seed: u64,
    pub code_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_half: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i2_ac: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i3: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_ac: Option<u32>,
    /// Reference-qubit entropy at `t = 0..=T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_r: Option<Vec<u8>>,
}

/// Identity of a trajectory inside a result file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub protocol: String,
    pub size: usize,
    /// Bits of `M` or `alpha`.
    pub param: u64,
    pub distance: Option<String>,
    pub p: u64,
    pub steps: usize,
    pub master_seed: u64,
    pub ancilla: bool,
    pub trajectory_id: u64,
}

impl ResultRecord {
    fn base(config: &ProtocolConfig, trajectory_id: u64) -> Self {
        let (m, alpha, distance) = match config.kind {
            UnitaryKind::Chrc { m } => (Some(m), None, None),
            UnitaryKind::Lrhrc { alpha, distance } => (None, Some(alpha), Some(distance)),
        };
        Self {
            format_version: RECORD_VERSION,
            protocol: config.kind.name().to_string(),
            size: config.size,
            m,
            alpha,
            distance,
            p: config.p,
            steps: config.steps,
            trajectory_id,
            master_seed: config.master_seed,
            code_version: CODE_VERSION.to_string(),
            s_half: None,
            i2_ac: None,
            i3: None,
            neg_ac: None,
            s_r: None,
        }
    }

    pub fn stationary(config: &ProtocolConfig, trajectory_id: u64, obs: &TrajectoryObservables) -> Self {
        Self {
            s_half: Some(obs.s_half),
            i2_ac: Some(obs.i2_ac),
            i3: Some(obs.i3),
            neg_ac: Some(obs.neg_ac),
            ..Self::base(config, trajectory_id)
        }
    }

    pub fn ancilla(config: &ProtocolConfig, trajectory_id: u64, series: Vec<u8>) -> Self {
        Self { s_r: Some(series), ..Self::base(config, trajectory_id) }
    }

    pub fn param(&self) -> f64 {
        self.m.map(|m| m as f64).or(self.alpha).unwrap_or(f64::NAN)
    }

    pub fn is_ancilla(&self) -> bool {
        self.s_r.is_some()
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            protocol: self.protocol.clone(),
            size: self.size,
            param: self.param().to_bits(),
            distance: self.distance.map(|d| format!("{d:?}")),
            p: self.p.to_bits(),
            steps: self.steps,
            master_seed: self.master_seed,
            ancilla: self.is_ancilla(),
            trajectory_id: self.trajectory_id,
        }
    }

    pub fn config_key(config: &ProtocolConfig, trajectory_id: u64, ancilla: bool) -> RecordKey {
        let mut r = Self::base(config, trajectory_id);
        if ancilla {
            r.s_r = Some(Vec::new());
        }
        r.key()
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.format_version != RECORD_VERSION {
            bail!("unsupported record format_version {}", self.format_version);
        }
        let kind_ok = match self.protocol.as_str() {
            "chrc" => self.m.is_some() && self.alpha.is_none(),
            "lrhrc" => self.alpha.is_some() && self.m.is_none(),
            other => bail!("unknown protocol {other:?}"),
        };
        if !kind_ok {
            bail!("protocol parameters do not match {:?}", self.protocol);
        }
        let stationary = [self.s_half.is_some(), self.i2_ac.is_some(), self.i3.is_some(), self.neg_ac.is_some()];
        let complete = stationary.iter().all(|&b| b) && self.s_r.is_none();
        let ancilla = stationary.iter().all(|&b| !b) && self.s_r.is_some();
        if !complete && !ancilla {
            bail!("record has neither a full observable set nor an S_R series");
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("records serialize");
        s.push('\n');
        s
    }
}

/// Reads every complete record in `path`. A trailing line without a
/// newline is an interrupted write and is ignored.
pub fn read_records(path: &Path) -> anyhow::Result<Vec<ResultRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let rec: ResultRecord = serde_json::from_str(text)
            .with_context(|| format!("{}:{number}: malformed record", path.display()))?;
        rec.check().with_context(|| format!("{}:{number}", path.display()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_all(paths: &[impl AsRef<Path>]) -> anyhow::Result<Vec<ResultRecord>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_records(p.as_ref())?);
    }
    Ok(all)
}

/// Opens `path` for appending after dropping any partial trailing line,
/// and returns the keys already present.
pub fn open_for_append(path: &Path) -> anyhow::Result<(File, HashSet<RecordKey>)> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .create(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        file.set_len(complete as u64)?;
        file.seek(SeekFrom::End(0))?;
    }
    let keys = read_records(path)?.iter().map(ResultRecord::key).collect();
    Ok((file, keys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config() -> ProtocolConfig {
        ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 8, 0.25).with_seed(5)
    }

    fn sample() -> ResultRecord {
        let obs = TrajectoryObservables { s_half: 3, i2_ac: 2, i3: -1, neg_ac: 1 };
        ResultRecord::stationary(&config(), 4, &obs)
    }

    #[test]
    fn record_round_trips() {
        let r = sample();
        let line = r.to_line();
        assert!(line.contains("\"L\":8") && line.contains("\"M\":2"));
        let back: ResultRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.key(), ResultRecord::config_key(&config(), 4, false));
    }

    #[test]
    fn readers_reject_unknown_versions_and_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let line = sample().to_line().replace("\"format_version\":1", "\"format_version\":2");
        std::fs::write(&path, line).unwrap();
        assert!(read_records(&path).is_err());
        let line = sample().to_line().replace("\"p\":", "\"extra\":1,\"p\":");
        std::fs::write(&path, line).unwrap();
        assert!(read_records(&path).is_err());
    }

    #[test]
    fn partial_trailing_line_is_dropped_on_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let full = sample().to_line();
        std::fs::write(&path, format!("{full}{}", &full[..20])).unwrap();
        assert_eq!(read_records(&path).unwrap().len(), 1);
        let (mut f, keys) = open_for_append(&path).unwrap();
        assert_eq!(keys.len(), 1);
        f.write_all(full.as_bytes()).unwrap();
        drop(f);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{full}{full}"));
    }
}
