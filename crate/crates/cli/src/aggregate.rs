//! Grouping of trajectory records into conditional averages.

use std::collections::BTreeMap;

use anyhow::bail;
use clap::ValueEnum;
use mipt::analysis::{DataPoint, DataSet, DynamicSeries, PowerLawPoint};
use mipt::protocols::Accumulator;
use serde::Serialize;

use crate::records::ResultRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Entropy of the half chain `B ∪ C`.
    SHalf,
    /// Mutual information `I2(A:C)`.
    I2,
    /// Tripartite mutual information `I3(A:B:C)`.
    I3,
    /// Logarithmic negativity `E(A:C)`.
    Neg,
}

impl Observable {
    pub fn of(&self, r: &ResultRecord) -> Option<f64> {
        match self {
            Observable::SHalf => r.s_half.map(f64::from),
            Observable::I2 => r.i2_ac.map(f64::from),
            Observable::I3 => r.i3.map(f64::from),
            Observable::Neg => r.neg_ac.map(f64::from),
        }
    }
}

/// Which records take part in an analysis.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    pub protocol: Option<String>,
    /// `M` or `alpha`.
    pub param: Option<f64>,
    pub p: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub min_size: Option<usize>,
    pub max_size: Option<usize>,
}

impl Selection {
    pub fn matches(&self, r: &ResultRecord) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        self.protocol.as_ref().is_none_or(|p| *p == r.protocol)
            && self.param.is_none_or(|v| close(v, r.param()))
            && self.p.is_none_or(|v| close(v, r.p))
            && self.p_min.is_none_or(|v| r.p >= v - 1e-12)
            && self.p_max.is_none_or(|v| r.p <= v + 1e-12)
            && self.min_size.is_none_or(|v| r.size >= v)
            && self.max_size.is_none_or(|v| r.size <= v)
    }

    /// Errors if the selected records mix protocols or parameters.
    fn check_homogeneous(&self, records: &[&ResultRecord]) -> anyhow::Result<()> {
        if records.is_empty() {
            bail!("no records match the selection");
        }
        let first = records[0];
        if let Some(r) = records.iter().find(|r| r.protocol != first.protocol || r.param() != first.param()) {
            bail!(
                "selection mixes {} {} with {} {}; pass --protocol and --param",
                first.protocol,
                first.param(),
                r.protocol,
                r.param()
            );
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    protocol: String,
    param: u64,
    distance: Option<String>,
    size: usize,
    p: u64,
    steps: usize,
}

fn group_key(r: &ResultRecord) -> GroupKey {
    // total order on non-negative floats via their bits
    GroupKey {
        protocol: r.protocol.clone(),
        param: r.param().to_bits(),
        distance: r.distance.map(|d| format!("{d:?}").to_lowercase()),
        size: r.size,
        p: r.p.to_bits(),
        steps: r.steps,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub err: f64,
}

impl From<&Accumulator> for Estimate {
    fn from(a: &Accumulator) -> Self {
        Estimate { mean: a.mean().unwrap_or(f64::NAN), err: a.stderr().unwrap_or(f64::NAN) }
    }
}

/// Conditional averages of one `(protocol, parameter, L, p, T)` group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub protocol: String,
    pub param: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<String>,
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_half: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i2_ac: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i3: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_ac: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_r: Option<Vec<Estimate>>,
}

#[derive(Default)]
struct Sums {
    n: u64,
    obs: [Accumulator; 4],
    s_r: Vec<Accumulator>,
    stationary: bool,
}

/// Means and standard errors of every observable, grouped by
/// `(protocol, parameter, L, p, T)` and sorted by that key. Duplicate
/// trajectory records count once.
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut seen = std::collections::HashSet::new();
    let mut groups: BTreeMap<GroupKey, Sums> = BTreeMap::new();
    for r in records {
        if !seen.insert(r.key()) {
            continue;
        }
        let g = groups.entry(group_key(r)).or_default();
        g.n += 1;
        if let Some(series) = &r.s_r {
            if g.s_r.len() < series.len() {
                g.s_r.resize(series.len(), Accumulator::default());
            }
            for (acc, &v) in g.s_r.iter_mut().zip(series) {
                acc.push(f64::from(v));
            }
        } else {
            g.stationary = true;
            for (acc, obs) in g.obs.iter_mut().zip([Observable::SHalf, Observable::I2, Observable::I3, Observable::Neg]) {
                acc.push(obs.of(r).expect("checked on read"));
            }
        }
    }
    groups
        .into_iter()
        .map(|(k, g)| {
            let est = |i: usize| g.stationary.then(|| Estimate::from(&g.obs[i]));
            AggregateRow {
                protocol: k.protocol,
                param: f64::from_bits(k.param),
                distance: k.distance,
                size: k.size,
                p: f64::from_bits(k.p),
                steps: k.steps,
                n: g.n,
                s_half: est(0),
                i2_ac: est(1),
                i3: est(2),
                neg_ac: est(3),
                s_r: (!g.s_r.is_empty()).then(|| g.s_r.iter().map(Estimate::from).collect()),
            }
        })
        .collect()
}

fn dedup<'a>(records: &'a [ResultRecord], sel: &Selection, ancilla: bool) -> Vec<&'a ResultRecord> {
    let mut seen = std::collections::HashSet::new();
    records
        .iter()
        .filter(|r| r.is_ancilla() == ancilla && sel.matches(r) && seen.insert(r.key()))
        .collect()
}

/// Per-`(L, p)` averages of `obs`, keeping the per-trajectory samples for
/// resampling.
pub fn dataset(records: &[ResultRecord], sel: &Selection, obs: Observable) -> anyhow::Result<DataSet> {
    let chosen = dedup(records, sel, false);
    sel.check_homogeneous(&chosen)?;
    let mut groups: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    for r in chosen {
        groups.entry((r.size, r.p.to_bits())).or_default().push(obs.of(r).expect("checked on read"));
    }
    let points = groups
        .into_iter()
        .map(|((l, p), s)| DataPoint::from_samples(l, f64::from_bits(p), s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DataSet::new(points)?)
}

/// Size-resolved averages of `obs` at a single `p`.
pub fn power_points(records: &[ResultRecord], sel: &Selection, obs: Observable) -> anyhow::Result<Vec<PowerLawPoint>> {
    let data = dataset(records, sel, obs)?;
    let mut out: Vec<PowerLawPoint> = Vec::new();
    for pt in data.points() {
        if out.last().is_some_and(|q| q.size == pt.size) {
            bail!("several p values at L = {}; pass --p", pt.size);
        }
        out.push(PowerLawPoint { size: pt.size, mean: pt.mean, err: pt.err });
    }
    Ok(out)
}

/// Reference-qubit series per size, from ancilla records.
pub fn dynamic_series(records: &[ResultRecord], sel: &Selection) -> anyhow::Result<Vec<DynamicSeries>> {
    let chosen = dedup(records, sel, true);
    sel.check_homogeneous(&chosen)?;
    let mut groups: BTreeMap<usize, Vec<&ResultRecord>> = BTreeMap::new();
    for r in chosen {
        groups.entry(r.size).or_default().push(r);
    }
    let mut out = Vec::new();
    for (l, rs) in groups {
        if rs.iter().any(|r| r.p != rs[0].p) {
            bail!("several p values at L = {l}; pass --p");
        }
        let series: Vec<Vec<f64>> =
            rs.iter().map(|r| r.s_r.as_ref().expect("ancilla record").iter().map(|&v| f64::from(v)).collect()).collect();
        out.push(DynamicSeries::from_trajectories(l, series)?);
    }
    Ok(out)
}
