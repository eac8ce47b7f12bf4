//! CHAID tree construction on numeric predictors.
//!
//! Continuous predictors are quantile-binned into ordered categories, then
//! each node merges adjacent categories Kass-style: the most similar
//! adjacent pair (highest chi-square p on its 2x2 subtable) is merged while
//! that p exceeds `alpha`, while the group count exceeds `max_branches`, or
//! while some group is smaller than `min_leaf`. The surviving grouping is
//! tested as a 2xk table with a Bonferroni multiplier equal to the number of
//! contiguous partitions of the original categories, and the most
//! significant predictor below `alpha` splits the node.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::data::{ColumnId, Dataset};
use crate::error::{Error, Result};
use crate::stats::chi_square_sf;

/// Tree-growing limits. Defaults follow the interaction-scan tuning:
/// permissive alpha so weak candidate splits survive, small node sizes, and
/// a branch cap that keeps trees readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaidConfig {
    /// Significance level for merge and split decisions (on the adjusted p).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Minimum node size to attempt a split.
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    /// Minimum child size.
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Maximum children per node.
    #[serde(default = "default_max_branches")]
    pub max_branches: usize,
    /// Maximum tree depth (root is depth 0).
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    /// Initial ordinal bins per continuous predictor.
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
}

fn default_alpha() -> f64 {
    0.3
}
fn default_min_split() -> usize {
    18
}
fn default_min_leaf() -> usize {
    10
}
fn default_max_branches() -> usize {
    3
}
fn default_max_depth() -> usize {
    15
}
fn default_n_bins() -> usize {
    10
}

impl Default for ChaidConfig {
    fn default() -> Self {
        ChaidConfig {
            alpha: default_alpha(),
            min_split: default_min_split(),
            min_leaf: default_min_leaf(),
            max_branches: default_max_branches(),
            max_depth: default_max_depth(),
            n_bins: default_n_bins(),
        }
    }
}

impl ChaidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.min_leaf < 1 {
            return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if self.min_split < 2 {
            return Err(Error::InvalidConfig("min_split must be >= 2".into()));
        }
        if self.max_branches < 2 {
            return Err(Error::InvalidConfig("max_branches must be >= 2".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidConfig("n_bins must be >= 2".into()));
        }
        Ok(())
    }
}

/// Quantile binning of one column: ascending cut points and a per-row bin
/// index. Bin `b` covers `(cuts[b-1], cuts[b]]`, so equal values always
/// share a bin and bin order follows numeric order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub cuts: Vec<f64>,
    pub bins: Vec<usize>,
    pub n_bins: usize,
}

/// Bins values into at most `n_bins` equal-frequency categories. Heavy ties
/// collapse duplicate cut points, so the realized bin count can be smaller;
/// a constant column yields a single bin.
pub fn bin_continuous(values: &[f64], n_bins: usize) -> Binning {
    assert!(n_bins >= 2, "n_bins must be >= 2");
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max = *sorted.last().expect("bin_continuous needs data");

    let mut cuts: Vec<f64> = Vec::new();
    for b in 1..n_bins {
        let idx = b * n / n_bins;
        if idx == 0 {
            continue;
        }
        let cut = sorted[idx - 1];
        if cut < max && cuts.last() != Some(&cut) {
            cuts.push(cut);
        }
    }
    let bins: Vec<usize> = values
        .iter()
        .map(|v| cuts.partition_point(|c| c < v))
        .collect();
    Binning {
        n_bins: cuts.len() + 1,
        cuts,
        bins,
    }
}

/// Pearson chi-square test of a 2xk table given as k categories of
/// `(class0_count, class1_count)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p: f64,
    pub df: usize,
}

pub fn chi_square_test(table: &[(u64, u64)]) -> Result<ChiSquare> {
    let k = table.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "chi-square test needs at least 2 categories, got {k}"
        )));
    }
    let row0: u64 = table.iter().map(|c| c.0).sum();
    let row1: u64 = table.iter().map(|c| c.1).sum();
    if row0 == 0 || row1 == 0 {
        return Err(Error::InvalidInput("zero class margin".to_string()));
    }
    if table.iter().any(|c| c.0 + c.1 == 0) {
        return Err(Error::InvalidInput("zero category margin".to_string()));
    }
    let total = (row0 + row1) as f64;
    let mut statistic = 0.0;
    for &(n0, n1) in table {
        let col = (n0 + n1) as f64;
        let exp0 = row0 as f64 * col / total;
        let exp1 = row1 as f64 * col / total;
        let d0 = n0 as f64 - exp0;
        let d1 = n1 as f64 - exp1;
        statistic += d0 * d0 / exp0 + d1 * d1 / exp1;
    }
    let df = k - 1;
    Ok(ChiSquare {
        statistic,
        p: chi_square_sf(statistic, df),
        df,
    })
}

/// Outcome of category merging at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedSplit {
    /// Original bin indices per group; groups are contiguous over the
    /// non-empty bins and ordered.
    pub groups: Vec<Vec<usize>>,
    pub raw_p: f64,
    pub adjusted_p: f64,
    pub statistic: f64,
    pub df: usize,
}

/// 2x2 similarity p-value for two candidate groups; a zero class margin
/// means the groups have identical composition and merge freely.
fn pair_p(a: (u64, u64), b: (u64, u64)) -> f64 {
    match chi_square_test(&[a, b]) {
        Ok(res) => res.p,
        Err(_) => 1.0,
    }
}

/// Number of ways to partition `c` ordered categories into `k` contiguous
/// groups: C(c-1, k-1).
fn bonferroni_multiplier(c: usize, k: usize) -> f64 {
    let n = (c - 1) as u64;
    let r = (k - 1) as u64;
    let r = r.min(n - r.min(n));
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Kass-style merging of ordered categories. `bin_counts[b]` holds the
/// node's class counts for bin `b`; empty bins are skipped. Returns `None`
/// when fewer than two groups survive (no split is possible).
pub fn merge_categories(bin_counts: &[(u64, u64)], cfg: &ChaidConfig) -> Option<MergedSplit> {
    let mut groups: Vec<Vec<usize>> = bin_counts
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0 + c.1 > 0)
        .map(|(b, _)| vec![b])
        .collect();
    let c_initial = groups.len();
    if c_initial < 2 {
        return None;
    }
    let group_counts = |g: &[usize]| -> (u64, u64) {
        g.iter().fold((0, 0), |acc, &b| {
            (acc.0 + bin_counts[b].0, acc.1 + bin_counts[b].1)
        })
    };

    loop {
        if groups.len() == 1 {
            return None;
        }
        let counts: Vec<(u64, u64)> = groups.iter().map(|g| group_counts(g)).collect();

        // undersized groups merge into their more similar neighbour first
        if let Some(gi) = counts
            .iter()
            .position(|&(n0, n1)| (n0 + n1) < cfg.min_leaf as u64)
        {
            let neighbour = if gi == 0 {
                1
            } else if gi == groups.len() - 1
                || pair_p(counts[gi - 1], counts[gi]) >= pair_p(counts[gi], counts[gi + 1])
            {
                gi - 1
            } else {
                gi + 1
            };
            let (lo, hi) = (gi.min(neighbour), gi.max(neighbour));
            let right = groups.remove(hi);
            groups[lo].extend(right);
            continue;
        }

        // most similar adjacent pair
        let mut best_pair = 0;
        let mut best_p = f64::NEG_INFINITY;
        for i in 0..groups.len() - 1 {
            let p = pair_p(counts[i], counts[i + 1]);
            if p > best_p {
                best_p = p;
                best_pair = i;
            }
        }
        if best_p > cfg.alpha || groups.len() > cfg.max_branches {
            let right = groups.remove(best_pair + 1);
            groups[best_pair].extend(right);
            continue;
        }
        break;
    }

    let final_counts: Vec<(u64, u64)> = groups.iter().map(|g| group_counts(g)).collect();
    let test = chi_square_test(&final_counts).ok()?;
    let multiplier = bonferroni_multiplier(c_initial, groups.len());
    Some(MergedSplit {
        groups,
        raw_p: test.p,
        adjusted_p: (test.p * multiplier).min(1.0),
        statistic: test.statistic,
        df: test.df,
    })
}

/// A predictor offered to the tree, with its dataset-level binning.
#[derive(Debug, Clone)]
pub struct OfferedPredictor {
    pub column: ColumnId,
    pub name: String,
    pub binning: Binning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitChoice {
    pub column: ColumnId,
    pub merged: MergedSplit,
}

fn node_bin_counts(binning: &Binning, y: &[u8], rows: &[u32]) -> Vec<(u64, u64)> {
    let mut counts = vec![(0u64, 0u64); binning.n_bins];
    for &r in rows {
        let b = binning.bins[r as usize];
        if y[r as usize] == 0 {
            counts[b].0 += 1;
        } else {
            counts[b].1 += 1;
        }
    }
    counts
}

/// Evaluates every offered predictor at a node and returns the one with the
/// smallest adjusted p below `alpha`, or `None`. Ties break by larger
/// chi-square statistic, then lower column id.
pub fn best_split(
    rows: &[u32],
    y: &[u8],
    offered: &[OfferedPredictor],
    cfg: &ChaidConfig,
) -> Option<SplitChoice> {
    if rows.len() < cfg.min_split {
        return None;
    }
    let mut best: Option<SplitChoice> = None;
    for pred in offered {
        let counts = node_bin_counts(&pred.binning, y, rows);
        let Some(merged) = merge_categories(&counts, cfg) else {
            continue;
        };
        if merged.adjusted_p >= cfg.alpha {
            continue;
        }
        let candidate = SplitChoice {
            column: pred.column,
            merged,
        };
        let better = match &best {
            None => true,
            Some(cur) => {
                let a = (
                    candidate.merged.adjusted_p,
                    -candidate.merged.statistic,
                    candidate.column,
                );
                let b = (cur.merged.adjusted_p, -cur.merged.statistic, cur.column);
                a.partial_cmp(&b) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best
}

/// Value range of one child: rows fall in `(lower, upper]`, with `None`
/// meaning unbounded. `bin_lo..=bin_hi` is the covered original-bin range
/// (bins empty at the node are absorbed by the group to their left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRange {
    pub bin_lo: usize,
    pub bin_hi: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub column: ColumnId,
    pub column_name: String,
    pub statistic: f64,
    pub adjusted_p: f64,
    pub groups: Vec<GroupRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaidNode {
    pub id: usize,
    pub depth: usize,
    /// Row indices of the source dataset; not serialized.
    #[serde(skip)]
    pub rows: Vec<u32>,
    pub n0: u64,
    pub n1: u64,
    pub split: Option<NodeSplit>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl ChaidNode {
    pub fn size(&self) -> u64 {
        self.n0 + self.n1
    }

    pub fn response_rate(&self) -> f64 {
        self.n1 as f64 / self.size() as f64
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaidTree {
    pub nodes: Vec<ChaidNode>,
    pub config: ChaidConfig,
    /// Predictors offered to the tree, in offer order.
    pub predictors: Vec<(ColumnId, String)>,
    pub depth_reached: usize,
}

impl ChaidTree {
    pub fn root(&self) -> &ChaidNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ChaidNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Columns that appear in at least one split.
    pub fn split_columns(&self) -> HashSet<ColumnId> {
        self.nodes
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.column))
            .collect()
    }
}

/// Grows a CHAID tree breadth-first over the offered predictors. Predictors
/// must be fully imputed; the target must be clean binary.
pub fn grow_tree(ds: &Dataset, predictors: &[ColumnId], cfg: &ChaidConfig) -> Result<ChaidTree> {
    if predictors.is_empty() {
        return Err(Error::InvalidInput(
            "grow_tree needs at least one predictor".to_string(),
        ));
    }
    if ds.n_rows == 0 {
        return Err(Error::EmptyDataset("grow_tree on empty dataset".into()));
    }
    let y = ds.target_as_binary()?;
    let mut offered = Vec::with_capacity(predictors.len());
    for &id in predictors {
        let col = ds.column(id)?;
        let values = col.dense()?;
        offered.push(OfferedPredictor {
            column: id,
            name: col.name.clone(),
            binning: bin_continuous(&values, cfg.n_bins),
        });
    }

    let all_rows: Vec<u32> = (0..ds.n_rows as u32).collect();
    let (n0, n1) = class_counts(&y, &all_rows);
    let mut nodes = vec![ChaidNode {
        id: 0,
        depth: 0,
        rows: all_rows,
        n0,
        n1,
        split: None,
        children: Vec::new(),
        parent: None,
    }];

    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    while let Some(nid) = queue.pop_front() {
        if nodes[nid].depth >= cfg.max_depth || nodes[nid].rows.len() < cfg.min_split {
            continue;
        }
        let Some(choice) = best_split(&nodes[nid].rows, &y, &offered, cfg) else {
            continue;
        };
        let pred = offered
            .iter()
            .find(|p| p.column == choice.column)
            .expect("chosen predictor is offered");
        let ranges = group_ranges(&choice.merged.groups, &pred.binning);

        // partition node rows by covered bin range
        let mut child_rows: Vec<Vec<u32>> = vec![Vec::new(); ranges.len()];
        for &r in &nodes[nid].rows {
            let b = pred.binning.bins[r as usize];
            let gi = ranges.partition_point(|g| g.bin_hi < b);
            child_rows[gi].push(r);
        }
        debug_assert!(child_rows.iter().all(|c| !c.is_empty()));

        let depth = nodes[nid].depth + 1;
        let mut children = Vec::with_capacity(child_rows.len());
        for rows in child_rows {
            let (n0, n1) = class_counts(&y, &rows);
            let id = nodes.len();
            nodes.push(ChaidNode {
                id,
                depth,
                rows,
                n0,
                n1,
                split: None,
                children: Vec::new(),
                parent: Some(nid),
            });
            children.push(id);
            queue.push_back(id);
        }
        nodes[nid].split = Some(NodeSplit {
            column: choice.column,
            column_name: pred.name.clone(),
            statistic: choice.merged.statistic,
            adjusted_p: choice.merged.adjusted_p,
            groups: ranges,
        });
        nodes[nid].children = children;
    }

    let depth_reached = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    Ok(ChaidTree {
        nodes,
        config: cfg.clone(),
        predictors: offered.into_iter().map(|p| (p.column, p.name)).collect(),
        depth_reached,
    })
}

fn class_counts(y: &[u8], rows: &[u32]) -> (u64, u64) {
    let n1: u64 = rows.iter().map(|&r| y[r as usize] as u64).sum();
    (rows.len() as u64 - n1, n1)
}

fn group_ranges(groups: &[Vec<usize>], binning: &Binning) -> Vec<GroupRange> {
    let total_bins = binning.n_bins;
    let mut ranges: Vec<GroupRange> = Vec::with_capacity(groups.len());
    for gi in 0..groups.len() {
        let bin_lo = if gi == 0 {
            0
        } else {
            ranges.last().map(|g| g.bin_hi + 1).unwrap()
        };
        let bin_hi = if gi == groups.len() - 1 {
            total_bins - 1
        } else {
            // absorb trailing empty bins up to the next group's first member
            groups[gi + 1].first().copied().unwrap() - 1
        };
        let lower = if bin_lo == 0 {
            None
        } else {
            Some(binning.cuts[bin_lo - 1])
        };
        let upper = if bin_hi == total_bins - 1 {
            None
        } else {
            Some(binning.cuts[bin_hi])
        };
        ranges.push(GroupRange {
            bin_lo,
            bin_hi,
            lower,
            upper,
        });
    }
    ranges
}

/// One leaf segment of the profile: the conjunction of value conditions for
/// every offered predictor, leaf size, and response rate (fraction in [0,1]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub segment: String,
    pub n: u64,
    pub response_rate: f64,
}

/// Builds the per-leaf response-rate profile, ordered by descending rate.
/// Predictors never split on along a path render as `"<name> any"`.
pub fn extract_profile(tree: &ChaidTree) -> Vec<ProfileRow> {
    let mut rows: Vec<(usize, ProfileRow)> = Vec::new();
    for leaf in tree.leaves() {
        // intersect (lower, upper] per column along the path to the root
        let mut bounds: Vec<(Option<f64>, Option<f64>)> =
            vec![(None, None); tree.predictors.len()];
        let mut current = leaf;
        while let Some(pid) = current.parent {
            let parent = &tree.nodes[pid];
            let split = parent.split.as_ref().expect("parent has a split");
            let child_pos = parent
                .children
                .iter()
                .position(|&c| c == current.id)
                .expect("child is linked");
            let range = &split.groups[child_pos];
            let slot = tree
                .predictors
                .iter()
                .position(|(c, _)| *c == split.column)
                .expect("split column is offered");
            let (lo, hi) = &mut bounds[slot];
            if let Some(l) = range.lower {
                *lo = Some(lo.map_or(l, |cur: f64| cur.max(l)));
            }
            if let Some(u) = range.upper {
                *hi = Some(hi.map_or(u, |cur: f64| cur.min(u)));
            }
            current = parent;
        }
        let segment = tree
            .predictors
            .iter()
            .zip(&bounds)
            .map(|((_, name), bound)| render_condition(name, *bound))
            .collect::<Vec<_>>()
            .join(", ");
        rows.push((
            leaf.id,
            ProfileRow {
                segment,
                n: leaf.size(),
                response_rate: leaf.response_rate(),
            },
        ));
    }
    rows.sort_by(|(ida, a), (idb, b)| {
        b.response_rate
            .partial_cmp(&a.response_rate)
            .unwrap()
            .then(ida.cmp(idb))
    });
    rows.into_iter().map(|(_, r)| r).collect()
}

fn render_condition(name: &str, bound: (Option<f64>, Option<f64>)) -> String {
    match bound {
        (None, None) => format!("{name} any"),
        (None, Some(u)) => format!("{name} <= {u}"),
        (Some(l), None) => format!("{name} > {l}"),
        (Some(l), Some(u)) => format!("{name} > {l} and <= {u}"),
    }
}

/// Writes a profile as CSV with columns `segment,n,response_rate`.
pub fn write_profile_csv(rows: &[ProfileRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(["segment", "n", "response_rate"])
        .and_then(|_| {
            for row in rows {
                writer.write_record([
                    row.segment.as_str(),
                    &row.n.to_string(),
                    &format!("{}", row.response_rate),
                ])?;
            }
            Ok(())
        })
        .map_err(|source| Error::Csv {
            path: path.display().to_string(),
            source,
        })?;
    writer.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
