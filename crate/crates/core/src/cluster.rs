//! Divisive variable clustering for dimensionality reduction.
//!
//! Starting from one cluster holding every usable predictor, any cluster
//! whose correlation-matrix second eigenvalue exceeds a threshold is split:
//! the first two principal components are varimax-rotated and each member
//! goes to the rotated component it correlates with most. When no cluster is
//! splittable, each variable gets
//!
//! ```text
//! ratio = (1 - r2_own) / (1 - r2_next)
//! ```
//!
//! where `r2_own` is its squared correlation with its own cluster's first
//! principal component and `r2_next` the best squared correlation with any
//! other cluster's component. The per-cluster ratio minimizer is the
//! cluster's representative.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnId, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberStat {
    pub column: ColumnId,
    pub name: String,
    pub r2_own: f64,
    /// `None` when there is no other cluster.
    pub r2_next: Option<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<MemberStat>,
    pub representative: ColumnId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
    /// Constant predictors, excluded from clustering and never selected.
    pub excluded_constant: Vec<String>,
    /// Sum of first eigenvalues over clusters divided by the number of
    /// clustered variables; reported so the threshold can be tuned.
    pub variance_explained: f64,
    pub max_second_eigenvalue: f64,
}

/// Clusters the predictors of an imputed training set.
pub fn cluster_variables(train: &Dataset, max_second_eigenvalue: f64) -> Result<ClusterAssignment> {
    if max_second_eigenvalue <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "max_second_eigenvalue must be positive, got {max_second_eigenvalue}"
        )));
    }
    let predictor_ids = train.predictor_ids();
    if predictor_ids.is_empty() {
        return Err(Error::NoPredictors("dataset has no predictors".to_string()));
    }

    let mut used: Vec<ColumnId> = Vec::new();
    let mut excluded_constant: Vec<String> = Vec::new();
    let mut standardized: Vec<Vec<f64>> = Vec::new();
    for &id in &predictor_ids {
        let col = train.column(id)?;
        let dense = col.dense()?;
        if is_constant(&dense) {
            excluded_constant.push(col.name.clone());
            continue;
        }
        standardized.push(standardize(&dense));
        used.push(id);
    }
    if used.is_empty() {
        return Err(Error::NoPredictors(
            "every predictor is constant".to_string(),
        ));
    }

    let n = train.n_rows;
    let p = used.len();
    // full correlation matrix once; cluster sub-matrices are views of it
    let corr = correlation_matrix(&standardized, n);

    // divisive splitting
    let mut finished: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<Vec<usize>> = vec![(0..p).collect()];
    while let Some(members) = pending.pop() {
        match try_split(&members, &corr, max_second_eigenvalue) {
            Some((left, right)) => {
                pending.push(right);
                pending.push(left);
            }
            None => finished.push(members),
        }
    }
    finished.sort_by_key(|m| m.iter().min().copied());

    // per-cluster first principal component scores
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(finished.len());
    let mut first_eigenvalues: Vec<f64> = Vec::with_capacity(finished.len());
    for members in &finished {
        let (lambda1, v1) = leading_component(members, &corr);
        first_eigenvalues.push(lambda1);
        let mut score = vec![0.0f64; n];
        for (w, &m) in v1.iter().zip(members.iter()) {
            for (s, z) in score.iter_mut().zip(&standardized[m]) {
                *s += w * z;
            }
        }
        scores.push(score);
    }

    let single_cluster = finished.len() == 1;
    let mut clusters = Vec::with_capacity(finished.len());
    for (ci, members) in finished.iter().enumerate() {
        let mut stats = Vec::with_capacity(members.len());
        for &m in members {
            let r2_own = squared_correlation(&standardized[m], &scores[ci]);
            let r2_next = if single_cluster {
                None
            } else {
                let best = scores
                    .iter()
                    .enumerate()
                    .filter(|(cj, _)| *cj != ci)
                    .map(|(_, s)| squared_correlation(&standardized[m], s))
                    .fold(f64::NEG_INFINITY, f64::max);
                Some(best)
            };
            let ratio = match r2_next {
                Some(next) => (1.0 - r2_own) / (1.0 - next),
                None => 1.0 - r2_own,
            };
            stats.push(MemberStat {
                column: used[m],
                name: train.column(used[m])?.name.clone(),
                r2_own,
                r2_next,
                ratio,
            });
        }
        let representative = ratio_minimizer(&stats);
        clusters.push(Cluster {
            members: stats,
            representative,
        });
    }

    let variance_explained = first_eigenvalues.iter().sum::<f64>() / p as f64;
    Ok(ClusterAssignment {
        clusters,
        excluded_constant,
        variance_explained,
        max_second_eigenvalue,
    })
}

/// One representative per cluster: the ratio minimizer, ties broken by the
/// lower column id.
pub fn select_representatives(assignment: &ClusterAssignment) -> Vec<ColumnId> {
    assignment
        .clusters
        .iter()
        .map(|c| ratio_minimizer(&c.members))
        .collect()
}

fn ratio_minimizer(stats: &[MemberStat]) -> ColumnId {
    let mut best = &stats[0];
    for s in &stats[1..] {
        if s.ratio < best.ratio || (s.ratio == best.ratio && s.column < best.column) {
            best = s;
        }
    }
    best.column
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    values.iter().map(|v| (v - mean) / sd).collect()
}

fn correlation_matrix(standardized: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let p = standardized.len();
    let mut corr = DMatrix::zeros(p, p);
    for i in 0..p {
        corr[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let dot: f64 = standardized[i]
                .iter()
                .zip(&standardized[j])
                .map(|(a, b)| a * b)
                .sum();
            let r = (dot / n as f64).clamp(-1.0, 1.0);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    corr
}

fn submatrix(members: &[usize], corr: &DMatrix<f64>) -> DMatrix<f64> {
    let m = members.len();
    DMatrix::from_fn(m, m, |i, j| corr[(members[i], members[j])])
}

/// Eigen decomposition sorted by descending eigenvalue, with each vector's
/// sign fixed so its largest-magnitude entry is positive.
fn sorted_eigen(matrix: DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = matrix.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut values = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let lead = v
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        vectors.push(v);
    }
    (values, vectors)
}

fn leading_component(members: &[usize], corr: &DMatrix<f64>) -> (f64, Vec<f64>) {
    if members.len() == 1 {
        return (1.0, vec![1.0]);
    }
    let (values, vectors) = sorted_eigen(submatrix(members, corr));
    (values[0], vectors[0].iter().copied().collect())
}

/// Splits a cluster if its second eigenvalue exceeds the threshold. Members
/// are assigned to the varimax-rotated first or second component by larger
/// squared loading. Returns `None` when unsplittable (small, below the
/// threshold, or the assignment degenerates to one side).
fn try_split(
    members: &[usize],
    corr: &DMatrix<f64>,
    max_second_eigenvalue: f64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if members.len() < 2 {
        return None;
    }
    let (values, vectors) = sorted_eigen(submatrix(members, corr));
    if values[1] <= max_second_eigenvalue {
        return None;
    }
    let s1 = values[0].max(0.0).sqrt();
    let s2 = values[1].max(0.0).sqrt();
    let loadings: Vec<(f64, f64)> = (0..members.len())
        .map(|i| (vectors[0][i] * s1, vectors[1][i] * s2))
        .collect();
    let rotated = varimax_two(&loadings);

    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, &m) in members.iter().enumerate() {
        let (a, b) = rotated[i];
        if a * a >= b * b {
            left.push(m);
        } else {
            right.push(m);
        }
    }
    if left.is_empty() || right.is_empty() {
        return None;
    }
    Some((left, right))
}

/// Varimax rotation for a two-column loading matrix via the closed-form
/// angle; the candidate at +45 degrees is checked too since the stationary
/// condition does not distinguish maxima from minima.
fn varimax_two(loadings: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let m = loadings.len() as f64;
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    let mut c_sum = 0.0;
    let mut d_sum = 0.0;
    for &(a, b) in loadings {
        let u = a * a - b * b;
        let v = 2.0 * a * b;
        a_sum += u;
        b_sum += v;
        c_sum += u * u - v * v;
        d_sum += 2.0 * u * v;
    }
    let num = d_sum - 2.0 * a_sum * b_sum / m;
    let den = c_sum - (a_sum * a_sum - b_sum * b_sum) / m;
    let theta = 0.25 * num.atan2(den);

    let rotate = |t: f64| -> Vec<(f64, f64)> {
        let (sin, cos) = t.sin_cos();
        loadings
            .iter()
            .map(|&(a, b)| (a * cos + b * sin, -a * sin + b * cos))
            .collect()
    };
    let criterion = |l: &[(f64, f64)]| -> f64 {
        let m = l.len() as f64;
        let mut v = 0.0;
        for take in [0usize, 1] {
            let mut s2 = 0.0;
            let mut s4 = 0.0;
            for &pair in l {
                let x = if take == 0 { pair.0 } else { pair.1 };
                s2 += x * x;
                s4 += x * x * x * x;
            }
            v += m * s4 - s2 * s2;
        }
        v
    };

    let cand1 = rotate(theta);
    let cand2 = rotate(theta + std::f64::consts::FRAC_PI_4);
    if criterion(&cand1) >= criterion(&cand2) {
        cand1
    } else {
        cand2
    }
}

fn squared_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    ((sxy * sxy) / (sxx * syy)).min(1.0)
}
