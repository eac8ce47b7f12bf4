//! Logistic regression fit by iteratively reweighted least squares, plus the
//! model-selection machinery around it: Wald statistics, stepwise selection
//! with entry/stay significance levels, VIF screening, and Wald-ranked
//! model reduction.
//!
//! All models carry an intercept. Coefficients are keyed by column name so a
//! model fitted on one dataset can score any dataset with the same schema.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnId, Dataset};
use crate::error::{Error, Result};
use crate::stats::{chi_square_sf, log1p_exp, sigmoid};

/// Condition-number cutoff for declaring the information matrix singular.
const CONDITION_LIMIT: f64 = 1e12;
/// Coefficient magnitude at which a non-vanishing gradient is read as
/// complete or quasi-complete separation.
const SEPARATION_BETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Predictor column names, in design order (intercept excluded).
    pub columns: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub intercept_se: f64,
    pub std_errors: Vec<f64>,
    /// Wald chi-square per coefficient: (beta / se)^2.
    pub wald_chi2: Vec<f64>,
    pub wald_p: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when coefficients diverged with a non-vanishing gradient.
    pub separation: bool,
    /// Log-likelihood after each accepted iteration (non-decreasing).
    pub ll_history: Vec<f64>,
}

impl LogisticModel {
    /// Linear predictor for one row of named values, in `columns` order.
    fn eta(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

fn build_design(ds: &Dataset, cols: &[ColumnId]) -> Result<(DMatrix<f64>, Vec<String>)> {
    let n = ds.n_rows;
    let k = cols.len();
    let mut x = DMatrix::zeros(n, k + 1);
    let mut names = Vec::with_capacity(k);
    for r in 0..n {
        x[(r, 0)] = 1.0;
    }
    for (c, &id) in cols.iter().enumerate() {
        let col = ds.column(id)?;
        let dense = col.dense()?;
        names.push(col.name.clone());
        for (r, v) in dense.iter().enumerate() {
            x[(r, c + 1)] = *v;
        }
    }
    Ok((x, names))
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut ll = 0.0;
    for r in 0..y.len() {
        ll += y[r] * eta[r] - log1p_exp(eta[r]);
    }
    ll
}

/// Solves the Newton system by symmetric eigendecomposition, failing with
/// the collinear column names when the condition estimate blows past the
/// limit.
fn solve_information(
    info: &DMatrix<f64>,
    rhs: &DVector<f64>,
    names: &[String],
) -> Result<DVector<f64>> {
    let eig = info.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !min_ev.is_finite() || min_ev <= 0.0 || max_ev / min_ev > CONDITION_LIMIT {
        let k = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let v = eig.eigenvectors.column(k);
        let peak = v.iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut columns = Vec::new();
        for (i, load) in v.iter().enumerate() {
            if load.abs() > 0.3 * peak {
                columns.push(if i == 0 {
                    "(intercept)".to_string()
                } else {
                    names[i - 1].clone()
                });
            }
        }
        return Err(Error::SingularDesign {
            condition: if min_ev > 0.0 {
                max_ev / min_ev
            } else {
                f64::INFINITY
            },
            columns,
        });
    }
    let mut solution = DVector::zeros(rhs.len());
    for k in 0..eig.eigenvalues.len() {
        let v = eig.eigenvectors.column(k);
        let coef = v.dot(rhs) / eig.eigenvalues[k];
        solution += v * coef;
    }
    Ok(solution)
}

/// Covariance of the estimates: inverse information with tiny eigenvalues
/// clamped, so separated fits still report (huge) standard errors instead of
/// overflowing.
fn covariance(info: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = info.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let floor = (max_ev * 1e-14).max(f64::MIN_POSITIVE);
    let p = eig.eigenvalues.len();
    let mut cov = DMatrix::zeros(p, p);
    for k in 0..p {
        let lambda = eig.eigenvalues[k].max(floor);
        let v = eig.eigenvectors.column(k);
        cov += v * v.transpose() / lambda;
    }
    cov
}

/// Fits a logistic regression of the target on the given columns (plus an
/// intercept) by IRLS with step-halving. Converges when the largest score
/// component drops below `tol`.
pub fn fit(ds: &Dataset, cols: &[ColumnId], cfg: &FitConfig) -> Result<LogisticModel> {
    let (x, names) = build_design(ds, cols)?;
    let y_bin = ds.target_as_binary()?;
    let y = DVector::from_iterator(y_bin.len(), y_bin.iter().map(|&v| v as f64));
    fit_design(x, y, names, cfg)
}

fn fit_design(
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
    cfg: &FitConfig,
) -> Result<LogisticModel> {
    let n = x.nrows();
    let p = x.ncols();
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "{n} rows cannot support {p} design columns"
        )));
    }

    let mut beta: DVector<f64> = DVector::zeros(p);
    let mut ll = log_likelihood(&x, &y, &beta);
    let mut ll_history = vec![ll];
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let eta = &x * &beta;
        let mut mu = DVector::zeros(n);
        let mut w = DVector::zeros(n);
        for r in 0..n {
            let m = sigmoid(eta[r]);
            mu[r] = m;
            w[r] = m * (1.0 - m);
        }
        let residual = &y - &mu;
        let score = x.transpose() * &residual;
        let max_score = score.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_score < cfg.tol {
            converged = true;
            break;
        }
        let max_beta = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_beta > SEPARATION_BETA {
            separation = true;
            break;
        }

        let mut xw = x.clone();
        for r in 0..n {
            let scale = w[r];
            for c in 0..p {
                xw[(r, c)] *= scale;
            }
        }
        let info = x.transpose() * &xw;
        let delta = match solve_information(&info, &score, &names) {
            Ok(d) => d,
            Err(e) => {
                if iter == 1 {
                    // at beta = 0 the weights are constant, so singularity
                    // here means structurally collinear columns
                    return Err(e);
                }
                separation = true;
                break;
            }
        };

        // step-halving keeps the log-likelihood non-decreasing; convergence
        // is judged by the score alone at the top of the next iteration, so
        // a converged model always carries a vanishing gradient
        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..=10 {
            let candidate = &beta + &delta * step;
            let cand_ll = log_likelihood(&x, &y, &candidate);
            if cand_ll >= ll {
                beta = candidate;
                ll = cand_ll;
                ll_history.push(ll);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // final statistics at the returned estimate
    let eta = &x * &beta;
    let mut w = DVector::zeros(n);
    for r in 0..n {
        let m = sigmoid(eta[r]);
        w[r] = m * (1.0 - m);
    }
    let mut xw = x.clone();
    for r in 0..n {
        for c in 0..p {
            xw[(r, c)] *= w[r];
        }
    }
    let info = x.transpose() * &xw;
    let cov = covariance(&info);

    let intercept = beta[0];
    let intercept_se = cov[(0, 0)].max(0.0).sqrt();
    let mut coefficients = Vec::with_capacity(p - 1);
    let mut std_errors = Vec::with_capacity(p - 1);
    let mut wald_chi2 = Vec::with_capacity(p - 1);
    let mut wald_p = Vec::with_capacity(p - 1);
    for c in 1..p {
        let b = beta[c];
        let se = cov[(c, c)].max(0.0).sqrt();
        let wald = if se > 0.0 { (b / se) * (b / se) } else { 0.0 };
        coefficients.push(b);
        std_errors.push(se);
        wald_chi2.push(wald);
        wald_p.push(chi_square_sf(wald, 1));
    }

    Ok(LogisticModel {
        columns: names,
        intercept,
        coefficients,
        intercept_se,
        std_errors,
        wald_chi2,
        wald_p,
        log_likelihood: ll,
        iterations,
        converged: converged && !separation,
        separation,
        ll_history,
    })
}

/// Scores a dataset with a fitted model: sigmoid of the linear predictor,
/// strictly inside (0, 1). Every model column must exist and be fully
/// imputed.
pub fn predict_proba(model: &LogisticModel, ds: &Dataset) -> Result<Vec<f64>> {
    let mut col_values: Vec<Vec<f64>> = Vec::with_capacity(model.columns.len());
    for name in &model.columns {
        let col = ds.column_by_name(name)?;
        col_values.push(col.dense()?);
    }
    let mut out = Vec::with_capacity(ds.n_rows);
    let mut row = vec![0.0f64; model.columns.len()];
    for r in 0..ds.n_rows {
        for (slot, values) in row.iter_mut().zip(&col_values) {
            *slot = values[r];
        }
        out.push(sigmoid(model.eta(&row)));
    }
    Ok(out)
}

/// Log-likelihood and score vector (intercept first) at the given
/// coefficients; exposed for convergence diagnostics.
pub fn log_likelihood_and_gradient(
    ds: &Dataset,
    cols: &[ColumnId],
    intercept: f64,
    coefficients: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (x, _) = build_design(ds, cols)?;
    let y_bin = ds.target_as_binary()?;
    let y = DVector::from_iterator(y_bin.len(), y_bin.iter().map(|&v| v as f64));
    let mut beta = DVector::zeros(cols.len() + 1);
    beta[0] = intercept;
    for (i, b) in coefficients.iter().enumerate() {
        beta[i + 1] = *b;
    }
    let ll = log_likelihood(&x, &y, &beta);
    let eta = &x * &beta;
    let mut mu = DVector::zeros(x.nrows());
    for r in 0..x.nrows() {
        mu[r] = sigmoid(eta[r]);
    }
    let score = x.transpose() * (&y - &mu);
    Ok((ll, score.iter().cloned().collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepAction {
    Enter,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: StepAction,
    pub column: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<StepRecord>,
    pub final_columns: Vec<String>,
    pub candidate_pool: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepwiseConfig {
    /// Significance level to enter the model.
    #[serde(default = "default_sle")]
    pub sle: f64,
    /// Significance level to stay in the model.
    #[serde(default = "default_sls")]
    pub sls: f64,
    /// Hard cap on enter/remove actions; selection on large noisy candidate
    /// pools can otherwise churn for a very long time.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_sle() -> f64 {
    0.15
}
fn default_sls() -> f64 {
    0.15
}
fn default_max_steps() -> usize {
    100
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            sle: default_sle(),
            sls: default_sls(),
            max_steps: default_max_steps(),
            fit: FitConfig::default(),
        }
    }
}

/// Stepwise selection: alternate entering the candidate with the smallest
/// Wald p below `sle` and removing the included column with the largest
/// Wald p above `sls`, until neither fires, a model state repeats, or the
/// step cap is reached. Ties break toward the lower column id.
pub fn stepwise(
    ds: &Dataset,
    candidates: &[ColumnId],
    cfg: &StepwiseConfig,
) -> Result<(SelectionTrace, LogisticModel)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "stepwise needs a non-empty candidate list".to_string(),
        ));
    }
    if !(cfg.sle > 0.0 && cfg.sle < 1.0) || !(cfg.sls > 0.0 && cfg.sls < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sle/sls must be in (0,1), got {}/{}",
            cfg.sle, cfg.sls
        )));
    }

    let mut included: Vec<ColumnId> = Vec::new();
    let mut model = fit(ds, &included, &cfg.fit)?;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut seen: HashSet<Vec<ColumnId>> = HashSet::new();
    seen.insert(Vec::new());

    let mut cycled = false;
    while steps.len() < cfg.max_steps && !cycled {
        let mut acted = false;

        // entry: best single-column addition by Wald p of the new coefficient
        if ds.n_rows > included.len() + 2 {
            let excluded: Vec<ColumnId> = candidates
                .iter()
                .copied()
                .filter(|c| !included.contains(c))
                .collect();
            let evaluated: Vec<Option<(f64, ColumnId)>> = excluded
                .par_iter()
                .map(|&c| {
                    let mut cols = included.clone();
                    cols.push(c);
                    match fit(ds, &cols, &cfg.fit) {
                        Ok(m) => Some((*m.wald_p.last().unwrap(), c)),
                        Err(_) => None,
                    }
                })
                .collect();
            let best = evaluated
                .into_iter()
                .flatten()
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            if let Some((p, column)) = best {
                if p < cfg.sle {
                    included.push(column);
                    model = fit(ds, &included, &cfg.fit)?;
                    steps.push(StepRecord {
                        action: StepAction::Enter,
                        column: ds.column(column)?.name.clone(),
                        p_value: p,
                    });
                    acted = true;
                    let mut state = included.clone();
                    state.sort_unstable();
                    if !seen.insert(state) {
                        cycled = true;
                    }
                }
            }
        }

        // removal: worst included column by Wald p
        if !cycled && !included.is_empty() && steps.len() < cfg.max_steps {
            let worst = included
                .iter()
                .enumerate()
                .map(|(idx, &c)| (model.wald_p[idx], std::cmp::Reverse(c), idx))
                .max_by(|a, b| a.partial_cmp(b).unwrap())
                .map(|(p, _, idx)| (p, idx));
            if let Some((p, idx)) = worst {
                if p > cfg.sls {
                    let column = included.remove(idx);
                    model = fit(ds, &included, &cfg.fit)?;
                    steps.push(StepRecord {
                        action: StepAction::Remove,
                        column: ds.column(column)?.name.clone(),
                        p_value: p,
                    });
                    acted = true;
                    let mut state = included.clone();
                    state.sort_unstable();
                    if !seen.insert(state) {
                        cycled = true;
                    }
                }
            }
        }

        if !acted {
            break;
        }
    }

    let trace = SelectionTrace {
        steps,
        final_columns: model.columns.clone(),
        candidate_pool: candidates.len(),
    };
    Ok((trace, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub column: String,
    pub r2_aux: f64,
    /// 1 / (1 - r2_aux); `f64::INFINITY` for exact linear dependence.
    pub vif: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
    pub threshold: f64,
}

impl VifReport {
    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

/// Variance inflation factors: each included column is regressed (with
/// intercept) on all the others by least squares, and VIF = 1/(1 - R^2).
pub fn vif(ds: &Dataset, included: &[ColumnId], threshold: f64) -> Result<VifReport> {
    if included.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "VIF needs at least 2 columns, got {}",
            included.len()
        )));
    }
    let n = ds.n_rows;
    let dense: Vec<Vec<f64>> = included
        .iter()
        .map(|&id| ds.column(id)?.dense())
        .collect::<Result<_>>()?;
    let names: Vec<String> = included
        .iter()
        .map(|&id| Ok(ds.column(id)?.name.clone()))
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(included.len());
    for j in 0..included.len() {
        let target = &dense[j];
        let mean = target.iter().sum::<f64>() / n as f64;
        let sst: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();

        let k = included.len() - 1;
        let mut x = DMatrix::zeros(n, k + 1);
        for r in 0..n {
            x[(r, 0)] = 1.0;
        }
        let mut c = 1;
        for (other, values) in dense.iter().enumerate() {
            if other == j {
                continue;
            }
            for r in 0..n {
                x[(r, c)] = values[r];
            }
            c += 1;
        }
        let yv = DVector::from_column_slice(target);
        let svd = x.clone().svd(true, true);
        let coef = svd
            .solve(&yv, 1e-12)
            .map_err(|e| Error::InvalidInput(format!("VIF least squares failed: {e}")))?;
        let fitted = &x * &coef;
        let sse: f64 = (0..n).map(|r| (target[r] - fitted[r]).powi(2)).sum();

        let (r2_aux, vif_value) = if sst <= 0.0 {
            (1.0, f64::INFINITY)
        } else {
            let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
            if 1.0 - r2 <= 1e-12 {
                (r2, f64::INFINITY)
            } else {
                (r2, 1.0 / (1.0 - r2))
            }
        };
        entries.push(VifEntry {
            column: names[j].clone(),
            r2_aux,
            vif: vif_value,
            flagged: !vif_value.is_finite() || vif_value >= threshold,
        });
    }
    Ok(VifReport { entries, threshold })
}

/// Shrinks a model to `k` variables by repeatedly dropping the included
/// variable with the smallest Wald chi-square and refitting.
pub fn reduce_to_k(
    ds: &Dataset,
    model: &LogisticModel,
    k: usize,
    cfg: &FitConfig,
) -> Result<LogisticModel> {
    if k > model.columns.len() {
        return Err(Error::InvalidInput(format!(
            "cannot keep {k} variables, model has only {}",
            model.columns.len()
        )));
    }
    if k == model.columns.len() {
        return Ok(model.clone());
    }
    let mut cols: Vec<ColumnId> = model
        .columns
        .iter()
        .map(|name| Ok(ds.column_by_name(name)?.id))
        .collect::<Result<_>>()?;
    let mut current = model.clone();
    while cols.len() > k {
        let weakest = current
            .wald_chi2
            .iter()
            .enumerate()
            .map(|(idx, &w)| (w, cols[idx], idx))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .map(|(_, _, idx)| idx)
            .expect("non-empty model");
        cols.remove(weakest);
        current = fit(ds, &cols, cfg)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset_from(preds: Vec<(&str, Vec<f64>)>, target: Vec<u8>) -> Dataset {
        let mut cols: Vec<Column> = preds
            .into_iter()
            .map(|(name, vals)| Column::new(name, vals.into_iter().map(Some).collect()))
            .collect();
        cols.push(Column::new(
            "y",
            target.into_iter().map(|v| Some(v as f64)).collect(),
        ));
        Dataset::from_columns("t", cols, "y").unwrap()
    }

    fn bernoulli_dataset(
        n: usize,
        seed: u64,
        coefs: &[f64],
        intercept: f64,
    ) -> (Dataset, Vec<ColumnId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = coefs.len();
        let xs: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..n)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let target: Vec<u8> = (0..n)
            .map(|r| {
                let lin: f64 =
                    intercept + coefs.iter().zip(&xs).map(|(c, x)| c * x[r]).sum::<f64>();
                (rng.random::<f64>() < sigmoid(lin)) as u8
            })
            .collect();
        let preds: Vec<(String, Vec<f64>)> = xs
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("x{i}"), v))
            .collect();
        let preds_ref = preds.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        let ds = dataset_from(preds_ref, target);
        let ids = (0..p).map(ColumnId).collect();
        (ds, ids)
    }

    #[test]
    fn intercept_only_balanced_target_gives_zero() {
        let target: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let ds = dataset_from(vec![("x", (0..40).map(|v| v as f64).collect())], target);
        let model = fit(&ds, &[], &FitConfig::default()).unwrap();
        assert!(model.converged);
        assert!(model.intercept.abs() < 1e-8);
    }

    #[test]
    fn intercept_only_recovers_logit_of_mean() {
        let mut target = vec![1u8; 32];
        target.extend(vec![0u8; 8]); // mean 0.8
        let ds = dataset_from(vec![("x", (0..40).map(|v| v as f64).collect())], target);
        let model = fit(&ds, &[], &FitConfig::default()).unwrap();
        assert_relative_eq!(model.intercept, 4.0_f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn gradient_vanishes_at_the_optimum() {
        let (ds, ids) = bernoulli_dataset(400, 3, &[1.0, -0.5], 0.3);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        assert!(model.converged);
        let (_, grad) =
            log_likelihood_and_gradient(&ds, &ids, model.intercept, &model.coefficients).unwrap();
        let max_g = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(max_g < 1e-6, "max |gradient| = {max_g}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (ds, ids) = bernoulli_dataset(300, 5, &[0.8], -0.2);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        let h = 1e-5;
        let beta = [model.intercept, model.coefficients[0]];
        let (_, grad) = log_likelihood_and_gradient(&ds, &ids, beta[0], &beta[1..]).unwrap();
        for slot in 0..2 {
            let mut plus = beta;
            plus[slot] += h;
            let mut minus = beta;
            minus[slot] -= h;
            let (ll_p, _) = log_likelihood_and_gradient(&ds, &ids, plus[0], &plus[1..]).unwrap();
            let (ll_m, _) = log_likelihood_and_gradient(&ds, &ids, minus[0], &minus[1..]).unwrap();
            let fd = (ll_p - ll_m) / (2.0 * h);
            let scale = grad[slot].abs().max(fd.abs()).max(1.0);
            assert!(
                (fd - grad[slot]).abs() / scale < 1e-4,
                "slot {slot}: fd {fd} vs analytic {}",
                grad[slot]
            );
        }
    }

    #[test]
    fn log_likelihood_history_is_non_decreasing() {
        let (ds, ids) = bernoulli_dataset(500, 8, &[2.0, -1.0, 0.5], 1.0);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        for w in model.ll_history.windows(2) {
            assert!(w[1] >= w[0], "log-likelihood decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn affine_rescaling_leaves_probabilities_unchanged() {
        let (ds, ids) = bernoulli_dataset(400, 13, &[1.2], 0.4);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        let probs = predict_proba(&model, &ds).unwrap();

        // x -> a*x + b
        let (a, b) = (2.5, -7.0);
        let orig = ds.column(ids[0]).unwrap().dense().unwrap();
        let scaled: Vec<f64> = orig.iter().map(|v| a * v + b).collect();
        let y: Vec<u8> = ds.target_as_binary().unwrap();
        let ds2 = dataset_from(vec![("x0", scaled)], y);
        let model2 = fit(&ds2, &[ColumnId(0)], &FitConfig::default()).unwrap();
        let probs2 = predict_proba(&model2, &ds2).unwrap();

        assert_relative_eq!(
            model2.coefficients[0],
            model.coefficients[0] / a,
            max_relative = 1e-6
        );
        for (p1, p2) in probs.iter().zip(&probs2) {
            assert!((p1 - p2).abs() < 1e-8);
        }
    }

    #[test]
    fn separation_is_flagged_not_fatal() {
        // perfectly separable data
        let x: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let target: Vec<u8> = (0..60).map(|i| (i >= 30) as u8).collect();
        let ds = dataset_from(vec![("x", x)], target);
        let model = fit(&ds, &[ColumnId(0)], &FitConfig::default()).unwrap();
        assert!(model.separation);
        assert!(!model.converged);
    }

    #[test]
    fn duplicated_column_is_reported_as_singular() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let target: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
        let ds = dataset_from(vec![("a", x.clone()), ("a_copy", x)], target);
        let err = fit(&ds, &[ColumnId(0), ColumnId(1)], &FitConfig::default()).unwrap_err();
        match err {
            Error::SingularDesign { columns, .. } => {
                assert!(columns.contains(&"a".to_string()));
                assert!(columns.contains(&"a_copy".to_string()));
            }
            other => panic!("expected SingularDesign, got {other:?}"),
        }
    }

    #[test]
    fn predict_proba_is_half_for_zero_coefficients() {
        let model = LogisticModel {
            columns: vec!["x".into()],
            intercept: 0.0,
            coefficients: vec![0.0],
            intercept_se: 0.0,
            std_errors: vec![0.0],
            wald_chi2: vec![0.0],
            wald_p: vec![1.0],
            log_likelihood: 0.0,
            iterations: 0,
            converged: true,
            separation: false,
            ll_history: vec![],
        };
        let ds = dataset_from(
            vec![("x", vec![-3.0, 0.0, 42.0])],
            vec![0, 1, 0],
        );
        let probs = predict_proba(&model, &ds).unwrap();
        for p in probs {
            assert_relative_eq!(p, 0.5);
        }
    }

    #[test]
    fn predict_proba_monotone_in_positive_coefficient() {
        let (ds, ids) = bernoulli_dataset(300, 21, &[1.5], 0.0);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        assert!(model.coefficients[0] > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = a + rng.random_range(0.01..2.0);
            let ds_pair = dataset_from(vec![("x0", vec![a, b])], vec![0, 1]);
            let probs = predict_proba(&model, &ds_pair).unwrap();
            assert!(probs[1] > probs[0]);
        }
    }

    #[test]
    fn predict_proba_requires_model_columns() {
        let model = LogisticModel {
            columns: vec!["missing_col".into()],
            intercept: 0.0,
            coefficients: vec![1.0],
            intercept_se: 0.0,
            std_errors: vec![0.0],
            wald_chi2: vec![0.0],
            wald_p: vec![1.0],
            log_likelihood: 0.0,
            iterations: 0,
            converged: true,
            separation: false,
            ll_history: vec![],
        };
        let ds = dataset_from(vec![("x", vec![1.0])], vec![1]);
        assert!(matches!(
            predict_proba(&model, &ds).unwrap_err(),
            Error::ColumnNotFound(_)
        ));
    }

    #[test]
    fn stepwise_enters_the_true_generator_and_keeps_it() {
        let (ds, ids) = bernoulli_dataset(1000, 31, &[2.0], 0.0);
        let cfg = StepwiseConfig::default();
        let (trace, model) = stepwise(&ds, &ids, &cfg).unwrap();
        assert_eq!(model.columns, vec!["x0".to_string()]);
        assert_eq!(trace.steps.len(), 1);
        assert!(matches!(trace.steps[0].action, StepAction::Enter));

        // oracle: the full-fit Wald p is far below the entry level
        let full = fit(&ds, &ids, &FitConfig::default()).unwrap();
        assert!(full.wald_p[0] < 1e-10);
    }

    #[test]
    fn stepwise_rejects_noise_at_tiny_entry_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 400;
        let preds: Vec<(String, Vec<f64>)> = (0..5)
            .map(|i| {
                (
                    format!("x{i}"),
                    (0..n)
                        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect(),
                )
            })
            .collect();
        let target: Vec<u8> = (0..n).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
        let preds_ref = preds.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        let ds = dataset_from(preds_ref, target);
        let ids: Vec<ColumnId> = (0..5).map(ColumnId).collect();
        let cfg = StepwiseConfig {
            sle: 1e-6,
            sls: 1e-6,
            ..StepwiseConfig::default()
        };
        let (trace, model) = stepwise(&ds, &ids, &cfg).unwrap();
        assert!(model.columns.is_empty(), "selected {:?}", model.columns);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn stepwise_is_deterministic_and_trace_replays() {
        let (ds, ids) = bernoulli_dataset(600, 41, &[1.5, 0.0, -1.0, 0.0], 0.5);
        let cfg = StepwiseConfig::default();
        let (trace1, model1) = stepwise(&ds, &ids, &cfg).unwrap();
        let (trace2, model2) = stepwise(&ds, &ids, &cfg).unwrap();
        assert_eq!(trace1, trace2);
        assert_eq!(model1, model2);

        // replay the trace
        let mut replayed: Vec<String> = Vec::new();
        for step in &trace1.steps {
            match step.action {
                StepAction::Enter => replayed.push(step.column.clone()),
                StepAction::Remove => {
                    let idx = replayed.iter().position(|c| c == &step.column).unwrap();
                    replayed.remove(idx);
                }
            }
        }
        assert_eq!(replayed, trace1.final_columns);
    }

    #[test]
    fn stepwise_rejects_empty_candidates() {
        let (ds, _) = bernoulli_dataset(100, 1, &[1.0], 0.0);
        assert!(stepwise(&ds, &[], &StepwiseConfig::default()).is_err());
    }

    #[test]
    fn vif_is_one_for_orthogonal_columns() {
        // orthogonal contrast columns with zero correlation
        let n = 32;
        let a: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let b: Vec<f64> = (0..n).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let target: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let ds = dataset_from(vec![("a", a), ("b", b)], target);
        let report = vif(&ds, &[ColumnId(0), ColumnId(1)], 10.0).unwrap();
        for entry in &report.entries {
            assert!((entry.vif - 1.0).abs() < 1e-8, "{entry:?}");
            assert!(!entry.flagged);
        }
    }

    #[test]
    fn vif_flags_duplicate_column_as_infinite() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let target: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let ds = dataset_from(vec![("a", x.clone()), ("b", x)], target);
        let report = vif(&ds, &[ColumnId(0), ColumnId(1)], 10.0).unwrap();
        for entry in &report.entries {
            assert!(entry.vif.is_infinite());
            assert!(entry.flagged);
        }
    }

    #[test]
    fn vif_flags_constructed_collinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 200;
        let x1: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let x2: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let x3: Vec<f64> = (0..n)
            .map(|r| x1[r] + x2[r] + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let target: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = dataset_from(vec![("x1", x1.clone()), ("x2", x2.clone()), ("x3", x3.clone())], target);
        let report = vif(&ds, &[ColumnId(0), ColumnId(1), ColumnId(2)], 10.0).unwrap();
        let x3_entry = report.entries.iter().find(|e| e.column == "x3").unwrap();
        assert!(x3_entry.vif > 10.0, "VIF(x3) = {}", x3_entry.vif);
        assert!(x3_entry.flagged);

        // direct least-squares oracle for R^2 of x3 on (x1, x2)
        let mean3 = x3.iter().sum::<f64>() / n as f64;
        let sst: f64 = x3.iter().map(|v| (v - mean3).powi(2)).sum();
        let mut x = DMatrix::zeros(n, 3);
        for r in 0..n {
            x[(r, 0)] = 1.0;
            x[(r, 1)] = x1[r];
            x[(r, 2)] = x2[r];
        }
        let yv = DVector::from_column_slice(&x3);
        let coef = x.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
        let fitted = &x * &coef;
        let sse: f64 = (0..n).map(|r| (x3[r] - fitted[r]).powi(2)).sum();
        let oracle_vif = 1.0 / (sse / sst);
        assert_relative_eq!(x3_entry.vif, oracle_vif, max_relative = 1e-8);
    }

    #[test]
    fn vif_requires_two_columns() {
        let (ds, ids) = bernoulli_dataset(50, 2, &[1.0], 0.0);
        assert!(vif(&ds, &ids, 10.0).is_err());
    }

    #[test]
    fn reduce_to_k_is_identity_at_current_size() {
        let (ds, ids) = bernoulli_dataset(400, 19, &[1.0, -1.0], 0.0);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        let same = reduce_to_k(&ds, &model, 2, &FitConfig::default()).unwrap();
        assert_eq!(same, model);
    }

    #[test]
    fn reduce_to_zero_gives_intercept_only() {
        let (ds, ids) = bernoulli_dataset(400, 23, &[1.0], 0.0);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        let reduced = reduce_to_k(&ds, &model, 0, &FitConfig::default()).unwrap();
        assert!(reduced.columns.is_empty());
    }

    #[test]
    fn reduce_drops_weakest_wald_first() {
        // x0 strong, x1 noise: reducing to 1 keeps x0
        let (ds, ids) = bernoulli_dataset(800, 29, &[2.0, 0.0], 0.0);
        let model = fit(&ds, &ids, &FitConfig::default()).unwrap();
        let reduced = reduce_to_k(&ds, &model, 1, &FitConfig::default()).unwrap();
        assert_eq!(reduced.columns, vec!["x0".to_string()]);
    }
}
