//! Two-way fixed-effects least squares on a long table.
//!
//! Unit effects are absorbed by the within transformation; time effects
//! enter as explicit period indicators (the first period is the reference)
//! that are demeaned together with everything else. By Frisch-Waugh-Lovell
//! the slopes equal those of the full dummy-variable regression, for
//! balanced and unbalanced panels alike.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::least_squares;
use super::{CovType, RegressionFit};
use crate::error::{Error, Result};

/// Name reserved for the constructed lag of the dependent variable.
pub const LAG_NAME: &str = "lag_dependent";

/// Long table: one row per (unit, time) with named numeric columns, any of
/// which may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelTable {
    pub unit: Vec<String>,
    pub time: Vec<i32>,
    pub numeric: BTreeMap<String, Vec<Option<f64>>>,
    /// Extra string columns, e.g. alternative cluster identifiers.
    pub labels: BTreeMap<String, Vec<String>>,
}

impl PanelTable {
    pub fn len(&self) -> usize {
        self.unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    pub fn push_row(&mut self, unit: impl Into<String>, time: i32, values: &[(&str, Option<f64>)]) {
        let row = self.unit.len();
        self.unit.push(unit.into());
        self.time.push(time);
        for (name, v) in values {
            let col = self
                .numeric
                .entry((*name).to_string())
                .or_insert_with(|| vec![None; row]);
            col.push(*v);
        }
        for col in self.numeric.values_mut() {
            if col.len() == row {
                col.push(None);
            }
        }
    }

    fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::domain(format!("panel table has no column `{name}`")))
    }

    fn cluster_ids(&self, by: &str) -> Result<&[String]> {
        if by == "unit" {
            return Ok(&self.unit);
        }
        self.labels
            .get(by)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::domain(format!("panel table has no label column `{by}`")))
    }
}

/// Where the lagged dependent variable comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LagSource {
    /// The same unit's dependent value at the previous distinct time in the table.
    PreviousPeriod,
    /// A column already holding the lag.
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub dependent: String,
    pub lagged_dependent: bool,
    pub lag_source: LagSource,
    pub regressors: Vec<String>,
    pub unit_effects: bool,
    pub time_effects: bool,
    /// `None` for classical errors; `Some("unit")` or a label column to cluster.
    pub cluster_by: Option<String>,
}

impl PanelSpec {
    pub fn new(dependent: impl Into<String>, regressors: &[&str]) -> Self {
        PanelSpec {
            dependent: dependent.into(),
            lagged_dependent: false,
            lag_source: LagSource::PreviousPeriod,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            unit_effects: true,
            time_effects: true,
            cluster_by: Some("unit".into()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() && !self.lagged_dependent {
            return Err(Error::domain("panel specification has no regressors"));
        }
        if let Some(name) = self.regressors.iter().find(|r| r.as_str() == LAG_NAME) {
            return Err(Error::domain(format!("regressor name `{name}` is reserved")));
        }
        Ok(())
    }
}

/// Estimates a fixed-effects panel regression with listwise deletion.
///
/// Reported coefficients are, in order: the lagged dependent variable (when
/// requested), the regressors in `spec` order, then one `period=<t>`
/// coefficient per non-reference period. Absorbed unit effects are not
/// reported; without unit effects a `const` column leads the list.
pub fn panel_fe(data: &PanelTable, spec: &PanelSpec) -> Result<RegressionFit> {
    spec.validate()?;
    let n_all = data.len();
    if data.time.len() != n_all {
        return Err(Error::domain("unit and time columns differ in length"));
    }
    let y_all = data.column(&spec.dependent)?;

    let lag_all: Option<Vec<Option<f64>>> = if spec.lagged_dependent {
        Some(match &spec.lag_source {
            LagSource::Column(c) => data.column(c)?.to_vec(),
            LagSource::PreviousPeriod => previous_period_lag(data, y_all),
        })
    } else {
        None
    };
    let regs: Vec<&[Option<f64>]> = spec
        .regressors
        .iter()
        .map(|r| data.column(r))
        .collect::<Result<_>>()?;

    let keep: Vec<usize> = (0..n_all)
        .filter(|&i| {
            y_all[i].is_some()
                && lag_all.as_ref().is_none_or(|l| l[i].is_some())
                && regs.iter().all(|c| c[i].is_some())
        })
        .collect();
    let n = keep.len();
    let dropped_rows = n_all - n;

    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if let Some(l) = &lag_all {
        names.push(LAG_NAME.into());
        cols.push(keep.iter().map(|&i| l[i].unwrap()).collect());
    }
    for (name, c) in spec.regressors.iter().zip(&regs) {
        names.push(name.clone());
        cols.push(keep.iter().map(|&i| c[i].unwrap()).collect());
    }
    let n_named = cols.len();

    let periods: Vec<i32> = keep
        .iter()
        .map(|&i| data.time[i])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if spec.time_effects {
        for &t in periods.iter().skip(1) {
            names.push(format!("period={t}"));
            cols.push(keep.iter().map(|&i| f64::from(data.time[i] == t)).collect());
        }
    }
    if !spec.unit_effects {
        names.insert(0, "const".into());
        cols.insert(0, vec![1.0; n]);
    }
    let mut y: Vec<f64> = keep.iter().map(|&i| y_all[i].unwrap()).collect();

    // within transformation
    let unit_ids: Vec<usize> = index_labels(keep.iter().map(|&i| data.unit[i].as_str()));
    let n_units = unit_ids.iter().copied().max().map_or(0, |m| m + 1);
    if spec.unit_effects {
        demean(&mut y, &unit_ids, n_units);
        for c in cols.iter_mut() {
            demean(c, &unit_ids, n_units);
        }
    }

    // named regressors must keep within variation; period dummies that lose
    // it (a period observed only for singleton units) are dropped
    let offset = usize::from(!spec.unit_effects);
    let mut k = 0;
    let mut pruned_names = Vec::new();
    let mut pruned_cols = Vec::new();
    for (j, (name, c)) in names.into_iter().zip(cols).enumerate() {
        let scale = c.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let is_named = j >= offset && j < offset + n_named;
        if scale <= 1e-12 {
            if is_named {
                return Err(Error::DegenerateDesign(format!(
                    "regressor `{name}` has no variation after absorbing fixed effects"
                )));
            }
            if name.starts_with("period=") {
                continue;
            }
        }
        pruned_names.push(name);
        pruned_cols.push(c);
        k += 1;
    }
    let names = pruned_names;
    let absorbed = if spec.unit_effects { n_units } else { 0 };
    if n <= k + absorbed {
        return Err(Error::DegenerateDesign(format!(
            "{n} complete rows cannot identify {k} coefficients and {absorbed} unit effects"
        )));
    }

    let x = DMatrix::from_fn(n, k, |i, j| pruned_cols[j][i]);
    let yv = DVector::from_vec(y.clone());
    let ls = least_squares(&x, &yv, &names)?;
    let residuals: Vec<f64> = ls.residuals.iter().copied().collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let df_resid = n - k - absorbed;

    let (cov, cov_type, n_clusters) = match &spec.cluster_by {
        None => (ls.xtx_inv.clone() * (ssr / df_resid as f64), CovType::Classical, None),
        Some(by) => {
            let ids = data.cluster_ids(by)?;
            let cl = index_labels(keep.iter().map(|&i| ids[i].as_str()));
            let g = cl.iter().copied().max().map_or(0, |m| m + 1);
            if g < 2 {
                return Err(Error::DegenerateDesign(format!(
                    "clustered covariance needs at least 2 clusters, got {g}"
                )));
            }
            let v = cluster_covariance(&x, &residuals, &cl, g, &ls.xtx_inv);
            (v, CovType::Cluster { by: by.clone() }, Some(g))
        }
    };

    Ok(RegressionFit {
        std_errors: (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        covariance: cov.transpose().iter().copied().collect(),
        names,
        coefficients: ls.coef.iter().copied().collect(),
        r_squared,
        n_obs: n,
        residuals,
        cov_type,
        df_resid,
        n_clusters,
        dropped_rows,
    })
}

/// Sandwich `(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1` with the
/// `G/(G-1) * (N-1)/(N-K)` small-sample factor.
fn cluster_covariance(
    x: &DMatrix<f64>,
    u: &[f64],
    cluster: &[usize],
    g: usize,
    bread: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(cluster[i], j)] += x[(i, j)] * u[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let c = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64);
    let v = bread * meat * bread * c;
    // symmetrize against rounding
    (&v + v.transpose()) * 0.5
}

fn previous_period_lag(data: &PanelTable, y: &[Option<f64>]) -> Vec<Option<f64>> {
    let times: Vec<i32> = data.time.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let prev: HashMap<i32, i32> = times.windows(2).map(|w| (w[1], w[0])).collect();
    let lookup: HashMap<(&str, i32), Option<f64>> = data
        .unit
        .iter()
        .zip(&data.time)
        .zip(y)
        .map(|((u, &t), &v)| ((u.as_str(), t), v))
        .collect();
    data.unit
        .iter()
        .zip(&data.time)
        .map(|(u, t)| {
            prev.get(t)
                .and_then(|p| lookup.get(&(u.as_str(), *p)).copied().flatten())
        })
        .collect()
}

fn index_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<usize> {
    let mut map: HashMap<&str, usize> = HashMap::new();
    labels
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn demean(v: &mut [f64], group: &[usize], n_groups: usize) {
    let mut sum = vec![0.0; n_groups];
    let mut count = vec![0usize; n_groups];
    for (x, &g) in v.iter().zip(group) {
        sum[g] += x;
        count[g] += 1;
    }
    for (x, &g) in v.iter_mut().zip(group) {
        *x -= sum[g] / count[g] as f64;
    }
}
