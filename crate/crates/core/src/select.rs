//! Criterion minimization over model collections: family-specialized
//! selectors plus a generic exhaustive selector used as the correctness
//! oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::collection::{weight_changepoint, weight_nonzero, weight_partition, weight_varsel, ModelKey, WeightTable};
use crate::error::{Error, Result};
use crate::estimate::{criterion_from_parts, dot, norm_sq, project, push_orthonormal, Criterion, Design, DesignMatrix, DesignPoints, FitRecord};
use crate::penalty::PenaltyRule;
#[allow(unused_imports)]
use num_traits::Float;

/// One row of the per-dimension diagnostic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub dim: usize,
    pub best_rss: f64,
    pub penalty: f64,
    /// Criterion of the best model at this dimension; `-inf` marks a
    /// saturated fit under a log criterion.
    pub criterion: f64,
}

/// Result of a selection run.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub m_hat: ModelKey,
    pub fit: FitRecord,
    pub criterion_value: f64,
    pub trace: Vec<TraceRow>,
    /// True when the winner saturated the data (rss below the floor of a
    /// log criterion) and won only because every model saturated.
    pub saturated: bool,
}

#[derive(Debug, Clone)]
struct Candidate {
    crit: f64,
    eff_rank: usize,
    key: ModelKey,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.crit != other.crit {
            return self.crit < other.crit;
        }
        (self.eff_rank, &self.key) < (other.eff_rank, &other.key)
    }
}

/// Exact argmin accumulator with the deterministic tie-break: smaller
/// criterion, then smaller dimension, then lexicographically smaller key.
/// Saturated models are kept apart and win only when nothing else exists.
#[derive(Debug, Default)]
struct Argmin {
    best: Option<Candidate>,
    saturated: Option<Candidate>,
    trace: BTreeMap<usize, TraceRow>,
}

impl Argmin {
    fn offer(
        &mut self,
        key: ModelKey,
        nominal_dim: usize,
        eff_rank: usize,
        rss: f64,
        pen: f64,
        crit: Result<f64>,
    ) -> Result<()> {
        let crit_for_trace = match &crit {
            Ok(c) => *c,
            Err(Error::SaturatedFit) => f64::NEG_INFINITY,
            Err(e) => return Err(e.clone()),
        };
        let row = self.trace.entry(nominal_dim).or_insert(TraceRow {
            dim: nominal_dim,
            best_rss: rss,
            penalty: pen,
            criterion: crit_for_trace,
        });
        if rss < row.best_rss {
            row.best_rss = rss;
        }
        if crit_for_trace < row.criterion {
            row.criterion = crit_for_trace;
            row.penalty = pen;
        }
        match crit {
            Ok(c) => {
                if c.is_nan() {
                    return Err(Error::Domain(format!(
                        "criterion evaluated to NaN for model {key:?}"
                    )));
                }
                let cand = Candidate {
                    crit: c,
                    eff_rank,
                    key,
                };
                if self.best.as_ref().map_or(true, |b| cand.beats(b)) {
                    self.best = Some(cand);
                }
            }
            Err(Error::SaturatedFit) => {
                let cand = Candidate {
                    crit: f64::NEG_INFINITY,
                    eff_rank,
                    key,
                };
                if self.saturated.as_ref().map_or(true, |b| cand.beats(b)) {
                    self.saturated = Some(cand);
                }
            }
            Err(_) => unreachable!(),
        }
        Ok(())
    }

    fn finalize<F>(self, refit: F) -> Result<SelectionOutcome>
    where
        F: FnOnce(&ModelKey) -> Result<FitRecord>,
    {
        let (winner, saturated) = match (self.best, self.saturated) {
            (Some(b), _) => (b, false),
            (None, Some(s)) => (s, true),
            (None, None) => return Err(Error::EmptyModelList),
        };
        let fit = refit(&winner.key)?;
        Ok(SelectionOutcome {
            m_hat: winner.key,
            fit,
            criterion_value: winner.crit,
            trace: self.trace.into_values().collect(),
            saturated,
        })
    }
}

/// Per-(rank, weight-dimension) penalty cache; EDkhi inversion dominates
/// large searches and collections reuse dimensions heavily.
struct PenCache<'a> {
    rule: &'a PenaltyRule,
    weights: &'a WeightTable,
    memo: BTreeMap<(usize, usize), f64>,
}

impl<'a> PenCache<'a> {
    fn new(rule: &'a PenaltyRule, weights: &'a WeightTable) -> Self {
        Self {
            rule,
            weights,
            memo: BTreeMap::new(),
        }
    }

    fn pen(&mut self, eff_rank: usize, nominal_dim: usize) -> Result<f64> {
        if let Some(&v) = self.memo.get(&(eff_rank, nominal_dim)) {
            return Ok(v);
        }
        let l = self.weights.get(nominal_dim)?;
        let v = self.rule.pen(eff_rank, l)?;
        self.memo.insert((eff_rank, nominal_dim), v);
        Ok(v)
    }
}

fn check_rule_n(rule: &PenaltyRule, n: usize) -> Result<()> {
    if rule.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rule.n,
        });
    }
    Ok(())
}

/// Exact argmin over an explicit model list; evaluates every listed model
/// exactly once. This is the oracle the specialized selectors are checked
/// against.
pub fn select_generic(
    y: &[f64],
    models: &[ModelKey],
    rule: &PenaltyRule,
    weights: &WeightTable,
    criterion: Criterion,
    design: &Design,
) -> Result<SelectionOutcome> {
    if models.is_empty() {
        return Err(Error::EmptyModelList);
    }
    let n = y.len();
    check_rule_n(rule, n)?;
    let mut cache = PenCache::new(rule, weights);
    let mut acc = Argmin::default();
    for key in models {
        let fit = project(y, key, design)?;
        let pen = cache.pen(fit.effective_rank, key.nominal_dim())?;
        let crit = criterion_from_parts(criterion, fit.rss, fit.effective_rank, pen, n);
        acc.offer(key.clone(), key.nominal_dim(), fit.effective_rank, fit.rss, pen, crit)?;
    }
    acc.finalize(|key| project(y, key, design))
}

/// Selection over coordinate subsets by ordering the squared observations:
/// the best size-`D` subset keeps the `D` largest `Y_i^2`, so one pass of
/// suffix sums covers every dimension.
pub fn select_nonzero(y: &[f64], p: usize, rule: &PenaltyRule) -> Result<SelectionOutcome> {
    let n = y.len();
    check_rule_n(rule, n)?;
    if n < 3 || p > n - 2 {
        return Err(Error::Domain(format!(
            "nonzero-component selection requires p <= n - 2, got p = {p}, n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // decreasing |Y| with ties toward the lower index
    order.sort_by(|&i, &j| (y[j] * y[j]).total_cmp(&(y[i] * y[i])).then(i.cmp(&j)));
    let total: f64 = y.iter().map(|v| v * v).sum();
    let criterion = rule.criterion();
    let mut acc = Argmin::default();
    let mut kept = 0.0;
    let mut rss = total;
    for d in 0..=p {
        if d > 0 {
            let i = order[d - 1];
            kept += y[i] * y[i];
            rss = (total - kept).max(0.0);
        }
        let l = weight_nonzero(d, n)?;
        let pen = rule.pen(d, l)?;
        let crit = criterion_from_parts(criterion, rss, d, pen, n);
        let mut idx: Vec<usize> = order[..d].to_vec();
        idx.sort_unstable();
        acc.offer(ModelKey::CoordSubset(idx), d, d, rss, pen, crit)?;
    }
    acc.finalize(|key| project(y, key, &Design::none()))
}

/// Selection over the nested prefixes of the design columns, with the
/// residual of every prefix obtained by one sequential orthogonalization
/// pass.
pub fn select_ordered(
    y: &[f64],
    x: &DesignMatrix,
    p: usize,
    rule: &PenaltyRule,
) -> Result<SelectionOutcome> {
    let n = y.len();
    check_rule_n(rule, n)?;
    if x.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.n_rows(),
        });
    }
    if n < 3 || p > x.n_cols() || p > n - 2 {
        return Err(Error::Domain(format!(
            "ordered selection requires p <= min(N, n - 2), got p = {p}, N = {}, n = {n}",
            x.n_cols()
        )));
    }
    let criterion = rule.criterion();
    let design = Design::with_matrix(x);
    let mut acc = Argmin::default();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut resid = y.to_vec();
    for d in 0..=p {
        if d > 0 {
            if push_orthonormal(&mut basis, x.column(d - 1)?) {
                let q = basis.last().unwrap();
                let c = dot(q, &resid);
                for (r, qi) in resid.iter_mut().zip(q) {
                    *r -= c * qi;
                }
            }
        }
        let rss = norm_sq(&resid);
        let l = weight_varsel(d, true, 1.0, x.n_cols(), p)?;
        let pen = rule.pen(basis.len(), l)?;
        let crit = criterion_from_parts(criterion, rss, basis.len(), pen, n);
        acc.offer(
            ModelKey::ColumnSubset((0..d).collect()),
            d,
            basis.len(),
            rss,
            pen,
            crit,
        )?;
    }
    acc.finalize(|key| project(y, key, &design))
}

struct CompleteSearch<'a> {
    x: &'a DesignMatrix,
    p: usize,
    n: usize,
    criterion: Criterion,
    cache: PenCache<'a>,
    acc: Argmin,
    current: Vec<usize>,
    basis: Vec<Vec<f64>>,
}

impl<'a> CompleteSearch<'a> {
    fn visit(&mut self, resid: &[f64], rss: f64) -> Result<()> {
        let eff = self.basis.len();
        let nominal = self.current.len();
        let pen = self.cache.pen(eff, nominal)?;
        let crit = criterion_from_parts(self.criterion, rss, eff, pen, self.n);
        self.acc.offer(
            ModelKey::ColumnSubset(self.current.clone()),
            nominal,
            eff,
            rss,
            pen,
            crit,
        )?;
        if nominal == self.p {
            return Ok(());
        }
        let start = self.current.last().map_or(0, |&j| j + 1);
        for j in start..self.x.n_cols() {
            self.current.push(j);
            if push_orthonormal(&mut self.basis, self.x.column(j)?) {
                let q = self.basis.last().unwrap();
                let c = dot(q, resid);
                let next: Vec<f64> = resid.iter().zip(q).map(|(r, qi)| r - c * qi).collect();
                let next_rss = norm_sq(&next);
                self.visit(&next, next_rss)?;
                self.basis.pop();
            } else {
                self.visit(resid, rss)?;
            }
            self.current.pop();
        }
        Ok(())
    }
}

/// Exhaustive best-subset selection with incremental orthogonal
/// factorization updates along the subset tree. Refuses up front when the
/// subset count exceeds `budget`.
pub fn select_complete(
    y: &[f64],
    x: &DesignMatrix,
    p: usize,
    rule: &PenaltyRule,
    weights: &WeightTable,
    budget: u64,
) -> Result<SelectionOutcome> {
    let n = y.len();
    check_rule_n(rule, n)?;
    if x.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.n_rows(),
        });
    }
    if n < 3 || p > x.n_cols() || p > n - 2 {
        return Err(Error::Domain(format!(
            "complete selection requires p <= min(N, n - 2), got p = {p}, N = {}, n = {n}",
            x.n_cols()
        )));
    }
    let count = subset_count(x.n_cols(), p);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded {
            models: count,
            budget,
        });
    }
    let mut search = CompleteSearch {
        x,
        p,
        n,
        criterion: rule.criterion(),
        cache: PenCache::new(rule, weights),
        acc: Argmin::default(),
        current: Vec::with_capacity(p),
        basis: Vec::with_capacity(p),
    };
    let rss = norm_sq(y);
    search.visit(&y.to_vec(), rss)?;
    search.acc.finalize(|key| project(y, key, &Design::with_matrix(x)))
}

fn subset_count(n_cols: usize, p: usize) -> u128 {
    let mut total: u128 = 0;
    for k in 0..=p.min(n_cols) {
        let mut c: u128 = 1;
        for i in 1..=k {
            match c.checked_mul((n_cols - k + i) as u128) {
                Some(v) => c = v / i as u128,
                None => return u128::MAX,
            }
        }
        total = total.saturating_add(c);
    }
    total
}

/// Exact change-point selection by dynamic programming over segmentations.
///
/// The family's weights depend only on the number of change points, so the
/// per-cardinality minimum residual is sufficient and the segmentation
/// recursion is exact at cost `O(p n^2)`.
pub fn select_changepoints(y: &[f64], p: usize, rule: &PenaltyRule) -> Result<SelectionOutcome> {
    let n = y.len();
    check_rule_n(rule, n)?;
    if n < 4 || p > n - 3 {
        return Err(Error::Domain(format!(
            "change-point selection requires p <= n - 3, got p = {p}, n = {n}"
        )));
    }
    let mut s1 = alloc::vec![0.0; n + 1];
    let mut s2 = alloc::vec![0.0; n + 1];
    for (i, &v) in y.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let cost = |i: usize, j: usize| -> f64 {
        let s = s1[j] - s1[i];
        ((s2[j] - s2[i]) - s * s / (j - i) as f64).max(0.0)
    };

    // best[q][j]: min rss of splitting y[0..j] into q+1 segments
    let mut best = alloc::vec![alloc::vec![f64::INFINITY; n + 1]; p + 1];
    let mut back = alloc::vec![alloc::vec![0usize; n + 1]; p + 1];
    for j in 1..=n {
        best[0][j] = cost(0, j);
    }
    for q in 1..=p {
        for j in (q + 1)..=n {
            let mut arg = q;
            let mut val = f64::INFINITY;
            for i in q..j {
                let v = best[q - 1][i] + cost(i, j);
                if v < val {
                    val = v;
                    arg = i;
                }
            }
            best[q][j] = val;
            back[q][j] = arg;
        }
    }

    let criterion = rule.criterion();
    let mut acc = Argmin::default();
    for q in 0..=p {
        let rss = best[q][n];
        let dim = q + 1;
        let l = weight_changepoint(q, n)?;
        let pen = rule.pen(dim, l)?;
        let crit = criterion_from_parts(criterion, rss, dim, pen, n);
        // reconstruct the change-point set for this cardinality
        let mut pts = Vec::with_capacity(q);
        let mut j = n;
        for qq in (1..=q).rev() {
            let i = back[qq][j];
            pts.push(i);
            j = i;
        }
        pts.reverse();
        acc.offer(ModelKey::ChangePoints(pts), dim, dim, rss, pen, crit)?;
    }
    acc.finalize(|key| project(y, key, &Design::none()))
}

/// Exhaustive selection over partition models `(degree, cell counts)`.
pub fn select_partition(
    y: &[f64],
    points: &DesignPoints,
    d: usize,
    rule: &PenaltyRule,
    max_degree: usize,
) -> Result<SelectionOutcome> {
    let n = y.len();
    check_rule_n(rule, n)?;
    if points.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: points.n(),
        });
    }
    if points.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: points.d(),
        });
    }
    let design = Design::with_points(points);
    let tuples = crate::collection::partition_tuples(n, d, max_degree);
    if tuples.is_empty() {
        return Err(Error::EmptyModelList);
    }
    let criterion = rule.criterion();
    let mut acc = Argmin::default();
    for key in &tuples {
        let fit = project(y, key, &design)?;
        let (degree, cells) = match key {
            ModelKey::Partition { degree, cells } => (*degree, cells.as_slice()),
            _ => unreachable!(),
        };
        let l = weight_partition(degree, cells, n)?;
        let pen = rule.pen(fit.effective_rank, l)?;
        let crit = criterion_from_parts(criterion, fit.rss, fit.effective_rank, pen, n);
        acc.offer(key.clone(), key.nominal_dim(), fit.effective_rank, fit.rss, pen, crit)?;
    }
    acc.finalize(|key| project(y, key, &design))
}
