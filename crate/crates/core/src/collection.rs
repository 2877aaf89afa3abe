//! Model collections: family definitions, per-model weights, complexity
//! indices, the weight-series sum, and deterministic model enumeration.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::{ln_binomial, ln_gamma};
#[allow(unused_imports)]
use num_traits::Float;

/// Identifies one model in a collection.
///
/// Index conventions: coordinate and column indices are 0-based; a change
/// point at position `i` (0-based, `1 <= i <= n-1`) starts a new segment at
/// observation `i`. Index vectors are kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKey {
    /// Subset of coordinates kept; the rest of the mean is forced to zero.
    CoordSubset(Vec<usize>),
    /// Subset of design-matrix columns spanning the model.
    ColumnSubset(Vec<usize>),
    /// Piecewise-constant model with the given segment starts.
    ChangePoints(Vec<usize>),
    /// Piecewise-polynomial model on a hyperrectangle grid: per-variable
    /// degree bound and per-axis cell counts.
    Partition { degree: usize, cells: Vec<usize> },
}

impl ModelKey {
    /// Dimension of the model's linear span, ignoring data-dependent rank
    /// deficiency (the fitted rank may be smaller for column subsets and
    /// partitions; see `FitRecord::effective_rank`).
    pub fn nominal_dim(&self) -> usize {
        match self {
            ModelKey::CoordSubset(idx) | ModelKey::ColumnSubset(idx) => idx.len(),
            ModelKey::ChangePoints(pts) => pts.len() + 1,
            ModelKey::Partition { degree, cells } => {
                let per_cell = (degree + 1).pow(cells.len() as u32);
                per_cell * cells.iter().product::<usize>()
            }
        }
    }

    pub(crate) fn check_sorted_unique(idx: &[usize]) -> Result<()> {
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "model indices must be sorted and unique, got {idx:?}"
            )));
        }
        Ok(())
    }
}

/// Cap `M e^{aD}` on the number of models per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityIndex {
    pub m: f64,
    pub a: f64,
}

/// The model families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// All coordinate subsets of `{1..n}` with at most `p` elements.
    NonzeroComponents { p: usize },
    /// Nested prefixes of the first `p` columns (plus the null model).
    OrderedVarsel { p: usize },
    /// All column subsets of `{1..n_cols}` with at most `p` elements.
    CompleteVarsel { n_cols: usize, p: usize },
    /// Piecewise-constant models with at most `p` change points.
    ChangePointsConst { p: usize },
    /// Piecewise-polynomial models on grids with `d` axes and per-variable
    /// degree at most `max_degree`.
    PartitionPoly { d: usize, max_degree: usize },
    /// Linear splines with dyadic knots: weights and the weight-series
    /// bound only, no enumeration or selection.
    DyadicSplines { p: usize },
}

/// How per-model weights are assigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    /// `L_m = a' D_m`.
    Uniform { a_prime: f64 },
    /// The family's own weighting (combinatorial for subset families, the
    /// span dimension for partitions, `1 * D` for ordered prefixes).
    Canonical,
}

/// A model family with its weighting, sample size and search budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionSpec {
    pub family: Family,
    pub weight_scheme: WeightScheme,
    pub n: usize,
    pub search_budget: u64,
}

impl CollectionSpec {
    pub fn new(
        family: Family,
        weight_scheme: WeightScheme,
        n: usize,
        search_budget: u64,
    ) -> Result<Self> {
        if search_budget == 0 {
            return Err(Error::Domain("search budget must be positive".into()));
        }
        let spec = Self {
            family,
            weight_scheme,
            n,
            search_budget,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        match &self.family {
            Family::NonzeroComponents { p } => {
                if n < 3 || *p > n - 2 {
                    return Err(Error::Domain(format!(
                        "nonzero-components family requires p <= n - 2, got p = {p}, n = {n}"
                    )));
                }
            }
            Family::OrderedVarsel { p } | Family::CompleteVarsel { p, .. } => {
                if n < 3 || *p > n - 2 {
                    return Err(Error::Domain(format!(
                        "variable-selection families require p <= n - 2, got p = {p}, n = {n}"
                    )));
                }
                if let Family::CompleteVarsel { n_cols, p } = &self.family {
                    if p > n_cols {
                        return Err(Error::Domain(format!(
                            "complete selection requires p <= number of columns, got p = {p}, N = {n_cols}"
                        )));
                    }
                }
            }
            Family::ChangePointsConst { p } => {
                if n < 4 || *p > n - 3 {
                    return Err(Error::Domain(format!(
                        "change-point family requires p <= n - 3, got p = {p}, n = {n}"
                    )));
                }
            }
            Family::PartitionPoly { d, .. } => {
                if !(1..=2).contains(d) {
                    return Err(Error::Domain(format!(
                        "partition family supports d in {{1, 2}}, got {d}"
                    )));
                }
                if n < 3 {
                    return Err(Error::Domain(format!(
                        "partition family requires n >= 3, got {n}"
                    )));
                }
            }
            Family::DyadicSplines { .. } => {}
        }
        Ok(())
    }

    /// The per-dimension weight under this spec's scheme.
    pub fn weight_for_dim(&self, dim: usize) -> Result<f64> {
        match self.weight_scheme {
            WeightScheme::Uniform { a_prime } => Ok(weight_uniform(a_prime, dim)),
            WeightScheme::Canonical => match &self.family {
                Family::NonzeroComponents { .. } => weight_nonzero(dim, self.n),
                Family::OrderedVarsel { .. } => Ok(dim as f64),
                Family::CompleteVarsel { n_cols, p } => {
                    weight_varsel(dim, false, 1.0, *n_cols, *p)
                }
                Family::ChangePointsConst { .. } => {
                    if dim == 0 {
                        return Err(Error::Domain(
                            "change-point models have dimension >= 1".into(),
                        ));
                    }
                    weight_changepoint(dim - 1, self.n)
                }
                Family::PartitionPoly { .. } => Ok(dim as f64),
                Family::DyadicSplines { .. } => Err(Error::Domain(
                    "dyadic-spline weights are indexed by (j, q), not by dimension".into(),
                )),
            },
        }
    }
}

/// Per-dimension weight lookup used by the selectors.
#[derive(Debug, Clone, Default)]
pub struct WeightTable {
    by_dim: BTreeMap<usize, f64>,
}

impl WeightTable {
    pub fn from_map(by_dim: BTreeMap<usize, f64>) -> Self {
        Self { by_dim }
    }

    /// The spec's weights tabulated over every realized dimension.
    pub fn for_spec(spec: &CollectionSpec) -> Result<Self> {
        let mut by_dim = BTreeMap::new();
        for dim in realized_dims(spec)? {
            by_dim.insert(dim, spec.weight_for_dim(dim)?);
        }
        Ok(Self { by_dim })
    }

    pub fn get(&self, dim: usize) -> Result<f64> {
        self.by_dim.get(&dim).copied().ok_or_else(|| {
            Error::Domain(format!("weight table has no entry for dimension {dim}"))
        })
    }

    pub fn insert(&mut self, dim: usize, l: f64) {
        self.by_dim.insert(dim, l);
    }
}

fn realized_dims(spec: &CollectionSpec) -> Result<Vec<usize>> {
    Ok(match &spec.family {
        Family::NonzeroComponents { p }
        | Family::OrderedVarsel { p }
        | Family::CompleteVarsel { p, .. } => (0..=*p).collect(),
        Family::ChangePointsConst { p } => (1..=*p + 1).collect(),
        Family::PartitionPoly { d, max_degree } => {
            let mut dims: Vec<usize> = partition_tuples(spec.n, *d, *max_degree)
                .iter()
                .map(|m| m.nominal_dim())
                .collect();
            dims.sort_unstable();
            dims.dedup();
            dims
        }
        Family::DyadicSplines { .. } => {
            return Err(Error::Domain(
                "dyadic-spline family has no per-dimension weight table".into(),
            ))
        }
    })
}

/// `L_m = a' D_m`.
pub fn weight_uniform(a_prime: f64, d: usize) -> f64 {
    a_prime * d as f64
}

/// Weight for coordinate subsets: `ln C(n, D) + 2 ln(D + 1)`.
pub fn weight_nonzero(d: usize, n: usize) -> Result<f64> {
    Ok(ln_binomial(n, d)? + 2.0 * ((d + 1) as f64).ln())
}

/// Weight for variable selection, covering the ordered and complete cases
/// at once: `c |m|` for an ordered prefix, otherwise
/// `ln C(N, |m|) + ln p + ln(|m| + 1)`.
pub fn weight_varsel(
    m_size: usize,
    is_ordered_prefix: bool,
    c: f64,
    n_cols: usize,
    p: usize,
) -> Result<f64> {
    if m_size > p {
        return Err(Error::Domain(format!(
            "variable-selection weight requires |m| <= p, got |m| = {m_size}, p = {p}"
        )));
    }
    if is_ordered_prefix {
        if !(c > 0.0) {
            return Err(Error::Domain(format!(
                "ordered-prefix weight requires c > 0, got {c}"
            )));
        }
        Ok(c * m_size as f64)
    } else {
        Ok(ln_binomial(n_cols, m_size)? + (p as f64).ln() + ((m_size + 1) as f64).ln())
    }
}

/// Weight for change-point sets: `ln C(n-1, |m|) + 2 ln(|m| + 2)`.
pub fn weight_changepoint(m_size: usize, n: usize) -> Result<f64> {
    if n < 3 || m_size > n - 3 {
        return Err(Error::Domain(format!(
            "change-point weight requires |m| <= n - 3, got |m| = {m_size}, n = {n}"
        )));
    }
    Ok(ln_binomial(n - 1, m_size)? + 2.0 * ((m_size + 2) as f64).ln())
}

/// Weight class for dyadic-knot linear splines:
/// `L(j, q) = ln C(2^j - 1, q) + q + 2 ln j`. The weight of one model is
/// the infimum of `L(j, q)` over the classes containing it.
pub fn weight_dyadic(j: u32, q: usize, p: usize) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain(format!(
            "dyadic weight requires j >= 1, got {j}"
        )));
    }
    let knots = 2.0_f64.powi(j as i32) - 1.0;
    if q as f64 > knots || q > p {
        return Err(Error::Domain(format!(
            "dyadic weight requires q <= min(2^j - 1, p), got q = {q}, j = {j}, p = {p}"
        )));
    }
    let qf = q as f64;
    let ln_binom = ln_gamma(knots + 1.0) - ln_gamma(qf + 1.0) - ln_gamma(knots - qf + 1.0);
    Ok(ln_binom + qf + 2.0 * (j as f64).ln())
}

/// Weight for partition models: the span dimension bound
/// `(r + 1)^d k_1 ... k_d`, subject to the index-set cap `<= n - 2`.
pub fn weight_partition(r: usize, k: &[usize], n: usize) -> Result<f64> {
    if k.is_empty() || k.iter().any(|&ki| ki == 0) {
        return Err(Error::Domain(
            "partition weight requires positive cell counts".into(),
        ));
    }
    let dim = (r as u128 + 1).pow(k.len() as u32) * k.iter().map(|&ki| ki as u128).product::<u128>();
    if n < 3 || dim > (n - 2) as u128 {
        return Err(Error::Domain(format!(
            "partition weight requires (r+1)^d prod(k) <= n - 2, got {dim} with n = {n}"
        )));
    }
    Ok(dim as f64)
}

/// The weight-series sum `sum_m (D_m + 1) e^{-L_m}`, with a flag telling
/// whether the returned value is an upper bound rather than the exact sum
/// (only the dyadic family, whose index set is infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPrime {
    pub value: f64,
    pub is_upper_bound: bool,
}

/// Exact grouped evaluation of the weight series: per-dimension model
/// counts times the per-dimension weight, accumulated in log space.
pub fn sigma_prime(spec: &CollectionSpec) -> Result<SigmaPrime> {
    let n = spec.n;
    let exact = |value| SigmaPrime {
        value,
        is_upper_bound: false,
    };
    match &spec.family {
        Family::NonzeroComponents { p } => {
            let mut sum = 0.0;
            for d in 0..=*p {
                let ln_count = ln_binomial(n, d)?;
                sum += (ln_count + ((d + 1) as f64).ln() - spec.weight_for_dim(d)?).exp();
            }
            Ok(exact(sum))
        }
        Family::OrderedVarsel { p } => {
            let mut sum = 0.0;
            for d in 0..=*p {
                sum += (((d + 1) as f64).ln() - spec.weight_for_dim(d)?).exp();
            }
            Ok(exact(sum))
        }
        Family::CompleteVarsel { n_cols, p } => {
            let mut sum = 0.0;
            for d in 0..=*p {
                let ln_count = ln_binomial(*n_cols, d)?;
                sum += (ln_count + ((d + 1) as f64).ln() - spec.weight_for_dim(d)?).exp();
            }
            Ok(exact(sum))
        }
        Family::ChangePointsConst { p } => {
            let mut sum = 0.0;
            for q in 0..=*p {
                let ln_count = ln_binomial(n - 1, q)?;
                sum += (ln_count + ((q + 2) as f64).ln() - spec.weight_for_dim(q + 1)?).exp();
            }
            Ok(exact(sum))
        }
        Family::PartitionPoly { d, max_degree } => {
            let mut sum = 0.0;
            for key in partition_tuples(n, *d, *max_degree) {
                let dim = key.nominal_dim();
                sum += (((dim + 1) as f64).ln() - spec.weight_for_dim(dim)?).exp();
            }
            Ok(exact(sum))
        }
        Family::DyadicSplines { .. } => {
            // closed-form bound over the infinite index set:
            // pi^2 e (3e - 2) / (6 (e - 1)^2)
            let e = core::f64::consts::E;
            let value = core::f64::consts::PI.powi(2) * e * (3.0 * e - 2.0)
                / (6.0 * (e - 1.0) * (e - 1.0));
            Ok(SigmaPrime {
                value,
                is_upper_bound: true,
            })
        }
    }
}

/// Complexity index of a family.
///
/// The subset families carry the standard indices; the partition family is
/// finite once truncated at `n - 2`, so an exact `(max count per dim, 0)`
/// index is computed by enumeration. The dyadic family has no finite index.
pub fn complexity_of(spec: &CollectionSpec) -> Result<ComplexityIndex> {
    let n = spec.n as f64;
    match &spec.family {
        Family::NonzeroComponents { .. } => Ok(ComplexityIndex { m: 1.0, a: n.ln() }),
        Family::OrderedVarsel { .. } => Ok(ComplexityIndex { m: 1.0, a: 0.0 }),
        Family::CompleteVarsel { n_cols, .. } => Ok(ComplexityIndex {
            m: 1.0,
            a: (*n_cols as f64).ln(),
        }),
        Family::ChangePointsConst { .. } => Ok(ComplexityIndex { m: 1.0, a: n.ln() }),
        Family::PartitionPoly { d, max_degree } => {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for key in partition_tuples(spec.n, *d, *max_degree) {
                *counts.entry(key.nominal_dim()).or_insert(0) += 1;
            }
            let m = counts.values().copied().max().unwrap_or(1) as f64;
            Ok(ComplexityIndex { m, a: 0.0 })
        }
        Family::DyadicSplines { .. } => Err(Error::Domain(
            "dyadic-spline family has no finite complexity index".into(),
        )),
    }
}

fn binomial_saturating(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 1..=k {
        match r.checked_mul((n - k + i) as u128) {
            Some(v) => r = v / i as u128,
            None => return u128::MAX,
        }
    }
    r
}

/// Number of models in the collection (saturating at `u128::MAX`).
pub fn count_models(spec: &CollectionSpec) -> Result<u128> {
    Ok(match &spec.family {
        Family::NonzeroComponents { p } => (0..=*p)
            .map(|d| binomial_saturating(spec.n, d))
            .fold(0u128, u128::saturating_add),
        Family::OrderedVarsel { p } => *p as u128 + 1,
        Family::CompleteVarsel { n_cols, p } => (0..=*p)
            .map(|d| binomial_saturating(*n_cols, d))
            .fold(0u128, u128::saturating_add),
        Family::ChangePointsConst { p } => (0..=*p)
            .map(|q| binomial_saturating(spec.n - 1, q))
            .fold(0u128, u128::saturating_add),
        Family::PartitionPoly { d, max_degree } => {
            partition_tuples(spec.n, *d, *max_degree).len() as u128
        }
        Family::DyadicSplines { .. } => {
            return Err(Error::Domain(
                "dyadic-spline family is infinite and cannot be enumerated".into(),
            ))
        }
    })
}

/// All admissible partition indices `(r, k_1..k_d)` with
/// `(r+1)^d k_1...k_d <= n - 2`, sorted by span dimension then
/// lexicographically.
pub fn partition_tuples(n: usize, d: usize, max_degree: usize) -> Vec<ModelKey> {
    fn fill(budget: usize, axes_left: usize, degree: usize, prefix: &mut Vec<usize>, out: &mut Vec<ModelKey>) {
        if axes_left == 0 {
            out.push(ModelKey::Partition {
                degree,
                cells: prefix.clone(),
            });
            return;
        }
        for k in 1..=budget {
            prefix.push(k);
            fill(budget / k, axes_left - 1, degree, prefix, out);
            prefix.pop();
        }
    }

    let cap = n.saturating_sub(2);
    let mut out = Vec::new();
    if cap == 0 || d == 0 {
        return out;
    }
    for r in 0..=max_degree {
        let per_cell = (r + 1).pow(d as u32);
        if per_cell > cap {
            break;
        }
        let mut prefix = Vec::with_capacity(d);
        fill(cap / per_cell, d, r, &mut prefix, &mut out);
    }
    out.sort_by(|a, b| (a.nominal_dim(), a).cmp(&(b.nominal_dim(), b)));
    out
}

/// Lexicographic k-combinations of `0..n`.
struct CombinationIter {
    n: usize,
    k: usize,
    current: Option<Vec<usize>>,
}

impl CombinationIter {
    fn new(n: usize, k: usize) -> Self {
        let current = if k <= n {
            Some((0..k).collect())
        } else {
            None
        };
        Self { n, k, current }
    }
}

impl Iterator for CombinationIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.current.take()?;
        let out = current.clone();
        let mut next = current;
        let mut i = self.k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - self.k + i {
                next[i] += 1;
                for j in i + 1..self.k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

enum EnumState {
    Subsets {
        n_items: usize,
        p: usize,
        size: usize,
        inner: CombinationIter,
        to_key: fn(Vec<usize>) -> ModelKey,
    },
    Ordered {
        p: usize,
        next: usize,
    },
    List {
        items: alloc::vec::IntoIter<ModelKey>,
    },
}

/// Deterministic model enumeration: by dimension, then lexicographic.
pub struct ModelIter {
    state: EnumState,
}

impl Iterator for ModelIter {
    type Item = ModelKey;

    fn next(&mut self) -> Option<ModelKey> {
        match &mut self.state {
            EnumState::Subsets {
                n_items,
                p,
                size,
                inner,
                to_key,
            } => loop {
                if let Some(combo) = inner.next() {
                    return Some(to_key(combo));
                }
                if *size >= *p {
                    return None;
                }
                *size += 1;
                *inner = CombinationIter::new(*n_items, *size);
            },
            EnumState::Ordered { p, next } => {
                if *next > *p {
                    return None;
                }
                let key = ModelKey::ColumnSubset((0..*next).collect());
                *next += 1;
                Some(key)
            }
            EnumState::List { items } => items.next(),
        }
    }
}

fn coord_key(idx: Vec<usize>) -> ModelKey {
    ModelKey::CoordSubset(idx)
}

fn column_key(idx: Vec<usize>) -> ModelKey {
    ModelKey::ColumnSubset(idx)
}

fn changepoint_key(idx: Vec<usize>) -> ModelKey {
    ModelKey::ChangePoints(idx.into_iter().map(|i| i + 1).collect())
}

/// Enumerate every model of the collection once, refusing up front if the
/// collection exceeds the spec's search budget.
pub fn enumerate_models(spec: &CollectionSpec) -> Result<ModelIter> {
    let count = count_models(spec)?;
    if count > spec.search_budget as u128 {
        return Err(Error::BudgetExceeded {
            models: count,
            budget: spec.search_budget,
        });
    }
    let state = match &spec.family {
        Family::NonzeroComponents { p } => EnumState::Subsets {
            n_items: spec.n,
            p: *p,
            size: 0,
            inner: CombinationIter::new(spec.n, 0),
            to_key: coord_key,
        },
        Family::OrderedVarsel { p } => EnumState::Ordered { p: *p, next: 0 },
        Family::CompleteVarsel { n_cols, p } => EnumState::Subsets {
            n_items: *n_cols,
            p: *p,
            size: 0,
            inner: CombinationIter::new(*n_cols, 0),
            to_key: column_key,
        },
        Family::ChangePointsConst { p } => EnumState::Subsets {
            n_items: spec.n - 1,
            p: *p,
            size: 0,
            inner: CombinationIter::new(spec.n - 1, 0),
            to_key: changepoint_key,
        },
        Family::PartitionPoly { d, max_degree } => EnumState::List {
            items: partition_tuples(spec.n, *d, *max_degree).into_iter(),
        },
        Family::DyadicSplines { .. } => {
            return Err(Error::Domain(
                "dyadic-spline family is infinite and cannot be enumerated".into(),
            ))
        }
    };
    Ok(ModelIter { state })
}
