//! Scalable marginal inference: exact bucket-tree elimination and the
//! weighted mini-bucket approximation.
//!
//! Both engines share one message-passing core. Factors are placed into one
//! bucket per variable along an elimination order; each bucket's contents are
//! partitioned into mini-buckets whose combined scopes stay within a cap, and
//! every mini-bucket eliminates the bucket variable with a power-sum (a
//! weighted log-sum-exp, uniform weights across a bucket's mini-buckets). An
//! upward sweep sends the resulting messages toward later buckets; a downward
//! sweep sends separator messages back, after which each bucket's belief
//! yields the posterior marginal of its variable.
//!
//! With an unbounded scope cap every bucket keeps a single mini-bucket, all
//! weights are 1, and the sweep is ordinary bucket-tree elimination — exact
//! posteriors. With a finite cap (the i-bound) the result is the weighted
//! mini-bucket estimate, which coincides with the exact answer whenever the
//! i-bound is at least the induced width of the order plus one.
//!
//! All arithmetic is carried out in log space so that models with many
//! sub-unit factor entries do not underflow.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::graph::{Factor, GraphicalModel, MarginalTable, ModelError, VariableId};

/// Default mini-bucket scope cap used across the assessment pipeline.
pub const DEFAULT_IBOUND: usize = 6;

/// Inference engine selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferenceMode {
    /// Bucket-tree elimination; cost grows with the order's induced width.
    Exact,
    /// Weighted mini-buckets capped at the configured i-bound.
    WeightedMiniBucket,
}

/// Configuration for [`wmb_marginals`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferenceConfig {
    /// Largest number of variables a mini-bucket's combined scope may span.
    /// Must be at least 1.
    pub ibound: usize,
    pub mode: InferenceMode,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { ibound: DEFAULT_IBOUND, mode: InferenceMode::WeightedMiniBucket }
    }
}

/// A permutation of a model's variables giving the sequence in which they
/// are eliminated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder(Vec<VariableId>);

impl EliminationOrder {
    /// Validates that `order` is a permutation of `0..num_variables`.
    pub fn new(order: Vec<VariableId>, num_variables: usize) -> Result<Self, ModelError> {
        if order.len() != num_variables {
            return Err(ModelError::InvalidOrder { reason: "order must list every variable exactly once" });
        }
        let mut seen = vec![false; num_variables];
        for v in &order {
            if v.0 >= num_variables {
                return Err(ModelError::InvalidOrder { reason: "order references an undeclared variable" });
            }
            if seen[v.0] {
                return Err(ModelError::InvalidOrder { reason: "order repeats a variable" });
            }
            seen[v.0] = true;
        }
        Ok(EliminationOrder(order))
    }

    pub fn as_slice(&self) -> &[VariableId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Primal-graph adjacency matrix: `adj[i][j]` iff some factor scope contains
/// both variables.
fn primal_adjacency(model: &GraphicalModel) -> Vec<Vec<bool>> {
    let n = model.num_variables();
    let mut adj = vec![vec![false; n]; n];
    for f in model.factors() {
        let scope = f.scope();
        if scope.len() == 2 {
            adj[scope[0].0][scope[1].0] = true;
            adj[scope[1].0][scope[0].0] = true;
        }
    }
    adj
}

/// Greedy min-fill elimination order: repeatedly eliminate the variable whose
/// removal adds the fewest fill edges among its not-yet-eliminated
/// neighbors, breaking ties by ascending variable index. Deterministic.
pub fn min_fill_order(model: &GraphicalModel) -> EliminationOrder {
    let n = model.num_variables();
    let mut adj = primal_adjacency(model);
    let mut remaining = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, usize)> = None; // (fill count, variable)
        for v in 0..n {
            if !remaining[v] {
                continue;
            }
            let neighbors: Vec<usize> =
                (0..n).filter(|&u| remaining[u] && adj[v][u]).collect();
            let mut fill = 0usize;
            for (i, &u) in neighbors.iter().enumerate() {
                for &w in &neighbors[i + 1..] {
                    if !adj[u][w] {
                        fill += 1;
                    }
                }
            }
            // Strict `<` keeps the smallest index on ties.
            if best.map_or(true, |(f, _)| fill < f) {
                best = Some((fill, v));
            }
        }
        let (_, v) = best.expect("at least one variable remains");
        let neighbors: Vec<usize> = (0..n).filter(|&u| remaining[u] && adj[v][u]).collect();
        for (i, &u) in neighbors.iter().enumerate() {
            for &w in &neighbors[i + 1..] {
                adj[u][w] = true;
                adj[w][u] = true;
            }
        }
        remaining[v] = false;
        order.push(VariableId(v));
    }
    EliminationOrder(order)
}

/// Width of the primal graph along `order`: the largest number of
/// not-yet-eliminated neighbors any variable has at the moment it is
/// eliminated (fill edges included).
pub fn induced_width(model: &GraphicalModel, order: &EliminationOrder) -> Result<usize, ModelError> {
    let n = model.num_variables();
    if order.len() != n {
        return Err(ModelError::InvalidOrder { reason: "order length does not match the model" });
    }
    let mut adj = primal_adjacency(model);
    let mut remaining = vec![true; n];
    let mut width = 0usize;
    for v in order.as_slice() {
        let v = v.0;
        let neighbors: Vec<usize> = (0..n).filter(|&u| remaining[u] && adj[v][u]).collect();
        width = width.max(neighbors.len());
        for (i, &u) in neighbors.iter().enumerate() {
            for &w in &neighbors[i + 1..] {
                adj[u][w] = true;
                adj[w][u] = true;
            }
        }
        remaining[v] = false;
    }
    Ok(width)
}

/// Exact posterior marginals by bucket-tree elimination along `order`.
///
/// Matches [`GraphicalModel::brute_force_marginals`] on any model both can
/// handle, without the enumeration guard; cost is exponential only in the
/// order's induced width.
pub fn exact_marginals(model: &GraphicalModel, order: &EliminationOrder) -> Result<MarginalTable, ModelError> {
    mini_bucket_marginals(model, order, usize::MAX)
}

/// Posterior marginals with the engine picked by `config.mode`: exact
/// bucket-tree elimination, or the weighted mini-bucket estimate capped at
/// `config.ibound`. The estimate equals the exact answer whenever
/// `config.ibound >= induced_width(model, order) + 1`.
pub fn wmb_marginals(
    model: &GraphicalModel,
    order: &EliminationOrder,
    config: &InferenceConfig,
) -> Result<MarginalTable, ModelError> {
    let cap = match config.mode {
        InferenceMode::Exact => usize::MAX,
        InferenceMode::WeightedMiniBucket => {
            if config.ibound == 0 {
                return Err(ModelError::InvalidConfig { reason: "ibound must be at least 1" });
            }
            config.ibound
        }
    };
    mini_bucket_marginals(model, order, cap)
}

// ---------------------------------------------------------------------------
// Log-space tables
// ---------------------------------------------------------------------------

/// log(a + b) given log inputs.
fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Weighted power sum in log space: `w * log(exp(a/w) + exp(b/w))`.
/// Reduces to [`lse2`] when `w == 1`, which the exact path relies on.
fn power_sum2(a: f64, b: f64, w: f64) -> f64 {
    if w == 1.0 {
        lse2(a, b)
    } else {
        w * lse2(a / w, b / w)
    }
}

/// A table of log values over a sorted scope of Boolean variables. The first
/// scope variable occupies the most significant bit of the table index;
/// `false = 0`, `true = 1`.
#[derive(Clone, Debug)]
struct LogTable {
    scope: Vec<VariableId>,
    values: Vec<f64>,
}

impl LogTable {
    fn scalar(ln_value: f64) -> Self {
        LogTable { scope: Vec::new(), values: vec![ln_value] }
    }

    /// Converts a factor to log space, sorting its scope ascending.
    fn from_factor(factor: &Factor) -> Self {
        let orig = factor.scope();
        let mut scope: Vec<VariableId> = orig.to_vec();
        scope.sort_unstable();
        let k = scope.len();
        let mut values = vec![0.0f64; 1 << k];
        for (idx, slot) in values.iter_mut().enumerate() {
            // Re-encode this sorted-scope index in the factor's own order.
            let mut orig_idx = 0usize;
            for v in orig {
                let p = scope.iter().position(|w| w == v).expect("scope permutation");
                let bit = (idx >> (k - 1 - p)) & 1;
                orig_idx = (orig_idx << 1) | bit;
            }
            *slot = libm::log(factor.table()[orig_idx]);
        }
        LogTable { scope, values }
    }

    /// Pointwise product (sum of log values) over the union scope.
    fn multiply(&self, other: &LogTable) -> LogTable {
        let mut scope: Vec<VariableId> = self.scope.clone();
        for v in &other.scope {
            if !scope.contains(v) {
                scope.push(*v);
            }
        }
        scope.sort_unstable();
        let m = scope.len();
        let self_pos: Vec<usize> = self
            .scope
            .iter()
            .map(|v| scope.iter().position(|w| w == v).expect("subset scope"))
            .collect();
        let other_pos: Vec<usize> = other
            .scope
            .iter()
            .map(|v| scope.iter().position(|w| w == v).expect("subset scope"))
            .collect();
        let mut values = vec![0.0f64; 1 << m];
        for (idx, slot) in values.iter_mut().enumerate() {
            let a = self_pos.iter().fold(0usize, |acc, &p| (acc << 1) | ((idx >> (m - 1 - p)) & 1));
            let b = other_pos.iter().fold(0usize, |acc, &p| (acc << 1) | ((idx >> (m - 1 - p)) & 1));
            *slot = self.values[a] + other.values[b];
        }
        LogTable { scope, values }
    }

    /// Sums out `var` with the power sum of weight `w` (`w = 1` is the plain
    /// sum). Panics if `var` is not in scope.
    fn eliminate(&self, var: VariableId, w: f64) -> LogTable {
        let p = self.scope.iter().position(|v| *v == var).expect("variable in scope");
        let k = self.scope.len();
        let shift = k - 1 - p;
        let mut scope = self.scope.clone();
        scope.remove(p);
        let mut values = vec![0.0f64; 1 << (k - 1)];
        let low_mask = (1usize << shift) - 1;
        for (new_idx, slot) in values.iter_mut().enumerate() {
            let low = new_idx & low_mask;
            let high = new_idx >> shift;
            let idx0 = (high << (shift + 1)) | low;
            let idx1 = idx0 | (1 << shift);
            *slot = power_sum2(self.values[idx0], self.values[idx1], w);
        }
        LogTable { scope, values }
    }

    /// Restricts the table to `separator` by plain-summing out every scope
    /// variable not in it (ascending variable index), then extending with any
    /// separator variables the table does not mention (the table is constant
    /// in those).
    fn project_onto(&self, separator: &[VariableId]) -> LogTable {
        let mut result = self.clone();
        let extra: Vec<VariableId> =
            result.scope.iter().filter(|v| !separator.contains(v)).copied().collect();
        for v in extra {
            result = result.eliminate(v, 1.0);
        }
        for &v in separator {
            if !result.scope.contains(&v) {
                result = result.extend_with(v);
            }
        }
        result
    }

    /// Adds `var` to the scope; values are duplicated across its two states.
    fn extend_with(&self, var: VariableId) -> LogTable {
        debug_assert!(!self.scope.contains(&var));
        let mut scope = self.scope.clone();
        let p = scope.iter().position(|v| *v > var).unwrap_or(scope.len());
        scope.insert(p, var);
        let k = scope.len();
        let shift = k - 1 - p;
        let low_mask = (1usize << shift) - 1;
        let mut values = vec![0.0f64; 1 << k];
        for (idx, slot) in values.iter_mut().enumerate() {
            let low = idx & low_mask;
            let high = idx >> (shift + 1);
            *slot = self.values[(high << shift) | low];
        }
        LogTable { scope, values }
    }

    /// Log-space marginal of `var`: plain-sums all other variables and
    /// returns `[ln m(false), ln m(true)]`. `None` if `var` is not in scope.
    fn log_marginal(&self, var: VariableId) -> Option<[f64; 2]> {
        let p = self.scope.iter().position(|v| *v == var)?;
        let shift = self.scope.len() - 1 - p;
        let mut acc = [f64::NEG_INFINITY; 2];
        for (idx, &v) in self.values.iter().enumerate() {
            let bit = (idx >> shift) & 1;
            acc[bit] = lse2(acc[bit], v);
        }
        Some(acc)
    }
}

/// Canonical ordering of tables: lexicographic on scope, then on values.
/// Sorting bucket contents with this makes partitioning and all subsequent
/// arithmetic independent of factor insertion order (equal keys denote
/// interchangeable tables).
fn canonical_cmp(a: &LogTable, b: &LogTable) -> Ordering {
    let scope_a = a.scope.iter().map(|v| v.0);
    let scope_b = b.scope.iter().map(|v| v.0);
    scope_a.cmp(scope_b).then_with(|| {
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            let ord = x.total_cmp(y);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    })
}

// ---------------------------------------------------------------------------
// Mini-bucket message passing
// ---------------------------------------------------------------------------

/// A table waiting in a bucket: an original factor, or the upward message of
/// the mini-bucket identified by `origin` (bucket position, mini index).
struct PendingItem {
    table: LogTable,
    origin: Option<(usize, usize)>,
}

struct MiniBucket {
    items: Vec<PendingItem>,
    scope: Vec<VariableId>,
    weight: f64,
    /// Separator message received from the parent during the downward sweep.
    downward: Option<LogTable>,
}

struct Bucket {
    variable: VariableId,
    pending: Vec<PendingItem>,
    minis: Vec<MiniBucket>,
}

fn sorted_union(a: &[VariableId], b: &[VariableId]) -> Vec<VariableId> {
    let mut out = a.to_vec();
    for v in b {
        if !out.contains(v) {
            out.push(*v);
        }
    }
    out.sort_unstable();
    out
}

/// Shared engine behind [`exact_marginals`] and [`wmb_marginals`]:
/// mini-bucket elimination with scope cap `scope_cap` (`usize::MAX` keeps
/// every bucket whole and yields exact bucket-tree elimination).
fn mini_bucket_marginals(
    model: &GraphicalModel,
    order: &EliminationOrder,
    scope_cap: usize,
) -> Result<MarginalTable, ModelError> {
    let n = model.num_variables();
    if order.len() != n {
        return Err(ModelError::InvalidOrder { reason: "order length does not match the model" });
    }
    if n == 0 {
        return Ok(MarginalTable::from_rows(Vec::new()));
    }

    let mut pos = vec![0usize; n];
    for (t, v) in order.as_slice().iter().enumerate() {
        pos[v.0] = t;
    }
    let mut buckets: Vec<Bucket> = order
        .as_slice()
        .iter()
        .map(|&v| Bucket { variable: v, pending: Vec::new(), minis: Vec::new() })
        .collect();

    //Every factor starts in the bucket of its earliest-eliminated variable.
    for factor in model.factors() {
        let table = LogTable::from_factor(factor);
        let dest = table.scope.iter().map(|v| pos[v.0]).min().expect("non-empty scope");
        buckets[dest].pending.push(PendingItem { table, origin: None });
    }

    // Upward sweep: partition each bucket, eliminate its variable from every
    // mini-bucket, and push the messages toward later buckets. Scalar
    // messages accumulate the log partition-function estimate.
    let mut ln_z = 0.0f64;
    for t in 0..n {
        let variable = buckets[t].variable;
        let mut items = core::mem::take(&mut buckets[t].pending);
        if items.is_empty() {
            continue;
        }
        items.sort_by(|a, b| canonical_cmp(&a.table, &b.table));
        let mut minis: Vec<MiniBucket> = Vec::new();
        for item in items {
            let fits = minis.iter().position(|m| {
                sorted_union(&m.scope, &item.table.scope).len() <= scope_cap
            });
            match fits {
                Some(i) => {
                    minis[i].scope = sorted_union(&minis[i].scope, &item.table.scope);
                    minis[i].items.push(item);
                }
                None => minis.push(MiniBucket {
                    scope: item.table.scope.clone(),
                    items: vec![item],
                    weight: 1.0,
                    downward: None,
                }),
            }
        }
        let weight = 1.0 / minis.len() as f64;
        let mut outgoing: Vec<(usize, PendingItem)> = Vec::new();
        for (j, mini) in minis.iter_mut().enumerate() {
            mini.weight = weight;
            let mut product = LogTable::scalar(0.0);
            for item in &mini.items {
                product = product.multiply(&item.table);
            }
            let message = product.eliminate(variable, weight);
            if message.scope.is_empty() {
                ln_z += message.values[0];
            } else {
                let dest = message.scope.iter().map(|v| pos[v.0]).min().expect("non-empty");
                outgoing.push((dest, PendingItem { table: message, origin: Some((t, j)) }));
            }
        }
        buckets[t].minis = minis;
        for (dest, item) in outgoing {
            buckets[dest].pending.push(item);
        }
    }

    // A zero estimate proves the true partition function is zero (the
    // power-sum estimate never falls below the plain sum). The converse is
    // checked per belief below; with a single mini-bucket per bucket the
    // estimate is exact, so degeneracy detection is exact on the exact path.
    if ln_z == f64::NEG_INFINITY {
        return Err(ModelError::DegenerateModel);
    }

    // Downward sweep (reverse order): every mini-bucket sends each child the
    // product of its other items and its own downward message, restricted to
    // the child's separator. Beliefs then read marginals off the first
    // mini-bucket of each bucket.
    let mut rows = vec![[0.5f64, 0.5]; n];
    for t in (0..n).rev() {
        let variable = buckets[t].variable;
        if buckets[t].minis.is_empty() {
            continue; // no factor mentions this variable: uniform marginal
        }
        let mut outgoing: Vec<(usize, usize, LogTable)> = Vec::new();
        for mini in &buckets[t].minis {
            for (idx, item) in mini.items.iter().enumerate() {
                let Some((s, i)) = item.origin else { continue };
                let mut product = LogTable::scalar(0.0);
                for (other_idx, other) in mini.items.iter().enumerate() {
                    if other_idx != idx {
                        product = product.multiply(&other.table);
                    }
                }
                if let Some(down) = &mini.downward {
                    product = product.multiply(down);
                }
                outgoing.push((s, i, product.project_onto(&item.table.scope)));
            }
        }
        for (s, i, message) in outgoing {
            buckets[s].minis[i].downward = Some(message);
        }

        let first = &buckets[t].minis[0];
        let mut belief = LogTable::scalar(0.0);
        for item in &first.items {
            belief = belief.multiply(&item.table);
        }
        if let Some(down) = &first.downward {
            belief = belief.multiply(down);
        }
        let log_row = belief.log_marginal(variable).expect("bucket items mention the variable");
        let peak = log_row[0].max(log_row[1]);
        if peak == f64::NEG_INFINITY {
            return Err(ModelError::DegenerateModel);
        }
        let e0 = libm::exp(log_row[0] - peak);
        let e1 = libm::exp(log_row[1] - peak);
        rows[variable.0] = [e0 / (e0 + e1), e1 / (e0 + e1)];
    }

    Ok(MarginalTable::from_rows(rows))
}
