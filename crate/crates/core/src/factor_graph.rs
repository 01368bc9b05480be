//! Discrete energy-based models as factor graphs.
//!
//! A [`FactorGraph`] holds one unary log-potential vector per variable and a
//! list of factors over variable subsets. All potentials are stored in the
//! log domain; the model score is `Θᵀ Φ(x) = -E(x)`.
//!
//! The parameter vector `Θ` is laid out as every unary vector in variable
//! order followed by each factor's parameters in factor order:
//!
//! | kind          | parameters                   | statistic                         |
//! |---------------|------------------------------|-----------------------------------|
//! | `DenseTable`  | one per joint state          | indicator of the joint state      |
//! | `IsingEdge`   | one weight                   | `s_i s_j` with `s = 2x - 1`       |
//! | `RbmBlock`    | `n_hidden × n_visible`       | `h_i v_j`                         |
//! | `Or`, `And`   | none                         | hard constraint, no statistic     |
//!
//! Dense tables are row-major over the factor's neighbours: the first
//! neighbour varies slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-score given to excluded states (clamping, violated logic factors).
///
/// Finite so that message sums never produce NaN.
pub const CLAMP_SCORE: f64 = -1.0e30;

/// One discrete variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub id: usize,
    pub cardinality: usize,
}

/// The kind of a factor together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FactorKind {
    /// Arbitrary log-potential table over the joint states of the neighbours.
    DenseTable { table: Vec<f64> },
    /// `weight · s_i s_j` between two binary variables in ±1 coding.
    IsingEdge { weight: f64 },
    /// Bipartite block: neighbours are the visible group followed by the
    /// hidden group, `weights[i * n_visible + j]` couples hidden `i` with
    /// visible `j`.
    RbmBlock {
        n_visible: usize,
        n_hidden: usize,
        weights: Vec<f64>,
    },
    /// Neighbours `t_1..t_n, b`: `b = t_1 ∨ … ∨ t_n`.
    Or,
    /// Neighbours `t_1, t_2, b`: `b = t_1 ∧ t_2`.
    And,
}

impl FactorKind {
    pub fn num_params(&self) -> usize {
        match self {
            FactorKind::DenseTable { table } => table.len(),
            FactorKind::IsingEdge { .. } => 1,
            FactorKind::RbmBlock { weights, .. } => weights.len(),
            FactorKind::Or | FactorKind::And => 0,
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            FactorKind::DenseTable { table } => table,
            FactorKind::IsingEdge { weight } => std::slice::from_ref(weight),
            FactorKind::RbmBlock { weights, .. } => weights,
            FactorKind::Or | FactorKind::And => &[],
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            FactorKind::DenseTable { table } => table,
            FactorKind::IsingEdge { weight } => std::slice::from_mut(weight),
            FactorKind::RbmBlock { weights, .. } => weights,
            FactorKind::Or | FactorKind::And => &mut [],
        }
    }

    /// Whether this kind couples several variables through its parameters.
    pub fn is_pairwise(&self) -> bool {
        matches!(
            self,
            FactorKind::IsingEdge { .. } | FactorKind::RbmBlock { .. }
        )
    }
}

/// A factor: its neighbour variables and its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub neighbors: Vec<usize>,
    pub kind: FactorKind,
}

impl Factor {
    /// Log-potential of the factor for the given neighbour states.
    pub fn log_potential(&self, states: &[usize], cards: &[usize]) -> f64 {
        match &self.kind {
            FactorKind::DenseTable { table } => {
                let mut idx = 0;
                for (&v, &s) in self.neighbors.iter().zip(states) {
                    idx = idx * cards[v] + s;
                }
                table[idx]
            }
            FactorKind::IsingEdge { weight } => weight * spin(states[0]) * spin(states[1]),
            FactorKind::RbmBlock {
                n_visible,
                n_hidden,
                weights,
            } => {
                let (vis, hid) = states.split_at(*n_visible);
                let mut acc = 0.0;
                for i in 0..*n_hidden {
                    if hid[i] == 1 {
                        let row = &weights[i * n_visible..(i + 1) * n_visible];
                        acc += row.iter().zip(vis).filter(|(_, &v)| v == 1).map(|(w, _)| w).sum::<f64>();
                    }
                }
                acc
            }
            FactorKind::Or => {
                let (tops, bottom) = states.split_at(states.len() - 1);
                let any = tops.iter().any(|&t| t == 1);
                if any == (bottom[0] == 1) {
                    0.0
                } else {
                    CLAMP_SCORE
                }
            }
            FactorKind::And => {
                let all = states[0] == 1 && states[1] == 1;
                if all == (states[2] == 1) {
                    0.0
                } else {
                    CLAMP_SCORE
                }
            }
        }
    }

    fn add_stats(&self, states: &[usize], cards: &[usize], out: &mut [f64]) {
        match &self.kind {
            FactorKind::DenseTable { .. } => {
                let mut idx = 0;
                for (&v, &s) in self.neighbors.iter().zip(states) {
                    idx = idx * cards[v] + s;
                }
                out[idx] += 1.0;
            }
            FactorKind::IsingEdge { .. } => out[0] += spin(states[0]) * spin(states[1]),
            FactorKind::RbmBlock {
                n_visible,
                n_hidden,
                ..
            } => {
                let (vis, hid) = states.split_at(*n_visible);
                for i in 0..*n_hidden {
                    if hid[i] == 1 {
                        for j in 0..*n_visible {
                            if vis[j] == 1 {
                                out[i * n_visible + j] += 1.0;
                            }
                        }
                    }
                }
            }
            FactorKind::Or | FactorKind::And => {}
        }
    }
}

#[inline]
pub(crate) fn spin(state: usize) -> f64 {
    if state == 1 {
        1.0
    } else {
        -1.0
    }
}

/// One state index per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }
}

impl std::ops::Deref for Assignment {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl std::ops::DerefMut for Assignment {
    fn deref_mut(&mut self) -> &mut [usize] {
        &mut self.0
    }
}

impl From<Vec<usize>> for Assignment {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Observed values for a subset of variables, sorted by variable id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evidence {
    pairs: Vec<(usize, usize)>,
}

impl Evidence {
    pub fn none() -> Self {
        Self::default()
    }

    /// Later duplicates of the same variable overwrite earlier ones.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.reverse();
        pairs.sort_by_key(|&(v, _)| v);
        pairs.dedup_by_key(|&mut (v, _)| v);
        Self { pairs }
    }

    /// Observes `values[k]` on variable `vars[k]`.
    pub fn observe(vars: &[usize], values: &[usize]) -> Self {
        Self::from_pairs(vars.iter().copied().zip(values.iter().copied()))
    }

    /// Observes every variable.
    pub fn full(x: &Assignment) -> Self {
        Self {
            pairs: x.iter().copied().enumerate().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// Dense view, `None` for unobserved variables.
    pub fn to_dense(&self, num_vars: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_vars];
        for &(v, s) in &self.pairs {
            if v < num_vars {
                out[v] = Some(s);
            }
        }
        out
    }

    /// True when every one of `num_vars` variables is observed.
    pub fn covers_all(&self, num_vars: usize) -> bool {
        self.pairs.len() == num_vars && self.pairs.iter().enumerate().all(|(k, &(v, _))| k == v)
    }
}

/// Sufficient statistics `Φ(x)`, laid out like the parameter vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatsVector(pub Vec<f64>);

impl StatsVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Deref for StatsVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for StatsVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A discrete EBM: variables, per-variable unaries and factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct FactorGraph {
    cards: Vec<usize>,
    unary_offsets: Vec<usize>,
    unaries: Vec<f64>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    /// A graph with the given cardinalities, zero unaries and no factors.
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if let Some(i) = cardinalities.iter().position(|&c| c < 2) {
            return Err(Error::structural(format!(
                "variable {i} has cardinality {} (< 2)",
                cardinalities[i]
            )));
        }
        let mut unary_offsets = Vec::with_capacity(cardinalities.len() + 1);
        let mut acc = 0;
        for &c in &cardinalities {
            unary_offsets.push(acc);
            acc += c;
        }
        unary_offsets.push(acc);
        Ok(Self {
            cards: cardinalities,
            unary_offsets,
            unaries: vec![0.0; acc],
            factors: Vec::new(),
        })
    }

    /// A graph of `n` binary variables.
    pub fn binary(n: usize) -> Self {
        Self::new(vec![2; n]).expect("binary cardinalities are valid")
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.cards[var]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn variables(&self) -> impl Iterator<Item = VariableSpec> + '_ {
        self.cards
            .iter()
            .enumerate()
            .map(|(id, &cardinality)| VariableSpec { id, cardinality })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Total number of unary entries, `Σ_i |x_i|`.
    pub fn num_unary_states(&self) -> usize {
        self.unaries.len()
    }

    /// Offset of each variable's block in the flat unary vector (plus the
    /// total length as the last entry).
    pub fn unary_offsets(&self) -> &[usize] {
        &self.unary_offsets
    }

    pub fn unary(&self, var: usize) -> &[f64] {
        &self.unaries[self.unary_offsets[var]..self.unary_offsets[var + 1]]
    }

    pub fn unaries_flat(&self) -> &[f64] {
        &self.unaries
    }

    pub fn set_unary(&mut self, var: usize, values: &[f64]) -> Result<()> {
        if var >= self.num_vars() {
            return Err(Error::structural(format!("no variable {var}")));
        }
        if values.len() != self.cards[var] {
            return Err(Error::structural(format!(
                "unary for variable {var} has length {} (cardinality {})",
                values.len(),
                self.cards[var]
            )));
        }
        let start = self.unary_offsets[var];
        self.unaries[start..start + values.len()].copy_from_slice(values);
        Ok(())
    }

    /// Appends a factor after validating its neighbours and parameters.
    pub fn add_factor(&mut self, neighbors: Vec<usize>, kind: FactorKind) -> Result<usize> {
        self.check_factor(&neighbors, &kind)?;
        self.factors.push(Factor { neighbors, kind });
        Ok(self.factors.len() - 1)
    }

    fn check_factor(&self, neighbors: &[usize], kind: &FactorKind) -> Result<()> {
        if neighbors.is_empty() {
            return Err(Error::structural("factor without neighbours"));
        }
        for (k, &v) in neighbors.iter().enumerate() {
            if v >= self.num_vars() {
                return Err(Error::structural(format!("factor neighbour {v} is not a variable")));
            }
            if neighbors[..k].contains(&v) {
                return Err(Error::structural(format!("variable {v} appears twice in a factor")));
            }
        }
        let all_binary = || {
            if neighbors.iter().all(|&v| self.cards[v] == 2) {
                Ok(())
            } else {
                Err(Error::structural("structured factor over a non-binary variable"))
            }
        };
        match kind {
            FactorKind::DenseTable { table } => {
                let states: u128 = neighbors.iter().map(|&v| self.cards[v] as u128).product();
                if table.len() as u128 != states {
                    return Err(Error::structural(format!(
                        "dense table has {} entries, neighbours have {states} joint states",
                        table.len()
                    )));
                }
            }
            FactorKind::IsingEdge { .. } => {
                if neighbors.len() != 2 {
                    return Err(Error::structural("Ising edge needs exactly two neighbours"));
                }
                all_binary()?;
            }
            FactorKind::RbmBlock {
                n_visible,
                n_hidden,
                weights,
            } => {
                if neighbors.len() != n_visible + n_hidden {
                    return Err(Error::structural(format!(
                        "RBM block expects {} neighbours, got {}",
                        n_visible + n_hidden,
                        neighbors.len()
                    )));
                }
                if weights.len() != n_visible * n_hidden {
                    return Err(Error::structural(format!(
                        "RBM block weights have length {} (expected {}×{})",
                        weights.len(),
                        n_hidden,
                        n_visible
                    )));
                }
                all_binary()?;
            }
            FactorKind::Or => {
                if neighbors.len() < 2 {
                    return Err(Error::structural("OR factor needs at least one top variable"));
                }
                all_binary()?;
            }
            FactorKind::And => {
                if neighbors.len() != 3 {
                    return Err(Error::structural("AND factor needs exactly two tops and one bottom"));
                }
                all_binary()?;
            }
        }
        Ok(())
    }

    /// Number of entries of `Θ`.
    pub fn num_params(&self) -> usize {
        self.unaries.len() + self.factors.iter().map(|f| f.kind.num_params()).sum::<usize>()
    }

    /// Offset of each factor's parameter block inside `Θ`.
    pub fn factor_param_offsets(&self) -> Vec<usize> {
        let mut acc = self.unaries.len();
        self.factors
            .iter()
            .map(|f| {
                let off = acc;
                acc += f.kind.num_params();
                off
            })
            .collect()
    }

    /// The full parameter vector `Θ`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.unaries);
        for f in &self.factors {
            out.extend_from_slice(f.kind.params());
        }
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::structural(format!(
                "parameter vector has length {} (expected {})",
                theta.len(),
                self.num_params()
            )));
        }
        let (un, mut rest) = theta.split_at(self.unaries.len());
        self.unaries.copy_from_slice(un);
        for f in &mut self.factors {
            let p = f.kind.params_mut();
            let (head, tail) = rest.split_at(p.len());
            p.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Marks the entries of `Θ` that are coupling weights (`IsingEdge`,
    /// `RbmBlock`).
    pub fn pairwise_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.unaries.len()];
        for f in &self.factors {
            mask.extend(std::iter::repeat_n(f.kind.is_pairwise(), f.kind.num_params()));
        }
        mask
    }

    pub fn check_assignment(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::structural(format!(
                "assignment has {} values for {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        if let Some(i) = x.iter().zip(&self.cards).position(|(&s, &c)| s >= c) {
            return Err(Error::structural(format!(
                "state {} out of range for variable {i} (cardinality {})",
                x[i], self.cards[i]
            )));
        }
        Ok(())
    }

    /// `Θᵀ Φ(x)` plus the hard-constraint scores; no validation.
    pub fn log_score(&self, x: &[usize]) -> f64 {
        let mut acc: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &s)| self.unaries[self.unary_offsets[i] + s])
            .sum();
        let mut buf = Vec::new();
        for f in &self.factors {
            buf.clear();
            buf.extend(f.neighbors.iter().map(|&v| x[v]));
            acc += f.log_potential(&buf, &self.cards);
        }
        acc
    }

    /// `E(x) = -Σ_a φ_a(x_a) - Σ_i φ_i(x_i)`.
    pub fn energy(&self, x: &[usize]) -> Result<f64> {
        self.check_assignment(x)?;
        Ok(-self.log_score(x))
    }

    /// `Φ(x)`; satisfies `Θ · Φ(x) = -E(x)` whenever no hard constraint is
    /// violated.
    pub fn sufficient_stats(&self, x: &[usize]) -> Result<StatsVector> {
        self.check_assignment(x)?;
        let mut out = StatsVector::zeros(self.num_params());
        self.add_stats(x, &mut out);
        Ok(out)
    }

    /// Adds `Φ(x)` into `out` (length `num_params`); no validation.
    pub fn add_stats(&self, x: &[usize], out: &mut [f64]) {
        for (i, &s) in x.iter().enumerate() {
            out[self.unary_offsets[i] + s] += 1.0;
        }
        let mut off = self.unaries.len();
        let mut buf = Vec::new();
        for f in &self.factors {
            let n = f.kind.num_params();
            buf.clear();
            buf.extend(f.neighbors.iter().map(|&v| x[v]));
            f.add_stats(&buf, &self.cards, &mut out[off..off + n]);
            off += n;
        }
    }

    /// Replaces the unaries of observed variables by `0` at the observed
    /// state and [`CLAMP_SCORE`] elsewhere.
    pub fn clamp(&self, evidence: &Evidence) -> Result<FactorGraph> {
        let mut g = self.clone();
        g.clamp_in_place(evidence)?;
        Ok(g)
    }

    pub fn clamp_in_place(&mut self, evidence: &Evidence) -> Result<()> {
        for (v, s) in evidence.iter() {
            if v >= self.num_vars() {
                return Err(Error::structural(format!("evidence on missing variable {v}")));
            }
            if s >= self.cards[v] {
                return Err(Error::structural(format!(
                    "evidence state {s} out of range for variable {v} (cardinality {})",
                    self.cards[v]
                )));
            }
            let start = self.unary_offsets[v];
            for k in 0..self.cards[v] {
                self.unaries[start + k] = if k == s { 0.0 } else { CLAMP_SCORE };
            }
        }
        Ok(())
    }

    /// For every variable, the `(factor, slot)` pairs it appears in.
    pub fn variable_factors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_vars()];
        for (a, f) in self.factors.iter().enumerate() {
            for (slot, &v) in f.neighbors.iter().enumerate() {
                adj[v].push((a, slot));
            }
        }
        adj
    }

    /// Number of joint states of all variables.
    pub fn joint_states(&self) -> u128 {
        self.cards
            .iter()
            .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
            .unwrap_or(u128::MAX)
    }

    /// The factor rewritten as an explicit [`FactorKind::DenseTable`].
    pub fn to_dense_table(&self, factor: usize) -> Result<Factor> {
        let f = &self.factors[factor];
        let cards: Vec<usize> = f.neighbors.iter().map(|&v| self.cards[v]).collect();
        let size: u128 = cards.iter().map(|&c| c as u128).product();
        if size > crate::max_product::DENSE_STATE_BUDGET as u128 {
            return Err(Error::Capacity {
                what: format!("dense expansion of factor {factor}"),
                required: size,
                budget: crate::max_product::DENSE_STATE_BUDGET as u128,
            });
        }
        let mut table = Vec::with_capacity(size as usize);
        for states in AssignmentIter::new(&cards) {
            table.push(f.log_potential(&states, &self.cards));
        }
        Ok(Factor {
            neighbors: f.neighbors.clone(),
            kind: FactorKind::DenseTable { table },
        })
    }
}

/// Odometer over all joint states, last position varying fastest (matches
/// the dense-table layout).
#[derive(Debug, Clone)]
pub struct AssignmentIter {
    cards: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl AssignmentIter {
    pub fn new(cards: &[usize]) -> Self {
        let current = if cards.contains(&0) {
            None
        } else {
            Some(vec![0; cards.len()])
        };
        Self {
            cards: cards.to_vec(),
            current,
        }
    }
}

impl Iterator for AssignmentIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < self.cards[k] {
                break;
            }
            cur[k] = 0;
        }
        Some(out)
    }
}

/// On-disk JSON document for a [`FactorGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDoc {
    variables: Vec<VariableSpec>,
    unaries: Vec<Vec<f64>>,
    factors: Vec<Factor>,
}

impl TryFrom<GraphDoc> for FactorGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        for (k, v) in doc.variables.iter().enumerate() {
            if v.id != k {
                return Err(Error::structural(format!(
                    "variable ids must be dense 0..n; position {k} has id {}",
                    v.id
                )));
            }
        }
        if doc.unaries.len() != doc.variables.len() {
            return Err(Error::structural(format!(
                "{} unary vectors for {} variables",
                doc.unaries.len(),
                doc.variables.len()
            )));
        }
        let mut g = FactorGraph::new(doc.variables.iter().map(|v| v.cardinality).collect())?;
        for (i, u) in doc.unaries.iter().enumerate() {
            g.set_unary(i, u)?;
        }
        for f in doc.factors {
            g.add_factor(f.neighbors, f.kind)?;
        }
        Ok(g)
    }
}

impl From<FactorGraph> for GraphDoc {
    fn from(g: FactorGraph) -> Self {
        GraphDoc {
            variables: g.variables().collect(),
            unaries: (0..g.num_vars()).map(|i| g.unary(i).to_vec()).collect(),
            factors: g.factors,
        }
    }
}

impl FactorGraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(theta: f64) -> FactorGraph {
        let mut g = FactorGraph::binary(4);
        for i in 0..4 {
            for j in i + 1..4 {
                g.add_factor(vec![i, j], FactorKind::IsingEdge { weight: theta }).unwrap();
            }
        }
        g
    }

    fn random_graph(rng: &mut ChaCha8Rng) -> FactorGraph {
        let mut g = FactorGraph::new(vec![2, 3, 2, 2, 2]).unwrap();
        for i in 0..5 {
            let u: Vec<f64> = (0..g.cardinality(i)).map(|_| rng.random_range(-1.0..1.0)).collect();
            g.set_unary(i, &u).unwrap();
        }
        let table: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        g.add_factor(vec![0, 1], FactorKind::DenseTable { table }).unwrap();
        g.add_factor(vec![2, 3], FactorKind::IsingEdge { weight: rng.random_range(-1.0..1.0) })
            .unwrap();
        let weights: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        g.add_factor(
            vec![0, 2, 4],
            FactorKind::RbmBlock { n_visible: 2, n_hidden: 1, weights },
        )
        .unwrap();
        g
    }

    #[test]
    fn unary_only_energy() {
        let mut g = FactorGraph::binary(1);
        g.set_unary(0, &[0.0, 0.7]).unwrap();
        assert_eq!(g.energy(&[1]).unwrap(), -0.7);
    }

    #[test]
    fn zero_weight_edge_has_zero_energy() {
        let mut g = FactorGraph::binary(2);
        g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 0.0 }).unwrap();
        for x in AssignmentIter::new(&[2, 2]) {
            assert_eq!(g.energy(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn toy_model_all_up_energy() {
        let g = toy(0.5);
        assert!((g.energy(&[1, 1, 1, 1]).unwrap() - (-3.0)).abs() < 1e-15);
    }

    #[test]
    fn indicator_and_pair_statistics() {
        let g = FactorGraph::binary(1);
        assert_eq!(g.sufficient_stats(&[1]).unwrap().0, vec![0.0, 1.0]);
        let mut g = FactorGraph::binary(2);
        g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 0.3 }).unwrap();
        let s = g.sufficient_stats(&[1, 0]).unwrap();
        assert_eq!(s[4], -1.0);
    }

    #[test]
    fn stats_dot_params_is_negative_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_graph(&mut rng);
            let theta = g.params();
            for x in AssignmentIter::new(g.cardinalities()) {
                let lhs = g.sufficient_stats(&x).unwrap().dot(&theta);
                let e = g.energy(&x).unwrap();
                assert!((lhs + e).abs() <= 1e-12 * (1.0 + e.abs()));
            }
        }
    }

    #[test]
    fn structured_kinds_match_dense_tables() {
        let mut g = FactorGraph::binary(5);
        g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 0.8 }).unwrap();
        g.add_factor(vec![0, 1, 2, 3], FactorKind::Or).unwrap();
        g.add_factor(vec![1, 2, 4], FactorKind::And).unwrap();
        g.add_factor(
            vec![3, 4, 0],
            FactorKind::RbmBlock { n_visible: 2, n_hidden: 1, weights: vec![0.4, -1.1] },
        )
        .unwrap();
        for a in 0..g.factors().len() {
            let dense = g.to_dense_table(a).unwrap();
            let f = &g.factors()[a];
            let cards = vec![2; f.neighbors.len()];
            for s in AssignmentIter::new(&cards) {
                assert_eq!(f.log_potential(&s, g.cardinalities()), dense.log_potential(&s, g.cardinalities()));
            }
        }
    }

    #[test]
    fn clamp_sets_sentinel_unaries() {
        let g = FactorGraph::binary(2);
        let c = g.clamp(&Evidence::from_pairs([(0, 1)])).unwrap();
        assert_eq!(c.unary(0), &[CLAMP_SCORE, 0.0]);
        assert_eq!(c.unary(1), &[0.0, 0.0]);
        assert_eq!(g.clamp(&Evidence::none()).unwrap(), g);
        let twice = c.clamp(&Evidence::from_pairs([(0, 1)])).unwrap();
        assert_eq!(twice, c);
        assert!(g.clamp(&Evidence::from_pairs([(1, 2)])).is_err());
    }

    #[test]
    fn clamped_map_equals_constrained_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut g = FactorGraph::binary(3);
            for i in 0..3 {
                g.set_unary(i, &[0.0, rng.random_range(-1.0..1.0)]).unwrap();
            }
            for (a, b) in [(0, 1), (1, 2)] {
                g.add_factor(vec![a, b], FactorKind::IsingEdge { weight: rng.random_range(-2.0..2.0) })
                    .unwrap();
            }
            let val = rng.random_range(0..2);
            let c = g.clamp(&Evidence::from_pairs([(1, val)])).unwrap();
            let best = |graph: &FactorGraph, filter: &dyn Fn(&[usize]) -> bool| {
                AssignmentIter::new(&[2, 2, 2])
                    .filter(|x| filter(x))
                    .max_by(|x, y| graph.log_score(x).total_cmp(&graph.log_score(y)))
                    .unwrap()
            };
            assert_eq!(best(&c, &|_| true), best(&g, &|x| x[1] == val));
        }
    }

    #[test]
    fn rejects_bad_structure() {
        let mut g = FactorGraph::new(vec![2, 3]).unwrap();
        assert!(g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 1.0 }).is_err());
        assert!(g.add_factor(vec![0, 2], FactorKind::DenseTable { table: vec![0.0; 4] }).is_err());
        assert!(g.add_factor(vec![0, 1], FactorKind::DenseTable { table: vec![0.0; 5] }).is_err());
        assert!(g.add_factor(vec![0, 0], FactorKind::DenseTable { table: vec![0.0; 4] }).is_err());
        assert!(FactorGraph::new(vec![1]).is_err());
        assert!(g.energy(&[0, 3]).is_err());
        assert!(g.energy(&[0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = random_graph(&mut rng);
        g.add_factor(vec![2, 3, 4], FactorKind::And).unwrap();
        let g = g.clamp(&Evidence::from_pairs([(1, 2)])).unwrap();
        let back = FactorGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(FactorGraph::from_json(r#"{"variables":[{"id":1,"cardinality":2}],"unaries":[[0,0]],"factors":[]}"#).is_err());
    }

    #[test]
    fn params_round_trip_and_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = random_graph(&mut rng);
        let mut p = g.params();
        assert_eq!(p.len(), g.num_params());
        p.iter_mut().for_each(|v| *v += 1.0);
        g.set_params(&p).unwrap();
        assert_eq!(g.params(), p);
        let mask = g.pairwise_mask();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
    }
}
