//! Reduced LP relaxations for binary pairwise models and their mapping to
//! the standard local-polytope LP.
//!
//! Nothing here solves an LP. Programs are emitted in the CPLEX LP text
//! format for external solvers, and the reduced to standard mapping is
//! checked analytically.

mod format;

use std::collections::HashSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::max_product::ising::check_coupling;

pub use format::{parse_lp, serialize_lp};

/// Feasibility tolerance used when validating candidate points.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// Sparse `(variable, coefficient)` terms.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub maximize: bool,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// `(lower, upper)`; infinite values mean unbounded.
    pub bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new(maximize: bool) -> Self {
        Self {
            maximize,
            objective: Vec::new(),
            rows: Vec::new(),
            bounds: Vec::new(),
            names: Vec::new(),
        }
    }

    /// Adds a free variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.bounds.push((f64::NEG_INFINITY, f64::INFINITY));
        self.names.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if self.objective.len() != n || self.bounds.len() != n {
            return Err(Error::structural("objective, bounds and names differ in length"));
        }
        let mut seen = HashSet::new();
        for name in &self.names {
            if !seen.insert(name.as_str()) {
                return Err(Error::structural(format!("duplicate variable name {name}")));
            }
        }
        let mut seen = HashSet::new();
        for row in &self.rows {
            if !seen.insert(row.name.as_str()) {
                return Err(Error::structural(format!("duplicate row name {}", row.name)));
            }
            if row.coeffs.iter().any(|&(v, _)| v >= n) {
                return Err(Error::structural(format!("row {} references an unknown variable", row.name)));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks every row and bound; the error names the first violation.
    pub fn check_feasible(&self, x: &[f64], tol: f64) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::structural(format!(
                "point has {} entries, program has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        for row in &self.rows {
            let v = row.violation(x);
            if !(v <= tol) {
                return Err(Error::Validation {
                    constraint: row.name.clone(),
                    message: format!("violated by {v:e}"),
                });
            }
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(x[k] >= lo - tol && x[k] <= hi + tol) {
                return Err(Error::Validation {
                    constraint: format!("bound {}", self.names[k]),
                    message: format!("{} outside [{lo}, {hi}]", x[k]),
                });
            }
        }
        Ok(())
    }
}

/// Binary pairwise structure: node count and directed edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLayout {
    pub node_names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl PairLayout {
    /// Ordered pairs `(i, j)`, `i ≠ j`, in lexicographic order.
    pub fn ising_ordered(n: usize) -> Self {
        Self {
            node_names: (0..n).map(|i| format!("p_{i}")).collect(),
            edges: (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect(),
        }
    }

    /// Unordered pairs `i < j`.
    pub fn ising_halved(n: usize) -> Self {
        Self {
            node_names: (0..n).map(|i| format!("p_{i}")).collect(),
            edges: (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }

    /// Hidden nodes `0..m`, visible nodes `m..m+n`, one edge per weight.
    pub fn rbm(m: usize, n: usize) -> Self {
        let mut names: Vec<String> = (0..m).map(|i| format!("h_{i}")).collect();
        names.extend((0..n).map(|j| format!("v_{j}")));
        Self {
            node_names: names,
            edges: (0..m).flat_map(|i| (0..n).map(move |j| (i, m + j))).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    fn edge_name(&self, e: usize) -> String {
        let (i, j) = self.edges[e];
        format!("z_{}_{}", self.node_names[i], self.node_names[j])
    }

    fn reduced_var_name(&self, e: usize) -> String {
        let (i, j) = self.edges[e];
        let strip = |s: &str| s.split_once('_').map(|x| x.1.to_string()).unwrap_or_default();
        if self.node_names[i].starts_with("p_") {
            format!("q_{}_{}", strip(&self.node_names[i]), strip(&self.node_names[j]))
        } else {
            self.edge_name(e)
        }
    }
}

/// Reduced LP: node variables first, then one variable per edge.
pub fn reduced_lp(layout: &PairLayout, node_cost: &[f64], edge_cost: &[f64]) -> Result<LinearProgram> {
    let nn = layout.num_nodes();
    if node_cost.len() != nn || edge_cost.len() != layout.edges.len() {
        return Err(Error::structural("cost vectors do not match the layout"));
    }
    let mut lp = LinearProgram::new(true);
    for (k, name) in layout.node_names.iter().enumerate() {
        lp.add_var(name.clone(), node_cost[k]);
    }
    for e in 0..layout.edges.len() {
        lp.add_var(layout.reduced_var_name(e), edge_cost[e]);
    }
    for (e, &(i, j)) in layout.edges.iter().enumerate() {
        let q = nn + e;
        let name = &lp.names[q].clone();
        lp.add_row(format!("{name}_le_first"), vec![(q, 1.0), (i, -1.0)], Sense::Le, 0.0);
        lp.add_row(format!("{name}_le_second"), vec![(q, 1.0), (j, -1.0)], Sense::Le, 0.0);
        lp.add_row(format!("{name}_ge_sum"), vec![(i, 1.0), (j, 1.0), (q, -1.0)], Sense::Le, 1.0);
    }
    for k in 0..nn {
        lp.add_row(format!("{}_le_one", lp.names[k].clone()), vec![(k, 1.0)], Sense::Le, 1.0);
    }
    for e in 0..layout.edges.len() {
        let q = nn + e;
        lp.add_row(format!("{}_nonneg", lp.names[q].clone()), vec![(q, 1.0)], Sense::Ge, 0.0);
    }
    Ok(lp)
}

/// Standard local-polytope LP: two entries per node (states 0, 1), four per
/// edge (00, 01, 10, 11), normalization, marginalization, non-negativity.
pub fn standard_lp(layout: &PairLayout, node_cost: &[f64], edge_cost: &[f64]) -> Result<LinearProgram> {
    let nn = layout.num_nodes();
    if node_cost.len() != nn || edge_cost.len() != layout.edges.len() {
        return Err(Error::structural("cost vectors do not match the layout"));
    }
    let mut lp = LinearProgram::new(true);
    for (k, name) in layout.node_names.iter().enumerate() {
        lp.add_var(format!("mu_{name}_0"), 0.0);
        lp.add_var(format!("mu_{name}_1"), node_cost[k]);
    }
    for e in 0..layout.edges.len() {
        let base = layout.edge_name(e);
        for (s, cost) in ["00", "01", "10", "11"].iter().zip([0.0, 0.0, 0.0, edge_cost[e]]) {
            lp.add_var(format!("mu_{base}_{s}"), cost);
        }
    }
    for k in 0..nn {
        lp.add_row(format!("norm_{}", layout.node_names[k]), vec![(2 * k, 1.0), (2 * k + 1, 1.0)], Sense::Eq, 1.0);
    }
    for (e, &(i, j)) in layout.edges.iter().enumerate() {
        let q = 2 * nn + 4 * e;
        let base = layout.edge_name(e);
        for x in 0..2 {
            lp.add_row(
                format!("marg_{base}_first_{x}"),
                vec![(q + 2 * x, 1.0), (q + 2 * x + 1, 1.0), (2 * i + x, -1.0)],
                Sense::Eq,
                0.0,
            );
        }
        for y in 0..2 {
            lp.add_row(
                format!("marg_{base}_second_{y}"),
                vec![(q + y, 1.0), (q + 2 + y, 1.0), (2 * j + y, -1.0)],
                Sense::Eq,
                0.0,
            );
        }
    }
    for k in 0..lp.num_vars() {
        lp.bounds[k].0 = 0.0;
    }
    Ok(lp)
}

fn ising_costs(w: &Array2<f64>, b: &[f64], layout: &PairLayout, scale: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_coupling(w)?;
    if b.len() != w.nrows() {
        return Err(Error::structural("bias length differs from coupling size"));
    }
    Ok((b.to_vec(), layout.edges.iter().map(|&(i, j)| scale * w[[i, j]]).collect()))
}

/// Reduced Ising LP over ordered pairs: `n²` variables, `4n² - 3n` rows.
/// Its objective counts every coupling twice.
pub fn reduced_lp_ising(w: &Array2<f64>, b: &[f64]) -> Result<LinearProgram> {
    let layout = PairLayout::ising_ordered(b.len());
    let (nc, ec) = ising_costs(w, b, &layout, 1.0)?;
    reduced_lp(&layout, &nc, &ec)
}

/// Reduced Ising LP over pairs `i < j`. Coupling coefficients are doubled
/// so objective values agree with [`reduced_lp_ising`].
pub fn reduced_lp_ising_halved(w: &Array2<f64>, b: &[f64]) -> Result<LinearProgram> {
    let layout = PairLayout::ising_halved(b.len());
    let (nc, ec) = ising_costs(w, b, &layout, 2.0)?;
    reduced_lp(&layout, &nc, &ec)
}

/// Standard LP matching [`reduced_lp_ising`].
pub fn standard_lp_ising(w: &Array2<f64>, b: &[f64]) -> Result<LinearProgram> {
    let layout = PairLayout::ising_ordered(b.len());
    let (nc, ec) = ising_costs(w, b, &layout, 1.0)?;
    standard_lp(&layout, &nc, &ec)
}

fn rbm_costs(w: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<(PairLayout, Vec<f64>, Vec<f64>)> {
    let (m, n) = w.dim();
    if b.len() != m || c.len() != n {
        return Err(Error::structural(format!(
            "RBM weights are {m}×{n} but biases have lengths {} and {}",
            b.len(),
            c.len()
        )));
    }
    let layout = PairLayout::rbm(m, n);
    let mut nc = b.to_vec();
    nc.extend_from_slice(c);
    let ec = w.iter().copied().collect();
    Ok((layout, nc, ec))
}

/// Reduced RBM LP: hidden `h̃`, visible `ṽ`, then `z̃` in row-major order of `W` (m×n).
pub fn reduced_lp_rbm(w: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<LinearProgram> {
    let (layout, nc, ec) = rbm_costs(w, b, c)?;
    reduced_lp(&layout, &nc, &ec)
}

pub fn standard_lp_rbm(w: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<LinearProgram> {
    let (layout, nc, ec) = rbm_costs(w, b, c)?;
    standard_lp(&layout, &nc, &ec)
}

/// Maps a feasible reduced point to the standard LP variable order.
pub fn map_reduced_to_full_layout(reduced: &[f64], layout: &PairLayout) -> Result<Vec<f64>> {
    let nn = layout.num_nodes();
    let zeros = vec![0.0; layout.edges.len()];
    let check = reduced_lp(layout, &vec![0.0; nn], &zeros)?;
    check.check_feasible(reduced, FEASIBILITY_TOL)?;
    let mut out = Vec::with_capacity(2 * nn + 4 * layout.edges.len());
    for &p in &reduced[..nn] {
        out.push(1.0 - p);
        out.push(p);
    }
    for (e, &(i, j)) in layout.edges.iter().enumerate() {
        let (pi, pj, q) = (reduced[i], reduced[j], reduced[nn + e]);
        out.extend_from_slice(&[1.0 - pi - pj + q, pj - q, pi - q, q]);
    }
    Ok(out)
}

/// Ising ordered-pair form of [`map_reduced_to_full_layout`].
pub fn map_reduced_to_full(reduced: &[f64], n: usize) -> Result<Vec<f64>> {
    map_reduced_to_full_layout(reduced, &PairLayout::ising_ordered(n))
}

pub fn map_reduced_to_full_rbm(reduced: &[f64], m: usize, n: usize) -> Result<Vec<f64>> {
    map_reduced_to_full_layout(reduced, &PairLayout::rbm(m, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::AssignmentIter;
    use crate::models::{IsingModel, RbmModel};
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn ising_counts() {
        for n in 2..=20 {
            let lp = reduced_lp_ising(&Array2::zeros((n, n)), &vec![0.0; n]).unwrap();
            assert_eq!(lp.num_vars(), n * n);
            assert_eq!(lp.num_rows(), 4 * n * n - 3 * n);
            lp.validate().unwrap();
        }
        let lp = reduced_lp_ising(&Array2::zeros((2, 2)), &[0.0, 0.0]).unwrap();
        assert_eq!(lp.names, vec!["p_0", "p_1", "q_0_1", "q_1_0"]);
    }

    #[test]
    fn asymmetric_coupling_rejected() {
        let mut w = Array2::zeros((2, 2));
        w[[0, 1]] = 1.0;
        assert!(matches!(reduced_lp_ising(&w, &[0.0, 0.0]), Err(Error::Structural(_))));
        assert!(matches!(reduced_lp_rbm(&Array2::zeros((2, 3)), &[0.0; 3], &[0.0; 3]), Err(Error::Structural(_))));
    }

    #[test]
    fn rbm_smallest_instance() {
        let lp = reduced_lp_rbm(&Array2::from_elem((1, 1), 0.7), &[0.1], &[-0.2]).unwrap();
        assert_eq!(lp.num_vars(), 3);
        let pairwise = lp.rows.iter().filter(|r| r.coeffs.len() > 1).count();
        assert_eq!(pairwise, 3);
        assert_eq!(lp.objective, vec![0.1, -0.2, 0.7]);
    }

    #[test]
    fn zero_coupling_negative_bias_optimum_at_zero() {
        // Any feasible point has q̃ ≥ 0 and p̃ ≥ q̃, so p̃ ≥ 0 and the
        // objective Σ b p̃ is at most 0, attained at the origin.
        let n = 3;
        let lp = reduced_lp_ising(&Array2::zeros((n, n)), &[-1.0, -0.5, -2.0]).unwrap();
        let origin = vec![0.0; n * n];
        lp.check_feasible(&origin, 0.0).unwrap();
        assert_eq!(lp.objective_value(&origin), 0.0);
    }

    fn integer_point(n: usize, x: &[usize]) -> Vec<f64> {
        let layout = PairLayout::ising_ordered(n);
        let mut p: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        p.extend(layout.edges.iter().map(|&(i, j)| (x[i] * x[j]) as f64));
        p
    }

    #[test]
    fn integer_points_score_double_counted_energy() {
        let mut rng = stream_rng(11, 0, 0);
        for n in 2..=4 {
            let mut model = IsingModel::random(n, 1.0, 1.0, &mut rng);
            if n == 3 {
                model.w.mapv_inplace(f64::abs);
            }
            let lp = reduced_lp_ising(&model.w, &model.b).unwrap();
            for x in AssignmentIter::new(&vec![2; n]) {
                let point = integer_point(n, &x);
                lp.check_feasible(&point, 0.0).unwrap();
                let mut expect: f64 = (0..n).map(|i| model.b[i] * x[i] as f64).sum();
                for i in 0..n {
                    for j in i + 1..n {
                        expect += 2.0 * model.w[[i, j]] * (x[i] * x[j]) as f64;
                    }
                }
                assert!((lp.objective_value(&point) - expect).abs() < 1e-12);
                let halved = reduced_lp_ising_halved(&model.w, &model.b).unwrap();
                let mut hp: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                for i in 0..n {
                    for j in i + 1..n {
                        hp.push((x[i] * x[j]) as f64);
                    }
                }
                assert!((halved.objective_value(&hp) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_integer_products_are_infeasible_at_vertices() {
        // With p̃ ∈ {0,1}, the three pairwise rows pin q̃ to p̃_i p̃_j.
        let lp = reduced_lp_ising(&Array2::zeros((2, 2)), &[0.0, 0.0]).unwrap();
        assert!(lp.check_feasible(&[1.0, 1.0, 0.0, 1.0], 1e-12).is_err());
        assert!(lp.check_feasible(&[1.0, 0.0, 1.0, 0.0], 1e-12).is_err());
    }

    #[test]
    fn rbm_integer_vertices_reproduce_energies() {
        let mut rng = stream_rng(12, 0, 0);
        let w = Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0));
        let b = vec![0.3, -0.4];
        let c = vec![-0.1, 0.2];
        let model = RbmModel::new(w.clone(), b.clone(), c.clone()).unwrap();
        let lp = reduced_lp_rbm(&w, &b, &c).unwrap();
        let mut count = 0;
        for hv in AssignmentIter::new(&[2; 4]) {
            let (h, v) = (&hv[..2], &hv[2..]);
            let mut point: Vec<f64> = hv.iter().map(|&s| s as f64).collect();
            for i in 0..2 {
                for j in 0..2 {
                    point.push((h[i] * v[j]) as f64);
                }
            }
            lp.check_feasible(&point, 0.0).unwrap();
            // Model variables are visible first, then hidden.
            let x: Vec<usize> = v.iter().chain(h).copied().collect();
            let score = crate::models::EnergyModel::log_score(&model, &x);
            assert!((lp.objective_value(&point) - score).abs() < 1e-12);
            count += 1;
        }
        assert_eq!(count, 16);
    }

    #[test]
    fn mapping_examples() {
        let full = map_reduced_to_full(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(&full[4..8], &[0.0, 0.0, 0.0, 1.0]);
        let full = map_reduced_to_full(&[0.5, 0.5, 0.25, 0.25], 2).unwrap();
        assert_eq!(&full[4..8], &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(&full[..4], &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn infeasible_reduced_point_names_constraint() {
        match map_reduced_to_full(&[0.2, 0.5, 0.4, 0.1], 2) {
            Err(Error::Validation { constraint, .. }) => assert_eq!(constraint, "q_0_1_le_first"),
            other => panic!("unexpected {other:?}"),
        }
        match map_reduced_to_full(&[1.2, 0.5, 0.4, 0.4], 2) {
            Err(Error::Validation { constraint, .. }) => assert_eq!(constraint, "q_0_1_ge_sum"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
