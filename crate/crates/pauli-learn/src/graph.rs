//! The pattern transfer graph of a Clifford gate set and its cycle/cut
//! decomposition.
//!
//! Vertices are the 2^n Pauli weight patterns; one directed edge per
//! (gate, Pauli) records how the gate moves that Pauli's pattern. Linear
//! functionals of log Pauli fidelities live in the edge space R^|E| with
//! the canonical gate-major, Pauli-index-minor edge order. Learnable
//! functionals are exactly the cycle space; the cut space is the gauge
//! (unlearnable) complement, so UDF = |V| - c = 2^n - c.
//!
//! Cut vectors here are oriented +1 on edges *entering* the selected vertex
//! set, which makes a cut gauge with parameter eta shift log fidelities by
//! exactly log(eta) times the cut vector (see [`crate::gauge`]).

use serde::Serialize;
use thiserror::Error;

use crate::clifford::{CliffordGate, GateSet};
use crate::pauli::{pattern_string, PauliOp};

/// Pattern graphs are exponential objects; refuse anything past desk scale.
pub const MAX_GRAPH_QUBITS: usize = 12;

/// Tolerance for rank decisions in the real Gaussian elimination. Basis
/// vectors have +-1/0 entries by construction, so this is conservative.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{0} qubits exceeds the pattern-graph limit of {MAX_GRAPH_QUBITS}")]
    TooLarge(usize),
    #[error("functional has {0} coefficients, graph has {1} edges")]
    DimensionMismatch(usize, usize),
    #[error("feasible-region gauge scan supports cut dimension 1 or 2, got {0}")]
    CutDimension(usize),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct GraphEdge {
    pub src: u64,
    pub dst: u64,
    pub gate: usize,
    pub pauli: u64,
}

/// Linear functional on log Pauli fidelities, as a dense coefficient vector
/// over the canonical edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFunctional(pub Vec<f64>);

impl EdgeFunctional {
    pub fn zeros(edge_count: usize) -> EdgeFunctional {
        EdgeFunctional(vec![0.0; edge_count])
    }

    pub fn from_entries(edge_count: usize, entries: &[(usize, f64)]) -> EdgeFunctional {
        let mut f = EdgeFunctional::zeros(edge_count);
        for &(idx, c) in entries {
            f.0[idx] += c;
        }
        f
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }
}

/// A cycle- or cut-space basis vector; entries are +-1 by construction.
#[derive(Clone, Debug, Serialize)]
pub struct BasisVector {
    pub entries: Vec<(usize, i8)>,
}

impl BasisVector {
    pub fn to_functional(&self, edge_count: usize) -> EdgeFunctional {
        EdgeFunctional::from_entries(
            edge_count,
            &self.entries.iter().map(|&(i, c)| (i, c as f64)).collect::<Vec<_>>(),
        )
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, c)| c as f64 * dense[i]).sum()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Cycle,
    Cut,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceBasis {
    pub kind: SpaceKind,
    pub vectors: Vec<BasisVector>,
    pub edge_count: usize,
}

impl SpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Clone, Debug)]
pub struct PatternGraph {
    n: usize,
    gate_names: Vec<String>,
    edges: Vec<GraphEdge>,
    comp_id: Vec<usize>,
    comp_count: usize,
}

impl PatternGraph {
    /// Builds the graph: exactly |gates| * 4^n edges, self-loops and
    /// parallel edges preserved.
    pub fn build(gates: &GateSet) -> Result<PatternGraph, GraphError> {
        let n = gates.n();
        if n > MAX_GRAPH_QUBITS {
            return Err(GraphError::TooLarge(n));
        }
        let size = 1u64 << (2 * n);
        let mut edges = Vec::with_capacity(gates.len() << (2 * n));
        for (gi, gate) in gates.gates().iter().enumerate() {
            for a in 0..size {
                let p = PauliOp::from_index(n, a);
                let img = gate.conjugate(&p);
                edges.push(GraphEdge { src: p.pattern(), dst: img.pattern(), gate: gi, pauli: a });
            }
        }
        // Weakly connected components by union-find.
        let vcount = 1usize << n;
        let mut parent: Vec<usize> = (0..vcount).collect();
        fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for e in &edges {
            let (a, b) = (find(&mut parent, e.src as usize), find(&mut parent, e.dst as usize));
            if a != b {
                parent[a] = b;
            }
        }
        let mut comp_id = vec![usize::MAX; vcount];
        let mut comp_count = 0;
        for v in 0..vcount {
            let root = find(&mut parent, v);
            if comp_id[root] == usize::MAX {
                comp_id[root] = comp_count;
                comp_count += 1;
            }
            comp_id[v] = comp_id[root];
        }
        Ok(PatternGraph {
            n,
            gate_names: gates.gates().iter().map(|g| g.name().to_string()).collect(),
            edges,
            comp_id,
            comp_count,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gate_names(&self) -> &[String] {
        &self.gate_names
    }

    pub fn vertex_count(&self) -> usize {
        1 << self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &GraphEdge {
        &self.edges[idx]
    }

    /// Canonical index of the edge for (gate, Pauli index).
    pub fn edge_index(&self, gate: usize, pauli: u64) -> usize {
        (gate << (2 * self.n)) + pauli as usize
    }

    pub fn component_count(&self) -> usize {
        self.comp_count
    }

    /// Vertex partition into weakly connected components.
    pub fn components(&self) -> Vec<Vec<u64>> {
        let mut parts = vec![Vec::new(); self.comp_count];
        for v in 0..self.vertex_count() {
            parts[self.comp_id[v]].push(v as u64);
        }
        parts
    }

    /// Unlearnable degrees of freedom: 2^n - c.
    pub fn udf(&self) -> usize {
        self.vertex_count() - self.comp_count
    }

    /// Learnable degrees of freedom: |E| - UDF.
    pub fn ldf(&self) -> usize {
        self.edge_count() - self.udf()
    }

    /// Fundamental-cycle basis from a BFS spanning forest. Tree edges are
    /// chosen in canonical edge order; every non-tree edge closes one basis
    /// cycle with +-1 entries. dim = |E| - |V| + c.
    pub fn cycle_space(&self) -> SpaceBasis {
        let vcount = self.vertex_count();
        // Adjacency in canonical edge order (undirected incidence).
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vcount];
        for (idx, e) in self.edges.iter().enumerate() {
            incident[e.src as usize].push(idx);
            if e.src != e.dst {
                incident[e.dst as usize].push(idx);
            }
        }
        let mut parent_edge: Vec<Option<usize>> = vec![None; vcount];
        let mut depth = vec![0usize; vcount];
        let mut visited = vec![false; vcount];
        let mut tree_edge = vec![false; self.edges.len()];
        for root in 0..vcount {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &ei in &incident[v] {
                    let e = &self.edges[ei];
                    let other = if e.src as usize == v { e.dst as usize } else { e.src as usize };
                    if !visited[other] {
                        visited[other] = true;
                        tree_edge[ei] = true;
                        parent_edge[other] = Some(ei);
                        depth[other] = depth[v] + 1;
                        queue.push_back(other);
                    }
                }
            }
        }
        // Walks one step toward the root; returns (next vertex, signed entry
        // for traversing the parent edge from `v` upward).
        let step_up = |v: usize| -> (usize, usize, i8) {
            let ei = parent_edge[v].expect("non-root vertex has a parent");
            let e = &self.edges[ei];
            if e.dst as usize == v {
                // Edge points down toward v; walking up traverses it backward.
                (e.src as usize, ei, -1)
            } else {
                (e.dst as usize, ei, 1)
            }
        };
        let mut vectors = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            if tree_edge[ei] {
                continue;
            }
            let mut entries = vec![(ei, 1i8)];
            if e.src != e.dst {
                // Tree path from dst back to src: lift both endpoints to the
                // common ancestor. Signs follow the traversal direction of
                // the closed walk src -(e)-> dst -(tree)-> src.
                let (mut u, mut v) = (e.src as usize, e.dst as usize);
                let mut up_from_v: Vec<(usize, i8)> = Vec::new();
                let mut up_from_u: Vec<(usize, i8)> = Vec::new();
                while depth[v] > depth[u] {
                    let (nv, ei2, s) = step_up(v);
                    up_from_v.push((ei2, s));
                    v = nv;
                }
                while depth[u] > depth[v] {
                    let (nu, ei2, s) = step_up(u);
                    up_from_u.push((ei2, s));
                    u = nu;
                }
                while u != v {
                    let (nv, ei2, s) = step_up(v);
                    up_from_v.push((ei2, s));
                    v = nv;
                    let (nu, ei2, s) = step_up(u);
                    up_from_u.push((ei2, s));
                    u = nu;
                }
                entries.extend(up_from_v);
                // The src-side segment is traversed downward in the walk.
                entries.extend(up_from_u.into_iter().map(|(i, s)| (i, -s)));
            }
            entries.sort_by_key(|&(i, _)| i);
            vectors.push(BasisVector { entries });
        }
        debug_assert_eq!(
            vectors.len(),
            self.edge_count() - self.vertex_count() + self.comp_count
        );
        SpaceBasis { kind: SpaceKind::Cycle, vectors, edge_count: self.edge_count() }
    }

    /// Vertex-indicator cut basis: one cut ({v}, rest) per vertex except one
    /// representative per component. Entries are +1 on edges entering v,
    /// -1 on edges leaving v; self-loops never cross. dim = |V| - c.
    pub fn cut_space(&self) -> SpaceBasis {
        let mut rep_seen = vec![false; self.comp_count];
        let mut vectors = Vec::new();
        for v in 0..self.vertex_count() as u64 {
            let comp = self.comp_id[v as usize];
            if !rep_seen[comp] {
                rep_seen[comp] = true;
                continue;
            }
            let entries = self.cut_vector_entries(&[v]);
            vectors.push(BasisVector { entries });
        }
        debug_assert_eq!(vectors.len(), self.vertex_count() - self.comp_count);
        SpaceBasis { kind: SpaceKind::Cut, vectors, edge_count: self.edge_count() }
    }

    /// Signed indicator of the cut (v1, complement): +1 entering v1, -1
    /// leaving v1.
    pub fn cut_vector_entries(&self, v1: &[u64]) -> Vec<(usize, i8)> {
        let inside = |p: u64| v1.contains(&p);
        let mut entries = Vec::new();
        for (idx, e) in self.edges.iter().enumerate() {
            let s = i8::from(inside(e.dst)) - i8::from(inside(e.src));
            if s != 0 {
                entries.push((idx, s));
            }
        }
        entries
    }

    /// Orthogonal projection of a functional onto the cut space: the
    /// gauge-dependent part.
    pub fn cut_component(&self, f: &EdgeFunctional) -> Result<EdgeFunctional, GraphError> {
        if f.0.len() != self.edge_count() {
            return Err(GraphError::DimensionMismatch(f.0.len(), self.edge_count()));
        }
        let basis = self.cut_space();
        let k = basis.dim();
        let mut gram = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for (i, u) in basis.vectors.iter().enumerate() {
            rhs[i] = u.dot_dense(&f.0);
            for (j, w) in basis.vectors.iter().enumerate().skip(i) {
                let mut dot = 0.0;
                let mut it = u.entries.iter().peekable();
                let mut jt = w.entries.iter().peekable();
                while let (Some(&&(ia, ca)), Some(&&(ib, cb))) = (it.peek(), jt.peek()) {
                    match ia.cmp(&ib) {
                        std::cmp::Ordering::Less => {
                            it.next();
                        }
                        std::cmp::Ordering::Greater => {
                            jt.next();
                        }
                        std::cmp::Ordering::Equal => {
                            dot += ca as f64 * cb as f64;
                            it.next();
                            jt.next();
                        }
                    }
                }
                gram[i][j] = dot;
                gram[j][i] = dot;
            }
        }
        let coeffs = solve_dense(gram, rhs);
        let mut out = EdgeFunctional::zeros(self.edge_count());
        for (c, u) in coeffs.iter().zip(&basis.vectors) {
            for &(idx, s) in &u.entries {
                out.0[idx] += c * s as f64;
            }
        }
        Ok(out)
    }

    /// Learnable iff the cut-space component is negligible relative to f.
    /// Returns the gauge-dependent residual either way.
    pub fn is_learnable(
        &self,
        f: &EdgeFunctional,
        tol: f64,
    ) -> Result<Learnability, GraphError> {
        let residual = self.cut_component(f)?;
        let fnorm = f.norm();
        let rnorm = residual.norm();
        Ok(Learnability { learnable: rnorm <= tol * fnorm.max(1e-300), residual_norm: rnorm, residual })
    }

    pub fn in_cycle_space(&self, f: &EdgeFunctional, tol: f64) -> bool {
        self.is_learnable(f, tol).map(|v| v.learnable).unwrap_or(false)
    }

    pub fn edge_label(&self, idx: usize) -> String {
        let e = &self.edges[idx];
        let pauli = PauliOp::from_index(self.n, e.pauli);
        if self.gate_names.len() == 1 {
            format!("{pauli}")
        } else {
            format!("{pauli}^{}", self.gate_names[e.gate])
        }
    }

    /// DOT rendering of the graph (multi-edges merged per label list).
    pub fn to_dot(&self) -> String {
        use std::collections::BTreeMap;
        let mut grouped: BTreeMap<(u64, u64), Vec<String>> = BTreeMap::new();
        for (idx, e) in self.edges.iter().enumerate() {
            grouped.entry((e.src, e.dst)).or_default().push(self.edge_label(idx));
        }
        let mut out = String::from("digraph pattern_transfer {\n  rankdir=LR;\n");
        for v in 0..self.vertex_count() as u64 {
            out.push_str(&format!("  v{} [label=\"{}\"];\n", v, pattern_string(v, self.n)));
        }
        for ((src, dst), labels) in grouped {
            out.push_str(&format!(
                "  v{} -> v{} [label=\"{}\"];\n",
                src,
                dst,
                labels.join(",")
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug)]
pub struct Learnability {
    pub learnable: bool,
    pub residual_norm: f64,
    pub residual: EdgeFunctional,
}

/// Individual Pauli-fidelity learnability: pattern preservation (and, under
/// the no-crosstalk embedding, unchanged by construction).
pub fn learnable_individual(g: &CliffordGate, a: &PauliOp) -> bool {
    g.conjugate(a).pattern() == a.pattern()
}

/// Gaussian elimination with partial pivoting; panics on a numerically
/// singular system (the Gram matrices used here are positive definite).
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let k = m.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        assert!(m[pivot][col].abs() > RANK_TOL, "singular system in cut projection");
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in 0..k {
            if r != col && m[r][col] != 0.0 {
                let factor = m[r][col] / m[col][col];
                for c in col..k {
                    m[r][c] -= factor * m[col][c];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    (0..k).map(|i| rhs[i] / m[i][i]).collect()
}

/// Incremental rank tracker over R with tolerance.
pub(crate) struct RankTracker {
    rows: Vec<Vec<f64>>,
    pivots: Vec<usize>,
}

impl RankTracker {
    pub fn new() -> RankTracker {
        RankTracker { rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the stored rows; if independent, stores it and
    /// returns true.
    pub fn try_add(&mut self, mut v: Vec<f64>) -> bool {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let factor = v[p] / row[p];
            if factor != 0.0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= factor * b;
                }
            }
        }
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i);
        match pivot {
            Some(p) if v[p].abs() > RANK_TOL => {
                self.rows.push(v);
                self.pivots.push(p);
                true
            }
            _ => false,
        }
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        let mut v = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let factor = v[p] / row[p];
            if factor != 0.0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= factor * b;
                }
            }
        }
        v.iter().all(|x| x.abs() <= RANK_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{circ, cnot, swap, GateSet};

    fn graph_of(gates: Vec<crate::clifford::CliffordGate>) -> PatternGraph {
        PatternGraph::build(&GateSet::new(gates).unwrap()).unwrap()
    }

    fn functional(g: &PatternGraph, entries: &[(&str, f64)]) -> EdgeFunctional {
        let pairs: Vec<(usize, f64)> = entries
            .iter()
            .map(|&(s, c)| {
                let p: PauliOp = s.parse().unwrap();
                (g.edge_index(0, p.index()), c)
            })
            .collect();
        EdgeFunctional::from_entries(g.edge_count(), &pairs)
    }

    #[test]
    fn cnot_graph_shape() {
        let g = graph_of(vec![cnot()]);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 16);
        // CNOT maps IZ -> ZZ: edge 01 -> 11 (pattern bit j = qubit j).
        let iz: PauliOp = "IZ".parse().unwrap();
        let e = g.edge(g.edge_index(0, iz.index()));
        assert_eq!(e.src, 0b10);
        assert_eq!(e.dst, 0b11);
        assert_eq!(g.component_count(), 2);
        assert_eq!(g.udf(), 2);
    }

    #[test]
    fn swap_graph_shape() {
        let g = graph_of(vec![swap()]);
        assert_eq!(g.edge_count(), 16);
        // All weight-2 Paulis self-loop at vertex 11.
        for a in 0..16u64 {
            let p = PauliOp::from_index(2, a);
            if p.weight() == 2 {
                let e = g.edge(g.edge_index(0, a));
                assert_eq!((e.src, e.dst), (3, 3));
            }
        }
        assert_eq!(g.component_count(), 3);
        assert_eq!(g.udf(), 1);
    }

    #[test]
    fn identity_gate_all_self_loops() {
        let g = graph_of(vec![crate::clifford::CliffordGate::identity(1)]);
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().iter().all(|e| e.src == e.dst));
        let basis = g.cycle_space();
        assert_eq!(basis.dim(), 4);
        assert!(basis.vectors.iter().all(|v| v.entries.len() == 1));
        assert_eq!(g.cut_space().dim(), 0);
    }

    #[test]
    fn table_s2_dimensions() {
        let cases: Vec<(PatternGraph, usize, usize)> = vec![
            (graph_of(vec![cnot()]), 16, 2),
            (graph_of(vec![swap()]), 16, 1),
            (graph_of(vec![cnot(), swap()]), 32, 2),
            (
                graph_of(vec![
                    cnot().embed(&[0, 1], 3).unwrap().with_name("CNOT12"),
                    cnot().embed(&[1, 2], 3).unwrap().with_name("CNOT23"),
                    cnot().embed(&[2, 0], 3).unwrap().with_name("CNOT31"),
                ]),
                192,
                6,
            ),
            (graph_of(vec![circ(3)]), 64, 4),
        ];
        for (g, params, udf) in cases {
            assert_eq!(g.edge_count(), params);
            assert_eq!(g.udf(), udf);
            assert_eq!(g.cycle_space().dim() + g.cut_space().dim(), g.edge_count());
        }
    }

    #[test]
    fn three_cnot_ring_components() {
        let g = graph_of(vec![
            cnot().embed(&[0, 1], 3).unwrap().with_name("CNOT12"),
            cnot().embed(&[1, 2], 3).unwrap().with_name("CNOT23"),
            cnot().embed(&[2, 0], 3).unwrap().with_name("CNOT31"),
        ]);
        assert_eq!(g.component_count(), 2);
    }

    #[test]
    fn cycle_and_cut_spaces_are_orthogonal_complements() {
        for g in [graph_of(vec![cnot()]), graph_of(vec![swap()]), graph_of(vec![cnot(), swap()])] {
            let cycles = g.cycle_space();
            let cuts = g.cut_space();
            assert_eq!(cycles.dim() + cuts.dim(), g.edge_count());
            for cy in &cycles.vectors {
                let dense = cy.to_functional(g.edge_count());
                for cu in &cuts.vectors {
                    assert!(cu.dot_dense(&dense.0).abs() < 1e-10);
                }
            }
            // All basis vectors have +-1/0 entries.
            for v in cycles.vectors.iter().chain(&cuts.vectors) {
                assert!(v.entries.iter().all(|&(_, c)| c == 1 || c == -1));
            }
        }
    }

    #[test]
    fn every_edge_lies_on_a_circuit() {
        // Strong connectivity per component: Tarjan-free check via repeated
        // forward reachability. Desk scale, n = 2 only.
        for g in [graph_of(vec![cnot()]), graph_of(vec![cnot(), swap()])] {
            let v = g.vertex_count();
            let mut reach = vec![vec![false; v]; v];
            for i in 0..v {
                reach[i][i] = true;
            }
            for e in g.edges() {
                reach[e.src as usize][e.dst as usize] = true;
            }
            for k in 0..v {
                for i in 0..v {
                    for j in 0..v {
                        reach[i][j] |= reach[i][k] && reach[k][j];
                    }
                }
            }
            for e in g.edges() {
                assert!(reach[e.dst as usize][e.src as usize], "edge not on a circuit");
            }
        }
    }

    #[test]
    fn cnot_learnability_examples() {
        let g = graph_of(vec![cnot()]);
        let f = functional(&g, &[("IZ", 1.0), ("ZZ", 1.0)]);
        assert!(g.is_learnable(&f, 1e-9).unwrap().learnable);
        let f = functional(&g, &[("IZ", 1.0)]);
        assert!(!g.is_learnable(&f, 1e-9).unwrap().learnable);
        let f = functional(&g, &[("IX", 1.0)]);
        assert!(g.is_learnable(&f, 1e-9).unwrap().learnable);
    }

    #[test]
    fn individual_learnability_matches_single_edge_projection() {
        let gate = cnot();
        let g = graph_of(vec![cnot()]);
        for a in 0..16u64 {
            let p = PauliOp::from_index(2, a);
            let f = EdgeFunctional::from_entries(16, &[(g.edge_index(0, a), 1.0)]);
            assert_eq!(
                learnable_individual(&gate, &p),
                g.is_learnable(&f, 1e-9).unwrap().learnable,
                "disagreement on {p}"
            );
        }
    }

    #[test]
    fn embedding_does_not_change_individual_learnability() {
        // A gate acting on a subspace has the same per-Pauli learnability
        // after embedding: identity factors stay identity under
        // conjugation, so patterns are preserved exactly when they were.
        let small = cnot();
        for support in [[0usize, 1], [2, 0], [1, 2]] {
            let big = small.embed(&support, 3).unwrap();
            for a in 0..16u64 {
                let p2 = PauliOp::from_index(2, a);
                // Scatter the 2-qubit Pauli onto the support, identity
                // elsewhere.
                let mut p3 = PauliOp::identity(3);
                for (i, &q) in support.iter().enumerate() {
                    p3 = p3.with_digit(q, p2.digit(i));
                }
                assert_eq!(
                    learnable_individual(&small, &p2),
                    learnable_individual(&big, &p3),
                    "support {support:?}, Pauli {p2}"
                );
            }
            // Paulis supported off the gate's qubits are always learnable.
            let off = (0..3).find(|q| !support.contains(q)).unwrap();
            let x_off = PauliOp::identity(3).with_digit(off, 1);
            assert!(learnable_individual(&big, &x_off));
        }
    }

    #[test]
    fn single_qubit_gate_sets_have_no_gauge_freedom() {
        let s = crate::clifford::single_qubit_by_name("S").unwrap();
        let g = graph_of(vec![s]);
        assert_eq!(g.udf(), 0);
        assert_eq!(g.cut_space().dim(), 0);
        assert_eq!(g.cycle_space().dim(), 4);
        // Everything is learnable.
        for a in 0..4u64 {
            let f = EdgeFunctional::from_entries(4, &[(g.edge_index(0, a), 1.0)]);
            assert!(g.is_learnable(&f, 1e-9).unwrap().learnable);
        }
    }

    #[test]
    fn cnot_table_s1_classification() {
        let gate = cnot();
        let learnable = ["II", "ZI", "IX", "ZX", "XZ", "YY", "XY", "YZ"];
        let unlearnable = ["IZ", "XI", "ZZ", "XX", "IY", "YI", "ZY", "YX"];
        for s in learnable {
            assert!(learnable_individual(&gate, &s.parse().unwrap()), "{s}");
        }
        for s in unlearnable {
            assert!(!learnable_individual(&gate, &s.parse().unwrap()), "{s}");
        }
    }

    #[test]
    fn cross_gate_cycle_is_learnable() {
        let g = graph_of(vec![cnot(), swap()]);
        let iz: PauliOp = "IZ".parse().unwrap();
        let xx: PauliOp = "XX".parse().unwrap();
        let xi: PauliOp = "XI".parse().unwrap();
        let f = EdgeFunctional::from_entries(
            g.edge_count(),
            &[
                (g.edge_index(0, iz.index()), 1.0),
                (g.edge_index(0, xx.index()), 1.0),
                (g.edge_index(1, xi.index()), 1.0),
            ],
        );
        assert!(g.is_learnable(&f, 1e-9).unwrap().learnable);
    }

    #[test]
    fn udf_never_increases_when_adding_gates() {
        let single = graph_of(vec![cnot()]);
        let joint = graph_of(vec![cnot(), swap()]);
        assert!(joint.udf() >= single.udf());
        assert!(joint.component_count() <= single.component_count());
    }

    #[test]
    fn size_guard() {
        let g = crate::clifford::CliffordGate::identity(13);
        let set = GateSet::new(vec![g]).unwrap();
        assert!(matches!(PatternGraph::build(&set), Err(GraphError::TooLarge(13))));
    }

    mod properties {
        use super::*;
        use crate::clifford::{cnot, single_qubit_by_name, CliffordGate};
        use proptest::prelude::*;

        /// Random 2-qubit Clifford from a word in H, S, CNOT factors.
        fn gate_from_word(word: &[(u8, u8)]) -> CliffordGate {
            let h = single_qubit_by_name("H").unwrap();
            let s = single_qubit_by_name("S").unwrap();
            let mut gate = CliffordGate::identity(2);
            for &(kind, qubit) in word {
                let factor = match kind % 3 {
                    0 => h.embed(&[(qubit % 2) as usize], 2).unwrap(),
                    1 => s.embed(&[(qubit % 2) as usize], 2).unwrap(),
                    _ => cnot()
                        .embed(&[(qubit % 2) as usize, ((qubit + 1) % 2) as usize], 2)
                        .unwrap(),
                };
                gate = factor.compose(&gate).unwrap();
            }
            gate.with_name("G")
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn space_dimensions_and_orthogonality(
                word in proptest::collection::vec((0u8..3, 0u8..2), 1..24),
            ) {
                let set = GateSet::new(vec![gate_from_word(&word)]).unwrap();
                let g = PatternGraph::build(&set).unwrap();
                let cycles = g.cycle_space();
                let cuts = g.cut_space();
                prop_assert_eq!(
                    cycles.dim(),
                    g.edge_count() - g.vertex_count() + g.component_count()
                );
                prop_assert_eq!(cuts.dim(), g.udf());
                prop_assert_eq!(cycles.dim() + cuts.dim(), g.edge_count());
                for cy in &cycles.vectors {
                    let dense = cy.to_functional(g.edge_count());
                    for cu in &cuts.vectors {
                        prop_assert!(cu.dot_dense(&dense.0).abs() < 1e-10);
                    }
                }
                // Each cycle basis vector is learnable, each cut vector is not.
                for cy in cycles.vectors.iter().take(4) {
                    prop_assert!(g
                        .is_learnable(&cy.to_functional(g.edge_count()), 1e-9)
                        .unwrap()
                        .learnable);
                }
                for cu in cuts.vectors.iter().take(4) {
                    prop_assert!(!g
                        .is_learnable(&cu.to_functional(g.edge_count()), 1e-9)
                        .unwrap()
                        .learnable);
                }
            }
        }
    }
}
