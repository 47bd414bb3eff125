//! Learnable-basis reports: the cycle basis rewritten in human form, the
//! per-Pauli learnability table, UDF/LDF counts, and the Walsh-Hadamard
//! image giving the approximately-learnable error-rate combinations.

use serde::Serialize;

use crate::channel::wht_p_to_lambda;
use crate::clifford::GateSet;
use crate::graph::{EdgeFunctional, GraphError, PatternGraph, RankTracker};
use crate::pauli::{pattern_string, PauliOp};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Single self-loop edge: an individually learnable fidelity.
    Fidelity,
    /// Two antiparallel edges: a learnable product of two fidelities.
    Pair,
    /// A longer fundamental cycle.
    Cycle,
}

#[derive(Clone, Debug, Serialize)]
pub struct HumanBasisVector {
    pub label: String,
    /// (gate, Pauli, coefficient) triples.
    pub entries: Vec<(String, String, f64)>,
    pub kind: BasisKind,
}

fn entry_label(gates: &GateSet, entries: &[(String, String, f64)], prefix: &str) -> String {
    let multi = gates.len() > 1;
    entries
        .iter()
        .enumerate()
        .map(|(i, (g, p, c))| {
            let name = if multi { format!("{prefix}_{p}^{g}") } else { format!("{prefix}_{p}") };
            let term = if (c - 1.0).abs() < 1e-12 {
                name
            } else if (c + 1.0).abs() < 1e-12 {
                format!("-{name}")
            } else {
                format!("{c}*{name}")
            };
            if i == 0 {
                term
            } else if term.starts_with('-') {
                format!(" - {}", &term[1..])
            } else {
                format!(" + {term}")
            }
        })
        .collect()
}

/// Greedy human-readable cycle basis: self-loops first (individual
/// fidelities), then natural (a, G(a)) 2-cycles, then the remaining
/// antiparallel pairs, finally fundamental cycles to fill any rank gap.
/// For CNOT and SWAP this reproduces the published basis verbatim.
pub fn human_basis(graph: &PatternGraph, gates: &GateSet) -> Vec<HumanBasisVector> {
    let n = graph.n();
    let target = graph.edge_count() - graph.vertex_count() + graph.component_count();
    let mut tracker = RankTracker::new();
    let mut out: Vec<HumanBasisVector> = Vec::new();
    let push = |entries: Vec<(usize, u64, f64)>, kind: BasisKind, tracker: &mut RankTracker, out: &mut Vec<HumanBasisVector>| {
        let mut dense = vec![0.0; graph.edge_count()];
        for &(gi, a, c) in &entries {
            dense[graph.edge_index(gi, a)] += c;
        }
        if !tracker.try_add(dense) {
            return;
        }
        let named: Vec<(String, String, f64)> = entries
            .iter()
            .map(|&(gi, a, c)| {
                (
                    gates.gate(gi).name().to_string(),
                    PauliOp::from_index(n, a).to_string(),
                    c,
                )
            })
            .collect();
        out.push(HumanBasisVector { label: entry_label(gates, &named, "l"), entries: named, kind });
    };

    // Self-loops in canonical edge order.
    for e in graph.edges() {
        if e.src == e.dst {
            push(vec![(e.gate, e.pauli, 1.0)], BasisKind::Fidelity, &mut tracker, &mut out);
        }
    }
    // Natural orbit pairs (a, G(a)) with G^2(a) back on the start pattern.
    for e in graph.edges() {
        if e.src == e.dst {
            continue;
        }
        let g = gates.gate(e.gate);
        let img = g.conjugate(&PauliOp::from_index(n, e.pauli)).unsigned();
        let back = g.conjugate(&img).pattern();
        if back == e.src {
            push(
                vec![(e.gate, e.pauli, 1.0), (e.gate, img.index(), 1.0)],
                BasisKind::Pair,
                &mut tracker,
                &mut out,
            );
        }
    }
    // Remaining antiparallel pairs, canonical order, across gates too.
    if tracker.rank() < target {
        let edges = graph.edges();
        for (i, e1) in edges.iter().enumerate() {
            if e1.src == e1.dst {
                continue;
            }
            for (j, e2) in edges.iter().enumerate() {
                if j <= i || e2.src != e1.dst || e2.dst != e1.src {
                    continue;
                }
                push(
                    vec![(e1.gate, e1.pauli, 1.0), (e2.gate, e2.pauli, 1.0)],
                    BasisKind::Pair,
                    &mut tracker,
                    &mut out,
                );
            }
        }
    }
    // Fundamental cycles as filler.
    if tracker.rank() < target {
        for vector in graph.cycle_space().vectors {
            let entries: Vec<(usize, u64, f64)> = vector
                .entries
                .iter()
                .map(|&(idx, c)| {
                    let e = graph.edge(idx);
                    (e.gate, e.pauli, c as f64)
                })
                .collect();
            push(entries, BasisKind::Cycle, &mut tracker, &mut out);
            if tracker.rank() >= target {
                break;
            }
        }
    }
    debug_assert_eq!(tracker.rank(), target);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct IndividualEntry {
    pub gate: String,
    pub pauli: String,
    pub learnable: bool,
    pub src_pattern: String,
    pub dst_pattern: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub gates: Vec<String>,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub component_count: usize,
    /// |Lambda| = |gates| * 4^n.
    pub total_params: usize,
    pub udf: usize,
    pub ldf: usize,
    pub individual: Vec<IndividualEntry>,
    pub basis: Vec<HumanBasisVector>,
    /// Whether the per-gate Walsh-Hadamard image of the cycle space stays
    /// inside the cycle space for this gate set (observed for CNOT/SWAP;
    /// reported per gate set, no general claim).
    pub wht_invariant: bool,
    /// Basis combinations whose error-rate counterparts are approximately
    /// learnable (first-order in log fidelities).
    pub approx_learnable_errors: Vec<String>,
}

/// Builds the full learnability report for a gate set.
pub fn analyze(graph: &PatternGraph, gates: &GateSet) -> Result<AnalyzeReport, GraphError> {
    let n = graph.n();
    let size = 1u64 << (2 * n);
    let mut individual = Vec::new();
    for g in gates.gates() {
        for a in 0..size {
            let p = PauliOp::from_index(n, a);
            let img = g.conjugate(&p);
            individual.push(IndividualEntry {
                gate: g.name().to_string(),
                pauli: p.to_string(),
                learnable: img.pattern() == p.pattern(),
                src_pattern: pattern_string(p.pattern(), n),
                dst_pattern: pattern_string(img.pattern(), n),
            });
        }
    }
    let basis = human_basis(graph, gates);
    // Per-gate WHT image of each basis vector; the error combination
    // c . p is approximately learnable iff WHT(c)/4^n is in the cycle space,
    // and for the sparse basis combinations WHT(c) is exactly the candidate.
    let mut approx = Vec::new();
    let mut invariant = true;
    for vector in &basis {
        let mut image = EdgeFunctional::zeros(graph.edge_count());
        for gi in 0..gates.len() {
            let mut block = vec![0.0; size as usize];
            for (gname, pstr, c) in &vector.entries {
                if gname == gates.gate(gi).name() {
                    let p: PauliOp = pstr.parse().expect("basis Pauli is valid");
                    block[p.index() as usize] += c;
                }
            }
            let transformed = wht_p_to_lambda(&block).expect("block length 4^n");
            for (a, v) in transformed.iter().enumerate() {
                image.0[graph.edge_index(gi, a as u64)] = v / size as f64;
            }
        }
        if graph.in_cycle_space(&image, 1e-9) {
            approx.push(entry_label(gates, &vector.entries, "p"));
        } else {
            invariant = false;
        }
    }
    Ok(AnalyzeReport {
        n,
        gates: gates.gates().iter().map(|g| g.name().to_string()).collect(),
        vertex_count: graph.vertex_count(),
        edge_count: graph.edge_count(),
        component_count: graph.component_count(),
        total_params: graph.edge_count(),
        udf: graph.udf(),
        ldf: graph.ldf(),
        individual,
        basis,
        wht_invariant: invariant,
        approx_learnable_errors: approx,
    })
}

impl AnalyzeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        md.push_str(&format!(
            "# Learnability report: {{{}}} on {} qubits\n\n",
            self.gates.join(", "),
            self.n
        ));
        md.push_str(&format!(
            "- parameters |Lambda|: {}\n- pattern graph: {} vertices, {} edges, {} components\n",
            self.total_params, self.vertex_count, self.edge_count, self.component_count
        ));
        md.push_str(&format!(
            "- learnable degrees of freedom: {}\n- unlearnable degrees of freedom: {}\n\n",
            self.ldf, self.udf
        ));
        md.push_str("## Learnable basis (log fidelities)\n\n");
        for b in &self.basis {
            md.push_str(&format!("- `{}`\n", b.label));
        }
        md.push_str("\n## Approximately learnable error rates\n\n");
        md.push_str(&format!(
            "Cycle space invariant under per-gate WHT: **{}**\n\n",
            self.wht_invariant
        ));
        for label in &self.approx_learnable_errors {
            md.push_str(&format!("- `{}`\n", label));
        }
        md.push_str("\n## Individual Pauli fidelities\n\n");
        md.push_str("| gate | Pauli | pattern | learnable |\n|---|---|---|---|\n");
        for e in &self.individual {
            md.push_str(&format!(
                "| {} | {} | {} -> {} | {} |\n",
                e.gate,
                e.pauli,
                e.src_pattern,
                e.dst_pattern,
                if e.learnable { "yes" } else { "no" }
            ));
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{cnot, swap};

    fn report_for(gates: Vec<crate::clifford::CliffordGate>) -> AnalyzeReport {
        let set = GateSet::new(gates).unwrap();
        let graph = PatternGraph::build(&set).unwrap();
        analyze(&graph, &set).unwrap()
    }

    #[test]
    fn cnot_report_matches_published_basis() {
        let report = report_for(vec![cnot()]);
        assert_eq!(report.udf, 2);
        assert_eq!(report.ldf, 14);
        let labels: Vec<&str> = report.basis.iter().map(|b| b.label.as_str()).collect();
        let expected = [
            "l_II",
            "l_ZI",
            "l_IX",
            "l_ZX",
            "l_XZ",
            "l_YY",
            "l_XY",
            "l_YZ",
            "l_IZ + l_ZZ",
            "l_IY + l_ZY",
            "l_IZ + l_ZY",
            "l_XI + l_XX",
            "l_YI + l_YX",
            "l_XI + l_YX",
        ];
        for want in expected {
            assert!(labels.contains(&want), "missing {want}; got {labels:?}");
        }
        assert_eq!(report.basis.len(), 14);
        // Approximately learnable error rates mirror the basis (WHT
        // invariance holds for CNOT).
        assert!(report.wht_invariant);
        assert!(report.approx_learnable_errors.iter().any(|l| l == "p_IZ + p_ZZ"));
    }

    #[test]
    fn swap_report_has_fifteen_dims() {
        let report = report_for(vec![swap()]);
        assert_eq!(report.udf, 1);
        assert_eq!(report.basis.len(), 15);
        assert!(report.wht_invariant);
    }

    #[test]
    fn joint_set_report() {
        let report = report_for(vec![cnot(), swap()]);
        assert_eq!(report.udf, 2);
        assert_eq!(report.basis.len(), 30);
        // Gate superscripts appear in the labels, and the joint set's extra
        // learnable degree of freedom shows up as a cross-gate basis vector.
        assert!(report.basis.iter().any(|b| b.label.contains("^CNOT")));
        assert!(report.basis.iter().any(|b| {
            let gates: std::collections::BTreeSet<&str> =
                b.entries.iter().map(|(g, _, _)| g.as_str()).collect();
            gates.len() == 2
        }));
    }

    #[test]
    fn markdown_and_json_render() {
        let report = report_for(vec![cnot()]);
        let md = report.to_markdown();
        assert!(md.contains("unlearnable degrees of freedom: 2"));
        assert!(md.contains("| CNOT | IZ | 01 -> 11 | no |"));
        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed["udf"], 2);
    }
}
