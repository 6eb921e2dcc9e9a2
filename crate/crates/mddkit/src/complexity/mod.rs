//! Control-flow graphs and cyclomatic complexity: M = E - N + 2P, with E the
//! edge count, N the node count, and P the number of connected components of
//! the undirected skeleton. Risk tiers band M at 10/20/50.

mod extract;
mod graphfile;

pub use extract::{
    build_cfg_from_source, profile_named, sim_profile, ExtractedUnit, LanguageProfile,
};
pub use graphfile::build_cfg_from_graphfile;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowGraph {
    /// Agent class or function the graph describes.
    pub unit: String,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    /// Entry nodes, one per component when known.
    pub entries: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ComplexityError {
    #[error("control-flow graph `{0}` has no nodes")]
    EmptyGraph(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("complexity is undefined for M = {0}; M >= 1 required")]
    Domain(i64),
    #[error("no control-flow graphs to report on")]
    EmptyReport,
    #[error("no language profile named `{0}`")]
    UnsupportedDialect(String),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u32, message: String },
}

impl ControlFlowGraph {
    /// Builds a graph, checking edge endpoints and collapsing duplicate
    /// edges. Returns one warning per collapsed duplicate.
    pub fn build(
        unit: impl Into<String>,
        nodes: Vec<String>,
        edges: Vec<(String, String)>,
        entries: Vec<String>,
    ) -> Result<(Self, Vec<String>), ComplexityError> {
        let unit = unit.into();
        let node_set: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
        if node_set.len() != nodes.len() {
            return Err(ComplexityError::Schema {
                path: unit,
                message: "duplicate node ids".to_string(),
            });
        }
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        let mut deduped = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            for end in [&from, &to] {
                if !node_set.contains(end.as_str()) {
                    return Err(ComplexityError::Schema {
                        path: unit,
                        message: format!("edge endpoint `{end}` is not a declared node"),
                    });
                }
            }
            if seen.insert((from.clone(), to.clone())) {
                deduped.push((from, to));
            } else {
                warnings.push(format!("{unit}: duplicate edge {from} -> {to} collapsed"));
            }
        }
        Ok((Self { unit, nodes, edges: deduped, entries }, warnings))
    }

    /// Number of connected components of the undirected skeleton.
    pub fn component_count(&self) -> u64 {
        let mut adjacency: BTreeMap<&str, Vec<&str>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (from, to) in &self.edges {
            adjacency.get_mut(from.as_str()).unwrap().push(to);
            adjacency.get_mut(to.as_str()).unwrap().push(from);
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut components = 0;
        for node in self.nodes.iter().map(String::as_str) {
            if seen.contains(node) {
                continue;
            }
            components += 1;
            let mut stack = vec![node];
            while let Some(current) = stack.pop() {
                if !seen.insert(current) {
                    continue;
                }
                stack.extend(adjacency[current].iter().copied());
            }
        }
        components
    }
}

/// The E, N, P counts of a graph and the complexity derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclomaticCounts {
    pub edges: u64,
    pub nodes: u64,
    pub components: u64,
    pub complexity: i64,
}

/// Counts edges, nodes, and components and applies M = E - N + 2P.
pub fn cyclomatic(cfg: &ControlFlowGraph) -> Result<CyclomaticCounts, ComplexityError> {
    if cfg.nodes.is_empty() {
        return Err(ComplexityError::EmptyGraph(cfg.unit.clone()));
    }
    let edges = cfg.edges.len() as u64;
    let nodes = cfg.nodes.len() as u64;
    let components = cfg.component_count();
    let complexity = edges as i64 - nodes as i64 + 2 * components as i64;
    Ok(CyclomaticCounts { edges, nodes, components, complexity })
}

/// Risk bands for M: 1-10 low, 11-20 moderate, 21-50 high, above 50 severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskTier {
    Low,
    Moderate,
    High,
    Severe,
}

impl RiskTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskTier::Low => "low",
            RiskTier::Moderate => "moderate",
            RiskTier::High => "high",
            RiskTier::Severe => "severe",
        }
    }
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify(m: i64) -> Result<RiskTier, ComplexityError> {
    match m {
        1..=10 => Ok(RiskTier::Low),
        11..=20 => Ok(RiskTier::Moderate),
        21..=50 => Ok(RiskTier::High),
        n if n > 50 => Ok(RiskTier::Severe),
        n => Err(ComplexityError::Domain(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitComplexity {
    pub unit: String,
    #[serde(flatten)]
    pub counts: CyclomaticCounts,
    pub risk: RiskTier,
}

/// Per-unit rows plus the model total, with the bundled agent classes pinned
/// to their table order when present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub rows: Vec<UnitComplexity>,
    pub model_total: i64,
}

/// Unit ordering used by the bundled reference tables.
const TABLE_ORDER: &[&str] = &["Operator", "MCC", "UVF-Manager", "UV"];

pub fn report(cfgs: &[ControlFlowGraph]) -> Result<ComplexityReport, ComplexityError> {
    if cfgs.is_empty() {
        return Err(ComplexityError::EmptyReport);
    }
    let mut rows = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let counts = cyclomatic(cfg)?;
        let risk = classify(counts.complexity.max(1))?;
        rows.push(UnitComplexity { unit: cfg.unit.clone(), counts, risk });
    }
    rows.sort_by_key(|row| {
        let pinned = TABLE_ORDER.iter().position(|u| *u == row.unit);
        (pinned.unwrap_or(TABLE_ORDER.len()), row.unit.clone())
    });
    let model_total = rows.iter().map(|r| r.counts.complexity).sum();
    Ok(ComplexityReport { rows, model_total })
}

impl ComplexityReport {
    pub fn row(&self, unit: &str) -> Option<&UnitComplexity> {
        self.rows.iter().find(|r| r.unit == unit)
    }

    /// Text table in the reference layout: metrics as rows, units as
    /// columns, the model total in the last column of the complexity row.
    pub fn to_text_table(&self) -> String {
        let mut columns: Vec<Vec<String>> = vec![vec![
            "Agent class".into(),
            "Edges (E)".into(),
            "Nodes (N)".into(),
            "Branches (P)".into(),
            "Complexity (M)".into(),
            "Risk".into(),
        ]];
        for row in &self.rows {
            columns.push(vec![
                row.unit.clone(),
                row.counts.edges.to_string(),
                row.counts.nodes.to_string(),
                row.counts.components.to_string(),
                row.counts.complexity.to_string(),
                row.risk.to_string(),
            ]);
        }
        columns.push(vec![
            "Model".into(),
            String::new(),
            String::new(),
            String::new(),
            self.model_total.to_string(),
            String::new(),
        ]);

        let widths: Vec<usize> = columns
            .iter()
            .map(|col| col.iter().map(String::len).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in 0..columns[0].len() {
            let mut cells = Vec::new();
            for (col, width) in columns.iter().zip(&widths) {
                cells.push(format!("{:width$}", col[line], width = width));
            }
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
pub(crate) fn chain_graph(unit: &str, len: usize) -> ControlFlowGraph {
    let nodes: Vec<String> = (0..len).map(|i| format!("n{i}")).collect();
    let edges = (1..len).map(|i| (format!("n{}", i - 1), format!("n{i}"))).collect();
    ControlFlowGraph { unit: unit.into(), nodes, edges, entries: vec!["n0".into()] }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: the cycle-space dimension counted by building a
    /// spanning forest and counting non-tree edges, plus one per component.
    pub(crate) fn cyclomatic_by_spanning_forest(cfg: &ControlFlowGraph) -> i64 {
        let mut adjacency: BTreeMap<&str, Vec<usize>> =
            cfg.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (idx, (from, to)) in cfg.edges.iter().enumerate() {
            adjacency.get_mut(from.as_str()).unwrap().push(idx);
            adjacency.get_mut(to.as_str()).unwrap().push(idx);
        }
        let mut visited_nodes: BTreeSet<&str> = BTreeSet::new();
        let mut tree_edges: BTreeSet<usize> = BTreeSet::new();
        let mut components = 0i64;
        for start in cfg.nodes.iter().map(String::as_str) {
            if visited_nodes.contains(start) {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            visited_nodes.insert(start);
            while let Some(node) = stack.pop() {
                for &edge_idx in &adjacency[node] {
                    let (from, to) = &cfg.edges[edge_idx];
                    let other = if from == node { to } else { from };
                    if !visited_nodes.contains(other.as_str()) {
                        visited_nodes.insert(other);
                        tree_edges.insert(edge_idx);
                        stack.push(other);
                    }
                }
            }
        }
        let non_tree = cfg.edges.len() as i64 - tree_edges.len() as i64;
        non_tree + components
    }

    #[test]
    fn single_node_has_complexity_one() {
        let cfg = chain_graph("unit", 1);
        let counts = cyclomatic(&cfg).unwrap();
        assert_eq!(
            (counts.edges, counts.nodes, counts.components, counts.complexity),
            (0, 1, 1, 1)
        );
    }

    #[test]
    fn straight_chain_has_complexity_one() {
        let counts = cyclomatic(&chain_graph("unit", 5)).unwrap();
        assert_eq!(counts.complexity, 1);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let cfg = ControlFlowGraph {
            unit: "empty".into(),
            nodes: vec![],
            edges: vec![],
            entries: vec![],
        };
        assert_eq!(cyclomatic(&cfg), Err(ComplexityError::EmptyGraph("empty".into())));
    }

    #[test]
    fn one_if_else_has_complexity_two() {
        // The 5-node diamond: entry, decision, two branches, exit. The
        // expected value is frozen from enumerating its independent paths:
        // the through-path plus one extra for the second branch.
        let cfg = ControlFlowGraph {
            unit: "diamond".into(),
            nodes: ["entry", "d", "t", "e", "exit"].iter().map(|s| s.to_string()).collect(),
            edges: vec![
                ("entry".into(), "d".into()),
                ("d".into(), "t".into()),
                ("d".into(), "e".into()),
                ("t".into(), "exit".into()),
                ("e".into(), "exit".into()),
            ],
            entries: vec!["entry".into()],
        };
        let counts = cyclomatic(&cfg).unwrap();
        assert_eq!(counts.complexity, 2);
        assert_eq!(counts.complexity, cyclomatic_by_spanning_forest(&cfg));
    }

    #[test]
    fn two_components_double_p() {
        let mut cfg = chain_graph("unit", 3);
        cfg.nodes.push("island".into());
        let counts = cyclomatic(&cfg).unwrap();
        assert_eq!(counts.components, 2);
        assert_eq!(counts.complexity, 2 - 4 + 4);
    }

    #[test]
    fn duplicate_edges_collapse_with_warning() {
        let (cfg, warnings) = ControlFlowGraph::build(
            "unit",
            vec!["a".into(), "b".into()],
            vec![("a".into(), "b".into()), ("a".into(), "b".into())],
            vec![],
        )
        .unwrap();
        assert_eq!(cfg.edges.len(), 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn edge_to_missing_node_is_a_schema_error() {
        let err = ControlFlowGraph::build(
            "unit",
            vec!["a".into()],
            vec![("a".into(), "ghost".into())],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, ComplexityError::Schema { .. }));
    }

    #[test]
    fn classify_boundaries_are_exact() {
        assert_eq!(classify(1).unwrap(), RiskTier::Low);
        assert_eq!(classify(10).unwrap(), RiskTier::Low);
        assert_eq!(classify(11).unwrap(), RiskTier::Moderate);
        assert_eq!(classify(20).unwrap(), RiskTier::Moderate);
        assert_eq!(classify(21).unwrap(), RiskTier::High);
        assert_eq!(classify(50).unwrap(), RiskTier::High);
        assert_eq!(classify(51).unwrap(), RiskTier::Severe);
        assert!(classify(0).is_err());
    }

    #[test]
    fn classify_is_monotone() {
        let mut last = classify(1).unwrap();
        for m in 2..200 {
            let tier = classify(m).unwrap();
            assert!(tier >= last, "tier regressed at M={m}");
            last = tier;
        }
    }

    #[test]
    fn report_pins_case_study_order_and_totals() {
        let cfgs = vec![chain_graph("UV", 2), chain_graph("Operator", 2), chain_graph("Zeta", 2)];
        let report = report(&cfgs).unwrap();
        let units: Vec<&str> = report.rows.iter().map(|r| r.unit.as_str()).collect();
        assert_eq!(units, vec!["Operator", "UV", "Zeta"]);
        assert_eq!(report.model_total, 3);
    }

    #[test]
    fn singleton_report_total_is_one() {
        let report = report(&[chain_graph("only", 4)]).unwrap();
        assert_eq!(report.model_total, 1);
    }
}
