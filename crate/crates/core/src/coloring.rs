//! Graph-coloring verification: a sound constraint checker and an exhaustive
//! backtracking oracle used to cross-check it.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use thiserror::Error;

/// A coloring assigns each vertex a positive color index.
pub type Coloring = BTreeMap<u32, u32>;

/// Undirected graph with a color budget. Edges are stored normalized
/// (smaller endpoint first) and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub n_vertices: u32,
    pub edges: BTreeSet<(u32, u32)>,
    pub max_colors: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a vertex >= {2}")]
    EndpointOutOfRange(u32, u32, u32),
    #[error("self-loop on vertex {0}")]
    SelfLoop(u32),
    #[error("max_colors must be at least 1")]
    ZeroColors,
}

impl Graph {
    pub fn new(
        n_vertices: u32,
        edges: impl IntoIterator<Item = (u32, u32)>,
        max_colors: u32,
    ) -> Result<Graph, GraphError> {
        if max_colors == 0 {
            return Err(GraphError::ZeroColors);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if a >= n_vertices || b >= n_vertices {
                return Err(GraphError::EndpointOutOfRange(a, b, n_vertices));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph {
            n_vertices,
            edges: set,
            max_colors,
        })
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Prompt-style edge listing: one "Vertex a is connected to vertex b."
    /// line per edge.
    pub fn render_edges(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b)| format!("Vertex {a} is connected to vertex {b}."))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One reason a candidate coloring fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ColoringViolation {
    MissingVertex { vertex: u32 },
    UnknownVertex { vertex: u32 },
    PaletteExceeded { used: u32, budget: u32 },
    MonochromeEdge { a: u32, b: u32, color: u32 },
}

impl std::fmt::Display for ColoringViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColoringViolation::MissingVertex { vertex } => {
                write!(f, "vertex {vertex} is not colored")
            }
            ColoringViolation::UnknownVertex { vertex } => {
                write!(f, "vertex {vertex} does not exist in the graph")
            }
            ColoringViolation::PaletteExceeded { used, budget } => {
                write!(f, "{used} distinct colors used but only {budget} allowed")
            }
            ColoringViolation::MonochromeEdge { a, b, color } => {
                write!(f, "vertices {a} and {b} share an edge and color {color}")
            }
        }
    }
}

/// Sound verdict: `Valid` only when every vertex is colored, the palette
/// stays within budget, and no edge is monochromatic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColoringVerdict {
    Valid,
    Invalid(Vec<ColoringViolation>),
}

impl ColoringVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ColoringVerdict::Valid)
    }

    pub fn violations(&self) -> &[ColoringViolation] {
        match self {
            ColoringVerdict::Valid => &[],
            ColoringVerdict::Invalid(v) => v,
        }
    }
}

/// Check a candidate coloring against the graph, enumerating every failure.
pub fn verify_coloring(graph: &Graph, coloring: &Coloring) -> ColoringVerdict {
    let mut violations = Vec::new();
    for v in 0..graph.n_vertices {
        if !coloring.contains_key(&v) {
            violations.push(ColoringViolation::MissingVertex { vertex: v });
        }
    }
    for v in coloring.keys() {
        if *v >= graph.n_vertices {
            violations.push(ColoringViolation::UnknownVertex { vertex: *v });
        }
    }
    let used: BTreeSet<u32> = coloring
        .iter()
        .filter(|(v, _)| **v < graph.n_vertices)
        .map(|(_, c)| *c)
        .collect();
    if used.len() as u32 > graph.max_colors {
        violations.push(ColoringViolation::PaletteExceeded {
            used: used.len() as u32,
            budget: graph.max_colors,
        });
    }
    for &(a, b) in &graph.edges {
        if let (Some(ca), Some(cb)) = (coloring.get(&a), coloring.get(&b)) {
            if ca == cb {
                violations.push(ColoringViolation::MonochromeEdge { a, b, color: *ca });
            }
        }
    }
    if violations.is_empty() {
        ColoringVerdict::Valid
    } else {
        ColoringVerdict::Invalid(violations)
    }
}

/// Exhaustive backtracking search: vertices in index order, colors tried in
/// ascending order starting from 1. Returns the first valid assignment, or
/// `None` when the chromatic number exceeds the budget.
pub fn oracle_color_exhaustive(graph: &Graph) -> Option<Coloring> {
    oracle_color_exhaustive_budgeted(graph, u64::MAX).expect("unbounded budget")
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("coloring oracle exceeded its step budget of {0}")]
pub struct BudgetExhausted(pub u64);

/// Budgeted variant; the budget counts color-assignment attempts.
pub fn oracle_color_exhaustive_budgeted(
    graph: &Graph,
    max_steps: u64,
) -> Result<Option<Coloring>, BudgetExhausted> {
    let n = graph.n_vertices as usize;
    let mut assignment: Vec<u32> = vec![0; n];
    // Precompute neighbor lists once; the recursion only looks backwards.
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &graph.edges {
        neighbors[a as usize].push(b as usize);
        neighbors[b as usize].push(a as usize);
    }
    let mut steps = 0u64;
    fn recurse(
        v: usize,
        n: usize,
        k: u32,
        assignment: &mut Vec<u32>,
        neighbors: &[Vec<usize>],
        steps: &mut u64,
        max_steps: u64,
    ) -> Result<bool, BudgetExhausted> {
        if v == n {
            return Ok(true);
        }
        for color in 1..=k {
            *steps += 1;
            if *steps > max_steps {
                return Err(BudgetExhausted(max_steps));
            }
            if neighbors[v]
                .iter()
                .any(|&u| u < v && assignment[u] == color)
            {
                continue;
            }
            assignment[v] = color;
            if recurse(v + 1, n, k, assignment, neighbors, steps, max_steps)? {
                return Ok(true);
            }
            assignment[v] = 0;
        }
        Ok(false)
    }
    let found = recurse(
        0,
        n,
        graph.max_colors,
        &mut assignment,
        &neighbors,
        &mut steps,
        max_steps,
    )?;
    if !found {
        return Ok(None);
    }
    Ok(Some((0..n).map(|v| (v as u32, assignment[v])).collect()))
}

/// Render a coloring in the prompt's per-vertex output format, one
/// "{vertex}: Color {n}" line per assignment.
pub fn render_coloring(coloring: &Coloring) -> String {
    coloring
        .iter()
        .map(|(v, c)| format!("{v}: Color {c}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The 14-vertex, 17-edge instance rendered in the task prompt, with a
/// three-color budget.
pub fn reference_instance() -> Graph {
    Graph::new(
        14,
        [
            (0, 7),
            (0, 8),
            (0, 9),
            (0, 11),
            (1, 13),
            (2, 9),
            (3, 8),
            (3, 11),
            (3, 12),
            (4, 12),
            (5, 11),
            (6, 9),
            (7, 10),
            (7, 13),
            (9, 11),
            (10, 13),
            (11, 13),
        ],
        3,
    )
    .expect("reference instance is well-formed")
}
