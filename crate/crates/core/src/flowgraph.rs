//! River flow graphs.
//!
//! A [`FlowGraph`] is a forest: every station drains to at most one
//! downstream station and there are no cycles. From it we derive the causal
//! adjacency (edge `i -> j` means `i` is directly upstream of `j`), the
//! message-passing aggregation matrix, upstream closures used as inference
//! masks, and the HUC8/HUC4 grouping used for cluster batching.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::numcore::SparseMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("edge references unknown station `{0}`")]
    UnknownStation(String),
    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),
    #[error("flow graph contains a cycle through `{0}`")]
    CycleDetected(String),
    #[error("station `{0}` drains to more than one downstream station")]
    MultipleDownstream(String),
    #[error("cell ({row}, {col}) is a station surrounded by equal elevations")]
    AllFlat { row: usize, col: usize },
    #[error("DEM and station mask must be non-empty grids of equal size")]
    BadGrid,
    #[error("HUC8 `{huc8}` is inconsistent with HUC4 `{huc4}`")]
    InconsistentHierarchy { huc8: String, huc4: String },
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub elevation: f64,
    pub huc8: String,
    pub huc4: String,
    pub soil_class: u8,
}

impl Station {
    /// Static node features fed to the station-level model.
    pub fn static_features(&self) -> [f64; 4] {
        [self.elevation, self.soil_class as f64, self.lat, self.lon]
    }
}

pub const N_STATIC: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    stations: Vec<Station>,
    edges: Vec<(usize, usize)>,
    downstream: Vec<Option<usize>>,
    upstream: Vec<Vec<usize>>,
}

impl FlowGraph {
    /// Validate and build from index edges `(upstream, downstream)`.
    pub fn from_index_edges(stations: Vec<Station>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let n = stations.len();
        let mut seen = BTreeSet::new();
        for s in &stations {
            if !seen.insert(s.id.as_str()) {
                return Err(GraphError::DuplicateStation(s.id.clone()));
            }
        }
        let mut downstream = vec![None; n];
        let mut upstream = vec![Vec::new(); n];
        for &(u, d) in &edges {
            if u >= n {
                return Err(GraphError::NodeOutOfRange(u));
            }
            if d >= n {
                return Err(GraphError::NodeOutOfRange(d));
            }
            if u == d {
                return Err(GraphError::CycleDetected(stations[u].id.clone()));
            }
            if downstream[u].is_some() {
                return Err(GraphError::MultipleDownstream(stations[u].id.clone()));
            }
            downstream[u] = Some(d);
            upstream[d].push(u);
        }
        for ups in &mut upstream {
            ups.sort_unstable();
        }
        let g = Self {
            stations,
            edges,
            downstream,
            upstream,
        };
        if let Some(v) = g.find_cycle() {
            return Err(GraphError::CycleDetected(g.stations[v].id.clone()));
        }
        Ok(g)
    }

    /// Walk downstream pointers; with out-degree ≤ 1 a cycle shows up as a
    /// walk longer than the node count.
    fn find_cycle(&self) -> Option<usize> {
        let n = self.stations.len();
        // 0 = unvisited, 1 = on current walk, 2 = known acyclic
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut v = Some(start);
            while let Some(x) = v {
                match state[x] {
                    2 => break,
                    1 => return Some(x),
                    _ => {
                        state[x] = 1;
                        path.push(x);
                        v = self.downstream[x];
                    }
                }
            }
            for x in path {
                state[x] = 2;
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn downstream(&self, i: usize) -> Option<usize> {
        self.downstream[i]
    }

    /// Direct upstream neighbours, ascending.
    pub fn upstream(&self, i: usize) -> &[usize] {
        &self.upstream[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn outlets(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.downstream[i].is_none()).collect()
    }

    /// Kahn order: every station appears after all of its upstream stations.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.upstream.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            if let Some(d) = self.downstream[v] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    queue.push_back(d);
                }
            }
        }
        order
    }

    /// Outlet reached by following the flow from `i`.
    pub fn outlet_of(&self, mut i: usize) -> usize {
        while let Some(d) = self.downstream[i] {
            i = d;
        }
        i
    }
}

/// Build from string-id edges `(upstream_id, downstream_id)`.
pub fn build_from_edges(stations: Vec<Station>, edges: &[(String, String)]) -> Result<FlowGraph, GraphError> {
    let index: BTreeMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut idx_edges = Vec::with_capacity(edges.len());
    for (u, d) in edges {
        let ui = *index.get(u.as_str()).ok_or_else(|| GraphError::UnknownStation(u.clone()))?;
        let di = *index.get(d.as_str()).ok_or_else(|| GraphError::UnknownStation(d.clone()))?;
        idx_edges.push((ui, di));
    }
    FlowGraph::from_index_edges(stations, idx_edges)
}

/// Row-major elevation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (rows * cols == data.len()).then_some(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

/// Steepest-descent receiver of every cell, `None` for pits, flats and
/// edge cells without a strictly lower neighbour.
///
/// Ties between equally steep neighbours go to the lowest `(row, col)`.
pub fn d8_receivers(dem: &Grid<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = (dem.rows as isize, dem.cols as isize);
    let mut out = vec![None; dem.data.len()];
    for r in 0..rows {
        for c in 0..cols {
            let z = dem.at(r as usize, c as usize);
            let mut best: Option<(f64, usize)> = None;
            // neighbours visited in (row, col) order so the first strict
            // maximum is also the lexicographically smallest tie
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                        continue;
                    }
                    let nz = dem.at(nr as usize, nc as usize);
                    if nz >= z {
                        continue;
                    }
                    let dist = if dr != 0 && dc != 0 { core::f64::consts::SQRT_2 } else { 1.0 };
                    let slope = (z - nz) / dist;
                    if best.is_none_or(|(s, _)| slope > s) {
                        best = Some((slope, (nr * cols + nc) as usize));
                    }
                }
            }
            out[(r * cols + c) as usize] = best.map(|(_, k)| k);
        }
    }
    out
}

/// Derive a station graph from a DEM with the D8 rule.
///
/// Stations are the masked cells in row-major order. Each station follows
/// its flow path through unmasked cells until it reaches another station
/// (an edge) or a cell with no receiver (the station is an outlet).
pub fn build_from_d8(dem: &Grid<f64>, station_mask: &Grid<bool>) -> Result<FlowGraph, GraphError> {
    if dem.data.is_empty() || dem.rows != station_mask.rows || dem.cols != station_mask.cols {
        return Err(GraphError::BadGrid);
    }
    let receivers = d8_receivers(dem);
    let cols = dem.cols;
    let mut node_of = vec![usize::MAX; dem.data.len()];
    let mut stations = Vec::new();
    for k in 0..dem.data.len() {
        if !station_mask.data[k] {
            continue;
        }
        let (r, c) = (k / cols, k % cols);
        if receivers[k].is_none() && is_interior(dem, r, c) && surrounded_by_equal(dem, r, c) {
            return Err(GraphError::AllFlat { row: r, col: c });
        }
        node_of[k] = stations.len();
        stations.push(Station {
            id: alloc::format!("r{}c{}", r, c),
            lat: r as f64,
            lon: c as f64,
            elevation: dem.data[k],
            huc8: "00000000".to_string(),
            huc4: "0000".to_string(),
            soil_class: 0,
        });
    }
    let mut edges = Vec::new();
    for k in 0..dem.data.len() {
        if node_of[k] == usize::MAX {
            continue;
        }
        let mut cur = receivers[k];
        while let Some(cell) = cur {
            if node_of[cell] != usize::MAX {
                edges.push((node_of[k], node_of[cell]));
                break;
            }
            cur = receivers[cell];
        }
    }
    FlowGraph::from_index_edges(stations, edges)
}

fn is_interior<T: Copy>(g: &Grid<T>, r: usize, c: usize) -> bool {
    r > 0 && c > 0 && r + 1 < g.rows && c + 1 < g.cols
}

fn surrounded_by_equal(dem: &Grid<f64>, r: usize, c: usize) -> bool {
    let z = dem.at(r, c);
    (r - 1..=r + 1).all(|nr| (c - 1..=c + 1).all(|nc| dem.at(nr, nc) == z))
}

/// Binary causal adjacency: `a[i][j] = 1` iff `i` drains directly into `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalAdjacency {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl CausalAdjacency {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.n.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }
}

pub fn causal_adjacency(graph: &FlowGraph) -> CausalAdjacency {
    let n = graph.len();
    let mut entries = vec![0.0; n * n];
    for &(u, d) in graph.edges() {
        entries[u * n + d] = 1.0;
    }
    CausalAdjacency { n, entries }
}

/// Targets plus every station with a directed path into any target.
pub fn upstream_closure(graph: &FlowGraph, targets: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = targets.clone();
    let mut stack: Vec<usize> = targets.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &u in graph.upstream(v) {
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen
}

/// Message-passing matrix: row `i` lists the stations `i` receives from.
///
/// Non-zero `m[i][j]` iff `j -> i` is an edge, or `i == j` with
/// `self_loops`. With `row_normalize` every non-empty row sums to one.
pub fn aggregation_matrix(adj: &CausalAdjacency, self_loops: bool, row_normalize: bool) -> SparseMatrix {
    let n = adj.n;
    let mut m = SparseMatrix::new(n, n);
    for i in 0..n {
        for j in 0..n {
            if adj.get(j, i) != 0.0 {
                m.set(i, j, adj.get(j, i));
            }
        }
        if self_loops {
            m.set(i, i, 1.0);
        }
    }
    if row_normalize {
        m.row_normalized()
    } else {
        m
    }
}

/// Two-level HUC grouping: stations to HUC8 groups, HUC8 groups to HUC4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    /// Group index of each station.
    pub assignment: Vec<usize>,
    /// HUC8 code of each group, ascending.
    pub groups: Vec<String>,
    /// Parent HUC4 index of each group.
    pub parent: Vec<usize>,
    /// HUC4 codes, ascending.
    pub parents: Vec<String>,
}

impl Grouping {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Stations of group `g`, ascending.
    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == g).collect()
    }

    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.groups.len()];
        for &g in &self.assignment {
            h[g] += 1;
        }
        h
    }

    pub fn same_group(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }
}

pub fn hierarchical_groups(stations: &[Station]) -> Result<Grouping, GraphError> {
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    for s in stations {
        let prefix_ok = s.huc8.get(..4).is_some_and(|p| p == s.huc4);
        if !prefix_ok {
            return Err(GraphError::InconsistentHierarchy {
                huc8: s.huc8.clone(),
                huc4: s.huc4.clone(),
            });
        }
        match parent_of.get(s.huc8.as_str()) {
            Some(&p) if p != s.huc4 => {
                return Err(GraphError::InconsistentHierarchy {
                    huc8: s.huc8.clone(),
                    huc4: s.huc4.clone(),
                })
            }
            _ => {
                parent_of.insert(&s.huc8, &s.huc4);
            }
        }
    }
    let groups: Vec<String> = parent_of.keys().map(|k| k.to_string()).collect();
    let parents: Vec<String> = parent_of
        .values()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(ToString::to_string)
        .collect();
    let parent = parent_of
        .values()
        .map(|p| parents.iter().position(|x| x == p).expect("parent present"))
        .collect();
    let assignment = stations
        .iter()
        .map(|s| groups.iter().position(|g| *g == s.huc8).expect("group present"))
        .collect();
    Ok(Grouping {
        assignment,
        groups,
        parent,
        parents,
    })
}

/// Drop cross-group entries of `m` and renormalise rows when `renormalize`.
pub fn restrict_to_groups(m: &SparseMatrix, grouping: &Grouping, renormalize: bool) -> SparseMatrix {
    let out = m.filtered(|i, j| grouping.same_group(i, j));
    if renormalize {
        out.row_normalized()
    } else {
        out
    }
}

/// Nodes whose aggregation rows (transitively) feed `targets`: the support
/// closure of `m`. For a causal aggregation matrix this equals
/// [`upstream_closure`].
pub fn dependency_closure(m: &SparseMatrix, targets: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut seen = targets.clone();
    let mut stack: Vec<usize> = targets.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &(j, _) in m.row(v) {
            if seen.insert(j) {
                stack.push(j);
            }
        }
    }
    seen
}

/// Summary written next to a built graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub nodes: usize,
    pub edges: usize,
    pub acyclic: bool,
    pub outlets: usize,
    pub group_histogram: BTreeMap<String, usize>,
    /// Rows of the aggregation matrix with no entry at all.
    pub degenerate_rows: Vec<String>,
}

pub fn validation_report(graph: &FlowGraph, grouping: &Grouping, m: &SparseMatrix) -> ValidationReport {
    let hist = grouping.histogram();
    ValidationReport {
        nodes: graph.len(),
        edges: graph.edges().len(),
        acyclic: graph.topological_order().len() == graph.len(),
        outlets: graph.outlets().len(),
        group_histogram: grouping.groups.iter().cloned().zip(hist).collect(),
        degenerate_rows: m
            .empty_rows()
            .into_iter()
            .map(|i| graph.stations()[i].id.clone())
            .collect(),
    }
}

/// Euclidean distance in the (row, col) plane, for DEM-derived stations.
pub fn grid_distance(a: &Station, b: &Station) -> f64 {
    math::sqrt((a.lat - b.lat) * (a.lat - b.lat) + (a.lon - b.lon) * (a.lon - b.lon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    pub(crate) fn station(id: &str, huc8: &str) -> Station {
        Station {
            id: id.to_string(),
            lat: 0.0,
            lon: 0.0,
            elevation: 0.0,
            huc8: huc8.to_string(),
            huc4: huc8[..4].to_string(),
            soil_class: 0,
        }
    }

    fn stations(ids: &[&str]) -> Vec<Station> {
        ids.iter().map(|i| station(i, "12060101")).collect()
    }

    fn e(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    fn chain() -> FlowGraph {
        build_from_edges(stations(&["A", "B", "C"]), &[e("A", "B"), e("B", "C")]).unwrap()
    }

    #[test]
    fn chain_builds() {
        let g = chain();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.outlets(), vec![2]);
        assert_eq!(g.topological_order(), vec![0, 1, 2]);
    }

    #[test]
    fn three_cycle_rejected() {
        let r = build_from_edges(stations(&["A", "B", "C"]), &[e("A", "B"), e("B", "C"), e("C", "A")]);
        assert!(matches!(r, Err(GraphError::CycleDetected(_))));
    }

    #[test]
    fn confluence_is_legal() {
        let g = build_from_edges(stations(&["A", "B", "C", "D"]), &[e("A", "C"), e("B", "C"), e("C", "D")]).unwrap();
        assert_eq!(g.upstream(2), &[0, 1]);
    }

    #[test]
    fn construction_errors() {
        let r = build_from_edges(stations(&["A", "B"]), &[e("A", "Z")]);
        assert_eq!(r, Err(GraphError::UnknownStation("Z".into())));
        let r = build_from_edges(stations(&["A", "B", "C"]), &[e("A", "B"), e("A", "C")]);
        assert_eq!(r, Err(GraphError::MultipleDownstream("A".into())));
        let r = build_from_edges(stations(&["A"]), &[e("A", "A")]);
        assert!(matches!(r, Err(GraphError::CycleDetected(_))));
        let r = build_from_edges(stations(&["A", "A"]), &[]);
        assert_eq!(r, Err(GraphError::DuplicateStation("A".into())));
    }

    #[test]
    fn d8_monotone_slopes() {
        let all = Grid::filled(1, 3, true);
        let g = build_from_d8(&Grid::new(1, 3, vec![30.0, 20.0, 10.0]).unwrap(), &all).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g = build_from_d8(&Grid::new(1, 3, vec![10.0, 20.0, 30.0]).unwrap(), &all).unwrap();
        assert_eq!(g.edges(), &[(1, 0), (2, 1)]);
    }

    #[test]
    fn d8_contracts_unmasked_cells() {
        let dem = Grid::new(1, 4, vec![40.0, 30.0, 20.0, 10.0]).unwrap();
        let mask = Grid::new(1, 4, vec![true, false, false, true]).unwrap();
        let g = build_from_d8(&dem, &mask).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn d8_flat_interior_station_errors() {
        let dem = Grid::filled(3, 3, 5.0);
        let mask = Grid::filled(3, 3, true);
        assert_eq!(build_from_d8(&dem, &mask), Err(GraphError::AllFlat { row: 1, col: 1 }));
        // an unmasked flat centre is just an outlet-free cell
        let mut mask = Grid::filled(3, 3, false);
        mask.data[0] = true;
        let g = build_from_d8(&dem, &mask).unwrap();
        assert_eq!(g.outlets(), vec![0]);
    }

    #[test]
    fn d8_tie_break_lowest_index() {
        // centre at 10, N and W neighbours both at 0 at equal distance
        let dem = Grid::new(3, 3, vec![20.0, 0.0, 20.0, 0.0, 10.0, 20.0, 20.0, 20.0, 20.0]).unwrap();
        let rec = d8_receivers(&dem);
        assert_eq!(rec[4], Some(1));
    }

    #[test]
    fn adjacency_examples() {
        let a = causal_adjacency(&chain());
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 2), 1.0);
        assert_eq!(a.entries.iter().sum::<f64>(), 2.0);

        let empty = FlowGraph::from_index_edges(stations(&["A", "B"]), vec![]).unwrap();
        assert!(causal_adjacency(&empty).entries.iter().all(|&v| v == 0.0));

        let conf = build_from_edges(stations(&["A", "B", "C"]), &[e("A", "C"), e("B", "C")]).unwrap();
        let a = causal_adjacency(&conf);
        assert_eq!(a.row_sums(), vec![1.0, 1.0, 0.0]);
        assert_eq!(a.col_sums(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn closure_examples() {
        let g = chain();
        let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(upstream_closure(&g, &set(&[2])), set(&[0, 1, 2]));
        assert_eq!(upstream_closure(&g, &set(&[0])), set(&[0]));

        let two = FlowGraph::from_index_edges(stations(&["A", "B", "C", "D"]), vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(upstream_closure(&two, &set(&[1])), set(&[0, 1]));
    }

    #[test]
    fn grouping_examples() {
        let st = vec![station("a", "12060101"), station("b", "12060101"), station("c", "12060102")];
        let g = hierarchical_groups(&st).unwrap();
        assert_eq!(g.assignment, vec![0, 0, 1]);
        assert_eq!(g.parents, vec!["1206".to_string()]);
        assert_eq!(g.parent, vec![0, 0]);

        let st = vec![station("a", "12060101"), station("b", "12060101")];
        assert_eq!(hierarchical_groups(&st).unwrap().n_groups(), 1);

        let mut bad = station("x", "12060101");
        bad.huc4 = "1207".into();
        assert!(matches!(
            hierarchical_groups(&[bad]),
            Err(GraphError::InconsistentHierarchy { .. })
        ));
    }

    #[test]
    fn aggregation_examples() {
        let adj = causal_adjacency(&chain());
        let m = aggregation_matrix(&adj, true, true);
        assert_eq!(m.row(1), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(m.row(0), &[(0, 1.0)]);
        let bare = aggregation_matrix(&adj, false, false);
        assert!(bare.row(0).is_empty());
        assert_eq!(bare.empty_rows(), vec![0]);
    }

    #[test]
    fn report_counts() {
        let g = chain();
        let grouping = hierarchical_groups(g.stations()).unwrap();
        let m = aggregation_matrix(&causal_adjacency(&g), false, false);
        let r = validation_report(&g, &grouping, &m);
        assert_eq!((r.nodes, r.edges, r.acyclic), (3, 2, true));
        assert_eq!(r.degenerate_rows, vec![format!("A")]);
    }
}
