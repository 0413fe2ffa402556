//! The effective tensor network of active bonds.
//!
//! Bond `(t, j)` is the worldline of site `j` between layers `t` and `t + 1`
//! (`t = 0` is the input row, `t = T` the output row) and is present iff the
//! record marks it active. Gates are vertices; a site left unpaired by an
//! open-boundary layer gets a pass-through vertex. Each input bond hangs off
//! its own foot vertex joined to the source, each output bond ends in a head
//! vertex joined to the sink; those terminal edges have unbounded capacity, so
//! cuts only ever cut bonds.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{layer_pairs, Boundary, Parity, SpacetimeRecord};

const UNBOUNDED: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: u32,
    pub to: u32,
    /// `(t, j)` for bond edges, `None` for terminal edges.
    pub bond: Option<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtnGraph {
    width: usize,
    depth: usize,
    boundary: Boundary,
    vertices: usize,
    edges: Vec<Edge>,
    bond_edges: usize,
}

pub const SOURCE: u32 = 0;
pub const SINK: u32 = 1;

/// Slot of every site in layer `t`'s vertex list, and the slot count.
fn layer_slots(len: usize, t: usize, boundary: Boundary) -> (Vec<u32>, u32) {
    let mut slot = vec![NONE; len];
    let mut n = 0;
    for (j, k) in layer_pairs(len, Parity::of_layer(t), boundary) {
        slot[j] = n;
        slot[k] = n;
        n += 1;
    }
    for s in slot.iter_mut().filter(|s| **s == NONE) {
        *s = n;
        n += 1;
    }
    (slot, n)
}

/// Build the graph of the active bonds of `record`.
pub fn build_etn(record: &SpacetimeRecord, boundary: Boundary) -> EtnGraph {
    let (len, depth) = (record.width(), record.depth());
    let mut g = EtnGraph { width: len, depth, boundary, vertices: 2, edges: Vec::new(), bond_edges: 0 };
    let fresh = |g: &mut EtnGraph| {
        g.vertices += 1;
        (g.vertices - 1) as u32
    };
    // vertex ids of the nodes of the previous and the current layer
    let mut prev_slot = vec![NONE; len];
    let mut prev_ids: Vec<u32> = Vec::new();
    for t in 0..=depth {
        // consumers of row t live in layer t + 1, or are head vertices
        let (next_slot, next_n) = if t < depth { layer_slots(len, t + 1, boundary) } else { ((0..len as u32).collect(), len as u32) };
        let mut next_ids = vec![NONE; next_n as usize];
        for j in 0..len {
            if !record.active(t, j) {
                continue;
            }
            let from = if t == 0 {
                let foot = fresh(&mut g);
                g.edges.push(Edge { from: SOURCE, to: foot, bond: None });
                foot
            } else {
                let s = prev_slot[j] as usize;
                if prev_ids[s] == NONE {
                    prev_ids[s] = fresh(&mut g);
                }
                prev_ids[s]
            };
            let s = next_slot[j] as usize;
            if next_ids[s] == NONE {
                let v = fresh(&mut g);
                next_ids[s] = v;
                if t == depth {
                    g.edges.push(Edge { from: v, to: SINK, bond: None });
                }
            }
            g.edges.push(Edge { from, to: next_ids[s], bond: Some((t as u32, j as u32)) });
            g.bond_edges += 1;
        }
        prev_slot = next_slot;
        prev_ids = next_ids;
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutResult {
    pub value: usize,
    /// Bonds `(t, j)` of one minimal cut.
    pub witness: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedBonds {
    pub count: usize,
    pub bonds: Vec<(usize, usize)>,
}

impl EtnGraph {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of bond edges, which equals the number of active bonds.
    pub fn bond_count(&self) -> usize {
        self.bond_edges
    }

    pub fn terminal_count(&self) -> usize {
        self.edges.len() - self.bond_edges
    }

    /// Vertices reachable from the source (forward) or the sink (backward),
    /// ignoring the edges for which `skip` holds.
    pub fn reach(&self, backward: bool, skip: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut adj = vec![Vec::new(); self.vertices];
        for (i, e) in self.edges.iter().enumerate() {
            if !skip(i) {
                let (a, b) = if backward { (e.to, e.from) } else { (e.from, e.to) };
                adj[a as usize].push(b);
            }
        }
        let start = if backward { SINK } else { SOURCE };
        let mut seen = vec![false; self.vertices];
        seen[start as usize] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn connected(&self) -> bool {
        self.reach(false, |_| false)[SINK as usize]
    }

    /// Maximum unit-capacity flow with one minimal cut (Dinic). Bonds are
    /// undirected for the flow: the cut separates the two boundaries
    /// whichever way its bonds point.
    pub fn min_cut(&self) -> CutResult {
        let mut flow = Residual::new(self);
        let value = flow.max_flow();
        let reach = flow.reachable();
        let witness = self
            .edges
            .iter()
            .filter(|e| reach[e.from as usize] != reach[e.to as usize])
            .map(|e| {
                let (t, j) = e.bond.expect("unbounded edges are never saturated");
                (t as usize, j as usize)
            })
            .collect();
        CutResult { value, witness }
    }

    /// Bonds whose removal alone disconnects the sink from the source.
    ///
    /// Every source–sink path crosses each bond row exactly once, so a bond
    /// is red iff it is the only bond of its row lying on some path.
    pub fn red_bonds(&self) -> RedBonds {
        let fwd = self.reach(false, |_| false);
        if !fwd[SINK as usize] {
            return RedBonds { count: 0, bonds: Vec::new() };
        }
        let bwd = self.reach(true, |_| false);
        let mut per_row: Vec<(u32, u32)> = vec![(0, 0); self.depth + 1];
        for e in &self.edges {
            if let Some((t, j)) = e.bond {
                if fwd[e.from as usize] && bwd[e.to as usize] {
                    let r = &mut per_row[t as usize];
                    r.0 += 1;
                    r.1 = j;
                }
            }
        }
        let bonds: Vec<(usize, usize)> =
            per_row.iter().enumerate().filter(|(_, r)| r.0 == 1).map(|(t, r)| (t, r.1 as usize)).collect();
        RedBonds { count: bonds.len(), bonds }
    }
}

/// Min-cut of the record truncated at every `t = 0..=T`.
pub fn min_cut_series(record: &SpacetimeRecord, boundary: Boundary) -> Vec<usize> {
    (0..=record.depth()).map(|t| build_etn(&record.truncated(t), boundary).min_cut().value).collect()
}

pub fn red_bonds(record: &SpacetimeRecord, boundary: Boundary) -> RedBonds {
    build_etn(record, boundary).red_bonds()
}

struct Residual {
    offsets: Vec<u32>,
    arcs: Vec<u32>,
    to: Vec<u32>,
    cap: Vec<u32>,
    level: Vec<i32>,
}

impl Residual {
    fn new(g: &EtnGraph) -> Self {
        let m = g.edges.len();
        let mut to = vec![0u32; 2 * m];
        let mut cap = vec![0u32; 2 * m];
        let mut degree = vec![0u32; g.vertices + 1];
        for (i, e) in g.edges.iter().enumerate() {
            to[2 * i] = e.to;
            to[2 * i + 1] = e.from;
            // a cut may run back in time, so bonds carry flow both ways
            if e.bond.is_some() {
                cap[2 * i] = 1;
                cap[2 * i + 1] = 1;
            } else {
                cap[2 * i] = UNBOUNDED;
            }
            degree[e.from as usize + 1] += 1;
            degree[e.to as usize + 1] += 1;
        }
        for v in 0..g.vertices {
            degree[v + 1] += degree[v];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut arcs = vec![0u32; 2 * m];
        for (i, e) in g.edges.iter().enumerate() {
            arcs[fill[e.from as usize] as usize] = 2 * i as u32;
            fill[e.from as usize] += 1;
            arcs[fill[e.to as usize] as usize] = 2 * i as u32 + 1;
            fill[e.to as usize] += 1;
        }
        Self { offsets, arcs, to, cap, level: vec![-1; g.vertices] }
    }

    fn out(&self, v: usize) -> &[u32] {
        &self.arcs[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    fn bfs(&mut self) -> bool {
        self.level.fill(-1);
        self.level[SOURCE as usize] = 0;
        let mut queue = VecDeque::from([SOURCE as usize]);
        while let Some(v) = queue.pop_front() {
            for i in self.offsets[v]..self.offsets[v + 1] {
                let a = self.arcs[i as usize];
                let w = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        self.level[SINK as usize] >= 0
    }

    fn max_flow(&mut self) -> usize {
        let mut total = 0;
        let n = self.level.len();
        let mut path: Vec<u32> = Vec::new();
        while self.bfs() {
            let mut it: Vec<u32> = self.offsets[..n].to_vec();
            loop {
                // walk the level graph from the source, retreating from dead ends
                path.clear();
                let mut v = SOURCE as usize;
                while v != SINK as usize {
                    let end = self.offsets[v + 1];
                    let mut next = None;
                    while it[v] < end {
                        let a = self.arcs[it[v] as usize] as usize;
                        let w = self.to[a] as usize;
                        if self.cap[a] > 0 && self.level[w] == self.level[v] + 1 {
                            next = Some((a, w));
                            break;
                        }
                        it[v] += 1;
                    }
                    match next {
                        Some((a, w)) => {
                            path.push(a as u32);
                            v = w;
                        }
                        None => {
                            self.level[v] = -1;
                            match path.pop() {
                                Some(a) => {
                                    v = self.to[a as usize ^ 1] as usize;
                                    it[v] += 1;
                                }
                                None => break,
                            }
                        }
                    }
                }
                if v != SINK as usize {
                    break;
                }
                // every path crosses a unit bond, so it carries one unit
                for &a in &path {
                    let a = a as usize;
                    if self.cap[a] != UNBOUNDED {
                        self.cap[a] -= 1;
                    }
                    if self.cap[a ^ 1] != UNBOUNDED {
                        self.cap[a ^ 1] += 1;
                    }
                }
                total += 1;
            }
        }
        total
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.level.len()];
        seen[SOURCE as usize] = true;
        let mut queue = VecDeque::from([SOURCE as usize]);
        while let Some(v) = queue.pop_front() {
            for &a in self.out(v) {
                let w = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(width: usize, depth: usize) -> SpacetimeRecord {
        let rows = vec![vec![true; width]; depth];
        SpacetimeRecord::from_rows(&vec![true; width], &rows)
    }

    #[test]
    fn counting() {
        let g = build_etn(&full(4, 2), Boundary::Periodic);
        assert_eq!(g.bond_count(), 12);
        assert_eq!(g.terminal_count(), 8);
        assert_eq!(g.min_cut().value, 4);
    }

    #[test]
    fn single_gate() {
        let g = build_etn(&full(2, 1), Boundary::Open);
        let cut = g.min_cut();
        assert_eq!(cut.value, 2);
        assert_eq!(cut.witness.len(), 2);
    }

    #[test]
    fn inactive_record() {
        let rows = vec![vec![false; 6]; 5];
        let rec = SpacetimeRecord::from_rows(&[false; 6], &rows);
        let g = build_etn(&rec, Boundary::Periodic);
        assert_eq!(g.bond_count(), 0);
        assert!(!g.connected());
        assert_eq!(g.min_cut().value, 0);
        assert_eq!(g.red_bonds().count, 0);
    }

    #[test]
    fn single_path_is_all_red() {
        // one active worldline on site 0 with open boundaries
        let mut row = vec![false; 4];
        row[0] = true;
        let rec = SpacetimeRecord::from_rows(&row, &vec![row.clone(); 7]);
        let red = red_bonds(&rec, Boundary::Open);
        assert_eq!(red.count, 8);
        assert_eq!(build_etn(&rec, Boundary::Open).min_cut().value, 1);
    }

    #[test]
    fn disjoint_paths_have_no_red_bonds() {
        let mut row = vec![false; 8];
        row[0] = true;
        row[5] = true;
        let rec = SpacetimeRecord::from_rows(&row, &vec![row.clone(); 6]);
        assert_eq!(red_bonds(&rec, Boundary::Open).count, 0);
        assert_eq!(build_etn(&rec, Boundary::Open).min_cut().value, 2);
    }

    #[test]
    fn cuts_may_run_back_in_time() {
        // the only forward cut of size one leaves a path that dips back
        let rec = SpacetimeRecord::from_rows(&[false, false, true, true], &[vec![true; 4], vec![true, false, false, true]]);
        let g = build_etn(&rec, Boundary::Open);
        assert_eq!(g.min_cut().value, 2);
        assert!(g.red_bonds().count > 0);
    }
}
