//! Sierpinski gasket graphs embedded in the integer half-grid.
//!
//! A generation-`g` gasket has corners `(0,0)`, `(2^{g+1},0)` and `(2^g,2^g)`
//! and is the union of `3^g` smallest triangles `{(a,b),(a+2,b),(a+1,b+1)}`.
//! Two vertices are adjacent iff they are corners of a common smallest
//! triangle, so every edge is one of the six lattice directions of
//! [`DirectionTable`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coinshift::DirectionTable;
use crate::error::{QwError, Result};

/// Number of coin labels per vertex in the embedding.
pub const DIRECTIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// The three corners are wired to each other, making the graph 4-regular.
    Periodic,
    /// Each corner keeps only its two lattice edges.
    Reflective,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Reflective => f.write_str("reflective"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = QwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "p" => Ok(Boundary::Periodic),
            "reflective" | "r" => Ok(Boundary::Reflective),
            other => Err(QwError::InvalidArgument(format!(
                "unknown boundary condition {other:?} (expected periodic or reflective)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GasketSpec {
    pub generation: u32,
    pub boundary: Boundary,
}

impl GasketSpec {
    pub fn new(generation: u32, boundary: Boundary) -> Self {
        Self { generation, boundary }
    }

    /// `3(3^g + 1)/2`.
    pub fn vertex_count(&self) -> usize {
        3 * (3usize.pow(self.generation) + 1) / 2
    }

    /// Width of the bounding triangle, `2^{g+1}`.
    pub fn width(&self) -> i64 {
        1i64 << (self.generation + 1)
    }

    /// The bottom-center vertex `(2^g, 0)`.
    pub fn bottom_center(&self) -> Vertex {
        Vertex::new(1i64 << self.generation, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Target of a port: the neighbor vertex index and the coin label the walker
/// carries on arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub vertex: usize,
    pub arrival: usize,
}

/// Membership predicate for the generation-`g` gasket.
pub fn contains(g: u32, x: i64, y: i64) -> bool {
    if g > 40 {
        return false;
    }
    let width = 1i64 << (g + 1);
    if !in_bounding_triangle(x, y, width) {
        return false;
    }
    let (mut x, mut y) = (x, y);
    let mut level = g;
    while level > 0 {
        let half = 1i64 << level;
        let quarter = half / 2;
        // Sub-gaskets of width `half` anchored at (0,0), (half,0), (quarter,quarter).
        if in_bounding_triangle(x, y, half) {
        } else if in_bounding_triangle(x - half, y, half) {
            x -= half;
        } else if in_bounding_triangle(x - quarter, y - quarter, half) {
            x -= quarter;
            y -= quarter;
        } else {
            return false;
        }
        level -= 1;
    }
    matches!((x, y), (0, 0) | (2, 0) | (1, 1))
}

fn in_bounding_triangle(x: i64, y: i64, width: i64) -> bool {
    y >= 0 && y <= x && y <= width - x
}

// Reflective corners carry the labels of the printed boundary rules instead
// of their lattice directions: (corner, lattice direction) -> port label.
const REFLECTIVE_LABELS: [[(usize, usize); 2]; 3] = [
    [(0, 4), (1, 3)], // (0,0)
    [(4, 1), (5, 2)], // (2^g, 2^g)
    [(2, 0), (3, 5)], // (2^{g+1}, 0)
];

// Periodic wrap edges between corners: ((corner, label), (corner, label)).
const PERIODIC_WRAPS: [((usize, usize), (usize, usize)); 3] = [
    ((0, 3), (2, 0)),
    ((0, 4), (1, 1)),
    ((1, 2), (2, 5)),
];

/// Immutable gasket graph with per-vertex port labels and neighbor table.
#[derive(Debug, Clone)]
pub struct GasketGraph {
    spec: GasketSpec,
    vertices: Arc<[Vertex]>,
    lookup: Vec<u32>,
    lookup_width: usize,
    masks: Vec<u8>,
    lattice_masks: Vec<u8>,
    neighbors: Vec<Option<Link>>,
    corners: [usize; 3],
    edge_count: usize,
    row_start: Vec<usize>,
}

/// Build the gasket for `spec`, vertices ordered lexicographically by `(y, x)`.
pub fn build_gasket(spec: GasketSpec) -> GasketGraph {
    GasketGraph::new(spec)
}

impl GasketGraph {
    pub fn new(spec: GasketSpec) -> Self {
        let g = spec.generation;
        let anchors = smallest_triangles(g);

        let mut set = BTreeSet::new();
        for &(a, b) in &anchors {
            set.insert((b, a));
            set.insert((b, a + 2));
            set.insert((b + 1, a + 1));
        }
        let vertices: Vec<Vertex> = set.into_iter().map(|(y, x)| Vertex::new(x, y)).collect();

        let width = spec.width() as usize;
        let lookup_width = width + 1;
        let height = (1usize << g) + 1;
        let mut lookup = vec![u32::MAX; lookup_width * height];
        for (i, v) in vertices.iter().enumerate() {
            lookup[v.y as usize * lookup_width + v.x as usize] = i as u32;
        }
        let index = |x: i64, y: i64| lookup[y as usize * lookup_width + x as usize] as usize;

        let n = vertices.len();
        let mut lattice = vec![None::<usize>; n * DIRECTIONS];
        let mut edge_count = 0;
        for &(a, b) in &anchors {
            let p = index(a, b);
            let q = index(a + 2, b);
            let r = index(a + 1, b + 1);
            for (u, v, k) in [(p, q, 0), (p, r, 1), (q, r, 2)] {
                lattice[u * DIRECTIONS + k] = Some(v);
                lattice[v * DIRECTIONS + DirectionTable::opposite(k)] = Some(u);
                edge_count += 1;
            }
        }

        let corners = [
            index(0, 0),
            index(1i64 << g, 1i64 << g),
            index(spec.width(), 0),
        ];

        let reflective = spec.boundary == Boundary::Reflective;
        let label_of = |v: usize, direction: usize| -> usize {
            if reflective {
                if let Some(c) = corners.iter().position(|&c| c == v) {
                    return REFLECTIVE_LABELS[c]
                        .iter()
                        .find(|&&(d, _)| d == direction)
                        .map(|&(_, label)| label)
                        .expect("corner lattice direction");
                }
            }
            direction
        };

        let mut neighbors = vec![None; n * DIRECTIONS];
        let mut lattice_masks = vec![0u8; n];
        for u in 0..n {
            for k in 0..DIRECTIONS {
                if let Some(w) = lattice[u * DIRECTIONS + k] {
                    lattice_masks[u] |= 1 << k;
                    let label = label_of(u, k);
                    let arrival = label_of(w, DirectionTable::opposite(k));
                    neighbors[u * DIRECTIONS + label] = Some(Link { vertex: w, arrival });
                }
            }
        }
        if spec.boundary == Boundary::Periodic {
            for ((ca, ka), (cb, kb)) in PERIODIC_WRAPS {
                let (a, b) = (corners[ca], corners[cb]);
                neighbors[a * DIRECTIONS + ka] = Some(Link { vertex: b, arrival: kb });
                neighbors[b * DIRECTIONS + kb] = Some(Link { vertex: a, arrival: ka });
                edge_count += 1;
            }
        }

        let masks = (0..n)
            .map(|u| {
                (0..DIRECTIONS)
                    .filter(|&k| neighbors[u * DIRECTIONS + k].is_some())
                    .fold(0u8, |m, k| m | (1 << k))
            })
            .collect();

        let mut row_start = vec![0usize; height + 1];
        for v in &vertices {
            row_start[v.y as usize + 1] += 1;
        }
        for y in 0..height {
            row_start[y + 1] += row_start[y];
        }

        Self {
            spec,
            vertices: vertices.into(),
            lookup,
            lookup_width,
            masks,
            lattice_masks,
            neighbors,
            corners,
            edge_count,
            row_start,
        }
    }

    pub fn spec(&self) -> GasketSpec {
        self.spec
    }

    pub fn generation(&self) -> u32 {
        self.spec.generation
    }

    pub fn boundary(&self) -> Boundary {
        self.spec.boundary
    }

    /// Number of vertices `N`.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub(crate) fn shared_vertices(&self) -> Arc<[Vertex]> {
        Arc::clone(&self.vertices)
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        self.vertices[index]
    }

    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        if v.x < 0 || v.y < 0 || v.x > self.spec.width() || v.y > (1i64 << self.spec.generation) {
            return None;
        }
        let i = self.lookup[v.y as usize * self.lookup_width + v.x as usize];
        (i != u32::MAX).then_some(i as usize)
    }

    pub fn require(&self, v: Vertex) -> Result<usize> {
        self.index_of(v).ok_or(QwError::UnknownVertex {
            generation: self.spec.generation,
            vertex: v,
        })
    }

    /// Bitmask of valid port labels at vertex `index`.
    pub fn direction_mask(&self, index: usize) -> u8 {
        self.masks[index]
    }

    pub(crate) fn direction_masks(&self) -> &[u8] {
        &self.masks
    }

    /// Bitmask of lattice directions realised by smallest-triangle edges,
    /// before any boundary wiring.
    pub fn lattice_mask(&self, index: usize) -> u8 {
        self.lattice_masks[index]
    }

    /// Valid port labels of `v`, ascending.
    pub fn direction_set(&self, v: Vertex) -> Result<Vec<usize>> {
        let i = self.require(v)?;
        Ok(mask_to_set(self.masks[i]))
    }

    pub fn degree(&self, index: usize) -> usize {
        self.masks[index].count_ones() as usize
    }

    pub fn neighbor(&self, index: usize, direction: usize) -> Option<Link> {
        self.neighbors[index * DIRECTIONS + direction]
    }

    /// Corner vertex indices: `(0,0)`, `(2^g,2^g)`, `(2^{g+1},0)`.
    pub fn corners(&self) -> [usize; 3] {
        self.corners
    }

    pub fn is_corner(&self, index: usize) -> bool {
        self.corners.contains(&index)
    }

    /// Undirected edge count, wrap edges included.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Total number of valid (vertex, label) ports.
    pub fn port_count(&self) -> usize {
        self.masks.iter().map(|m| m.count_ones() as usize).sum()
    }

    /// Vertex index range covering rows `y_lo..=y_hi`, clamped to the grid.
    pub fn rows(&self, y_lo: i64, y_hi: i64) -> std::ops::Range<usize> {
        let top = self.row_start.len() as i64 - 2;
        let lo = y_lo.clamp(0, top + 1) as usize;
        let hi = (y_hi + 1).clamp(0, top + 1) as usize;
        self.row_start[lo]..self.row_start[hi.max(lo)]
    }

    /// Breadth-first graph distances from `source` (`usize::MAX` if unreachable).
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0;
        while let Some(u) = queue.pop_front() {
            for k in 0..DIRECTIONS {
                if let Some(link) = self.neighbor(u, k) {
                    if dist[link.vertex] == usize::MAX {
                        dist[link.vertex] = dist[u] + 1;
                        queue.push_back(link.vertex);
                    }
                }
            }
        }
        dist
    }

    /// Debug dump of the port table as `x,y,k,nx,ny,k_arr` lines.
    pub fn write_adjacency_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,k,nx,ny,k_arr")?;
        for (i, v) in self.vertices.iter().enumerate() {
            for k in 0..DIRECTIONS {
                if let Some(link) = self.neighbor(i, k) {
                    let w = self.vertices[link.vertex];
                    writeln!(out, "{},{},{},{},{},{}", v.x, v.y, k, w.x, w.y, link.arrival)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn mask_to_set(mask: u8) -> Vec<usize> {
    (0..DIRECTIONS).filter(|k| mask & (1 << k) != 0).collect()
}

fn smallest_triangles(g: u32) -> Vec<(i64, i64)> {
    fn recurse(level: u32, a: i64, b: i64, out: &mut Vec<(i64, i64)>) {
        if level == 0 {
            out.push((a, b));
            return;
        }
        let half = 1i64 << level;
        recurse(level - 1, a, b, out);
        recurse(level - 1, a + half, b, out);
        recurse(level - 1, a + half / 2, b + half / 2, out);
    }
    let mut out = Vec::with_capacity(3usize.pow(g));
    recurse(g, 0, 0, &mut out);
    out
}
