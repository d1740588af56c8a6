//! Areal adjacency structure.
//!
//! An [`AreaGraph`] is an undirected simple graph over `n` spatial units with
//! 0/1 weights. Units are 0-based in the API; the text interchange format
//! (`n <N>` header, one `i j` pair per line) is 1-based and symmetrized on
//! read. The graph Laplacian `L = D - W` drives everything downstream, so its
//! rows must sum to zero exactly; with integer degrees and unit weights
//! stored in f64 that holds without rounding.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Undirected simple graph over spatial units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AreaGraph {
    n: usize,
    /// Canonical edge set: each undirected edge stored once as (lo, hi).
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl AreaGraph {
    /// Builds a graph from 0-based endpoint pairs. Duplicate and reversed
    /// pairs collapse to one edge; self loops and out-of-range endpoints are
    /// rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one unit".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self loop on unit {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { n, edges, neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical (lo, hi) order, 0-based.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Breadth-first reachability from unit 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(0);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Dense graph Laplacian `L = D - W`. Row sums are exactly zero.
    pub fn laplacian(&self) -> Laplacian {
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for &(a, b) in &self.edges {
            m[(a, b)] = -1.0;
            m[(b, a)] = -1.0;
        }
        for i in 0..n {
            m[(i, i)] = self.neighbors[i].len() as f64;
        }
        Laplacian { m }
    }

    /// Uniform random spanning tree of the complete graph on `n` units,
    /// sampled with Wilson's loop-erased random walk. Every labeled tree has
    /// probability n^-(n-2), so the result is connected with n - 1 edges and
    /// mean degree 2(n - 1)/n.
    pub fn random_connected(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one unit".into()));
        }
        let mut rng = rng_from(seed, &[n as u64]);
        let mut in_tree = vec![false; n];
        // next[v] becomes v's parent once v joins the tree; revisits during a
        // walk overwrite it, which is the loop erasure.
        let mut next = vec![0usize; n];
        let root = rand::Rng::random_range(&mut rng, 0..n);
        in_tree[root] = true;
        for start in 0..n {
            let mut u = start;
            while !in_tree[u] {
                let mut j = rand::Rng::random_range(&mut rng, 0..n - 1);
                if j >= u {
                    j += 1;
                }
                next[u] = j;
                u = j;
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                u = next[u];
            }
        }
        let edges = (0..n).filter(|&v| v != root).map(|v| (v, next[v]));
        Self::new(n, edges)
    }

    /// Queen-contiguity grid: units on a rows x cols lattice, adjacent when
    /// their cells touch at an edge or corner. Interior units have degree 8.
    pub fn grid_queen(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGraph("grid needs positive extent".into()));
        }
        let idx = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                            continue;
                        }
                        edges.push((idx(r, c), idx(nr as usize, nc as usize)));
                    }
                }
            }
        }
        Self::new(rows * cols, edges)
    }

    /// Parses the 1-based edge-list text format:
    ///
    /// ```text
    /// # optional comments
    /// n 4
    /// 1 2
    /// 2 3
    /// 3 4
    /// ```
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match n {
                None => {
                    if parts.next() != Some("n") {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "expected header `n <count>` before edges".into(),
                        });
                    }
                    let count = parse_field::<usize>(parts.next(), lineno, "unit count")?;
                    if parts.next().is_some() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "trailing tokens after header".into(),
                        });
                    }
                    if count == 0 {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "unit count must be at least 1".into(),
                        });
                    }
                    n = Some(count);
                }
                Some(count) => {
                    let i = parse_field::<usize>(parts.next(), lineno, "edge endpoint")?;
                    let j = parse_field::<usize>(parts.next(), lineno, "edge endpoint")?;
                    if parts.next().is_some() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "expected exactly two endpoints per line".into(),
                        });
                    }
                    for &e in &[i, j] {
                        if e == 0 || e > count {
                            return Err(Error::IndexRange { index: e, n: count });
                        }
                    }
                    if i == j {
                        return Err(Error::SelfLoop(i));
                    }
                    edges.push((i - 1, j - 1));
                }
            }
        }
        match n {
            Some(count) => Self::new(count, edges),
            None => Err(Error::Parse {
                line: 0,
                msg: "empty adjacency input, expected `n <count>` header".into(),
            }),
        }
    }

    /// Serializes to the same 1-based edge-list format `from_edge_list_str`
    /// reads. Edges appear in canonical sorted order.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::with_capacity(8 + 8 * self.edges.len());
        out.push_str(&format!("n {}\n", self.n));
        for &(a, b) in &self.edges {
            out.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        out
    }

    pub fn read_adjacency(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_edge_list_str(&text)
    }

    pub fn write_adjacency(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list_string())?;
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("could not parse {what} from `{tok}`"),
    })
}

/// Dense graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    m: DMatrix<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}
