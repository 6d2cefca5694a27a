//! Undirected connected communication graphs.
//!
//! Vertices are agent indices `0..m`. Edges are stored normalized (`i < j`)
//! and deduplicated, adjacency lists are sorted ascending, and every
//! constructor rejects disconnected graphs — the mixing matrices built on
//! top of a graph only average the network together when it is connected.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Give up redrawing a disconnected Erdős–Rényi sample after this many
/// reseeds.
const ER_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct Graph {
    m: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge iterator. Edges are normalized to
    /// `i < j` and deduplicated; self-loops, out-of-range endpoints, and
    /// disconnected results are errors.
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Config(format!("self-loop at vertex {a}")));
            }
            if a >= m || b >= m {
                return Err(Error::Config(format!(
                    "edge ({a}, {b}) out of range for {m} vertices"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); m];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        if !connected(m, &adj) {
            return Err(Error::Config("graph is disconnected".into()));
        }
        Ok(Graph { m, edges, adj })
    }

    /// Erdős–Rényi G(m, p), seeded. Each unordered pair is included with
    /// probability `p`, pairs visited in fixed `(i, j)` ascending order.
    /// Disconnected draws are retried with `seed + 1, seed + 2, ...` so the
    /// result is a pure function of `(m, p, seed)`.
    pub fn erdos_renyi(m: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Config(format!(
                "edge probability must lie in [0, 1], got {p}"
            )));
        }
        if m == 0 {
            return Err(Error::Config("graph needs at least one vertex".into()));
        }
        for attempt in 0..ER_MAX_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
            let mut edges = Vec::new();
            for i in 0..m {
                for j in i + 1..m {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            let mut adj = vec![Vec::new(); m];
            for &(a, b) in &edges {
                adj[a].push(b);
                adj[b].push(a);
            }
            if connected(m, &adj) {
                for list in &mut adj {
                    list.sort_unstable();
                }
                return Ok(Graph { m, edges, adj });
            }
        }
        Err(Error::Config(format!(
            "no connected Erdos-Renyi draw for m={m}, p={p} within {ER_MAX_ATTEMPTS} reseeds"
        )))
    }

    pub fn complete(m: usize) -> Result<Self> {
        let edges = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j)));
        Graph::new(m, edges)
    }

    pub fn path(m: usize) -> Result<Self> {
        Graph::new(m, (1..m).map(|i| (i - 1, i)))
    }

    pub fn vertex_count(&self) -> usize {
        self.m
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Normalized edges, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `i`, ascending, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// `{i} ∪ N(i)`, ascending.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.adj[i].len() + 1);
        let mut inserted = false;
        for &j in &self.adj[i] {
            if !inserted && j > i {
                out.push(i);
                inserted = true;
            }
            out.push(j);
        }
        if !inserted {
            out.push(i);
        }
        out
    }

    /// Text form: header `<m> <edge count>`, then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.m, self.edges.len());
        for &(a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    /// Parses the [`to_edge_list`](Self::to_edge_list) format. Errors carry
    /// 1-based line numbers.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (hline, header) = loop {
            match lines.next() {
                Some((idx, l)) if !l.trim().is_empty() => break (idx + 1, l.trim()),
                Some(_) => continue,
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "empty graph file".into(),
                    })
                }
            }
        };
        let mut it = header.split_whitespace();
        let m: usize = parse_field(it.next(), hline, "vertex count")?;
        let count: usize = parse_field(it.next(), hline, "edge count")?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be exactly '<vertices> <edges>'".into(),
            });
        }
        let mut edges = Vec::with_capacity(count);
        for (idx, l) in lines {
            let line = idx + 1;
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            let mut it = l.split_whitespace();
            let a: usize = parse_field(it.next(), line, "edge endpoint")?;
            let b: usize = parse_field(it.next(), line, "edge endpoint")?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "edge line must be exactly 'i j'".into(),
                });
            }
            edges.push((a, b));
        }
        if edges.len() != count {
            return Err(Error::Parse {
                line: hline,
                msg: format!("header promises {count} edges, found {}", edges.len()),
            });
        }
        Graph::new(m, edges)
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what}: '{tok}'"),
    })
}

// Union-find with path halving; the test suite cross-checks connectivity
// with an independent BFS.
fn connected(m: usize, adj: &[Vec<usize>]) -> bool {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, list) in adj.iter().enumerate() {
        for &b in list {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let root = find(&mut parent, 0);
    (0..m).all(|x| find(&mut parent, x) == root)
}
