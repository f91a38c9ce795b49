use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Simple undirected graph. Immutable once built.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted, alongside a
/// compressed neighbour list used for matrix-vector products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Graph {
    /// Builds a graph from any pair list. Reversed and repeated pairs collapse.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "graph must have at least one node".into(),
            ));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("node count {n} too large")));
        }
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) has an endpoint outside 0..{n}"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            edges.push((i as u32, j as u32));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, edges))
    }

    /// Caller guarantees `edges` is sorted, deduplicated, with `i < j < n`.
    pub(crate) fn from_sorted_unique(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(i, j) in &edges {
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(i, j) in &edges {
            neighbors[fill[i as usize]] = j;
            fill[i as usize] += 1;
            neighbors[fill[j as usize]] = i;
            fill[j as usize] += 1;
        }
        Graph {
            n,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edges(n, std::iter::empty())
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&(i as u32, j as u32)).is_ok()
    }

    /// Edge density 2m / (n(n-1)).
    pub fn density(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(
                "density needs at least two nodes".into(),
            ));
        }
        let n = self.n as f64;
        Ok(2.0 * self.edges.len() as f64 / (n * (n - 1.0)))
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (v, yv) in y.iter_mut().enumerate() {
            *yv = self.neighbors(v).iter().map(|&u| x[u as usize]).sum();
        }
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i as usize, j as usize)] = 1.0;
            a[(j as usize, i as usize)] = 1.0;
        }
        a
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidArgument(
                "permutation length differs from n".into(),
            ));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        Self::from_edges(
            self.n,
            self.edges
                .iter()
                .map(|&(i, j)| (perm[i as usize], perm[j as usize])),
        )
    }

    /// Same node set with one pair toggled.
    pub fn toggle_edge(&self, a: usize, b: usize) -> Result<Self> {
        let key = if a < b {
            (a as u32, b as u32)
        } else {
            (b as u32, a as u32)
        };
        let mut edges = self.edges.clone();
        match edges.binary_search(&key) {
            Ok(pos) => {
                edges.remove(pos);
            }
            Err(pos) => {
                if a == b || a >= self.n || b >= self.n {
                    return Err(Error::InvalidArgument(format!("cannot toggle ({a}, {b})")));
                }
                edges.insert(pos, key);
            }
        }
        Ok(Self::from_sorted_unique(self.n, edges))
    }

    /// Reads the whitespace edge-list format. An optional `n <count>` header
    /// fixes the node count; otherwise it is one past the largest id.
    /// Blank lines and lines starting with `#` or `%` are skipped.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut declared = None;
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
                continue;
            }
            let mut parts = t.split_whitespace();
            let first = parts.next().unwrap();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: "missing field".into(),
                })?
                .parse::<usize>()
                .map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: e.to_string(),
                })
            };
            if first == "n" {
                if declared.is_some() || !pairs.is_empty() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "node-count header must come first".into(),
                    });
                }
                declared = Some(parse(parts.next())?);
                continue;
            }
            let i = parse(Some(first))?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected two columns".into(),
                });
            }
            pairs.push((i, j));
        }
        let inferred = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        let n = match declared {
            Some(n) if n < inferred => {
                return Err(Error::InvalidArgument(format!(
                    "header declares {n} nodes but ids reach {}",
                    inferred - 1
                )))
            }
            Some(n) => n,
            None => inferred,
        };
        Self::from_edges(n, pairs)
    }

    pub fn read_edge_list_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(f))
    }

    /// Writes the header line followed by one `i j` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for &(i, j) in &self.edges {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedups_reversed_and_repeated_pairs() {
        let g = Graph::from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.degree(1), 2);
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(Graph::complete(4).unwrap().density().unwrap(), 1.0);
        assert_eq!(Graph::empty(5).unwrap().density().unwrap(), 0.0);
        let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert!((p3.density().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(Graph::empty(1).unwrap().density().is_err());
    }

    #[test]
    fn edge_list_round_trip_with_isolated_nodes() {
        let g = Graph::from_edges(6, [(0, 1), (3, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::read_edge_list(&buf[..]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn edge_list_without_header_infers_n() {
        let g = Graph::read_edge_list("# comment\n0 1\n4 1\n1 0\n".as_bytes()).unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn edge_list_errors() {
        assert!(Graph::read_edge_list("n 2\n0 5\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("0 x\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("0 1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut y = [0.0; 4];
        g.mul_vec(&x, &mut y);
        let dense = g.adjacency() * nalgebra::DVector::from_column_slice(&x);
        for k in 0..4 {
            assert_eq!(y[k], dense[k]);
        }
    }

    #[test]
    fn toggle_adds_and_removes() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let h = g.toggle_edge(2, 1).unwrap();
        assert!(h.has_edge(1, 2));
        assert_eq!(h.toggle_edge(1, 2).unwrap(), g);
    }
}
