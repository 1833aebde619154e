//! Configuration-model multigraphs.
//!
//! A [`RegularGraph`] on `n` vertices of degree `d` is a perfect matching of
//! the `n*d` half-edges, half-edge `i*d + j` belonging to vertex `i`. Self-loops
//! and multi-edges are kept; [`sample_simple`] conditions on simplicity by
//! rejection.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count accepted by the exhaustive subset enumerations.
pub const MAX_ENUMERATION_VERTICES: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularGraph {
    n: usize,
    d: usize,
    seed: Option<u64>,
    pairing: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

/// Edges leaving and inside a vertex subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetCut {
    pub subset: Vec<usize>,
    pub crossing: usize,
    pub internal: usize,
}

/// Exact minimiser of `e(A, A^c) / |A|` over `0 < |A| <= n/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Isoperimetric {
    pub crossing: usize,
    pub size: usize,
    pub value: f64,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ball {
    pub vertices: Vec<usize>,
    pub edges: usize,
    pub cycles: usize,
}

/// Uniform configuration-model pairing, deterministic in `seed`.
pub fn sample_configuration_model(n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = sample_with_rng(n, d, &mut rng)?;
    g.seed = Some(seed);
    Ok(g)
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
    }
    if d < 3 {
        return Err(Error::DegreeTooSmall(d));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::OddHalfEdges(n * d));
    }
    Ok(())
}

fn sample_with_rng(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<RegularGraph> {
    check_size(n, d)?;
    let mut half_edges: Vec<usize> = (0..n * d).collect();
    half_edges.shuffle(rng);
    let mut pairing = vec![0; n * d];
    for pair in half_edges.chunks_exact(2) {
        pairing[pair[0]] = pair[1];
        pairing[pair[1]] = pair[0];
    }
    RegularGraph::from_pairing(n, d, pairing)
}

/// Rejection sampling of a simple `d`-regular graph.
pub fn sample_simple(n: usize, d: usize, seed: u64, max_attempts: usize) -> Result<RegularGraph> {
    sample_simple_counted(n, d, seed, max_attempts).map(|(g, _)| g)
}

/// As [`sample_simple`], also returning the number of attempts used.
pub fn sample_simple_counted(
    n: usize,
    d: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(RegularGraph, usize)> {
    check_size(n, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let mut g = sample_with_rng(n, d, &mut rng)?;
        if g.is_simple() {
            g.seed = Some(seed);
            return Ok((g, attempt));
        }
    }
    Err(Error::AttemptsExhausted { attempts: max_attempts, rejection_rate: 1.0 })
}

impl RegularGraph {
    /// Builds a graph from an explicit half-edge pairing.
    pub fn from_pairing(n: usize, d: usize, pairing: Vec<usize>) -> Result<Self> {
        if pairing.len() != n * d {
            return Err(Error::SizeMismatch { expected: n * d, got: pairing.len() });
        }
        for (h, &m) in pairing.iter().enumerate() {
            if m >= pairing.len() || m == h || pairing[m] != h {
                return Err(Error::InvalidParameter(format!(
                    "pairing is not a fixed-point-free involution at half-edge {h}"
                )));
            }
        }
        let mut adjacency = vec![Vec::with_capacity(d); n];
        for (h, &m) in pairing.iter().enumerate() {
            adjacency[h / d].push(m / d);
        }
        Ok(Self { n, d, seed: None, pairing, adjacency })
    }

    /// Builds a graph from an edge list in which every vertex appears exactly
    /// `d` times (a self-loop counts twice). Half-edges are assigned in order of
    /// appearance. Any `d >= 1` is accepted here so that small test graphs
    /// such as cycles can be encoded.
    pub fn from_edges(n: usize, d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut next = vec![0usize; n];
        let mut pairing = vec![usize::MAX; n * d];
        let slot = |v: usize, next: &mut Vec<usize>| -> Result<usize> {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if next[v] >= d {
                return Err(Error::InvalidParameter(format!("vertex {v} has degree above {d}")));
            }
            let h = v * d + next[v];
            next[v] += 1;
            Ok(h)
        };
        for &(u, v) in edges {
            let a = slot(u, &mut next)?;
            let b = slot(v, &mut next)?;
            pairing[a] = b;
            pairing[b] = a;
        }
        if let Some(v) = next.iter().position(|&c| c != d) {
            return Err(Error::InvalidParameter(format!("vertex {v} has degree {} != {d}", next[v])));
        }
        Self::from_pairing(n, d, pairing)
    }

    /// The complete graph on four vertices.
    pub fn k4() -> Self {
        let edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        Self::from_edges(4, 3, &edges).expect("K4 is 3-regular")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    /// Neighbour multiset of `v`; a self-loop appears twice.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.d / 2
    }

    /// Edges as `(u, v)` pairs with `u <= v`, multiplicities repeated, in
    /// half-edge order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.pairing
            .iter()
            .enumerate()
            .filter(|&(h, &m)| h < m)
            .map(|(h, &m)| {
                let (u, v) = (h / self.d, m / self.d);
                (u.min(v), u.max(v))
            })
            .collect()
    }

    /// Multiplicity `k_{u,v}` of the edge between `u` and `v` (self-loops
    /// counted once each).
    pub fn multiplicity(&self, u: usize, v: usize) -> usize {
        let c = self.adjacency[u].iter().filter(|&&w| w == v).count();
        if u == v {
            c / 2
        } else {
            c
        }
    }

    pub fn is_simple(&self) -> bool {
        for v in 0..self.n {
            let mut seen = self.adjacency[v].clone();
            seen.sort_unstable();
            if seen.contains(&v) || seen.windows(2).any(|w| w[0] == w[1]) {
                return false;
            }
        }
        true
    }

    fn membership(&self, subset: &[usize]) -> Result<Vec<bool>> {
        let mut inside = vec![false; self.n];
        for &v in subset {
            if v >= self.n {
                return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
            }
            inside[v] = true;
        }
        Ok(inside)
    }

    /// `e(A, A^c)` and the number of edges inside `A`, counted from the
    /// pairing. Self-loops never cross.
    pub fn crossing_edges(&self, subset: &[usize]) -> Result<SubsetCut> {
        let inside = self.membership(subset)?;
        let (mut crossing, mut internal) = (0, 0);
        for (h, &m) in self.pairing.iter().enumerate() {
            if h < m {
                match (inside[h / self.d], inside[m / self.d]) {
                    (true, true) => internal += 1,
                    (true, false) | (false, true) => crossing += 1,
                    _ => {}
                }
            }
        }
        let mut subset: Vec<usize> = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        Ok(SubsetCut { subset, crossing, internal })
    }

    /// `e(A, A^c)` counted from the adjacency multisets.
    pub fn crossing_via_adjacency(&self, subset: &[usize]) -> Result<usize> {
        let inside = self.membership(subset)?;
        Ok((0..self.n)
            .filter(|&v| inside[v])
            .map(|v| self.adjacency[v].iter().filter(|&&w| !inside[w]).count())
            .sum())
    }

    /// Exact isoperimetric number by Gray-code enumeration of all subsets.
    pub fn isoperimetric_number(&self) -> Result<Isoperimetric> {
        if self.n > MAX_ENUMERATION_VERTICES {
            return Err(Error::Budget(format!(
                "exact isoperimetric number needs n <= {MAX_ENUMERATION_VERTICES}, got {}; use Monte Carlo diagnostics",
                self.n
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("isoperimetric number needs n >= 2".into()));
        }
        let half = self.n / 2;
        let mut best: Option<(usize, usize, u32)> = None;
        for_each_subset_cut(&self.to_multigraph(), |mask, size, cut| {
            if size == 0 || size > half {
                return;
            }
            let better = match best {
                None => true,
                // cut/size < best_cut/best_size
                Some((bc, bs, _)) => cut * bs < bc * size,
            };
            if better {
                best = Some((cut, size, mask));
            }
        });
        let (crossing, size, mask) = best.expect("n >= 2 has a nonempty half subset");
        Ok(Isoperimetric {
            crossing,
            size,
            value: crossing as f64 / size as f64,
            witness: (0..self.n).filter(|&v| mask >> v & 1 == 1).collect(),
        })
    }

    /// Breadth-first ball of radius `radius` around `v` and its cycle count
    /// `edges - vertices + 1`.
    pub fn ball_and_cycles(&self, v: usize, radius: usize) -> Result<Ball> {
        if v >= self.n {
            return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
        }
        let mut dist = vec![usize::MAX; self.n];
        dist[v] = 0;
        let mut queue = VecDeque::from([v]);
        let mut vertices = vec![v];
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &w in &self.adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    vertices.push(w);
                    queue.push_back(w);
                }
            }
        }
        let inside: Vec<bool> = dist.iter().map(|&x| x != usize::MAX).collect();
        let edges = self
            .pairing
            .iter()
            .enumerate()
            .filter(|&(h, &m)| h < m && inside[h / self.d] && inside[m / self.d])
            .count();
        vertices.sort_unstable();
        let cycles = edges + 1 - vertices.len();
        Ok(Ball { vertices, edges, cycles })
    }

    /// General multigraph view (used by the quenched enumerations).
    pub fn to_multigraph(&self) -> Multigraph {
        Multigraph::new(self.n, self.edges()).expect("regular graph edges are in range")
    }

    /// Edge-list text: header `# n d seed`, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        let _ = writeln!(out, "# {} {} {}", self.n, self.d, seed);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
        if !header.starts_with('#') || fields.len() != 3 {
            return Err(Error::Parse(format!("bad header line {header:?}")));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let n = parse(fields[0])?;
        let d = parse(fields[1])?;
        let seed = match fields[2] {
            "none" => None,
            s => Some(s.parse::<u64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))?),
        };
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(u), Some(v), None) => edges.push((parse(u)?, parse(v)?)),
                _ => return Err(Error::Parse(format!("bad edge line {line:?}"))),
            }
        }
        let mut g = Self::from_edges(n, d, &edges)?;
        g.seed = seed;
        Ok(g)
    }
}

/// Ball volume bound `1 + d * sum_{i=1}^{R} (d-1)^{i-1}`, attained iff the
/// ball is a tree.
pub fn ball_volume_bound(d: usize, radius: usize) -> usize {
    let mut total = 1;
    let mut layer = d;
    for _ in 0..radius {
        total += layer;
        layer *= d - 1;
    }
    total
}

/// A finite multigraph with arbitrary degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// Non-loop neighbours with multiplicity.
    neighbors: Vec<Vec<usize>>,
}

impl Multigraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            if u != v {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        Ok(Self { n, edges, neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbours of `v` excluding self-loops, with multiplicity.
    pub fn loopless_neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Largest vertex degree, self-loops counting two.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Subgraph induced on vertices `0..k`.
    pub fn induced_prefix(&self, k: usize) -> Self {
        let edges = self.edges.iter().copied().filter(|&(u, v)| u < k && v < k).collect();
        Self::new(k.min(self.n), edges).expect("prefix edges are in range")
    }

    /// Adds one vertex joined to the listed existing vertices.
    pub fn with_vertex(&self, attach: &[usize]) -> Result<Self> {
        let v = self.n;
        let mut edges = self.edges.clone();
        for &u in attach {
            if u >= self.n {
                return Err(Error::VertexOutOfRange { vertex: u, n: self.n });
            }
            edges.push((u, v));
        }
        Self::new(self.n + 1, edges)
    }

    pub fn crossing(&self, mask: u32) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| (mask >> u & 1) != (mask >> v & 1))
            .count()
    }
}

/// Visits every subset of the vertex set in Gray-code order with its size and
/// crossing count `e(A, A^c)`, updating the cut in `O(deg)` per step.
pub fn for_each_subset_cut<F: FnMut(u32, usize, usize)>(g: &Multigraph, mut visit: F) {
    let n = g.n();
    assert!(n <= 31, "subset enumeration is limited to 31 vertices");
    let mut mask: u32 = 0;
    let mut cut: usize = 0;
    let mut size = 0usize;
    visit(mask, size, cut);
    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        let nbrs = g.loopless_neighbors(v);
        let entering = mask >> v & 1 == 0;
        mask ^= 1 << v;
        let inside = nbrs.iter().filter(|&&w| mask >> w & 1 == 1).count();
        // edges from v to the rest flip between cut and internal
        let outside = nbrs.len() - inside;
        if entering {
            cut = cut + outside - inside;
            size += 1;
        } else {
            cut = cut + inside - outside;
            size -= 1;
        }
        visit(mask, size, cut);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> RegularGraph {
        RegularGraph::from_edges(4, 2, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn two_vertex_cubic_graph() {
        for seed in 0..20 {
            let g = sample_configuration_model(2, 3, seed).unwrap();
            assert_eq!(g.edge_count(), 3);
            assert_eq!(g.neighbors(0).len(), 3);
            assert_eq!(g.neighbors(1).len(), 3);
            assert!(!g.is_simple());
        }
    }

    #[test]
    fn rejects_odd_and_small_degree() {
        assert_eq!(sample_configuration_model(3, 3, 0), Err(Error::OddHalfEdges(9)));
        assert_eq!(sample_configuration_model(4, 2, 0), Err(Error::DegreeTooSmall(2)));
    }

    #[test]
    fn k4_is_simple_and_unique_simple_cubic_on_four() {
        assert!(RegularGraph::k4().is_simple());
        let g = sample_simple(4, 3, 7, 1000).unwrap();
        let mut edges = g.edges();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn sample_simple_fails_on_two_vertices() {
        match sample_simple(2, 3, 1, 50) {
            Err(Error::AttemptsExhausted { attempts, rejection_rate }) => {
                assert_eq!(attempts, 50);
                assert_eq!(rejection_rate, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crossing_examples() {
        let k4 = RegularGraph::k4();
        assert_eq!(k4.crossing_edges(&[]).unwrap().crossing, 0);
        assert_eq!(k4.crossing_edges(&[2]).unwrap().crossing, 3);
        for a in 0..4 {
            for b in a + 1..4 {
                let cut = k4.crossing_edges(&[a, b]).unwrap();
                assert_eq!(cut.crossing, 4);
                assert_eq!(cut.internal, 1);
            }
        }
        assert_eq!(k4.crossing_edges(&[0, 1, 2, 3]).unwrap().crossing, 0);
        assert_eq!(
            k4.crossing_edges(&[4]),
            Err(Error::VertexOutOfRange { vertex: 4, n: 4 })
        );
    }

    #[test]
    fn isoperimetric_examples() {
        let iso = RegularGraph::k4().isoperimetric_number().unwrap();
        assert_eq!((iso.crossing, iso.size), (4, 2));
        assert_eq!(iso.value, 2.0);
        let iso = cycle4().isoperimetric_number().unwrap();
        assert_eq!(iso.value, 1.0);
        assert_eq!(iso.size, 2);
        let big = sample_configuration_model(26, 3, 0).unwrap();
        assert!(matches!(big.isoperimetric_number(), Err(Error::Budget(_))));
    }

    #[test]
    fn isoperimetric_matches_brute_force() {
        for seed in 0..5 {
            let g = sample_configuration_model(10, 3, seed).unwrap();
            let iso = g.isoperimetric_number().unwrap();
            let mut best = f64::INFINITY;
            for mask in 1u32..(1 << 10) {
                let subset: Vec<usize> = (0..10).filter(|&v| mask >> v & 1 == 1).collect();
                if subset.len() <= 5 {
                    let c = g.crossing_edges(&subset).unwrap().crossing;
                    best = best.min(c as f64 / subset.len() as f64);
                }
            }
            assert_eq!(iso.value, best);
            assert_eq!(g.crossing_edges(&iso.witness).unwrap().crossing, iso.crossing);
        }
    }

    #[test]
    fn isoperimetric_lower_bound_constant() {
        let d = 3.0f64;
        let bound = d / 2.0 - (d * 2f64.ln()).sqrt();
        assert!((bound - 0.057_973_1).abs() < 1e-7, "{bound}");
    }

    #[test]
    fn balls() {
        let k4 = RegularGraph::k4();
        let b0 = k4.ball_and_cycles(1, 0).unwrap();
        assert_eq!((b0.vertices.clone(), b0.cycles), (vec![1], 0));
        let b1 = k4.ball_and_cycles(0, 1).unwrap();
        assert_eq!(b1.vertices.len(), 4);
        assert_eq!(b1.cycles, 3);
        assert_eq!(ball_volume_bound(3, 0), 1);
        assert_eq!(ball_volume_bound(3, 2), 1 + 3 + 6);
        let g = sample_configuration_model(2000, 3, 4).unwrap();
        let b = g.ball_and_cycles(17, 3).unwrap();
        assert!(b.vertices.len() <= ball_volume_bound(3, 3));
        if b.cycles == 0 {
            assert_eq!(b.vertices.len(), ball_volume_bound(3, 3));
        }
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = sample_configuration_model(12, 3, 99).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("# 12 3 99\n"));
        let h = RegularGraph::from_edge_list(&text).unwrap();
        let (mut a, mut b) = (g.edges(), h.edges());
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert_eq!(h.seed(), Some(99));
        assert!(RegularGraph::from_edge_list("0 1\n").is_err());
    }

    #[test]
    fn gray_code_cuts_match_direct_counts() {
        let g = sample_configuration_model(9, 4, 3).unwrap();
        let m = g.to_multigraph();
        let mut visited = 0;
        for_each_subset_cut(&m, |mask, size, cut| {
            visited += 1;
            assert_eq!(size, mask.count_ones() as usize);
            assert_eq!(cut, m.crossing(mask));
        });
        assert_eq!(visited, 1 << 9);
    }

    #[test]
    fn induced_prefix_and_extension() {
        let m = sample_simple(12, 3, 5, 10_000).unwrap().to_multigraph();
        let p = m.induced_prefix(8);
        assert_eq!(p.n(), 8);
        assert!(p.max_degree() <= 3);
        let ext = p.with_vertex(&[0, 1]).unwrap();
        assert_eq!(ext.edge_count(), p.edge_count() + 2);
        assert!(p.with_vertex(&[8]).is_err());
    }
}
