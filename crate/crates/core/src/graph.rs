//! Weighted graph instances: the three random ensembles, cut costs, the
//! brute-force optimum, and a plain text interchange format.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::Convention;

/// Brute-force enumeration bound. Past ~22 vertices the 2^n sweep stops being
/// a desk-scale operation, but the hard cap is what fits the index math.
pub const MAX_BRUTE_FORCE: usize = 30;

const NWS_NEIGHBOURS: usize = 4;
const NWS_SHORTCUT_PROB: f64 = 0.5;
const PAIRING_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ensemble {
    ThreeRegular,
    Nws,
    Sk,
    Custom,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Ensemble::ThreeRegular => "three_regular",
            Ensemble::Nws => "nws",
            Ensemble::Sk => "sk",
            Ensemble::Custom => "custom",
        };
        f.write_str(tag)
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three_regular" => Ok(Ensemble::ThreeRegular),
            "nws" => Ok(Ensemble::Nws),
            "sk" => Ok(Ensemble::Sk),
            "custom" => Ok(Ensemble::Custom),
            other => Err(Error::InvalidInput(format!("unknown ensemble '{other}'"))),
        }
    }
}

impl Ensemble {
    /// Cost convention used throughout for this ensemble: spin-glass costs for
    /// SK, cut-counting costs for everything else.
    pub fn default_convention(self) -> Convention {
        match self {
            Ensemble::Sk => Convention::Physics,
            _ => Convention::ComputerScience,
        }
    }
}

/// Undirected weighted graph with edges stored as (u, v, w), u < v, in
/// lexicographic order.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
    pub ensemble: Ensemble,
    pub seed: u64,
}

impl WeightedGraph {
    pub fn new(
        n_vertices: usize,
        mut edges: Vec<(usize, usize, f64)>,
        ensemble: Ensemble,
        seed: u64,
    ) -> Result<Self> {
        if n_vertices < 1 || n_vertices > MAX_BRUTE_FORCE {
            return Err(Error::SizeOutOfRange { n: n_vertices, min: 1, max: MAX_BRUTE_FORCE });
        }
        let mut seen = HashSet::new();
        for &(u, v, w) in &edges {
            if u >= v || v >= n_vertices || !w.is_finite() {
                return Err(Error::InvalidEdge { u, v, n: n_vertices });
            }
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge { u, v });
            }
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Ok(WeightedGraph { n_vertices, edges, ensemble, seed })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b, _)| a == v || b == v).count()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search_by(|e| (e.0, e.1).cmp(&key)).is_ok()
    }

    /// Cut cost of one assignment, encoded little endian: bit v of
    /// `assignment` is the side of vertex v.
    ///
    /// Physics: sum of w_uv z_u z_v over edges with spins z = +-1 (bit 0 maps
    /// to +1). ComputerScience: minus the total weight of cut edges.
    pub fn cut_cost(&self, assignment: u64, convention: Convention) -> Result<f64> {
        if self.n_vertices < 64 && assignment >= (1u64 << self.n_vertices) {
            return Err(Error::AssignmentOutOfRange { assignment, n: self.n_vertices });
        }
        Ok(self.cut_cost_unchecked(assignment, convention))
    }

    fn cut_cost_unchecked(&self, assignment: u64, convention: Convention) -> f64 {
        let mut total = 0.0;
        match convention {
            Convention::Physics => {
                for &(u, v, w) in &self.edges {
                    let differ = ((assignment >> u) ^ (assignment >> v)) & 1;
                    // z_u z_v = +1 when the bits agree, -1 when they differ
                    total += if differ == 1 { -w } else { w };
                }
            }
            Convention::ComputerScience => {
                for &(u, v, w) in &self.edges {
                    let differ = ((assignment >> u) ^ (assignment >> v)) & 1;
                    if differ == 1 {
                        total -= w;
                    }
                }
            }
        }
        total
    }

    /// Exhaustive minimum of the cut cost. Returns the optimum and every
    /// assignment within 1e-12 of it; the set always has even cardinality
    /// because complementing an assignment leaves the cost unchanged.
    pub fn brute_force_optimum(&self, convention: Convention) -> Result<(f64, Vec<u64>)> {
        let n = self.n_vertices;
        if n > MAX_BRUTE_FORCE {
            return Err(Error::SizeOutOfRange { n, min: 1, max: MAX_BRUTE_FORCE });
        }
        let dim = 1u64 << n;
        let mut best = f64::INFINITY;
        for z in 0..dim {
            let c = self.cut_cost_unchecked(z, convention);
            if c < best {
                best = c;
            }
        }
        let mut optimal = Vec::new();
        for z in 0..dim {
            if self.cut_cost_unchecked(z, convention) <= best + 1e-12 {
                optimal.push(z);
            }
        }
        Ok((best, optimal))
    }

    /// Per-vertex total absolute incident weight, with the vertex ordering it
    /// induces (descending, ties broken by ascending vertex id).
    pub fn vertex_profile(&self) -> VertexWeightProfile {
        let mut rho = vec![0.0; self.n_vertices];
        for &(u, v, w) in &self.edges {
            rho[u] += w.abs();
            rho[v] += w.abs();
        }
        let mut order: Vec<usize> = (0..self.n_vertices).collect();
        order.sort_by(|&a, &b| rho[b].partial_cmp(&rho[a]).unwrap().then(a.cmp(&b)));
        VertexWeightProfile { rho, order }
    }

    /// Serializes to the text interchange format:
    /// a `n <vertices> <ensemble> <seed>` header, then one `u v w` line per
    /// edge with weights at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("n {} {} {}\n", self.n_vertices, self.ensemble, self.seed);
        for &(u, v, w) in &self.edges {
            out.push_str(&format!("{u} {v} {w:.16e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 0, msg: "empty graph file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "n" {
            return Err(Error::Parse {
                line: line_no + 1,
                msg: "expected header 'n <vertices> <ensemble> <seed>'".into(),
            });
        }
        let parse_err = |line: usize, what: &str| Error::Parse { line, msg: format!("bad {what}") };
        let n: usize = fields[1].parse().map_err(|_| parse_err(line_no + 1, "vertex count"))?;
        let ensemble: Ensemble = fields[2].parse()?;
        let seed: u64 = fields[3].parse().map_err(|_| parse_err(line_no + 1, "seed"))?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(idx + 1, "edge line, expected 'u v w'"));
            }
            let u: usize = fields[0].parse().map_err(|_| parse_err(idx + 1, "vertex id"))?;
            let v: usize = fields[1].parse().map_err(|_| parse_err(idx + 1, "vertex id"))?;
            let w: f64 = fields[2].parse().map_err(|_| parse_err(idx + 1, "weight"))?;
            edges.push((u, v, w));
        }
        WeightedGraph::new(n, edges, ensemble, seed)
    }
}

#[derive(Clone, Debug)]
pub struct VertexWeightProfile {
    /// rho[v] = sum of |w| over edges incident to v.
    pub rho: Vec<f64>,
    /// order[rank] = vertex id, ranks sorted by descending rho.
    pub order: Vec<usize>,
}

/// Uniform random simple 3-regular graph with unit weights, by stub pairing
/// with rejection of self-loops and parallel edges.
pub fn gen_three_regular(n: usize, seed: u64) -> Result<WeightedGraph> {
    if n % 2 != 0 {
        return Err(Error::OddVertexCount { n });
    }
    if n < 4 || n > MAX_BRUTE_FORCE {
        return Err(Error::SizeOutOfRange { n, min: 4, max: MAX_BRUTE_FORCE });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
    for _ in 0..PAIRING_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut seen = HashSet::new();
        let mut simple = true;
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                simple = false;
                break;
            }
        }
        if simple {
            let edges = stubs
                .chunks_exact(2)
                .map(|p| (p[0].min(p[1]), p[0].max(p[1]), 1.0))
                .collect();
            return WeightedGraph::new(n, edges, Ensemble::ThreeRegular, seed);
        }
    }
    Err(Error::GeneratorExhausted { attempts: PAIRING_ATTEMPTS })
}

/// Small-world graph: ring lattice with 4 nearest neighbours, plus random
/// shortcuts added with probability 1/2 per ring edge (never removing any),
/// with weights drawn uniformly from (0, 1].
pub fn gen_nws(n: usize, seed: u64) -> Result<WeightedGraph> {
    let k = NWS_NEIGHBOURS;
    if n <= k {
        return Err(Error::RingTooSmall { n, k });
    }
    if n > MAX_BRUTE_FORCE {
        return Err(Error::SizeOutOfRange { n, min: k + 1, max: MAX_BRUTE_FORCE });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut present = HashSet::new();
    for j in 1..=k / 2 {
        for i in 0..n {
            let t = (i + j) % n;
            let key = (i.min(t), i.max(t));
            pairs.push(key);
            present.insert(key);
        }
    }
    let ring_count = pairs.len();
    for idx in 0..ring_count {
        let (u, _) = pairs[idx];
        if rng.random::<f64>() < NWS_SHORTCUT_PROB {
            loop {
                let w = rng.random_range(0..n);
                let key = (u.min(w), u.max(w));
                if w != u && !present.contains(&key) {
                    present.insert(key);
                    pairs.push(key);
                    break;
                }
                let degree = pairs.iter().filter(|&&(a, b)| a == u || b == u).count();
                if degree >= n - 1 {
                    break;
                }
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| (u, v, 1.0 - rng.random::<f64>()))
        .collect();
    WeightedGraph::new(n, edges, Ensemble::Nws, seed)
}

/// Sherrington-Kirkpatrick instance: the complete graph with weights +-1
/// chosen with equal probability.
pub fn gen_sk(n: usize, seed: u64) -> Result<WeightedGraph> {
    if n < 2 || n > MAX_BRUTE_FORCE {
        return Err(Error::SizeOutOfRange { n, min: 2, max: MAX_BRUTE_FORCE });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let w = if rng.random::<bool>() { 1.0 } else { -1.0 };
            edges.push((u, v, w));
        }
    }
    WeightedGraph::new(n, edges, Ensemble::Sk, seed)
}

/// Complete graph with weights drawn uniformly from (0, 1]. Not one of the
/// random ensembles proper; used for single-instance demonstrations.
pub fn gen_complete_uniform(n: usize, seed: u64) -> Result<WeightedGraph> {
    if n < 2 || n > MAX_BRUTE_FORCE {
        return Err(Error::SizeOutOfRange { n, min: 2, max: MAX_BRUTE_FORCE });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v, 1.0 - rng.random::<f64>()));
        }
    }
    WeightedGraph::new(n, edges, Ensemble::Custom, seed)
}
