//! Graphs, weighted graphs, the layered extraction families and noise-driven sampling.
//!
//! Vertices of the built-in families are numbered layer-major and then within a
//! layer, so the two Bell terminals always receive the smallest and the largest index.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, QubitSubset};

/// Simple undirected graph with designated terminal (output) vertices.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<BitVec>,
    terminals: QubitSubset,
    layers: Option<Vec<usize>>,
}

impl Graph {
    /// Edgeless graph on `n` vertices without terminals.
    pub fn new(n: usize) -> Self {
        Graph {
            n,
            adjacency: vec![BitVec::zeros(n); n],
            terminals: QubitSubset::empty(),
            layers: None,
        }
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        terminals: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut g = Graph::new(n);
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        g.terminals = QubitSubset::new(terminals, n)?;
        Ok(g)
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.n
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::QubitOutOfRange { index: v, n: self.n });
        }
        Ok(())
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        if a == b {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
        }
        self.adjacency[a].set(b, true);
        self.adjacency[b].set(a, true);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.adjacency[a].set(b, false);
        self.adjacency[b].set(a, false);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].get(b)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter_ones()
    }

    pub fn adjacency_row(&self, v: usize) -> &BitVec {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].count_ones()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.adjacency[i].iter_ones().filter(move |&j| j > i).map(move |j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BitVec::count_ones).sum::<usize>() / 2
    }

    pub fn terminals(&self) -> &QubitSubset {
        &self.terminals
    }

    pub fn set_terminals(&mut self, terminals: impl IntoIterator<Item = usize>) -> Result<()> {
        self.terminals = QubitSubset::new(terminals, self.n)?;
        Ok(())
    }

    /// Complement of the terminal set.
    pub fn internal(&self) -> QubitSubset {
        self.terminals.complement(self.n)
    }

    pub fn layers(&self) -> Option<&[usize]> {
        self.layers.as_deref()
    }

    pub fn set_layers(&mut self, layers: Option<Vec<usize>>) -> Result<()> {
        if let Some(l) = &layers {
            if l.len() != self.n {
                return Err(Error::InvalidGraph(format!(
                    "layer map has {} entries for {} vertices",
                    l.len(),
                    self.n
                )));
            }
        }
        self.layers = layers;
        Ok(())
    }

    /// Checks symmetry, the zero diagonal and, when present, the layer constraints.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.adjacency[i].get(i) {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            for j in self.adjacency[i].iter_ones() {
                if !self.adjacency[j].get(i) {
                    return Err(Error::InvalidGraph(format!("asymmetric edge ({i}, {j})")));
                }
            }
        }
        if let Some(layers) = &self.layers {
            for (i, j) in self.edges() {
                if layers[i].abs_diff(layers[j]) != 1 {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({i}, {j}) joins layers {} and {}",
                        layers[i], layers[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy of the graph without any edges, keeping vertices, terminals and layers.
    pub fn without_edges(&self) -> Graph {
        Graph {
            n: self.n,
            adjacency: vec![BitVec::zeros(self.n); self.n],
            terminals: self.terminals.clone(),
            layers: self.layers.clone(),
        }
    }

    /// Subgraph induced on `keep`, re-indexed densely in ascending order.
    /// Terminals outside `keep` are dropped; the layer map is dropped.
    pub fn induced(&self, keep: &QubitSubset) -> Graph {
        let idx = keep.as_slice();
        let mut g = Graph::new(idx.len());
        for (a, &va) in idx.iter().enumerate() {
            for (b, &vb) in idx.iter().enumerate().skip(a + 1) {
                if self.has_edge(va, vb) {
                    g.adjacency[a].set(b, true);
                    g.adjacency[b].set(a, true);
                }
            }
        }
        g.terminals =
            QubitSubset::new(self.terminals.iter().filter_map(|t| keep.position(t)), idx.len())
                .expect("positions are distinct and in range");
        g
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            terminals: self.terminals.as_slice().to_vec(),
            layers: self.layers.clone(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut g = Graph::from_edges(
            json.n,
            json.edges.iter().map(|e| (e[0], e[1])),
            json.terminals.iter().copied(),
        )?;
        g.set_layers(json.layers.clone())?;
        g.validate()?;
        Ok(g)
    }

    /// Parses the ad-hoc adjacency-list format:
    ///
    /// ```text
    /// # comment
    /// n: 4
    /// terminals: 0 3
    /// 0: 1
    /// 1: 2
    /// 2: 3
    /// ```
    ///
    /// Edges may be listed from either side. Without an `n:` line the vertex count is
    /// one more than the largest index mentioned.
    pub fn from_adjacency_text(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut terminals = Vec::new();
        let mut edges = Vec::new();
        let mut max_index = None::<usize>;
        let parse_list = |s: &str| -> Result<Vec<usize>> {
            s.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect()
        };
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected `key: values` in {line:?}")))?;
            match head.trim() {
                "n" => {
                    n = Some(
                        tail.trim()
                            .parse()
                            .map_err(|e| Error::Parse(format!("vertex count: {e}")))?,
                    )
                }
                "terminals" => terminals = parse_list(tail)?,
                v => {
                    let v: usize = v.parse().map_err(|e| Error::Parse(format!("{v:?}: {e}")))?;
                    max_index = max_index.max(Some(v));
                    for w in parse_list(tail)? {
                        max_index = max_index.max(Some(w));
                        edges.push((v, w));
                    }
                }
            }
        }
        for &t in &terminals {
            max_index = max_index.max(Some(t));
        }
        let n = n.unwrap_or(max_index.map_or(0, |m| m + 1));
        Graph::from_edges(n, edges, terminals)
    }

    pub fn to_adjacency_text(&self) -> String {
        let mut out = format!("n: {}\n", self.n);
        let t: Vec<String> = self.terminals.iter().map(|t| t.to_string()).collect();
        out.push_str(&format!("terminals: {}\n", t.join(" ")));
        for v in 0..self.n {
            let nb: Vec<String> = self.neighbors(v).map(|w| w.to_string()).collect();
            out.push_str(&format!("{v}: {}\n", nb.join(" ")));
        }
        out
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges())
            .field("terminals", &self.terminals.as_slice())
            .finish()
    }
}

/// JSON form `{n, edges: [[i,j],…], terminals: […], layers: […]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub terminals: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
}

/// Graph whose edges carry controlled-phase angles (radians).
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    base: Graph,
    phases: BTreeMap<(usize, usize), f64>,
}

impl WeightedGraph {
    /// Every edge gets the same phase.
    pub fn uniform(base: Graph, phase: f64) -> Self {
        let phases = base.edges().into_iter().map(|e| (e, phase)).collect();
        WeightedGraph { base, phases }
    }

    /// Phase π on every edge: the ordinary graph state.
    pub fn ideal(base: Graph) -> Self {
        Self::uniform(base, PI)
    }

    pub fn with_phases(base: Graph, phases: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let edges = base.edges();
        if phases.len() != edges.len() || edges.iter().any(|e| !phases.contains_key(e)) {
            return Err(Error::InvalidGraph(
                "phases must be given exactly on the edges, keyed as (i, j) with i < j".into(),
            ));
        }
        Ok(WeightedGraph { base, phases })
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn phase(&self, a: usize, b: usize) -> Option<f64> {
        self.phases.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn phases(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.phases.iter().map(|(&e, &p)| (e, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Path,
    #[serde(alias = "twisted", alias = "twist")]
    TwistedPair,
    Crazy,
    #[serde(alias = "ghz_path")]
    GhzPathStar,
    #[serde(alias = "ghz_crazy")]
    GhzCrazyStar,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Path => "path",
            FamilyKind::TwistedPair => "twisted_pair",
            FamilyKind::Crazy => "crazy",
            FamilyKind::GhzPathStar => "ghz_path_star",
            FamilyKind::GhzCrazyStar => "ghz_crazy_star",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "path" => Ok(FamilyKind::Path),
            "twisted_pair" | "twisted" | "twist" => Ok(FamilyKind::TwistedPair),
            "crazy" => Ok(FamilyKind::Crazy),
            "ghz_path_star" | "ghz_path" => Ok(FamilyKind::GhzPathStar),
            "ghz_crazy_star" | "ghz_crazy" => Ok(FamilyKind::GhzCrazyStar),
            other => Err(Error::InvalidFamily(format!("unknown family kind {other:?}"))),
        }
    }
}

fn default_arms() -> usize {
    3
}

/// A member of one of the parameterised template families.
///
/// `n` is the number of internal layers (linear families) or the number of
/// internal layers per arm (star templates). Star templates join `arms` sections at
/// one central measured vertex; two arms give a Bell template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub n: usize,
    #[serde(default = "default_arms")]
    pub arms: usize,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, n: usize) -> Self {
        FamilySpec { kind, n, arms: 3 }
    }

    pub fn star(kind: FamilyKind, n: usize, arms: usize) -> Self {
        FamilySpec { kind, n, arms }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidFamily("length n must be at least 1".into()));
        }
        if self.kind == FamilyKind::TwistedPair && self.n.is_multiple_of(2) {
            return Err(Error::InvalidFamily(format!(
                "twisted pair needs an odd number of internal layers, got {}",
                self.n
            )));
        }
        if matches!(self.kind, FamilyKind::GhzPathStar | FamilyKind::GhzCrazyStar) && self.arms < 2 {
            return Err(Error::InvalidFamily(format!(
                "star templates need at least 2 arms, got {}",
                self.arms
            )));
        }
        Ok(())
    }

    /// Number of terminal vertices the template produces.
    pub fn terminal_count(&self) -> usize {
        match self.kind {
            FamilyKind::GhzPathStar | FamilyKind::GhzCrazyStar => self.arms,
            _ => 2,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            FamilyKind::GhzPathStar | FamilyKind::GhzCrazyStar => {
                format!("{}[arms={}]", self.kind, self.arms)
            }
            _ => self.kind.to_string(),
        }
    }
}

/// Full bipartite connections between consecutive layers of the given sizes.
/// Terminals are the (single) vertices of the first and last layer.
fn layered(sizes: &[usize]) -> Graph {
    let n: usize = sizes.iter().sum();
    let mut g = Graph::new(n);
    let mut starts = Vec::with_capacity(sizes.len());
    let mut layers = Vec::with_capacity(n);
    let mut c = 0;
    for (k, &s) in sizes.iter().enumerate() {
        starts.push(c);
        layers.extend(std::iter::repeat_n(k, s));
        c += s;
    }
    for k in 0..sizes.len() - 1 {
        for a in starts[k]..starts[k] + sizes[k] {
            for b in starts[k + 1]..starts[k + 1] + sizes[k + 1] {
                g.add_edge(a, b).expect("layered edges are valid");
            }
        }
    }
    g.terminals = QubitSubset::new([0, n - 1], n).expect("two distinct terminals");
    g.layers = Some(layers);
    g
}

/// Star template: arm 0 runs from its terminal inwards, then the centre, then every
/// other arm runs outwards ending at its terminal. Layer = distance from the centre.
fn star(inner: &[usize], arms: usize) -> Graph {
    let per_arm: usize = inner.iter().sum::<usize>() + 1;
    let n = 1 + arms * per_arm;
    let mut g = Graph::new(n);
    let mut layers = vec![0usize; n];
    let mut terminals = Vec::with_capacity(arms);
    let center = per_arm;
    // Vertex groups per arm, ordered from the centre outwards.
    let mut next = 0usize;
    let mut arm_groups: Vec<Vec<Vec<usize>>> = Vec::with_capacity(arms);
    for arm in 0..arms {
        let mut sizes: Vec<usize> = inner.to_vec();
        sizes.push(1);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
        if arm == 0 {
            for (k, &s) in sizes.iter().enumerate().rev() {
                groups[k] = (next..next + s).collect();
                next += s;
            }
            next += 1; // centre
        } else {
            for (k, &s) in sizes.iter().enumerate() {
                groups[k] = (next..next + s).collect();
                next += s;
            }
        }
        arm_groups.push(groups);
    }
    debug_assert_eq!(next, n);
    for groups in &arm_groups {
        let mut prev = vec![center];
        for (k, grp) in groups.iter().enumerate() {
            for &v in grp {
                layers[v] = k + 1;
                for &u in &prev {
                    g.add_edge(u, v).expect("star edges are valid");
                }
            }
            prev = grp.clone();
        }
        terminals.push(prev[0]);
    }
    g.terminals = QubitSubset::new(terminals, n).expect("distinct terminals");
    g.layers = Some(layers);
    g
}

/// Builds the template graph of a family member.
pub fn build_family(spec: &FamilySpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n;
    let g = match spec.kind {
        FamilyKind::Path => layered(&vec![1; n + 2]),
        FamilyKind::Crazy => {
            let mut sizes = vec![1];
            sizes.extend(std::iter::repeat_n(2, n));
            sizes.push(1);
            layered(&sizes)
        }
        FamilyKind::TwistedPair => {
            let mut sizes = vec![1];
            sizes.extend((1..=n).map(|k| if k % 2 == 1 { 2 } else { 1 }));
            sizes.push(1);
            layered(&sizes)
        }
        FamilyKind::GhzPathStar => star(&vec![1; n], spec.arms),
        FamilyKind::GhzCrazyStar => star(&vec![2; n], spec.arms),
    };
    Ok(g)
}

/// Graph-state stabilizer generator `X_i ∏_{j ∈ N(i)} Z_j`.
pub fn generator(g: &Graph, i: usize) -> Result<PauliString> {
    let mut p = PauliString::single(g.num_vertices(), i, Pauli::X)?;
    for j in g.neighbors(i) {
        p.set_pauli(j, Pauli::Z);
    }
    Ok(p)
}

/// Removes every edge independently with probability `p`.
pub fn random_subgraph<R: Rng + ?Sized>(g: &Graph, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("edge-loss probability {p} not in [0, 1]")));
    }
    let mut out = g.clone();
    for (a, b) in g.edges() {
        if rng.random_bool(p) {
            out.remove_edge(a, b);
        }
    }
    Ok(out)
}

/// Every subgraph with exactly `k` edges removed, each with multiplicity 1.
/// The weight `p^k (1-p)^{|E|-k}` is left to the caller.
pub fn enumerate_edge_defects(g: &Graph, k: usize) -> Result<Vec<(Graph, u64)>> {
    let edges = g.edges();
    if k == 0 || k > edges.len() {
        return Err(Error::DefectOrder {
            k,
            edges: edges.len(),
        });
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut sub = g.clone();
        for &i in &idx {
            let (a, b) = edges[i];
            sub.remove_edge(a, b);
        }
        out.push((sub, 1));
        // Next k-combination in lexicographic order.
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == edges.len() - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], [1, 3]).unwrap()
    }

    #[test]
    fn path_n2_is_four_path() {
        let g = build_family(&FamilySpec::new(FamilyKind::Path, 2)).unwrap();
        assert_eq!(g.num_vertices(), 4);
        assert_eq!(g.edges(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g.terminals().as_slice(), &[0, 3]);
    }

    #[test]
    fn crazy_n3_layout() {
        let g = build_family(&FamilySpec::new(FamilyKind::Crazy, 3)).unwrap();
        assert_eq!(g.num_vertices(), 8);
        assert_eq!(g.edge_count(), 2 + 4 + 4 + 2);
        assert_eq!(g.terminals().as_slice(), &[0, 7]);
        assert_eq!(g.layers().unwrap(), &[0, 1, 1, 2, 2, 3, 3, 4]);
        // Internal vertex in layer 2 sees both vertices of layers 1 and 3.
        assert_eq!(g.neighbors(3).collect::<Vec<_>>(), vec![1, 2, 5, 6]);
    }

    #[test]
    fn twisted_n1_is_square() {
        let g = build_family(&FamilySpec::new(FamilyKind::TwistedPair, 1)).unwrap();
        assert_eq!(g.num_vertices(), 4);
        assert_eq!(g.edge_count(), 4);
        assert!((0..4).all(|v| g.degree(v) == 2));
        // Terminals are opposite corners of the 4-cycle.
        assert!(!g.has_edge(0, 3));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_family(&FamilySpec::new(FamilyKind::Path, 0)).is_err());
        assert!(build_family(&FamilySpec::new(FamilyKind::TwistedPair, 2)).is_err());
        assert!(build_family(&FamilySpec::star(FamilyKind::GhzCrazyStar, 1, 1)).is_err());
    }

    #[test]
    fn star_templates() {
        let g = build_family(&FamilySpec::star(FamilyKind::GhzPathStar, 2, 3)).unwrap();
        assert_eq!(g.num_vertices(), 10);
        assert_eq!(g.edge_count(), 9);
        assert_eq!(g.terminals().len(), 3);
        let center = 3;
        assert_eq!(g.degree(center), 3);
        assert_eq!(g.terminals().as_slice()[0], 0);
        assert_eq!(*g.terminals().as_slice().last().unwrap(), 9);
        let two_arm = build_family(&FamilySpec::star(FamilyKind::GhzPathStar, 1, 2)).unwrap();
        assert_eq!(two_arm.edges(), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        let crazy = build_family(&FamilySpec::star(FamilyKind::GhzCrazyStar, 1, 3)).unwrap();
        assert_eq!(crazy.num_vertices(), 10);
        assert_eq!(crazy.edge_count(), 12);
        crazy.validate().unwrap();
    }

    #[test]
    fn families_are_well_formed() {
        for kind in [
            FamilyKind::Path,
            FamilyKind::TwistedPair,
            FamilyKind::Crazy,
            FamilyKind::GhzPathStar,
            FamilyKind::GhzCrazyStar,
        ] {
            for n in 1..=8 {
                let spec = FamilySpec::new(kind, n);
                let Ok(g) = build_family(&spec) else {
                    assert!(kind == FamilyKind::TwistedPair && n % 2 == 0);
                    continue;
                };
                g.validate().unwrap();
                let layers = g.layers().unwrap();
                let max = *layers.iter().max().unwrap();
                for t in g.terminals().iter() {
                    assert!(layers[t] == max || layers[t] == 0);
                }
                for i in 0..g.num_vertices() {
                    for j in 0..g.num_vertices() {
                        let (a, b) = (generator(&g, i).unwrap(), generator(&g, j).unwrap());
                        assert!(a.commutes(&b).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn square_generator() {
        assert_eq!(generator(&square(), 0).unwrap(), "+XZIZ".parse().unwrap());
        let lonely = Graph::new(3);
        assert_eq!(generator(&lonely, 1).unwrap(), "+IXI".parse().unwrap());
        assert!(generator(&lonely, 3).is_err());
    }

    #[test]
    fn crazy_internal_generator() {
        let g = build_family(&FamilySpec::new(FamilyKind::Crazy, 3)).unwrap();
        let p = generator(&g, 1).unwrap();
        assert_eq!(p.to_string(), "+ZXIZZIII");
        assert_eq!(generator(&g, 3).unwrap().weight(), 5);
    }

    #[test]
    fn random_subgraph_extremes() {
        let g = square();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_subgraph(&g, 0.0, &mut rng).unwrap(), g);
        assert_eq!(random_subgraph(&g, 1.0, &mut rng).unwrap().edge_count(), 0);
        assert!(random_subgraph(&g, 1.5, &mut rng).is_err());
    }

    #[test]
    fn random_subgraph_frequency() {
        let g = square();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut lost = [0usize; 4];
        for _ in 0..draws {
            let s = random_subgraph(&g, 0.3, &mut rng).unwrap();
            for (k, &(a, b)) in g.edges().iter().enumerate() {
                assert!(!s.has_edge(a, b) || g.has_edge(a, b));
                if !s.has_edge(a, b) {
                    lost[k] += 1;
                }
            }
        }
        for l in lost {
            let f = l as f64 / draws as f64;
            assert!((f - 0.3).abs() < 0.005, "frequency {f}");
        }
    }

    #[test]
    fn edge_defects() {
        let d = enumerate_edge_defects(&square(), 1).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|(g, m)| g.edge_count() == 3 && *m == 1));
        let path = build_family(&FamilySpec::new(FamilyKind::Path, 2)).unwrap();
        assert_eq!(enumerate_edge_defects(&path, 1).unwrap().len(), 3);
        assert_eq!(enumerate_edge_defects(&path, 2).unwrap().len(), 3);
        assert_eq!(enumerate_edge_defects(&path, 3).unwrap().len(), 1);
        assert!(enumerate_edge_defects(&path, 4).is_err());
        let crazy = build_family(&FamilySpec::new(FamilyKind::Crazy, 2)).unwrap();
        assert_eq!(crazy.edge_count(), 8);
        assert_eq!(enumerate_edge_defects(&crazy, 1).unwrap().len(), 8);
        assert_eq!(enumerate_edge_defects(&crazy, 2).unwrap().len(), 28);
    }

    #[test]
    fn json_and_text_formats() {
        let g = build_family(&FamilySpec::new(FamilyKind::Crazy, 2)).unwrap();
        let json = serde_json::to_string(&g.to_json()).unwrap();
        let back: GraphJson = serde_json::from_str(&json).unwrap();
        assert_eq!(Graph::from_json(&back).unwrap(), g);
        let text = "# square\nterminals: 1 3\n0: 1 3\n2: 1 3\n";
        let parsed = Graph::from_adjacency_text(text).unwrap();
        assert_eq!(parsed.edges(), square().edges());
        assert_eq!(parsed.terminals().as_slice(), &[1, 3]);
        let again = Graph::from_adjacency_text(&parsed.to_adjacency_text()).unwrap();
        assert_eq!(again.edges(), parsed.edges());
        assert!(Graph::from_adjacency_text("0: 0").is_err());
        let bad = GraphJson {
            n: 3,
            edges: vec![[0, 1], [1, 2]],
            terminals: vec![],
            layers: Some(vec![0, 1, 1]),
        };
        assert!(Graph::from_json(&bad).is_err());
    }

    #[test]
    fn weighted_graph_phases() {
        let w = WeightedGraph::ideal(square());
        assert_eq!(w.phase(1, 0), Some(PI));
        assert_eq!(w.phase(0, 2), None);
        let mut phases = BTreeMap::new();
        phases.insert((0, 1), 0.5);
        assert!(WeightedGraph::with_phases(square(), phases).is_err());
    }
}
