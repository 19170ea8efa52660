//! Stallings subgroup graphs for finitely generated subgroups of free groups.
//!
//! A [`SubgroupGraph`] is the folded, based core graph of a subgroup: a
//! connected edge-labeled digraph with a basepoint, deterministic in both
//! directions per label, in which every non-basepoint vertex lies on some
//! accepted loop. Membership is path reading, rank is `E − V + 1`, and finite
//! index is completeness of the labeling.
//!
//! Graphs are held in canonical form: vertices are numbered breadth-first from
//! the basepoint with edges visited in (label, direction) order, so structural
//! equality coincides with based labeled-graph isomorphism and the text
//! serialization is bit-exact across runs.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::words::{Letter, Word, WordError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("alphabet mismatch: rank {left} vs rank {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("subgroup has finite index {index}; no free complement exists")]
    NoComplement { index: usize },
}

/// Index of a subgroup in the ambient free group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Index {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Finite(v) => write!(f, "{v}"),
            Index::Infinite => write!(f, "infinite"),
        }
    }
}

/// A list of words that freely generate the subgroup they span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    words: Vec<Word>,
}

impl Basis {
    pub fn new(words: Vec<Word>) -> Basis {
        Basis { words }
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Shortest word of the basis, ties broken lexicographically.
    pub fn select_shortest(&self) -> Option<Word> {
        self.words.iter().min_by(|a, b| a.cmp_short_lex(b)).cloned()
    }

    /// Checks the defining invariant: the graph of the spanned subgroup has
    /// rank equal to the number of words.
    pub fn spans_freely(&self, alphabet_rank: usize) -> Result<bool, GraphError> {
        let graph = SubgroupGraph::build(alphabet_rank, &self.words)?;
        Ok(graph.rank() == self.words.len())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[rb.max(ra)] = rb.min(ra);
        true
    }
}

/// Folded based core graph of a finitely generated subgroup.
///
/// `fwd[v][l-1]` / `bwd[v][l-1]` give the target / source of the unique
/// l-labeled edge leaving / entering `v`. The basepoint is vertex 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupGraph {
    alphabet_rank: usize,
    fwd: Vec<Vec<Option<u32>>>,
    bwd: Vec<Vec<Option<u32>>>,
}

impl SubgroupGraph {
    /// Folds the wedge of generator loops into the canonical core graph of
    /// `⟨generators⟩`. An empty generator list yields the trivial graph.
    pub fn build(alphabet_rank: usize, generators: &[Word]) -> Result<SubgroupGraph, GraphError> {
        let mut vertex_count = 1usize;
        let mut edges: Vec<(usize, usize, usize)> = Vec::new();
        for word in generators {
            if word.rank() != alphabet_rank {
                return Err(GraphError::RankMismatch { left: alphabet_rank, right: word.rank() });
            }
            let letters = word.letters();
            if letters.is_empty() {
                continue;
            }
            let mut current = 0usize;
            for (i, &letter) in letters.iter().enumerate() {
                let next = if i + 1 == letters.len() {
                    0
                } else {
                    vertex_count += 1;
                    vertex_count - 1
                };
                if letter.is_inverse() {
                    edges.push((next, letter.generator(), current));
                } else {
                    edges.push((current, letter.generator(), next));
                }
                current = next;
            }
        }
        let (base, folded) = fold(vertex_count, edges);
        let pruned = prune_hairs(base, folded);
        Ok(canonicalize(alphabet_rank, base, &pruned))
    }

    /// The trivial subgroup graph: one vertex, no edges.
    pub fn trivial(alphabet_rank: usize) -> SubgroupGraph {
        SubgroupGraph {
            alphabet_rank,
            fwd: vec![vec![None; alphabet_rank]],
            bwd: vec![vec![None; alphabet_rank]],
        }
    }

    /// The graph of the whole free group: one vertex with a loop per label.
    pub fn full_rose(alphabet_rank: usize) -> SubgroupGraph {
        SubgroupGraph {
            alphabet_rank,
            fwd: vec![vec![Some(0); alphabet_rank]],
            bwd: vec![vec![Some(0); alphabet_rank]],
        }
    }

    pub fn alphabet_rank(&self) -> usize {
        self.alphabet_rank
    }

    pub fn vertex_count(&self) -> usize {
        self.fwd.len()
    }

    pub fn edge_count(&self) -> usize {
        self.fwd.iter().flatten().filter(|t| t.is_some()).count()
    }

    /// All edges as `(from, label, to)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut edges = Vec::new();
        for (v, row) in self.fwd.iter().enumerate() {
            for (l, target) in row.iter().enumerate() {
                if let Some(t) = target {
                    edges.push((v, l + 1, *t as usize));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    fn step(&self, vertex: usize, letter: Letter) -> Option<usize> {
        let slot = letter.generator() - 1;
        if letter.is_inverse() {
            self.bwd[vertex][slot].map(|v| v as usize)
        } else {
            self.fwd[vertex][slot].map(|v| v as usize)
        }
    }

    /// True iff `w` labels a basepoint-to-basepoint path.
    pub fn contains(&self, w: &Word) -> Result<bool, GraphError> {
        if w.rank() != self.alphabet_rank {
            return Err(GraphError::RankMismatch { left: self.alphabet_rank, right: w.rank() });
        }
        let mut current = 0usize;
        for &letter in w.letters() {
            match self.step(current, letter) {
                Some(next) => current = next,
                None => return Ok(false),
            }
        }
        Ok(current == 0)
    }

    /// Rank of the subgroup: `E − V + 1`.
    pub fn rank(&self) -> usize {
        self.edge_count() + 1 - self.vertex_count()
    }

    /// Finite index iff the labeling is complete at every vertex.
    pub fn index(&self) -> Index {
        let complete = (0..self.vertex_count()).all(|v| {
            (0..self.alphabet_rank).all(|l| self.fwd[v][l].is_some() && self.bwd[v][l].is_some())
        });
        if complete {
            Index::Finite(self.vertex_count())
        } else {
            Index::Infinite
        }
    }

    /// Folded core of the pullback graph based at `(0, 0)`; accepts exactly
    /// the intersection of the two subgroups.
    pub fn intersect(&self, other: &SubgroupGraph) -> Result<SubgroupGraph, GraphError> {
        if self.alphabet_rank != other.alphabet_rank {
            return Err(GraphError::RankMismatch {
                left: self.alphabet_rank,
                right: other.alphabet_rank,
            });
        }
        let rank = self.alphabet_rank;
        // Undirected reachability from (0, 0) in the product graph.
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut order: Vec<(usize, usize)> = vec![(0, 0)];
        ids.insert((0, 0), 0);
        let mut head = 0;
        while head < order.len() {
            let (u1, u2) = order[head];
            head += 1;
            for l in 0..rank {
                let steps =
                    [(self.fwd[u1][l], other.fwd[u2][l]), (self.bwd[u1][l], other.bwd[u2][l])];
                for step in steps {
                    if let (Some(v1), Some(v2)) = step {
                        let key = (v1 as usize, v2 as usize);
                        if let Entry::Vacant(slot) = ids.entry(key) {
                            slot.insert(order.len());
                            order.push(key);
                        }
                    }
                }
            }
        }
        let mut edges = Vec::new();
        for (&(u1, u2), &uid) in &ids {
            for l in 0..rank {
                if let (Some(v1), Some(v2)) = (self.fwd[u1][l], other.fwd[u2][l]) {
                    if let Some(&vid) = ids.get(&(v1 as usize, v2 as usize)) {
                        edges.push((uid, l + 1, vid));
                    }
                }
            }
        }
        let pruned = prune_hairs(0, edges);
        Ok(canonicalize(rank, 0, &pruned))
    }

    /// Breadth-first spanning tree paths: `paths[v]` spells the tree path
    /// from the basepoint to `v`. The tree edge set is returned alongside.
    fn spanning_tree(&self) -> (Vec<Word>, Vec<(usize, usize, usize)>) {
        let rank = self.alphabet_rank;
        let mut paths: Vec<Option<Word>> = vec![None; self.vertex_count()];
        paths[0] = Some(Word::identity(rank));
        let mut tree_edges = Vec::new();
        // Vertices are already in BFS order, so a single increasing sweep
        // discovers each vertex from an earlier one.
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let base = paths[v].clone().expect("visited vertex has a path");
            for l in 0..rank {
                if let Some(w) = self.fwd[v][l] {
                    let w = w as usize;
                    if paths[w].is_none() {
                        let letter = Letter::new(l + 1, false);
                        paths[w] = Some(base.mul(&Word::reduce(rank, [letter]).unwrap()).unwrap());
                        tree_edges.push((v, l + 1, w));
                        queue.push_back(w);
                    }
                }
                if let Some(w) = self.bwd[v][l] {
                    let w = w as usize;
                    if paths[w].is_none() {
                        let letter = Letter::new(l + 1, true);
                        paths[w] = Some(base.mul(&Word::reduce(rank, [letter]).unwrap()).unwrap());
                        tree_edges.push((w, l + 1, v));
                        queue.push_back(w);
                    }
                }
            }
        }
        let paths = paths.into_iter().map(|p| p.expect("graph is connected")).collect();
        (paths, tree_edges)
    }

    /// Non-tree edges in sorted order together with their basis words.
    fn cycle_edges(&self) -> (Vec<(usize, usize, usize)>, Vec<Word>) {
        let (paths, tree_edges) = self.spanning_tree();
        let tree: std::collections::HashSet<_> = tree_edges.into_iter().collect();
        let mut cycles = Vec::new();
        let mut words = Vec::new();
        for edge in self.edges() {
            if tree.contains(&edge) {
                continue;
            }
            let (u, l, v) = edge;
            let letter = Word::reduce(self.alphabet_rank, [Letter::new(l, false)]).unwrap();
            let word = paths[u].mul(&letter).unwrap().mul(&paths[v].inverse()).unwrap();
            cycles.push(edge);
            words.push(word);
        }
        (cycles, words)
    }

    /// Free basis of the subgroup: one word per non-tree edge of the
    /// breadth-first spanning tree; `|basis| = rank`.
    pub fn basis(&self) -> Basis {
        Basis::new(self.cycle_edges().1)
    }

    /// Expresses `w` over [`SubgroupGraph::basis`]: returns signed 1-based
    /// indices `e` such that `∏ basis[|e_i|-1]^{sign e_i} = w`, or `None` if
    /// `w` is not in the subgroup.
    pub fn express(&self, w: &Word) -> Option<Vec<i32>> {
        if w.rank() != self.alphabet_rank {
            return None;
        }
        let (cycles, _) = self.cycle_edges();
        let index_of: HashMap<(usize, usize, usize), usize> =
            cycles.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut expression = Vec::new();
        let mut current = 0usize;
        for &letter in w.letters() {
            let next = self.step(current, letter)?;
            let edge = if letter.is_inverse() {
                (next, letter.generator(), current)
            } else {
                (current, letter.generator(), next)
            };
            if let Some(&i) = index_of.get(&edge) {
                let signed = (i + 1) as i32;
                expression.push(if letter.is_inverse() { -signed } else { signed });
            }
            current = next;
        }
        (current == 0).then_some(expression)
    }

    /// Hall completion: a free complement `K` with `⟨H ∪ K⟩ = H ∗ ⟨K⟩`.
    ///
    /// The partial label maps are completed to permutations of the vertex set
    /// (each missing outgoing label is wired, in vertex order, to the
    /// smallest-numbered vertex still missing the matching incoming label).
    /// The words of the added non-tree edges freely generate the complement;
    /// rank additivity `rank(⟨H ∪ K⟩) = rank(H) + |K|` is checked before
    /// returning.
    pub fn hall_complement(&self) -> Result<Basis, GraphError> {
        if let Index::Finite(index) = self.index() {
            return Err(GraphError::NoComplement { index });
        }
        let rank = self.alphabet_rank;
        let vertices = self.vertex_count();
        let (paths, _) = self.spanning_tree();
        let mut words = Vec::new();
        for l in 0..rank {
            let mut has_in: Vec<bool> = (0..vertices).map(|v| self.bwd[v][l].is_some()).collect();
            for v in 0..vertices {
                if self.fwd[v][l].is_some() {
                    continue;
                }
                let target = (0..vertices)
                    .find(|&w| !has_in[w])
                    .expect("missing out-labels match missing in-labels");
                has_in[target] = true;
                let letter = Word::reduce(rank, [Letter::new(l + 1, false)]).unwrap();
                let word = paths[v].mul(&letter).unwrap().mul(&paths[target].inverse()).unwrap();
                words.push(word);
            }
        }
        let complement = Basis::new(words);
        debug_assert!({
            let mut all: Vec<Word> = self.basis().words().to_vec();
            all.extend_from_slice(complement.words());
            let joined = SubgroupGraph::build(rank, &all)
                .expect("complement words share the subgroup's alphabet");
            joined.rank() == self.rank() + complement.len()
        });
        Ok(complement)
    }

    /// Line-oriented canonical serialization: `V <count>`, `B 0`, then sorted
    /// `E <from> <label> <to>` rows. Bit-exact across runs.
    pub fn canonical_serialization(&self) -> String {
        let mut out = format!("V {}\nB 0\n", self.vertex_count());
        for (u, l, v) in self.edges() {
            out.push_str(&format!("E {u} {l} {v}\n"));
        }
        out
    }
}

/// Folds the edge list to a deterministic graph: repeatedly identifies the
/// targets (sources) of equally labeled edges leaving (entering) a common
/// vertex. Returns the basepoint class and the deduplicated folded edges.
fn fold(vertex_count: usize, edges: Vec<(usize, usize, usize)>) -> (usize, Vec<(usize, usize, usize)>) {
    let mut uf = UnionFind::new(vertex_count);
    let mut alive = vec![true; edges.len()];
    loop {
        let mut changed = false;
        let mut out_first: HashMap<(usize, usize), usize> = HashMap::new();
        let mut in_first: HashMap<(usize, usize), usize> = HashMap::new();
        for i in 0..edges.len() {
            if !alive[i] {
                continue;
            }
            let (u, l, v) = edges[i];
            let (cu, cv) = (uf.find(u), uf.find(v));
            if let Some(&j) = out_first.get(&(cu, l)) {
                let other = uf.find(edges[j].2);
                uf.union(cv, other);
                alive[i] = false;
                changed = true;
                continue;
            }
            out_first.insert((cu, l), i);
            if let Some(&j) = in_first.get(&(cv, l)) {
                // Identifying the sources makes i a parallel duplicate of j.
                let other = uf.find(edges[j].0);
                uf.union(cu, other);
                alive[i] = false;
                changed = true;
                continue;
            }
            in_first.insert((cv, l), i);
        }
        if !changed {
            break;
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut folded = Vec::new();
    for (i, &(u, l, v)) in edges.iter().enumerate() {
        if alive[i] {
            let edge = (uf.find(u), l, uf.find(v));
            if seen.insert(edge) {
                folded.push(edge);
            }
        }
    }
    (uf.find(0), folded)
}

/// Removes hanging trees: non-basepoint vertices of total degree ≤ 1,
/// iterated to a fixed point. The result is the based core graph.
fn prune_hairs(base: usize, edges: Vec<(usize, usize, usize)>) -> Vec<(usize, usize, usize)> {
    let mut edges = edges;
    loop {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for &(u, _, v) in &edges {
            *degree.entry(u).or_default() += 1;
            *degree.entry(v).or_default() += 1;
        }
        let before = edges.len();
        edges.retain(|&(u, _, v)| {
            let hair = |x: usize| x != base && degree.get(&x).copied().unwrap_or(0) <= 1;
            !(hair(u) || hair(v))
        });
        if edges.len() == before {
            return edges;
        }
    }
}

/// Renumbers vertices breadth-first from the basepoint, edges visited in
/// (label, direction) order with forward before backward, and packs the
/// result into dense transition tables.
fn canonicalize(alphabet_rank: usize, base: usize, edges: &[(usize, usize, usize)]) -> SubgroupGraph {
    let mut out_adj: HashMap<(usize, usize), usize> = HashMap::new();
    let mut in_adj: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, l, v) in edges {
        out_adj.insert((u, l), v);
        in_adj.insert((v, l), u);
    }
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut order = vec![base];
    number.insert(base, 0);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for l in 1..=alphabet_rank {
            for target in [out_adj.get(&(v, l)), in_adj.get(&(v, l))].into_iter().flatten() {
                if !number.contains_key(target) {
                    number.insert(*target, order.len());
                    order.push(*target);
                }
            }
        }
    }
    let count = order.len();
    let mut fwd = vec![vec![None; alphabet_rank]; count];
    let mut bwd = vec![vec![None; alphabet_rank]; count];
    for &(u, l, v) in edges {
        let (cu, cv) = (number[&u], number[&v]);
        fwd[cu][l - 1] = Some(cv as u32);
        bwd[cv][l - 1] = Some(cu as u32);
    }
    SubgroupGraph { alphabet_rank, fwd, bwd }
}
