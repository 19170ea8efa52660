//! Endomorphisms of finitely generated free groups.
//!
//! A [`FreeEndo`] is given by the images of the generators. Injectivity and
//! surjectivity are decided through the subgroup graph of the image
//! (a surjection of a finitely generated free group onto a free group of the
//! same rank is an isomorphism, so the endomorphism is injective exactly when
//! its images freely generate a subgroup of full rank). For injective
//! endomorphisms, [`FreeEndo::preimage`] inverts elements of the image
//! exactly, using a folded image graph whose edges carry bookkeeping words
//! that record how each accepted loop decomposes over the generator images.

use std::cell::OnceCell;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::stallings::{Index, SubgroupGraph};
use crate::words::{Word, WordError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EndoError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("expected {expected} generator images, got {got}")]
    ImageCount { expected: usize, got: usize },
    #[error("endomorphism is not injective")]
    NotInjective,
}

/// An endomorphism of the free group of the given rank, presented by the
/// images of the generators.
#[derive(Clone)]
pub struct FreeEndo {
    rank: usize,
    images: Vec<Word>,
    image_graph: OnceCell<SubgroupGraph>,
    inverter: OnceCell<TaggedGraph>,
}

impl PartialEq for FreeEndo {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank && self.images == other.images
    }
}

impl Eq for FreeEndo {}

impl fmt::Debug for FreeEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreeEndo").field("rank", &self.rank).field("images", &self.images).finish()
    }
}

impl fmt::Display for FreeEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::expr::render_free_endo(self))
    }
}

impl FreeEndo {
    pub fn new(rank: usize, images: Vec<Word>) -> Result<FreeEndo, EndoError> {
        if images.len() != rank {
            return Err(EndoError::ImageCount { expected: rank, got: images.len() });
        }
        for image in &images {
            if image.rank() != rank {
                return Err(WordError::RankMismatch { left: rank, right: image.rank() }.into());
            }
        }
        Ok(FreeEndo { rank, images, image_graph: OnceCell::new(), inverter: OnceCell::new() })
    }

    pub fn identity(rank: usize) -> FreeEndo {
        let images = (1..=rank).map(|i| Word::generator(rank, i).unwrap()).collect();
        FreeEndo::new(rank, images).unwrap()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(i, w)| *w == Word::generator(self.rank, i + 1).unwrap())
    }

    /// Applies the endomorphism: substitutes each letter by its image and
    /// reduces.
    pub fn apply(&self, w: &Word) -> Result<Word, EndoError> {
        if w.rank() != self.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: w.rank() }.into());
        }
        let mut letters = Vec::new();
        for &letter in w.letters() {
            let image = &self.images[letter.generator() - 1];
            if letter.is_inverse() {
                letters.extend(image.letters().iter().rev().map(|l| l.inverse()));
            } else {
                letters.extend_from_slice(image.letters());
            }
        }
        Ok(Word::reduce(self.rank, letters)?)
    }

    /// Composition `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &FreeEndo) -> Result<FreeEndo, EndoError> {
        if other.rank != self.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: other.rank }.into());
        }
        let images = other.images.iter().map(|w| self.apply(w)).collect::<Result<_, _>>()?;
        FreeEndo::new(self.rank, images)
    }

    /// The `k`-th compositional power; `k = 0` is the identity.
    pub fn power(&self, k: u32) -> FreeEndo {
        let mut result = FreeEndo::identity(self.rank);
        for _ in 0..k {
            result = self.compose(&result).expect("powers share one rank");
        }
        result
    }

    /// Core graph of the image subgroup `⟨images⟩`.
    pub fn image_graph(&self) -> &SubgroupGraph {
        self.image_graph.get_or_init(|| {
            SubgroupGraph::build(self.rank, &self.images)
                .expect("images share the endomorphism's rank")
        })
    }

    /// Injective iff the images freely generate a rank-`rank` subgroup.
    pub fn is_injective(&self) -> bool {
        self.image_graph().rank() == self.rank
    }

    /// Surjective iff the image subgroup is the whole group (index 1).
    pub fn is_surjective(&self) -> bool {
        self.image_graph().index() == Index::Finite(1)
    }

    pub fn image_contains(&self, w: &Word) -> Result<bool, EndoError> {
        if w.rank() != self.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: w.rank() }.into());
        }
        Ok(self.image_graph().contains(w).expect("rank was checked"))
    }

    /// The unique `u` with `apply(u) = w`, or `None` if `w` is outside the
    /// image. Requires injectivity.
    pub fn preimage(&self, w: &Word) -> Result<Option<Word>, EndoError> {
        if w.rank() != self.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: w.rank() }.into());
        }
        if !self.is_injective() {
            return Err(EndoError::NotInjective);
        }
        let inverter = self.inverter.get_or_init(|| TaggedGraph::build(self));
        let preimage = inverter.express(w);
        if let Some(u) = &preimage {
            debug_assert_eq!(self.apply(u).unwrap(), *w, "preimage must map back to the input");
        }
        Ok(preimage)
    }
}

/// One edge of the tagged image graph. The tag is a word in the domain
/// alphabet; multiplying tags (inverted for backward steps) along an accepted
/// loop yields an expression of the loop's label over the generator images.
#[derive(Debug, Clone)]
struct TaggedEdge {
    src: usize,
    label: usize,
    dst: usize,
    tag: Word,
    alive: bool,
}

/// Folded image graph with tag bookkeeping, the inverse of an injective
/// endomorphism on its image.
///
/// Construction starts from the wedge of image loops, the first edge of the
/// `i`-th loop tagged with generator `i` and all others with the identity.
/// Folding identifies vertices as usual; before an edge is discarded as a
/// duplicate, a compensating tag rewrite at the merged vertex makes the two
/// tags equal, so the decomposition read off any surviving loop is unchanged.
/// Tags can grow while folding; this is intended for the small endomorphisms
/// the library manipulates, not for adversarial inputs.
#[derive(Debug, Clone)]
struct TaggedGraph {
    rank: usize,
    fwd: HashMap<(usize, usize), (usize, Word)>,
    bwd: HashMap<(usize, usize), (usize, Word)>,
}

impl TaggedGraph {
    fn build(endo: &FreeEndo) -> TaggedGraph {
        let rank = endo.rank;
        let mut vertex_count = 1usize;
        let mut edges: Vec<TaggedEdge> = Vec::new();
        for (i, image) in endo.images.iter().enumerate() {
            let letters = image.letters();
            let generator = Word::generator(rank, i + 1).unwrap();
            let mut current = 0usize;
            for (j, &letter) in letters.iter().enumerate() {
                let next = if j + 1 == letters.len() {
                    0
                } else {
                    vertex_count += 1;
                    vertex_count - 1
                };
                // Tag the first edge so the whole loop multiplies to x_{i+1}.
                let tag = if j == 0 {
                    if letter.is_inverse() {
                        generator.inverse()
                    } else {
                        generator.clone()
                    }
                } else {
                    Word::identity(rank)
                };
                let (src, dst) =
                    if letter.is_inverse() { (next, current) } else { (current, next) };
                edges.push(TaggedEdge { src, label: letter.generator(), dst, tag, alive: true });
                current = next;
            }
        }
        fold_tagged(rank, vertex_count, edges)
    }

    /// Traces `w` from the basepoint, multiplying tags; `Some` iff `w` labels
    /// an accepted loop, i.e. lies in the image subgroup.
    fn express(&self, w: &Word) -> Option<Word> {
        let mut vertex = 0usize;
        let mut acc = Word::identity(self.rank);
        for &letter in w.letters() {
            let key = (vertex, letter.generator());
            if letter.is_inverse() {
                let (next, tag) = self.bwd.get(&key)?;
                acc = acc.mul(&tag.inverse()).unwrap();
                vertex = *next;
            } else {
                let (next, tag) = self.fwd.get(&key)?;
                acc = acc.mul(tag).unwrap();
                vertex = *next;
            }
        }
        (vertex == 0).then_some(acc)
    }
}

/// Tag-preserving fold. Scans for a pair of equally labeled edges sharing a
/// source (or target), rewrites tags at the vertex about to be merged so the
/// duplicate edge's tag matches the kept edge's, unions the endpoints, drops
/// the duplicate, and restarts until no pair remains.
fn fold_tagged(rank: usize, vertex_count: usize, mut edges: Vec<TaggedEdge>) -> TaggedGraph {
    let mut parent: Vec<usize> = (0..vertex_count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    // Multiplies every tag incident to the class `at` by the gauge word: tags
    // of incoming edges by `d` on the right, outgoing by `d⁻¹` on the left.
    // Every through-traversal of the vertex is unchanged, so accepted loops
    // keep their decompositions.
    fn gauge(parent: &mut [usize], edges: &mut [TaggedEdge], at: usize, d: &Word) {
        let d_inv = d.inverse();
        for edge in edges.iter_mut().filter(|e| e.alive) {
            let src = find(parent, edge.src);
            let dst = find(parent, edge.dst);
            if dst == at {
                edge.tag = edge.tag.mul(d).unwrap();
            }
            if src == at {
                edge.tag = d_inv.mul(&edge.tag).unwrap();
            }
        }
    }

    'scan: loop {
        let mut out_first: HashMap<(usize, usize), usize> = HashMap::new();
        let mut in_first: HashMap<(usize, usize), usize> = HashMap::new();
        for i in 0..edges.len() {
            if !edges[i].alive {
                continue;
            }
            let src = find(&mut parent, edges[i].src);
            let dst = find(&mut parent, edges[i].dst);
            let label = edges[i].label;
            if let Some(&kept) = out_first.get(&(src, label)) {
                let kept_dst = find(&mut parent, edges[kept].dst);
                if dst != kept_dst {
                    // Re-tag so the duplicate edge agrees with the kept one,
                    // then merge its target into the kept target.
                    let (at, d) = if dst != 0 {
                        (dst, edges[i].tag.inverse().mul(&edges[kept].tag).unwrap())
                    } else {
                        (kept_dst, edges[kept].tag.inverse().mul(&edges[i].tag).unwrap())
                    };
                    gauge(&mut parent, &mut edges, at, &d);
                    let (ra, rb) = (find(&mut parent, kept_dst), find(&mut parent, dst));
                    parent[ra.max(rb)] = ra.min(rb);
                }
                debug_assert_eq!(edges[i].tag, edges[kept].tag, "parallel edges must agree");
                edges[i].alive = false;
                continue 'scan;
            }
            out_first.insert((src, label), i);
            if let Some(&kept) = in_first.get(&(dst, label)) {
                let kept_src = find(&mut parent, edges[kept].src);
                if src != kept_src {
                    let (at, d) = if src != 0 {
                        (src, edges[i].tag.mul(&edges[kept].tag.inverse()).unwrap())
                    } else {
                        (kept_src, edges[kept].tag.mul(&edges[i].tag.inverse()).unwrap())
                    };
                    gauge(&mut parent, &mut edges, at, &d);
                    let (ra, rb) = (find(&mut parent, kept_src), find(&mut parent, src));
                    parent[ra.max(rb)] = ra.min(rb);
                }
                debug_assert_eq!(edges[i].tag, edges[kept].tag, "parallel edges must agree");
                edges[i].alive = false;
                continue 'scan;
            }
            in_first.insert((dst, label), i);
        }
        break;
    }

    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    let base = find(&mut parent, 0);
    for edge in edges.iter().filter(|e| e.alive) {
        // Renumber so the basepoint class reads as 0.
        let renumber = |v: usize| if v == base { 0 } else if v == 0 { base } else { v };
        let src = renumber(find(&mut parent, edge.src));
        let dst = renumber(find(&mut parent, edge.dst));
        fwd.insert((src, edge.label), (dst, edge.tag.clone()));
        bwd.insert((dst, edge.label), (src, edge.tag.clone()));
    }
    TaggedGraph { rank, fwd, bwd }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::Letter;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn word(rank: usize, signed: &[i32]) -> Word {
        Word::reduce(rank, signed.iter().map(|&v| Letter::from_signed(v))).unwrap()
    }

    fn endo(rank: usize, images: &[&[i32]]) -> FreeEndo {
        FreeEndo::new(rank, images.iter().map(|w| word(rank, w)).collect()).unwrap()
    }

    /// a ↦ a, b ↦ b²: injective, image ⟨a, b²⟩ of infinite index.
    fn doubling() -> FreeEndo {
        endo(2, &[&[1], &[2, 2]])
    }

    fn random_word(rng: &mut StdRng, rank: i32, max_len: usize) -> Word {
        let len = rng.gen_range(0..=max_len);
        let letters: Vec<Letter> = (0..len)
            .map(|_| {
                let g = rng.gen_range(1..=rank);
                Letter::from_signed(if rng.gen() { g } else { -g })
            })
            .collect();
        Word::reduce(rank as usize, letters).unwrap()
    }

    #[test]
    fn apply_substitutes_and_reduces() {
        let phi = doubling();
        assert_eq!(phi.apply(&word(2, &[1, 2])).unwrap(), word(2, &[1, 2, 2]));
        assert_eq!(phi.apply(&word(2, &[2, -1])).unwrap(), word(2, &[2, 2, -1]));
        assert_eq!(phi.apply(&Word::identity(2)).unwrap(), Word::identity(2));
        // a ↦ ab, b ↦ b: (ab)(b⁻¹) reduces to a.
        let shear = endo(2, &[&[1, 2], &[2]]);
        assert_eq!(shear.apply(&word(2, &[1, -2])).unwrap(), word(2, &[1]));
    }

    #[test]
    fn apply_is_a_homomorphism() {
        let mut rng = StdRng::seed_from_u64(41);
        let phi = endo(2, &[&[1, 2], &[2, 1, -2]]);
        for _ in 0..200 {
            let u = random_word(&mut rng, 2, 10);
            let v = random_word(&mut rng, 2, 10);
            let lhs = phi.apply(&u.mul(&v).unwrap()).unwrap();
            let rhs = phi.apply(&u).unwrap().mul(&phi.apply(&v).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn powers_compose() {
        let phi = doubling();
        let squared = phi.power(2);
        assert_eq!(squared.images(), &[word(2, &[1]), word(2, &[2, 2, 2, 2])]);
        assert_eq!(phi.power(0), FreeEndo::identity(2));
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let w = random_word(&mut rng, 2, 8);
            let via_power = phi.power(3).apply(&w).unwrap();
            let via_repeat =
                phi.apply(&phi.apply(&phi.apply(&w).unwrap()).unwrap()).unwrap();
            assert_eq!(via_power, via_repeat);
        }
    }

    #[test]
    fn injectivity_and_surjectivity_classification() {
        assert!(FreeEndo::identity(2).is_injective());
        assert!(FreeEndo::identity(2).is_surjective());

        let phi = doubling();
        assert!(phi.is_injective());
        assert!(!phi.is_surjective());

        let swap = endo(2, &[&[2], &[1]]);
        assert!(swap.is_injective());
        assert!(swap.is_surjective());

        // a ↦ ab, b ↦ ab collapses to a cyclic image.
        let collapse = endo(2, &[&[1, 2], &[1, 2]]);
        assert!(!collapse.is_injective());
        assert!(!collapse.is_surjective());

        let both_squared = endo(2, &[&[1, 1], &[2, 2]]);
        assert!(both_squared.is_injective());
        assert!(!both_squared.is_surjective());
    }

    #[test]
    fn identity_detection() {
        assert!(FreeEndo::identity(3).is_identity());
        assert!(!doubling().is_identity());
        assert!(!endo(2, &[&[2], &[1]]).is_identity());
    }

    #[test]
    fn image_membership() {
        let phi = doubling();
        assert!(phi.image_contains(&word(2, &[1])).unwrap());
        assert!(phi.image_contains(&word(2, &[2, 2])).unwrap());
        assert!(!phi.image_contains(&word(2, &[2])).unwrap());
        assert!(!phi.image_contains(&word(2, &[2, 1, 2])).unwrap());
    }

    #[test]
    fn preimage_examples() {
        let phi = doubling();
        assert_eq!(
            phi.preimage(&word(2, &[1, 2, 2, 2, 2])).unwrap(),
            Some(word(2, &[1, 2, 2]))
        );
        assert_eq!(phi.preimage(&word(2, &[2])).unwrap(), None);
        assert_eq!(phi.preimage(&Word::identity(2)).unwrap(), Some(Word::identity(2)));
    }

    #[test]
    fn preimage_requires_injectivity() {
        let collapse = endo(2, &[&[1, 2], &[1, 2]]);
        assert_eq!(
            collapse.preimage(&word(2, &[1, 2])).unwrap_err(),
            EndoError::NotInjective
        );
    }

    #[test]
    fn preimage_inverts_apply_on_random_words() {
        let catalog = vec![
            doubling(),
            endo(2, &[&[1, 1], &[2, 2]]),
            endo(2, &[&[1, 2], &[2]]),
            endo(2, &[&[2], &[1, 2, -1]]),
            endo(3, &[&[1], &[2, 2], &[3, 1, 3]]),
            endo(2, &[&[1, 2], &[2, 1]]),
        ];
        let mut rng = StdRng::seed_from_u64(271);
        for phi in catalog {
            assert!(phi.is_injective(), "{phi:?} must be injective for this test");
            let rank = phi.rank() as i32;
            for _ in 0..100 {
                let u = random_word(&mut rng, rank, 8);
                let image = phi.apply(&u).unwrap();
                assert_eq!(
                    phi.preimage(&image).unwrap(),
                    Some(u.clone()),
                    "preimage(apply({u})) under {phi:?}"
                );
            }
        }
    }

    #[test]
    fn preimage_rejects_words_outside_the_image() {
        let phi = endo(2, &[&[1, 1], &[2, 2]]);
        for signed in [vec![1], vec![2], vec![1, 2], vec![1, 1, 2], vec![2, 1, 1]] {
            assert_eq!(phi.preimage(&word(2, &signed)).unwrap(), None, "{signed:?}");
        }
    }

    #[test]
    fn preimage_is_deterministic() {
        let phi = endo(2, &[&[1, 2], &[2, 1]]);
        let w = phi.apply(&word(2, &[1, -2, 1, 1, 2])).unwrap();
        assert_eq!(phi.preimage(&w).unwrap(), phi.preimage(&w).unwrap());
        let again = endo(2, &[&[1, 2], &[2, 1]]);
        assert_eq!(phi.preimage(&w).unwrap(), again.preimage(&w).unwrap());
    }

    #[test]
    fn rank_mismatch_errors() {
        let phi = doubling();
        assert!(matches!(
            phi.apply(&word(3, &[1])),
            Err(EndoError::Word(WordError::RankMismatch { .. }))
        ));
        assert!(FreeEndo::new(2, vec![word(2, &[1])]).is_err());
        assert!(FreeEndo::new(2, vec![word(2, &[1]), word(3, &[2])]).is_err());
    }
}
