//! Witness constructions against the Howson property, and their
//! machine-checkable certificates.
//!
//! Two pipelines are provided; the README states the numbered results they
//! certify and the notation used below.
//!
//! - [`certify_theorem2`]: for an injective, non-surjective endomorphism `φ`
//!   of a free base of rank ≥ 2, pick a free complement `K` of `im φ`, form
//!   the conjugate levels `K_r = t^{-r} K t^r` inside the extension, and
//!   witness that the finitely generated subgroups `F = ⟨K, t⟩` and the base
//!   `G` intersect in a subgroup that is not finitely generated: the level
//!   subgroups `M_r = ⟨K_0, …, K_r⟩` all lie in `F ∩ G` and their ranks grow
//!   strictly — by free-product additivity, `rank(M_r) = (r+1)·|K|`.
//! - [`certify_theorem3`]: for a direct product `A × B` with injective,
//!   non-surjective factor endomorphisms and a witness `b ∈ B` outside
//!   `im φ_B`, witness the same failure for `C = ⟨A, t⟩` and `D = ⟨A, t·b⟩`
//!   through the non-cancellation of `(t·b)^m` and the conjugation identity
//!   `(t·b) · t^k a t^{-k} · (t·b)^{-1} = t^{k+1} a t^{-(k+1)}`.
//!
//! Randomized probes ([`free_product_probe`], [`lemma2_probe`]) attack the
//! structural claims underlying the first pipeline; their seeds are recorded
//! in the certificate so every run is reproducible. Certificates are
//! re-derivable from their own text alone via
//! [`certificate::verify_certificate`].

pub mod certificate;

pub use certificate::{
    verify_certificate, Certificate, CertificateKind, CheckResult, GeneratorEntry, Level,
    Obligation, VerifyError, VerifyReport, CERTIFICATE_SCHEMA,
};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::basegroup::{BaseError, BaseGroup, FactorGroup, FreeBase, Instance, ProductBase};
use crate::endo::{EndoError, FreeEndo};
use crate::expr::{self, ExprError, NameCtx};
use crate::hnn::{Hnn, HnnElement, HnnError, DEFAULT_DEPTH_LIMIT};
use crate::stallings::{Basis, GraphError, SubgroupGraph};
use crate::words::{Word, WordError};

/// Failures of the construction pipelines. The CLI maps these onto exit
/// codes: hypothesis gating is distinct from construction failure, which is
/// distinct from bad input.
#[derive(Debug, Error)]
pub enum ConstructionError {
    /// The instance does not satisfy the hypotheses of the construction.
    #[error("not applicable: {0}")]
    NotApplicable(String),
    /// Extensions over a rank-1 free base have well-behaved intersections,
    /// so no witness exists there; the construction needs rank ≥ 2.
    #[error("the free base is cyclic; the construction needs a free base of rank at least 2")]
    CyclicBase,
    /// The chosen witness lies in the image and certifies nothing.
    #[error("invalid witness: `{0}` lies in the image of the second factor's endomorphism")]
    InvalidWitness(String),
    /// A level subgroup has smaller rank than free-product additivity
    /// demands, so the supplied complement is not freely independent.
    #[error("rank deficit at level {level}: expected rank {expected}, found {found}")]
    RankDeficit { level: u32, expected: usize, found: usize },
    /// A probe part cannot supply nonidentity syllables.
    #[error("probe part {index} generates the trivial subgroup")]
    DegeneratePart { index: usize },
    /// A randomized probe found a counterexample.
    #[error("{what} failed: {witness}")]
    ProbeFailure { what: String, witness: String },
    /// An internal consistency check failed; this indicates a bug in the
    /// pipeline, not bad input.
    #[error("internal self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Endo(#[from] EndoError),
    #[error(transparent)]
    Hnn(#[from] HnnError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Base(#[from] BaseError),
}

/// Result of a randomized probe: how many samples ran (per sign mode, where
/// applicable), whether all of them behaved, and a human-readable witness
/// for the first violation.
#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub samples: u64,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Resolves the certificate expression names: `t` for the stable letter and
/// `k1, k2, …` for the complement words. Everything else is unknown, which
/// is what confines `f_expr` witnesses to the subgroup ⟨K, t⟩.
pub(crate) fn complement_resolver<'a>(
    engine: &'a Hnn<FreeBase>,
    k: &'a Basis,
) -> impl FnMut(&str) -> Option<HnnElement<Word>> + 'a {
    move |name| {
        if name == "t" {
            return Some(engine.t());
        }
        let index: usize = name.strip_prefix('k')?.parse().ok()?;
        let word = k.words().get(index.checked_sub(1)?)?;
        Some(engine.from_base(word.clone()))
    }
}

/// The level `K_n = t^{-n} K t^n`, computed as `Kφ^n` and cross-checked
/// against the extension engine's conjugation arithmetic word by word.
pub fn build_kn(k: &Basis, e: &FreeEndo, n: u32) -> Result<Basis, ConstructionError> {
    let power = e.power(n);
    let engine =
        Hnn::with_depth_limit(FreeBase::new(e.clone()), DEFAULT_DEPTH_LIMIT.max(n as u64 + 1));
    let mut images = Vec::with_capacity(k.len());
    for w in k.words() {
        let image = power.apply(w)?;
        let conjugated = engine.multiply(
            &engine.multiply(&engine.t_pow(-(n as i64)), &engine.from_base(w.clone()))?,
            &engine.t_pow(n as i64),
        )?;
        if conjugated != engine.from_base(image.clone()) {
            return Err(ConstructionError::SelfCheck(format!(
                "conjugation law failed at level {n}: t^-{n} ({w}) t^{n} ≠ image under φ^{n}"
            )));
        }
        images.push(image);
    }
    Ok(Basis::new(images))
}

/// Ranks of the accumulated level subgroups `M_r = ⟨K_0 ∪ … ∪ K_r⟩` for
/// `r = 0..=r_max`. Free-product additivity forces `rank(M_r) = (r+1)·|K|`;
/// any shortfall means `K` does not freely complement the image and is
/// reported as [`ConstructionError::RankDeficit`].
pub fn rank_growth(e: &FreeEndo, k: &Basis, r_max: u32) -> Result<Vec<usize>, ConstructionError> {
    let mut accumulated: Vec<Word> = Vec::new();
    let mut ranks = Vec::with_capacity(r_max as usize + 1);
    for r in 0..=r_max {
        let level = build_kn(k, e, r)?;
        accumulated.extend(level.words().iter().cloned());
        let graph = SubgroupGraph::build(e.rank(), &accumulated)?;
        let expected = (r as usize + 1) * k.len();
        if graph.rank() != expected {
            return Err(ConstructionError::RankDeficit { level: r, expected, found: graph.rank() });
        }
        ranks.push(graph.rank());
    }
    Ok(ranks)
}

/// A nonidentity element of `⟨part⟩`: a short random product of basis words
/// and their inverses, redrawn when it cancels to the identity. Callers
/// guarantee the part has a nonidentity basis word, which bounds the retry
/// loop's failure probability; after 16 collisions we fall back to that word.
fn random_part_element(rng: &mut StdRng, part: &Basis) -> Result<Word, WordError> {
    let rank = part.words()[0].rank();
    for _ in 0..16 {
        let factors: usize = rng.gen_range(1..=3);
        let mut w = Word::identity(rank);
        for _ in 0..factors {
            let pick = &part.words()[rng.gen_range(0..part.len())];
            let pick = if rng.gen_bool(0.5) { pick.inverse() } else { pick.clone() };
            w = w.mul(&pick)?;
        }
        if !w.is_identity() {
            return Ok(w);
        }
    }
    Ok(part
        .words()
        .iter()
        .find(|w| !w.is_identity())
        .expect("caller checked for a nonidentity word")
        .clone())
}

/// Samples alternating products `g_1 g_2 ⋯ g_r` with each `g_i` a
/// nonidentity element of its part and adjacent parts distinct. If the
/// parts generate their free product, no such product is the identity; a
/// collapse is returned as an explicit witness.
pub fn free_product_probe(
    parts: &[Basis],
    samples: u64,
    seed: u64,
) -> Result<ProbeOutcome, ConstructionError> {
    let first = parts
        .first()
        .and_then(|p| p.words().first())
        .ok_or(ConstructionError::DegeneratePart { index: 0 })?;
    let rank = first.rank();
    for (index, part) in parts.iter().enumerate() {
        if part.words().iter().all(Word::is_identity) {
            return Err(ConstructionError::DegeneratePart { index });
        }
        for w in part.words() {
            if w.rank() != rank {
                return Err(WordError::RankMismatch { left: rank, right: w.rank() }.into());
            }
        }
    }
    let ctx = NameCtx::new(rank, 0);
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..samples {
        let syllable_count: usize = if parts.len() == 1 { 1 } else { rng.gen_range(1..=6) };
        let mut part_index = rng.gen_range(0..parts.len());
        let mut product = Word::identity(rank);
        let mut rendered = Vec::with_capacity(syllable_count);
        for s in 0..syllable_count {
            if s > 0 {
                loop {
                    let next = rng.gen_range(0..parts.len());
                    if next != part_index {
                        part_index = next;
                        break;
                    }
                }
            }
            let syllable = random_part_element(&mut rng, &parts[part_index])?;
            rendered.push(format!("({})", expr::render_word(&syllable, &ctx)));
            product = product.mul(&syllable)?;
        }
        if product.is_identity() {
            return Ok(ProbeOutcome {
                samples,
                passed: false,
                witness: Some(format!("collapsing product {}", rendered.join(" "))),
            });
        }
    }
    Ok(ProbeOutcome { samples, passed: true, witness: None })
}

/// Probes when products of conjugated complement syllables
/// `t^{-n_1} g_1 t^{n_1} ⋯ t^{-n_r} g_r t^{n_r}` (nonidentity `g_i ∈ ⟨K⟩`,
/// adjacent levels distinct, `n_i ∈ [-4, 4]`, `r ≤ 6`) lie in the base:
/// exactly when every level is nonnegative. Runs `samples` draws that
/// contain a negative level and `samples` draws with all levels nonnegative.
pub fn lemma2_probe(
    e: &FreeEndo,
    k: &Basis,
    samples: u64,
    seed: u64,
) -> Result<ProbeOutcome, ConstructionError> {
    if k.words().iter().all(Word::is_identity) {
        return Err(ConstructionError::DegeneratePart { index: 0 });
    }
    for w in k.words() {
        if w.rank() != e.rank() {
            return Err(WordError::RankMismatch { left: e.rank(), right: w.rank() }.into());
        }
    }
    let ctx = NameCtx::new(e.rank(), 0);
    let engine = Hnn::new(FreeBase::new(e.clone()));
    let mut rng = StdRng::seed_from_u64(seed);
    for require_negative in [true, false] {
        let low: i64 = if require_negative { -4 } else { 0 };
        for _ in 0..samples {
            let syllable_count: usize = rng.gen_range(1..=6);
            let mut levels: Vec<i64> = Vec::with_capacity(syllable_count);
            loop {
                levels.clear();
                for i in 0..syllable_count {
                    loop {
                        let n = rng.gen_range(low..=4);
                        if i == 0 || levels[i - 1] != n {
                            levels.push(n);
                            break;
                        }
                    }
                }
                if !require_negative || levels.iter().any(|&n| n < 0) {
                    break;
                }
            }
            let mut product = engine.one();
            let mut rendered = Vec::with_capacity(syllable_count);
            for &n in &levels {
                let g = random_part_element(&mut rng, k)?;
                rendered.push(format!("t^{} ({}) t^{}", -n, expr::render_word(&g, &ctx), n));
                let syllable = engine.multiply(
                    &engine.multiply(&engine.t_pow(-n), &engine.from_base(g))?,
                    &engine.t_pow(n),
                )?;
                product = engine.multiply(&product, &syllable)?;
            }
            let expect_in_base = levels.iter().all(|&n| n >= 0);
            if product.in_base() != expect_in_base {
                return Ok(ProbeOutcome {
                    samples,
                    passed: false,
                    witness: Some(format!(
                        "product {} has normal form {}, in base: {}, expected: {}",
                        rendered.join(" "),
                        engine.display_elem(&product),
                        product.in_base(),
                        expect_in_base
                    )),
                });
            }
        }
    }
    Ok(ProbeOutcome { samples, passed: true, witness: None })
}

/// Tuning knobs for [`certify_theorem2`]. The defaults match the CLI's.
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Deepest level subgroup `M_r` to witness.
    pub r_max: u32,
    /// Seed recorded in the certificate; both probes derive from it.
    pub seed: u64,
    /// Keep only one shortest complement word instead of the full basis.
    pub single_complement: bool,
    /// Sample count for the free-product probe.
    pub fp_samples: u64,
    /// Sample count (per sign mode) for the base-intersection probe.
    pub l2_samples: u64,
    /// Engine budget floor; raised automatically to what the pipeline needs.
    pub depth_limit: u64,
}

impl Default for CertifyOptions {
    fn default() -> CertifyOptions {
        CertifyOptions {
            r_max: 6,
            seed: 1,
            single_complement: false,
            fp_samples: 10_000,
            l2_samples: 1_000,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }
}

/// Builds the full witness certificate for one injective, non-surjective
/// endomorphism of a free base of rank ≥ 2:
///
/// 1. gate the hypotheses (injective, not surjective, rank ≥ 2);
/// 2. take a free complement `K` of the image (optionally thinned to one
///    shortest word);
/// 3. check rank additivity of image and complement, run both probes;
/// 4. emit levels `r = 0..=r_max`, each generator spelled both as a base
///    word (`kφ^r`) and as `t^{-r} k_i t^{r}`, with the two spellings
///    proved equal in the extension;
/// 5. record the strictly increasing rank table.
pub fn certify_theorem2(
    e: &FreeEndo,
    opts: &CertifyOptions,
) -> Result<Certificate, ConstructionError> {
    if e.rank() < 2 {
        return Err(ConstructionError::CyclicBase);
    }
    if !e.is_injective() {
        return Err(ConstructionError::NotApplicable("the endomorphism is not injective".into()));
    }
    if e.is_surjective() {
        return Err(ConstructionError::NotApplicable(
            "the endomorphism is surjective (an automorphism); the construction needs a proper image"
                .into(),
        ));
    }

    let full = e.image_graph().hall_complement()?;
    let k = if opts.single_complement {
        Basis::new(vec![full
            .select_shortest()
            .expect("an infinite-index image has a nonempty complement")])
    } else {
        full
    };

    let ranks = rank_growth(e, &k, opts.r_max)?;

    let image_rank = e.image_graph().rank();
    let mut combined_gens = e.images().to_vec();
    combined_gens.extend(k.words().iter().cloned());
    let combined = SubgroupGraph::build(e.rank(), &combined_gens)?.rank();
    if combined != image_rank + k.len() {
        return Err(ConstructionError::SelfCheck(format!(
            "complement additivity failed: rank {combined} vs {image_rank} + {}",
            k.len()
        )));
    }

    let part_count = opts.r_max.min(5) as usize + 1;
    let mut parts = vec![k.clone()];
    for _ in 1..part_count {
        let previous = parts.last().expect("parts start nonempty").words().to_vec();
        let next: Result<Vec<Word>, EndoError> = previous.iter().map(|w| e.apply(w)).collect();
        parts.push(Basis::new(next?));
    }
    let fp = free_product_probe(&parts, opts.fp_samples, opts.seed)?;
    if !fp.passed {
        return Err(ConstructionError::ProbeFailure {
            what: "free-product probe".into(),
            witness: fp.witness.unwrap_or_default(),
        });
    }
    // Successor seed: keeps the two probes on distinct reproducible streams.
    let l2 = lemma2_probe(e, &k, opts.l2_samples, opts.seed.wrapping_add(1))?;
    if !l2.passed {
        return Err(ConstructionError::ProbeFailure {
            what: "base-intersection probe".into(),
            witness: l2.witness.unwrap_or_default(),
        });
    }

    let ctx = NameCtx::new(e.rank(), 0);
    let engine = Hnn::with_depth_limit(
        FreeBase::new(e.clone()),
        opts.depth_limit.max(opts.r_max as u64 + 1),
    );
    let mut levels = Vec::with_capacity(opts.r_max as usize + 1);
    let mut current = k.words().to_vec();
    for r in 0..=opts.r_max {
        if r > 0 {
            current = current.iter().map(|w| e.apply(w)).collect::<Result<_, _>>()?;
        }
        let mut generators = Vec::with_capacity(current.len());
        for (i, w) in current.iter().enumerate() {
            let base_expr = expr::render_word(w, &ctx);
            let f_expr = match r {
                0 => format!("k{}", i + 1),
                1 => format!("t^-1 k{} t", i + 1),
                _ => format!("t^-{r} k{} t^{r}", i + 1),
            };
            let parsed = expr::parse_expr(&f_expr).expect("generated expression parses");
            let value = engine.eval(&parsed, &mut complement_resolver(&engine, &k))?;
            if value != engine.from_base(w.clone()) {
                return Err(ConstructionError::SelfCheck(format!(
                    "dual expressions disagree at level {r}, generator {}",
                    i + 1
                )));
            }
            generators.push(GeneratorEntry { base_expr, f_expr });
        }
        levels.push(Level { r: r as u64, generators, rank: ranks[r as usize] as u64 });
    }

    let obligations = vec![
        Obligation::Hypotheses {
            injective: true,
            surjective: false,
            image_rank: image_rank as u64,
            image_index: e.image_graph().index().to_string(),
        },
        Obligation::ComplementRank {
            image_rank: image_rank as u64,
            complement_size: k.len() as u64,
            combined_rank: combined as u64,
        },
        Obligation::FreeProductProbe { parts: parts.len() as u64, samples: opts.fp_samples },
        Obligation::Lemma2Probe { samples: opts.l2_samples },
    ];

    Ok(Certificate {
        schema: CERTIFICATE_SCHEMA,
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: CertificateKind::Theorem2,
        endo: expr::render_free_endo(e),
        complement: Some(k.words().iter().map(|w| expr::render_word(w, &ctx)).collect()),
        witness: None,
        depth: opts.r_max as u64,
        seed: opts.seed,
        levels,
        obligations,
    })
}

/// Tuning knobs for [`certify_theorem3`].
#[derive(Debug, Clone)]
pub struct Certify3Options {
    /// Verify `(t·b)^m ≠ t^m` for `m = 1..=depth` and the conjugation shift
    /// for `k = 0..depth`.
    pub depth: u64,
    /// Recorded in the certificate (the pipeline itself is deterministic).
    pub seed: u64,
    /// Engine budget floor; raised automatically to what the pipeline needs.
    pub depth_limit: u64,
}

impl Default for Certify3Options {
    fn default() -> Certify3Options {
        Certify3Options { depth: 12, seed: 1, depth_limit: DEFAULT_DEPTH_LIMIT }
    }
}

/// Direct-product pipeline over a parsed instance; see
/// [`certify_theorem3_pair`] for the construction itself. Only `product`
/// instances are eligible.
pub fn certify_theorem3(
    instance: &Instance,
    witness: Option<&str>,
    opts: &Certify3Options,
) -> Result<Certificate, ConstructionError> {
    let text = instance.to_string();
    match instance {
        Instance::AbelianPair(p) => certify_theorem3_pair(p, &text, witness, opts),
        Instance::FreePair(p) => certify_theorem3_pair(p, &text, witness, opts),
        _ => Err(ConstructionError::NotApplicable(
            "the direct-product construction needs a `product; A: …; B: …` instance".into(),
        )),
    }
}

/// Builds the direct-product certificate: both factor endomorphisms must be
/// injective with proper images; `b` (defaulting to the first second-factor
/// generator outside the image) must lie outside `im φ_B`. The pipeline then
/// verifies, inside the extension over `A × B`:
///
/// - `(t·b)^m ≠ t^m` for `m = 1..=depth`, recording the normal form of each
///   power (its base part is `b` pushed through `φ_B` and accumulated,
///   which never cancels when `b ∉ im φ_B`);
/// - the conjugation identity
///   `(t·b) · t^k a t^{-k} · (t·b)^{-1} = t^{k+1} a t^{-(k+1)}` for every
///   first-factor generator `a` and `k = 0..depth`, which pushes the chain
///   `t^k A t^{-k}` up one level inside both `⟨A, t⟩` and `⟨A, t·b⟩`.
pub fn certify_theorem3_pair<A: FactorGroup, B: FactorGroup>(
    product: &ProductBase<A, B>,
    instance_text: &str,
    witness: Option<&str>,
    opts: &Certify3Options,
) -> Result<Certificate, ConstructionError> {
    for (name, injective, surjective) in [
        ("A", product.factor_a().endo_is_injective(), product.factor_a().endo_is_surjective()),
        ("B", product.factor_b().endo_is_injective(), product.factor_b().endo_is_surjective()),
    ] {
        if !injective {
            return Err(ConstructionError::NotApplicable(format!(
                "factor {name} endomorphism is not injective"
            )));
        }
        if surjective {
            return Err(ConstructionError::NotApplicable(format!(
                "factor {name} endomorphism is surjective; its image must be proper"
            )));
        }
    }
    let witness_a = product
        .factor_a()
        .witness_outside_image()
        .expect("a proper image misses some generator");
    let witness_b_default = product
        .factor_b()
        .witness_outside_image()
        .expect("a proper image misses some generator");
    let b = match witness {
        Some(text) => product.factor_b().parse_elem(text)?,
        None => witness_b_default.clone(),
    };
    if product.factor_b().endo_image_contains(&b) {
        return Err(ConstructionError::InvalidWitness(product.factor_b().display_elem(&b)));
    }

    let mut obligations = vec![
        Obligation::FactorHypotheses { factor: "A".into(), injective: true, surjective: false },
        Obligation::FactorHypotheses { factor: "B".into(), injective: true, surjective: false },
        Obligation::ImageProper {
            factor: "A".into(),
            witness: product.factor_a().display_elem(&witness_a),
        },
        Obligation::ImageProper {
            factor: "B".into(),
            witness: product.factor_b().display_elem(&witness_b_default),
        },
    ];

    let engine =
        Hnn::with_depth_limit(product.clone(), opts.depth_limit.max(opts.depth + 2));
    let tb = engine.multiply(&engine.t(), &engine.from_base(product.inject_b(b.clone())))?;

    let mut power = engine.one();
    for m in 1..=opts.depth {
        power = engine.multiply(&power, &tb)?;
        if power.m() != m || power.n() != 0 || engine.base().is_identity(power.g()) {
            return Err(ConstructionError::SelfCheck(format!(
                "(t·b)^{m} collapsed to {}",
                engine.display_elem(&power)
            )));
        }
        obligations
            .push(Obligation::PowerNoncancellation { m, normal_form: engine.display_elem(&power) });
    }

    let tb_inverse = engine.invert(&tb)?;
    for k in 0..opts.depth {
        for a in product.factor_a().generators() {
            let lifted = product.inject_a(a.clone());
            let level_k = engine.element(k, lifted.clone(), k)?;
            let lhs = engine.multiply(&engine.multiply(&tb, &level_k)?, &tb_inverse)?;
            let rhs = engine.element(k + 1, lifted, k + 1)?;
            if lhs != rhs {
                return Err(ConstructionError::SelfCheck(format!(
                    "conjugation shift failed at k = {k} for generator {}",
                    product.factor_a().display_elem(&a)
                )));
            }
            obligations.push(Obligation::ConjugationShift {
                k,
                generator: product.factor_a().display_elem(&a),
            });
        }
    }

    Ok(Certificate {
        schema: CERTIFICATE_SCHEMA,
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: CertificateKind::Theorem3,
        endo: instance_text.to_string(),
        complement: None,
        witness: Some(product.factor_b().display_elem(&b)),
        depth: opts.depth,
        seed: opts.seed,
        levels: Vec::new(),
        obligations,
    })
}
