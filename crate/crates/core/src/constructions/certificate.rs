//! Certificate data model, canonical JSON serialization, and the
//! independent verifier.
//!
//! A certificate records everything needed to re-derive a witness against
//! the Howson property from scratch: the instance text, the chosen
//! complement or witness element, probe parameters, and per-level witness
//! generators with their dual expressions. [`verify_certificate`] trusts
//! none of the recorded intermediate claims — it reparses the instance and
//! recomputes every rank, every engine equality and every probe, so a
//! certificate stands or falls on its own content.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basegroup::{parse_instance, BaseGroup, FactorGroup, FreeBase, Instance, ProductBase};
use crate::expr::{self, NameCtx};
use crate::hnn::{Hnn, DEFAULT_DEPTH_LIMIT};
use crate::stallings::{Basis, SubgroupGraph};
use crate::words::Word;

use super::{complement_resolver, free_product_probe, lemma2_probe};

/// Fatal shape problems: the input is not a certificate at all, as opposed
/// to a well-formed certificate whose claims fail to verify.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed certificate: {0}")]
    Malformed(String),
}

/// Which statement a certificate witnesses; see the README for the numbered
/// statements the two pipelines certify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Theorem2,
    Theorem3,
}

/// One witness generator of a level subgroup, written two ways: as a word
/// over the base generators and as an expression over the complement names
/// `k1, k2, …` and `t`. The verifier proves the two spellings equal in the
/// extension, which places the element in both intersectands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub base_expr: String,
    pub f_expr: String,
}

/// The level subgroup `M_r`, generated by all entries of levels `0..=r`;
/// `rank` records the rank of that accumulated subgroup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub r: u64,
    pub generators: Vec<GeneratorEntry>,
    pub rank: u64,
}

/// A single recorded proof obligation. Rows carry only re-checkable data;
/// the verifier recomputes each one rather than trusting it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Obligation {
    /// The endomorphism is injective but not surjective, with the rank and
    /// index of its image subgroup.
    Hypotheses { injective: bool, surjective: bool, image_rank: u64, image_index: String },
    /// `rank(⟨im φ ∪ K⟩) = rank(im φ) + |K|`, the testable form of
    /// "`K` freely complements the image".
    ComplementRank { image_rank: u64, complement_size: u64, combined_rank: u64 },
    /// The alternating-syllable probe over the conjugate levels
    /// `K_0, …, K_{parts-1}` found no collapsing product.
    FreeProductProbe { parts: u64, samples: u64 },
    /// The sampled conjugated products lie in the base exactly when every
    /// conjugation level is nonnegative.
    Lemma2Probe { samples: u64 },
    /// Injectivity/surjectivity of one direct-product factor.
    FactorHypotheses { factor: String, injective: bool, surjective: bool },
    /// A factor generator that lies outside the factor's endomorphism
    /// image, witnessing that the image is proper.
    ImageProper { factor: String, witness: String },
    /// `(t·b)^m ≠ t^m`, recorded through the normal form of `(t·b)^m`.
    PowerNoncancellation { m: u64, normal_form: String },
    /// `(t·b) · t^k a t^{-k} · (t·b)^{-1} = t^{k+1} a t^{-(k+1)}` for one
    /// first-factor generator `a`.
    ConjugationShift { k: u64, generator: String },
}

/// A self-contained, machine-checkable witness record. Field order is the
/// canonical serialization order and is frozen by golden tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub schema: u32,
    pub version: String,
    pub kind: CertificateKind,
    pub endo: String,
    pub complement: Option<Vec<String>>,
    pub witness: Option<String>,
    pub depth: u64,
    pub seed: u64,
    pub levels: Vec<Level>,
    pub obligations: Vec<Obligation>,
}

/// The schema this crate reads and writes.
pub const CERTIFICATE_SCHEMA: u32 = 1;

impl Certificate {
    /// Canonical JSON: pretty-printed with fields in declaration order and
    /// a trailing newline. Byte-identical across runs for equal content.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("certificate serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Certificate, VerifyError> {
        serde_json::from_str(text).map_err(|e| VerifyError::Malformed(format!("unreadable JSON: {e}")))
    }
}

/// Outcome of re-checking one obligation or derived fact.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Every check the verifier ran, in order. The certificate is valid exactly
/// when all of them passed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Records a check; returns `passed` so callers can bail out when later
    /// checks would be meaningless.
    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> bool {
        self.checks.push(CheckResult { name: name.into(), passed, detail: detail.into() });
        passed
    }

    fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.check(name, false, detail);
    }
}

/// Re-derives every claim of a certificate from its own text. Returns
/// `Err(Malformed)` when the input is structurally not a certificate;
/// otherwise a report whose [`VerifyReport::ok`] is the verdict.
pub fn verify_certificate(c: &Certificate) -> Result<VerifyReport, VerifyError> {
    if c.schema != CERTIFICATE_SCHEMA {
        return Err(VerifyError::Malformed(format!(
            "unsupported schema {} (expected {CERTIFICATE_SCHEMA})",
            c.schema
        )));
    }
    // Bounds the loop counts derived from untrusted input; honest desk-scale
    // certificates stay far below this.
    if c.depth > 4096 {
        return Err(VerifyError::Malformed(format!("implausible depth {}", c.depth)));
    }
    match c.kind {
        CertificateKind::Theorem2 => verify_theorem2(c),
        CertificateKind::Theorem3 => verify_theorem3(c),
    }
}

fn verify_theorem2(c: &Certificate) -> Result<VerifyReport, VerifyError> {
    let complement = c
        .complement
        .as_ref()
        .ok_or_else(|| VerifyError::Malformed("theorem2 certificate without complement".into()))?;
    if complement.is_empty() {
        return Err(VerifyError::Malformed("empty complement".into()));
    }
    let instance = parse_instance(&c.endo).map_err(|e| VerifyError::Malformed(e.to_string()))?;
    let Instance::Free(base) = instance else {
        return Err(VerifyError::Malformed("theorem2 certificate needs a free base".into()));
    };
    let e = base.endo();
    let rank = e.rank();
    let mut rep = VerifyReport::default();

    // Hypotheses: free base of rank ≥ 2 with φ injective but not surjective.
    let injective = e.is_injective();
    let surjective = e.is_surjective();
    let image_rank = e.image_graph().rank();
    let image_index = e.image_graph().index().to_string();
    let hyp = rank >= 2 && injective && !surjective;
    if !rep.check(
        "hypotheses",
        hyp,
        format!("rank {rank}, injective {injective}, surjective {surjective}"),
    ) {
        return Ok(rep);
    }
    let recorded = c.obligations.iter().find_map(|o| match o {
        Obligation::Hypotheses { injective, surjective, image_rank, image_index } => {
            Some((*injective, *surjective, *image_rank, image_index.clone()))
        }
        _ => None,
    });
    let expected = (true, false, image_rank as u64, image_index);
    rep.check(
        "hypotheses_recorded",
        recorded.as_ref() == Some(&expected),
        format!("recorded {recorded:?}, recomputed {expected:?}"),
    );

    // The complement words themselves.
    let ctx = NameCtx::new(rank, 0);
    let mut k_words = Vec::with_capacity(complement.len());
    for text in complement {
        match expr::parse_word(rank, text, &ctx) {
            Ok(w) if !w.is_identity() => k_words.push(w),
            Ok(_) => {
                rep.fail("complement_words", format!("complement word `{text}` is the identity"));
                return Ok(rep);
            }
            Err(err) => {
                rep.fail("complement_words", format!("complement word `{text}`: {err}"));
                return Ok(rep);
            }
        }
    }
    let k = Basis::new(k_words);
    rep.check(
        "complement_words",
        true,
        format!("{} nonidentity complement words parsed", k.len()),
    );

    // Rank additivity of image and complement.
    let mut combined_gens = e.images().to_vec();
    combined_gens.extend(k.words().iter().cloned());
    let combined =
        SubgroupGraph::build(rank, &combined_gens).expect("verified words share one alphabet").rank();
    let additivity_ok = combined == image_rank + k.len();
    let recorded_rank_row = c.obligations.iter().find_map(|o| match o {
        Obligation::ComplementRank { image_rank, complement_size, combined_rank } => {
            Some((*image_rank, *complement_size, *combined_rank))
        }
        _ => None,
    });
    let expected_row = (image_rank as u64, k.len() as u64, combined as u64);
    if !rep.check(
        "complement_rank",
        additivity_ok && recorded_rank_row == Some(expected_row),
        format!(
            "rank(⟨im φ ∪ K⟩) = {combined}, rank(im φ) + |K| = {}, recorded {recorded_rank_row:?}",
            image_rank + k.len()
        ),
    ) {
        return Ok(rep);
    }

    // Probes, re-run from the recorded seed and sample counts.
    match c.obligations.iter().find_map(|o| match o {
        Obligation::FreeProductProbe { parts, samples } => Some((*parts, *samples)),
        _ => None,
    }) {
        Some((part_count, samples)) if part_count >= 1 => {
            let mut parts = vec![k.clone()];
            for _ in 1..part_count {
                let previous = parts.last().expect("nonempty").words().to_vec();
                let next: Result<Vec<Word>, _> = previous.iter().map(|w| e.apply(w)).collect();
                parts.push(Basis::new(next.expect("image of a valid word is valid")));
            }
            match free_product_probe(&parts, samples, c.seed) {
                Ok(outcome) => rep.check(
                    "free_product_probe",
                    outcome.passed,
                    outcome.witness.unwrap_or_else(|| format!("{samples} samples, no collapse")),
                ),
                Err(err) => rep.check("free_product_probe", false, err.to_string()),
            };
        }
        _ => rep.fail("free_product_probe", "missing or degenerate probe obligation".to_string()),
    }
    match c.obligations.iter().find_map(|o| match o {
        Obligation::Lemma2Probe { samples } => Some(*samples),
        _ => None,
    }) {
        // The generator draws the second probe from the successor seed so the
        // two probes use distinct, reproducible streams.
        Some(samples) => {
            match lemma2_probe(e, &k, samples, c.seed.wrapping_add(1)) {
                Ok(outcome) => rep.check(
                    "lemma2_probe",
                    outcome.passed,
                    outcome.witness.unwrap_or_else(|| format!("{samples} samples per sign mode")),
                ),
                Err(err) => rep.check("lemma2_probe", false, err.to_string()),
            };
        }
        None => rep.fail("lemma2_probe", "missing probe obligation".to_string()),
    }

    // Level table shape: consecutive levels 0..=depth, |K| generators each.
    if c.levels.len() as u64 != c.depth + 1 {
        rep.fail("levels_shape", format!("{} levels recorded, depth {}", c.levels.len(), c.depth));
        return Ok(rep);
    }
    for (i, level) in c.levels.iter().enumerate() {
        if level.r != i as u64 {
            rep.fail("levels_shape", format!("level {} records r = {}", i, level.r));
            return Ok(rep);
        }
        if level.generators.len() != k.len() {
            rep.fail(
                "levels_shape",
                format!("level {} has {} generators, complement has {}", i, level.generators.len(), k.len()),
            );
            return Ok(rep);
        }
    }
    rep.check("levels_shape", true, format!("levels 0..={} with {} generators each", c.depth, k.len()));

    // Per-level content: dual expressions agree in the extension, ranks of
    // the accumulated subgroups match the record and the rank law, and each
    // level embeds in the next.
    let engine =
        Hnn::with_depth_limit(FreeBase::new(e.clone()), DEFAULT_DEPTH_LIMIT.max(c.depth + 1));
    let mut accumulated: Vec<Word> = Vec::new();
    let mut previous_words: Vec<Word> = Vec::new();
    let mut previous_graph: Option<SubgroupGraph> = None;
    for level in &c.levels {
        let r = level.r;
        let mut level_words = Vec::with_capacity(level.generators.len());
        let mut dual_ok = true;
        let mut dual_detail = format!("{} generators verified", level.generators.len());
        for (i, entry) in level.generators.iter().enumerate() {
            let w = match expr::parse_word(rank, &entry.base_expr, &ctx) {
                Ok(w) => w,
                Err(err) => {
                    rep.fail(
                        format!("level_{r}_dual_expressions"),
                        format!("base_expr `{}`: {err}", entry.base_expr),
                    );
                    return Ok(rep);
                }
            };
            let value = expr::parse_expr(&entry.f_expr)
                .map_err(crate::hnn::HnnError::from)
                .and_then(|parsed| engine.eval(&parsed, &mut complement_resolver(&engine, &k)));
            match value {
                Ok(v) if v == engine.from_base(w.clone()) => {}
                Ok(v) => {
                    dual_ok = false;
                    dual_detail = format!(
                        "generator {} at level {r}: `{}` = {}, but base word is `{}`",
                        i + 1,
                        entry.f_expr,
                        engine.display_elem(&v),
                        entry.base_expr
                    );
                }
                Err(err) => {
                    dual_ok = false;
                    dual_detail =
                        format!("generator {} at level {r}: `{}`: {err}", i + 1, entry.f_expr);
                }
            }
            level_words.push(w);
        }
        if !rep.check(format!("level_{r}_dual_expressions"), dual_ok, dual_detail) {
            return Ok(rep);
        }

        accumulated.extend(level_words.iter().cloned());
        let graph = SubgroupGraph::build(rank, &accumulated).expect("verified words share one alphabet");
        let expected_rank = (r as usize + 1) * k.len();
        if !rep.check(
            format!("level_{r}_rank"),
            graph.rank() == level.rank as usize && graph.rank() == expected_rank,
            format!("recomputed {}, recorded {}, rank law expects {expected_rank}", graph.rank(), level.rank),
        ) {
            return Ok(rep);
        }

        if let Some(prev) = &previous_graph {
            // Contain the *previous* level's generators in the current
            // accumulated graph: redundant for honestly-generated unions,
            // and exactly the nesting claim M_{r-1} ⊆ M_r for edited ones.
            let nested = previous_words
                .iter()
                .all(|w| graph.contains(w).expect("verified words share one alphabet"));
            rep.check(
                format!("level_{r}_contains_previous"),
                nested && prev.rank() < graph.rank(),
                format!("previous rank {}, current rank {}", prev.rank(), graph.rank()),
            );
        }
        previous_words = level_words;
        previous_graph = Some(graph);
    }

    // Strict growth of the recorded table itself.
    let strictly_increasing = c.levels.windows(2).all(|pair| pair[0].rank < pair[1].rank);
    rep.check(
        "rank_monotonic",
        strictly_increasing,
        format!("recorded ranks {:?}", c.levels.iter().map(|l| l.rank).collect::<Vec<_>>()),
    );

    Ok(rep)
}

fn verify_theorem3(c: &Certificate) -> Result<VerifyReport, VerifyError> {
    let witness = c
        .witness
        .as_ref()
        .ok_or_else(|| VerifyError::Malformed("theorem3 certificate without witness".into()))?;
    let instance = parse_instance(&c.endo).map_err(|e| VerifyError::Malformed(e.to_string()))?;
    let mut rep = VerifyReport::default();
    match instance {
        Instance::AbelianPair(p) => verify_theorem3_product(&mut rep, &p, witness, c),
        Instance::FreePair(p) => verify_theorem3_product(&mut rep, &p, witness, c),
        _ => {
            return Err(VerifyError::Malformed(
                "theorem3 certificate needs a `product; A: …; B: …` instance".into(),
            ))
        }
    }
    Ok(rep)
}

fn verify_theorem3_product<A: FactorGroup, B: FactorGroup>(
    rep: &mut VerifyReport,
    product: &ProductBase<A, B>,
    witness: &str,
    c: &Certificate,
) {
    // Factor hypotheses: both endomorphisms injective, neither surjective.
    for (name, injective, surjective) in [
        ("A", product.factor_a().endo_is_injective(), product.factor_a().endo_is_surjective()),
        ("B", product.factor_b().endo_is_injective(), product.factor_b().endo_is_surjective()),
    ] {
        let recorded = c.obligations.iter().find_map(|o| match o {
            Obligation::FactorHypotheses { factor, injective, surjective } if factor == name => {
                Some((*injective, *surjective))
            }
            _ => None,
        });
        if !rep.check(
            format!("factor_{name}_hypotheses"),
            injective && !surjective && recorded == Some((true, false)),
            format!("injective {injective}, surjective {surjective}, recorded {recorded:?}"),
        ) {
            return;
        }
    }

    // Proper images, witnessed by recorded elements outside them.
    for name in ["A", "B"] {
        let recorded = c.obligations.iter().find_map(|o| match o {
            Obligation::ImageProper { factor, witness } if factor == name => Some(witness.clone()),
            _ => None,
        });
        let Some(text) = recorded else {
            rep.fail(format!("factor_{name}_image_proper"), "missing obligation".to_string());
            return;
        };
        let outside = if name == "A" {
            product
                .factor_a()
                .parse_elem(&text)
                .map(|elem| !product.factor_a().endo_image_contains(&elem))
        } else {
            product
                .factor_b()
                .parse_elem(&text)
                .map(|elem| !product.factor_b().endo_image_contains(&elem))
        };
        match outside {
            Ok(outside) => {
                if !rep.check(
                    format!("factor_{name}_image_proper"),
                    outside,
                    format!("recorded element `{text}`"),
                ) {
                    return;
                }
            }
            Err(err) => {
                rep.fail(format!("factor_{name}_image_proper"), format!("`{text}`: {err}"));
                return;
            }
        }
    }

    // The chosen witness b itself lies outside im φ_B.
    let b = match product.factor_b().parse_elem(witness) {
        Ok(b) => b,
        Err(err) => {
            rep.fail("witness_outside_image", format!("`{witness}`: {err}"));
            return;
        }
    };
    if !rep.check(
        "witness_outside_image",
        !product.factor_b().endo_image_contains(&b),
        format!("witness `{witness}`"),
    ) {
        return;
    }

    let engine =
        Hnn::with_depth_limit(product.clone(), DEFAULT_DEPTH_LIMIT.max(c.depth + 2));
    let tb = engine
        .multiply(&engine.t(), &engine.from_base(product.inject_b(b)))
        .expect("t·b stays within any budget");

    // (t·b)^m ≠ t^m for m = 1..=depth, re-derived through the normal form.
    let recorded_powers: BTreeMap<u64, String> = c
        .obligations
        .iter()
        .filter_map(|o| match o {
            Obligation::PowerNoncancellation { m, normal_form } => Some((*m, normal_form.clone())),
            _ => None,
        })
        .collect();
    let expected_keys: Vec<u64> = (1..=c.depth).collect();
    if recorded_powers.keys().copied().collect::<Vec<_>>() != expected_keys {
        rep.fail(
            "power_noncancellation",
            format!("recorded powers {:?}, expected 1..={}", recorded_powers.keys().collect::<Vec<_>>(), c.depth),
        );
        return;
    }
    let mut power = engine.one();
    let mut powers_ok = true;
    let mut powers_detail = format!("all {} powers verified", c.depth);
    for m in 1..=c.depth {
        power = match engine.multiply(&power, &tb) {
            Ok(p) => p,
            Err(err) => {
                powers_ok = false;
                powers_detail = format!("m = {m}: {err}");
                break;
            }
        };
        let display = engine.display_elem(&power);
        let structurally_off_base =
            power.m() == m && power.n() == 0 && !engine.base().is_identity(power.g());
        if !structurally_off_base || display != recorded_powers[&m] {
            powers_ok = false;
            powers_detail = format!(
                "m = {m}: recomputed `{display}` (t-exponent {}), recorded `{}`",
                power.t_exponent(),
                recorded_powers[&m]
            );
            break;
        }
    }
    if !rep.check("power_noncancellation", powers_ok, powers_detail) {
        return;
    }

    // Conjugation by t·b shifts every first-factor conjugate one level up.
    let generators = product.factor_a().generators();
    let mut expected_grid = Vec::new();
    for k in 0..c.depth {
        for a in &generators {
            expected_grid.push((k, product.factor_a().display_elem(a)));
        }
    }
    let recorded_grid: Vec<(u64, String)> = c
        .obligations
        .iter()
        .filter_map(|o| match o {
            Obligation::ConjugationShift { k, generator } => Some((*k, generator.clone())),
            _ => None,
        })
        .collect();
    if recorded_grid != expected_grid {
        rep.fail(
            "conjugation_shift",
            format!("recorded {} rows, expected {} (k = 0..{})", recorded_grid.len(), expected_grid.len(), c.depth),
        );
        return;
    }
    let tb_inverse = engine.invert(&tb).expect("inverse of t·b stays within any budget");
    let mut shifts_ok = true;
    let mut shifts_detail = format!("{} conjugations verified", expected_grid.len());
    'outer: for k in 0..c.depth {
        for a in &generators {
            let lifted = product.inject_a(a.clone());
            let outcome = engine
                .element(k, lifted.clone(), k)
                .and_then(|level_k| engine.multiply(&tb, &level_k))
                .and_then(|x| engine.multiply(&x, &tb_inverse))
                .and_then(|lhs| Ok((lhs, engine.element(k + 1, lifted, k + 1)?)));
            match outcome {
                Ok((lhs, rhs)) if lhs == rhs => {}
                Ok((lhs, _)) => {
                    shifts_ok = false;
                    shifts_detail = format!(
                        "k = {k}, generator {}: conjugate is {}",
                        product.factor_a().display_elem(a),
                        engine.display_elem(&lhs)
                    );
                    break 'outer;
                }
                Err(err) => {
                    shifts_ok = false;
                    shifts_detail = format!("k = {k}: {err}");
                    break 'outer;
                }
            }
        }
    }
    rep.check("conjugation_shift", shifts_ok, shifts_detail);
}
