//! Base groups paired with a distinguished endomorphism.
//!
//! The extension engine is generic over a [`BaseGroup`]: a group `G` together
//! with an injective endomorphism `φ`, exposing exact membership in `im φ`
//! and exact preimages under `φ`. Three families are provided: finitely
//! generated free groups ([`FreeBase`]), finitely generated free abelian
//! groups ([`AbelianBase`], integer matrices with arbitrary-precision
//! arithmetic), and direct products of two factors ([`ProductBase`]) with the
//! componentwise endomorphism.
//!
//! [`FactorGroup`] extends the interface with naming, parsing, and generator
//! enumeration — everything the certificate pipeline needs to talk about
//! concrete elements in text.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::endo::FreeEndo;
use crate::expr::{self, Expr, ExprError, NameCtx};
use crate::words::Word;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum BaseError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("bad matrix: {0}")]
    BadMatrix(String),
    #[error("bad instance spec: {0}")]
    BadInstance(String),
}

/// A group with a distinguished endomorphism `φ`.
///
/// Operations are total on well-formed elements; mixing elements of different
/// instances is a programming error and may panic. `endo_preimage` may only
/// be called when `endo_is_injective()` holds.
pub trait BaseGroup {
    type Elem: Clone + Eq + std::hash::Hash + fmt::Debug;

    fn identity(&self) -> Self::Elem;
    fn multiply(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn invert(&self, a: &Self::Elem) -> Self::Elem;
    fn is_identity(&self, a: &Self::Elem) -> bool {
        *a == self.identity()
    }
    /// `a^n` for any integer `n`; implementors override the naive loop.
    fn power(&self, a: &Self::Elem, n: i64) -> Self::Elem {
        let (base, count) = if n < 0 { (self.invert(a), n.unsigned_abs()) } else { (a.clone(), n.unsigned_abs()) };
        let mut acc = self.identity();
        for _ in 0..count {
            acc = self.multiply(&acc, &base);
        }
        acc
    }

    fn endo_apply(&self, a: &Self::Elem) -> Self::Elem;
    fn endo_image_contains(&self, a: &Self::Elem) -> bool;
    fn endo_preimage(&self, a: &Self::Elem) -> Option<Self::Elem>;
    fn endo_is_injective(&self) -> bool;
    fn endo_is_surjective(&self) -> bool;
}

/// A base group with named generators: supports exactly the textual and
/// enumerative operations the certificate layer needs.
pub trait FactorGroup: BaseGroup + Clone {
    fn generator_count(&self) -> usize;
    fn generators(&self) -> Vec<Self::Elem>;
    /// Resolves one exact generator name (`"a"`, `"x12"`) to an element.
    fn resolve_letter(&self, name: &str) -> Option<Self::Elem>;
    fn display_elem(&self, a: &Self::Elem) -> String;
    /// Re-homes this group's names inside a global alphabet, for products.
    fn set_name_range(&mut self, offset: usize, total: usize);
    fn endo_is_identity(&self) -> bool;

    fn parse_elem(&self, text: &str) -> Result<Self::Elem, ExprError> {
        eval_elem(self, &expr::parse_expr(text)?)
    }

    /// A generator outside `im φ`; exists exactly when `φ` is not surjective.
    fn witness_outside_image(&self) -> Option<Self::Elem> {
        self.generators().into_iter().find(|g| !self.endo_image_contains(g))
    }
}

/// Evaluates an expression over a factor group's generator names. Unknown
/// multi-letter names fall back to letter-by-letter resolution with uppercase
/// meaning inverse, mirroring the word grammar.
pub fn eval_elem<G: FactorGroup>(group: &G, expr: &Expr) -> Result<G::Elem, ExprError> {
    match expr {
        Expr::Identity => Ok(group.identity()),
        Expr::Name(name) => resolve_letters(group, name),
        Expr::Power(base, exponent) => Ok(group.power(&eval_elem(group, base)?, *exponent)),
        Expr::Product(factors) => {
            let mut acc = group.identity();
            for factor in factors {
                acc = group.multiply(&acc, &eval_elem(group, factor)?);
            }
            Ok(acc)
        }
    }
}

fn resolve_letters<G: FactorGroup>(group: &G, name: &str) -> Result<G::Elem, ExprError> {
    if let Some(elem) = group.resolve_letter(name) {
        return Ok(elem);
    }
    let mut acc = group.identity();
    for c in name.chars() {
        if !c.is_ascii_alphabetic() {
            return Err(ExprError::UnknownName(name.to_string()));
        }
        let elem = group
            .resolve_letter(&c.to_ascii_lowercase().to_string())
            .ok_or_else(|| ExprError::UnknownName(name.to_string()))?;
        let elem = if c.is_ascii_uppercase() { group.invert(&elem) } else { elem };
        acc = group.multiply(&acc, &elem);
    }
    Ok(acc)
}

/// Free group of finite rank with a free-group endomorphism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeBase {
    endo: FreeEndo,
    name_offset: usize,
    name_total: usize,
}

impl FreeBase {
    pub fn new(endo: FreeEndo) -> FreeBase {
        let rank = endo.rank();
        FreeBase { endo, name_offset: 0, name_total: rank }
    }

    pub fn rank(&self) -> usize {
        self.endo.rank()
    }

    pub fn endo(&self) -> &FreeEndo {
        &self.endo
    }

    pub fn name_ctx(&self) -> NameCtx {
        NameCtx::sub(self.name_total, self.name_offset, self.endo.rank())
    }
}

impl BaseGroup for FreeBase {
    type Elem = Word;

    fn identity(&self) -> Word {
        Word::identity(self.rank())
    }

    fn multiply(&self, a: &Word, b: &Word) -> Word {
        a.mul(b).expect("elements share the base alphabet")
    }

    fn invert(&self, a: &Word) -> Word {
        a.inverse()
    }

    fn is_identity(&self, a: &Word) -> bool {
        a.is_identity()
    }

    fn power(&self, a: &Word, n: i64) -> Word {
        a.pow(n)
    }

    fn endo_apply(&self, a: &Word) -> Word {
        self.endo.apply(a).expect("elements share the base alphabet")
    }

    fn endo_image_contains(&self, a: &Word) -> bool {
        self.endo.image_contains(a).expect("elements share the base alphabet")
    }

    fn endo_preimage(&self, a: &Word) -> Option<Word> {
        self.endo.preimage(a).expect("callers must check injectivity first")
    }

    fn endo_is_injective(&self) -> bool {
        self.endo.is_injective()
    }

    fn endo_is_surjective(&self) -> bool {
        self.endo.is_surjective()
    }
}

impl FactorGroup for FreeBase {
    fn generator_count(&self) -> usize {
        self.rank()
    }

    fn generators(&self) -> Vec<Word> {
        (1..=self.rank()).map(|i| Word::generator(self.rank(), i).unwrap()).collect()
    }

    fn resolve_letter(&self, name: &str) -> Option<Word> {
        let index = self.name_ctx().lookup(name)?;
        Word::generator(self.rank(), index).ok()
    }

    fn display_elem(&self, a: &Word) -> String {
        expr::render_word(a, &self.name_ctx())
    }

    fn set_name_range(&mut self, offset: usize, total: usize) {
        self.name_offset = offset;
        self.name_total = total;
    }

    fn endo_is_identity(&self) -> bool {
        self.endo.is_identity()
    }
}

/// Element of a free abelian group: an integer vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbelianVector(Vec<BigInt>);

impl AbelianVector {
    pub fn new(components: Vec<BigInt>) -> AbelianVector {
        AbelianVector(components)
    }

    pub fn from_i64(components: &[i64]) -> AbelianVector {
        AbelianVector(components.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero(dim: usize) -> AbelianVector {
        AbelianVector(vec![BigInt::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }
}

/// Endomorphism of `ℤ^dim` as an integer matrix; `apply(v) = M·v`, so the
/// j-th column is the image of the j-th standard generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixEndo {
    dim: usize,
    rows: Vec<Vec<BigInt>>,
    det: BigInt,
}

impl MatrixEndo {
    pub fn new(rows: Vec<Vec<BigInt>>) -> Result<MatrixEndo, BaseError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(BaseError::BadMatrix("matrix must be nonempty".to_string()));
        }
        if rows.iter().any(|row| row.len() != dim) {
            return Err(BaseError::BadMatrix(format!("matrix must be square ({dim}x{dim})")));
        }
        let det = bareiss_det(rows.clone());
        Ok(MatrixEndo { dim, rows, det })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Result<MatrixEndo, BaseError> {
        MatrixEndo::new(
            rows.iter().map(|row| row.iter().map(|&e| BigInt::from(e)).collect()).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn det(&self) -> &BigInt {
        &self.det
    }

    /// Injective iff the determinant is nonzero.
    pub fn is_injective(&self) -> bool {
        !self.det.is_zero()
    }

    /// Surjective iff the determinant is a unit of ℤ.
    pub fn is_surjective(&self) -> bool {
        self.det.abs().is_one()
    }

    pub fn apply(&self, v: &AbelianVector) -> AbelianVector {
        assert_eq!(v.dim(), self.dim, "vector dimension must match the matrix");
        let components = self
            .rows
            .iter()
            .map(|row| row.iter().zip(v.components()).map(|(m, x)| m * x).sum())
            .collect();
        AbelianVector(components)
    }

    /// The unique integral solution of `M·x = v`, if any. Uses Cramer's rule
    /// with exact determinants, so membership in the image is decided by
    /// integrality of each quotient. Requires `is_injective()`.
    pub fn preimage(&self, v: &AbelianVector) -> Option<AbelianVector> {
        assert_eq!(v.dim(), self.dim, "vector dimension must match the matrix");
        assert!(self.is_injective(), "preimage requires a nonsingular matrix");
        let mut components = Vec::with_capacity(self.dim);
        for column in 0..self.dim {
            let mut replaced = self.rows.clone();
            for (row, value) in replaced.iter_mut().zip(v.components()) {
                row[column] = value.clone();
            }
            let numerator = bareiss_det(replaced);
            if !(&numerator % &self.det).is_zero() {
                return None;
            }
            components.push(&numerator / &self.det);
        }
        Some(AbelianVector(components))
    }

    /// Matrix literal in the instance-spec format, e.g. `[[2,0],[0,3]]`.
    pub fn render(&self) -> String {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                let entries: Vec<String> = row.iter().map(BigInt::to_string).collect();
                format!("[{}]", entries.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    }
}

/// Exact integer determinant by Bareiss' fraction-free elimination; every
/// interior division is exact, so there is no rounding at any size.
fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let dim = m.len();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..dim.saturating_sub(1) {
        if m[k][k].is_zero() {
            let Some(pivot) = (k + 1..dim).find(|&r| !m[r][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, pivot);
            negate = !negate;
        }
        for i in k + 1..dim {
            for j in k + 1..dim {
                m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = std::mem::take(&mut m[dim - 1][dim - 1]);
    if negate {
        -det
    } else {
        det
    }
}

/// Free abelian group `ℤ^dim` with a matrix endomorphism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianBase {
    endo: MatrixEndo,
    name_offset: usize,
    name_total: usize,
}

impl AbelianBase {
    pub fn new(endo: MatrixEndo) -> AbelianBase {
        let dim = endo.dim();
        AbelianBase { endo, name_offset: 0, name_total: dim }
    }

    pub fn dim(&self) -> usize {
        self.endo.dim()
    }

    pub fn endo(&self) -> &MatrixEndo {
        &self.endo
    }

    pub fn name_ctx(&self) -> NameCtx {
        NameCtx::sub(self.name_total, self.name_offset, self.dim())
    }
}

impl BaseGroup for AbelianBase {
    type Elem = AbelianVector;

    fn identity(&self) -> AbelianVector {
        AbelianVector::zero(self.dim())
    }

    fn multiply(&self, a: &AbelianVector, b: &AbelianVector) -> AbelianVector {
        AbelianVector(a.components().iter().zip(b.components()).map(|(x, y)| x + y).collect())
    }

    fn invert(&self, a: &AbelianVector) -> AbelianVector {
        AbelianVector(a.components().iter().map(|x| -x).collect())
    }

    fn is_identity(&self, a: &AbelianVector) -> bool {
        a.is_zero()
    }

    fn power(&self, a: &AbelianVector, n: i64) -> AbelianVector {
        let scalar = BigInt::from(n);
        AbelianVector(a.components().iter().map(|x| x * &scalar).collect())
    }

    fn endo_apply(&self, a: &AbelianVector) -> AbelianVector {
        self.endo.apply(a)
    }

    fn endo_image_contains(&self, a: &AbelianVector) -> bool {
        self.endo.preimage(a).is_some()
    }

    fn endo_preimage(&self, a: &AbelianVector) -> Option<AbelianVector> {
        self.endo.preimage(a)
    }

    fn endo_is_injective(&self) -> bool {
        self.endo.is_injective()
    }

    fn endo_is_surjective(&self) -> bool {
        self.endo.is_surjective()
    }
}

impl FactorGroup for AbelianBase {
    fn generator_count(&self) -> usize {
        self.dim()
    }

    fn generators(&self) -> Vec<AbelianVector> {
        (0..self.dim())
            .map(|i| {
                let mut v = vec![BigInt::zero(); self.dim()];
                v[i] = BigInt::one();
                AbelianVector(v)
            })
            .collect()
    }

    fn resolve_letter(&self, name: &str) -> Option<AbelianVector> {
        let index = self.name_ctx().lookup(name)?;
        self.generators().into_iter().nth(index - 1)
    }

    fn display_elem(&self, a: &AbelianVector) -> String {
        let ctx = self.name_ctx();
        let parts: Vec<String> = a
            .components()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| {
                let name = ctx.name(i + 1);
                if c.is_one() {
                    name.to_string()
                } else {
                    format!("{name}^{c}")
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(" ")
        }
    }

    fn set_name_range(&mut self, offset: usize, total: usize) {
        self.name_offset = offset;
        self.name_total = total;
    }

    fn endo_is_identity(&self) -> bool {
        (0..self.dim()).all(|i| {
            (0..self.dim()).all(|j| {
                let expected = if i == j { BigInt::one() } else { BigInt::zero() };
                self.endo.rows[i][j] == expected
            })
        })
    }
}

/// Direct product of two factor groups; the endomorphism acts componentwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductBase<A: FactorGroup, B: FactorGroup> {
    a: A,
    b: B,
}

impl<A: FactorGroup, B: FactorGroup> ProductBase<A, B> {
    /// Builds the product and re-homes both factors' generator names into one
    /// global sequence (`A` first, then `B`).
    pub fn new(mut a: A, mut b: B) -> ProductBase<A, B> {
        let total = a.generator_count() + b.generator_count();
        a.set_name_range(0, total);
        b.set_name_range(a.generator_count(), total);
        ProductBase { a, b }
    }

    pub fn factor_a(&self) -> &A {
        &self.a
    }

    pub fn factor_b(&self) -> &B {
        &self.b
    }

    pub fn inject_a(&self, a: A::Elem) -> (A::Elem, B::Elem) {
        (a, self.b.identity())
    }

    pub fn inject_b(&self, b: B::Elem) -> (A::Elem, B::Elem) {
        (self.a.identity(), b)
    }
}

impl<A: FactorGroup, B: FactorGroup> BaseGroup for ProductBase<A, B> {
    type Elem = (A::Elem, B::Elem);

    fn identity(&self) -> Self::Elem {
        (self.a.identity(), self.b.identity())
    }

    fn multiply(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        (self.a.multiply(&x.0, &y.0), self.b.multiply(&x.1, &y.1))
    }

    fn invert(&self, x: &Self::Elem) -> Self::Elem {
        (self.a.invert(&x.0), self.b.invert(&x.1))
    }

    fn is_identity(&self, x: &Self::Elem) -> bool {
        self.a.is_identity(&x.0) && self.b.is_identity(&x.1)
    }

    fn power(&self, x: &Self::Elem, n: i64) -> Self::Elem {
        (self.a.power(&x.0, n), self.b.power(&x.1, n))
    }

    fn endo_apply(&self, x: &Self::Elem) -> Self::Elem {
        (self.a.endo_apply(&x.0), self.b.endo_apply(&x.1))
    }

    fn endo_image_contains(&self, x: &Self::Elem) -> bool {
        self.a.endo_image_contains(&x.0) && self.b.endo_image_contains(&x.1)
    }

    fn endo_preimage(&self, x: &Self::Elem) -> Option<Self::Elem> {
        Some((self.a.endo_preimage(&x.0)?, self.b.endo_preimage(&x.1)?))
    }

    fn endo_is_injective(&self) -> bool {
        self.a.endo_is_injective() && self.b.endo_is_injective()
    }

    fn endo_is_surjective(&self) -> bool {
        self.a.endo_is_surjective() && self.b.endo_is_surjective()
    }
}

impl<A: FactorGroup, B: FactorGroup> FactorGroup for ProductBase<A, B> {
    fn generator_count(&self) -> usize {
        self.a.generator_count() + self.b.generator_count()
    }

    fn generators(&self) -> Vec<Self::Elem> {
        let mut out: Vec<Self::Elem> =
            self.a.generators().into_iter().map(|g| self.inject_a(g)).collect();
        out.extend(self.b.generators().into_iter().map(|g| self.inject_b(g)));
        out
    }

    fn resolve_letter(&self, name: &str) -> Option<Self::Elem> {
        self.a
            .resolve_letter(name)
            .map(|g| self.inject_a(g))
            .or_else(|| self.b.resolve_letter(name).map(|g| self.inject_b(g)))
    }

    fn display_elem(&self, x: &Self::Elem) -> String {
        let left = self.a.is_identity(&x.0);
        let right = self.b.is_identity(&x.1);
        match (left, right) {
            (true, true) => "1".to_string(),
            (false, true) => self.a.display_elem(&x.0),
            (true, false) => self.b.display_elem(&x.1),
            (false, false) => {
                format!("{} {}", self.a.display_elem(&x.0), self.b.display_elem(&x.1))
            }
        }
    }

    fn set_name_range(&mut self, offset: usize, total: usize) {
        self.a.set_name_range(offset, total);
        self.b.set_name_range(offset + self.a.generator_count(), total);
    }

    fn endo_is_identity(&self) -> bool {
        self.a.endo_is_identity() && self.b.endo_is_identity()
    }
}

/// A parsed base-group instance, ready to drive the extension engine.
///
/// Instances are built once per command and moved into an engine, so the
/// size spread between variants is irrelevant; boxing would only add
/// indirection to every match.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Instance {
    Free(FreeBase),
    Abelian(AbelianBase),
    AbelianPair(ProductBase<AbelianBase, AbelianBase>),
    FreePair(ProductBase<FreeBase, FreeBase>),
}

impl Instance {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Instance::Free(_) => "free",
            Instance::Abelian(_) => "free-abelian",
            Instance::AbelianPair(_) => "product of free-abelian groups",
            Instance::FreePair(_) => "product of free groups",
        }
    }

    pub fn endo_is_injective(&self) -> bool {
        match self {
            Instance::Free(g) => g.endo_is_injective(),
            Instance::Abelian(g) => g.endo_is_injective(),
            Instance::AbelianPair(g) => g.endo_is_injective(),
            Instance::FreePair(g) => g.endo_is_injective(),
        }
    }

    pub fn endo_is_surjective(&self) -> bool {
        match self {
            Instance::Free(g) => g.endo_is_surjective(),
            Instance::Abelian(g) => g.endo_is_surjective(),
            Instance::AbelianPair(g) => g.endo_is_surjective(),
            Instance::FreePair(g) => g.endo_is_surjective(),
        }
    }

    pub fn endo_is_identity(&self) -> bool {
        match self {
            Instance::Free(g) => g.endo_is_identity(),
            Instance::Abelian(g) => g.endo_is_identity(),
            Instance::AbelianPair(g) => g.endo_is_identity(),
            Instance::FreePair(g) => g.endo_is_identity(),
        }
    }

    pub fn generator_count(&self) -> usize {
        match self {
            Instance::Free(g) => g.generator_count(),
            Instance::Abelian(g) => g.generator_count(),
            Instance::AbelianPair(g) => g.generator_count(),
            Instance::FreePair(g) => g.generator_count(),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instance::Free(g) => f.write_str(&expr::render_free_endo(g.endo())),
            Instance::Abelian(g) => write!(f, "dim {}; {}", g.dim(), g.endo().render()),
            Instance::AbelianPair(g) => {
                write!(
                    f,
                    "product; A: dim {}; {}; B: dim {}; {}",
                    g.factor_a().dim(),
                    g.factor_a().endo().render(),
                    g.factor_b().dim(),
                    g.factor_b().endo().render()
                )
            }
            Instance::FreePair(g) => {
                write!(
                    f,
                    "product; A: {}; B: {}",
                    expr::render_free_endo(g.factor_a().endo()),
                    expr::render_free_endo(g.factor_b().endo())
                )
            }
        }
    }
}

fn parse_abelian(text: &str) -> Result<AbelianBase, BaseError> {
    let (head, matrix) = text
        .split_once(';')
        .ok_or_else(|| BaseError::BadInstance("expected `dim <n>; [[..]]`".to_string()))?;
    let dim: usize = head
        .trim()
        .strip_prefix("dim")
        .map(str::trim)
        .and_then(|n| n.parse().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| BaseError::BadInstance(format!("expected `dim <n>` with n ≥ 1, got `{}`", head.trim())))?;
    let rows: Vec<Vec<i64>> = serde_json::from_str(matrix.trim())
        .map_err(|e| BaseError::BadMatrix(format!("unreadable matrix literal: {e}")))?;
    if rows.len() != dim {
        return Err(BaseError::BadMatrix(format!("expected {dim} rows, got {}", rows.len())));
    }
    let endo = MatrixEndo::new(
        rows.into_iter().map(|row| row.into_iter().map(BigInt::from).collect()).collect(),
    )?;
    if endo.dim() != dim {
        return Err(BaseError::BadMatrix(format!("expected a {dim}x{dim} matrix")));
    }
    Ok(AbelianBase::new(endo))
}

/// Parses an instance spec. Three forms:
///
/// - free: `rank 2; a -> a; b -> b^2`
/// - free-abelian: `dim 2; [[2,0],[0,3]]`
/// - product: `product; A: <free or abelian spec>; B: <free or abelian spec>`
///   (both factors must be of the same form; generator names inside each
///   factor spec are local to that factor, while element display uses one
///   global name sequence)
pub fn parse_instance(text: &str) -> Result<Instance, BaseError> {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix("product") {
        let rest = rest.trim_start().trim_start_matches(';').trim_start();
        let rest = rest
            .strip_prefix("A:")
            .ok_or_else(|| BaseError::BadInstance("product spec needs `A:`".to_string()))?;
        let (a_spec, b_spec) = rest
            .split_once("B:")
            .ok_or_else(|| BaseError::BadInstance("product spec needs `B:`".to_string()))?;
        let a_spec = a_spec.trim().trim_end_matches(';').trim();
        let b_spec = b_spec.trim();
        match (parse_instance(a_spec)?, parse_instance(b_spec)?) {
            (Instance::Abelian(a), Instance::Abelian(b)) => {
                Ok(Instance::AbelianPair(ProductBase::new(a, b)))
            }
            (Instance::Free(a), Instance::Free(b)) => {
                Ok(Instance::FreePair(ProductBase::new(a, b)))
            }
            _ => Err(BaseError::BadInstance(
                "product factors must both be free or both free-abelian".to_string(),
            )),
        }
    } else if text.starts_with("rank") {
        Ok(Instance::Free(FreeBase::new(expr::parse_free_endo(text)?)))
    } else if text.starts_with("dim") {
        Ok(Instance::Abelian(parse_abelian(text)?))
    } else {
        Err(BaseError::BadInstance(format!(
            "expected `rank …`, `dim …`, or `product; …`, got `{}`",
            text.chars().take(40).collect::<String>()
        )))
    }
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

    fn diag(entries: &[i64]) -> MatrixEndo {
        let dim = entries.len();
        let rows: Vec<Vec<BigInt>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { BigInt::from(entries[i]) } else { BigInt::zero() })
                    .collect()
            })
            .collect();
        MatrixEndo::new(rows).unwrap()
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(diag(&[2, 3]).det(), &BigInt::from(6));
        assert_eq!(MatrixEndo::from_i64(&[&[0, 1], &[1, 0]]).unwrap().det(), &BigInt::from(-1));
        assert_eq!(MatrixEndo::from_i64(&[&[2, 1], &[4, 2]]).unwrap().det(), &BigInt::zero());
        // Zero pivot forces a row swap.
        assert_eq!(
            MatrixEndo::from_i64(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 5]]).unwrap().det(),
            &BigInt::from(-5)
        );
        assert_eq!(MatrixEndo::from_i64(&[&[7]]).unwrap().det(), &BigInt::from(7));
        assert_eq!(MatrixEndo::from_i64(&[&[0]]).unwrap().det(), &BigInt::zero());
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = StdRng::seed_from_u64(300);
        for _ in 0..200 {
            let e: Vec<i64> = (0..9).map(|_| rng.gen_range(-9..=9)).collect();
            let m = MatrixEndo::from_i64(&[&e[0..3], &e[3..6], &e[6..9]]).unwrap();
            let cofactor = e[0] * (e[4] * e[8] - e[5] * e[7]) - e[1] * (e[3] * e[8] - e[5] * e[6])
                + e[2] * (e[3] * e[7] - e[4] * e[6]);
            assert_eq!(m.det(), &BigInt::from(cofactor), "{e:?}");
        }
    }

    #[test]
    fn matrix_classification() {
        assert!(diag(&[2, 3]).is_injective());
        assert!(!diag(&[2, 3]).is_surjective());
        let swap = MatrixEndo::from_i64(&[&[0, 1], &[1, 0]]).unwrap();
        assert!(swap.is_injective());
        assert!(swap.is_surjective());
        let singular = MatrixEndo::from_i64(&[&[2, 1], &[4, 2]]).unwrap();
        assert!(!singular.is_injective());
        assert!(!singular.is_surjective());
    }

    #[test]
    fn matrix_shape_errors() {
        assert!(MatrixEndo::new(vec![]).is_err());
        assert!(MatrixEndo::from_i64(&[&[1, 2]]).is_err());
        assert!(MatrixEndo::from_i64(&[&[1, 2], &[3]]).is_err());
    }

    #[test]
    fn abelian_preimage_by_cramer() {
        let m = diag(&[2, 3]);
        assert_eq!(
            m.preimage(&AbelianVector::from_i64(&[4, 9])),
            Some(AbelianVector::from_i64(&[2, 3]))
        );
        assert_eq!(m.preimage(&AbelianVector::from_i64(&[1, 0])), None);
        assert_eq!(m.preimage(&AbelianVector::from_i64(&[3, 3])), None);
        assert_eq!(
            m.preimage(&AbelianVector::zero(2)),
            Some(AbelianVector::zero(2))
        );

        let shear = MatrixEndo::from_i64(&[&[1, 1], &[0, 2]]).unwrap();
        // [x + y, 2y] = [5, 4] at [3, 2].
        assert_eq!(
            shear.preimage(&AbelianVector::from_i64(&[5, 4])),
            Some(AbelianVector::from_i64(&[3, 2]))
        );
        assert_eq!(shear.preimage(&AbelianVector::from_i64(&[5, 3])), None);
    }

    #[test]
    fn abelian_preimage_handles_large_values() {
        let m = diag(&[2, 3]);
        let big = AbelianVector::from_i64(&[1 << 41, 0]);
        assert_eq!(m.preimage(&big), Some(AbelianVector::from_i64(&[1 << 40, 0])));
    }

    #[test]
    #[should_panic(expected = "nonsingular")]
    fn singular_preimage_is_a_contract_violation() {
        let singular = MatrixEndo::from_i64(&[&[2, 1], &[4, 2]]).unwrap();
        let _ = singular.preimage(&AbelianVector::from_i64(&[1, 1]));
    }

    #[test]
    fn preimage_inverts_apply_randomized() {
        let mut rng = StdRng::seed_from_u64(301);
        for _ in 0..100 {
            let m = loop {
                let e: Vec<i64> = (0..4).map(|_| rng.gen_range(-5..=5)).collect();
                let m = MatrixEndo::from_i64(&[&e[0..2], &e[2..4]]).unwrap();
                if m.is_injective() {
                    break m;
                }
            };
            let v = AbelianVector::from_i64(&[rng.gen_range(-50..=50), rng.gen_range(-50..=50)]);
            let image = m.apply(&v);
            assert_eq!(m.preimage(&image), Some(v));
        }
    }

    #[test]
    fn abelian_group_operations() {
        let base = AbelianBase::new(diag(&[2, 3]));
        let x = AbelianVector::from_i64(&[1, -2]);
        let y = AbelianVector::from_i64(&[3, 5]);
        assert_eq!(base.multiply(&x, &y), AbelianVector::from_i64(&[4, 3]));
        assert_eq!(base.invert(&x), AbelianVector::from_i64(&[-1, 2]));
        assert_eq!(base.power(&x, -3), AbelianVector::from_i64(&[-3, 6]));
        assert!(base.is_identity(&base.identity()));
        assert_eq!(base.endo_apply(&x), AbelianVector::from_i64(&[2, -6]));
        assert!(base.endo_image_contains(&AbelianVector::from_i64(&[2, 3])));
        assert!(!base.endo_image_contains(&AbelianVector::from_i64(&[1, 3])));
    }

    #[test]
    fn abelian_display_and_parse() {
        let base = AbelianBase::new(diag(&[2, 3]));
        assert_eq!(base.display_elem(&base.identity()), "1");
        assert_eq!(base.display_elem(&AbelianVector::from_i64(&[1, 0])), "a");
        assert_eq!(base.display_elem(&AbelianVector::from_i64(&[2, -1])), "a^2 b^-1");
        assert_eq!(base.parse_elem("a^2 b^-1").unwrap(), AbelianVector::from_i64(&[2, -1]));
        assert_eq!(base.parse_elem("b a b^-2 a").unwrap(), AbelianVector::from_i64(&[2, -1]));
        assert_eq!(base.parse_elem("1").unwrap(), base.identity());
        let round = base.parse_elem(&base.display_elem(&AbelianVector::from_i64(&[-7, 4]))).unwrap();
        assert_eq!(round, AbelianVector::from_i64(&[-7, 4]));
    }

    #[test]
    fn free_base_delegates_to_words_and_endo() {
        let endo = FreeEndo::new(2, vec![word(2, &[1]), word(2, &[2, 2])]).unwrap();
        let base = FreeBase::new(endo);
        let a = word(2, &[1]);
        let b = word(2, &[2]);
        assert_eq!(base.multiply(&a, &b), word(2, &[1, 2]));
        assert_eq!(base.power(&b, 3), word(2, &[2, 2, 2]));
        assert!(base.endo_is_injective());
        assert!(!base.endo_is_surjective());
        assert_eq!(base.endo_apply(&b), word(2, &[2, 2]));
        assert_eq!(base.endo_preimage(&word(2, &[2, 2])), Some(b.clone()));
        assert_eq!(base.endo_preimage(&b), None);
        assert_eq!(base.witness_outside_image(), Some(b));
        assert_eq!(base.display_elem(&word(2, &[1, 1, -2])), "a^2 b^-1");
        assert_eq!(base.parse_elem("aab^-1").unwrap(), word(2, &[1, 1, -2]));
    }

    #[test]
    fn product_operations_are_componentwise() {
        let a = AbelianBase::new(diag(&[2]));
        let b = AbelianBase::new(diag(&[3]));
        let p = ProductBase::new(a, b);
        let x = (AbelianVector::from_i64(&[1]), AbelianVector::from_i64(&[-1]));
        let y = (AbelianVector::from_i64(&[4]), AbelianVector::from_i64(&[2]));
        assert_eq!(
            p.multiply(&x, &y),
            (AbelianVector::from_i64(&[5]), AbelianVector::from_i64(&[1]))
        );
        assert_eq!(
            p.endo_apply(&x),
            (AbelianVector::from_i64(&[2]), AbelianVector::from_i64(&[-3]))
        );
        assert!(p.endo_is_injective());
        assert!(!p.endo_is_surjective());
        assert_eq!(p.endo_preimage(&y), None, "2 ∤ 4 is fine but 3 ∤ 2");
        assert_eq!(
            p.endo_preimage(&(AbelianVector::from_i64(&[4]), AbelianVector::from_i64(&[3]))),
            Some((AbelianVector::from_i64(&[2]), AbelianVector::from_i64(&[1])))
        );
    }

    #[test]
    fn product_naming_is_global() {
        let p = ProductBase::new(AbelianBase::new(diag(&[2])), AbelianBase::new(diag(&[3])));
        let x = (AbelianVector::from_i64(&[2]), AbelianVector::from_i64(&[-1]));
        assert_eq!(p.display_elem(&x), "a^2 b^-1");
        assert_eq!(p.parse_elem("a^2 b^-1").unwrap(), x);
        assert_eq!(p.parse_elem("ab").unwrap(), p.parse_elem("b a").unwrap());
        assert_eq!(p.display_elem(&p.identity()), "1");
        assert_eq!(
            p.generators(),
            vec![
                (AbelianVector::from_i64(&[1]), AbelianVector::from_i64(&[0])),
                (AbelianVector::from_i64(&[0]), AbelianVector::from_i64(&[1])),
            ]
        );
    }

    #[test]
    fn witness_outside_image_exists_iff_not_surjective() {
        let doubling = AbelianBase::new(diag(&[2]));
        assert_eq!(doubling.witness_outside_image(), Some(AbelianVector::from_i64(&[1])));
        let unit = AbelianBase::new(diag(&[1]));
        assert_eq!(unit.witness_outside_image(), None);
        let p = ProductBase::new(AbelianBase::new(diag(&[1])), AbelianBase::new(diag(&[3])));
        let witness = p.witness_outside_image().unwrap();
        assert!(!p.endo_image_contains(&witness));
        assert_eq!(p.display_elem(&witness), "b");
    }

    #[test]
    fn instance_specs_round_trip() {
        let texts = [
            "rank 2; a -> a; b -> b^2",
            "dim 2; [[2,0],[0,3]]",
            "product; A: dim 1; [[2]]; B: dim 1; [[3]]",
            "product; A: rank 1; a -> a^2; B: rank 2; a -> a; b -> b^2",
        ];
        for text in texts {
            let instance = parse_instance(text).unwrap();
            let rendered = instance.to_string();
            let reparsed = parse_instance(&rendered).unwrap();
            assert_eq!(reparsed, instance, "{text} → {rendered}");
        }
    }

    #[test]
    fn instance_classification() {
        let free = parse_instance("rank 2; a -> a; b -> b^2").unwrap();
        assert!(free.endo_is_injective() && !free.endo_is_surjective());
        assert!(!free.endo_is_identity());
        assert_eq!(free.kind_name(), "free");

        let identity = parse_instance("rank 2; a -> a; b -> b").unwrap();
        assert!(identity.endo_is_identity());
        assert!(identity.endo_is_surjective());

        let product = parse_instance("product; A: dim 1; [[2]]; B: dim 1; [[3]]").unwrap();
        assert!(product.endo_is_injective() && !product.endo_is_surjective());
        assert_eq!(product.generator_count(), 2);

        let singular = parse_instance("dim 2; [[2,1],[4,2]]").unwrap();
        assert!(!singular.endo_is_injective());
    }

    #[test]
    fn instance_spec_errors() {
        assert!(parse_instance("nonsense").is_err());
        assert!(parse_instance("dim 2; [[2,0]]").is_err());
        assert!(parse_instance("dim 0; []").is_err());
        assert!(parse_instance("dim 2; [[2,0],[0,oops]]").is_err());
        assert!(parse_instance("product; A: dim 1; [[2]]").is_err(), "missing B");
        assert!(
            parse_instance("product; A: dim 1; [[2]]; B: rank 1; a -> a^2").is_err(),
            "mixed factor kinds"
        );
        assert!(parse_instance("rank 2; a -> a").is_err());
    }
}
