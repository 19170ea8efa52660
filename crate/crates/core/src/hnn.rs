//! The extension engine: exact arithmetic in the group
//! `⟨ base, t | t⁻¹ g t = φ(g) ⟩` for an injective endomorphism `φ` of the
//! base group.
//!
//! Every element has a unique normal form `t^m · g · t^{-n}` with
//! `m, n ≥ 0`, reduced so that `m = 0`, `n = 0`, or `g ∉ im φ`; equality is
//! literal equality of reduced triples. The two rewriting moves are
//! `g · t^d = t^d · φ^d(g)` (absorbing stable letters from the right) and
//! peeling `t · φ⁻¹(g) · t⁻¹ = g` when `g ∈ im φ`.
//!
//! Each public operation runs under a budget counting applications of `φ`
//! and `φ⁻¹`; exceeding it aborts with [`HnnError::DepthGuard`] instead of
//! silently grinding through unbounded towers. Applying `φ` to the identity
//! is free.

use thiserror::Error;

use crate::basegroup::{BaseGroup, FactorGroup};
use crate::expr::{self, Expr, ExprError};

pub const DEFAULT_DEPTH_LIMIT: u64 = 64;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum HnnError {
    #[error(
        "endomorphism budget of {limit} applications exceeded; \
         raise the depth limit if the input is genuinely this deep"
    )]
    DepthGuard { limit: u64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Normal form `t^m · g · t^{-n}`. Instances are only created by the engine,
/// so a value of this type is always reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HnnElement<E> {
    m: u64,
    g: E,
    n: u64,
}

impl<E> HnnElement<E> {
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn g(&self) -> &E {
        &self.g
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Image under the retraction `t ↦ 1` of the stable exponent: `m − n`.
    pub fn t_exponent(&self) -> i64 {
        self.m as i64 - self.n as i64
    }

    pub fn in_base(&self) -> bool {
        self.m == 0 && self.n == 0
    }
}

struct Budget {
    remaining: u64,
    limit: u64,
}

impl Budget {
    fn new(limit: u64) -> Budget {
        Budget { remaining: limit, limit }
    }

    fn tick(&mut self, cost: u64) -> Result<(), HnnError> {
        if cost > self.remaining {
            return Err(HnnError::DepthGuard { limit: self.limit });
        }
        self.remaining -= cost;
        Ok(())
    }
}

/// Engine for the extension of `base` by its distinguished endomorphism.
///
/// The base's endomorphism must be injective; constructing an engine does not
/// check this, callers validating untrusted input should.
#[derive(Debug, Clone)]
pub struct Hnn<B: BaseGroup> {
    base: B,
    depth_limit: u64,
}

impl<B: BaseGroup> Hnn<B> {
    pub fn new(base: B) -> Hnn<B> {
        Hnn { base, depth_limit: DEFAULT_DEPTH_LIMIT }
    }

    pub fn with_depth_limit(base: B, depth_limit: u64) -> Hnn<B> {
        Hnn { base, depth_limit }
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn depth_limit(&self) -> u64 {
        self.depth_limit
    }

    pub fn one(&self) -> HnnElement<B::Elem> {
        HnnElement { m: 0, g: self.base.identity(), n: 0 }
    }

    pub fn from_base(&self, g: B::Elem) -> HnnElement<B::Elem> {
        HnnElement { m: 0, g, n: 0 }
    }

    pub fn t(&self) -> HnnElement<B::Elem> {
        HnnElement { m: 1, g: self.base.identity(), n: 0 }
    }

    pub fn t_inverse(&self) -> HnnElement<B::Elem> {
        HnnElement { m: 0, g: self.base.identity(), n: 1 }
    }

    /// `t^k` for any sign of `k`.
    pub fn t_pow(&self, k: i64) -> HnnElement<B::Elem> {
        if k >= 0 {
            HnnElement { m: k as u64, g: self.base.identity(), n: 0 }
        } else {
            HnnElement { m: 0, g: self.base.identity(), n: k.unsigned_abs() }
        }
    }

    /// Builds and reduces an element from a raw triple.
    pub fn element(&self, m: u64, g: B::Elem, n: u64) -> Result<HnnElement<B::Elem>, HnnError> {
        let mut budget = Budget::new(self.depth_limit);
        self.normalize(m, g, n, &mut budget)
    }

    /// True iff the triple satisfies the reduction invariant. Engine-made
    /// elements always do; this is for tests and verifiers.
    pub fn is_reduced(&self, x: &HnnElement<B::Elem>) -> bool {
        x.m == 0 || x.n == 0 || !self.base.endo_image_contains(&x.g)
    }

    /// Peels `(m, g, n) ↦ (m−1, φ⁻¹(g), n−1)` while `g` stays in the image.
    fn normalize(
        &self,
        mut m: u64,
        mut g: B::Elem,
        mut n: u64,
        budget: &mut Budget,
    ) -> Result<HnnElement<B::Elem>, HnnError> {
        while m > 0 && n > 0 && self.base.endo_image_contains(&g) {
            budget.tick(1)?;
            g = self.base.endo_preimage(&g).expect("membership was just checked");
            m -= 1;
            n -= 1;
        }
        Ok(HnnElement { m, g, n })
    }

    /// `φ^k(g)`, charged `k` ticks; the identity is moved for free.
    fn shift(&self, g: &B::Elem, k: u64, budget: &mut Budget) -> Result<B::Elem, HnnError> {
        if k == 0 || self.base.is_identity(g) {
            return Ok(g.clone());
        }
        budget.tick(k)?;
        let mut out = g.clone();
        for _ in 0..k {
            out = self.base.endo_apply(&out);
        }
        Ok(out)
    }

    fn multiply_budgeted(
        &self,
        x: &HnnElement<B::Elem>,
        y: &HnnElement<B::Elem>,
        budget: &mut Budget,
    ) -> Result<HnnElement<B::Elem>, HnnError> {
        if y.m >= x.n {
            // x·y = t^{m1} g1 t^{d} g2 t^{-n2} with d = m2 − n1 ≥ 0.
            let d = y.m - x.n;
            let g = self.base.multiply(&self.shift(&x.g, d, budget)?, &y.g);
            self.normalize(x.m + d, g, y.n, budget)
        } else {
            // Remaining descent d = n1 − m2 > 0: x·y = t^{m1} g1 φ^d(g2) t^{-(d+n2)}.
            let d = x.n - y.m;
            let g = self.base.multiply(&x.g, &self.shift(&y.g, d, budget)?);
            self.normalize(x.m, g, d + y.n, budget)
        }
    }

    pub fn multiply(
        &self,
        x: &HnnElement<B::Elem>,
        y: &HnnElement<B::Elem>,
    ) -> Result<HnnElement<B::Elem>, HnnError> {
        let mut budget = Budget::new(self.depth_limit);
        self.multiply_budgeted(x, y, &mut budget)
    }

    pub fn invert(&self, x: &HnnElement<B::Elem>) -> Result<HnnElement<B::Elem>, HnnError> {
        let mut budget = Budget::new(self.depth_limit);
        // (t^m g t^{-n})⁻¹ = t^n g⁻¹ t^{-m}; already reduced whenever the
        // input is, since g and g⁻¹ lie in im φ together.
        self.normalize(x.n, self.base.invert(&x.g), x.m, &mut budget)
    }

    /// `x^k` by repeated multiplication; each step runs under its own budget.
    pub fn pow(&self, x: &HnnElement<B::Elem>, k: i64) -> Result<HnnElement<B::Elem>, HnnError> {
        let base = if k < 0 { self.invert(x)? } else { x.clone() };
        let mut acc = self.one();
        for _ in 0..k.unsigned_abs() {
            acc = self.multiply(&acc, &base)?;
        }
        Ok(acc)
    }

    /// Evaluates an expression under one shared budget. `resolve` supplies
    /// the meaning of every name.
    pub fn eval(
        &self,
        expr: &Expr,
        resolve: &mut dyn FnMut(&str) -> Option<HnnElement<B::Elem>>,
    ) -> Result<HnnElement<B::Elem>, HnnError> {
        let mut budget = Budget::new(self.depth_limit);
        self.eval_budgeted(expr, resolve, &mut budget)
    }

    fn eval_budgeted(
        &self,
        expr: &Expr,
        resolve: &mut dyn FnMut(&str) -> Option<HnnElement<B::Elem>>,
        budget: &mut Budget,
    ) -> Result<HnnElement<B::Elem>, HnnError> {
        match expr {
            Expr::Identity => Ok(self.one()),
            Expr::Name(name) => {
                resolve(name).ok_or_else(|| ExprError::UnknownName(name.clone()).into())
            }
            Expr::Power(inner, exponent) => {
                let value = self.eval_budgeted(inner, resolve, budget)?;
                let base = if *exponent < 0 {
                    self.normalize(value.n, self.base.invert(&value.g), value.m, budget)?
                } else {
                    value
                };
                let mut acc = self.one();
                for _ in 0..exponent.unsigned_abs() {
                    acc = self.multiply_budgeted(&acc, &base, budget)?;
                }
                Ok(acc)
            }
            Expr::Product(factors) => {
                let mut acc = self.one();
                for factor in factors {
                    let value = self.eval_budgeted(factor, resolve, budget)?;
                    acc = self.multiply_budgeted(&acc, &value, budget)?;
                }
                Ok(acc)
            }
        }
    }
}

impl<B: FactorGroup> Hnn<B> {
    /// Evaluates with the standard names: `t` (and `T` for `t⁻¹`) plus the
    /// base generators, with single uppercase letters as inverses.
    pub fn eval_with_base_names(&self, expr: &Expr) -> Result<HnnElement<B::Elem>, HnnError> {
        self.eval(expr, &mut |name| match name {
            "t" => Some(self.t()),
            "T" => Some(self.t_inverse()),
            other => {
                if let Some(g) = self.base.resolve_letter(other) {
                    return Some(self.from_base(g));
                }
                let mut chars = other.chars();
                let (Some(c), None) = (chars.next(), chars.next()) else { return None };
                if !c.is_ascii_uppercase() {
                    return None;
                }
                let g = self.base.resolve_letter(&c.to_ascii_lowercase().to_string())?;
                Some(self.from_base(self.base.invert(&g)))
            }
        })
    }

    /// Parses and evaluates element text in one step.
    pub fn eval_text(&self, text: &str) -> Result<HnnElement<B::Elem>, HnnError> {
        self.eval_with_base_names(&expr::parse_expr(text)?)
    }

    /// Renders the normal form, e.g. `t^2 a b^-1 t^-1`; the identity is `1`.
    pub fn display_elem(&self, x: &HnnElement<B::Elem>) -> String {
        let mut parts = Vec::new();
        match x.m {
            0 => {}
            1 => parts.push("t".to_string()),
            m => parts.push(format!("t^{m}")),
        }
        if !self.base.is_identity(&x.g) {
            parts.push(self.base.display_elem(&x.g));
        }
        if x.n > 0 {
            parts.push(format!("t^-{}", x.n));
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(" ")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basegroup::{AbelianBase, AbelianVector, FreeBase, MatrixEndo, ProductBase};
    use crate::endo::FreeEndo;
    use crate::words::{Letter, Word};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn word(rank: usize, signed: &[i32]) -> Word {
        Word::reduce(rank, signed.iter().map(|&v| Letter::from_signed(v))).unwrap()
    }

    /// ⟨a, t | t⁻¹ a t = a²⟩ over the free base ⟨a⟩.
    fn bs12() -> Hnn<FreeBase> {
        let endo = FreeEndo::new(1, vec![word(1, &[1, 1])]).unwrap();
        Hnn::new(FreeBase::new(endo))
    }

    /// Same group over the base ℤ: t⁻¹ x t = 2x.
    fn bs12_abelian() -> Hnn<AbelianBase> {
        Hnn::new(AbelianBase::new(MatrixEndo::from_i64(&[&[2]]).unwrap()))
    }

    #[test]
    fn defining_relation_holds() {
        let engine = bs12();
        let conjugated = engine.eval_text("t^-1 a t").unwrap();
        assert_eq!(conjugated, engine.eval_text("a^2").unwrap());
        assert!(conjugated.in_base());

        let engine = bs12_abelian();
        let conjugated = engine.eval_text("t^-1 a t").unwrap();
        assert_eq!(conjugated, engine.from_base(AbelianVector::from_i64(&[2])));
    }

    #[test]
    fn absorbing_relation_holds() {
        let engine = bs12();
        assert_eq!(engine.eval_text("a t").unwrap(), engine.eval_text("t a^2").unwrap());
        assert_eq!(engine.eval_text("t^-2 a^3 t^2").unwrap(), engine.eval_text("a^12").unwrap());
    }

    #[test]
    fn conjugates_out_of_the_image_stay_reduced() {
        let engine = bs12();
        let x = engine.eval_text("t a t^-1").unwrap();
        assert_eq!((x.m(), x.n()), (1, 1));
        assert!(!x.in_base());
        assert!(engine.is_reduced(&x));
        // t a² t⁻¹ peels to a.
        let y = engine.eval_text("t a^2 t^-1").unwrap();
        assert_eq!(y, engine.eval_text("a").unwrap());
    }

    #[test]
    fn normal_form_examples() {
        let engine = bs12();
        let x = engine.eval_text("t^2 a t^-1").unwrap();
        assert_eq!((x.m(), x.g().clone(), x.n()), (2, word(1, &[1]), 1));
        assert_eq!(engine.display_elem(&x), "t^2 a t^-1");
        assert_eq!(engine.display_elem(&engine.one()), "1");
        assert_eq!(engine.display_elem(&engine.t_pow(-3)), "t^-3");
        assert_eq!(engine.t_pow(-3).t_exponent(), -3);
        assert_eq!(x.t_exponent(), 1);
    }

    #[test]
    fn element_constructor_reduces() {
        let engine = bs12();
        let x = engine.element(2, word(1, &[1, 1, 1, 1]), 2).unwrap();
        assert_eq!((x.m(), x.g().clone(), x.n()), (0, word(1, &[1]), 0));
        let y = engine.element(3, word(1, &[1]), 1).unwrap();
        assert_eq!((y.m(), y.g().clone(), y.n()), (3, word(1, &[1]), 1));
    }

    #[test]
    fn group_axioms_on_random_products() {
        let engine = bs12();
        let mut rng = StdRng::seed_from_u64(1009);
        let atom = |rng: &mut StdRng, engine: &Hnn<FreeBase>| {
            let choice = rng.gen_range(0..4);
            match choice {
                0 => engine.t(),
                1 => engine.t_inverse(),
                2 => engine.from_base(word(1, &[1])),
                _ => engine.from_base(word(1, &[-1])),
            }
        };
        for _ in 0..300 {
            let mut x = engine.one();
            let mut y = engine.one();
            let mut z = engine.one();
            for _ in 0..rng.gen_range(0..5) {
                x = engine.multiply(&x, &atom(&mut rng, &engine)).unwrap();
            }
            for _ in 0..rng.gen_range(0..5) {
                y = engine.multiply(&y, &atom(&mut rng, &engine)).unwrap();
            }
            for _ in 0..rng.gen_range(0..5) {
                z = engine.multiply(&z, &atom(&mut rng, &engine)).unwrap();
            }
            assert!(engine.is_reduced(&x));
            // Associativity.
            let left = engine.multiply(&engine.multiply(&x, &y).unwrap(), &z).unwrap();
            let right = engine.multiply(&x, &engine.multiply(&y, &z).unwrap()).unwrap();
            assert_eq!(left, right);
            // Inverses.
            let inv = engine.invert(&x).unwrap();
            assert_eq!(engine.multiply(&x, &inv).unwrap(), engine.one());
            assert_eq!(engine.multiply(&inv, &x).unwrap(), engine.one());
            // Stable exponent is a homomorphism to ℤ.
            let product = engine.multiply(&x, &y).unwrap();
            assert_eq!(product.t_exponent(), x.t_exponent() + y.t_exponent());
        }
    }

    #[test]
    fn powers_match_repeated_multiplication() {
        let engine = bs12();
        let x = engine.eval_text("t a").unwrap();
        let mut acc = engine.one();
        for k in 0..6 {
            assert_eq!(engine.pow(&x, k).unwrap(), acc);
            acc = engine.multiply(&acc, &x).unwrap();
        }
        let inv3 = engine.pow(&x, -3).unwrap();
        assert_eq!(engine.multiply(&engine.pow(&x, 3).unwrap(), &inv3).unwrap(), engine.one());
    }

    #[test]
    fn depth_guard_trips_on_deep_towers() {
        let endo = FreeEndo::new(1, vec![word(1, &[1, 1])]).unwrap();
        let engine = Hnn::with_depth_limit(FreeBase::new(endo), 4);
        let err = engine.eval_text("t^-5 a t^5").unwrap_err();
        assert_eq!(err, HnnError::DepthGuard { limit: 4 });
        // Pure stable-letter towers cost nothing.
        assert!(engine.eval_text("t^-40 t^40").is_ok());
        // The same computation passes with a budget that covers it.
        assert!(bs12().eval_text("t^-5 a t^5").is_ok());
    }

    #[test]
    fn eval_unknown_name_errors() {
        let engine = bs12();
        assert!(matches!(
            engine.eval_text("t q"),
            Err(HnnError::Expr(ExprError::UnknownName(name))) if name == "q"
        ));
    }

    #[test]
    fn eval_accepts_uppercase_inverses() {
        let engine = bs12();
        assert_eq!(engine.eval_text("A").unwrap(), engine.eval_text("a^-1").unwrap());
        assert_eq!(engine.eval_text("T a t").unwrap(), engine.eval_text("a^2").unwrap());
    }

    #[test]
    fn display_round_trips_through_eval() {
        let engine = bs12();
        for text in ["1", "t^3", "a^-2", "t^2 a t^-1", "t a^5 t^-3"] {
            let x = engine.eval_text(text).unwrap();
            let printed = engine.display_elem(&x);
            assert_eq!(engine.eval_text(&printed).unwrap(), x, "{text} → {printed}");
        }
    }

    #[test]
    fn abelian_and_free_presentations_agree() {
        let free = bs12();
        let abelian = bs12_abelian();
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..200 {
            let mut text = String::new();
            for _ in 0..rng.gen_range(1..=6) {
                match rng.gen_range(0..3) {
                    0 => text.push_str(" t"),
                    1 => text.push_str(" t^-1"),
                    _ => text.push_str(if rng.gen() { " a" } else { " a^-1" }),
                }
            }
            let via_free = free.eval_text(&text);
            let via_abelian = abelian.eval_text(&text);
            match (via_free, via_abelian) {
                (Ok(x), Ok(y)) => {
                    assert_eq!((x.m(), x.n()), (y.m(), y.n()), "{text}");
                    let exponent: i64 = x
                        .g()
                        .letters()
                        .iter()
                        .map(|l| if l.is_inverse() { -1i64 } else { 1 })
                        .sum();
                    assert_eq!(
                        y.g().components()[0],
                        num_bigint::BigInt::from(exponent),
                        "{text}"
                    );
                }
                (a, b) => panic!("presentations disagree on {text}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn product_base_engine_smoke() {
        let a = AbelianBase::new(MatrixEndo::from_i64(&[&[2]]).unwrap());
        let b = AbelianBase::new(MatrixEndo::from_i64(&[&[3]]).unwrap());
        let engine = Hnn::new(ProductBase::new(a, b));
        let tb = engine.eval_text("t b").unwrap();
        let squared = engine.multiply(&tb, &tb).unwrap();
        // (tb)² = t² · φ(b)·b = t² b⁴ since φ(b) = 3b.
        assert_eq!(squared.m(), 2);
        assert_eq!(squared.n(), 0);
        assert_eq!(squared.g().1, AbelianVector::from_i64(&[4]));
        assert_eq!(engine.display_elem(&squared), "t^2 b^4");
    }
}
