//! Computational machinery around descending HNN-extensions `G(φ) = ⟨G, t | t⁻¹gt = gφ⟩`
//! for an injective endomorphism `φ` of the base group `G`.
//!
//! The crate provides:
//!
//! - free-group word arithmetic ([`words`]),
//! - Stallings subgroup graphs with folding, intersection, bases and Hall
//!   complements ([`stallings`]),
//! - free-group endomorphisms with image membership and exact preimages
//!   ([`endo`]),
//! - the base-group contract with free, free-abelian and direct-product
//!   realizations ([`basegroup`]),
//! - Britton normal forms `t^m · g · t^{-n}` and the HNN engine ([`hnn`]),
//! - the witness constructions exhibiting non-Howson behavior, together with
//!   certificate generation and independent verification ([`constructions`]),
//! - text formats for words, endomorphisms, matrices and HNN expressions
//!   ([`expr`]).

pub mod basegroup;
pub mod constructions;
pub mod endo;
pub mod expr;
pub mod hnn;
pub mod stallings;
pub mod words;
