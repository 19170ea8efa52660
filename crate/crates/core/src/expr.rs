//! Text formats: generator naming, word rendering and parsing, endomorphism
//! specs, and a small expression language for group elements.
//!
//! The grammar is shared by every surface that reads elements: a term is a
//! juxtaposed sequence of factors, a factor is a name, `1`, or a
//! parenthesized term, optionally raised to an integer power with `^`.
//! `a b^-1 a`, `aBa` (uppercase for inverses), and `(a b^-1) a` all denote
//! the same word. What a name means is decided by the caller: base-alphabet
//! letters here, or letters plus the stable generator `t` and certificate
//! names like `k3` in the engines built on top.

use std::fmt;

use thiserror::Error;

use crate::endo::FreeEndo;
use crate::words::{Letter, Word, WordError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Names for the letters a–s, u–z; `t` is reserved for the stable generator
/// of the extensions built on top of the base alphabets.
const LETTERS: &[u8] = b"abcdefghijklmnopqrsuvwxyz";

/// Printable names for the generators of an alphabet.
///
/// Alphabets with at most 25 symbols in total use single letters (skipping
/// `t`); larger ones use `x1, x2, …`. A context may cover a sub-range of a
/// combined alphabet, so the two factors of a direct product draw from one
/// global sequence of names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameCtx {
    names: Vec<String>,
}

impl NameCtx {
    /// Names for `count` generators at positions `offset..offset+count` of a
    /// global alphabet with `total` symbols.
    pub fn sub(total: usize, offset: usize, count: usize) -> NameCtx {
        let names = (0..count)
            .map(|i| {
                let position = offset + i;
                if total <= LETTERS.len() {
                    (LETTERS[position] as char).to_string()
                } else {
                    format!("x{}", position + 1)
                }
            })
            .collect();
        NameCtx { names }
    }

    /// Context for a standalone alphabet of `count` generators following
    /// `offset` earlier ones.
    pub fn new(count: usize, offset: usize) -> NameCtx {
        NameCtx::sub(offset + count, offset, count)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Name of the 1-based generator `index`.
    pub fn name(&self, index: usize) -> &str {
        &self.names[index - 1]
    }

    /// 1-based index of `name`, if it belongs to this context.
    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name).map(|i| i + 1)
    }
}

/// Run-length rendering: `a a b⁻¹ b⁻¹` prints as `a^2 b^-2`, the identity
/// as `1`.
pub fn render_word(w: &Word, ctx: &NameCtx) -> String {
    let letters = w.letters();
    if letters.is_empty() {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    let mut i = 0;
    while i < letters.len() {
        let mut j = i;
        while j < letters.len() && letters[j] == letters[i] {
            j += 1;
        }
        let name = ctx.name(letters[i].generator());
        let exponent = if letters[i].is_inverse() { i as i64 - j as i64 } else { (j - i) as i64 };
        parts.push(if exponent == 1 { name.to_string() } else { format!("{name}^{exponent}") });
        i = j;
    }
    parts.join(" ")
}

/// Abstract syntax of an element expression. Names stay unresolved until
/// evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Identity,
    Name(String),
    Power(Box<Expr>, i64),
    Product(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Int(i64),
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push(Token::LParen);
            }
            ')' => {
                chars.next();
                tokens.push(Token::RParen);
            }
            '^' => {
                chars.next();
                tokens.push(Token::Caret);
            }
            '-' | '0'..='9' => {
                if c == '-' && !matches!(tokens.last(), Some(Token::Caret)) {
                    return Err(ExprError::Syntax("`-` is only valid after `^`".to_string()));
                }
                let mut digits = String::new();
                if c == '-' {
                    digits.push(c);
                    chars.next();
                }
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    digits.push(chars.next().unwrap());
                }
                let value: i64 = digits
                    .parse()
                    .map_err(|_| ExprError::Syntax(format!("bad integer `{digits}`")))?;
                tokens.push(Token::Int(value));
            }
            // A name is one letter plus optional digits (`a`, `t`, `x12`,
            // `k3`), so juxtaposed letters split: `ab^-1` is a·b⁻¹.
            c if c.is_ascii_alphabetic() => {
                let mut ident = String::new();
                ident.push(c);
                chars.next();
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    ident.push(chars.next().unwrap());
                }
                tokens.push(Token::Ident(ident));
            }
            other => {
                return Err(ExprError::Syntax(format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(tokens)
}

/// Parses an expression; names are not resolved.
pub fn parse_expr(text: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let expr = parse_product(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ExprError::Syntax("unmatched `)`".to_string()));
    }
    Ok(expr)
}

fn parse_product(tokens: &[Token], pos: &mut usize) -> Result<Expr, ExprError> {
    let mut factors = Vec::new();
    while !matches!(tokens.get(*pos), None | Some(Token::RParen)) {
        factors.push(parse_factor(tokens, pos)?);
    }
    match factors.len() {
        0 => Err(ExprError::Syntax("empty expression; write `1` for the identity".to_string())),
        1 => Ok(factors.pop().unwrap()),
        _ => Ok(Expr::Product(factors)),
    }
}

fn parse_factor(tokens: &[Token], pos: &mut usize) -> Result<Expr, ExprError> {
    let atom = match tokens.get(*pos) {
        Some(Token::Ident(name)) => {
            *pos += 1;
            Expr::Name(name.clone())
        }
        Some(Token::Int(1)) => {
            *pos += 1;
            Expr::Identity
        }
        Some(Token::Int(n)) => {
            return Err(ExprError::Syntax(format!("unexpected number `{n}`")));
        }
        Some(Token::LParen) => {
            *pos += 1;
            let inner = parse_product(tokens, pos)?;
            if !matches!(tokens.get(*pos), Some(Token::RParen)) {
                return Err(ExprError::Syntax("missing `)`".to_string()));
            }
            *pos += 1;
            inner
        }
        Some(Token::Caret) => {
            return Err(ExprError::Syntax("`^` needs a base to its left".to_string()));
        }
        None | Some(Token::RParen) => {
            return Err(ExprError::Syntax("expected a factor".to_string()));
        }
    };
    if matches!(tokens.get(*pos), Some(Token::Caret)) {
        *pos += 1;
        match tokens.get(*pos) {
            Some(Token::Int(n)) => {
                *pos += 1;
                Ok(Expr::Power(Box::new(atom), *n))
            }
            _ => Err(ExprError::Syntax("`^` needs an integer exponent".to_string())),
        }
    } else {
        Ok(atom)
    }
}

/// Resolves a name to a word over the context's alphabet. Unknown multi-letter
/// names fall back to letter-by-letter resolution with uppercase meaning
/// inverse, so `aBa` reads as `a b^-1 a`.
fn resolve_name(name: &str, rank: usize, ctx: &NameCtx) -> Result<Word, ExprError> {
    if let Some(index) = ctx.lookup(name) {
        if index <= rank {
            return Ok(Word::generator(rank, index)?);
        }
        return Err(ExprError::UnknownName(name.to_string()));
    }
    let mut letters = Vec::new();
    for c in name.chars() {
        if !c.is_ascii_alphabetic() {
            return Err(ExprError::UnknownName(name.to_string()));
        }
        let index = ctx
            .lookup(&c.to_ascii_lowercase().to_string())
            .filter(|&i| i <= rank)
            .ok_or_else(|| ExprError::UnknownName(name.to_string()))?;
        letters.push(Letter::new(index, c.is_ascii_uppercase()));
    }
    Ok(Word::reduce(rank, letters)?)
}

/// Evaluates an expression whose names are all alphabet letters.
pub fn eval_word(expr: &Expr, rank: usize, ctx: &NameCtx) -> Result<Word, ExprError> {
    match expr {
        Expr::Identity => Ok(Word::identity(rank)),
        Expr::Name(name) => resolve_name(name, rank, ctx),
        Expr::Power(base, exponent) => Ok(eval_word(base, rank, ctx)?.pow(*exponent)),
        Expr::Product(factors) => {
            let mut acc = Word::identity(rank);
            for factor in factors {
                acc = acc.mul(&eval_word(factor, rank, ctx)?)?;
            }
            Ok(acc)
        }
    }
}

/// Parses a word in the expression grammar over the context's alphabet.
pub fn parse_word(rank: usize, text: &str, ctx: &NameCtx) -> Result<Word, ExprError> {
    eval_word(&parse_expr(text)?, rank, ctx)
}

/// Parses the endomorphism format `rank 2; a -> a; b -> b^2`. Every generator
/// needs exactly one image; images use the word grammar.
pub fn parse_free_endo(text: &str) -> Result<FreeEndo, ExprError> {
    let mut parts = text.split(';');
    let head = parts.next().unwrap_or_default().trim();
    let rank: usize = head
        .strip_prefix("rank")
        .map(str::trim)
        .and_then(|n| n.parse().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            ExprError::Syntax(format!("expected `rank <n>` with n ≥ 1, got `{head}`"))
        })?;
    let ctx = NameCtx::new(rank, 0);
    let mut images: Vec<Option<Word>> = vec![None; rank];
    for part in parts {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lhs, rhs) = part
            .split_once("->")
            .ok_or_else(|| ExprError::Syntax(format!("expected `<gen> -> <word>` in `{part}`")))?;
        let name = lhs.trim();
        let index = ctx.lookup(name).ok_or_else(|| ExprError::UnknownName(name.to_string()))?;
        if images[index - 1].is_some() {
            return Err(ExprError::Syntax(format!("duplicate image for `{name}`")));
        }
        images[index - 1] = Some(parse_word(rank, rhs, &ctx)?);
    }
    let images = images
        .into_iter()
        .enumerate()
        .map(|(i, image)| {
            image.ok_or_else(|| {
                ExprError::Syntax(format!("missing image for `{}`", ctx.name(i + 1)))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FreeEndo::new(rank, images).expect("image count and ranks were checked"))
}

/// Inverse of [`parse_free_endo`]: round-trips through the same format.
pub fn render_free_endo(endo: &FreeEndo) -> String {
    let ctx = NameCtx::new(endo.rank(), 0);
    let images = endo
        .images()
        .iter()
        .enumerate()
        .map(|(i, image)| format!("{} -> {}", ctx.name(i + 1), render_word(image, &ctx)))
        .collect::<Vec<_>>()
        .join("; ");
    format!("rank {}; {}", endo.rank(), images)
}

impl fmt::Display for Expr {
    /// Prints in the grammar the parser accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Identity => f.write_str("1"),
            Expr::Name(name) => f.write_str(name),
            Expr::Power(base, exponent) => match base.as_ref() {
                Expr::Identity | Expr::Name(_) => write!(f, "{base}^{exponent}"),
                _ => write!(f, "({base})^{exponent}"),
            },
            Expr::Product(factors) => {
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    match factor {
                        Expr::Product(_) => write!(f, "({factor})")?,
                        _ => write!(f, "{factor}")?,
                    }
                }
                Ok(())
            }
        }
    }
}
