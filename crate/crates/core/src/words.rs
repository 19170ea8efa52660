//! Free-group word arithmetic: letters, freely reduced words, multiplication
//! and inversion.
//!
//! A [`Word`] is always held in freely reduced form; reduction happens eagerly
//! at construction, so every downstream algorithm may assume reduced input.
//! Letters are signed generator indices, not characters; rendering to
//! `a b^-1` style text is a display concern handled by [`crate::expr`].

use std::fmt;

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("generator index {index} out of range for alphabet of rank {rank}")]
    OutOfRange { index: usize, rank: usize },
    #[error("alphabet mismatch: rank {left} vs rank {right}")]
    RankMismatch { left: usize, right: usize },
}

/// One letter of a free-group word: a generator index (1-based) with a sign.
///
/// Stored as a nonzero signed integer, positive for the generator itself and
/// negative for its formal inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter(i32);

impl Letter {
    /// Builds the letter for generator `index` (1-based); `inverse` selects x⁻¹.
    pub fn new(index: usize, inverse: bool) -> Letter {
        assert!(index >= 1 && index <= i32::MAX as usize, "bad generator index");
        Letter(if inverse { -(index as i32) } else { index as i32 })
    }

    pub fn from_signed(value: i32) -> Letter {
        assert!(value != 0, "letter value must be nonzero");
        Letter(value)
    }

    /// 1-based generator index.
    pub fn generator(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    pub fn signed(self) -> i32 {
        self.0
    }

    fn cancels(self, other: Letter) -> bool {
        self.0 == -other.0
    }

    /// Order letters as a < a⁻¹ < b < b⁻¹ < …, used for lexicographic
    /// tie-breaking.
    fn sort_key(self) -> (usize, bool) {
        (self.generator(), self.is_inverse())
    }
}

/// A freely reduced word over a fixed alphabet; the empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

/// Push a letter onto a reduced buffer, cancelling against the top.
fn push_reduced(buffer: &mut Vec<Letter>, letter: Letter) {
    if buffer.last().is_some_and(|&top| top.cancels(letter)) {
        buffer.pop();
    } else {
        buffer.push(letter);
    }
}

impl Word {
    /// Freely reduces `letters` over an alphabet of the given rank.
    ///
    /// Reduction is idempotent and yields the unique reduced form.
    pub fn reduce(rank: usize, letters: impl IntoIterator<Item = Letter>) -> Result<Word, WordError> {
        let mut buffer = Vec::new();
        for letter in letters {
            let index = letter.generator();
            if index == 0 || index > rank {
                return Err(WordError::OutOfRange { index, rank });
            }
            push_reduced(&mut buffer, letter);
        }
        Ok(Word { rank, letters: buffer })
    }

    /// The identity element of the rank-`rank` free group.
    pub fn identity(rank: usize) -> Word {
        Word { rank, letters: Vec::new() }
    }

    /// Single-letter word.
    pub fn generator(rank: usize, index: usize) -> Result<Word, WordError> {
        Word::reduce(rank, [Letter::new(index, false)])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Freely reduced product `self · other`.
    pub fn mul(&self, other: &Word) -> Result<Word, WordError> {
        if self.rank != other.rank {
            return Err(WordError::RankMismatch { left: self.rank, right: other.rank });
        }
        let mut buffer = self.letters.clone();
        for &letter in &other.letters {
            push_reduced(&mut buffer, letter);
        }
        Ok(Word { rank: self.rank, letters: buffer })
    }

    /// Reversed sequence with flipped signs; an involution.
    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// `self` raised to an integer power.
    pub fn pow(&self, exponent: i64) -> Word {
        let base = if exponent < 0 { self.inverse() } else { self.clone() };
        let mut buffer = Vec::new();
        for _ in 0..exponent.unsigned_abs() {
            for &letter in &base.letters {
                push_reduced(&mut buffer, letter);
            }
        }
        Word { rank: self.rank, letters: buffer }
    }

    /// Total order by length, then letter-by-letter (a < a⁻¹ < b < …).
    pub fn cmp_short_lex(&self, other: &Word) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            let lhs = self.letters.iter().map(|l| l.sort_key());
            let rhs = other.letters.iter().map(|l| l.sort_key());
            lhs.cmp(rhs)
        })
    }
}

impl fmt::Display for Word {
    /// Run-length rendering in the default naming scheme, e.g. `a^2 b^-1`;
    /// the identity prints as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::expr::render_word(self, &crate::expr::NameCtx::new(self.rank, 0)))
    }
}
