//! Block words over a dense alphabet `0..k`.
//!
//! Words are indexed in mixed radix with the first symbol most significant,
//! so index order coincides with lexicographic order.

use crate::error::{Error, Result};

/// A block of `n` symbols.
pub type Word = Vec<usize>;

/// Number of words of length `n` over an alphabet of size `k`, if it fits in `u64`.
pub fn word_count(k: usize, n: usize) -> Option<u64> {
    (k as u64).checked_pow(u32::try_from(n).ok()?)
}

/// `k^n` as a float, for budget messages when the count overflows.
pub fn word_count_f64(k: usize, n: usize) -> f64 {
    (k as f64).powi(n as i32)
}

pub fn word_from_index(mut index: u64, k: usize, n: usize) -> Word {
    let mut word = vec![0; n];
    for slot in word.iter_mut().rev() {
        *slot = (index % k as u64) as usize;
        index /= k as u64;
    }
    word
}

pub fn word_index(word: &[usize], k: usize) -> u64 {
    word.iter().fold(0u64, |acc, &s| acc * k as u64 + s as u64)
}

pub(crate) fn check_word(word: &[usize], k: usize, n: usize) -> Result<()> {
    if word.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: word.len() });
    }
    if let Some(&symbol) = word.iter().find(|&&s| s >= k) {
        return Err(Error::SymbolOutOfRange { symbol, alphabet: k });
    }
    Ok(())
}

/// Advances `word` to its successor; returns the leftmost position that changed,
/// or `None` after the last word (the word wraps to all zeros).
pub(crate) fn advance(word: &mut [usize], k: usize) -> Option<usize> {
    for pos in (0..word.len()).rev() {
        word[pos] += 1;
        if word[pos] < k {
            return Some(pos);
        }
        word[pos] = 0;
    }
    None
}

/// Hamming distance.
pub fn distance(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}
