//! Symbol detectors operating on a received vector.

use num_complex::Complex64;

use super::qam::{bits_from_word, Qam};
use crate::linalg::CMat;

/// Slice `G y` per stream.
pub fn detect_linear_words(y: &CMat, g: &CMat, qam: &Qam) -> Vec<u32> {
    let z = g * y;
    z.iter().map(|&v| qam.slice_word(v)).collect()
}

/// Successive detection from the last stream to the first: stream `k` slices
/// `(G y)_k - sum_{j > k} B_kj s_hat_j` using earlier decisions.
pub fn detect_dfe_words(y: &CMat, g: &CMat, b: &CMat, qam: &Qam) -> Vec<u32> {
    let z = g * y;
    let k = z.nrows();
    let mut decided = vec![Complex64::new(0.0, 0.0); k];
    let mut words = vec![0; k];
    for i in (0..k).rev() {
        let mut v = z[i];
        for j in i + 1..k {
            v -= b[(i, j)] * decided[j];
        }
        words[i] = qam.slice_word(v);
        decided[i] = qam.map_word(words[i]);
    }
    words
}

fn to_bits(words: &[u32], qam: &Qam) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * qam.bits_per_symbol());
    for &w in words {
        bits_from_word(w, qam.bits_per_symbol(), &mut out);
    }
    out
}

/// Bits decided by the linear detector for a single received vector `y`.
pub fn detect_linear(y: &CMat, g: &CMat, qam: &Qam) -> Vec<u8> {
    to_bits(&detect_linear_words(y, g, qam), qam)
}

/// Bits decided by the decision-feedback detector.
pub fn detect_dfe(y: &CMat, g: &CMat, b: &CMat, qam: &Qam) -> Vec<u8> {
    to_bits(&detect_dfe_words(y, g, b, qam), qam)
}
