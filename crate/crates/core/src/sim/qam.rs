//! Gray-mapped square QAM with unit average energy.
//!
//! Each symbol carries `log2(M)` bits; the first half selects the in-phase
//! level and the second half the quadrature level. On each axis the bit
//! group is Gray-decoded to a level index `i` and mapped to `L - 1 - 2i`, so
//! an all-zero group gives the largest positive level. For 4-QAM, `00` maps
//! to `(1 + j) / sqrt(2)`.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Constellation parameters of a square QAM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qam {
    pub order: u32,
    /// Bits per axis.
    pub axis_bits: u32,
    /// Levels per axis.
    pub levels: u32,
    scale: f64,
}

impl Qam {
    pub fn new(order: u32) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(invalid(format!("QAM order {order} not in {{4, 16, 64}}")));
        }
        let axis_bits = order.trailing_zeros() / 2;
        let levels = 1 << axis_bits;
        Ok(Self {
            order,
            axis_bits,
            levels,
            scale: (2.0 * (order as f64 - 1.0) / 3.0).sqrt(),
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.axis_bits as usize
    }

    fn level(&self, gray: u32) -> f64 {
        let idx = gray_to_binary(gray);
        (self.levels as f64 - 1.0 - 2.0 * idx as f64) / self.scale
    }

    fn nearest_index(&self, v: f64) -> u32 {
        let idx = ((self.levels as f64 - 1.0 - v * self.scale) / 2.0).round();
        idx.clamp(0.0, self.levels as f64 - 1.0) as u32
    }

    /// Symbol for a `bits_per_symbol()`-bit word, most significant bit first.
    pub fn map_word(&self, word: u32) -> Complex64 {
        let mask = (1 << self.axis_bits) - 1;
        Complex64::new(
            self.level((word >> self.axis_bits) & mask),
            self.level(word & mask),
        )
    }

    /// Word of the constellation point nearest to `z`.
    pub fn slice_word(&self, z: Complex64) -> u32 {
        let i = binary_to_gray(self.nearest_index(z.re));
        let q = binary_to_gray(self.nearest_index(z.im));
        (i << self.axis_bits) | q
    }

    /// Constellation point nearest to `z`.
    pub fn slice(&self, z: Complex64) -> Complex64 {
        let point = |v: f64| (self.levels as f64 - 1.0 - 2.0 * self.nearest_index(v) as f64) / self.scale;
        Complex64::new(point(z.re), point(z.im))
    }
}

pub fn gray_to_binary(mut g: u32) -> u32 {
    let mut shift = g >> 1;
    while shift != 0 {
        g ^= shift;
        shift >>= 1;
    }
    g
}

pub fn binary_to_gray(b: u32) -> u32 {
    b ^ (b >> 1)
}

pub(crate) fn word_from_bits(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |w, &b| (w << 1) | (b & 1) as u32)
}

pub(crate) fn bits_from_word(word: u32, n: usize, out: &mut Vec<u8>) {
    for i in (0..n).rev() {
        out.push(((word >> i) & 1) as u8);
    }
}

pub fn qam_mod(bits: &[u8], m: u32) -> Result<Vec<Complex64>> {
    let qam = Qam::new(m)?;
    let n = qam.bits_per_symbol();
    if bits.len() % n != 0 {
        return Err(invalid(format!("{} bits is not a multiple of {n}", bits.len())));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(invalid("bits must be 0 or 1"));
    }
    Ok(bits.chunks(n).map(|c| qam.map_word(word_from_bits(c))).collect())
}

/// Nearest-neighbour demodulation.
pub fn qam_demod(values: &[Complex64], m: u32) -> Result<Vec<u8>> {
    let qam = Qam::new(m)?;
    let n = qam.bits_per_symbol();
    let mut out = Vec::with_capacity(values.len() * n);
    for &z in values {
        bits_from_word(qam.slice_word(z), n, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn four_qam_map() {
        let s = qam_mod(&[0, 0, 0, 1, 1, 0, 1, 1], 4).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_eq!(s[0], Complex64::new(r, r));
        assert_eq!(s[1], Complex64::new(r, -r));
        assert_eq!(s[2], Complex64::new(-r, r));
        assert_eq!(s[3], Complex64::new(-r, -r));
    }

    #[test]
    fn unit_energy_and_gray_neighbours() {
        for m in [4, 16, 64] {
            let q = Qam::new(m).unwrap();
            let pts: Vec<Complex64> = (0..m).map(|w| q.map_word(w)).collect();
            let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert!((e - 1.0).abs() < 1e-12);
            let d_min = 2.0 / (2.0 * (m as f64 - 1.0) / 3.0).sqrt();
            for a in 0..m {
                for b in 0..m {
                    if ((pts[a as usize] - pts[b as usize]).norm() - d_min).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [4, 16, 64] {
            let bits: Vec<u8> = (0..10_002).map(|_| rng.random_range(0..2)).collect();
            let n = 2 * (m as u32).trailing_zeros() as usize / 2;
            let bits = &bits[..bits.len() / n * n];
            let back = qam_demod(&qam_mod(bits, m).unwrap(), m).unwrap();
            assert_eq!(back, bits);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(qam_mod(&[0, 1], 8).is_err());
        assert!(qam_mod(&[0, 1, 1], 4).is_err());
        assert!(qam_mod(&[0, 2], 4).is_err());
    }

    #[test]
    fn gray_inverse() {
        for b in 0..64 {
            assert_eq!(gray_to_binary(binary_to_gray(b)), b);
        }
    }
}
