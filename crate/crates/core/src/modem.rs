//! 16-QAM mapping with a per-axis Gray code.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Gray table per axis, indexed by the 2-bit value `b0 << 1 | b1`.
const GRAY_AMPLITUDE: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    beta: f64,
}

impl Default for ModemConfig {
    /// Unit average symbol energy.
    fn default() -> Self {
        Self {
            beta: 1.0 / 10f64.sqrt(),
        }
    }
}

impl ModemConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("modem beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Mean energy over the 16 constellation points, `10 β²`.
    pub fn mean_energy(&self) -> f64 {
        10.0 * self.beta * self.beta
    }
}

fn amplitude(b0: u8, b1: u8) -> f64 {
    GRAY_AMPLITUDE[((b0 << 1) | b1) as usize]
}

/// Decides one axis. Thresholds sit at `-2, 0, +2` (in units of β); a value
/// exactly on a threshold goes to the amplitude of smaller magnitude, and
/// the origin goes to `+1`.
fn decide_axis(x: f64) -> (u8, u8) {
    if x < -2.0 {
        (0, 0)
    } else if x < 0.0 {
        (0, 1)
    } else if x <= 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Maps `4K` bits (0/1 values) onto `K` symbols `β(r + j t)`.
pub fn qam16_modulate(bits: &[u8], cfg: &ModemConfig) -> Result<ComplexMatrix> {
    if bits.len() % 4 != 0 || bits.is_empty() {
        return Err(Error::invalid(format!(
            "16-QAM needs a positive multiple of 4 bits, got {}",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("bits must be 0 or 1"));
    }
    let symbols = bits
        .chunks_exact(4)
        .map(|q| Complex64::new(amplitude(q[0], q[1]), amplitude(q[2], q[3])) * cfg.beta)
        .collect();
    ComplexMatrix::column(symbols)
}

/// Nearest-point hard decision, inverted through the Gray table.
pub fn qam16_demodulate(y: &ComplexMatrix, cfg: &ModemConfig) -> Result<Vec<u8>> {
    if y.cols() != 1 {
        return Err(Error::invalid("demodulator expects a column vector"));
    }
    if !y.is_finite() {
        return Err(Error::invalid("received symbols must be finite"));
    }
    let mut bits = Vec::with_capacity(4 * y.rows());
    for z in y.as_slice() {
        let (a, b) = decide_axis(z.re / cfg.beta);
        let (c, d) = decide_axis(z.im / cfg.beta);
        bits.extend([a, b, c, d]);
    }
    Ok(bits)
}

/// Fraction of positions where the two sequences differ.
pub fn bit_error_rate(tx: &[u8], rx: &[u8]) -> Result<f64> {
    Ok(bit_errors(tx, rx)? as f64 / tx.len() as f64)
}

pub fn bit_errors(tx: &[u8], rx: &[u8]) -> Result<u64> {
    if tx.len() != rx.len() || tx.is_empty() {
        return Err(Error::invalid(format!(
            "bit sequences must be non-empty and equal length ({} vs {})",
            tx.len(),
            rx.len()
        )));
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nibble(v: u8) -> Vec<u8> {
        (0..4).rev().map(|i| (v >> i) & 1).collect()
    }

    #[test]
    fn modulate_examples() {
        let cfg = ModemConfig::default();
        let s = 10f64.sqrt();
        let z = qam16_modulate(&[0, 0, 0, 0], &cfg).unwrap()[(0, 0)];
        assert!((z - Complex64::new(-3.0, -3.0) / s).norm() < 1e-15);
        let z = qam16_modulate(&[1, 1, 1, 0], &cfg).unwrap()[(0, 0)];
        assert!((z - Complex64::new(1.0, 3.0) / s).norm() < 1e-15);
    }

    #[test]
    fn unit_average_energy() {
        let cfg = ModemConfig::default();
        let bits: Vec<u8> = (0..16).flat_map(nibble).collect();
        let s = qam16_modulate(&bits, &cfg).unwrap();
        let mean = s.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((cfg.mean_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_lengths_and_values() {
        let cfg = ModemConfig::default();
        assert!(qam16_modulate(&[0, 1, 1], &cfg).is_err());
        assert!(qam16_modulate(&[0, 1, 2, 0], &cfg).is_err());
        assert!(ModemConfig::new(0.0).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        let cfg = ModemConfig::default();
        for v in 0..16u8 {
            let bits = nibble(v);
            let s = qam16_modulate(&bits, &cfg).unwrap();
            assert_eq!(qam16_demodulate(&s, &cfg).unwrap(), bits);
        }
    }

    #[test]
    fn perturbation_below_half_distance_is_harmless() {
        let cfg = ModemConfig::default();
        let b = cfg.beta();
        for v in 0..16u8 {
            let bits = nibble(v);
            let s = qam16_modulate(&bits, &cfg).unwrap()[(0, 0)];
            for (dr, di) in [(0.9, 0.9), (-0.9, 0.9), (0.9, -0.9), (-0.9, -0.9)] {
                let y = ComplexMatrix::column(vec![s + Complex64::new(dr * b, di * b)]).unwrap();
                assert_eq!(qam16_demodulate(&y, &cfg).unwrap(), bits);
            }
        }
    }

    #[test]
    fn ties_go_to_smaller_amplitude() {
        let cfg = ModemConfig::default();
        let b = cfg.beta();
        let decide = |re: f64| {
            let y = ComplexMatrix::column(vec![Complex64::new(re, 3.0 * b)]).unwrap();
            qam16_demodulate(&y, &cfg).unwrap()[..2].to_vec()
        };
        // -2β sits between -3 and -1: picks -1 (01); +2β picks +1 (11).
        assert_eq!(decide(-2.0 * b), vec![0, 1]);
        assert_eq!(decide(2.0 * b), vec![1, 1]);
        assert_eq!(decide(0.0), vec![1, 1]);
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let order = [-3.0, -1.0, 1.0, 3.0];
        let code = |a: f64| (0..4u8).find(|&i| GRAY_AMPLITUDE[i as usize] == a).unwrap();
        for w in order.windows(2) {
            assert_eq!((code(w[0]) ^ code(w[1])).count_ones(), 1);
        }
    }

    #[test]
    fn ber_examples() {
        let a = vec![0u8; 1000];
        assert_eq!(bit_error_rate(&a, &a).unwrap(), 0.0);
        let ones = vec![1u8; 1000];
        assert_eq!(bit_error_rate(&a, &ones).unwrap(), 1.0);
        let mut one_flip = a.clone();
        one_flip[500] = 1;
        assert!((bit_error_rate(&a, &one_flip).unwrap() - 0.001).abs() < 1e-15);
        assert!(bit_error_rate(&a, &a[..10]).is_err());
    }

    proptest! {
        #[test]
        fn decisions_respect_thresholds(v in 0u8..16, dr in -0.999f64..0.999, di in -0.999f64..0.999) {
            let cfg = ModemConfig::default();
            let bits = nibble(v);
            let s = qam16_modulate(&bits, &cfg).unwrap()[(0, 0)];
            let y = ComplexMatrix::column(vec![s + Complex64::new(dr, di) * cfg.beta()]).unwrap();
            prop_assert_eq!(qam16_demodulate(&y, &cfg).unwrap(), bits);
        }
    }
}
