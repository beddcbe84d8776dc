//! Rayleigh downlink channel: `y = √ρ_T · H x + n`.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::rng::RngStream;

/// Link parameters for one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub users: usize,
    pub antennas: usize,
    pub rho_t: f64,
    pub snr_db: f64,
    sigma2: f64,
}

impl LinkConfig {
    /// Derives the noise variance from the SNR. `snr_db = +∞` gives a
    /// noiseless link.
    pub fn new(users: usize, antennas: usize, rho_t: f64, snr_db: f64) -> Result<Self> {
        if users == 0 || antennas < users {
            return Err(Error::invalid(format!(
                "need M >= K >= 1, got K = {users}, M = {antennas}"
            )));
        }
        if !(rho_t > 0.0 && rho_t.is_finite()) {
            return Err(Error::invalid(format!("rho_T must be positive, got {rho_t}")));
        }
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("SNR must be a number, got {snr_db}")));
        }
        let sigma2 = noise_sigma2(snr_db, antennas, rho_t);
        Ok(Self {
            users,
            antennas,
            rho_t,
            snr_db,
            sigma2,
        })
    }

    /// Same link with the noise switched off.
    pub fn noiseless(users: usize, antennas: usize, rho_t: f64) -> Result<Self> {
        Self::new(users, antennas, rho_t, f64::INFINITY)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// True when the stored variance agrees with the SNR formula.
    pub fn is_consistent(&self) -> bool {
        let expected = noise_sigma2(self.snr_db, self.antennas, self.rho_t);
        (self.sigma2 - expected).abs() <= 1e-12 * expected.max(f64::MIN_POSITIVE)
    }
}

/// `σ² = M · ρ_T · 10^(−SNR/10)`, with the antenna count inside the SNR
/// definition.
pub fn noise_sigma2(snr_db: f64, antennas: usize, rho_t: f64) -> f64 {
    antennas as f64 * rho_t * 10f64.powf(-snr_db / 10.0)
}

/// One circularly symmetric complex Gaussian with total variance `var`.
fn cn(rng: &mut RngStream, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// i.i.d. `CN(0, 1)` channel gains, row-major.
pub fn sample_channel(users: usize, antennas: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if users == 0 || antennas == 0 {
        return Err(Error::invalid("channel dimensions must be positive"));
    }
    let data = (0..users * antennas).map(|_| cn(rng, 1.0)).collect();
    ComplexMatrix::from_vec(users, antennas, data)
}

/// `K` i.i.d. `CN(0, σ²)` noise samples.
pub fn sample_noise(users: usize, sigma2: f64, rng: &mut RngStream) -> Result<ComplexMatrix> {
    let data = (0..users)
        .map(|_| {
            if sigma2 > 0.0 {
                cn(rng, sigma2)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    ComplexMatrix::column(data)
}

/// `√ρ_T · H x + n` for a given noise vector.
pub fn transmit_with_noise(
    h: &ComplexMatrix,
    x: &ComplexMatrix,
    rho_t: f64,
    noise: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if x.cols() != 1 || x.rows() != h.cols() {
        return Err(Error::invalid(format!(
            "transmit vector {}x{} does not match a {}x{} channel",
            x.rows(),
            x.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if noise.rows() != h.rows() || noise.cols() != 1 {
        return Err(Error::invalid("noise vector length must equal the user count"));
    }
    h.matmul(x)?.scale(rho_t.sqrt()).add(noise)
}

/// Transmits `x` over `H` with fresh noise drawn from `rng`.
pub fn transmit(h: &ComplexMatrix, x: &ComplexMatrix, cfg: &LinkConfig, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if h.rows() != cfg.users || h.cols() != cfg.antennas {
        return Err(Error::invalid("channel shape disagrees with the link config"));
    }
    let noise = sample_noise(h.rows(), cfg.sigma2, rng)?;
    transmit_with_noise(h, x, cfg.rho_t, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn sigma2_examples() {
        assert_eq!(noise_sigma2(0.0, 1, 1.0), 1.0);
        assert!((noise_sigma2(30.0, 128, 1.0) - 0.128).abs() < 1e-15);
        assert!((noise_sigma2(40.0, 128, 1.0) - 0.0128).abs() < 1e-15);
        let link = LinkConfig::new(16, 128, 1.0, 30.0).unwrap();
        assert!(link.is_consistent());
        assert_eq!(LinkConfig::noiseless(16, 128, 1.0).unwrap().sigma2(), 0.0);
    }

    #[test]
    fn link_validation() {
        assert!(LinkConfig::new(0, 4, 1.0, 10.0).is_err());
        assert!(LinkConfig::new(5, 4, 1.0, 10.0).is_err());
        assert!(LinkConfig::new(2, 4, 0.0, 10.0).is_err());
        assert!(LinkConfig::new(2, 4, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn channel_shape_and_determinism() {
        let a = sample_channel(16, 128, &mut stream(1, Purpose::Channel, 0)).unwrap();
        let b = sample_channel(16, 128, &mut stream(1, Purpose::Channel, 0)).unwrap();
        assert_eq!((a.rows(), a.cols()), (16, 128));
        assert_eq!(a, b);
    }

    #[test]
    fn channel_unit_variance() {
        let h = sample_channel(1, 100_000, &mut stream(5, Purpose::Channel, 0)).unwrap();
        let mean = h.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn noiseless_transmission_is_exact() {
        let mut rng = stream(2, Purpose::Channel, 0);
        let h = sample_channel(3, 6, &mut rng).unwrap();
        let x = sample_channel(6, 1, &mut rng).unwrap();
        let link = LinkConfig::noiseless(3, 6, 1.0).unwrap();
        let y = transmit(&h, &x, &link, &mut stream(2, Purpose::Noise, 0)).unwrap();
        assert_eq!(y, h.matmul(&x).unwrap());
    }

    #[test]
    fn linear_at_fixed_noise() {
        let mut rng = stream(3, Purpose::Channel, 0);
        let h = sample_channel(3, 6, &mut rng).unwrap();
        let x1 = sample_channel(6, 1, &mut rng).unwrap();
        let x2 = sample_channel(6, 1, &mut rng).unwrap();
        let n = sample_noise(3, 0.3, &mut stream(3, Purpose::Noise, 0)).unwrap();
        let rho = 2.0;
        let y12 = transmit_with_noise(&h, &x1.add(&x2).unwrap(), rho, &n).unwrap();
        let y1 = transmit_with_noise(&h, &x1, rho, &n).unwrap();
        let y2 = transmit_with_noise(&h, &x2, rho, &n).unwrap();
        // Remove the shared noise once from each transmission.
        let resid = y12
            .sub(&n)
            .unwrap()
            .sub(&y1.sub(&n).unwrap())
            .unwrap()
            .sub(&y2.sub(&n).unwrap())
            .unwrap();
        assert!(resid.max_abs() < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let sigma2 = 0.128;
        let n = sample_noise(100_000, sigma2, &mut stream(9, Purpose::Noise, 0)).unwrap();
        let count = n.rows() as f64;
        let var = n.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / count;
        assert!((0.98 * sigma2..=1.02 * sigma2).contains(&var), "var {var}");

        let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
        for z in n.as_slice() {
            rr += z.re * z.re;
            ii += z.im * z.im;
            ri += z.re * z.im;
        }
        let half = sigma2 / 2.0;
        assert!(((rr / count) - half).abs() < 0.02 * sigma2);
        assert!(((ii / count) - half).abs() < 0.02 * sigma2);
        assert!((ri / count).abs() < 0.02 * sigma2);
    }

    #[test]
    fn transmit_rejects_bad_shapes() {
        let h = ComplexMatrix::zeros(2, 4);
        let x = ComplexMatrix::zeros(3, 1);
        let link = LinkConfig::new(2, 4, 1.0, 10.0).unwrap();
        assert!(transmit(&h, &x, &link, &mut stream(0, Purpose::Noise, 0)).is_err());
    }
}
