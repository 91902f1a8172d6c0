//! BPSK over AWGN: modulation, noise injection at a given Eb/N0, and exact
//! LLR demodulation.
//!
//! Eb/N0 accounts energy per *information* bit, so coded and uncoded curves
//! share one axis: with unit symbol energy and code rate `r`, the per-
//! dimension noise variance is `sigma2 = 1 / (2 r 10^(ebno_db/10))`.

use crate::codec::BitSeq;
use crate::error::{Error, Result};
use crate::real::Real;
use rand::Rng;
use std::ops::Deref;

/// Noise level of a BPSK/AWGN link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig<R: Real> {
    /// Energy-per-info-bit to noise-density ratio, dB.
    pub ebno_db: R,
    /// Information bits per coded bit.
    pub code_rate: R,
    /// Noise variance per real dimension, derived.
    pub sigma2: R,
}

impl<R: Real> ChannelConfig<R> {
    /// Noise level for `ebno_db` at the given code rate.
    pub fn new(ebno_db: R, code_rate: R) -> Result<Self> {
        if code_rate <= R::zero() || code_rate > R::one() {
            return Err(Error::InvalidConfig(format!(
                "code rate {code_rate} outside (0, 1]"
            )));
        }
        let ten = R::from_f64_c(10.0);
        let ebno = ten.powf(ebno_db / ten);
        let sigma2 = (R::from_f64_c(2.0) * code_rate * ebno).recip();
        Ok(ChannelConfig {
            ebno_db,
            code_rate,
            sigma2,
        })
    }

    /// Rate-1/2 configuration, the default code of this workbench.
    pub fn rate_half(ebno_db: R) -> Self {
        ChannelConfig::new(ebno_db, R::from_f64_c(0.5)).expect("rate 1/2 is valid")
    }

    /// Uncoded BPSK configuration (rate 1).
    pub fn uncoded(ebno_db: R) -> Self {
        ChannelConfig::new(ebno_db, R::one()).expect("rate 1 is valid")
    }

    /// Pin the noise variance directly; `ebno_db` is back-derived. Used for
    /// near-noiseless surrogates in tests (e.g. `sigma2 = 1e-4`).
    pub fn from_sigma2(sigma2: R, code_rate: R) -> Result<Self> {
        if sigma2 <= R::zero() {
            return Err(Error::InvalidConfig(format!("sigma2 {sigma2} must be > 0")));
        }
        let ten = R::from_f64_c(10.0);
        let ebno = (R::from_f64_c(2.0) * code_rate * sigma2).recip();
        Ok(ChannelConfig {
            ebno_db: ten * ebno.log10(),
            code_rate,
            sigma2,
        })
    }
}

/// Per-coded-bit log-likelihood ratios for one frame.
///
/// Positive LLR means coded bit 0 is the more likely hypothesis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftFrame<R>(Vec<R>);

impl<R: Real> SoftFrame<R> {
    pub fn new(llrs: Vec<R>) -> Self {
        SoftFrame(llrs)
    }

    pub fn into_vec(self) -> Vec<R> {
        self.0
    }

    /// Hard decision per value: sign maps to a bit, `>= 0` to 0.
    pub fn hard_decisions(&self) -> BitSeq {
        BitSeq::new(
            self.0
                .iter()
                .map(|&l| if l >= R::zero() { 0u8 } else { 1u8 })
                .collect(),
        )
    }
}

impl<R> Deref for SoftFrame<R> {
    type Target = [R];
    fn deref(&self) -> &[R] {
        &self.0
    }
}

impl<R: Real> FromIterator<R> for SoftFrame<R> {
    fn from_iter<T: IntoIterator<Item = R>>(iter: T) -> Self {
        SoftFrame(iter.into_iter().collect())
    }
}

/// Map bits to antipodal symbols: 0 -> +1, 1 -> -1.
pub fn bpsk_modulate<R: Real>(bits: &BitSeq) -> Vec<R> {
    bits.iter()
        .map(|&b| if b == 0 { R::one() } else { -R::one() })
        .collect()
}

/// Add white Gaussian noise with variance `cfg.sigma2` to each symbol.
pub fn add_awgn<R: Real, G: Rng + ?Sized>(symbols: &[R], cfg: &ChannelConfig<R>, rng: &mut G) -> Vec<R> {
    let sigma = cfg.sigma2.sqrt();
    symbols
        .iter()
        .map(|&s| s + sigma * R::standard_normal(rng))
        .collect()
}

/// Exact BPSK/AWGN demodulation: `llr = 2 y / sigma2`.
pub fn demod_llr<R: Real>(received: &[R], cfg: &ChannelConfig<R>) -> SoftFrame<R> {
    let two = R::from_f64_c(2.0);
    received.iter().map(|&y| two * y / cfg.sigma2).collect()
}

/// Run a bit sequence through the full chain at `cfg`'s noise level.
pub fn transmit<R: Real, G: Rng + ?Sized>(bits: &BitSeq, cfg: &ChannelConfig<R>, rng: &mut G) -> SoftFrame<R> {
    let symbols = bpsk_modulate::<R>(bits);
    let received = add_awgn(&symbols, cfg, rng);
    demod_llr(&received, cfg)
}

/// Analytic bit-error rate of uncoded BPSK: `Q(sqrt(2 * 10^(ebno_db/10)))`.
pub fn uncoded_ber_reference(ebno_db: f64) -> f64 {
    let ebno = 10f64.powf(ebno_db / 10.0);
    // Q(x) = erfc(x / sqrt(2)) / 2, so Q(sqrt(2 e)) = erfc(sqrt(e)) / 2
    0.5 * statrs::function::erf::erfc(ebno.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn bpsk_mapping() {
        assert_eq!(bpsk_modulate::<f64>(&BitSeq::from([0, 1])), vec![1.0, -1.0]);
        assert_eq!(bpsk_modulate::<f64>(&BitSeq::default()), Vec::<f64>::new());
        assert_eq!(
            bpsk_modulate::<f64>(&BitSeq::from([1, 1, 0, 0])),
            vec![-1.0, -1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn sigma2_closed_form() {
        let cfg = ChannelConfig::<f64>::rate_half(3.0);
        let expected = 1.0 / (2.0 * 0.5 * 10f64.powf(0.3));
        assert!((cfg.sigma2 - expected).abs() < 1e-15);
        assert!((expected - 0.5012).abs() < 1e-4);
    }

    #[test]
    fn awgn_is_deterministic_per_seed() {
        let cfg = ChannelConfig::<f64>::rate_half(2.0);
        let symbols = vec![1.0, -1.0, 1.0, 1.0];
        let a = add_awgn(&symbols, &cfg, &mut seed::stream(5, "awgn", 0));
        let b = add_awgn(&symbols, &cfg, &mut seed::stream(5, "awgn", 0));
        assert_eq!(a, b);
    }

    #[test]
    fn awgn_noise_is_bounded_at_tiny_sigma() {
        let cfg = ChannelConfig::<f64>::from_sigma2(1e-8, 0.5).unwrap();
        let symbols = vec![1.0; 1000];
        let mut rng = seed::stream(5, "awgn", 1);
        let received = add_awgn(&symbols, &cfg, &mut rng);
        let six_sigma = 6.0 * cfg.sigma2.sqrt();
        assert!(received.iter().all(|&y| (y - 1.0).abs() < six_sigma));
    }

    #[test]
    fn awgn_sample_variance_matches_sigma2() {
        let cfg = ChannelConfig::<f64>::rate_half(3.0);
        let n = 1_000_000usize;
        let symbols = vec![1.0f64; n];
        let mut rng = seed::stream(5, "awgn", 2);
        let received = add_awgn(&symbols, &cfg, &mut rng);
        let var: f64 = received.iter().map(|&y| (y - 1.0) * (y - 1.0)).sum::<f64>() / n as f64;
        assert!(
            (var - cfg.sigma2).abs() / cfg.sigma2 < 0.01,
            "sample variance {var} vs sigma2 {}",
            cfg.sigma2
        );
    }

    #[test]
    fn llr_formula() {
        let cfg = ChannelConfig::<f64>::from_sigma2(0.5, 0.5).unwrap();
        let llrs = demod_llr(&[0.0, 1.0], &cfg);
        assert_eq!(llrs[0], 0.0);
        assert_eq!(llrs[1], 4.0);
    }

    #[test]
    fn noiseless_hard_decisions_recover_bits() {
        let cfg = ChannelConfig::<f64>::rate_half(4.0);
        let bits = BitSeq::from([0, 1, 1, 0, 1]);
        let symbols = bpsk_modulate::<f64>(&bits);
        let llrs = demod_llr(&symbols, &cfg);
        assert_eq!(llrs.hard_decisions(), bits);
    }

    #[test]
    fn chain_preserves_length_f32_and_f64() {
        let bits = BitSeq::from([0, 1, 0, 0, 1, 1]);
        let cfg64 = ChannelConfig::<f64>::rate_half(1.0);
        let mut rng = seed::stream(5, "chain", 0);
        assert_eq!(transmit(&bits, &cfg64, &mut rng).len(), bits.len());

        let cfg32 = ChannelConfig::<f32>::rate_half(1.0);
        assert_eq!(transmit(&bits, &cfg32, &mut rng).len(), bits.len());
    }

    #[test]
    fn q_function_reference_values() {
        assert!((uncoded_ber_reference(0.0) - 0.0786).abs() < 5e-4);
        // monotone decreasing toward 0
        let mut prev = uncoded_ber_reference(-10.0);
        for db in -9..=14 {
            let cur = uncoded_ber_reference(db as f64);
            assert!(cur < prev);
            prev = cur;
        }
        assert!(uncoded_ber_reference(14.0) < 1e-11);
        // -inf dB limit is 0.5
        assert!((uncoded_ber_reference(-80.0) - 0.5).abs() < 1e-4);
    }
}
