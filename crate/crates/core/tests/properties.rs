use amc_precoding::channel::sample_channel;
use amc_precoding::circuits::sample_hold;
use amc_precoding::linksim::wilson_interval;
use amc_precoding::modem::qam16_modulate;
use amc_precoding::numerics::ExpandedReal;
use amc_precoding::rng::{stream, Purpose, Rng};
use amc_precoding::{PrecoderRegistry, PrecoderSettings};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_scheme_emits_a_unit_norm_vector(seed in any::<u64>(), k in 1usize..6, extra in 8usize..40) {
        let m = k + extra;
        let h = sample_channel(k, m, &mut stream(seed, Purpose::Channel, 0)).unwrap();
        let mut rng = stream(seed, Purpose::Bits, 0);
        let bits: Vec<u8> = (0..4 * k).map(|_| rng.random_range(0..2u8)).collect();
        let s = qam16_modulate(&bits, &Default::default()).unwrap();
        let reg = PrecoderRegistry::with_defaults();
        let settings = PrecoderSettings::default();
        for name in ["digital", "amc"] {
            let p = reg.build(name, &settings).unwrap();
            let r = p.prepare(&h, &mut stream(seed, Purpose::ProgramInv, 0)).unwrap().precode(&s).unwrap();
            let norm: f64 = r.x.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(r.alpha > 0.0 && r.alpha.is_finite());
        }
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let errors = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson_interval(errors, trials);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15);
        prop_assert!(p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn droop_never_grows_or_flips_a_held_voltage(
        half in prop::collection::vec(-0.6f64..0.6, 1..8),
        hold in 0.0f64..50.0,
        droop in 0.0f64..0.05,
    ) {
        let mut v = half.clone();
        v.extend(half.iter().map(|x| -x));
        let held = sample_hold(&ExpandedReal::vector(v.clone()).unwrap(), hold, droop).unwrap();
        for (a, b) in v.iter().zip(held.as_slice()) {
            prop_assert!(b.abs() <= a.abs());
            prop_assert!(a * b >= 0.0);
            prop_assert!((a.abs() - b.abs() - (droop * hold).min(a.abs())).abs() < 1e-12);
        }
    }
}
