//! Salt-and-pepper corruption of 2-byte unit sequences at a configured unit
//! error probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SALT_UNIT: u16 = 0xFFFF;
pub const PEPPER_UNIT: u16 = 0x0000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Unit error probability, in [0, 1].
    pub p_u: f64,
    pub salt_value: u16,
    pub pepper_value: u16,
    /// Probability a corrupted unit becomes salt rather than pepper.
    pub salt_ratio: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(p_u: f64, seed: u64) -> NoiseSpec {
        NoiseSpec {
            p_u,
            salt_value: SALT_UNIT,
            pepper_value: PEPPER_UNIT,
            salt_ratio: 0.5,
            seed,
        }
    }

    fn validate(&self) {
        assert!((0.0..=1.0).contains(&self.p_u), "p_u out of [0,1]");
        assert!((0.0..=1.0).contains(&self.salt_ratio), "salt_ratio out of [0,1]");
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReport {
    /// N: number of units in the sample.
    pub n_units: usize,
    pub n_corrupted: usize,
    /// The prior p_u, reported as a rate.
    pub uer_estimate: f64,
    /// Expected corrupted-unit count p_u * N.
    pub expected_corrupted: f64,
    /// Realized corruption fraction n_corrupted / N (0 when N = 0).
    pub uer_actual: f64,
}

/// Corrupt each unit independently with probability `p_u`; corrupted units
/// become salt with probability `salt_ratio`, pepper otherwise.
/// Deterministic under a fixed spec.
pub fn inject(units: &[u16], spec: &NoiseSpec) -> (Vec<u16>, NoiseReport) {
    spec.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(units.len());
    let mut n_corrupted = 0usize;
    for &u in units {
        if rng.gen_bool(spec.p_u) {
            n_corrupted += 1;
            out.push(if rng.gen_bool(spec.salt_ratio) { spec.salt_value } else { spec.pepper_value });
        } else {
            out.push(u);
        }
    }
    let n_units = units.len();
    let report = NoiseReport {
        n_units,
        n_corrupted,
        uer_estimate: spec.p_u,
        expected_corrupted: spec.p_u * n_units as f64,
        uer_actual: if n_units == 0 { 0.0 } else { n_corrupted as f64 / n_units as f64 },
    };
    (out, report)
}

/// Per-sample derived seed so parallel injection stays deterministic under
/// any scheduling.
pub fn sample_seed(base_seed: u64, sample_id: &str) -> u64 {
    // FNV-1a of the id, xored into the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    base_seed ^ h
}

/// The default sweep grid used throughout the evaluation harness.
pub const DEFAULT_P_LIST: [f64; 5] = [0.01, 0.05, 0.10, 0.15, 0.20];

/// One corrupted copy of a unit-sequence corpus per probability in `p_list`,
/// with an aggregate report each.
pub fn sweep(
    samples: &[(String, Vec<u16>)],
    p_list: &[f64],
    seed: u64,
) -> Vec<(f64, Vec<(String, Vec<u16>)>, NoiseReport)> {
    p_list
        .iter()
        .map(|&p| {
            let mut corrupted = Vec::with_capacity(samples.len());
            let mut n_units = 0usize;
            let mut n_corrupted = 0usize;
            for (id, units) in samples {
                let spec = NoiseSpec { seed: sample_seed(seed, id), ..NoiseSpec::new(p, seed) };
                let (noisy, report) = inject(units, &spec);
                n_units += report.n_units;
                n_corrupted += report.n_corrupted;
                corrupted.push((id.clone(), noisy));
            }
            let aggregate = NoiseReport {
                n_units,
                n_corrupted,
                uer_estimate: p,
                expected_corrupted: p * n_units as f64,
                uer_actual: if n_units == 0 { 0.0 } else { n_corrupted as f64 / n_units as f64 },
            };
            (p, corrupted, aggregate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(n: usize) -> Vec<u16> {
        (0..n).map(|i| (i % 0xfffe + 1) as u16).collect()
    }

    #[test]
    fn p_zero_is_identity() {
        let input = units(10_000);
        let (out, report) = inject(&input, &NoiseSpec::new(0.0, 9));
        assert_eq!(out, input);
        assert_eq!(report.n_corrupted, 0);
        assert_eq!(report.uer_actual, 0.0);
    }

    #[test]
    fn p_one_output_alphabet_is_salt_pepper() {
        let input = units(10_000);
        let (out, report) = inject(&input, &NoiseSpec::new(1.0, 9));
        assert!(out.iter().all(|&u| u == SALT_UNIT || u == PEPPER_UNIT));
        assert_eq!(report.n_corrupted, 10_000);
    }

    #[test]
    fn binomial_concentration_at_p_01() {
        // sigma = sqrt(N p (1-p)) = sqrt(10000 * 0.09) = 30; assert 3 sigma.
        let input = units(10_000);
        let (_, report) = inject(&input, &NoiseSpec::new(0.1, 1234));
        let diff = (report.n_corrupted as f64 - 1000.0).abs();
        assert!(diff <= 90.0, "n_corrupted={} outside 1000 +/- 90", report.n_corrupted);
    }

    #[test]
    fn seed_determinism() {
        let input = units(5_000);
        let spec = NoiseSpec::new(0.5, 77);
        assert_eq!(inject(&input, &spec).0, inject(&input, &spec).0);
        let other = NoiseSpec::new(0.5, 78);
        assert_ne!(inject(&input, &spec).0, inject(&input, &other).0);
    }

    #[test]
    fn empty_input_reports_zero() {
        let (out, report) = inject(&[], &NoiseSpec::new(0.3, 1));
        assert!(out.is_empty());
        assert_eq!(report.n_units, 0);
        assert_eq!(report.uer_actual, 0.0);
    }

    #[test]
    fn sweep_means_nondecreasing() {
        let samples: Vec<(String, Vec<u16>)> =
            (0..50).map(|i| (format!("s{i}"), units(2_000))).collect();
        let result = sweep(&samples, &DEFAULT_P_LIST, 5);
        assert_eq!(result.len(), 5);
        for w in result.windows(2) {
            assert!(w[1].2.uer_actual >= w[0].2.uer_actual);
        }
    }

    #[test]
    fn empty_p_list_gives_empty_sweep() {
        assert!(sweep(&[("a".into(), units(4))], &[], 1).is_empty());
    }
}
