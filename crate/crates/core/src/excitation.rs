//! Periodic excitation design: PRBS and multisine generation, multi-input
//! scheduling, and the per-frequency excitation certificate.
//!
//! The certificate computes, for every frequency index on the period grid,
//! the smallest singular value of the stacked one-period DFTs. That number is
//! exactly what the downstream error bounds divide by, so it is taken as the
//! measured value rather than a designed lower bound.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{lit, Scalar};
use crate::seed::derive_seed;

/// Primitive feedback polynomials for maximal-length shift registers, order
/// 2 through 16. `LFSR_TAPS[d - 2]` lists the exponents below `d` with a
/// unit coefficient in `x^d + ... + 1` (the constant term 0 is listed); the
/// register recurrence is `a_{t+d} = xor of a_{t+e}` over these exponents.
const LFSR_TAPS: [&[u32]; 15] = [
    &[1, 0],
    &[1, 0],
    &[1, 0],
    &[2, 0],
    &[1, 0],
    &[1, 0],
    &[4, 3, 2, 0],
    &[4, 0],
    &[3, 0],
    &[2, 0],
    &[6, 4, 1, 0],
    &[4, 3, 1, 0],
    &[10, 6, 1, 0],
    &[1, 0],
    &[12, 3, 1, 0],
];

/// Relative threshold below which a singular value counts as "not exciting".
const SIGMA_ZERO_REL: f64 = 1e-12;

/// A periodic excitation plan: one period per experiment, each sample a
/// vector over the input channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicExcitation<T> {
    period: usize,
    /// `experiments[i][t][channel]`
    experiments: Vec<Vec<Vec<T>>>,
    amplitude_bound: T,
    sigma_u: Option<Vec<T>>,
}

impl<T: Scalar> PeriodicExcitation<T> {
    /// Wrap caller-supplied period signals.
    pub fn custom(experiments: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let period = experiments
            .first()
            .map(|e| e.len())
            .ok_or_else(|| Error::DimensionMismatch {
                context: "excitation needs at least one experiment".into(),
            })?;
        if period == 0 {
            return Err(Error::LengthMismatch {
                context: "excitation period must be positive".into(),
            });
        }
        let channels = experiments[0].first().map(|s| s.len()).unwrap_or(0);
        for e in &experiments {
            if e.len() != period {
                return Err(Error::LengthMismatch {
                    context: "all experiments must share the same period".into(),
                });
            }
            if e.iter().any(|s| s.len() != channels) {
                return Err(Error::LengthMismatch {
                    context: "all samples must have the same channel count".into(),
                });
            }
        }
        if channels == 0 {
            return Err(Error::DimensionMismatch {
                context: "excitation samples need at least one channel".into(),
            });
        }
        let amplitude_bound = experiments
            .iter()
            .flat_map(|e| e.iter())
            .map(|s| {
                s.iter()
                    .map(|&v| v * v)
                    .fold(T::zero(), |a, b| a + b)
                    .sqrt()
            })
            .fold(T::zero(), |a, b| a.max(b));
        Ok(Self {
            period,
            experiments,
            amplitude_bound,
            sigma_u: None,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn experiment_count(&self) -> usize {
        self.experiments.len()
    }

    pub fn input_dim(&self) -> usize {
        self.experiments[0][0].len()
    }

    pub fn amplitude_bound(&self) -> T {
        self.amplitude_bound
    }

    pub fn experiment(&self, i: usize) -> &[Vec<T>] {
        &self.experiments[i]
    }

    /// Per-frequency excitation levels; `None` until certified.
    pub fn sigma_u(&self) -> Option<&[T]> {
        self.sigma_u.as_deref()
    }

    pub fn sigma_u_at(&self, ell: usize) -> Option<T> {
        self.sigma_u.as_ref().map(|s| s[ell])
    }

    /// Sample of experiment `i` at (possibly negative) time `t`, extending
    /// the stored period over all of `Z`.
    pub fn sample_at(&self, i: usize, t: i64) -> Vec<T> {
        let m = self.period as i64;
        let idx = ((t % m) + m) % m;
        self.experiments[i][idx as usize].clone()
    }

    /// Stacked one-period DFT at frequency index `ell`: column `i` holds the
    /// DFT of experiment `i`'s period.
    pub fn stacked_period_dft(&self, ell: usize) -> Result<CMatrix<T>> {
        if ell >= self.period {
            return Err(Error::IndexOutOfRange {
                index: ell,
                len: self.period,
            });
        }
        let m = self.period;
        let channels = self.input_dim();
        let scale = T::one() / T::from_usize_lossy(m).sqrt();
        let mut out = CMatrix::zeros(channels, self.experiment_count());
        for (i, experiment) in self.experiments.iter().enumerate() {
            let mut acc = vec![Complex::new(T::zero(), T::zero()); channels];
            for (t, sample) in experiment.iter().enumerate() {
                let angle = -T::TAU() * T::from_usize_lossy((ell * t) % m) / T::from_usize_lossy(m);
                let w = Complex::from_polar(T::one(), angle);
                for (ch, &v) in sample.iter().enumerate() {
                    acc[ch] = acc[ch] + w * Complex::new(v, T::zero());
                }
            }
            for (ch, v) in acc.iter().enumerate() {
                out.set(ch, i, *v * Complex::new(scale, T::zero()));
            }
        }
        Ok(out)
    }

    /// Check that all listed frequency indices are excited.
    pub fn require_exciting(&self, required: &[usize]) -> Result<()> {
        let sigma = self.sigma_u.as_ref().ok_or_else(|| Error::Config {
            context: "excitation must be certified before requiring frequencies".into(),
        })?;
        let floor = self.amplitude_bound
            * T::from_usize_lossy(self.period).sqrt()
            * lit(SIGMA_ZERO_REL);
        for &ell in required {
            if ell >= self.period {
                return Err(Error::IndexOutOfRange {
                    index: ell,
                    len: self.period,
                });
            }
            if sigma[ell] <= floor {
                return Err(Error::NotExciting { index: ell });
            }
        }
        Ok(())
    }
}

/// One period of a maximal-length PRBS of order `order` (period `2^order - 1`)
/// with values `offset ± amplitude`. The register starts from the all-ones
/// state so designs are reproducible.
pub fn prbs<T: Scalar>(order: u32, amplitude: T, offset: T) -> Result<Vec<T>> {
    if !(2..=16).contains(&order) {
        return Err(Error::UnsupportedOrder { order });
    }
    let taps = LFSR_TAPS[(order - 2) as usize];
    let period = (1usize << order) - 1;
    let mut state: u32 = (1 << order) - 1;
    let mut signal = Vec::with_capacity(period);
    for _ in 0..period {
        let bit = state & 1;
        signal.push(if bit == 1 { offset + amplitude } else { offset - amplitude });
        let feedback = taps
            .iter()
            .fold(0u32, |acc, &e| acc ^ ((state >> e) & 1));
        state = (state >> 1) | (feedback << (order - 1));
    }
    Ok(signal)
}

/// A single multisine component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultisineLine<T> {
    pub frequency: usize,
    pub amplitude: T,
    pub phase: T,
}

/// One period of `sum_lines a * cos(2 pi l t / m + phase)`. Real by
/// construction; frequency indices must be distinct and below `m`.
pub fn multisine<T: Scalar>(m: usize, lines: &[MultisineLine<T>]) -> Result<Vec<T>> {
    if m == 0 {
        return Err(Error::LengthMismatch {
            context: "multisine period must be positive".into(),
        });
    }
    let mut seen = vec![false; m];
    for line in lines {
        if line.frequency >= m {
            return Err(Error::IndexOutOfRange {
                index: line.frequency,
                len: m,
            });
        }
        if seen[line.frequency] {
            return Err(Error::DuplicateLine {
                index: line.frequency,
            });
        }
        seen[line.frequency] = true;
    }
    let mut signal = vec![T::zero(); m];
    for line in lines {
        for (t, v) in signal.iter_mut().enumerate() {
            let angle =
                T::TAU() * T::from_usize_lossy(line.frequency * t % m) / T::from_usize_lossy(m)
                    + line.phase;
            *v = *v + line.amplitude * angle.cos();
        }
    }
    Ok(signal)
}

/// Multisine exciting every frequency of the period grid at the same level:
/// one cosine per distinct frequency pair, random phases, and half amplitude
/// on the self-conjugate lines (DC, and Nyquist for even periods).
pub fn flat_multisine<T: Scalar>(m: usize, amplitude: T, phase_seed: u64) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(phase_seed, &[0x6D73]));
    let mut lines = Vec::new();
    for ell in 0..=(m / 2) {
        let self_conjugate = ell == 0 || (m % 2 == 0 && ell == m / 2);
        let amp = if self_conjugate {
            amplitude * lit(0.5)
        } else {
            amplitude
        };
        let phase = if self_conjugate {
            T::zero()
        } else {
            T::from_f64_lossy(rng.random::<f64>()) * T::TAU()
        };
        lines.push(MultisineLine {
            frequency: ell,
            amplitude: amp,
            phase,
        });
    }
    multisine(m, &lines)
}

/// Schedule a single-channel base period over `d_u` experiments, exciting one
/// input at a time: experiment `i` drives channel `i` with the base period
/// cyclically delayed by `i * floor(M / d_u)` samples, other channels zero.
pub fn shift_schedule<T: Scalar>(base: &[T], d_u: usize) -> Result<PeriodicExcitation<T>> {
    let m = base.len();
    if d_u == 0 || d_u > m {
        return Err(Error::TooManyExperiments {
            requested: d_u,
            period: m,
        });
    }
    let stride = m / d_u;
    let experiments: Vec<Vec<Vec<T>>> = (0..d_u)
        .map(|i| {
            let delay = (i * stride) % m;
            (0..m)
                .map(|t| {
                    let source = (t + m - delay) % m;
                    (0..d_u)
                        .map(|ch| if ch == i { base[source] } else { T::zero() })
                        .collect()
                })
                .collect()
        })
        .collect();
    PeriodicExcitation::custom(experiments)
}

/// Certify the excitation: fill `sigma_u` with the smallest singular value of
/// the stacked one-period DFTs at every frequency index, and validate the
/// energy consistency `sum_l sigma_l^2 <= M D_u^2`.
pub fn certify<T: Scalar>(excitation: PeriodicExcitation<T>) -> Result<PeriodicExcitation<T>> {
    if excitation.input_dim() != excitation.experiment_count() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "certification needs square stacked DFTs: {} channels vs {} experiments",
                excitation.input_dim(),
                excitation.experiment_count()
            ),
        });
    }
    let m = excitation.period();
    let mut sigma = Vec::with_capacity(m);
    for ell in 0..m {
        let stacked = excitation.stacked_period_dft(ell)?;
        sigma.push(stacked.smallest_singular_value());
    }
    let energy: T = sigma.iter().map(|&s| s * s).fold(T::zero(), |a, b| a + b);
    let budget = T::from_usize_lossy(m)
        * excitation.amplitude_bound()
        * excitation.amplitude_bound();
    if energy > budget * (T::one() + lit(1e-9)) {
        return Err(Error::Config {
            context: format!(
                "excitation certificate inconsistent: sum sigma^2 = {} exceeds M D_u^2 = {}",
                energy.as_f64(),
                budget.as_f64()
            ),
        });
    }
    Ok(PeriodicExcitation {
        sigma_u: Some(sigma),
        ..excitation
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prbs_periods_are_maximal() {
        for order in 2..=16u32 {
            let period = (1usize << order) - 1;
            // Cycle detection oracle: replay the register and require the
            // state to first return to the seed after exactly `period` steps.
            let taps = LFSR_TAPS[(order - 2) as usize];
            let seed: u32 = (1 << order) - 1;
            let mut state = seed;
            let mut steps = 0usize;
            loop {
                let feedback = taps
                    .iter()
                    .fold(0u32, |acc, &e| acc ^ ((state >> e) & 1));
                state = (state >> 1) | (feedback << (order - 1));
                steps += 1;
                if state == seed || steps > period {
                    break;
                }
            }
            assert_eq!(steps, period, "order {order} is not maximal length");
        }
    }

    #[test]
    fn prbs_period_lengths() {
        assert_eq!(prbs::<f64>(10, 1.0, 0.0).unwrap().len(), 1023);
        assert_eq!(prbs::<f64>(11, 1.0, 0.0).unwrap().len(), 2047);
        assert!(matches!(
            prbs::<f64>(17, 1.0, 0.0),
            Err(Error::UnsupportedOrder { order: 17 })
        ));
    }

    #[test]
    fn prbs_order_3_balance() {
        // Exhaustive oracle: a maximal-length register of order 3 visits all
        // 7 nonzero states, so the output has four of one sign, three of the
        // other.
        let signal = prbs::<f64>(3, 1.0, 0.0).unwrap();
        let plus = signal.iter().filter(|&&v| v > 0.0).count();
        let minus = signal.iter().filter(|&&v| v < 0.0).count();
        assert_eq!(plus.max(minus), 4);
        assert_eq!(plus.min(minus), 3);

        let taps = LFSR_TAPS[1];
        let mut state = 0b111u32;
        let mut visited = std::collections::BTreeSet::new();
        for _ in 0..7 {
            visited.insert(state);
            let feedback = taps
                .iter()
                .fold(0u32, |acc, &e| acc ^ ((state >> e) & 1));
            state = (state >> 1) | (feedback << 2);
        }
        assert_eq!(visited.len(), 7);
        assert!(!visited.contains(&0));
    }

    #[test]
    fn offsetless_prbs_has_near_zero_dc() {
        let order = 5u32;
        let m = (1usize << order) - 1;
        let signal = prbs::<f64>(order, 1.0, 0.0).unwrap();
        let exc = certify(shift_schedule(&signal, 1).unwrap()).unwrap();
        // Direct DFT oracle at DC: |sum u| / sqrt(M) = amplitude / sqrt(M).
        let dc: f64 = signal.iter().sum::<f64>().abs() / (m as f64).sqrt();
        assert!((dc - 1.0 / (m as f64).sqrt()).abs() < 1e-12);
        assert!((exc.sigma_u_at(0).unwrap() - dc).abs() < 1e-12);
    }

    #[test]
    fn prbs_flat_spectrum_away_from_dc() {
        // Classic maximal-length property: |U_l|^2 = amp^2 (M + 1) / M off DC.
        let order = 7u32;
        let m = (1usize << order) - 1;
        let exc = certify(shift_schedule(&prbs::<f64>(order, 1.0, 0.0).unwrap(), 1).unwrap()).unwrap();
        let expected = ((m as f64 + 1.0) / m as f64).sqrt();
        for ell in 1..m {
            assert!(
                (exc.sigma_u_at(ell).unwrap() - expected).abs() < 1e-9,
                "index {ell}"
            );
        }
    }

    #[test]
    fn prbs_amplitude_bound_is_exact() {
        let amplitude = 1.0f64;
        let offset = 0.3f64;
        let signal = prbs::<f64>(6, amplitude, offset).unwrap();
        let exc = shift_schedule(&signal, 1).unwrap();
        assert_eq!(exc.amplitude_bound(), amplitude.abs() + offset.abs());
        for sample in exc.experiment(0) {
            assert!(sample[0].abs() <= exc.amplitude_bound());
        }
    }

    #[test]
    fn multisine_dc_line_is_constant() {
        let signal = multisine(
            12,
            &[MultisineLine {
                frequency: 0,
                amplitude: 2.5f64,
                phase: 0.0,
            }],
        )
        .unwrap();
        for &v in &signal {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn multisine_rejects_duplicates() {
        let line = MultisineLine {
            frequency: 3,
            amplitude: 1.0f64,
            phase: 0.1,
        };
        assert!(matches!(
            multisine(8, &[line, line]),
            Err(Error::DuplicateLine { index: 3 })
        ));
    }

    #[test]
    fn empty_multisine_fails_required_certification() {
        let signal = multisine::<f64>(9, &[]).unwrap();
        assert!(signal.iter().all(|&v| v == 0.0));
        let exc = certify(shift_schedule(&signal, 1).unwrap()).unwrap();
        let required: Vec<usize> = (0..9).collect();
        assert!(matches!(
            exc.require_exciting(&required),
            Err(Error::NotExciting { .. })
        ));
    }

    #[test]
    fn flat_multisine_has_uniform_sigma() {
        for &m in &[9usize, 10] {
            let signal = flat_multisine::<f64>(m, 1.0, 42).unwrap();
            let exc = certify(shift_schedule(&signal, 1).unwrap()).unwrap();
            let expected = (m as f64).sqrt() * 0.5;
            for ell in 0..m {
                assert!(
                    (exc.sigma_u_at(ell).unwrap() - expected).abs() < 1e-9,
                    "m {m} index {ell}"
                );
            }
        }
    }

    #[test]
    fn shift_schedule_identity_for_one_experiment() {
        let base = vec![1.0f64, -2.0, 3.0];
        let exc = shift_schedule(&base, 1).unwrap();
        assert_eq!(exc.experiment_count(), 1);
        for (t, &v) in base.iter().enumerate() {
            assert_eq!(exc.experiment(0)[t], vec![v]);
        }
    }

    #[test]
    fn shift_schedule_delays_second_experiment() {
        // Impulse train of period 8: the second of two experiments is the
        // base delayed by 4, on the second channel.
        let mut base = vec![0.0f64; 8];
        base[0] = 1.0;
        let exc = shift_schedule(&base, 2).unwrap();
        assert_eq!(exc.experiment(1)[4], vec![0.0, 1.0]);
        assert_eq!(exc.experiment(1)[0], vec![0.0, 0.0]);
        assert_eq!(exc.experiment(0)[0], vec![1.0, 0.0]);
    }

    #[test]
    fn shift_schedule_rejects_too_many_experiments() {
        assert!(matches!(
            shift_schedule(&[1.0f64, 2.0], 3),
            Err(Error::TooManyExperiments { .. })
        ));
    }

    #[test]
    fn prbs_schedule_excites_two_inputs() {
        let base = prbs::<f64>(5, 1.0, 0.0).unwrap();
        let exc = certify(shift_schedule(&base, 2).unwrap()).unwrap();
        for ell in 1..exc.period() {
            assert!(exc.sigma_u_at(ell).unwrap() > 0.5, "index {ell}");
        }
        let required: Vec<usize> = (1..exc.period()).collect();
        exc.require_exciting(&required).unwrap();
    }

    #[test]
    fn certify_constant_input() {
        let c = 1.7f64;
        let m = 6usize;
        let exc = certify(PeriodicExcitation::custom(vec![vec![vec![c]; m]]).unwrap()).unwrap();
        assert!((exc.sigma_u_at(0).unwrap() - (m as f64).sqrt() * c).abs() < 1e-12);
        for ell in 1..m {
            assert!(exc.sigma_u_at(ell).unwrap() < 1e-12);
        }
    }

    #[test]
    fn certified_energy_is_consistent() {
        for d_u in 1..=3usize {
            let base = prbs::<f64>(4, 1.0, 0.3).unwrap();
            let exc = certify(shift_schedule(&base, d_u).unwrap()).unwrap();
            let energy: f64 = exc.sigma_u().unwrap().iter().map(|s| s * s).sum();
            let budget = exc.period() as f64 * exc.amplitude_bound().powi(2);
            assert!(energy <= budget * (1.0 + 1e-12), "d_u {d_u}");
        }
    }

    #[test]
    fn offset_prbs_excites_everything() {
        let base = prbs::<f64>(6, 1.0, 0.3).unwrap();
        let exc = certify(shift_schedule(&base, 1).unwrap()).unwrap();
        let required: Vec<usize> = (0..exc.period()).collect();
        exc.require_exciting(&required).unwrap();
    }
}
