//! DFT utilities, stacked experiment transforms, and noise power spectra.
//!
//! Every transform uses the `1/sqrt(N)` normalization so Parseval holds with
//! unit constant and the downstream estimates and certificates share one
//! convention. The fast transform is radix-agnostic (record lengths are
//! `M * N_p` with `M = 2^d - 1`, so rarely a power of two); an `O(N^2)`
//! reference sum lives in the test suite.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::lti::{AutocovarianceSequence, TrajectorySet};
use crate::scalar::{lit, Scalar};

/// DFT of a (possibly vector-valued) signal at a single frequency index,
/// computed by the direct sum with exact per-sample angles.
pub fn dft_at<T: Scalar>(signal: &[Vec<T>], k: usize) -> Result<Vec<Complex<T>>> {
    let n = signal.len();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let dim = signal.first().map(|s| s.len()).unwrap_or(0);
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); dim];
    for (t, sample) in signal.iter().enumerate() {
        let angle = -T::TAU() * T::from_usize_lossy((k * t) % n) / T::from_usize_lossy(n);
        let w = Complex::from_polar(T::one(), angle);
        for (ch, &v) in sample.iter().enumerate() {
            acc[ch] = acc[ch] + w * Complex::new(v, T::zero());
        }
    }
    for v in acc.iter_mut() {
        *v = *v * Complex::new(scale, T::zero());
    }
    Ok(acc)
}

/// Full `1/sqrt(N)`-normalized DFT of one real channel.
pub fn full_dft<T: Scalar>(channel: &[T]) -> Vec<Complex<T>> {
    let n = channel.len();
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buffer: Vec<Complex<T>> = channel
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fft.process(&mut buffer);
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    for v in buffer.iter_mut() {
        *v = *v * Complex::new(scale, T::zero());
    }
    buffer
}

/// Stacked DFT matrices of all experiments at a set of frequency indices.
#[derive(Clone, Debug)]
pub struct StackedDfts<T> {
    n: usize,
    ks: Vec<usize>,
    /// `d_y x d_u` output DFTs per requested index.
    outputs: Vec<CMatrix<T>>,
    /// `d_u x d_u` input DFTs per requested index.
    inputs: Vec<CMatrix<T>>,
    /// `d_y x d_u` noise DFTs per requested index (recorded in simulation).
    noises: Vec<CMatrix<T>>,
}

impl<T: Scalar> StackedDfts<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn index_of(&self, k: usize) -> Option<usize> {
        self.ks.iter().position(|&kk| kk == k)
    }

    pub fn output_at(&self, k: usize) -> Option<&CMatrix<T>> {
        self.index_of(k).map(|i| &self.outputs[i])
    }

    pub fn input_at(&self, k: usize) -> Option<&CMatrix<T>> {
        self.index_of(k).map(|i| &self.inputs[i])
    }

    pub fn noise_at(&self, k: usize) -> Option<&CMatrix<T>> {
        self.index_of(k).map(|i| &self.noises[i])
    }
}

/// Compute the stacked DFT matrices `Y_k`, `U_k`, `V_k` for every requested
/// index; column `i` holds experiment `i`.
pub fn stack<T: Scalar>(trajectories: &TrajectorySet<T>, ks: &[usize]) -> Result<StackedDfts<T>> {
    let n = trajectories.len();
    for &k in ks {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
    }
    let d_u_exp = trajectories.experiment_count();
    let first = trajectories.experiment(0);
    let in_dim = first.input.first().map(|s| s.len()).unwrap_or(0);
    let out_dim = first.output.first().map(|s| s.len()).unwrap_or(0);

    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(n);
    let scale = Complex::new(T::one() / T::from_usize_lossy(n).sqrt(), T::zero());
    let transform = |samples: &[Vec<T>], channel: usize| -> Vec<Complex<T>> {
        let mut buffer: Vec<Complex<T>> = samples
            .iter()
            .map(|s| Complex::new(s[channel], T::zero()))
            .collect();
        fft.process(&mut buffer);
        ks.iter().map(|&k| buffer[k] * scale).collect()
    };

    let mut inputs = vec![CMatrix::zeros(in_dim, d_u_exp); ks.len()];
    let mut outputs = vec![CMatrix::zeros(out_dim, d_u_exp); ks.len()];
    let mut noises = vec![CMatrix::zeros(out_dim, d_u_exp); ks.len()];
    for i in 0..d_u_exp {
        let experiment = trajectories.experiment(i);
        if experiment.input.len() != n {
            return Err(Error::LengthMismatch {
                context: "all experiments must share one record length".into(),
            });
        }
        for ch in 0..in_dim {
            let values = transform(&experiment.input, ch);
            for (slot, v) in values.into_iter().enumerate() {
                inputs[slot].set(ch, i, v);
            }
        }
        for ch in 0..out_dim {
            let values = transform(&experiment.output, ch);
            for (slot, v) in values.into_iter().enumerate() {
                outputs[slot].set(ch, i, v);
            }
            let values = transform(&experiment.noise, ch);
            for (slot, v) in values.into_iter().enumerate() {
                noises[slot].set(ch, i, v);
            }
        }
    }
    Ok(StackedDfts {
        n,
        ks: ks.to_vec(),
        outputs,
        inputs,
        noises,
    })
}

/// Power spectrum of the noise at index `k` of an `n`-point grid:
/// the symmetric two-sided sum over the tabulated autocovariance lags.
pub fn exact_spectrum<T: Scalar>(
    autocov: &AutocovarianceSequence<T>,
    n: usize,
    k: usize,
) -> CMatrix<T> {
    spectrum_sum(autocov, n, k, |_tau| T::one())
}

/// Finite-record (aliased) power spectrum at index `k`:
/// `sum_{|tau| < N} (1 - |tau|/N) R_tau e^{-j omega tau}`, the exact second
/// moment of the length-`n` DFT of a stationary record.
pub fn aliased_spectrum<T: Scalar>(
    autocov: &AutocovarianceSequence<T>,
    n: usize,
    k: usize,
) -> CMatrix<T> {
    let n_t = T::from_usize_lossy(n);
    spectrum_sum(autocov, n, k, |tau| {
        if tau >= n {
            T::zero()
        } else {
            T::one() - T::from_usize_lossy(tau) / n_t
        }
    })
}

/// Difference `Phi_v(k) - Phi_{v,N}(k)` summed directly from its own series
/// (`min(1, |tau|/N)`-weighted lags), avoiding the cancellation of
/// subtracting two nearly equal spectra.
pub fn spectrum_gap<T: Scalar>(
    autocov: &AutocovarianceSequence<T>,
    n: usize,
    k: usize,
) -> CMatrix<T> {
    let n_t = T::from_usize_lossy(n);
    spectrum_sum(autocov, n, k, |tau| {
        if tau >= n {
            T::one()
        } else {
            T::from_usize_lossy(tau) / n_t
        }
    })
}

fn spectrum_sum<T: Scalar>(
    autocov: &AutocovarianceSequence<T>,
    n: usize,
    k: usize,
    weight: impl Fn(usize) -> T,
) -> CMatrix<T> {
    let d = autocov.lag(0).rows();
    let mut acc = CMatrix::zeros(d, d);
    let w0 = weight(0);
    for r in 0..d {
        for c in 0..d {
            acc.set(r, c, Complex::new(autocov.lag(0).get(r, c) * w0, T::zero()));
        }
    }
    for tau in 1..autocov.lag_count() {
        let w = weight(tau);
        if w == T::zero() {
            continue;
        }
        let angle = -T::TAU() * T::from_usize_lossy((k * tau) % n) / T::from_usize_lossy(n);
        let phasor = Complex::from_polar(w, angle);
        let phasor_conj = phasor.conj();
        let lag = autocov.lag(tau);
        for r in 0..d {
            for c in 0..d {
                // R_{-tau} = R_tau^T.
                let fwd = Complex::new(lag.get(r, c), T::zero()) * phasor;
                let bwd = Complex::new(lag.get(c, r), T::zero()) * phasor_conj;
                acc.set(r, c, acc.get(r, c) + fwd + bwd);
            }
        }
    }
    acc.hermitian_part()
}

/// Per-frequency signal-to-noise ratio `sigma_u / sqrt(||Phi||)`.
pub fn snr<T: Scalar>(sigma_u_ell: T, phi: &CMatrix<T>) -> Result<T> {
    let norm = phi.operator_norm();
    if norm == T::zero() {
        return Err(Error::ZeroNoise);
    }
    Ok(sigma_u_ell / norm.sqrt())
}

/// Tabulated exact and finite-record spectra over a frequency index set,
/// with the uniform gap bound `2 ||R||_* / N`.
#[derive(Clone, Debug)]
pub struct SpectrumTable<T> {
    n: usize,
    ks: Vec<usize>,
    aliased: Vec<CMatrix<T>>,
    exact: Vec<CMatrix<T>>,
    gaps: Vec<CMatrix<T>>,
    gap_bound: T,
    weighted_norm: T,
}

impl<T: Scalar> SpectrumTable<T> {
    pub fn build(autocov: &AutocovarianceSequence<T>, n: usize, ks: &[usize]) -> Result<Self> {
        for &k in ks {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, len: n });
            }
        }
        let aliased: Vec<CMatrix<T>> = ks.iter().map(|&k| aliased_spectrum(autocov, n, k)).collect();
        let exact: Vec<CMatrix<T>> = ks.iter().map(|&k| exact_spectrum(autocov, n, k)).collect();
        let gaps: Vec<CMatrix<T>> = ks.iter().map(|&k| spectrum_gap(autocov, n, k)).collect();
        let weighted_norm = autocov.weighted_norm();
        let gap_bound = lit::<T>(2.0) * weighted_norm / T::from_usize_lossy(n);
        Ok(Self {
            n,
            ks: ks.to_vec(),
            aliased,
            exact,
            gaps,
            gap_bound,
            weighted_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn aliased_at(&self, slot: usize) -> &CMatrix<T> {
        &self.aliased[slot]
    }

    pub fn exact_at(&self, slot: usize) -> &CMatrix<T> {
        &self.exact[slot]
    }

    /// `2 ||R||_* / N`.
    pub fn gap_bound(&self) -> T {
        self.gap_bound
    }

    /// Upper estimate of `||R||_*` used by the gap bound.
    pub fn weighted_norm(&self) -> T {
        self.weighted_norm
    }

    /// Largest measured gap `||Phi_v(k) - Phi_{v,N}(k)||` over the table,
    /// computed from the difference series directly.
    pub fn max_gap(&self) -> T {
        self.gaps
            .iter()
            .map(|g| g.operator_norm())
            .fold(T::zero(), |x, y| x.max(y))
    }

    /// CSV export: one row per frequency index with the real and imaginary
    /// parts of both spectra and the gap bound.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "k,omega,entry_row,entry_col,re_phi_vn,im_phi_vn,re_phi_v,im_phi_v,gap_bound")?;
        for (slot, &k) in self.ks.iter().enumerate() {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / self.n as f64;
            let d = self.aliased[slot].rows();
            for r in 0..d {
                for c in 0..d {
                    let a = self.aliased[slot].get(r, c);
                    let e = self.exact[slot].get(r, c);
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        k,
                        omega,
                        r,
                        c,
                        a.re.as_f64(),
                        a.im.as_f64(),
                        e.re.as_f64(),
                        e.im.as_f64(),
                        self.gap_bound.as_f64()
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::{certify, prbs, shift_schedule, PeriodicExcitation};
    use crate::lti::{
        demo_noise_filter, demo_plant, noise_autocovariance, simulate, NoiseLaw,
        RationalTransferFunction, SimulationSpec, Trajectory, TrajectorySet,
    };
    use proptest::prelude::*;

    fn naive_dft(signal: &[f64], k: usize) -> Complex<f64> {
        let n = signal.len();
        let mut acc = Complex::new(0.0, 0.0);
        for (t, &v) in signal.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k as f64) * (t as f64) / n as f64;
            acc += Complex::from_polar(v, angle);
        }
        acc / (n as f64).sqrt()
    }

    #[test]
    fn dft_of_constant() {
        let c = 0.75f64;
        let n = 9usize;
        let signal: Vec<Vec<f64>> = vec![vec![c]; n];
        let dc = dft_at(&signal, 0).unwrap()[0];
        assert!((dc.re - (n as f64).sqrt() * c).abs() < 1e-12);
        assert!(dc.im.abs() < 1e-12);
        for k in 1..n {
            assert!(dft_at(&signal, k).unwrap()[0].norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_unit_impulse_is_flat() {
        let n = 11usize;
        let mut signal = vec![vec![0.0f64]; n];
        signal[0][0] = 1.0;
        for k in 0..n {
            let v = dft_at(&signal, k).unwrap()[0];
            assert!((v - Complex::new(1.0 / (n as f64).sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_rejects_out_of_range() {
        let signal = vec![vec![1.0f64]; 4];
        assert!(matches!(
            dft_at(&signal, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    proptest! {
        #[test]
        fn dft_matches_naive_oracle(values in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let signal: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
            let fast = full_dft(&values);
            for k in 0..values.len() {
                let direct = dft_at(&signal, k).unwrap()[0];
                let oracle = naive_dft(&values, k);
                prop_assert!((direct - oracle).norm() < 1e-12);
                prop_assert!((fast[k] - oracle).norm() < 1e-12);
            }
        }

        #[test]
        fn parseval(values in proptest::collection::vec(-5.0f64..5.0, 3..40)) {
            let time_energy: f64 = values.iter().map(|v| v * v).sum();
            let freq_energy: f64 = full_dft(&values).iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((time_energy - freq_energy).abs() <= 1e-9 * time_energy.max(1.0));
        }

        #[test]
        fn conjugate_symmetry(values in proptest::collection::vec(-5.0f64..5.0, 4..24)) {
            let spectrum = full_dft(&values);
            let n = values.len();
            for k in 1..n {
                prop_assert!((spectrum[k] - spectrum[n - k].conj()).norm() < 1e-10);
            }
        }
    }

    fn sim_spec(noise_std: f64) -> SimulationSpec<f64> {
        SimulationSpec::new(
            demo_plant::<f64>(),
            demo_noise_filter::<f64>(),
            noise_std,
            NoiseLaw::Gaussian,
        )
        .unwrap()
    }

    #[test]
    fn stack_single_experiment_matches_direct_dft() {
        let spec = sim_spec(0.1f64.sqrt());
        let base = prbs::<f64>(4, 1.0, 0.3).unwrap();
        let exc = shift_schedule(&base, 1).unwrap();
        let trajectories = simulate(&spec, &exc, 60, 5).unwrap();
        let ks = vec![0usize, 4, 17];
        let stacked = stack(&trajectories, &ks).unwrap();
        for &k in &ks {
            let y_direct = dft_at(&trajectories.experiment(0).output, k).unwrap()[0];
            let y = stacked.output_at(k).unwrap().get(0, 0);
            assert!((y - y_direct).norm() < 1e-10);
            let u_direct = dft_at(&trajectories.experiment(0).input, k).unwrap()[0];
            let u = stacked.input_at(k).unwrap().get(0, 0);
            assert!((u - u_direct).norm() < 1e-10);
        }
    }

    #[test]
    fn duplicated_experiments_are_rank_deficient() {
        let n = 16usize;
        let record: Vec<Vec<f64>> = (0..n).map(|t| vec![(t as f64).sin(), (t as f64).cos()]).collect();
        let zero: Vec<Vec<f64>> = vec![vec![0.0, 0.0]; n];
        let experiment = Trajectory {
            input: record.clone(),
            output: zero.clone(),
            noise: zero,
        };
        let set = TrajectorySet::new(vec![experiment.clone(), experiment]).unwrap();
        let stacked = stack(&set, &[3]).unwrap();
        let u = stacked.input_at(3).unwrap();
        assert!(u.smallest_singular_value() < 1e-12 * u.operator_norm().max(1.0));
    }

    #[test]
    fn periodic_tiling_concentrates_input_energy() {
        // Tiling one period N_p times scales the on-grid DFT by sqrt(N_p)
        // and zeroes every off-grid index.
        let base = prbs::<f64>(4, 1.0, 0.3).unwrap();
        let exc = certify(shift_schedule(&base, 1).unwrap()).unwrap();
        let m = exc.period();
        let n_p = 4usize;
        let n = m * n_p;
        let tiled: Vec<f64> = (0..n).map(|t| exc.experiment(0)[t % m][0]).collect();
        let spectrum = full_dft(&tiled);
        let d_u_bound = exc.amplitude_bound();
        for (k, value) in spectrum.iter().enumerate() {
            if k % n_p == 0 {
                let tilde = exc.stacked_period_dft(k / n_p).unwrap().get(0, 0);
                let expected = tilde * Complex::new((n_p as f64).sqrt(), 0.0);
                assert!((value - expected).norm() < 1e-9, "grid index {k}");
            } else {
                assert!(
                    value.norm() <= 1e-9 * (n as f64).sqrt() * d_u_bound,
                    "off-grid index {k}"
                );
            }
        }
    }

    #[test]
    fn white_noise_spectra_are_flat() {
        let spec = SimulationSpec::new(
            RationalTransferFunction::<f64>::identity(1),
            RationalTransferFunction::<f64>::identity(1),
            0.1f64.sqrt(),
            NoiseLaw::Gaussian,
        )
        .unwrap();
        let autocov = noise_autocovariance(&spec, 4).unwrap();
        for n in [16usize, 64] {
            for k in 0..4 {
                let exact = exact_spectrum(&autocov, n, k).scalar();
                let aliased = aliased_spectrum(&autocov, n, k).scalar();
                assert!((exact.re - 0.1).abs() < 1e-14);
                assert!((aliased.re - 0.1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ar1_exact_spectrum_matches_filter_gain() {
        let spec = sim_spec(0.1f64.sqrt());
        let lags = crate::lti::autocovariance_lags_for_tolerance(&spec, 1e-14).unwrap();
        let autocov = noise_autocovariance(&spec, lags).unwrap();
        let n = 64usize;
        let filter = demo_noise_filter::<f64>();
        // Direct oracle: Phi_v(k) = sigma_e^2 |H(e^{j omega})|^2.
        for k in 0..n {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let h = filter.frequency_response(omega).scalar();
            let oracle = 0.1 * h.norm_sqr();
            let value = exact_spectrum(&autocov, n, k).scalar().re;
            assert!((value - oracle).abs() < 1e-10, "index {k}");
        }
        let dc = exact_spectrum(&autocov, n, 0).scalar().re;
        assert!((dc - 0.15625).abs() < 1e-10);
    }

    #[test]
    fn aliased_spectrum_matches_monte_carlo() {
        // Monte Carlo oracle for E |V_0|^2 over simulated noise records.
        let spec = SimulationSpec::new(
            RationalTransferFunction::<f64>::identity(1),
            demo_noise_filter::<f64>(),
            0.1f64.sqrt(),
            NoiseLaw::Gaussian,
        )
        .unwrap();
        let n = 64usize;
        let k = 0usize;
        let zero_input = PeriodicExcitation::custom(vec![vec![vec![0.0f64]]]).unwrap();
        let trials = 100_000usize;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for trial in 0..trials {
            let set = simulate(&spec, &zero_input, n, 0xA11A5ED + trial as u64).unwrap();
            let v = dft_at(&set.experiment(0).noise, k).unwrap()[0];
            let value = v.norm_sqr();
            let count = (trial + 1) as f64;
            let delta = value - mean;
            mean += delta / count;
            m2 += delta * (value - mean);
        }
        let std_err = (m2 / (trials as f64 - 1.0)).sqrt() / (trials as f64).sqrt();
        let lags = crate::lti::autocovariance_lags_for_tolerance(&spec, 1e-14).unwrap();
        let autocov = noise_autocovariance(&spec, lags).unwrap();
        let predicted = aliased_spectrum(&autocov, n, k).scalar().re;
        assert!(
            (mean - predicted).abs() <= 3.0 * std_err,
            "mean {mean}, predicted {predicted}, std err {std_err}"
        );
    }

    #[test]
    fn spectrum_gap_bound_holds_and_scales() {
        let spec = sim_spec(0.1f64.sqrt());
        let lags = crate::lti::autocovariance_lags_for_tolerance(&spec, 1e-13).unwrap();
        let autocov = noise_autocovariance(&spec, lags).unwrap();
        let mut previous_gap: Option<f64> = None;
        for n in [32usize, 64, 128] {
            let ks: Vec<usize> = (0..16).map(|j| j * n / 16).collect();
            let table = SpectrumTable::build(&autocov, n, &ks).unwrap();
            let gap = table.max_gap();
            assert!(gap <= table.gap_bound(), "n {n}: gap {gap} bound {}", table.gap_bound());
            if let Some(prev) = previous_gap {
                let ratio = prev / gap;
                assert!((1.8..=2.2).contains(&ratio), "halving ratio {ratio}");
            }
            previous_gap = Some(gap);
        }
    }

    #[test]
    fn snr_examples() {
        let white = CMatrix::from_scalar(Complex::new(0.1f64, 0.0));
        let value = snr(1.0, &white).unwrap();
        assert!((value - 1.0 / 0.1f64.sqrt()).abs() < 1e-12);
        assert!((snr(2.0, &white).unwrap() - 2.0 * value).abs() < 1e-12);

        let ar1_dc = CMatrix::from_scalar(Complex::new(0.15625f64, 0.0));
        assert!((snr(1.0, &ar1_dc).unwrap() - 2.5298221281347035).abs() < 1e-9);

        let zero = CMatrix::from_scalar(Complex::new(0.0f64, 0.0));
        assert!(matches!(snr(1.0, &zero), Err(Error::ZeroNoise)));
    }
}
