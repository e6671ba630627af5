//! Monte Carlo verification of the concentration tails on finite
//! truncations of the semi-infinite noise operators.
//!
//! The map from past innovations to a noise DFT value is a bounded operator
//! from square-summable sequences to a finite space. Finite truncations of
//! it are materialized as dense real matrices (real and imaginary parts
//! stacked), sampled under a chosen sub-Gaussian law, and the empirical tail
//! frequencies are compared with the closed-form bounds.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certificates::{clip_probability, hanson_wright_tail, noise_norm_tail};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};
use crate::lti::{ImpulseResponseTruncation, NoiseLaw, SimulationSpec};
use crate::scalar::{lit, Scalar};
use crate::seed::derive_seed;
use crate::spectral::{aliased_spectrum, dft_at, stack};

const QUAD_FORM_STREAM: u64 = 0x9F01;
const NOISE_NORM_STREAM: u64 = 0x9F02;

/// Dense truncation of a semi-infinite operator: `d x (p * k_max)` where the
/// columns hold the first `k_max` innovation blocks.
#[derive(Clone, Debug)]
pub struct TruncatedOperator<T> {
    matrix: RMatrix<T>,
    block_dim: usize,
    frobenius: T,
    operator_norm: T,
    declared_tail: T,
}

impl<T: Scalar> TruncatedOperator<T> {
    /// Wrap an explicit dense matrix whose truncation error is declared by
    /// the caller (zero for genuinely finite operators).
    pub fn from_matrix(matrix: RMatrix<T>, block_dim: usize, declared_tail: T) -> Result<Self> {
        if block_dim == 0 || matrix.cols() % block_dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "operator columns must split into innovation blocks".into(),
            });
        }
        let frobenius = matrix.frobenius_norm();
        if declared_tail > frobenius * lit(0.01) {
            return Err(Error::TruncationTooShort {
                tail: declared_tail.as_f64(),
                frobenius: frobenius.as_f64(),
            });
        }
        let operator_norm = matrix.operator_norm();
        Ok(Self {
            matrix,
            block_dim,
            frobenius,
            operator_norm,
            declared_tail,
        })
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    /// Innovation dimension per block.
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// Number of innovation blocks kept by the truncation.
    pub fn block_count(&self) -> usize {
        self.matrix.cols() / self.block_dim
    }

    pub fn frobenius(&self) -> T {
        self.frobenius
    }

    pub fn operator_norm(&self) -> T {
        self.operator_norm
    }

    /// Frobenius mass certified to lie beyond the truncation.
    pub fn declared_tail(&self) -> T {
        self.declared_tail
    }

    pub fn apply(&self, z: &[T]) -> Vec<T> {
        self.matrix.matvec(z)
    }
}

/// Default truncation length for a filter DFT operator: the record length
/// plus fifty time constants of the filter's slowest mode, which keeps the
/// discarded Frobenius mass far below measurement scale for desk-size
/// filters.
pub fn default_truncation_blocks<T: Scalar>(h: &ImpulseResponseTruncation<T>, n: usize) -> usize {
    let rho = h.envelope().ratio();
    if rho <= T::zero() {
        return n + h.horizon() + 1;
    }
    let constants = (lit::<T>(50.0) / (T::one() - rho)).ceil().as_f64() as usize;
    n + constants
}

/// Dense operator with seeded random sign entries of magnitude `scale`;
/// handy as a structureless verification subject.
pub fn dense_random_operator<T: Scalar>(
    rows: usize,
    cols: usize,
    scale: T,
    seed: u64,
) -> Result<TruncatedOperator<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x9F03]));
    let matrix = RMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<bool>() {
            scale
        } else {
            -scale
        }
    });
    TruncatedOperator::from_matrix(matrix, 1, T::zero())
}

/// Materialize the map from the most recent `k_max` innovations to the
/// real/imaginary stack of the filtered noise DFT at index `k` of an
/// `n`-point record.
///
/// Column block `j` holds the coefficient of innovation `e_{n-1-j}`, matching
/// the newest-first enumeration of the past.
pub fn filter_dft_operator<T: Scalar>(
    h: &ImpulseResponseTruncation<T>,
    n: usize,
    k: usize,
    k_max: usize,
) -> Result<TruncatedOperator<T>> {
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    if k_max < n {
        return Err(Error::DimensionMismatch {
            context: format!("truncation must keep at least the record length: k_max {k_max} < n {n}"),
        });
    }
    let d_y = h.output_dim();
    let d_e = h.input_dim();
    let horizon = h.horizon() as i64;
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    let coefficient = |tau: i64| -> CMatrix<T> {
        // (1/sqrt N) sum_t h_{t - tau} e^{-j omega_k t} over valid lags.
        let mut acc = CMatrix::zeros(d_y, d_e);
        let t_lo = tau.max(0);
        let t_hi = ((n as i64) - 1).min(tau + horizon);
        let mut t = t_lo;
        while t <= t_hi {
            let lag = (t - tau) as usize;
            let angle = -T::TAU() * T::from_usize_lossy(((k as u64 * t as u64) % n as u64) as usize)
                / T::from_usize_lossy(n);
            let w = Complex::from_polar(scale, angle);
            let block = h.coefficient(lag);
            for r in 0..d_y {
                for c in 0..d_e {
                    acc.set(r, c, acc.get(r, c) + w * Complex::new(block.get(r, c), T::zero()));
                }
            }
            t += 1;
        }
        acc
    };

    let mut matrix = RMatrix::zeros(2 * d_y, d_e * k_max);
    for j in 0..k_max {
        let tau = n as i64 - 1 - j as i64;
        let block = coefficient(tau);
        for r in 0..d_y {
            for c in 0..d_e {
                matrix.set(r, j * d_e + c, block.get(r, c).re);
                matrix.set(d_y + r, j * d_e + c, block.get(r, c).im);
            }
        }
    }

    // Frobenius mass beyond the kept blocks: tau < n - k_max (all negative
    // once k_max >= n).
    let tau_cut = n as i64 - 1 - k_max as i64;
    let env = h.envelope();
    let declared_tail = if env.ratio() > T::zero() {
        // ||C_tau||_F <= kappa C rho^{-tau} / (sqrt(n) (1 - rho)) for tau <= 0.
        let kappa = T::from_usize_lossy(d_y.min(d_e)).sqrt();
        let rho = env.ratio();
        let unit = kappa * env.scale() / (T::from_usize_lossy(n).sqrt() * (T::one() - rho));
        let start = (-tau_cut) as i32;
        let mass_sq = unit * unit * rho.powi(2 * start) / (T::one() - rho * rho);
        mass_sq.sqrt()
    } else {
        // FIR filter: finitely many nonzero blocks remain; sum them exactly.
        let mut mass_sq = T::zero();
        let mut tau = tau_cut;
        while tau >= -horizon {
            let block = coefficient(tau);
            let f = block.frobenius_norm();
            mass_sq = mass_sq + f * f;
            tau -= 1;
        }
        mass_sq.sqrt()
    };

    TruncatedOperator::from_matrix(matrix, d_e, declared_tail)
}

/// Draw `n_trials` independent samples of the squared image norm
/// `||A z||^2` under the chosen innovation law.
pub fn sample_quadratic_form<T: Scalar>(
    op: &TruncatedOperator<T>,
    law: NoiseLaw,
    sigma: T,
    n_trials: usize,
    seed: u64,
) -> Vec<T> {
    let dim = op.matrix.cols();
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[QUAD_FORM_STREAM, trial as u64]));
            let z: Vec<T> = (0..dim).map(|_| law.sample(&mut rng, sigma)).collect();
            let image = op.apply(&z);
            image.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b)
        })
        .collect()
}

/// One row of a tail-verification table.
#[derive(Clone, Copy, Debug)]
pub struct TailCheckRow<T> {
    /// Deviation threshold (`alpha` or `s` depending on the check).
    pub threshold: T,
    pub empirical: T,
    pub bound: T,
    pub pass: bool,
}

impl<T: Scalar> TailCheckRow<T> {
    fn assess(threshold: T, exceed_count: usize, n_trials: usize, bound: T) -> Self {
        let n = T::from_usize_lossy(n_trials);
        let empirical = T::from_usize_lossy(exceed_count) / n;
        let std_err = (empirical * (T::one() - empirical) / n).sqrt();
        let pass = empirical <= clip_probability(bound) + lit::<T>(3.0) * std_err;
        Self {
            threshold,
            empirical,
            bound: clip_probability(bound),
            pass,
        }
    }
}

fn write_rows_csv<T: Scalar>(
    label: &str,
    rows: &[TailCheckRow<T>],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(out, "{label},empirical,bound,pass")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.threshold.as_f64(),
            row.empirical.as_f64(),
            row.bound.as_f64(),
            row.pass
        )?;
    }
    Ok(())
}

/// Result of a quadratic-form tail verification.
#[derive(Clone, Debug)]
pub struct QuadFormCheck<T> {
    pub rows: Vec<TailCheckRow<T>>,
    pub sample_mean: T,
    pub expected_mean: T,
    pub pass: bool,
}

impl<T: Scalar> QuadFormCheck<T> {
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        write_rows_csv("alpha", &self.rows, out)
    }
}

/// Compare empirical tails of `| ||A z||^2 - E | > alpha ||A||_F^2` with the
/// closed-form quadratic-form bound at every listed `alpha`.
pub fn verify_quadratic_form_tails<T: Scalar>(
    op: &TruncatedOperator<T>,
    law: NoiseLaw,
    sigma: T,
    alphas: &[T],
    n_trials: usize,
    seed: u64,
) -> QuadFormCheck<T> {
    let samples = sample_quadratic_form(op, law, sigma, n_trials, seed);
    let f2 = op.frobenius() * op.frobenius();
    let expected_mean = sigma * sigma * f2;
    let sample_mean = samples.iter().copied().fold(T::zero(), |a, b| a + b)
        / T::from_usize_lossy(n_trials);
    let k = law.default_subgaussian(sigma);
    let rows: Vec<TailCheckRow<T>> = alphas
        .iter()
        .map(|&alpha| {
            let threshold = alpha * f2;
            let exceed = samples
                .iter()
                .filter(|&&v| (v - expected_mean).abs() > threshold)
                .count();
            let bound = hanson_wright_tail(alpha, op.frobenius(), op.operator_norm(), k);
            TailCheckRow::assess(alpha, exceed, n_trials, bound)
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    QuadFormCheck {
        rows,
        sample_mean,
        expected_mean,
        pass,
    }
}

/// Result of a noise-norm concentration verification.
#[derive(Clone, Debug)]
pub struct NoiseNormCheck<T> {
    pub rows: Vec<TailCheckRow<T>>,
    /// Sample mean of `||V_k||^2` with its standard error.
    pub mean_sq: T,
    pub mean_sq_std_err: T,
    /// Model value `tr Phi_{v,N}(k)` the mean is checked against.
    pub trace_phi: T,
    pub mean_pass: bool,
    pub pass: bool,
}

impl<T: Scalar> NoiseNormCheck<T> {
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        write_rows_csv("s", &self.rows, out)
    }
}

/// Simulate the stacked noise DFT over independent experiments and compare
/// the empirical tail of `| ||V_k|| - sqrt(tr Phi) | > 2 s sqrt(tr Phi)`
/// with the noise-norm bound at every listed `s`.
pub fn verify_noise_norm_tails<T: Scalar>(
    spec: &SimulationSpec<T>,
    n: usize,
    k: usize,
    s_grid: &[T],
    n_trials: usize,
    seed: u64,
) -> Result<NoiseNormCheck<T>> {
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let lags = crate::lti::autocovariance_lags_for_tolerance(spec, lit(1e-13))?;
    let autocov = crate::lti::noise_autocovariance(spec, lags)?;
    let phi = aliased_spectrum(&autocov, n, k);
    let trace = phi.trace().re;
    if trace <= T::zero() {
        return Err(Error::ZeroNoise);
    }
    let d_u = spec.plant().input_dim();
    let zero_period = vec![vec![vec![T::zero(); d_u]]; d_u];
    let zero_excitation = crate::excitation::PeriodicExcitation::custom(zero_period)?;

    let norms: Vec<T> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, &[NOISE_NORM_STREAM, trial as u64]);
            let set = crate::lti::simulate(spec, &zero_excitation, n, trial_seed)
                .expect("noise-only simulation cannot fail after validation");
            if d_u == 1 {
                let v = dft_at(&set.experiment(0).noise, k).expect("k validated");
                let norm_sq = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b);
                norm_sq.sqrt()
            } else {
                let dfts = stack(&set, &[k]).expect("k validated");
                dfts.noise_at(k).expect("materialized").operator_norm()
            }
        })
        .collect();

    let n_t = T::from_usize_lossy(n_trials);
    let mean_sq = norms.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b) / n_t;
    let var_sq = norms
        .iter()
        .map(|&v| {
            let d = v * v - mean_sq;
            d * d
        })
        .fold(T::zero(), |a, b| a + b)
        / (n_t - T::one());
    let mean_sq_std_err = (var_sq / n_t).sqrt();
    let mean_pass = (mean_sq - trace).abs() <= lit::<T>(3.0) * mean_sq_std_err;

    let sqrt_trace = trace.sqrt();
    let rows: Vec<TailCheckRow<T>> = s_grid
        .iter()
        .map(|&s| {
            let threshold = lit::<T>(2.0) * s * sqrt_trace;
            let exceed = norms
                .iter()
                .filter(|&&v| (v - sqrt_trace).abs() > threshold)
                .count();
            let bound = noise_norm_tail(s, spec.subgaussian_k(), spec.noise_std(), &phi, d_u);
            TailCheckRow::assess(s, exceed, n_trials, bound)
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass) && mean_pass;
    Ok(NoiseNormCheck {
        rows,
        mean_sq,
        mean_sq_std_err,
        trace_phi: trace,
        mean_pass,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{demo_noise_filter, impulse_response, NoiseLaw, RationalTransferFunction};
    use rand::Rng;

    fn identity_operator(n: usize) -> TruncatedOperator<f64> {
        TruncatedOperator::from_matrix(RMatrix::identity_scaled(n, 1.0), 1, 0.0).unwrap()
    }

    #[test]
    fn identity_filter_operator_matches_closed_form() {
        let h = impulse_response(&RationalTransferFunction::<f64>::identity(1), 1e-12).unwrap();
        let n = 16usize;
        let op = filter_dft_operator(&h, n, 0, n).unwrap();
        // At k = 0 every kept column is (1/sqrt N, 0)^T.
        let scale = 1.0 / (n as f64).sqrt();
        for j in 0..n {
            assert!((op.matrix().get(0, j) - scale).abs() < 1e-14);
            assert!(op.matrix().get(1, j).abs() < 1e-14);
        }
        assert!((op.frobenius() - 1.0).abs() < 1e-12);
        assert!((op.operator_norm() - 1.0).abs() < 1e-12);
        assert_eq!(op.declared_tail(), 0.0);

        // k = 3: columns are (cos, -sin)/sqrt N; cross-check the operator
        // norm against the closed-form 2x2 Gram eigenvalue oracle.
        let op = filter_dft_operator(&h, n, 3, n).unwrap();
        let m = op.matrix();
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = 0.0;
        for j in 0..m.cols() {
            a += m.get(0, j) * m.get(0, j);
            b += m.get(0, j) * m.get(1, j);
            c += m.get(1, j) * m.get(1, j);
        }
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let oracle = (mean + disc).sqrt();
        assert!((op.operator_norm() - oracle).abs() < 1e-10);
        for j in 0..n {
            let tau = (n - 1 - j) as f64;
            let angle = -2.0 * std::f64::consts::PI * 3.0 * tau / n as f64;
            assert!((m.get(0, j) - angle.cos() / (n as f64).sqrt()).abs() < 1e-12);
            assert!((m.get(1, j) - angle.sin() / (n as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_operator_norms_match_spectrum() {
        let filter = demo_noise_filter::<f64>();
        let h = impulse_response(&filter, 1e-12).unwrap();
        let spec = crate::lti::SimulationSpec::new(
            RationalTransferFunction::<f64>::identity(1),
            filter,
            0.1f64.sqrt(),
            NoiseLaw::Gaussian,
        )
        .unwrap();
        let n = 64usize;
        let k_max = n + 80;
        let lags = crate::lti::autocovariance_lags_for_tolerance(&spec, 1e-13).unwrap();
        let autocov = crate::lti::noise_autocovariance(&spec, lags).unwrap();
        for k in [0usize, 5, 31] {
            let op = filter_dft_operator(&h, n, k, k_max).unwrap();
            let phi = aliased_spectrum(&autocov, n, k);
            let sigma_sq = 0.1;
            // Frobenius identity: ||A||_F^2 = tr Phi / sigma_e^2.
            let expected = phi.trace().re / sigma_sq;
            let got = op.frobenius() * op.frobenius();
            assert!(
                (got - expected).abs() < 1e-6 * expected,
                "k {k}: frobenius^2 {got} vs {expected}"
            );
            // Operator norm bound: ||A|| <= sqrt(||Phi||) / sigma_e.
            let cap = (phi.operator_norm() / sigma_sq).sqrt();
            assert!(op.operator_norm() <= cap * (1.0 + 1e-9), "k {k}");
        }
    }

    #[test]
    fn operator_requires_full_record() {
        let h = impulse_response(&RationalTransferFunction::<f64>::identity(1), 1e-12).unwrap();
        assert!(filter_dft_operator(&h, 16, 0, 8).is_err());
    }

    #[test]
    fn truncation_is_stable_under_doubling() {
        let h = impulse_response(&demo_noise_filter::<f64>(), 1e-12).unwrap();
        let n = 32usize;
        let short = filter_dft_operator(&h, n, 3, n + 20).unwrap();
        let long = filter_dft_operator(&h, n, 3, 2 * (n + 20)).unwrap();
        assert!((short.frobenius() - long.frobenius()).abs() <= short.declared_tail());
        assert!(short.declared_tail() > 0.0);
    }

    #[test]
    fn default_truncation_keeps_tail_negligible() {
        let h = impulse_response(&demo_noise_filter::<f64>(), 1e-12).unwrap();
        let n = 64usize;
        let k_max = default_truncation_blocks(&h, n);
        assert!(k_max >= n + 50);
        let op = filter_dft_operator(&h, n, 5, k_max).unwrap();
        assert!(op.declared_tail() <= 1e-4 * op.frobenius());

        let fir = impulse_response(&RationalTransferFunction::<f64>::identity(1), 1e-12).unwrap();
        let k_max = default_truncation_blocks(&fir, n);
        let op = filter_dft_operator(&fir, n, 5, k_max).unwrap();
        assert_eq!(op.declared_tail(), 0.0);
    }

    #[test]
    fn zero_operator_samples_are_zero() {
        let op = TruncatedOperator::from_matrix(RMatrix::zeros(2, 8), 1, 0.0).unwrap();
        let samples = sample_quadratic_form(&op, NoiseLaw::Gaussian, 1.0, 100, 3);
        assert!(samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_mean_matches_frobenius_identity() {
        let op = identity_operator(16);
        let sigma = 0.7f64;
        let n_trials = 100_000usize;
        let samples = sample_quadratic_form(&op, NoiseLaw::Gaussian, sigma, n_trials, 11);
        let mean: f64 = samples.iter().sum::<f64>() / n_trials as f64;
        let expected = sigma * sigma * op.frobenius() * op.frobenius();
        let var: f64 =
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_trials as f64 - 1.0);
        let std_err = (var / n_trials as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * std_err,
            "mean {mean}, expected {expected}, se {std_err}"
        );
    }

    /// Standard normal upper tail by Simpson integration (test oracle).
    fn normal_upper_tail(a: f64) -> f64 {
        if a >= 12.0 {
            return 0.0;
        }
        let steps = 20_000usize;
        let hi = 12.0f64;
        let h = (hi - a) / steps as f64;
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = phi(a) + phi(hi);
        for i in 1..steps {
            let x = a + i as f64 * h;
            acc += phi(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn scalar_gaussian_samples_follow_chi_square_tail() {
        // 1x1 operator a: samples are a^2 sigma^2 chi^2_1; empirical
        // deviation frequencies match the exact tail within Monte Carlo
        // error.
        let a = 1.5f64;
        let op =
            TruncatedOperator::from_matrix(RMatrix::from_fn(1, 1, |_, _| a), 1, 0.0).unwrap();
        let n_trials = 100_000usize;
        let samples = sample_quadratic_form(&op, NoiseLaw::Gaussian, 1.0, n_trials, 29);
        let scale = a * a;
        for alpha in [0.5f64, 1.0, 2.0] {
            // P(|chi^2_1 - 1| > alpha) = P(z^2 > 1 + alpha) + P(z^2 < 1 - alpha).
            let upper = 2.0 * normal_upper_tail((1.0 + alpha).sqrt());
            let lower = if alpha < 1.0 {
                1.0 - 2.0 * normal_upper_tail((1.0 - alpha).sqrt())
            } else {
                0.0
            };
            let exact = upper + lower;
            let empirical = samples
                .iter()
                .filter(|&&v| (v - scale).abs() > alpha * scale)
                .count() as f64
                / n_trials as f64;
            let se = (exact * (1.0 - exact) / n_trials as f64).sqrt().max(1e-6);
            assert!(
                (empirical - exact).abs() <= 4.0 * se,
                "alpha {alpha}: empirical {empirical}, exact {exact}"
            );
        }
    }

    #[test]
    fn quadratic_form_tails_hold_for_identity_gaussian() {
        let op = identity_operator(16);
        let check = verify_quadratic_form_tails(
            &op,
            NoiseLaw::Gaussian,
            1.0,
            &[0.5, 1.0, 2.0, 4.0],
            20_000,
            17,
        );
        assert!(check.pass, "rows {:?}", check.rows);
        // Huge deviations never happen and the bound is trivially met.
        let far = verify_quadratic_form_tails(&op, NoiseLaw::Gaussian, 1.0, &[50.0], 2_000, 18);
        assert_eq!(far.rows[0].empirical, 0.0);
        assert!(far.pass);
    }

    #[test]
    fn quadratic_form_tails_hold_for_dense_rademacher() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let matrix = RMatrix::from_fn(8, 64, |_, _| if rng.random::<bool>() { 0.25 } else { -0.25 });
        let op = TruncatedOperator::from_matrix(matrix, 1, 0.0).unwrap();
        let check = verify_quadratic_form_tails(
            &op,
            NoiseLaw::Rademacher,
            1.0,
            &[0.5, 1.0, 2.0, 4.0],
            20_000,
            23,
        );
        assert!(check.pass, "rows {:?}", check.rows);
    }

    #[test]
    fn empirical_tail_is_monotone_in_alpha() {
        let op = identity_operator(12);
        let check = verify_quadratic_form_tails(
            &op,
            NoiseLaw::Uniform,
            1.0,
            &[0.25, 0.5, 1.0, 2.0],
            10_000,
            31,
        );
        for pair in check.rows.windows(2) {
            let slack = 3.0 * (pair[0].empirical / 10_000.0f64).sqrt().max(1e-3);
            assert!(pair[1].empirical <= pair[0].empirical + slack);
        }
    }

    fn ar1_noise_spec(noise_std: f64) -> SimulationSpec<f64> {
        SimulationSpec::new(
            RationalTransferFunction::<f64>::identity(1),
            demo_noise_filter::<f64>(),
            noise_std,
            NoiseLaw::Gaussian,
        )
        .unwrap()
    }

    #[test]
    fn noise_norm_tails_hold_for_ar1() {
        let spec = ar1_noise_spec(0.1f64.sqrt());
        let check =
            verify_noise_norm_tails(&spec, 64, 3, &[1.0, 2.0, 3.0], 20_000, 41).unwrap();
        assert!(check.pass, "rows {:?}, mean_pass {}", check.rows, check.mean_pass);
        assert!((check.mean_sq - check.trace_phi).abs() <= 3.0 * check.mean_sq_std_err);
    }

    #[test]
    fn noise_norm_huge_deviation_never_happens() {
        let spec = ar1_noise_spec(0.1f64.sqrt());
        let check = verify_noise_norm_tails(&spec, 32, 1, &[40.0], 2_000, 43).unwrap();
        assert_eq!(check.rows[0].empirical, 0.0);
        assert!(check.rows[0].pass);
    }

    #[test]
    fn noiseless_spec_is_degenerate() {
        let spec = ar1_noise_spec(0.0);
        assert!(matches!(
            verify_noise_norm_tails(&spec, 32, 1, &[1.0], 10, 5),
            Err(Error::ZeroNoise)
        ));
    }
}
