//! Linear time-invariant systems as rational transfer functions in the
//! backward-shift operator, plus simulation and noise statistics.
//!
//! A system is a matrix of scalar rational entries `b(q^-1)/a(q^-1)` with a
//! monic, exponentially stable denominator. Exponential stability implies the
//! strict-stability functional `sum_t t * ||g_t||` is finite, which is what
//! every downstream error certificate consumes.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::PeriodicExcitation;
use crate::linalg::{CMatrix, RMatrix};
use crate::scalar::{lit, Scalar};
use crate::seed::derive_seed;

/// Default relative tolerance for impulse-response truncation.
pub const DEFAULT_IMPULSE_TOL_REL: f64 = 1e-10;

const SIM_NOISE_STREAM: u64 = 0x73;

/// Scalar rational transfer function `b(q^-1) / a(q^-1)`.
///
/// Coefficients are stored in backward-shift order: index `s` holds the
/// coefficient of `q^-s`. The denominator is normalized to be monic at
/// construction and all poles must lie strictly inside the unit circle.
#[derive(Clone, Debug, PartialEq)]
pub struct SisoRational<T> {
    numerator: Vec<T>,
    denominator: Vec<T>,
    max_pole_modulus: T,
}

impl<T: Scalar> SisoRational<T> {
    pub fn new(numerator: Vec<T>, denominator: Vec<T>) -> Result<Self> {
        if denominator.is_empty() {
            return Err(Error::InvalidCoefficients {
                context: "denominator must have at least the q^0 coefficient".into(),
            });
        }
        let lead = denominator[0];
        if lead == T::zero() {
            return Err(Error::InvalidCoefficients {
                context: "denominator leading coefficient a_0 must be nonzero".into(),
            });
        }
        // Normalize to a monic denominator; this leaves the transfer function
        // unchanged.
        let denominator: Vec<T> = denominator.iter().map(|&a| a / lead).collect();
        let numerator: Vec<T> = numerator.iter().map(|&b| b / lead).collect();
        let poles = denominator_roots(&denominator);
        let max_pole_modulus = poles
            .iter()
            .map(|p| p.norm())
            .fold(T::zero(), |a, b| a.max(b));
        if max_pole_modulus >= T::one() {
            return Err(Error::NotStable {
                modulus: max_pole_modulus.as_f64(),
            });
        }
        Ok(Self {
            numerator,
            denominator,
            max_pole_modulus,
        })
    }

    /// Static gain `c` (an FIR system with a single tap at lag zero).
    pub fn gain(value: T) -> Self {
        Self {
            numerator: vec![value],
            denominator: vec![T::one()],
            max_pole_modulus: T::zero(),
        }
    }

    /// The zero system.
    pub fn zero() -> Self {
        Self::gain(T::zero())
    }

    /// Pure delay `q^-1`.
    pub fn delay() -> Self {
        Self {
            numerator: vec![T::zero(), T::one()],
            denominator: vec![T::one()],
            max_pole_modulus: T::zero(),
        }
    }

    pub fn numerator(&self) -> &[T] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[T] {
        &self.denominator
    }

    pub fn max_pole_modulus(&self) -> T {
        self.max_pole_modulus
    }

    pub fn poles(&self) -> Vec<Complex<T>> {
        denominator_roots(&self.denominator)
    }

    /// Evaluate `b(e^{-j omega}) / a(e^{-j omega})` exactly from the
    /// coefficient lists.
    pub fn evaluate(&self, omega: T) -> Complex<T> {
        let z = Complex::from_polar(T::one(), -omega);
        let num = horner(&self.numerator, z);
        let den = horner(&self.denominator, z);
        num / den
    }

    /// Impulse-response coefficient recursion up to `horizon` inclusive.
    fn impulse_coefficients(&self, horizon: usize) -> Vec<T> {
        let mut g = vec![T::zero(); horizon + 1];
        for t in 0..=horizon {
            let mut acc = if t < self.numerator.len() {
                self.numerator[t]
            } else {
                T::zero()
            };
            for (s, &a) in self.denominator.iter().enumerate().skip(1) {
                if s <= t {
                    acc = acc - a * g[t - s];
                }
            }
            g[t] = acc;
        }
        g
    }

    fn scaled(&self, factor: T) -> Self {
        Self {
            numerator: self.numerator.iter().map(|&b| b * factor).collect(),
            denominator: self.denominator.clone(),
            max_pole_modulus: self.max_pole_modulus,
        }
    }
}

fn horner<T: Scalar>(coeffs: &[T], z: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &c in coeffs.iter().rev() {
        acc = acc * z + Complex::new(c, T::zero());
    }
    acc
}

/// Roots of `z^na * a(z^-1)`, i.e. the poles of `1 / a(q^-1)`.
fn denominator_roots<T: Scalar>(den: &[T]) -> Vec<Complex<T>> {
    // Ascending coefficients of the polynomial in z are the reversed list.
    let ascending: Vec<T> = den.iter().rev().copied().collect();
    polynomial_roots(&ascending)
}

/// All complex roots of `c_0 + c_1 z + ... + c_n z^n` by the Durand-Kerner
/// iteration. The leading coefficient must be nonzero.
pub fn polynomial_roots<T: Scalar>(ascending: &[T]) -> Vec<Complex<T>> {
    let mut coeffs: Vec<T> = ascending.to_vec();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == T::zero() {
        coeffs.pop();
    }
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let lead = *coeffs.last().unwrap();
    let monic: Vec<Complex<T>> = coeffs
        .iter()
        .map(|&c| Complex::new(c / lead, T::zero()))
        .collect();
    if degree == 1 {
        return vec![-monic[0]];
    }
    let eval = |z: Complex<T>| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for c in monic.iter().rev() {
            acc = acc * z + *c;
        }
        acc
    };
    let base = Complex::new(lit::<T>(0.4), lit::<T>(0.9));
    let mut roots: Vec<Complex<T>> = (0..degree)
        .map(|k| base.powu(k as u32 + 1))
        .collect();
    let tol = T::epsilon() * lit(64.0);
    for _ in 0..512 {
        let mut worst = T::zero();
        for i in 0..degree {
            let mut denom = Complex::new(T::one(), T::zero());
            for j in 0..degree {
                if i != j {
                    denom = denom * (roots[i] - roots[j]);
                }
            }
            if denom.norm_sqr() == T::zero() {
                // Perturb coincident iterates.
                roots[i] = roots[i] + Complex::new(tol, tol);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] = roots[i] - step;
            worst = worst.max(step.norm());
        }
        if worst <= tol {
            break;
        }
    }
    roots
}

/// Rational LTI model: a `d_y x d_u` matrix of scalar rational entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTransferFunction<T> {
    entries: Vec<SisoRational<T>>,
    output_dim: usize,
    input_dim: usize,
}

impl<T: Scalar> RationalTransferFunction<T> {
    /// Single-input single-output system.
    pub fn siso(numerator: Vec<T>, denominator: Vec<T>) -> Result<Self> {
        Ok(Self {
            entries: vec![SisoRational::new(numerator, denominator)?],
            output_dim: 1,
            input_dim: 1,
        })
    }

    /// General system from row-major entries (`entries[r][c]` maps input `c`
    /// to output `r`).
    pub fn from_entries(entries: Vec<Vec<SisoRational<T>>>) -> Result<Self> {
        let output_dim = entries.len();
        if output_dim == 0 {
            return Err(Error::DimensionMismatch {
                context: "transfer function needs at least one row".into(),
            });
        }
        let input_dim = entries[0].len();
        if input_dim == 0 || entries.iter().any(|row| row.len() != input_dim) {
            return Err(Error::DimensionMismatch {
                context: "transfer function rows must be non-empty and equal length".into(),
            });
        }
        Ok(Self {
            entries: entries.into_iter().flatten().collect(),
            output_dim,
            input_dim,
        })
    }

    /// Identity passthrough of dimension `d`.
    pub fn identity(d: usize) -> Self {
        let mut rows = Vec::with_capacity(d);
        for r in 0..d {
            let mut row = Vec::with_capacity(d);
            for c in 0..d {
                row.push(if r == c {
                    SisoRational::gain(T::one())
                } else {
                    SisoRational::zero()
                });
            }
            rows.push(row);
        }
        Self::from_entries(rows).expect("identity dimensions are valid")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn entry(&self, r: usize, c: usize) -> &SisoRational<T> {
        &self.entries[r * self.input_dim + c]
    }

    pub fn max_pole_modulus(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.max_pole_modulus())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Longest tap count over numerator and denominator entries.
    pub fn max_tap_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.numerator().len().max(e.denominator().len()))
            .max()
            .unwrap_or(1)
    }

    /// Frequency response `G(e^{j omega})` evaluated exactly.
    pub fn frequency_response(&self, omega: T) -> CMatrix<T> {
        CMatrix::from_fn(self.output_dim, self.input_dim, |r, c| self.entry(r, c).evaluate(omega))
    }

    /// Scale every output by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            entries: self.entries.iter().map(|e| e.scaled(factor)).collect(),
            output_dim: self.output_dim,
            input_dim: self.input_dim,
        }
    }
}

/// Frequency response as a free function.
pub fn frequency_response<T: Scalar>(tf: &RationalTransferFunction<T>, omega: T) -> CMatrix<T> {
    tf.frequency_response(omega)
}

/// Geometric envelope `||g_t|| <= scale * ratio^t` certified over a fitted
/// horizon; closed-form tail sums hang off this.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricEnvelope<T> {
    scale: T,
    ratio: T,
}

impl<T: Scalar> GeometricEnvelope<T> {
    pub fn new(scale: T, ratio: T) -> Self {
        Self { scale, ratio }
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn ratio(&self) -> T {
        self.ratio
    }

    /// `sum_{t > horizon} t * scale * ratio^t` in closed form.
    pub fn weighted_tail(&self, horizon: usize) -> T {
        if self.ratio <= T::zero() {
            return T::zero();
        }
        let rho = self.ratio;
        let h = T::from_usize_lossy(horizon);
        let one = T::one();
        let factor = rho.powi(horizon as i32 + 1) * ((h + one) - h * rho) / ((one - rho) * (one - rho));
        self.scale * factor
    }

    /// `sum_{t > horizon} scale * ratio^t` in closed form.
    pub fn mass_tail(&self, horizon: usize) -> T {
        if self.ratio <= T::zero() {
            return T::zero();
        }
        self.scale * self.ratio.powi(horizon as i32 + 1) / (T::one() - self.ratio)
    }
}

/// Truncated impulse response `g_0 .. g_T` with a certified bound on the
/// weighted tail `sum_{t > T} t * ||g_t||`.
#[derive(Clone, Debug)]
pub struct ImpulseResponseTruncation<T> {
    coefficients: Vec<RMatrix<T>>,
    norms: Vec<T>,
    tail_bound: T,
    envelope: GeometricEnvelope<T>,
}

impl<T: Scalar> ImpulseResponseTruncation<T> {
    /// Wrap an explicit FIR coefficient list (for long-FIR approximations of
    /// systems that are not rational). The caller supplies the tail bound.
    pub fn from_coefficients(
        coefficients: Vec<RMatrix<T>>,
        tail_bound: T,
        envelope: GeometricEnvelope<T>,
    ) -> Self {
        assert!(!coefficients.is_empty(), "truncation needs at least g_0");
        let norms = coefficients.iter().map(|g| g.operator_norm()).collect();
        Self {
            coefficients,
            norms,
            tail_bound,
            envelope,
        }
    }

    pub fn horizon(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[RMatrix<T>] {
        &self.coefficients
    }

    pub fn coefficient(&self, t: usize) -> &RMatrix<T> {
        &self.coefficients[t]
    }

    /// Cached operator norms `||g_t||`.
    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn envelope(&self) -> GeometricEnvelope<T> {
        self.envelope
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients[0].rows()
    }

    pub fn input_dim(&self) -> usize {
        self.coefficients[0].cols()
    }
}

/// Default absolute truncation tolerance: relative to the first nonzero
/// coefficient magnitude.
pub fn default_impulse_tolerance<T: Scalar>(tf: &RationalTransferFunction<T>) -> T {
    let probe = 4 * tf.max_tap_len() + 4;
    let mut leading = T::zero();
    for r in 0..tf.output_dim() {
        for c in 0..tf.input_dim() {
            for &g in tf.entry(r, c).impulse_coefficients(probe).iter() {
                if g != T::zero() {
                    leading = leading.max(g.abs());
                    break;
                }
            }
        }
    }
    if leading == T::zero() {
        leading = T::one();
    }
    leading * lit(DEFAULT_IMPULSE_TOL_REL)
}

/// Truncate the impulse response of `tf` so the certified weighted tail
/// `sum_{t > T} t * ||g_t||` is at most `tol`.
pub fn impulse_response<T: Scalar>(
    tf: &RationalTransferFunction<T>,
    tol: T,
) -> Result<ImpulseResponseTruncation<T>> {
    if tol <= T::zero() {
        return Err(Error::InvalidCoefficients {
            context: "truncation tolerance must be positive".into(),
        });
    }
    let rho = tf.max_pole_modulus();
    if rho >= T::one() {
        return Err(Error::NotStable {
            modulus: rho.as_f64(),
        });
    }
    let (d_y, d_u) = (tf.output_dim(), tf.input_dim());

    if rho == T::zero() {
        // FIR: every entry has all poles at the origin, so the response is
        // exactly zero beyond the longest numerator.
        let horizon = tf
            .entries
            .iter()
            .map(|e| e.numerator().len().saturating_sub(1))
            .max()
            .unwrap_or(0);
        let per_entry: Vec<Vec<T>> = tf
            .entries
            .iter()
            .map(|e| e.impulse_coefficients(horizon))
            .collect();
        let coefficients = assemble_matrices(&per_entry, horizon, d_y, d_u);
        let scale = coefficients
            .iter()
            .map(|g| g.operator_norm())
            .fold(T::zero(), |a, b| a.max(b));
        return Ok(ImpulseResponseTruncation::from_coefficients(
            coefficients,
            T::zero(),
            GeometricEnvelope::new(scale, T::zero()),
        ));
    }

    // Envelope ratio sits strictly between the slowest pole and 1 so that
    // repeated-pole polynomial growth is eventually absorbed.
    let ratio = rho + (T::one() - rho) / lit(8.0);
    let mut horizon = 16 * tf.max_tap_len().max(4);
    let cap = 1usize << 22;
    loop {
        let per_entry: Vec<Vec<T>> = tf
            .entries
            .iter()
            .map(|e| e.impulse_coefficients(horizon))
            .collect();
        let coefficients = assemble_matrices(&per_entry, horizon, d_y, d_u);
        let norms: Vec<T> = coefficients.iter().map(|g| g.operator_norm()).collect();
        let mut scale = T::zero();
        let mut power = T::one();
        for &norm in &norms {
            if power > T::zero() {
                scale = scale.max(norm / power);
            }
            power = power * ratio;
        }
        let envelope = GeometricEnvelope::new(scale, ratio);
        let tail = envelope.weighted_tail(horizon);
        if tail <= tol {
            return Ok(ImpulseResponseTruncation {
                coefficients,
                norms,
                tail_bound: tail,
                envelope,
            });
        }
        horizon *= 2;
        if horizon > cap {
            return Err(Error::NoConvergence { horizon: cap });
        }
    }
}

fn assemble_matrices<T: Scalar>(
    per_entry: &[Vec<T>],
    horizon: usize,
    d_y: usize,
    d_u: usize,
) -> Vec<RMatrix<T>> {
    (0..=horizon)
        .map(|t| RMatrix::from_fn(d_y, d_u, |r, c| per_entry[r * d_u + c][t]))
        .collect()
}

/// Upper estimate of the strict-stability functional
/// `sum_t t * ||g_t||`: the truncated sum plus the certified tail.
pub fn strict_stability_norm<T: Scalar>(ir: &ImpulseResponseTruncation<T>) -> T {
    let mut total = T::zero();
    for (t, &norm) in ir.norms().iter().enumerate() {
        total = total + T::from_usize_lossy(t) * norm;
    }
    total + ir.tail_bound()
}

/// Lipschitz constant of the frequency response: the derivative with respect
/// to frequency is bounded by the strict-stability functional, so this is the
/// same number under a name the certificate code reads naturally.
pub fn lipschitz_bound<T: Scalar>(ir: &ImpulseResponseTruncation<T>) -> T {
    strict_stability_norm(ir)
}

/// Distribution of the white-noise innovations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLaw {
    Gaussian,
    Rademacher,
    Uniform,
}

impl NoiseLaw {
    /// Sub-Gaussian parameter declared for a law with standard deviation
    /// `sigma`: the conservative `sqrt(3) sigma` for the bounded uniform law,
    /// `sigma` for the other two.
    pub fn default_subgaussian<T: Scalar>(self, sigma: T) -> T {
        match self {
            NoiseLaw::Gaussian | NoiseLaw::Rademacher => sigma,
            NoiseLaw::Uniform => sigma * lit::<T>(3.0).sqrt(),
        }
    }

    /// One zero-mean draw with standard deviation `sigma`. Sampling happens
    /// in `f64` so the stream is identical for every scalar type.
    pub fn sample<T: Scalar, R: Rng>(self, rng: &mut R, sigma: T) -> T {
        let raw: f64 = match self {
            NoiseLaw::Gaussian => StandardNormal.sample(rng),
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3.0f64.sqrt(),
        };
        T::from_f64_lossy(raw) * sigma
    }
}

/// Everything a simulation needs: plant, noise filter, innovation law, and
/// burn-in realizing the unknown non-zero past.
#[derive(Clone, Debug)]
pub struct SimulationSpec<T> {
    plant: RationalTransferFunction<T>,
    noise_filter: RationalTransferFunction<T>,
    noise_std: T,
    noise_law: NoiseLaw,
    subgaussian_k: T,
    burn_in: usize,
}

impl<T: Scalar> SimulationSpec<T> {
    pub fn new(
        plant: RationalTransferFunction<T>,
        noise_filter: RationalTransferFunction<T>,
        noise_std: T,
        noise_law: NoiseLaw,
    ) -> Result<Self> {
        if noise_filter.output_dim() != plant.output_dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "noise filter produces {} outputs but the plant has {}",
                    noise_filter.output_dim(),
                    plant.output_dim()
                ),
            });
        }
        if noise_std < T::zero() {
            return Err(Error::InvalidCoefficients {
                context: "noise standard deviation must be nonnegative".into(),
            });
        }
        let burn_in = default_burn_in(&plant, &noise_filter);
        let subgaussian_k = noise_law.default_subgaussian(noise_std);
        Ok(Self {
            plant,
            noise_filter,
            noise_std,
            noise_law,
            subgaussian_k,
            burn_in,
        })
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Declare a custom sub-Gaussian parameter; it must dominate the standard
    /// deviation.
    pub fn with_subgaussian_k(mut self, k: T) -> Result<Self> {
        if k < self.noise_std {
            return Err(Error::InvalidCoefficients {
                context: "sub-Gaussian parameter must be at least the standard deviation".into(),
            });
        }
        self.subgaussian_k = k;
        Ok(self)
    }

    pub fn plant(&self) -> &RationalTransferFunction<T> {
        &self.plant
    }

    pub fn noise_filter(&self) -> &RationalTransferFunction<T> {
        &self.noise_filter
    }

    pub fn noise_std(&self) -> T {
        self.noise_std
    }

    pub fn noise_law(&self) -> NoiseLaw {
        self.noise_law
    }

    pub fn subgaussian_k(&self) -> T {
        self.subgaussian_k
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_filter.input_dim()
    }
}

/// Default burn-in: ten time constants of the slowest mode, but never less
/// than the filter memory itself.
pub fn default_burn_in<T: Scalar>(
    plant: &RationalTransferFunction<T>,
    noise_filter: &RationalTransferFunction<T>,
) -> usize {
    let rho = plant.max_pole_modulus().max(noise_filter.max_pole_modulus());
    let taps = plant.max_tap_len().max(noise_filter.max_tap_len());
    let time_constants = (lit::<T>(10.0) / (T::one() - rho)).ceil().as_f64() as usize;
    time_constants.max(taps)
}

/// One recorded experiment: inputs, outputs, and the noise that was added.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub input: Vec<Vec<T>>,
    pub output: Vec<Vec<T>>,
    pub noise: Vec<Vec<T>>,
}

/// The `d_u` independent experiments of one identification run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet<T> {
    experiments: Vec<Trajectory<T>>,
    len: usize,
}

impl<T: Scalar> TrajectorySet<T> {
    pub fn new(experiments: Vec<Trajectory<T>>) -> Result<Self> {
        let len = experiments
            .first()
            .map(|e| e.output.len())
            .ok_or_else(|| Error::DimensionMismatch {
                context: "trajectory set needs at least one experiment".into(),
            })?;
        for e in &experiments {
            if e.input.len() != len || e.output.len() != len || e.noise.len() != len {
                return Err(Error::LengthMismatch {
                    context: "all records in a trajectory set must share one length".into(),
                });
            }
        }
        Ok(Self { experiments, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn experiment_count(&self) -> usize {
        self.experiments.len()
    }

    pub fn experiments(&self) -> &[Trajectory<T>] {
        &self.experiments
    }

    pub fn experiment(&self, i: usize) -> &Trajectory<T> {
        &self.experiments[i]
    }
}

/// Run one scalar rational filter over a full sample array.
fn filter_sequence<T: Scalar>(entry: &SisoRational<T>, input: &[T]) -> Vec<T> {
    let num = entry.numerator();
    let den = entry.denominator();
    let mut out = vec![T::zero(); input.len()];
    for t in 0..input.len() {
        let mut acc = T::zero();
        for (s, &b) in num.iter().enumerate() {
            if s <= t {
                acc = acc + b * input[t - s];
            }
        }
        for (s, &a) in den.iter().enumerate().skip(1) {
            if s <= t {
                acc = acc - a * out[t - s];
            }
        }
        out[t] = acc;
    }
    out
}

/// Apply a matrix transfer function to a multichannel record
/// (`input[t][channel]`, starting from rest).
fn apply_system<T: Scalar>(tf: &RationalTransferFunction<T>, input: &[Vec<T>]) -> Vec<Vec<T>> {
    let len = input.len();
    let mut output = vec![vec![T::zero(); tf.output_dim()]; len];
    for c in 0..tf.input_dim() {
        let channel: Vec<T> = input.iter().map(|row| row[c]).collect();
        for r in 0..tf.output_dim() {
            let entry = tf.entry(r, c);
            if entry.numerator().iter().all(|&b| b == T::zero()) {
                continue;
            }
            let filtered = filter_sequence(entry, &channel);
            for (t, &v) in filtered.iter().enumerate() {
                output[t][r] = output[t][r] + v;
            }
        }
    }
    output
}

/// Simulate `d_u` independent experiments of length `n`.
///
/// The periodic input is active from `t = -burn_in` on, so the recorded
/// window starts from the stationary regime with a genuinely non-zero past;
/// noise streams are independent per experiment and derived deterministically
/// from `(seed, experiment)`.
pub fn simulate<T: Scalar>(
    spec: &SimulationSpec<T>,
    excitation: &PeriodicExcitation<T>,
    n: usize,
    seed: u64,
) -> Result<TrajectorySet<T>> {
    if excitation.experiment_count() != spec.plant.input_dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "excitation provides {} experiments but the plant needs {}",
                excitation.experiment_count(),
                spec.plant.input_dim()
            ),
        });
    }
    if excitation.input_dim() != spec.plant.input_dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "excitation channels ({}) do not match the plant input dimension ({})",
                excitation.input_dim(),
                spec.plant.input_dim()
            ),
        });
    }
    if n == 0 {
        return Err(Error::LengthMismatch {
            context: "record length must be at least one sample".into(),
        });
    }
    let burn = spec.burn_in;
    let total = burn + n;
    let d_e = spec.noise_dim();
    let mut experiments = Vec::with_capacity(excitation.experiment_count());
    for i in 0..excitation.experiment_count() {
        // Input over [-burn_in, n): the same period, phase-aligned so that
        // t = 0 lands on sample 0 of the stored period.
        let input: Vec<Vec<T>> = (0..total)
            .map(|t_abs| excitation.sample_at(i, t_abs as i64 - burn as i64))
            .collect();
        let noiseless = apply_system(&spec.plant, &input);

        let noise = if spec.noise_std == T::zero() {
            vec![vec![T::zero(); spec.plant.output_dim()]; total]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SIM_NOISE_STREAM, i as u64]));
            let innovations: Vec<Vec<T>> = (0..total)
                .map(|_| {
                    (0..d_e)
                        .map(|_| spec.noise_law.sample(&mut rng, spec.noise_std))
                        .collect()
                })
                .collect();
            apply_system(&spec.noise_filter, &innovations)
        };

        let mut output = Vec::with_capacity(n);
        let mut noise_rec = Vec::with_capacity(n);
        let mut input_rec = Vec::with_capacity(n);
        for t in burn..total {
            let y: Vec<T> = noiseless[t]
                .iter()
                .zip(noise[t].iter())
                .map(|(&a, &b)| a + b)
                .collect();
            output.push(y);
            noise_rec.push(noise[t].clone());
            input_rec.push(input[t].clone());
        }
        experiments.push(Trajectory {
            input: input_rec,
            output,
            noise: noise_rec,
        });
    }
    TrajectorySet::new(experiments)
}

/// Autocovariance sequence `R_0 .. R_tau_max` of the filtered noise, with a
/// certified bound on the weighted tail `sum_{t > tau_max} t * ||R_t||`.
#[derive(Clone, Debug)]
pub struct AutocovarianceSequence<T> {
    lags: Vec<RMatrix<T>>,
    weighted_tail: T,
}

impl<T: Scalar> AutocovarianceSequence<T> {
    pub fn lag_count(&self) -> usize {
        self.lags.len()
    }

    pub fn lag(&self, tau: usize) -> &RMatrix<T> {
        &self.lags[tau]
    }

    pub fn lags(&self) -> &[RMatrix<T>] {
        &self.lags
    }

    pub fn weighted_tail(&self) -> T {
        self.weighted_tail
    }

    /// Upper estimate of the strict-stability functional
    /// `sum_t t * ||R_t||`. Certified as an upper bound, so the truncated
    /// sum carries a relative headroom dominating its summation rounding.
    pub fn weighted_norm(&self) -> T {
        let mut total = T::zero();
        for (tau, r) in self.lags.iter().enumerate() {
            total = total + T::from_usize_lossy(tau) * r.operator_norm();
        }
        (total + self.weighted_tail) * (T::one() + lit(1e-12))
    }
}

/// Noise autocovariance `R_tau = sigma_e^2 sum_s h_{s+tau} h_s^T` from the
/// truncated filter response.
pub fn noise_autocovariance<T: Scalar>(
    spec: &SimulationSpec<T>,
    tau_max: usize,
) -> Result<AutocovarianceSequence<T>> {
    let tol = default_impulse_tolerance(&spec.noise_filter);
    let h = impulse_response(&spec.noise_filter, tol)?;
    let var = spec.noise_std * spec.noise_std;
    let horizon = h.horizon();
    // Compute exact lags out to the filter horizon so the tail term only has
    // to cover what the envelope certifies.
    let hi = tau_max.max(horizon);
    let mut all = Vec::with_capacity(hi + 1);
    for tau in 0..=hi {
        let mut r = RMatrix::zeros(h.output_dim(), h.output_dim());
        if tau <= horizon {
            for s in 0..=(horizon - tau) {
                let prod = matmul_transposed(h.coefficient(s + tau), h.coefficient(s));
                r = r.add(&prod);
            }
        }
        all.push(r.scale(var));
    }
    let env = h.envelope();
    // ||R_tau|| <= sigma^2 * C^2 * rho^tau / (1 - rho^2) for tau beyond the
    // computed range.
    let mut weighted_tail = T::zero();
    for (tau, r) in all.iter().enumerate().skip(tau_max + 1) {
        weighted_tail = weighted_tail + T::from_usize_lossy(tau) * r.operator_norm();
    }
    if env.ratio() > T::zero() {
        let rho2 = env.ratio() * env.ratio();
        let factor = var * env.scale() * env.scale() / (T::one() - rho2);
        weighted_tail =
            weighted_tail + factor * GeometricEnvelope::new(T::one(), env.ratio()).weighted_tail(hi);
    }
    all.truncate(tau_max + 1);
    Ok(AutocovarianceSequence {
        lags: all,
        weighted_tail,
    })
}

/// Smallest lag count whose certified tail drops below `tol`.
pub fn autocovariance_lags_for_tolerance<T: Scalar>(
    spec: &SimulationSpec<T>,
    tol: T,
) -> Result<usize> {
    let ir_tol = default_impulse_tolerance(&spec.noise_filter);
    let h = impulse_response(&spec.noise_filter, ir_tol)?;
    let env = h.envelope();
    if env.ratio() == T::zero() {
        return Ok(h.horizon());
    }
    let var = spec.noise_std * spec.noise_std;
    let factor = var * env.scale() * env.scale() / (T::one() - env.ratio() * env.ratio());
    let unit = GeometricEnvelope::new(T::one(), env.ratio());
    let mut tau = h.horizon().max(4);
    while factor * unit.weighted_tail(tau) > tol && tau < (1 << 22) {
        tau *= 2;
    }
    // Shrink back down while the bound still holds.
    while tau > 1 && factor * unit.weighted_tail(tau - 1) <= tol {
        tau -= 1;
    }
    Ok(tau)
}

/// `a * b^T` for real matrices.
fn matmul_transposed<T: Scalar>(a: &RMatrix<T>, b: &RMatrix<T>) -> RMatrix<T> {
    assert_eq!(a.cols(), b.cols());
    RMatrix::from_fn(a.rows(), b.rows(), |r, c| {
        let mut acc = T::zero();
        for k in 0..a.cols() {
            acc = acc + a.get(r, k) * b.get(c, k);
        }
        acc
    })
}

/// The fourth-order resonant plant used throughout the bundled presets.
pub fn demo_plant<T: Scalar>() -> RationalTransferFunction<T> {
    RationalTransferFunction::siso(
        vec![T::zero(), lit(0.12), lit(0.18)],
        vec![T::one(), lit(-1.4), lit(1.443), lit(-1.123), lit(0.7729)],
    )
    .expect("demo plant is stable")
}

/// First-order smoothing filter used as the noise model in the presets.
pub fn demo_noise_filter<T: Scalar>() -> RationalTransferFunction<T> {
    RationalTransferFunction::siso(vec![T::one()], vec![T::one(), lit(-0.2)])
        .expect("demo filter is stable")
}
