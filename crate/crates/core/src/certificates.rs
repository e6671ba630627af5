//! Finite-sample error certificates evaluated as numbers.
//!
//! All of the closed-form bounds live here: the deterministic transient
//! bound, the spectrum aliasing gap, the per-frequency grid error bound, the
//! all-frequency bound for the naive estimator, and the two concentration
//! tails (the Hanson-Wright tail for quadratic forms and the noise-norm
//! tail derived from it). Raw tail values are returned unclipped so tests
//! can compare exponents; clip at the reporting layer with
//! [`clip_probability`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{lit, Scalar};

/// The universal constant of the noise concentration bound,
/// `12 * sqrt(4 ln 9)`.
pub fn universal_constant<T: Scalar>() -> T {
    lit::<T>(12.0) * (lit::<T>(4.0) * lit::<T>(9.0).ln()).sqrt()
}

/// Clip a raw tail value into `[0, 1]` for reporting as a probability.
pub fn clip_probability<T: Scalar>(raw: T) -> T {
    raw.min(T::one())
}

/// Uniform bound on the deterministic transient of an `N`-point DFT record:
/// `2 ||G||_* D_u / sqrt(N)`.
pub fn transient_bound<T: Scalar>(g_star: T, input_bound: T, n: usize) -> T {
    lit::<T>(2.0) * g_star * input_bound / T::from_usize_lossy(n).sqrt()
}

/// Uniform bound on the gap between the exact and finite-record noise
/// spectra: `2 ||R||_* / N`.
pub fn spectrum_gap_bound<T: Scalar>(r_star: T, n: usize) -> T {
    lit::<T>(2.0) * r_star / T::from_usize_lossy(n)
}

/// Inputs shared by the per-frequency grid bound.
#[derive(Clone, Debug)]
pub struct GridBoundParams<'a, T> {
    pub delta: T,
    pub m: usize,
    pub n: usize,
    pub d_u: usize,
    pub d_y: usize,
    pub subgaussian_k: T,
    pub sigma_e: T,
    pub input_bound: T,
    pub g_star: T,
    /// Excitation levels `sigma_{u,l}` for every grid index.
    pub sigma_u: &'a [T],
    /// Finite-record noise spectra `Phi_{v,N}(l N_p)` for every grid index.
    pub phi: &'a [CMatrix<T>],
}

/// One per-frequency certificate entry.
#[derive(Clone, Copy, Debug)]
pub struct GridBoundEntry<T> {
    pub ell: usize,
    pub omega: T,
    pub sigma_u: T,
    /// Per-frequency SNR; `None` in the noiseless case.
    pub snr: Option<T>,
    pub transient_term: T,
    pub noise_term: T,
    pub epsilon: T,
}

/// Evaluate the per-frequency grid error bound: with probability `1 - delta`,
/// simultaneously for every grid index `l`,
/// `error_l <= 2 ||G||_* D_u sqrt(M) / (sigma_l N)
///            + sqrt(M/N) SNR_l^{-1} (sqrt(d_y) + c (K^2/sigma_e^2) sqrt(d_u + ln(M/delta)))`.
pub fn etfe_grid_bound<T: Scalar>(params: &GridBoundParams<'_, T>) -> Result<Vec<GridBoundEntry<T>>> {
    let delta = params.delta;
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::InvalidDelta {
            delta: delta.as_f64(),
        });
    }
    let (m, n) = (params.m, params.n);
    if m == 0 || n % m != 0 {
        return Err(Error::GridMismatch { m, n });
    }
    if params.sigma_u.len() != m || params.phi.len() != m {
        return Err(Error::LengthMismatch {
            context: "grid bound needs sigma_u and Phi at every grid index".into(),
        });
    }
    let m_t = T::from_usize_lossy(m);
    let n_t = T::from_usize_lossy(n);
    let c = universal_constant::<T>();
    let log_factor = (m_t / delta).ln();
    let dim_factor = (T::from_usize_lossy(params.d_u) + log_factor).sqrt();
    let sqrt_dy = T::from_usize_lossy(params.d_y).sqrt();
    let mut entries = Vec::with_capacity(m);
    for ell in 0..m {
        let sigma = params.sigma_u[ell];
        if !(sigma > T::zero()) {
            return Err(Error::MissingSigmaU { index: ell });
        }
        let transient_term = lit::<T>(2.0) * params.g_star * params.input_bound * m_t.sqrt() / (sigma * n_t);
        let phi_norm = params.phi[ell].operator_norm();
        let (snr, noise_term) = if phi_norm == T::zero() {
            // Noiseless record: the stochastic term vanishes.
            (None, T::zero())
        } else {
            let snr = sigma / phi_norm.sqrt();
            let k_ratio =
                params.subgaussian_k * params.subgaussian_k / (params.sigma_e * params.sigma_e);
            let noise = (m_t / n_t).sqrt() / snr * (sqrt_dy + c * k_ratio * dim_factor);
            (Some(snr), noise)
        };
        entries.push(GridBoundEntry {
            ell,
            omega: T::TAU() * T::from_usize_lossy(ell) / m_t,
            sigma_u: sigma,
            snr,
            transient_term,
            noise_term,
            epsilon: transient_term + noise_term,
        });
    }
    Ok(entries)
}

/// Term breakdown of the all-frequency bound.
#[derive(Clone, Copy, Debug)]
pub struct HinfBound<T> {
    /// Lipschitz discretization term `pi c1^{-1} N^{-1/3} ||G||_*`.
    pub lipschitz_term: T,
    /// Transient term `c1^{1/2} N^{-5/6} 2 ||G||_* D_u / sigma_min`.
    pub transient_term: T,
    /// Stochastic term
    /// `c1^{1/2} c N^{-1/3} SNR_min^{-1} (sqrt(d_y) + (K^2/sigma_e^2) sqrt(d_u + ln(N/delta)))`.
    pub noise_term: T,
    pub total: T,
    /// The grid size `M = c1 N^{1/3}` the bound was evaluated at.
    pub m: usize,
}

/// Parameters of the all-frequency bound for the naive estimator.
#[derive(Clone, Copy, Debug)]
pub struct HinfBoundParams<T> {
    pub c1: T,
    pub n: usize,
    pub d_u: usize,
    pub d_y: usize,
    pub subgaussian_k: T,
    pub sigma_e: T,
    pub input_bound: T,
    pub g_star: T,
    /// Worst-case SNR over the grid.
    pub worst_snr: T,
    /// Worst-case excitation level over the grid.
    pub worst_sigma_u: T,
    pub delta: T,
}

/// Evaluate the all-frequency bound at `M = c1 N^{1/3}`. The caller must pick
/// `c1` so that `M` and `N/M` are integers; a feasibility search lives in
/// [`feasible_hinf_grid`].
pub fn hinf_bound<T: Scalar>(params: &HinfBoundParams<T>) -> Result<HinfBound<T>> {
    if !(params.delta > T::zero() && params.delta < T::one()) {
        return Err(Error::InvalidDelta {
            delta: params.delta.as_f64(),
        });
    }
    let n_t = T::from_usize_lossy(params.n);
    let cube_root = n_t.powf(T::one() / lit(3.0));
    let m_real = params.c1 * cube_root;
    let m = m_real.round().as_f64() as usize;
    let tol = lit::<T>(1e-6) * m_real.abs().max(T::one());
    if m == 0 || (m_real - T::from_usize_lossy(m)).abs() > tol || params.n % m != 0 {
        return Err(Error::GridInfeasible {
            c1: params.c1.as_f64(),
            n: params.n,
        });
    }
    let c = universal_constant::<T>();
    let sqrt_c1 = params.c1.sqrt();
    let lipschitz_term = T::PI() / params.c1 * n_t.powf(lit(-1.0 / 3.0)) * params.g_star;
    let transient_term = sqrt_c1
        * n_t.powf(lit(-5.0 / 6.0))
        * lit::<T>(2.0)
        * params.g_star
        * params.input_bound
        / params.worst_sigma_u;
    let k_ratio = params.subgaussian_k * params.subgaussian_k / (params.sigma_e * params.sigma_e);
    let dim_factor = (T::from_usize_lossy(params.d_u) + (n_t / params.delta).ln()).sqrt();
    let noise_term = sqrt_c1 * c * n_t.powf(lit(-1.0 / 3.0)) / params.worst_snr
        * (T::from_usize_lossy(params.d_y).sqrt() + k_ratio * dim_factor);
    Ok(HinfBound {
        lipschitz_term,
        transient_term,
        noise_term,
        total: lipschitz_term + transient_term + noise_term,
        m,
    })
}

/// Search integer `(M, N_p)` pairs near a target record length realizing
/// `M = c1 N^{1/3}` as closely as possible; fails when the best relative
/// error exceeds `tol_rel`.
pub fn feasible_hinf_grid<T: Scalar>(
    c1_target: T,
    n_target: usize,
    tol_rel: T,
) -> Result<(usize, usize, T)> {
    if n_target == 0 {
        return Err(Error::GridInfeasible {
            c1: c1_target.as_f64(),
            n: n_target,
        });
    }
    let mut best: Option<(usize, usize, T, T)> = None;
    let n_t = T::from_usize_lossy(n_target);
    let target_m = c1_target * n_t.powf(T::one() / lit(3.0));
    let hi = (target_m.as_f64() * 4.0).ceil() as usize;
    for m in 1..=hi.min(n_target) {
        let n_p = ((n_target as f64 / m as f64).round() as usize).max(1);
        let n = m * n_p;
        let realized = T::from_usize_lossy(m) / T::from_usize_lossy(n).powf(T::one() / lit(3.0));
        let rel = ((realized - c1_target) / c1_target).abs();
        if best.map(|(_, _, _, b)| rel < b).unwrap_or(true) {
            best = Some((m, n_p, realized, rel));
        }
    }
    match best {
        Some((m, n_p, realized, rel)) if rel <= tol_rel => Ok((m, n_p, realized)),
        _ => Err(Error::GridInfeasible {
            c1: c1_target.as_f64(),
            n: n_target,
        }),
    }
}

/// Raw Hanson-Wright tail for the quadratic form of a map with Frobenius
/// norm `frobenius` and operator norm `operator` under `K^2`-sub-Gaussian
/// inputs, at deviation `alpha * frobenius^2`:
/// `2 exp(-min(alpha^2 F^2 / (144 K^4 op^2), alpha F^2 / (16 sqrt2 K^2 op^2)))`.
pub fn hanson_wright_tail<T: Scalar>(alpha: T, frobenius: T, operator: T, subgaussian_k: T) -> T {
    debug_assert!(operator <= frobenius * (T::one() + lit(1e-9)));
    let f2 = frobenius * frobenius;
    let op2 = operator * operator;
    let k2 = subgaussian_k * subgaussian_k;
    let quad = alpha * alpha * f2 / (lit::<T>(144.0) * k2 * k2 * op2);
    let linear = alpha * f2 / (lit::<T>(16.0) * lit::<T>(2.0).sqrt() * k2 * op2);
    lit::<T>(2.0) * (-quad.min(linear)).exp()
}

/// Deviation threshold where the Hanson-Wright exponent switches from the
/// quadratic to the linear branch: `alpha = 144 K^2 / (16 sqrt 2)`.
pub fn hanson_wright_crossover<T: Scalar>(subgaussian_k: T) -> T {
    lit::<T>(144.0) / (lit::<T>(16.0) * lit::<T>(2.0).sqrt()) * subgaussian_k * subgaussian_k
}

/// Raw tail bound on the deviation of the stacked noise DFT norm from
/// `sqrt(tr Phi)` at scale `2 s sqrt(tr Phi)`:
/// `9^{2 d_u} * 2 exp(-(1/144) s^2 (sigma_e^4/K^4) tr(Phi)/||Phi||)`.
pub fn noise_norm_tail<T: Scalar>(
    s: T,
    subgaussian_k: T,
    sigma_e: T,
    phi: &CMatrix<T>,
    d_u: usize,
) -> T {
    let trace = phi.trace().re;
    let norm = phi.operator_norm();
    let ratio = sigma_e * sigma_e / (subgaussian_k * subgaussian_k);
    let exponent = s * s / lit::<T>(144.0) * ratio * ratio * trace / norm;
    lit::<T>(9.0).powi(2 * d_u as i32) * lit::<T>(2.0) * (-exponent).exp()
}

/// Everything the certificate evaluation produced, ready for export.
#[derive(Clone, Debug)]
pub struct CertificateReport<T> {
    pub delta: T,
    pub m: usize,
    pub n: usize,
    pub n_p: usize,
    pub n_tot: usize,
    pub d_u: usize,
    pub d_y: usize,
    pub universal: T,
    pub subgaussian_k: T,
    pub sigma_e: T,
    pub input_bound: T,
    pub g_star: T,
    pub r_star: T,
    pub worst_snr: Option<T>,
    pub worst_sigma_u: T,
    pub entries: Vec<GridBoundEntry<T>>,
    pub hinf: Option<HinfBound<T>>,
    pub realized_c1: T,
}

impl<T: Scalar> CertificateReport<T> {
    /// Assemble the report: per-frequency entries plus, where the grid is
    /// feasible, the all-frequency bound at the realized `c1 = M N^{-1/3}`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        delta: T,
        d_u: usize,
        d_y: usize,
        subgaussian_k: T,
        sigma_e: T,
        input_bound: T,
        g_star: T,
        r_star: T,
        m: usize,
        n: usize,
        sigma_u: &[T],
        phi: &[CMatrix<T>],
    ) -> Result<Self> {
        let params = GridBoundParams {
            delta,
            m,
            n,
            d_u,
            d_y,
            subgaussian_k,
            sigma_e,
            input_bound,
            g_star,
            sigma_u,
            phi,
        };
        let entries = etfe_grid_bound(&params)?;
        let worst_sigma_u = sigma_u
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| a.min(b));
        let worst_snr = entries
            .iter()
            .filter_map(|e| e.snr)
            .fold(None, |acc: Option<T>, snr| {
                Some(acc.map(|a| a.min(snr)).unwrap_or(snr))
            });
        let n_t = T::from_usize_lossy(n);
        let realized_c1 = T::from_usize_lossy(m) / n_t.powf(T::one() / lit(3.0));
        let hinf = worst_snr.and_then(|snr| {
            hinf_bound(&HinfBoundParams {
                c1: realized_c1,
                n,
                d_u,
                d_y,
                subgaussian_k,
                sigma_e,
                input_bound,
                g_star,
                worst_snr: snr,
                worst_sigma_u,
                delta,
            })
            .ok()
        });
        Ok(Self {
            delta,
            m,
            n,
            n_p: n / m,
            n_tot: d_u * n,
            d_u,
            d_y,
            universal: universal_constant(),
            subgaussian_k,
            sigma_e,
            input_bound,
            g_star,
            r_star,
            worst_snr,
            worst_sigma_u,
            entries,
            hinf,
            realized_c1,
        })
    }

    /// Largest per-frequency bound; the certificate for the worst grid error.
    pub fn max_epsilon(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.epsilon)
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn write_json(&self, out: &mut impl std::io::Write) -> Result<()> {
        let doc = self.to_doc();
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// CSV export of the per-frequency table.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "ell,omega,sigma_u,snr,transient_term,noise_term,epsilon")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.ell,
                e.omega.as_f64(),
                e.sigma_u.as_f64(),
                e.snr.map(|s| s.as_f64().to_string()).unwrap_or_default(),
                e.transient_term.as_f64(),
                e.noise_term.as_f64(),
                e.epsilon.as_f64()
            )?;
        }
        Ok(())
    }

    fn to_doc(&self) -> ReportDoc {
        ReportDoc {
            delta: self.delta.as_f64(),
            m: self.m,
            n: self.n,
            n_p: self.n_p,
            n_tot: self.n_tot,
            d_u: self.d_u,
            d_y: self.d_y,
            universal_constant: self.universal.as_f64(),
            subgaussian_k: self.subgaussian_k.as_f64(),
            sigma_e: self.sigma_e.as_f64(),
            input_bound: self.input_bound.as_f64(),
            g_star: self.g_star.as_f64(),
            r_star: self.r_star.as_f64(),
            worst_snr: self.worst_snr.map(|v| v.as_f64()),
            worst_sigma_u: self.worst_sigma_u.as_f64(),
            realized_c1: self.realized_c1.as_f64(),
            max_epsilon: self.max_epsilon().as_f64(),
            hinf: self.hinf.map(|h| HinfDoc {
                lipschitz_term: h.lipschitz_term.as_f64(),
                transient_term: h.transient_term.as_f64(),
                noise_term: h.noise_term.as_f64(),
                total: h.total.as_f64(),
                m: h.m,
            }),
            per_frequency: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    ell: e.ell,
                    omega: e.omega.as_f64(),
                    sigma_u: e.sigma_u.as_f64(),
                    snr: e.snr.map(|v| v.as_f64()),
                    transient_term: e.transient_term.as_f64(),
                    noise_term: e.noise_term.as_f64(),
                    epsilon: e.epsilon.as_f64(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct ReportDoc {
    delta: f64,
    m: usize,
    n: usize,
    n_p: usize,
    n_tot: usize,
    d_u: usize,
    d_y: usize,
    universal_constant: f64,
    subgaussian_k: f64,
    sigma_e: f64,
    input_bound: f64,
    g_star: f64,
    r_star: f64,
    worst_snr: Option<f64>,
    worst_sigma_u: f64,
    realized_c1: f64,
    max_epsilon: f64,
    hinf: Option<HinfDoc>,
    per_frequency: Vec<EntryDoc>,
}

#[derive(Serialize)]
struct HinfDoc {
    lipschitz_term: f64,
    transient_term: f64,
    noise_term: f64,
    total: f64,
    m: usize,
}

#[derive(Serialize)]
struct EntryDoc {
    ell: usize,
    omega: f64,
    sigma_u: f64,
    snr: Option<f64>,
    transient_term: f64,
    noise_term: f64,
    epsilon: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn universal_constant_value() {
        let c: f64 = universal_constant();
        assert!((c - 35.575291376820267).abs() < 1e-10);
        assert!((c / 12.0 - (4.0f64 * 9.0f64.ln()).sqrt()).abs() < 1e-14);
        assert!(c > 0.0);
    }

    #[test]
    fn transient_bound_scaling() {
        assert_eq!(transient_bound(0.0f64, 1.3, 100), 0.0);
        let at_n = transient_bound(2.0f64, 1.3, 500);
        let at_4n = transient_bound(2.0f64, 1.3, 2000);
        assert!((at_n / at_4n - 2.0).abs() < 1e-12);
        // Demo plant at N = 1023 * 8 with the stability functional computed
        // by the impulse-response machinery.
        let plant = crate::lti::demo_plant::<f64>();
        let ir = crate::lti::impulse_response(&plant, crate::lti::default_impulse_tolerance(&plant))
            .unwrap();
        let g_star = crate::lti::strict_stability_norm(&ir);
        let n = 1023 * 8;
        let value = transient_bound(g_star, 1.3, n);
        assert!((value - 2.0 * g_star * 1.3 / (n as f64).sqrt()).abs() < 1e-12 * value);
        assert!(value > 0.0 && g_star > 100.0);
    }

    #[test]
    fn spectrum_gap_bound_scaling() {
        assert_eq!(spectrum_gap_bound(0.0f64, 64), 0.0);
        let at_n = spectrum_gap_bound(0.5f64, 100);
        let at_2n = spectrum_gap_bound(0.5f64, 200);
        assert!((at_n / at_2n - 2.0).abs() < 1e-12);
        // First-order filter case: ||R||_* = R_0 * 0.2/0.64.
        let r_star = (0.1f64 / 0.96) * 0.3125;
        let value = spectrum_gap_bound(r_star, 1000);
        assert!((value - 0.0651041666666666 / 1000.0).abs() < 1e-12);
    }

    fn scalar_phi(value: f64) -> CMatrix<f64> {
        CMatrix::from_scalar(Complex::new(value, 0.0))
    }

    fn demo_params<'a>(
        m: usize,
        n: usize,
        delta: f64,
        sigma_u: &'a [f64],
        phi: &'a [CMatrix<f64>],
    ) -> GridBoundParams<'a, f64> {
        GridBoundParams {
            delta,
            m,
            n,
            d_u: 1,
            d_y: 1,
            subgaussian_k: 0.1f64.sqrt(),
            sigma_e: 0.1f64.sqrt(),
            input_bound: 1.3,
            g_star: 40.0,
            sigma_u,
            phi,
        }
    }

    #[test]
    fn grid_bound_doubling_m_scales_noise_by_sqrt2_and_log_factor() {
        let m = 16usize;
        let n = 1024usize;
        let delta = 0.05f64;
        let sigma_small = vec![1.0; m];
        let phi_small: Vec<_> = (0..m).map(|_| scalar_phi(0.15)).collect();
        let small = etfe_grid_bound(&demo_params(m, n, delta, &sigma_small, &phi_small)).unwrap();
        let sigma_large = vec![1.0; 2 * m];
        let phi_large: Vec<_> = (0..2 * m).map(|_| scalar_phi(0.15)).collect();
        let large = etfe_grid_bound(&demo_params(2 * m, n, delta, &sigma_large, &phi_large)).unwrap();
        let ratio = large[0].noise_term / small[0].noise_term;
        // Exact expectation: sqrt(2) modulated by the log factor inside the
        // parenthesis (sqrt(d_y) + c sqrt(d_u + ln(M/delta))).
        let c: f64 = universal_constant();
        let parenthesis = |m: f64| 1.0 + c * (1.0 + (m / delta).ln()).sqrt();
        let expected = 2.0f64.sqrt() * parenthesis(2.0 * m as f64) / parenthesis(m as f64);
        assert!((ratio - expected).abs() < 1e-12, "ratio {ratio} expected {expected}");
        assert!(ratio >= 2.0f64.sqrt());
        assert!(ratio <= 2.0f64.sqrt() * 1.1);
    }

    #[test]
    fn grid_bound_monotone_in_delta() {
        let m = 8usize;
        let n = 256usize;
        let sigma = vec![1.0; m];
        let phi: Vec<_> = (0..m).map(|_| scalar_phi(0.15)).collect();
        let tight = etfe_grid_bound(&demo_params(m, n, 0.01, &sigma, &phi)).unwrap();
        let loose = etfe_grid_bound(&demo_params(m, n, 0.2, &sigma, &phi)).unwrap();
        for (t, l) in tight.iter().zip(loose.iter()) {
            assert!(t.epsilon > l.epsilon);
        }
    }

    #[test]
    fn grid_bound_scaling_in_n_with_frozen_spectra() {
        let m = 8usize;
        let sigma = vec![0.9; m];
        let phi: Vec<_> = (0..m).map(|_| scalar_phi(0.15)).collect();
        let base = etfe_grid_bound(&demo_params(m, 256, 0.05, &sigma, &phi)).unwrap();
        let quad = etfe_grid_bound(&demo_params(m, 1024, 0.05, &sigma, &phi)).unwrap();
        for (b, q) in base.iter().zip(quad.iter()) {
            assert!((b.transient_term / q.transient_term - 4.0).abs() < 1e-10);
            assert!((b.noise_term / q.noise_term - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_bound_validates_inputs() {
        let sigma = vec![1.0; 4];
        let phi: Vec<_> = (0..4).map(|_| scalar_phi(0.1)).collect();
        assert!(matches!(
            etfe_grid_bound(&demo_params(4, 256, 1.5, &sigma, &phi)),
            Err(Error::InvalidDelta { .. })
        ));
        assert!(matches!(
            etfe_grid_bound(&demo_params(3, 256, 0.05, &sigma[..3], &phi[..3])),
            Err(Error::GridMismatch { .. })
        ));
        let zero_sigma = vec![1.0, 0.0, 1.0, 1.0];
        assert!(matches!(
            etfe_grid_bound(&demo_params(4, 256, 0.05, &zero_sigma, &phi)),
            Err(Error::MissingSigmaU { index: 1 })
        ));
    }

    #[test]
    fn noiseless_grid_bound_has_no_noise_term() {
        let m = 4usize;
        let sigma = vec![1.0; m];
        let phi: Vec<_> = (0..m).map(|_| scalar_phi(0.0)).collect();
        let mut params = demo_params(m, 256, 0.05, &sigma, &phi);
        params.sigma_e = 0.0;
        params.subgaussian_k = 0.0;
        let entries = etfe_grid_bound(&params).unwrap();
        for e in &entries {
            assert_eq!(e.noise_term, 0.0);
            assert!(e.snr.is_none());
            assert!(e.epsilon > 0.0);
        }
    }

    fn hinf_params(c1: f64, n: usize) -> HinfBoundParams<f64> {
        HinfBoundParams {
            c1,
            n,
            d_u: 1,
            d_y: 1,
            subgaussian_k: 0.1f64.sqrt(),
            sigma_e: 0.1f64.sqrt(),
            input_bound: 1.3,
            g_star: 40.0,
            worst_snr: 2.0,
            worst_sigma_u: 0.9,
            delta: 0.05,
        }
    }

    #[test]
    fn hinf_bound_first_term_direct_substitution() {
        // c1 = 1, N = 10^6: M = 100 divides N, and the Lipschitz term is
        // pi * 10^-2 * ||G||_*.
        let bound = hinf_bound(&hinf_params(1.0, 1_000_000)).unwrap();
        assert_eq!(bound.m, 100);
        assert!((bound.lipschitz_term - std::f64::consts::PI * 1e-2 * 40.0).abs() < 1e-9);
    }

    #[test]
    fn hinf_bound_term_ratio_decays_like_sqrt_n() {
        let n1 = 1_000_000usize;
        let n2 = 64_000_000usize; // 4^3 * n1 keeps M = c1 N^{1/3} an integer.
        let b1 = hinf_bound(&hinf_params(1.0, n1)).unwrap();
        let b2 = hinf_bound(&hinf_params(1.0, n2)).unwrap();
        let r1 = b1.transient_term / b1.noise_term;
        let r2 = b2.transient_term / b2.noise_term;
        // r(N) = C * N^{-1/2} / (sqrt(d_y) + (K^2/sigma^2) sqrt(d_u + ln(N/delta))).
        let parenthesis = |n: usize| 1.0 + (1.0 + (n as f64 / 0.05).ln()).sqrt();
        let expected = (n1 as f64 / n2 as f64).sqrt() * parenthesis(n1) / parenthesis(n2);
        assert!(((r2 / r1) - expected).abs() < 1e-9, "ratio {} expected {expected}", r2 / r1);
    }

    #[test]
    fn hinf_bound_matches_hand_composition() {
        // Feasible demo grid: M = 127, N_p = 64.
        let m = 127usize;
        let n = 127 * 64usize;
        let c1 = m as f64 / (n as f64).powf(1.0 / 3.0);
        let p = hinf_params(c1, n);
        let bound = hinf_bound(&p).unwrap();
        assert_eq!(bound.m, m);
        // Hand-composed oracle: Lipschitz cell term plus the grid bound terms
        // with the worst-case constants and the log factor at N.
        let lip = std::f64::consts::PI * p.g_star / m as f64;
        let transient = 2.0 * p.g_star * p.input_bound * (m as f64).sqrt() / (p.worst_sigma_u * n as f64);
        let c: f64 = universal_constant();
        let noise = (m as f64 / n as f64).sqrt() / p.worst_snr
            * c
            * (1.0 + (p.subgaussian_k.powi(2) / p.sigma_e.powi(2)) * (1.0 + (n as f64 / p.delta).ln()).sqrt());
        assert!((bound.lipschitz_term - lip).abs() < 1e-10 * lip);
        assert!((bound.transient_term - transient).abs() < 1e-10 * transient);
        assert!((bound.noise_term - noise).abs() < 1e-10 * noise);
        assert!((bound.total - (lip + transient + noise)).abs() < 1e-9 * bound.total);
    }

    #[test]
    fn hinf_bound_rejects_infeasible_grids() {
        assert!(matches!(
            hinf_bound(&hinf_params(1.07, 1_000_000)),
            Err(Error::GridInfeasible { .. })
        ));
    }

    #[test]
    fn feasible_grid_search_lands_near_target() {
        let (m, n_p, realized) = feasible_hinf_grid(1.0f64, 131_072, 0.2).unwrap();
        let n = m * n_p;
        assert!(n >= 100_000 && n <= 160_000, "n {n}");
        assert!((realized - m as f64 / (n as f64).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((realized - 1.0).abs() <= 0.2);
    }

    #[test]
    fn hanson_wright_tail_examples() {
        // Vacuous at alpha -> 0.
        let near_two: f64 = hanson_wright_tail(1e-12, 4.0, 1.0, 1.0);
        assert!((near_two - 2.0).abs() < 1e-9);
        // Identity map on dimension 16: frobenius^2 = 16, operator = 1,
        // K = 1, alpha = 1: the quadratic branch wins (144 > 16 sqrt 2).
        let value = hanson_wright_tail(1.0, 4.0, 1.0, 1.0);
        assert!((value - 2.0 * (-16.0f64 / 144.0).exp()).abs() < 1e-12);
        // Branch crossover at alpha* = 144 K^2 / (16 sqrt 2): the exponents
        // agree there and the min switches sides around it.
        let k = 1.3f64;
        let crossover = hanson_wright_crossover(k);
        assert!((crossover / (k * k) - 144.0 / (16.0 * 2.0f64.sqrt())).abs() < 1e-12);
        assert!((crossover / (k * k) - 6.363961030678928).abs() < 1e-9);
        let f = 3.0f64;
        let op = 1.2f64;
        let quad = |alpha: f64| alpha * alpha * f * f / (144.0 * k.powi(4) * op * op);
        let lin = |alpha: f64| alpha * f * f / (16.0 * 2.0f64.sqrt() * k * k * op * op);
        assert!((quad(crossover) - lin(crossover)).abs() < 1e-12);
        assert!(quad(crossover * 0.9) < lin(crossover * 0.9));
        assert!(quad(crossover * 1.1) > lin(crossover * 1.1));
    }

    #[test]
    fn hanson_wright_tail_monotonicity() {
        let mut last = f64::INFINITY;
        for alpha in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let v = hanson_wright_tail(alpha, 4.0, 1.0, 1.0);
            assert!(v < last);
            last = v;
        }
        assert!(hanson_wright_tail(1.0, 4.0, 1.0, 2.0) > hanson_wright_tail(1.0, 4.0, 1.0, 1.0));
    }

    #[test]
    fn noise_norm_tail_examples() {
        let phi = scalar_phi(0.15625);
        let sigma = 0.1f64.sqrt();
        // Scalar case with K = sigma_e: 9^2 * 2 * exp(-s^2/144).
        for s in [0.5f64, 1.0, 2.0] {
            let v = noise_norm_tail(s, sigma, sigma, &phi, 1);
            assert!((v - 162.0 * (-s * s / 144.0).exp()).abs() < 1e-9, "s {s}");
        }
        assert!(noise_norm_tail(1e6, sigma, sigma, &phi, 1) < 1e-300);
        let one = noise_norm_tail(1.0, sigma, sigma, &phi, 1);
        let two = noise_norm_tail(1.0, sigma, sigma, &phi, 2);
        assert!((two / one - 81.0).abs() < 1e-9);
        assert_eq!(clip_probability(one), 1.0);
    }

    #[test]
    fn report_builds_and_exports() {
        let m = 4usize;
        let n = 64usize;
        let sigma = vec![1.0; m];
        let phi: Vec<_> = (0..m).map(|_| scalar_phi(0.15)).collect();
        let report = CertificateReport::build(
            0.05f64,
            1,
            1,
            0.1f64.sqrt(),
            0.1f64.sqrt(),
            1.3,
            40.0,
            0.03,
            m,
            n,
            &sigma,
            &phi,
        )
        .unwrap();
        assert_eq!(report.n_p, 16);
        assert_eq!(report.n_tot, 64);
        for e in &report.entries {
            assert!(e.epsilon > 0.0);
        }
        assert!(report.max_epsilon() > 0.0);
        assert!(report.hinf.is_some());
        let mut json = Vec::new();
        report.write_json(&mut json).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(parsed["m"], 4);
        assert!(parsed["per_frequency"].as_array().unwrap().len() == 4);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), m + 1);
    }
}
