//! The empirical transfer function estimate on the excited frequency grid,
//! its piecewise-constant extension to all frequencies, and error metrics
//! against a known system.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::lti::RationalTransferFunction;
use crate::scalar::{lit, Scalar};
use crate::spectral::StackedDfts;

/// Grid estimates at the `M` excited frequencies of an `N`-point record.
///
/// An estimate exists exactly where the stacked input DFT was invertible
/// within the condition cap; elsewhere the slot is absent, never zero-filled.
#[derive(Clone, Debug)]
pub struct EtfeResult<T> {
    m: usize,
    n: usize,
    estimates: Vec<Option<CMatrix<T>>>,
    conditions: Vec<Option<T>>,
    singular: Vec<usize>,
}

impl<T: Scalar> EtfeResult<T> {
    /// Assemble a result from explicit parts (used by tests and by studies
    /// that postprocess estimates).
    pub fn from_parts(
        m: usize,
        n: usize,
        estimates: Vec<Option<CMatrix<T>>>,
        conditions: Vec<Option<T>>,
    ) -> Result<Self> {
        if m == 0 || n == 0 || n % m != 0 {
            return Err(Error::GridMismatch { m, n });
        }
        if estimates.len() != m || conditions.len() != m {
            return Err(Error::LengthMismatch {
                context: "estimates and condition numbers must have one slot per grid index".into(),
            });
        }
        let singular = estimates
            .iter()
            .enumerate()
            .filter_map(|(ell, e)| e.is_none().then_some(ell))
            .collect();
        Ok(Self {
            m,
            n,
            estimates,
            conditions,
            singular,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Periods per record, `N / M`.
    pub fn periods(&self) -> usize {
        self.n / self.m
    }

    /// Grid frequency `omega_l = 2 pi l / M`.
    pub fn omega(&self, ell: usize) -> T {
        T::TAU() * T::from_usize_lossy(ell) / T::from_usize_lossy(self.m)
    }

    pub fn estimate(&self, ell: usize) -> Option<&CMatrix<T>> {
        self.estimates[ell].as_ref()
    }

    pub fn condition(&self, ell: usize) -> Option<T> {
        self.conditions[ell]
    }

    /// Grid indices whose input DFT was singular or ill-conditioned.
    pub fn singular_indices(&self) -> &[usize] {
        &self.singular
    }

    pub fn all_present(&self) -> bool {
        self.singular.is_empty()
    }

    /// Per-frequency operator-norm errors against a known system; absent
    /// where the estimate is absent.
    pub fn per_frequency_errors(&self, truth: &RationalTransferFunction<T>) -> Vec<Option<T>> {
        (0..self.m)
            .map(|ell| {
                self.estimates[ell].as_ref().map(|g_hat| {
                    truth
                        .frequency_response(self.omega(ell))
                        .sub(g_hat)
                        .operator_norm()
                })
            })
            .collect()
    }

    /// CSV export: one row per grid index and matrix entry.
    pub fn write_csv(
        &self,
        truth: Option<&RationalTransferFunction<T>>,
        out: &mut impl std::io::Write,
    ) -> std::io::Result<()> {
        writeln!(out, "ell,omega,entry_row,entry_col,re,im,condition,error")?;
        let errors = truth.map(|t| self.per_frequency_errors(t));
        for ell in 0..self.m {
            let omega = self.omega(ell).as_f64();
            let cond = self.conditions[ell]
                .map(|c| c.as_f64().to_string())
                .unwrap_or_default();
            let err = errors
                .as_ref()
                .and_then(|e| e[ell].map(|v| v.as_f64().to_string()))
                .unwrap_or_default();
            match &self.estimates[ell] {
                Some(g) => {
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            let z = g.get(r, c);
                            writeln!(
                                out,
                                "{ell},{omega},{r},{c},{},{},{cond},{err}",
                                z.re.as_f64(),
                                z.im.as_f64()
                            )?;
                        }
                    }
                }
                None => writeln!(out, "{ell},{omega},,,,,{cond},")?,
            }
        }
        Ok(())
    }
}

/// Compute the ETFE `Y_k U_k^{-1}` at every grid index `k = l N/M`.
///
/// An estimate is recorded as absent (rather than failing the whole grid)
/// when the input DFT is singular, its condition number exceeds `cond_cap`,
/// or its smallest singular value vanishes relative to the best-excited grid
/// frequency — the scalar case has condition number one even at numerically
/// dead frequencies, so the relative test is what catches those.
pub fn etfe<T: Scalar>(dfts: &StackedDfts<T>, m: usize, cond_cap: T) -> Result<EtfeResult<T>> {
    let n = dfts.n();
    if m == 0 || n % m != 0 {
        return Err(Error::GridMismatch { m, n });
    }
    let n_p = n / m;
    let mut spectra = Vec::with_capacity(m);
    for ell in 0..m {
        let k = ell * n_p;
        let u = dfts.input_at(k).ok_or_else(|| Error::LengthMismatch {
            context: format!("stacked DFTs missing grid index k = {k}"),
        })?;
        let sv = u.singular_values();
        spectra.push((
            sv.first().copied().unwrap_or_else(T::zero),
            sv.last().copied().unwrap_or_else(T::zero),
        ));
    }
    let scale = spectra
        .iter()
        .map(|&(largest, _)| largest)
        .fold(T::zero(), |a, b| a.max(b));
    let mut estimates = Vec::with_capacity(m);
    let mut conditions = Vec::with_capacity(m);
    let mut singular = Vec::new();
    for (ell, &(largest, smallest)) in spectra.iter().enumerate() {
        let k = ell * n_p;
        let cond = (smallest > T::zero()).then(|| largest / smallest);
        let usable = smallest > T::zero()
            && cond.map(|c| c <= cond_cap).unwrap_or(false)
            && smallest * cond_cap >= scale;
        if usable {
            let u = dfts.input_at(k).expect("validated above");
            let y = dfts.output_at(k).expect("output materialized with input");
            estimates.push(Some(y.mul(&u.inverse()?)));
            conditions.push(cond);
        } else {
            estimates.push(None);
            conditions.push(cond);
            singular.push(ell);
        }
    }
    Ok(EtfeResult {
        m,
        n,
        estimates,
        conditions,
        singular,
    })
}

/// Piecewise-constant extension of the grid estimates: `omega` maps to the
/// estimate of the cell `[omega_l - pi/M, omega_l + pi/M)` containing it,
/// with the boundary belonging to the right neighbor and wraparound at
/// `2 pi`.
pub fn naive_extend<T: Scalar>(result: &EtfeResult<T>, omega: T) -> Result<CMatrix<T>> {
    let m_t = T::from_usize_lossy(result.m);
    let x = omega * m_t / T::TAU() + lit(0.5);
    let ell = (x.floor().as_f64() as usize) % result.m;
    result
        .estimate(ell)
        .cloned()
        .ok_or(Error::MissingCell {
            omega: omega.as_f64(),
        })
}

/// Worst error over the excited grid, `max_l ||G(e^{j 2 pi l / M}) - Ghat_l||`.
pub fn grid_error<T: Scalar>(
    result: &EtfeResult<T>,
    truth: &RationalTransferFunction<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for ell in 0..result.m() {
        match result.estimate(ell) {
            Some(g_hat) => {
                let err = truth
                    .frequency_response(result.omega(ell))
                    .sub(g_hat)
                    .operator_norm();
                worst = worst.max(err);
            }
            None => return Err(Error::SingularInput { index: ell }),
        }
    }
    Ok(worst)
}

/// Fine-grid surrogate of the supremum error together with its
/// discretization slack.
#[derive(Clone, Copy, Debug)]
pub struct HinfErrorReport<T> {
    /// Max over the evaluation grid of the naive-extension error.
    pub value: T,
    /// Lipschitz slack `pi * ||G||_* / grid_density` covering what the grid
    /// may have missed.
    pub slack: T,
}

/// Maximize the naive-extension error over a uniform grid of
/// `grid_density >= 4 M` frequencies; the true supremum exceeds the returned
/// value by at most `slack`.
pub fn hinf_error<T: Scalar>(
    result: &EtfeResult<T>,
    truth: &RationalTransferFunction<T>,
    g_star: T,
    grid_density: usize,
) -> Result<HinfErrorReport<T>> {
    if grid_density < 4 * result.m() {
        return Err(Error::GridTooCoarse {
            density: grid_density,
            minimum: 4 * result.m(),
        });
    }
    let truth_values: Vec<CMatrix<T>> = (0..grid_density)
        .map(|j| {
            truth.frequency_response(T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(grid_density))
        })
        .collect();
    hinf_error_with(result, &truth_values, g_star)
}

/// Same as [`hinf_error`] with the truth responses precomputed on the
/// evaluation grid (the Monte Carlo harness shares one truth table across
/// trials).
pub fn hinf_error_with<T: Scalar>(
    result: &EtfeResult<T>,
    truth_values: &[CMatrix<T>],
    g_star: T,
) -> Result<HinfErrorReport<T>> {
    let grid_density = truth_values.len();
    if grid_density < 4 * result.m() {
        return Err(Error::GridTooCoarse {
            density: grid_density,
            minimum: 4 * result.m(),
        });
    }
    let mut worst = T::zero();
    for (j, truth_value) in truth_values.iter().enumerate() {
        let omega = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(grid_density);
        let extended = naive_extend(result, omega)?;
        worst = worst.max(truth_value.sub(&extended).operator_norm());
    }
    Ok(HinfErrorReport {
        value: worst,
        slack: T::PI() * g_star / T::from_usize_lossy(grid_density),
    })
}
