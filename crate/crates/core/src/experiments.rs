//! Monte Carlo sweeps: convergence-rate studies over record lengths, grid
//! resolution comparisons, certificate coverage, and the rate-slope
//! regression.
//!
//! Trials are embarrassingly parallel; every trial seed derives from the
//! master seed and the sweep-point indices, so results are bit-identical
//! across reruns and thread counts, and adding sweep points never perturbs
//! existing trials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::CertificateReport;
use crate::error::{Error, Result};
use crate::estimator::{etfe, grid_error, hinf_error_with};
use crate::excitation::{certify, flat_multisine, prbs, shift_schedule, PeriodicExcitation};
use crate::linalg::CMatrix;
use crate::lti::{
    autocovariance_lags_for_tolerance, default_impulse_tolerance, impulse_response,
    noise_autocovariance, simulate, strict_stability_norm, AutocovarianceSequence,
    RationalTransferFunction, SimulationSpec,
};
use crate::plot::{loglog_svg, PlotSeries};
use crate::scalar::{lit, Scalar};
use crate::seed::derive_seed;
use crate::spectral::{aliased_spectrum, stack};

const STREAM_FIXED: u64 = 1;
const STREAM_PILOT: u64 = 2;
const STREAM_HINF: u64 = 3;
const STREAM_EXCITATION: u64 = 4;
const STREAM_COVERAGE: u64 = 5;

/// How plotted errors are normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide every curve by its first data point.
    FirstPoint,
    None,
}

/// Recipe for building the excitation at a given period.
#[derive(Clone, Debug)]
pub enum ExcitationPlan<T> {
    /// Maximal-length PRBS; the period fixes the register order.
    Prbs { amplitude: T, offset: T },
    /// Equal excitation at every grid frequency with seeded random phases.
    FlatMultisine { amplitude: T },
}

impl<T: Scalar> ExcitationPlan<T> {
    /// Build and certify the excitation for period `m` and `d_u` experiments.
    pub fn build(&self, m: usize, d_u: usize, master_seed: u64) -> Result<PeriodicExcitation<T>> {
        let base = match self {
            ExcitationPlan::Prbs { amplitude, offset } => {
                let order = prbs_order_for_period(m)?;
                prbs(order, *amplitude, *offset)?
            }
            ExcitationPlan::FlatMultisine { amplitude } => {
                flat_multisine(m, *amplitude, derive_seed(master_seed, &[STREAM_EXCITATION, m as u64]))?
            }
        };
        certify(shift_schedule(&base, d_u)?)
    }
}

/// Register order `d` with `2^d - 1 == m`.
pub fn prbs_order_for_period(m: usize) -> Result<u32> {
    for order in 2..=16u32 {
        if (1usize << order) - 1 == m {
            return Ok(order);
        }
    }
    Err(Error::Config {
        context: format!("period {m} is not 2^d - 1 for a tabulated order d"),
    })
}

/// What to sweep.
#[derive(Clone, Debug)]
pub enum SweepMode {
    /// Fixed grids: every listed PRBS order over a shared `N_p` schedule.
    FixedGrid {
        orders: Vec<u32>,
        periods_schedule: Vec<usize>,
    },
    /// Two grid sizes compared at common record lengths.
    Ratio {
        order_small: u32,
        order_large: u32,
        n_targets: Vec<usize>,
    },
    /// All-frequency error with the grid size selected per record length by
    /// a pilot batch.
    Hinf {
        candidate_orders: Vec<u32>,
        n_targets: Vec<usize>,
        pilot_trials: usize,
        grid_density_factor: usize,
    },
    /// Certificate coverage at one sweep point.
    Coverage { order: u32, periods: usize },
}

/// Full sweep configuration.
#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    pub spec: SimulationSpec<T>,
    pub excitation: ExcitationPlan<T>,
    pub mode: SweepMode,
    pub n_monte_carlo: usize,
    pub delta: T,
    pub master_seed: u64,
    pub normalization: Normalization,
    pub cond_cap: T,
}

/// One sweep cell: all trials at a single `(M, N)`.
#[derive(Clone, Debug)]
pub struct SweepCell<T> {
    pub m: usize,
    pub n: usize,
    /// `(trial index, error)` for every successful trial.
    pub trials: Vec<(usize, T)>,
    pub mean: T,
    pub std: T,
    /// Certificate evaluated at the same `(M, N, delta)`.
    pub certificate: T,
    /// Grid order chosen by the pilot (pilot-selected sweeps only).
    pub chosen_order: Option<u32>,
}

/// Ordinary least squares fit of `log(mean)` against `log(N)`.
#[derive(Clone, Copy, Debug)]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
    pub std_err: T,
}

/// One labelled curve of a sweep.
#[derive(Clone, Debug)]
pub struct SweepSeries<T> {
    pub label: String,
    pub cells: Vec<SweepCell<T>>,
    pub rate: Option<RateFit<T>>,
}

/// Complete sweep output.
#[derive(Clone, Debug)]
pub struct SweepResult<T> {
    pub mode: String,
    pub normalization: Normalization,
    pub series: Vec<SweepSeries<T>>,
}

/// Ratio study between two grid sizes at common record lengths.
#[derive(Clone, Debug)]
pub struct RatioResult<T> {
    pub small: SweepSeries<T>,
    pub large: SweepSeries<T>,
    pub per_n: Vec<RatioCell<T>>,
    /// Geometric mean of the per-N mean-error ratios (large over small).
    pub pooled: T,
    pub normalization: Normalization,
}

#[derive(Clone, Copy, Debug)]
pub struct RatioCell<T> {
    pub n: usize,
    pub mean_small: T,
    pub mean_large: T,
    pub ratio: T,
}

/// Certificate coverage study output.
#[derive(Clone, Debug)]
pub struct CoverageResult<T> {
    pub m: usize,
    pub n: usize,
    pub delta: T,
    pub trials: usize,
    pub violations: usize,
    pub violation_fraction: T,
    /// Per-frequency certificates the trials were checked against.
    pub epsilon: Vec<T>,
    /// Worst per-frequency error of each successful trial.
    pub worst_errors: Vec<(usize, T)>,
    /// Largest observed error-to-certificate ratio.
    pub worst_margin: T,
}

/// Any sweep output, for mode-dispatching callers.
#[derive(Clone, Debug)]
pub enum SweepOutput<T> {
    Sweep(SweepResult<T>),
    Ratio(RatioResult<T>),
    Coverage(CoverageResult<T>),
}

/// Dispatch on the configured mode.
pub fn run_sweep<T: Scalar>(config: &SweepConfig<T>) -> Result<SweepOutput<T>> {
    match &config.mode {
        SweepMode::FixedGrid { .. } => Ok(SweepOutput::Sweep(run_fixed_grid(config)?)),
        SweepMode::Hinf { .. } => Ok(SweepOutput::Sweep(run_hinf(config)?)),
        SweepMode::Ratio { .. } => Ok(SweepOutput::Ratio(run_m_ratio(config)?)),
        SweepMode::Coverage { .. } => Ok(SweepOutput::Coverage(run_coverage(config)?)),
    }
}

/// Model quantities shared by every trial of a sweep.
struct ModelContext<T> {
    truth: RationalTransferFunction<T>,
    g_star: T,
    r_star: T,
    autocov: AutocovarianceSequence<T>,
}

impl<T: Scalar> ModelContext<T> {
    fn prepare(spec: &SimulationSpec<T>) -> Result<Self> {
        let truth = spec.plant().clone();
        let ir = impulse_response(&truth, default_impulse_tolerance(&truth))?;
        let g_star = strict_stability_norm(&ir);
        let lags = autocovariance_lags_for_tolerance(spec, lit(1e-13))?;
        let autocov = noise_autocovariance(spec, lags)?;
        let r_star = autocov.weighted_norm();
        Ok(Self {
            truth,
            g_star,
            r_star,
            autocov,
        })
    }

    fn grid_spectra(&self, m: usize, n: usize) -> Vec<CMatrix<T>> {
        let n_p = n / m;
        (0..m)
            .map(|ell| aliased_spectrum(&self.autocov, n, ell * n_p))
            .collect()
    }

    fn certificate(
        &self,
        config: &SweepConfig<T>,
        excitation: &PeriodicExcitation<T>,
        m: usize,
        n: usize,
    ) -> Result<CertificateReport<T>> {
        let sigma_u = excitation.sigma_u().ok_or_else(|| Error::Config {
            context: "excitation must be certified before certificate evaluation".into(),
        })?;
        CertificateReport::build(
            config.delta,
            config.spec.plant().input_dim(),
            config.spec.plant().output_dim(),
            config.spec.subgaussian_k(),
            config.spec.noise_std(),
            excitation.amplitude_bound(),
            self.g_star,
            self.r_star,
            m,
            n,
            sigma_u,
            &self.grid_spectra(m, n),
        )
    }
}

/// Run trials in parallel, keep successes with their trial index, and abort
/// when more than 1% fail.
fn collect_trials<T: Send>(
    n_trials: usize,
    run: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<(usize, T)>> {
    let outcomes: Vec<Result<T>> = (0..n_trials).into_par_iter().map(&run).collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed * 100 > n_trials {
        return Err(Error::TooManyFailures {
            failed,
            total: n_trials,
        });
    }
    Ok(outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.ok().map(|v| (i, v)))
        .collect())
}

fn mean_std<T: Scalar>(values: &[(usize, T)]) -> (T, T) {
    let count = T::from_usize_lossy(values.len());
    let mean = values.iter().map(|&(_, v)| v).fold(T::zero(), |a, b| a + b) / count;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let var = values
        .iter()
        .map(|&(_, v)| (v - mean) * (v - mean))
        .fold(T::zero(), |a, b| a + b)
        / (count - T::one());
    (mean, var.sqrt())
}

/// One fixed-grid trial: simulate, stack at the grid indices, estimate, and
/// take the worst grid error.
fn grid_trial<T: Scalar>(
    config: &SweepConfig<T>,
    ctx: &ModelContext<T>,
    excitation: &PeriodicExcitation<T>,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<T> {
    let set = simulate(&config.spec, excitation, n, seed)?;
    let n_p = n / m;
    let ks: Vec<usize> = (0..m).map(|ell| ell * n_p).collect();
    let dfts = stack(&set, &ks)?;
    let result = etfe(&dfts, m, config.cond_cap)?;
    grid_error(&result, &ctx.truth)
}

/// Fixed-grid sweep: worst grid error per trial over an `N_p` schedule, one
/// series per grid order.
pub fn run_fixed_grid<T: Scalar>(config: &SweepConfig<T>) -> Result<SweepResult<T>> {
    let SweepMode::FixedGrid {
        orders,
        periods_schedule,
    } = &config.mode
    else {
        return Err(Error::Config {
            context: "run_fixed_grid needs a fixed-grid mode configuration".into(),
        });
    };
    let ctx = ModelContext::prepare(&config.spec)?;
    let d_u = config.spec.plant().input_dim();
    let mut series = Vec::new();
    for &order in orders {
        let m = (1usize << order) - 1;
        let excitation = config.excitation.build(m, d_u, config.master_seed)?;
        let mut cells = Vec::new();
        for &n_p in periods_schedule {
            let n = m * n_p;
            let trials = collect_trials(config.n_monte_carlo, |trial| {
                let seed = derive_seed(
                    config.master_seed,
                    &[STREAM_FIXED, m as u64, n as u64, trial as u64],
                );
                grid_trial(config, &ctx, &excitation, m, n, seed)
            })?;
            let (mean, std) = mean_std(&trials);
            let certificate = ctx.certificate(config, &excitation, m, n)?.max_epsilon();
            cells.push(SweepCell {
                m,
                n,
                trials,
                mean,
                std,
                certificate,
                chosen_order: None,
            });
        }
        let points: Vec<(usize, T)> = cells.iter().map(|c| (c.n, c.mean)).collect();
        let rate = fit_rate(&points).ok();
        series.push(SweepSeries {
            label: format!("M={m}"),
            cells,
            rate,
        });
    }
    Ok(SweepResult {
        mode: "fixed-grid".into(),
        normalization: config.normalization,
        series,
    })
}

/// Compare two grid sizes at record lengths both divide.
pub fn run_m_ratio<T: Scalar>(config: &SweepConfig<T>) -> Result<RatioResult<T>> {
    let SweepMode::Ratio {
        order_small,
        order_large,
        n_targets,
    } = &config.mode
    else {
        return Err(Error::Config {
            context: "run_m_ratio needs a ratio mode configuration".into(),
        });
    };
    let m_small = (1usize << order_small) - 1;
    let m_large = (1usize << order_large) - 1;
    let lcm = lcm(m_small, m_large);
    let mut ns: Vec<usize> = n_targets
        .iter()
        .map(|&target| lcm * ((target as f64 / lcm as f64).round() as usize).max(1))
        .collect();
    ns.sort_unstable();
    ns.dedup();

    let ctx = ModelContext::prepare(&config.spec)?;
    let d_u = config.spec.plant().input_dim();
    let run_series = |m: usize| -> Result<SweepSeries<T>> {
        let excitation = config.excitation.build(m, d_u, config.master_seed)?;
        let mut cells = Vec::new();
        for &n in &ns {
            let trials = collect_trials(config.n_monte_carlo, |trial| {
                let seed = derive_seed(
                    config.master_seed,
                    &[STREAM_FIXED, m as u64, n as u64, trial as u64],
                );
                grid_trial(config, &ctx, &excitation, m, n, seed)
            })?;
            let (mean, std) = mean_std(&trials);
            let certificate = ctx.certificate(config, &excitation, m, n)?.max_epsilon();
            cells.push(SweepCell {
                m,
                n,
                trials,
                mean,
                std,
                certificate,
                chosen_order: None,
            });
        }
        Ok(SweepSeries {
            label: format!("M={m}"),
            cells,
            rate: None,
        })
    };
    let small = run_series(m_small)?;
    let large = run_series(m_large)?;
    let per_n: Vec<RatioCell<T>> = small
        .cells
        .iter()
        .zip(large.cells.iter())
        .map(|(s, l)| RatioCell {
            n: s.n,
            mean_small: s.mean,
            mean_large: l.mean,
            ratio: l.mean / s.mean,
        })
        .collect();
    let pooled = per_n
        .iter()
        .map(|c| c.ratio.ln())
        .fold(T::zero(), |a, b| a + b)
        / T::from_usize_lossy(per_n.len());
    Ok(RatioResult {
        small,
        large,
        per_n,
        pooled: pooled.exp(),
        normalization: config.normalization,
    })
}

/// All-frequency sweep with the grid size selected per record length by a
/// pilot batch: realized record lengths snap each target to the nearest
/// multiple of the candidate period.
pub fn run_hinf<T: Scalar>(config: &SweepConfig<T>) -> Result<SweepResult<T>> {
    let SweepMode::Hinf {
        candidate_orders,
        n_targets,
        pilot_trials,
        grid_density_factor,
    } = &config.mode
    else {
        return Err(Error::Config {
            context: "run_hinf needs an hinf mode configuration".into(),
        });
    };
    if candidate_orders.is_empty() || *grid_density_factor < 4 {
        return Err(Error::Config {
            context: "hinf mode needs candidate orders and a grid density factor of at least 4".into(),
        });
    }
    let ctx = ModelContext::prepare(&config.spec)?;
    let d_u = config.spec.plant().input_dim();

    // Certified excitations, one per candidate order, and a single truth
    // table on an evaluation grid dense enough for the largest candidate —
    // shared so the pilot compares every candidate on the same metric.
    let mut excitations = Vec::new();
    let mut max_m = 0usize;
    for &order in candidate_orders {
        let m = (1usize << order) - 1;
        max_m = max_m.max(m);
        excitations.push(config.excitation.build(m, d_u, config.master_seed)?);
    }
    let density = grid_density_factor * max_m;
    let truth_table: Vec<CMatrix<T>> = (0..density)
        .map(|j| {
            ctx.truth
                .frequency_response(T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(density))
        })
        .collect();

    let hinf_trial = |cand: usize, n: usize, seed: u64| -> Result<T> {
        let m = (1usize << candidate_orders[cand]) - 1;
        let excitation = &excitations[cand];
        let set = simulate(&config.spec, excitation, n, seed)?;
        let n_p = n / m;
        let ks: Vec<usize> = (0..m).map(|ell| ell * n_p).collect();
        let dfts = stack(&set, &ks)?;
        let result = etfe(&dfts, m, config.cond_cap)?;
        Ok(hinf_error_with(&result, &truth_table, ctx.g_star)?.value)
    };

    let mut cells = Vec::new();
    for &target in n_targets {
        // Pilot: pick the empirically best order at this record length.
        let mut best: Option<(usize, T)> = None;
        for cand in 0..candidate_orders.len() {
            let order = candidate_orders[cand];
            let m = (1usize << order) - 1;
            if m > target {
                continue;
            }
            let n = m * ((target as f64 / m as f64).round() as usize).max(1);
            let pilot = collect_trials(*pilot_trials, |trial| {
                let seed = derive_seed(
                    config.master_seed,
                    &[STREAM_PILOT, target as u64, order as u64, trial as u64],
                );
                hinf_trial(cand, n, seed)
            })?;
            if pilot.is_empty() {
                continue;
            }
            let (mean, _) = mean_std(&pilot);
            if best.map(|(_, b)| mean < b).unwrap_or(true) {
                best = Some((cand, mean));
            }
        }
        let (cand, _) = best.ok_or_else(|| Error::Config {
            context: format!("no candidate order fits record target {target}"),
        })?;
        let order = candidate_orders[cand];
        let m = (1usize << order) - 1;
        let n = m * ((target as f64 / m as f64).round() as usize).max(1);
        let trials = collect_trials(config.n_monte_carlo, |trial| {
            let seed = derive_seed(
                config.master_seed,
                &[STREAM_HINF, n as u64, order as u64, trial as u64],
            );
            hinf_trial(cand, n, seed)
        })?;
        let (mean, std) = mean_std(&trials);
        let report = ctx.certificate(config, &excitations[cand], m, n)?;
        let certificate = report
            .hinf
            .map(|h| h.total)
            .unwrap_or_else(|| report.max_epsilon() + T::PI() * ctx.g_star / T::from_usize_lossy(m));
        cells.push(SweepCell {
            m,
            n,
            trials,
            mean,
            std,
            certificate,
            chosen_order: Some(order),
        });
    }
    let points: Vec<(usize, T)> = cells.iter().map(|c| (c.n, c.mean)).collect();
    let rate = fit_rate(&points).ok();
    Ok(SweepResult {
        mode: "hinf".into(),
        normalization: config.normalization,
        series: vec![SweepSeries {
            label: "pilot-selected M".into(),
            cells,
            rate,
        }],
    })
}

/// Certificate coverage: the fraction of trials where any grid frequency
/// violates its per-frequency bound must not exceed `delta`.
pub fn run_coverage<T: Scalar>(config: &SweepConfig<T>) -> Result<CoverageResult<T>> {
    let SweepMode::Coverage { order, periods } = &config.mode else {
        return Err(Error::Config {
            context: "run_coverage needs a coverage mode configuration".into(),
        });
    };
    let ctx = ModelContext::prepare(&config.spec)?;
    let d_u = config.spec.plant().input_dim();
    let m = (1usize << order) - 1;
    let n = m * periods;
    let excitation = config.excitation.build(m, d_u, config.master_seed)?;
    let report = ctx.certificate(config, &excitation, m, n)?;
    let epsilon: Vec<T> = report.entries.iter().map(|e| e.epsilon).collect();

    let outcomes = collect_trials(config.n_monte_carlo, |trial| {
        let seed = derive_seed(config.master_seed, &[STREAM_COVERAGE, trial as u64]);
        let set = simulate(&config.spec, &excitation, n, seed)?;
        let n_p = n / m;
        let ks: Vec<usize> = (0..m).map(|ell| ell * n_p).collect();
        let dfts = stack(&set, &ks)?;
        let result = etfe(&dfts, m, config.cond_cap)?;
        let errors = result.per_frequency_errors(&ctx.truth);
        let mut worst = T::zero();
        let mut worst_margin = T::zero();
        let mut violated = false;
        for (ell, err) in errors.iter().enumerate() {
            let err = err.ok_or(Error::SingularInput { index: ell })?;
            worst = worst.max(err);
            if epsilon[ell] > T::zero() {
                worst_margin = worst_margin.max(err / epsilon[ell]);
            }
            if err > epsilon[ell] {
                violated = true;
            }
        }
        Ok((worst, worst_margin, violated))
    })?;

    let trials = outcomes.len();
    let violations = outcomes.iter().filter(|(_, (_, _, v))| *v).count();
    let worst_margin = outcomes
        .iter()
        .map(|&(_, (_, margin, _))| margin)
        .fold(T::zero(), |a, b| a.max(b));
    let worst_errors: Vec<(usize, T)> = outcomes
        .iter()
        .map(|&(trial, (worst, _, _))| (trial, worst))
        .collect();
    Ok(CoverageResult {
        m,
        n,
        delta: config.delta,
        trials,
        violations,
        violation_fraction: T::from_usize_lossy(violations) / T::from_usize_lossy(trials.max(1)),
        epsilon,
        worst_errors,
        worst_margin,
    })
}

/// Ordinary least squares on `(ln N, ln mean)` with the residual standard
/// error of the slope.
pub fn fit_rate<T: Scalar>(points: &[(usize, T)]) -> Result<RateFit<T>> {
    if points.len() < 3 {
        return Err(Error::NonPositive {
            context: format!("need at least 3 points, got {}", points.len()),
        });
    }
    for &(_, mean) in points {
        if !(mean > T::zero()) {
            return Err(Error::NonPositive {
                context: format!("mean {} is not positive", mean.as_f64()),
            });
        }
    }
    let k = T::from_usize_lossy(points.len());
    let xs: Vec<T> = points.iter().map(|&(n, _)| T::from_usize_lossy(n).ln()).collect();
    let ys: Vec<T> = points.iter().map(|&(_, v)| v.ln()).collect();
    let x_mean = xs.iter().copied().fold(T::zero(), |a, b| a + b) / k;
    let y_mean = ys.iter().copied().fold(T::zero(), |a, b| a + b) / k;
    let sxx = xs
        .iter()
        .map(|&x| (x - x_mean) * (x - x_mean))
        .fold(T::zero(), |a, b| a + b);
    let sxy = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| (x - x_mean) * (y - y_mean))
        .fold(T::zero(), |a, b| a + b);
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    let dof = k - lit(2.0);
    let std_err = (ss_res / dof / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        std_err,
    })
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn write_series_results<T: Scalar>(
    series: &SweepSeries<T>,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    for cell in &series.cells {
        for &(trial, error) in &cell.trials {
            writeln!(out, "{},{},{},{}", cell.m, cell.n, trial, error.as_f64())?;
        }
    }
    Ok(())
}

fn write_series_summary<T: Scalar>(
    series: &SweepSeries<T>,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    for cell in &series.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.m,
            cell.n,
            cell.mean.as_f64(),
            cell.std.as_f64(),
            cell.certificate.as_f64()
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RateDoc {
    label: String,
    slope: Option<f64>,
    intercept: Option<f64>,
    std_err: Option<f64>,
    chosen_orders: Vec<Option<u32>>,
}

#[derive(Serialize)]
struct RatesDoc {
    mode: String,
    normalization: String,
    series: Vec<RateDoc>,
}

impl<T: Scalar> SweepResult<T> {
    /// `results.csv`: every raw trial error.
    pub fn write_results_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "m,n,trial,error")?;
        for series in &self.series {
            write_series_results(series, out)?;
        }
        Ok(())
    }

    /// `summary.csv`: per-cell statistics with the certificate overlay.
    pub fn write_summary_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "m,n,mean,std,certificate")?;
        for series in &self.series {
            write_series_summary(series, out)?;
        }
        Ok(())
    }

    /// `rates.json`: fitted slopes per series.
    pub fn write_rates_json(&self, out: &mut impl std::io::Write) -> Result<()> {
        let doc = RatesDoc {
            mode: self.mode.clone(),
            normalization: normalization_name(self.normalization).into(),
            series: self
                .series
                .iter()
                .map(|s| RateDoc {
                    label: s.label.clone(),
                    slope: s.rate.map(|r| r.slope.as_f64()),
                    intercept: s.rate.map(|r| r.intercept.as_f64()),
                    std_err: s.rate.map(|r| r.std_err.as_f64()),
                    chosen_orders: s.cells.iter().map(|c| c.chosen_order).collect(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Log-log plot with one-standard-deviation bands and the certificate
    /// overlay, normalized per the configuration.
    pub fn to_svg(&self, title: &str) -> String {
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
        let mut plotted = Vec::new();
        for (i, series) in self.series.iter().enumerate() {
            let scale = match self.normalization {
                Normalization::FirstPoint => series
                    .cells
                    .first()
                    .map(|c| c.mean.as_f64())
                    .filter(|&v| v > 0.0)
                    .unwrap_or(1.0),
                Normalization::None => 1.0,
            };
            let color = palette[i % palette.len()].to_string();
            plotted.push(PlotSeries {
                label: series.label.clone(),
                points: series
                    .cells
                    .iter()
                    .map(|c| (c.n as f64, c.mean.as_f64() / scale))
                    .collect(),
                band: Some(
                    series
                        .cells
                        .iter()
                        .map(|c| {
                            let m = c.mean.as_f64() / scale;
                            let s = c.std.as_f64() / scale;
                            (c.n as f64, (m - s).max(m * 1e-3), m + s)
                        })
                        .collect(),
                ),
                color: color.clone(),
                dashed: false,
            });
            plotted.push(PlotSeries {
                label: format!("{} certificate", series.label),
                points: series
                    .cells
                    .iter()
                    .map(|c| (c.n as f64, c.certificate.as_f64() / scale))
                    .collect(),
                band: None,
                color,
                dashed: true,
            });
        }
        let y_label = match self.normalization {
            Normalization::FirstPoint => "error (normalized to first point)",
            Normalization::None => "error",
        };
        loglog_svg(title, "N", y_label, &plotted)
    }
}

pub fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::FirstPoint => "first-point",
        Normalization::None => "none",
    }
}

impl<T: Scalar> RatioResult<T> {
    pub fn write_results_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "m,n,trial,error")?;
        write_series_results(&self.small, out)?;
        write_series_results(&self.large, out)
    }

    pub fn write_summary_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "m,n,mean,std,certificate")?;
        write_series_summary(&self.small, out)?;
        write_series_summary(&self.large, out)
    }

    pub fn write_ratio_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "n,mean_small,mean_large,ratio")?;
        for cell in &self.per_n {
            writeln!(
                out,
                "{},{},{},{}",
                cell.n,
                cell.mean_small.as_f64(),
                cell.mean_large.as_f64(),
                cell.ratio.as_f64()
            )?;
        }
        Ok(())
    }

    pub fn write_ratio_json(&self, out: &mut impl std::io::Write) -> Result<()> {
        #[derive(Serialize)]
        struct Doc {
            pooled_ratio: f64,
            per_n: Vec<(usize, f64)>,
        }
        let doc = Doc {
            pooled_ratio: self.pooled.as_f64(),
            per_n: self.per_n.iter().map(|c| (c.n, c.ratio.as_f64())).collect(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_svg(&self, title: &str) -> String {
        let wrapped = SweepResult {
            mode: "ratio".into(),
            normalization: self.normalization,
            series: vec![self.small.clone(), self.large.clone()],
        };
        wrapped.to_svg(title)
    }
}

impl<T: Scalar> CoverageResult<T> {
    pub fn write_results_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "m,n,trial,error")?;
        for &(trial, error) in &self.worst_errors {
            writeln!(out, "{},{},{},{}", self.m, self.n, trial, error.as_f64())?;
        }
        Ok(())
    }

    pub fn write_json(&self, out: &mut impl std::io::Write) -> Result<()> {
        #[derive(Serialize)]
        struct Doc {
            m: usize,
            n: usize,
            delta: f64,
            trials: usize,
            violations: usize,
            violation_fraction: f64,
            worst_margin: f64,
            epsilon: Vec<f64>,
        }
        let doc = Doc {
            m: self.m,
            n: self.n,
            delta: self.delta.as_f64(),
            trials: self.trials,
            violations: self.violations,
            violation_fraction: self.violation_fraction.as_f64(),
            worst_margin: self.worst_margin.as_f64(),
            epsilon: self.epsilon.iter().map(|e| e.as_f64()).collect(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}
