//! Configuration documents and preset registry.
//!
//! Everything on disk is JSON with IEEE-754 doubles (or CSV for raw
//! signals); builders convert the parsed documents into the typed domain
//! objects at whatever scalar precision the caller instantiates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{
    certify, flat_multisine, multisine, prbs, shift_schedule, MultisineLine, PeriodicExcitation,
};
use crate::experiments::{ExcitationPlan, Normalization, SweepConfig, SweepMode};
use crate::lti::{NoiseLaw, RationalTransferFunction, SimulationSpec};
use crate::scalar::Scalar;

/// Rational transfer function document: coefficient lists in backward-shift
/// order (index `s` holds the `q^-s` coefficient).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferFunctionConfig {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl TransferFunctionConfig {
    pub fn build<T: Scalar>(&self) -> Result<RationalTransferFunction<T>> {
        RationalTransferFunction::siso(
            self.numerator.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            self.denominator.iter().map(|&v| T::from_f64_lossy(v)).collect(),
        )
    }
}

/// System and noise model document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemConfig {
    pub plant: TransferFunctionConfig,
    pub noise_filter: TransferFunctionConfig,
    pub noise_std: f64,
    pub noise_law: NoiseLaw,
    #[serde(default)]
    pub subgaussian_k: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

impl SystemConfig {
    pub fn build<T: Scalar>(&self) -> Result<SimulationSpec<T>> {
        let mut spec = SimulationSpec::new(
            self.plant.build()?,
            self.noise_filter.build()?,
            T::from_f64_lossy(self.noise_std),
            self.noise_law,
        )?;
        if let Some(burn_in) = self.burn_in {
            spec = spec.with_burn_in(burn_in);
        }
        if let Some(k) = self.subgaussian_k {
            spec = spec.with_subgaussian_k(T::from_f64_lossy(k))?;
        }
        Ok(spec)
    }
}

/// Which frequency indices a design must excite.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequiredFrequencies {
    #[default]
    All,
    None,
    Listed(Vec<usize>),
}

impl RequiredFrequencies {
    pub fn indices(&self, period: usize) -> Vec<usize> {
        match self {
            RequiredFrequencies::All => (0..period).collect(),
            RequiredFrequencies::None => Vec::new(),
            RequiredFrequencies::Listed(list) => list.clone(),
        }
    }
}

/// One multisine component of an excitation document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultisineLineConfig {
    pub frequency: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Excitation design document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ExcitationConfig {
    Prbs {
        order: u32,
        amplitude: f64,
        offset: f64,
        #[serde(default = "one")]
        experiments: usize,
        #[serde(default)]
        required: RequiredFrequencies,
    },
    Multisine {
        period: usize,
        lines: Vec<MultisineLineConfig>,
        #[serde(default = "one")]
        experiments: usize,
        #[serde(default)]
        required: RequiredFrequencies,
    },
    FlatMultisine {
        period: usize,
        amplitude: f64,
        #[serde(default)]
        phase_seed: u64,
        #[serde(default = "one")]
        experiments: usize,
        #[serde(default)]
        required: RequiredFrequencies,
    },
    Custom {
        /// CSV with one column per channel and one row per period sample.
        csv_path: String,
        #[serde(default = "one")]
        experiments: usize,
        #[serde(default)]
        required: RequiredFrequencies,
    },
}

fn one() -> usize {
    1
}

impl ExcitationConfig {
    pub fn required(&self) -> &RequiredFrequencies {
        match self {
            ExcitationConfig::Prbs { required, .. }
            | ExcitationConfig::Multisine { required, .. }
            | ExcitationConfig::FlatMultisine { required, .. }
            | ExcitationConfig::Custom { required, .. } => required,
        }
    }

    /// Build and certify the excitation. `base_dir` resolves relative CSV
    /// paths of custom signals.
    pub fn build<T: Scalar>(&self, base_dir: &std::path::Path) -> Result<PeriodicExcitation<T>> {
        let excitation = match self {
            ExcitationConfig::Prbs {
                order,
                amplitude,
                offset,
                experiments,
                ..
            } => {
                let base = prbs(
                    *order,
                    T::from_f64_lossy(*amplitude),
                    T::from_f64_lossy(*offset),
                )?;
                shift_schedule(&base, *experiments)?
            }
            ExcitationConfig::Multisine {
                period,
                lines,
                experiments,
                ..
            } => {
                let typed: Vec<MultisineLine<T>> = lines
                    .iter()
                    .map(|l| MultisineLine {
                        frequency: l.frequency,
                        amplitude: T::from_f64_lossy(l.amplitude),
                        phase: T::from_f64_lossy(l.phase),
                    })
                    .collect();
                shift_schedule(&multisine(*period, &typed)?, *experiments)?
            }
            ExcitationConfig::FlatMultisine {
                period,
                amplitude,
                phase_seed,
                experiments,
                ..
            } => shift_schedule(
                &flat_multisine(*period, T::from_f64_lossy(*amplitude), *phase_seed)?,
                *experiments,
            )?,
            ExcitationConfig::Custom {
                csv_path,
                experiments,
                ..
            } => {
                let path = base_dir.join(csv_path);
                let columns = read_signal_csv(&path)?;
                if columns.is_empty() || columns[0].is_empty() {
                    return Err(Error::Config {
                        context: format!("custom signal {} is empty", path.display()),
                    });
                }
                if *experiments == 1 {
                    // Columns are the channels of the single experiment.
                    let period = columns[0].len();
                    let samples: Vec<Vec<T>> = (0..period)
                        .map(|t| columns.iter().map(|col| T::from_f64_lossy(col[t])).collect())
                        .collect();
                    PeriodicExcitation::custom(vec![samples])?
                } else {
                    if columns.len() != 1 {
                        return Err(Error::Config {
                            context: "multi-experiment custom signals need a single-column base"
                                .into(),
                        });
                    }
                    let base: Vec<T> = columns[0].iter().map(|&v| T::from_f64_lossy(v)).collect();
                    shift_schedule(&base, *experiments)?
                }
            }
        };
        certify(excitation)
    }
}

/// Read a CSV of doubles, one column per channel.
pub fn read_signal_csv(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| Error::Config {
            context: format!("{}:{}: {e}", path.display(), line_no + 1),
        })?;
        if columns.is_empty() {
            columns = values.iter().map(|&v| vec![v]).collect();
        } else {
            if values.len() != columns.len() {
                return Err(Error::Config {
                    context: format!("{}:{}: ragged row", path.display(), line_no + 1),
                });
            }
            for (col, v) in columns.iter_mut().zip(values) {
                col.push(v);
            }
        }
    }
    Ok(columns)
}

/// Excitation recipe document used inside sweep configurations (the period
/// is chosen per sweep point).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ExcitationPlanConfig {
    Prbs { amplitude: f64, offset: f64 },
    FlatMultisine { amplitude: f64 },
}

impl ExcitationPlanConfig {
    pub fn build<T: Scalar>(&self) -> ExcitationPlan<T> {
        match self {
            ExcitationPlanConfig::Prbs { amplitude, offset } => ExcitationPlan::Prbs {
                amplitude: T::from_f64_lossy(*amplitude),
                offset: T::from_f64_lossy(*offset),
            },
            ExcitationPlanConfig::FlatMultisine { amplitude } => ExcitationPlan::FlatMultisine {
                amplitude: T::from_f64_lossy(*amplitude),
            },
        }
    }
}

fn default_cond_cap() -> f64 {
    crate::DEFAULT_COND_CAP
}

fn default_normalization() -> Normalization {
    Normalization::FirstPoint
}

fn default_pilot_trials() -> usize {
    10
}

fn default_grid_density_factor() -> usize {
    4
}

/// Monte Carlo sweep document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfigDoc {
    pub mode: String,
    pub system: SystemConfig,
    pub excitation: ExcitationPlanConfig,
    #[serde(default)]
    pub orders: Vec<u32>,
    #[serde(default)]
    pub periods_schedule: Vec<usize>,
    #[serde(default)]
    pub n_targets: Vec<usize>,
    #[serde(default)]
    pub candidate_orders: Vec<u32>,
    #[serde(default = "default_pilot_trials")]
    pub pilot_trials: usize,
    #[serde(default = "default_grid_density_factor")]
    pub grid_density_factor: usize,
    #[serde(default)]
    pub order_small: u32,
    #[serde(default)]
    pub order_large: u32,
    #[serde(default)]
    pub order: u32,
    #[serde(default)]
    pub periods: usize,
    pub n_monte_carlo: usize,
    pub delta: f64,
    pub master_seed: u64,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
}

impl SweepConfigDoc {
    pub fn build<T: Scalar>(&self) -> Result<SweepConfig<T>> {
        let mode = match self.mode.as_str() {
            "fixed-grid" => SweepMode::FixedGrid {
                orders: self.orders.clone(),
                periods_schedule: self.periods_schedule.clone(),
            },
            "ratio" => SweepMode::Ratio {
                order_small: self.order_small,
                order_large: self.order_large,
                n_targets: self.n_targets.clone(),
            },
            "hinf" => SweepMode::Hinf {
                candidate_orders: self.candidate_orders.clone(),
                n_targets: self.n_targets.clone(),
                pilot_trials: self.pilot_trials,
                grid_density_factor: self.grid_density_factor,
            },
            "coverage" => SweepMode::Coverage {
                order: self.order,
                periods: self.periods,
            },
            other => {
                return Err(Error::Config {
                    context: format!(
                        "unknown sweep mode {other:?}; expected fixed-grid, ratio, hinf, or coverage"
                    ),
                })
            }
        };
        Ok(SweepConfig {
            spec: self.system.build()?,
            excitation: self.excitation.build(),
            mode,
            n_monte_carlo: self.n_monte_carlo,
            delta: T::from_f64_lossy(self.delta),
            master_seed: self.master_seed,
            normalization: self.normalization,
            cond_cap: T::from_f64_lossy(self.cond_cap),
        })
    }
}

/// Single-run estimate document (`etfe` subcommand).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtfeRunConfig {
    pub system: SystemConfig,
    pub excitation: ExcitationConfig,
    /// Periods per record, `N = periods * M`.
    pub periods: usize,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
}

/// One verification check of the `verify-hw` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VerifyCheckConfig {
    /// Quadratic-form tail check on an explicit operator.
    Hw {
        name: String,
        operator: OperatorConfig,
        law: NoiseLaw,
        sigma: f64,
        alphas: Vec<f64>,
    },
    /// Noise-norm concentration check on a simulated system.
    NoiseNorm {
        name: String,
        system: SystemConfig,
        n: usize,
        k: usize,
        s_grid: Vec<f64>,
    },
}

/// Operator construction for verification checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum OperatorConfig {
    Identity {
        dim: usize,
    },
    /// Lifted filter DFT operator of a noise model.
    FilterDft {
        filter: TransferFunctionConfig,
        n: usize,
        k: usize,
        k_max: usize,
    },
    /// Dense matrix with seeded random sign entries.
    DenseRandom {
        rows: usize,
        cols: usize,
        scale: f64,
        seed: u64,
    },
}

/// Verification run document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub checks: Vec<VerifyCheckConfig>,
}

/// Bundled configuration presets, embedded in the binary.
pub mod presets {
    /// `(name, kind, json)` for every bundled preset.
    pub const ALL: &[(&str, &str, &str)] = &[
        ("grid-rate-desk", "sweep", include_str!("../presets/grid-rate-desk.json")),
        ("grid-rate-full", "sweep", include_str!("../presets/grid-rate-full.json")),
        ("grid-ratio-desk", "sweep", include_str!("../presets/grid-ratio-desk.json")),
        ("hinf-rate-desk", "sweep", include_str!("../presets/hinf-rate-desk.json")),
        ("hinf-rate-full", "sweep", include_str!("../presets/hinf-rate-full.json")),
        ("coverage-desk", "sweep", include_str!("../presets/coverage-desk.json")),
        ("etfe-demo", "etfe", include_str!("../presets/etfe-demo.json")),
        ("design-prbs7", "design", include_str!("../presets/design-prbs7.json")),
        ("design-flat-multisine", "design", include_str!("../presets/design-flat-multisine.json")),
        ("verify-hw-desk", "verify", include_str!("../presets/verify-hw-desk.json")),
        ("verify-noise-norm-desk", "verify", include_str!("../presets/verify-noise-norm-desk.json")),
    ];

    pub fn find(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _, _)| *n == name).map(|(_, _, json)| *json)
    }

    pub fn kind(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _, _)| *n == name).map(|(_, kind, _)| *kind)
    }

    pub fn names() -> Vec<&'static str> {
        ALL.iter().map(|(n, _, _)| *n).collect()
    }
}
