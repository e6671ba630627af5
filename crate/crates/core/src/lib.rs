//! Frequency-domain system identification lab.
//!
//! The crate simulates noisy linear time-invariant systems under periodic
//! excitation, computes the empirical transfer function estimate (ETFE) on
//! the excited frequency grid, evaluates finite-sample error certificates
//! next to the measured errors, and drives Monte Carlo convergence-rate
//! studies from reproducible seeds.
//!
//! The numeric core is generic over the scalar type through [`Scalar`];
//! concrete `f64` aliases for the main domain types live at the crate root.
//!
//! ```
//! use etfe_lab::excitation::{certify, prbs, shift_schedule};
//! use etfe_lab::estimator::{etfe, grid_error};
//! use etfe_lab::lti::{demo_noise_filter, demo_plant, simulate, NoiseLaw, SimulationSpec};
//! use etfe_lab::spectral::stack;
//!
//! # fn main() -> etfe_lab::Result<()> {
//! let spec = SimulationSpec::new(
//!     demo_plant::<f64>(),
//!     demo_noise_filter::<f64>(),
//!     0.1f64.sqrt(),
//!     NoiseLaw::Gaussian,
//! )?;
//! let excitation = certify(shift_schedule(&prbs(5, 1.0, 0.3)?, 1)?)?;
//! let (m, n_p) = (excitation.period(), 16);
//! let records = simulate(&spec, &excitation, m * n_p, 42)?;
//! let ks: Vec<usize> = (0..m).map(|ell| ell * n_p).collect();
//! let estimates = etfe(&stack(&records, &ks)?, m, etfe_lab::DEFAULT_COND_CAP)?;
//! let worst = grid_error(&estimates, spec.plant())?;
//! assert!(worst.is_finite());
//! # Ok(())
//! # }
//! ```

pub mod certificates;
pub mod concentration;
pub mod error;
pub mod estimator;
pub mod excitation;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod plot;
pub mod scalar;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default condition-number cap above which a grid estimate is declared
/// undefined.
pub const DEFAULT_COND_CAP: f64 = 1e8;

// Concrete `f64` aliases for the domain types.
pub type SisoRational = lti::SisoRational<f64>;
pub type RationalTransferFunction = lti::RationalTransferFunction<f64>;
pub type ImpulseResponseTruncation = lti::ImpulseResponseTruncation<f64>;
pub type SimulationSpec = lti::SimulationSpec<f64>;
pub type TrajectorySet = lti::TrajectorySet<f64>;
pub type PeriodicExcitation = excitation::PeriodicExcitation<f64>;
pub type StackedDfts = spectral::StackedDfts<f64>;
pub type SpectrumTable = spectral::SpectrumTable<f64>;
pub type EtfeResult = estimator::EtfeResult<f64>;
pub type CertificateReport = certificates::CertificateReport<f64>;
pub type TruncatedOperator = concentration::TruncatedOperator<f64>;
pub type SweepConfig = experiments::SweepConfig<f64>;
pub type SweepResult = experiments::SweepResult<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
pub type RMatrix = linalg::RMatrix<f64>;
