//! Command-line front end: excitation design, single ETFE runs, Monte Carlo
//! sweeps, and concentration verification, all driven by JSON configs or
//! bundled presets.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use etfe_lab::certificates::CertificateReport;
use etfe_lab::concentration::{
    dense_random_operator, filter_dft_operator, verify_noise_norm_tails,
    verify_quadratic_form_tails, TruncatedOperator,
};
use etfe_lab::estimator::etfe;
use etfe_lab::experiments::{normalization_name, run_sweep, SweepOutput};
use etfe_lab::io::{
    presets, EtfeRunConfig, ExcitationConfig, OperatorConfig, SweepConfigDoc, VerifyCheckConfig,
    VerifyConfig,
};
use etfe_lab::linalg::RMatrix;
use etfe_lab::lti::{
    autocovariance_lags_for_tolerance, default_impulse_tolerance, impulse_response,
    noise_autocovariance, simulate, strict_stability_norm,
};
use etfe_lab::spectral::{aliased_spectrum, stack, SpectrumTable};

#[derive(Parser)]
#[command(
    name = "etfe-lab",
    version,
    about = "Frequency-domain system identification lab",
    long_about = "Simulates noisy LTI systems under periodic excitation, estimates frequency \
responses on the excited grid, evaluates finite-sample error certificates, and reproduces \
convergence-rate studies. All commands read a JSON config (--config) or a bundled preset \
(--preset), write a run manifest first, then their result files."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a bundled preset (see `etfe-lab presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory. The ETFE_LAB_OUT environment variable overrides
    /// this flag.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed override; replaces the seed in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Cap on worker threads for parallel trials.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Design a periodic excitation and certify its per-frequency levels.
    ///
    /// Config keys: type (prbs | multisine | flat-multisine | custom) with
    /// per-type parameters -- prbs: order, amplitude, offset; multisine:
    /// period, lines[{frequency, amplitude, phase}]; flat-multisine: period,
    /// amplitude, phase_seed; custom: csv_path (one column per channel, one
    /// row per sample). Common keys: experiments (default 1), required
    /// ("all", "none", or `{"listed": [indices]}`).
    ///
    /// Outputs: manifest.json, excitation.json, signals.csv,
    /// certification.csv. Nonzero exit if a required frequency is not
    /// excited.
    Design(CommonArgs),
    /// Simulate one record set, estimate the frequency response on the grid,
    /// and evaluate the error certificate.
    ///
    /// Config keys: system {plant{numerator, denominator},
    /// noise_filter{numerator, denominator}, noise_std, noise_law,
    /// subgaussian_k?, burn_in?}, excitation (as for design), periods
    /// (records are periods * M samples), delta, seed, cond_cap.
    ///
    /// Outputs: manifest.json, estimates.csv, certificate.json,
    /// certificate.csv.
    Etfe(CommonArgs),
    /// Run a Monte Carlo sweep: fixed-grid rates, grid-size ratios,
    /// pilot-selected all-frequency rates, or certificate coverage.
    ///
    /// Config keys: mode (fixed-grid | ratio | hinf | coverage), system,
    /// excitation {type: prbs|flat-multisine, ...}, n_monte_carlo, delta,
    /// master_seed, normalization (first-point | none), cond_cap, and per
    /// mode: fixed-grid: orders, periods_schedule; ratio: order_small,
    /// order_large, n_targets; hinf: candidate_orders, n_targets,
    /// pilot_trials, grid_density_factor; coverage: order, periods.
    ///
    /// Outputs: manifest.json, results.csv, summary.csv, rates.json,
    /// plot.svg, plus ratio.csv/ratio.json or coverage.json by mode.
    Sweep(CommonArgs),
    /// Verify concentration tails by Monte Carlo: quadratic forms of
    /// truncated operators and the noise DFT norm.
    ///
    /// Config keys: n_trials, seed, checks[] where each check is either
    /// {kind: hw, name, operator {type: identity|filter-dft|dense-random,
    /// ...}, law, sigma, alphas[]} or {kind: noise-norm, name, system, n, k,
    /// s_grid[]}.
    ///
    /// Outputs: manifest.json and `verify-NAME.csv` per check; prints one
    /// PASS/FAIL line per check and exits nonzero on any FAIL.
    VerifyHw(CommonArgs),
    /// List the bundled presets.
    Presets,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Presets => {
            for name in presets::names() {
                println!("{name} ({})", presets::kind(name).unwrap_or("?"));
            }
            Ok(0)
        }
        Command::Design(args) => cmd_design(args),
        Command::Etfe(args) => cmd_etfe(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::VerifyHw(args) => cmd_verify(args),
    }
}

/// Resolved configuration source.
struct LoadedConfig {
    text: String,
    source: String,
    base_dir: PathBuf,
}

fn load_config(args: &CommonArgs, expected_kind: &str) -> Result<LoadedConfig> {
    match (&args.config, &args.preset) {
        (Some(path), None) => Ok(LoadedConfig {
            text: fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            source: path.display().to_string(),
            base_dir: path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        }),
        (None, Some(name)) => {
            let text = presets::find(name)
                .ok_or_else(|| anyhow!("unknown preset {name:?}; try `etfe-lab presets`"))?;
            let kind = presets::kind(name).unwrap_or("?");
            if kind != expected_kind {
                bail!("preset {name:?} is a {kind} preset, not usable with this command");
            }
            Ok(LoadedConfig {
                text: text.to_string(),
                source: format!("preset:{name}"),
                base_dir: PathBuf::from("."),
            })
        }
        _ => bail!("exactly one of --config or --preset is required"),
    }
}

fn resolve_out_dir(args: &CommonArgs, command: &str) -> PathBuf {
    if let Ok(env_dir) = std::env::var("ETFE_LAB_OUT") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    args.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("etfe-lab-out").join(command))
}

fn configure_jobs(args: &CommonArgs) {
    if let Some(jobs) = args.jobs {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Write the run manifest atomically before any results.
fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &LoadedConfig,
    master_seed: Option<u64>,
) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let created_unix_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let doc = serde_json::json!({
        "command": command,
        "config_source": config.source,
        "config_hash": format!("fnv1a64:{:016x}", fnv1a64(config.text.as_bytes())),
        "master_seed": master_seed,
        "out_dir": out_dir.display().to_string(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "created_unix_ms": created_unix_ms,
    });
    let tmp = out_dir.join(".manifest.json.tmp");
    fs::write(&tmp, format!("{:#}\n", doc))?;
    fs::rename(&tmp, out_dir.join("manifest.json"))?;
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_design(args: CommonArgs) -> Result<i32> {
    configure_jobs(&args);
    let loaded = load_config(&args, "design")?;
    let config: ExcitationConfig = serde_json::from_str(&loaded.text).context("parsing design config")?;
    let out_dir = resolve_out_dir(&args, "design");
    write_manifest(&out_dir, "design", &loaded, args.seed)?;

    let excitation = config.build::<f64>(&loaded.base_dir)?;
    let period = excitation.period();
    let sigma = excitation.sigma_u().expect("certified by build");

    // Resolved design summary.
    let doc = serde_json::json!({
        "period": period,
        "experiments": excitation.experiment_count(),
        "input_dim": excitation.input_dim(),
        "amplitude_bound": excitation.amplitude_bound(),
        "sigma_u_min": sigma.iter().copied().fold(f64::INFINITY, f64::min),
        "sigma_u_max": sigma.iter().copied().fold(0.0f64, f64::max),
    });
    write_file(&out_dir.join("excitation.json"), format!("{doc:#}\n").as_bytes())?;

    let mut signals = String::from("experiment,t");
    for ch in 0..excitation.input_dim() {
        signals.push_str(&format!(",u{ch}"));
    }
    signals.push('\n');
    for i in 0..excitation.experiment_count() {
        for (t, sample) in excitation.experiment(i).iter().enumerate() {
            signals.push_str(&format!("{i},{t}"));
            for v in sample {
                signals.push_str(&format!(",{v}"));
            }
            signals.push('\n');
        }
    }
    write_file(&out_dir.join("signals.csv"), signals.as_bytes())?;

    let mut table = String::from("ell,omega,sigma_u\n");
    for (ell, s) in sigma.iter().enumerate() {
        let omega = 2.0 * std::f64::consts::PI * ell as f64 / period as f64;
        table.push_str(&format!("{ell},{omega},{s}\n"));
    }
    write_file(&out_dir.join("certification.csv"), table.as_bytes())?;

    let required = config.required().indices(period);
    match excitation.require_exciting(&required) {
        Ok(()) => {
            println!(
                "designed period {period} excitation; sigma_u in [{}, {}]",
                doc["sigma_u_min"], doc["sigma_u_max"]
            );
            Ok(0)
        }
        Err(err) => {
            eprintln!("design written to {}, but: {err}", out_dir.display());
            Ok(1)
        }
    }
}

fn cmd_etfe(args: CommonArgs) -> Result<i32> {
    configure_jobs(&args);
    let loaded = load_config(&args, "etfe")?;
    let mut config: EtfeRunConfig = serde_json::from_str(&loaded.text).context("parsing etfe config")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = resolve_out_dir(&args, "etfe");
    write_manifest(&out_dir, "etfe", &loaded, Some(config.seed))?;

    let spec = config.system.build::<f64>()?;
    let excitation = config.excitation.build::<f64>(&loaded.base_dir)?;
    let m = excitation.period();
    let n = m * config.periods;
    let set = simulate(&spec, &excitation, n, config.seed)?;
    let ks: Vec<usize> = (0..m).map(|ell| ell * config.periods).collect();
    let dfts = stack(&set, &ks)?;
    let result = etfe(&dfts, m, config.cond_cap)?;

    let truth = spec.plant().clone();
    let mut estimates = Vec::new();
    result.write_csv(Some(&truth), &mut estimates)?;
    write_file(&out_dir.join("estimates.csv"), &estimates)?;

    let ir = impulse_response(&truth, default_impulse_tolerance(&truth))?;
    let g_star = strict_stability_norm(&ir);
    let lags = autocovariance_lags_for_tolerance(&spec, 1e-13)?;
    let autocov = noise_autocovariance(&spec, lags)?;
    let spectrum_table = SpectrumTable::build(&autocov, n, &ks)?;
    let mut spectrum_csv = Vec::new();
    spectrum_table.write_csv(&mut spectrum_csv)?;
    write_file(&out_dir.join("spectrum.csv"), &spectrum_csv)?;
    let phi: Vec<_> = ks.iter().map(|&k| aliased_spectrum(&autocov, n, k)).collect();
    let report = CertificateReport::build(
        config.delta,
        spec.plant().input_dim(),
        spec.plant().output_dim(),
        spec.subgaussian_k(),
        spec.noise_std(),
        excitation.amplitude_bound(),
        g_star,
        autocov.weighted_norm(),
        m,
        n,
        excitation.sigma_u().expect("certified"),
        &phi,
    )?;
    let mut json = Vec::new();
    report.write_json(&mut json)?;
    write_file(&out_dir.join("certificate.json"), &json)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out_dir.join("certificate.csv"), &csv)?;

    println!(
        "estimated {} of {m} grid frequencies at N = {n}; max certificate epsilon = {}",
        m - result.singular_indices().len(),
        report.max_epsilon()
    );
    Ok(0)
}

fn cmd_sweep(args: CommonArgs) -> Result<i32> {
    configure_jobs(&args);
    let loaded = load_config(&args, "sweep")?;
    let mut doc: SweepConfigDoc = serde_json::from_str(&loaded.text).context("parsing sweep config")?;
    if let Some(seed) = args.seed {
        doc.master_seed = seed;
    }
    let out_dir = resolve_out_dir(&args, "sweep");
    write_manifest(&out_dir, "sweep", &loaded, Some(doc.master_seed))?;

    let config = doc.build::<f64>()?;
    let output = run_sweep(&config)?;
    match &output {
        SweepOutput::Sweep(result) => {
            let mut buffer = Vec::new();
            result.write_results_csv(&mut buffer)?;
            write_file(&out_dir.join("results.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_summary_csv(&mut buffer)?;
            write_file(&out_dir.join("summary.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_rates_json(&mut buffer)?;
            write_file(&out_dir.join("rates.json"), &buffer)?;
            write_file(
                &out_dir.join("plot.svg"),
                result.to_svg(&format!("{} sweep", result.mode)).as_bytes(),
            )?;
            for series in &result.series {
                match series.rate {
                    Some(rate) => println!(
                        "{}: slope {:.4} (std err {:.4}) over {} points",
                        series.label,
                        rate.slope,
                        rate.std_err,
                        series.cells.len()
                    ),
                    None => println!("{}: no rate fit", series.label),
                }
            }
        }
        SweepOutput::Ratio(result) => {
            let mut buffer = Vec::new();
            result.write_results_csv(&mut buffer)?;
            write_file(&out_dir.join("results.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_summary_csv(&mut buffer)?;
            write_file(&out_dir.join("summary.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_ratio_csv(&mut buffer)?;
            write_file(&out_dir.join("ratio.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_ratio_json(&mut buffer)?;
            write_file(&out_dir.join("ratio.json"), &buffer)?;
            write_file(
                &out_dir.join("plot.svg"),
                result.to_svg("grid-size ratio sweep").as_bytes(),
            )?;
            println!("pooled mean-error ratio: {:.4}", result.pooled);
        }
        SweepOutput::Coverage(result) => {
            let mut buffer = Vec::new();
            result.write_results_csv(&mut buffer)?;
            write_file(&out_dir.join("results.csv"), &buffer)?;
            let mut buffer = Vec::new();
            result.write_json(&mut buffer)?;
            write_file(&out_dir.join("coverage.json"), &buffer)?;
            println!(
                "coverage: {} violations in {} trials (fraction {:.4}, delta {})",
                result.violations, result.trials, result.violation_fraction, result.delta
            );
        }
    }
    println!("normalization: {}", normalization_name(config.normalization));
    Ok(0)
}

fn build_operator(config: &OperatorConfig) -> Result<TruncatedOperator<f64>> {
    Ok(match config {
        OperatorConfig::Identity { dim } => {
            TruncatedOperator::from_matrix(RMatrix::identity_scaled(*dim, 1.0), 1, 0.0)?
        }
        OperatorConfig::FilterDft { filter, n, k, k_max } => {
            let tf = filter.build::<f64>()?;
            let ir = impulse_response(&tf, default_impulse_tolerance(&tf))?;
            filter_dft_operator(&ir, *n, *k, *k_max)?
        }
        OperatorConfig::DenseRandom {
            rows,
            cols,
            scale,
            seed,
        } => dense_random_operator(*rows, *cols, *scale, *seed)?,
    })
}

fn cmd_verify(args: CommonArgs) -> Result<i32> {
    configure_jobs(&args);
    let loaded = load_config(&args, "verify")?;
    let mut config: VerifyConfig = serde_json::from_str(&loaded.text).context("parsing verify config")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if config.checks.is_empty() {
        bail!("verification config lists no checks");
    }
    for check in &config.checks {
        if let VerifyCheckConfig::Hw { alphas, .. } = check {
            if alphas.is_empty() {
                bail!("hw check has an empty alpha list");
            }
        }
    }
    let out_dir = resolve_out_dir(&args, "verify-hw");
    write_manifest(&out_dir, "verify-hw", &loaded, Some(config.seed))?;

    let mut all_pass = true;
    let mut stdout = std::io::stdout().lock();
    for (index, check) in config.checks.iter().enumerate() {
        let check_seed = config.seed.wrapping_add(index as u64);
        match check {
            VerifyCheckConfig::Hw {
                name,
                operator,
                law,
                sigma,
                alphas,
            } => {
                let op = build_operator(operator)?;
                let outcome = verify_quadratic_form_tails(
                    &op,
                    *law,
                    *sigma,
                    alphas,
                    config.n_trials,
                    check_seed,
                );
                let mut csv = Vec::new();
                outcome.write_csv(&mut csv)?;
                write_file(&out_dir.join(format!("verify-{name}.csv")), &csv)?;
                writeln!(
                    stdout,
                    "{} {name} (mean {:.6} vs expected {:.6})",
                    if outcome.pass { "PASS" } else { "FAIL" },
                    outcome.sample_mean,
                    outcome.expected_mean
                )?;
                all_pass &= outcome.pass;
            }
            VerifyCheckConfig::NoiseNorm {
                name,
                system,
                n,
                k,
                s_grid,
            } => {
                let spec = system.build::<f64>()?;
                let s_grid: Vec<f64> = s_grid.clone();
                let outcome =
                    verify_noise_norm_tails(&spec, *n, *k, &s_grid, config.n_trials, check_seed)?;
                let mut csv = Vec::new();
                outcome.write_csv(&mut csv)?;
                write_file(&out_dir.join(format!("verify-{name}.csv")), &csv)?;
                writeln!(
                    stdout,
                    "{} {name} (mean |V|^2 {:.6} vs tr Phi {:.6})",
                    if outcome.pass { "PASS" } else { "FAIL" },
                    outcome.mean_sq,
                    outcome.trace_phi
                )?;
                all_pass &= outcome.pass;
            }
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}
