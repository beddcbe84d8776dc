//! `amc-precode`: runs the simulator from a JSON config and writes CSV outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amc_precoding::channel::sample_channel;
use amc_precoding::circuits::{pipeline_static, pipeline_transient, Schedule};
use amc_precoding::config::SimConfig;
use amc_precoding::costmodel::{
    complexity_table, component_counts, latency_report, power_report, rram_cell_count, rram_static_power,
    write_complexity_csv,
};
use amc_precoding::crossbar::MapStats;
use amc_precoding::linksim::{ber_sweep, constellation_dump, write_ber_csv, write_constellation_csv, StopRule};
use amc_precoding::modem::qam16_modulate;
use amc_precoding::numerics::{expand_vector, gram};
use amc_precoding::precoder::AmcPrograms;
use amc_precoding::rng::{stream, Purpose, Rng};
use amc_precoding::{Error, PrecoderRegistry, Result};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "amc-precode",
    version,
    about = "Analog matrix computing ZF precoding simulator"
)]
struct Cli {
    /// JSON config; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Treat saturation and non-settling as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for Monte Carlo runs; 0 uses every core. Results do not
    /// depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Precode one symbol vector and print x, alpha and diagnostics.
    Precode {
        #[arg(long, default_value = "amc")]
        scheme: String,
        /// Instance index; selects the channel, symbols and programming noise.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// INV → S&H → MVM waveforms (waveform.csv).
    Transient {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// BER against SNR (ber.csv).
    BerSweep {
        /// Comma-separated SNR list in dB; defaults to `link.snr_db`.
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
        /// Comma-separated scheme names; defaults to `sweep.schemes`.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Received symbol clouds (constellation.csv).
    Constellation {
        #[arg(long, default_value_t = 30.0)]
        snr: f64,
        #[arg(long, default_value = "amc")]
        scheme: String,
        /// Symbol vectors; defaults to `sweep.trials`.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Gram-entry distributions before and after scaling (mapstats.csv).
    MapStats {
        /// Random channels to accumulate; defaults to `sweep.trials`.
        #[arg(long)]
        matrices: Option<u64>,
    },
    /// Power breakdown and operation counts (power.csv, complexity.csv).
    PowerReport,
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::from_path(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if cli.strict {
        cfg.solver.strict = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes through a temp file in the target directory and renames it into place.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Effective config next to each output, `<stem>.config.json`.
fn write_sidecar(out: &Path, stem: &str, cfg: &SimConfig) -> Result<()> {
    write_atomic(&out.join(format!("{stem}.config.json")), |w| {
        writeln!(w, "{}", cfg.to_json())?;
        Ok(())
    })
}

fn instance(cfg: &SimConfig, trial: u64) -> Result<(amc_precoding::ComplexMatrix, amc_precoding::ComplexMatrix)> {
    let (k, m) = (cfg.dimensions.users, cfg.dimensions.antennas);
    let h = sample_channel(k, m, &mut stream(cfg.master_seed, Purpose::Channel, trial))?;
    let mut rng = stream(cfg.master_seed, Purpose::Bits, trial);
    let bits: Vec<u8> = (0..4 * k).map(|_| rng.random_range(0..2u8)).collect();
    let s = qam16_modulate(&bits, &cfg.modem())?;
    Ok((h, s))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    fs::create_dir_all(out)?;
    let registry = PrecoderRegistry::with_defaults();

    match &cli.command {
        Command::Precode { scheme, trial } => {
            let (h, s) = instance(&cfg, *trial)?;
            let precoder = registry.build(scheme, &cfg.precoder_settings()?)?;
            let prepared = precoder.prepare(&h, &mut stream(cfg.master_seed, Purpose::ProgramInv, *trial))?;
            let r = prepared.precode(&s)?;
            let d = &r.diagnostics;
            let report = serde_json::json!({
                "scheme": scheme,
                "trial": trial,
                "seed": cfg.master_seed,
                "alpha": r.alpha,
                "x": r.x.as_slice().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "diagnostics": {
                    "inv_saturated": d.inv_saturated,
                    "mvm_saturated": d.mvm_saturated,
                    "clip_count": d.clip_count,
                    "inv_settled_ns": d.inv_settled_ns,
                    "mvm_settled_ns": d.mvm_settled_ns,
                    "peak_voltage_v": d.peak_voltage,
                },
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Transient { trial } => {
            let (h, s) = instance(&cfg, *trial)?;
            let programs = AmcPrograms::new(
                &h,
                &cfg.device_model()?,
                &mut stream(cfg.master_seed, Purpose::ProgramInv, *trial),
            )?;
            let rec = pipeline_transient(
                &programs.inv,
                &programs.mvm,
                &expand_vector(&s)?,
                &cfg.oa_model(),
                &cfg.solver_config(),
            )?;
            write_atomic(&out.join("waveform.csv"), |w| rec.write_csv(w))?;
            write_sidecar(out, "waveform", &cfg)?;
            let fmt = |t: Option<f64>| t.map_or("not settled".to_string(), |t| format!("{t:.2} ns"));
            println!(
                "INV settled {}, MVM settled {}, peak {:.4} V",
                fmt(rec.inv_settled_ns()),
                fmt(rec.mvm_settled_ns()),
                rec.peak_abs_voltage()
            );
        }
        Command::BerSweep { snr, schemes } => {
            let snr = snr.clone().unwrap_or_else(|| cfg.link.snr_db.clone());
            let schemes = schemes.clone().unwrap_or_else(|| cfg.sweep.schemes.clone());
            let stop = StopRule {
                max_symbols: cfg.sweep.max_symbols,
                min_errors: cfg.sweep.min_errors,
            };
            let points = ber_sweep(&cfg, &registry, &snr, &schemes, stop, cli.workers)?;
            write_atomic(&out.join("ber.csv"), |w| write_ber_csv(&points, w))?;
            write_sidecar(out, "ber", &cfg)?;
            for p in &points {
                println!(
                    "{:>5} dB {:<8} ber {:.3e} ({} errors, {} symbols)",
                    p.snr_db, p.scheme, p.ber, p.bit_errors, p.symbols
                );
            }
        }
        Command::Constellation { snr, scheme, trials } => {
            let n = trials.unwrap_or(cfg.sweep.trials);
            let rows = constellation_dump(&cfg, &registry, scheme, *snr, n, cli.workers)?;
            write_atomic(&out.join("constellation.csv"), |w| write_constellation_csv(&rows, w))?;
            write_sidecar(out, "constellation", &cfg)?;
            println!("{} points written", rows.len());
        }
        Command::MapStats { matrices } => {
            let n = matrices.unwrap_or(cfg.sweep.trials);
            let (k, m) = (cfg.dimensions.users, cfg.dimensions.antennas);
            let mut stats = MapStats::default();
            for i in 0..n {
                let h = sample_channel(k, m, &mut stream(cfg.master_seed, Purpose::Channel, i))?;
                stats.accumulate(&gram(&h)?, m)?;
            }
            write_atomic(&out.join("mapstats.csv"), |w| stats.write_csv(w))?;
            write_sidecar(out, "mapstats", &cfg)?;
            println!("{n} Gram matrices accumulated");
        }
        Command::PowerReport => {
            let (k, m) = (cfg.dimensions.users, cfg.dimensions.antennas);
            // RRAM dissipation is taken from a solved operating point.
            let (h, s) = instance(&cfg, 0)?;
            let programs = AmcPrograms::new(
                &h,
                &cfg.device_model()?,
                &mut stream(cfg.master_seed, Purpose::ProgramInv, 0),
            )?;
            let op = pipeline_static(
                &programs.inv,
                &programs.mvm,
                &expand_vector(&s)?,
                &cfg.oa_model(),
                &cfg.solver_config(),
            )?;
            let rram_mw = rram_static_power(&programs, &op)?;
            let schedule = Schedule::for_window(cfg.solver.t_end_ns);
            let latency = latency_report(&schedule, None, None, &cfg.cost.digital);
            let report = power_report(
                &cfg.cost.unit_power_mw,
                &component_counts(k, m)?,
                rram_mw,
                rram_cell_count(k, m),
                latency.amc_ns,
                &cfg.cost.digital,
            )?;
            let table = complexity_table(k as u64, m as u64);
            write_atomic(&out.join("power.csv"), |w| report.write_csv(w))?;
            write_atomic(&out.join("complexity.csv"), |w| write_complexity_csv(&table, w))?;
            write_sidecar(out, "power", &cfg)?;
            println!(
                "total {:.3} mW, energy {:.4} nJ over {} ns; digital {:.2} nJ; speedup {:.1}x, efficiency {:.2}x",
                report.total_mw,
                report.energy_nj,
                report.latency_ns,
                report.digital_energy_nj,
                report.speedup,
                report.efficiency_ratio
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amc-precode: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::UnknownScheme(_) => 2,
                ref e if e.is_circuit_fault() => 3,
                _ => 1,
            })
        }
    }
}
