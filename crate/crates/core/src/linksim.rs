//! Monte Carlo link simulation: BER sweeps and constellation dumps.
//!
//! Work is split into channel blocks. A block draws one `H`, prepares the
//! scheme once, and sends `vectors` symbol vectors over it (one vector when
//! `H` is redrawn per trial). Every random draw is keyed by the block index,
//! so a block's outcome does not depend on which worker runs it. Blocks run
//! in fixed-size batches and results are reduced in block order; the stop
//! rule is evaluated block by block during that reduction, which makes the
//! output independent of the worker count.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_channel, sample_noise, transmit_with_noise, LinkConfig};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::modem::{bit_errors, qam16_demodulate, qam16_modulate};
use crate::numerics::ComplexMatrix;
use crate::precoder::{Precoder, PrecoderRegistry};
use crate::rng::{stream, substream, Purpose, Rng};

/// One symbol vector through one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub scheme: String,
    pub bits_tx: Vec<u8>,
    pub bits_rx: Vec<u8>,
    /// Ideal constellation points.
    pub sent: ComplexMatrix,
    /// Equalized received symbols `α y / √ρ_T`.
    pub received: ComplexMatrix,
}

impl TrialRecord {
    pub fn bit_errors(&self) -> u64 {
        bit_errors(&self.bits_tx, &self.bits_rx).expect("equal lengths")
    }
}

/// 95 % Wilson score interval for `errors` out of `trials`. With no errors
/// the lower end is 0 and the upper end is the one-sided 95 % bound.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    if errors == 0 {
        let z2 = 1.645f64 * 1.645;
        return (0.0, (z2 / n) / (1.0 + z2 / n));
    }
    let z = 1.959_963_984_540_054f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Aggregate for one `(SNR, scheme)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub scheme: String,
    /// Symbol vectors that completed.
    pub vectors: u64,
    /// QAM symbols, `K · vectors`.
    pub symbols: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Vectors dropped because the circuit faulted (strict mode only).
    pub failed_trials: u64,
    pub seed: u64,
}

impl BerPoint {
    fn new(snr_db: f64, scheme: &str, users: usize, acc: &Outcome, seed: u64) -> Self {
        let symbols = acc.vectors * users as u64;
        let bits = 4 * symbols;
        let ber = if bits > 0 { acc.errors as f64 / bits as f64 } else { 0.0 };
        let (ci_low, ci_high) = wilson_interval(acc.errors, bits);
        Self {
            snr_db,
            scheme: scheme.to_string(),
            vectors: acc.vectors,
            symbols,
            bit_errors: acc.errors,
            ber,
            ci_low,
            ci_high,
            failed_trials: acc.failed,
            seed,
        }
    }
}

/// Stop rule for one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub max_symbols: u64,
    /// 0 disables the error-count rule.
    pub min_errors: u64,
}

impl StopRule {
    fn done(&self, symbols: u64, errors: u64) -> bool {
        symbols >= self.max_symbols || (self.min_errors > 0 && errors >= self.min_errors)
    }
}

/// How channel draws are shared between symbol vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub vectors_per_block: usize,
    pub batch_blocks: usize,
}

impl BlockPlan {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            vectors_per_block: if cfg.sweep.reuse_h {
                cfg.sweep.vectors_per_channel
            } else {
                1
            },
            batch_blocks: cfg.sweep.batch_blocks,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Outcome {
    vectors: u64,
    errors: u64,
    failed: u64,
}

struct BlockResult {
    /// Per-vector `(errors, failed)` in vector order.
    per_vector: Vec<(u64, bool)>,
    records: Vec<TrialRecord>,
}

/// Everything a block needs besides its index.
struct Cell<'a> {
    scheme: &'a dyn Precoder,
    link: LinkConfig,
    snr_group: u64,
    seed: u64,
    cfg: &'a SimConfig,
    plan: BlockPlan,
    /// Return circuit faults instead of counting them.
    propagate_faults: bool,
}

impl Cell<'_> {
    fn run_block(&self, block: u64, keep: bool) -> Result<BlockResult> {
        let (k, m) = (self.link.users, self.link.antennas);
        let h = sample_channel(k, m, &mut stream(self.seed, Purpose::Channel, block))?;
        let prepared = self
            .scheme
            .prepare(&h, &mut stream(self.seed, Purpose::ProgramInv, block))?;
        let mut bit_rng = stream(self.seed, Purpose::Bits, block);
        let mut noise_rng = substream(self.seed, Purpose::Noise, self.snr_group, block);
        let modem = self.cfg.modem();
        let sqrt_rho = self.link.rho_t.sqrt();

        let mut out = BlockResult {
            per_vector: Vec::with_capacity(self.plan.vectors_per_block),
            records: Vec::new(),
        };
        for v in 0..self.plan.vectors_per_block {
            // Draw everything up front so a dropped vector leaves later
            // vectors unchanged.
            let bits: Vec<u8> = (0..4 * k).map(|_| bit_rng.random_range(0..2u8)).collect();
            let noise = sample_noise(k, self.link.sigma2(), &mut noise_rng)?;
            let s = qam16_modulate(&bits, &modem)?;
            let r = match prepared.precode(&s) {
                Ok(r) => r,
                Err(e) if e.is_circuit_fault() && !self.propagate_faults => {
                    out.per_vector.push((0, true));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let y = transmit_with_noise(&h, &r.x, self.link.rho_t, &noise)?;
            let s_hat = y.scale(r.alpha / sqrt_rho);
            let bits_rx = qam16_demodulate(&s_hat, &modem)?;
            let errors = bit_errors(&bits, &bits_rx)?;
            out.per_vector.push((errors, false));
            if keep {
                out.records.push(TrialRecord {
                    trial: block * self.plan.vectors_per_block as u64 + v as u64,
                    scheme: self.scheme.name().to_string(),
                    bits_tx: bits,
                    bits_rx,
                    sent: s,
                    received: s_hat,
                });
            }
        }
        Ok(out)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs one block per trial index with a fresh channel (single vector).
///
/// Equivalent to trial `trial` of a sweep without channel reuse.
pub fn run_trial(
    cfg: &SimConfig,
    registry: &PrecoderRegistry,
    scheme: &str,
    snr_db: f64,
    trial: u64,
) -> Result<TrialRecord> {
    let precoder = registry.build(scheme, &cfg.precoder_settings()?)?;
    let cell = Cell {
        scheme: precoder.as_ref(),
        link: cfg.link_config(snr_db)?,
        snr_group: snr_group(cfg, snr_db),
        seed: cfg.master_seed,
        cfg,
        plan: BlockPlan {
            vectors_per_block: 1,
            batch_blocks: 1,
        },
        propagate_faults: true,
    };
    let mut res = cell.run_block(trial, true)?;
    Ok(res.records.pop().expect("faults propagate, so the vector completed"))
}

/// Noise streams are keyed by the SNR's position in the config list, or by
/// its bit pattern when it is not listed.
fn snr_group(cfg: &SimConfig, snr_db: f64) -> u64 {
    cfg.link
        .snr_db
        .iter()
        .position(|&s| s == snr_db)
        .map(|i| i as u64)
        .unwrap_or_else(|| snr_db.to_bits())
}

/// Accumulates one `(SNR, scheme)` cell until the stop rule fires.
fn run_cell(cell: &Cell, stop: StopRule, pool: &rayon::ThreadPool, keep: bool) -> Result<(Outcome, Vec<TrialRecord>)> {
    let users = cell.link.users as u64;
    let mut acc = Outcome::default();
    let mut records = Vec::new();
    let mut next_block = 0u64;
    loop {
        let batch: Vec<u64> = (next_block..next_block + cell.plan.batch_blocks as u64).collect();
        next_block += batch.len() as u64;
        let results: Vec<Result<BlockResult>> =
            pool.install(|| batch.par_iter().map(|&b| cell.run_block(b, keep)).collect());
        for res in results {
            let res = res?;
            let mut kept = res.records.into_iter();
            for (errors, failed) in res.per_vector {
                if failed {
                    acc.failed += 1;
                } else {
                    acc.vectors += 1;
                    acc.errors += errors;
                    if keep {
                        records.push(kept.next().expect("one record per completed vector"));
                    }
                }
                if stop.done(acc.vectors * users, acc.errors) {
                    return Ok((acc, records));
                }
            }
        }
        // Guard against a cell where every vector faults.
        if acc.vectors == 0 && acc.failed >= stop.max_symbols.max(1) {
            return Ok((acc, records));
        }
    }
}

/// BER for every `(SNR, scheme)` pair, SNR-major.
pub fn ber_sweep(
    cfg: &SimConfig,
    registry: &PrecoderRegistry,
    snr_list: &[f64],
    schemes: &[String],
    stop: StopRule,
    workers: usize,
) -> Result<Vec<BerPoint>> {
    if snr_list.is_empty() {
        return Err(Error::invalid("SNR list must not be empty"));
    }
    if stop.max_symbols == 0 {
        return Err(Error::invalid("max_symbols must be positive"));
    }
    let settings = cfg.precoder_settings()?;
    let precoders = schemes
        .iter()
        .map(|s| registry.build(s, &settings))
        .collect::<Result<Vec<_>>>()?;
    let pool = pool(workers)?;
    let mut points = Vec::with_capacity(snr_list.len() * schemes.len());
    for (group, &snr) in snr_list.iter().enumerate() {
        let link = cfg.link_config(snr)?;
        for p in &precoders {
            let cell = Cell {
                scheme: p.as_ref(),
                link,
                snr_group: group as u64,
                seed: cfg.master_seed,
                cfg,
                plan: BlockPlan::from_config(cfg),
                propagate_faults: false,
            };
            let (acc, _) = run_cell(&cell, stop, &pool, false)?;
            points.push(BerPoint::new(snr, p.name(), link.users, &acc, cfg.master_seed));
        }
    }
    Ok(points)
}

/// Like [`ber_sweep`] for a single cell, also returning every trial record.
pub fn ber_point_with_records(
    cfg: &SimConfig,
    registry: &PrecoderRegistry,
    snr_db: f64,
    scheme: &str,
    stop: StopRule,
    workers: usize,
) -> Result<(BerPoint, Vec<TrialRecord>)> {
    let p = registry.build(scheme, &cfg.precoder_settings()?)?;
    let link = cfg.link_config(snr_db)?;
    let cell = Cell {
        scheme: p.as_ref(),
        link,
        snr_group: snr_group(cfg, snr_db),
        seed: cfg.master_seed,
        cfg,
        plan: BlockPlan::from_config(cfg),
        propagate_faults: false,
    };
    let (acc, records) = run_cell(&cell, stop, &pool(workers)?, true)?;
    Ok((
        BerPoint::new(snr_db, p.name(), link.users, &acc, cfg.master_seed),
        records,
    ))
}

/// `snr_db,scheme,symbols,bit_errors,ber,ci_low,ci_high,seed`.
pub fn write_ber_csv<W: Write>(points: &[BerPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "snr_db",
        "scheme",
        "symbols",
        "bit_errors",
        "ber",
        "ci_low",
        "ci_high",
        "seed",
    ])?;
    for p in points {
        w.write_record([
            p.snr_db.to_string(),
            p.scheme.to_lowercase(),
            p.symbols.to_string(),
            p.bit_errors.to_string(),
            p.ber.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
            p.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstellationRow {
    pub trial: u64,
    pub user: usize,
    pub re_ideal: f64,
    pub im_ideal: f64,
    pub re_rx: f64,
    pub im_rx: f64,
}

impl ConstellationRow {
    pub fn ideal(&self) -> Complex64 {
        Complex64::new(self.re_ideal, self.im_ideal)
    }

    pub fn received(&self) -> Complex64 {
        Complex64::new(self.re_rx, self.im_rx)
    }
}

/// Received symbol clouds for `n_trials` symbol vectors.
pub fn constellation_dump(
    cfg: &SimConfig,
    registry: &PrecoderRegistry,
    scheme: &str,
    snr_db: f64,
    n_trials: u64,
    workers: usize,
) -> Result<Vec<ConstellationRow>> {
    if n_trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let users = cfg.dimensions.users as u64;
    let stop = StopRule {
        max_symbols: n_trials * users,
        min_errors: 0,
    };
    let (_, records) = ber_point_with_records(cfg, registry, snr_db, scheme, stop, workers)?;
    Ok(records
        .iter()
        .flat_map(|r| {
            r.sent
                .as_slice()
                .iter()
                .zip(r.received.as_slice())
                .enumerate()
                .map(move |(user, (s, y))| ConstellationRow {
                    trial: r.trial,
                    user,
                    re_ideal: s.re,
                    im_ideal: s.im,
                    re_rx: y.re,
                    im_rx: y.im,
                })
        })
        .collect())
}

/// `trial,user,re_ideal,im_ideal,re_rx,im_rx`.
pub fn write_constellation_csv<W: Write>(rows: &[ConstellationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "user", "re_ideal", "im_ideal", "re_rx", "im_rx"])?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.user.to_string(),
            r.re_ideal.to_string(),
            r.im_ideal.to_string(),
            r.re_rx.to_string(),
            r.im_rx.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean distance between received and ideal points.
pub fn mean_deviation(rows: &[ConstellationRow]) -> f64 {
    rows.iter().map(|r| (r.received() - r.ideal()).norm()).sum::<f64>() / rows.len().max(1) as f64
}

/// Fraction of received points nearer their own ideal point than any other
/// constellation point, i.e. decided correctly on both axes.
pub fn fraction_correct(rows: &[ConstellationRow], beta: f64) -> f64 {
    let ok = rows
        .iter()
        .filter(|r| {
            let axis = |rx: f64, ideal: f64| {
                let d = (rx - ideal) / beta;
                // Outer points are unbounded on their outer side.
                let outer = (ideal / beta).abs() > 2.0;
                d.abs() < 1.0 || (outer && d.signum() == ideal.signum())
            };
            axis(r.re_rx, r.re_ideal) && axis(r.im_rx, r.im_ideal)
        })
        .count();
    ok as f64 / rows.len().max(1) as f64
}
