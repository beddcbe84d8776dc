//! Power, energy, latency and operation-count accounting.
//!
//! Unit powers are calibrated constants, not measurements: they are chosen
//! once so that the default 16×128 system lands on the published total with
//! the MVM amplifiers taking about half of it. The report therefore checks
//! accounting consistency rather than predicting power.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circuits::{Schedule, StaticPipeline};
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;
use crate::precoder::AmcPrograms;

/// Per-instance power of each peripheral block (mW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerBudget {
    pub oa_inv: f64,
    pub oa_inverter: f64,
    pub oa_mvm: f64,
    pub sah_buffer: f64,
    pub dac_2bit: f64,
    pub adc_4bit: f64,
    pub input_follower: f64,
}

impl Default for PowerBudget {
    /// Calibrated so that `K = 16, M = 128` totals about 125 mW with the MVM
    /// amplifiers near 50 %.
    fn default() -> Self {
        Self {
            oa_inv: 0.38,
            oa_inverter: 0.2,
            oa_mvm: 0.244,
            sah_buffer: 0.25,
            dac_2bit: 0.06,
            adc_4bit: 0.1,
            input_follower: 0.25,
        }
    }
}

impl PowerBudget {
    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("oa_inv", self.oa_inv),
            ("oa_inverter", self.oa_inverter),
            ("oa_mvm", self.oa_mvm),
            ("sah_buffer", self.sah_buffer),
            ("dac_2bit", self.dac_2bit),
            ("adc_4bit", self.adc_4bit),
            ("input_follower", self.input_follower),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("cost.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, f: f64) -> Self {
        Self {
            oa_inv: self.oa_inv * f,
            oa_inverter: self.oa_inverter * f,
            oa_mvm: self.oa_mvm * f,
            sah_buffer: self.sah_buffer * f,
            dac_2bit: self.dac_2bit * f,
            adc_4bit: self.adc_4bit * f,
            input_follower: self.input_follower * f,
        }
    }
}

/// Published figures of the digital baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DigitalReference {
    pub power_mw: f64,
    pub latency_ns: f64,
}

impl Default for DigitalReference {
    fn default() -> Self {
        Self {
            power_mw: 64.0,
            latency_ns: 1960.0,
        }
    }
}

impl DigitalReference {
    /// mW · ns = pJ.
    pub fn energy_nj(&self) -> f64 {
        self.power_mw * self.latency_ns / 1000.0
    }
}

/// Block counts of the two-step circuit for `K` users and `M` antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentCounts {
    pub oa_inv: usize,
    pub oa_inverter: usize,
    pub oa_mvm: usize,
    pub sah_buffer: usize,
    pub dac_2bit: usize,
    pub adc_4bit: usize,
    pub input_follower: usize,
}

pub fn component_counts(users: usize, antennas: usize) -> Result<ComponentCounts> {
    if users == 0 || antennas == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    let (k2, m2) = (2 * users, 2 * antennas);
    Ok(ComponentCounts {
        oa_inv: k2,
        oa_inverter: k2,
        oa_mvm: m2,
        sah_buffer: k2,
        dac_2bit: k2,
        adc_4bit: m2,
        input_follower: k2,
    })
}

impl ComponentCounts {
    fn entries(&self) -> [usize; 7] {
        [
            self.oa_inv,
            self.oa_inverter,
            self.oa_mvm,
            self.sah_buffer,
            self.dac_2bit,
            self.adc_4bit,
            self.input_follower,
        ]
    }
}

/// `Σ G (V_drive − V_node)²` over a differential pair of arrays (mW when
/// conductances are in μS and voltages in V).
///
/// Cell `(i, j)` of `a` sits between `drive[j]` and `node[i]`; the matching
/// cell of `b` sees the inverted drive `−drive[j]`.
pub fn array_power(a: &RealMatrix, b: &RealMatrix, node: &[f64], drive: &[f64]) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::invalid("positive and negative arrays differ in shape"));
    }
    if node.len() != a.rows() || drive.len() != a.cols() {
        return Err(Error::invalid("voltage vectors do not match the array shape"));
    }
    let mut uw = 0.0;
    for (i, &u) in node.iter().enumerate() {
        for (j, &v) in drive.iter().enumerate() {
            uw += a[(i, j)] * (v - u).powi(2) + b[(i, j)] * (-v - u).powi(2);
        }
    }
    Ok(uw / 1000.0)
}

/// Static dissipation of all RRAM cells at a solved operating point (mW).
/// The shift resistors and feedback resistors are not RRAM and are left out.
pub fn rram_static_power(programs: &AmcPrograms, op: &StaticPipeline) -> Result<f64> {
    let inv = array_power(
        &programs.inv.a,
        &programs.inv.b,
        &op.inv.summing_nodes,
        &op.inv.amp_outputs,
    )?;
    // MVM rows carry the held INV outputs in physical orientation.
    let rows: Vec<f64> = op.held.as_slice().iter().map(|v| -v).collect();
    let mvm = array_power(
        &programs.mvm.a.transpose(),
        &programs.mvm.b.transpose(),
        &op.mvm.summing_nodes,
        &rows,
    )?;
    Ok(inv + mvm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRow {
    pub component: String,
    pub count: usize,
    pub unit_power_mw: f64,
    pub total_mw: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub rows: Vec<ComponentRow>,
    pub total_mw: f64,
    pub latency_ns: f64,
    pub energy_nj: f64,
    pub digital_power_mw: f64,
    pub digital_latency_ns: f64,
    pub digital_energy_nj: f64,
    pub speedup: f64,
    pub efficiency_ratio: f64,
}

impl CostReport {
    pub fn fraction(&self, component: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.component == component).map(|r| r.fraction)
    }

    /// `component,count,unit_power_mw,total_mw,fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "count", "unit_power_mw", "total_mw", "fraction"])?;
        for r in &self.rows {
            w.write_record([
                r.component.clone(),
                r.count.to_string(),
                r.unit_power_mw.to_string(),
                r.total_mw.to_string(),
                r.fraction.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of RRAM cells in both stages.
pub fn rram_cell_count(users: usize, antennas: usize) -> usize {
    let (k2, m2) = (2 * users, 2 * antennas);
    2 * k2 * k2 + 2 * k2 * m2
}

/// Totals, fractions and the comparison with the digital baseline.
pub fn power_report(
    budget: &PowerBudget,
    counts: &ComponentCounts,
    rram_mw: f64,
    rram_cells: usize,
    latency_ns: f64,
    digital: &DigitalReference,
) -> Result<CostReport> {
    budget.validate()?;
    if !(rram_mw >= 0.0 && rram_mw.is_finite()) {
        return Err(Error::invalid(format!(
            "RRAM power must be non-negative, got {rram_mw}"
        )));
    }
    if !(latency_ns > 0.0 && latency_ns.is_finite()) {
        return Err(Error::invalid(format!("latency must be positive, got {latency_ns}")));
    }
    let mut rows: Vec<ComponentRow> = budget
        .entries()
        .iter()
        .zip(counts.entries())
        .map(|(&(name, unit), count)| ComponentRow {
            component: name.to_string(),
            count,
            unit_power_mw: unit,
            total_mw: unit * count as f64,
            fraction: 0.0,
        })
        .collect();
    rows.push(ComponentRow {
        component: "rram".to_string(),
        count: rram_cells,
        unit_power_mw: if rram_cells > 0 {
            rram_mw / rram_cells as f64
        } else {
            0.0
        },
        total_mw: rram_mw,
        fraction: 0.0,
    });
    let total_mw: f64 = rows.iter().map(|r| r.total_mw).sum();
    for r in &mut rows {
        r.fraction = if total_mw > 0.0 { r.total_mw / total_mw } else { 0.0 };
    }
    let energy_nj = total_mw * latency_ns / 1000.0;
    Ok(CostReport {
        rows,
        total_mw,
        latency_ns,
        energy_nj,
        digital_power_mw: digital.power_mw,
        digital_latency_ns: digital.latency_ns,
        digital_energy_nj: digital.energy_nj(),
        speedup: digital.latency_ns / latency_ns,
        efficiency_ratio: digital.energy_nj() / energy_nj,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplexityRow {
    pub scheme: &'static str,
    pub inversion_ops: u64,
    pub multiplication_ops: u64,
}

/// Operation counts of matrix inversion and the subsequent multiplication.
pub fn complexity_table(users: u64, antennas: u64) -> Vec<ComplexityRow> {
    let (k, m) = (users, antennas);
    vec![
        ComplexityRow {
            scheme: "amc",
            inversion_ops: 1,
            multiplication_ops: 1,
        },
        ComplexityRow {
            scheme: "neumann",
            inversion_ops: k.pow(3),
            multiplication_ops: m * k * k,
        },
        ComplexityRow {
            scheme: "qr",
            inversion_ops: 3 * k.pow(3) + 2 * k * k,
            multiplication_ops: m * k * k,
        },
        ComplexityRow {
            scheme: "gauss-jordan",
            inversion_ops: k.pow(3) + k * k,
            multiplication_ops: m * k * k,
        },
    ]
}

/// `scheme,inversion_ops,multiplication_ops`.
pub fn write_complexity_csv<W: Write>(rows: &[ComplexityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "inversion_ops", "multiplication_ops"])?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.inversion_ops.to_string(),
            r.multiplication_ops.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    /// INV window plus MVM window.
    pub amc_ns: f64,
    pub inv_settled_ns: Option<f64>,
    pub mvm_settled_ns: Option<f64>,
    pub digital_ns: f64,
    pub speedup: f64,
}

/// Latency is charged by the schedule windows; measured settling instants
/// are carried alongside.
pub fn latency_report(
    schedule: &Schedule,
    inv_settled_ns: Option<f64>,
    mvm_settled_ns: Option<f64>,
    digital: &DigitalReference,
) -> LatencyReport {
    let amc_ns = schedule.compute_latency_ns();
    LatencyReport {
        amc_ns,
        inv_settled_ns,
        mvm_settled_ns,
        digital_ns: digital.latency_ns,
        speedup: digital.latency_ns / amc_ns,
    }
}
