//! Behavioral models of the inversion (INV) feedback circuit, the
//! multiplication (MVM) crossbar and the sample-and-hold transfer.
//!
//! Each amplifier is a single-pole macromodel driving a purely resistive
//! node network. The inverting input of amplifier `j` sits at the
//! instantaneous KCL voltage
//!
//! ```text
//! u_j = (I_j + Σ_k G_jk v_k) / gΣ_j
//! ```
//!
//! and the output obeys `τ_p dv_j/dt = −A0 u_j − v_j`, with
//! `τ_p = A0 / (2π · GBW)`. The static solvers return the equilibrium of the
//! same equations. Waveforms carry physical node voltages; every returned
//! solution vector is in the mathematical orientation of `Ω_y` / `Ω_x`.

use std::f64::consts::PI;
use std::io::Write;

use crate::crossbar::{CrossbarProgram, Role};
use crate::error::{Error, Result};
use crate::numerics::{min_eigenvalue_sym, ExpandedReal, LuFactors, RealMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OaKind {
    Feedback,
    RailToRail,
}

/// Single-pole operational amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OAModel {
    /// Open-loop DC gain in dB; `+∞` gives an ideal amplifier.
    pub gain_db: f64,
    /// Unity-gain bandwidth.
    pub gbw_hz: f64,
    /// Symmetric supply rail magnitude.
    pub vdd: f64,
    pub kind: OaKind,
}

impl OAModel {
    /// Feedback amplifier of the INV and MVM circuits: 50.5 dB, 157 MHz, ±0.6 V.
    pub fn feedback() -> Self {
        Self {
            gain_db: 50.5,
            gbw_hz: 157e6,
            vdd: 0.6,
            kind: OaKind::Feedback,
        }
    }

    /// Rail-to-rail buffer of the S&H stage: 86.7 dB, 700 MHz, ±0.6 V.
    pub fn rail_to_rail() -> Self {
        Self {
            gain_db: 86.7,
            gbw_hz: 700e6,
            vdd: 0.6,
            kind: OaKind::RailToRail,
        }
    }

    /// Infinite-gain override of the feedback amplifier.
    pub fn ideal() -> Self {
        Self {
            gain_db: f64::INFINITY,
            ..Self::feedback()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_db > 0.0) {
            return Err(Error::invalid(format!(
                "OA gain must be positive, got {} dB",
                self.gain_db
            )));
        }
        if !(self.gbw_hz > 0.0 && self.gbw_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "OA GBW must be positive, got {} Hz",
                self.gbw_hz
            )));
        }
        if !(self.vdd > 0.0 && self.vdd.is_finite()) {
            return Err(Error::invalid(format!(
                "OA supply must be positive, got {} V",
                self.vdd
            )));
        }
        Ok(())
    }

    pub fn a0(&self) -> f64 {
        10f64.powf(self.gain_db / 20.0)
    }

    /// `1 / A0`, exactly zero for the ideal amplifier.
    pub fn inv_a0(&self) -> f64 {
        if self.gain_db.is_infinite() {
            0.0
        } else {
            1.0 / self.a0()
        }
    }

    /// Unity-gain angular frequency `2π · GBW` (rad/s).
    pub fn omega_u(&self) -> f64 {
        2.0 * PI * self.gbw_hz
    }

    /// Open-loop pole time constant `A0 / (2π · GBW)` in seconds.
    pub fn tau_p(&self) -> f64 {
        self.a0() / self.omega_u()
    }

    pub fn is_ideal(&self) -> bool {
        self.gain_db.is_infinite()
    }
}

/// Numerical and operating knobs for the circuit solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Fixed RK4 step (ps).
    pub dt_ps: f64,
    /// Length of each stage window (ns).
    pub t_end_ns: f64,
    /// Absolute settling band (V).
    pub settle_abs_v: f64,
    /// Relative settling band, fraction of the largest final magnitude.
    pub settle_rel: f64,
    /// Saturation and non-convergence become errors.
    pub strict: bool,
    /// Hold-capacitor droop (V/ns).
    pub droop_v_per_ns: f64,
    /// Keep every n-th integration step in the waveform.
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_ps: 10.0,
            t_end_ns: 10.0,
            settle_abs_v: 1e-3,
            settle_rel: 0.005,
            strict: false,
            droop_v_per_ns: 0.0,
            record_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ps > 0.0 && self.dt_ps <= 50.0) {
            return Err(Error::invalid(format!("dt must lie in (0, 50] ps, got {}", self.dt_ps)));
        }
        if !(self.t_end_ns > 0.0 && self.t_end_ns.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be positive, got {} ns",
                self.t_end_ns
            )));
        }
        if !(self.settle_abs_v >= 0.0 && self.settle_rel >= 0.0) {
            return Err(Error::invalid("settling tolerances must be non-negative"));
        }
        if !(self.droop_v_per_ns >= 0.0) {
            return Err(Error::invalid("droop must be non-negative"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_end_ns * 1e3 / self.dt_ps).round() as usize
    }

    /// `max(abs, rel · max|v∞|)`.
    pub fn settle_band(&self, equilibrium: &[f64]) -> f64 {
        let peak = equilibrium.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.settle_abs_v.max(self.settle_rel * peak)
    }
}

/// Equilibrium of one circuit stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    /// Stage result in mathematical orientation.
    pub output: ExpandedReal,
    /// Physical amplifier output voltages.
    pub amp_outputs: Vec<f64>,
    /// Physical voltages of the summing (virtual-ground) nodes.
    pub summing_nodes: Vec<f64>,
    /// Amplifiers whose ideal output exceeds the rail.
    pub saturated: Vec<usize>,
}

/// Time record of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    /// Sample instants relative to the stage start (ns).
    pub times_ns: Vec<f64>,
    /// Physical amplifier outputs per sample.
    pub voltages: Vec<Vec<f64>>,
    /// First instant after which every output stays inside the settling band.
    pub settled_at_ns: Option<f64>,
    /// Physical outputs at the end of the window.
    pub final_voltages: Vec<f64>,
    /// Equilibrium the settling band is measured against.
    pub equilibrium: Vec<f64>,
    /// Amplifiers that touched a rail at any step.
    pub clipped: Vec<bool>,
    /// Sign that maps physical outputs onto the mathematical orientation.
    orientation: f64,
}

impl TransientResult {
    /// Final state in mathematical orientation.
    pub fn output(&self) -> ExpandedReal {
        ExpandedReal::vector(self.final_voltages.iter().map(|v| self.orientation * v).collect())
            .expect("even-length stage output")
    }

    pub fn peak_abs_voltage(&self) -> f64 {
        self.voltages.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Conductance from each amplifier output onto each summing node.
enum Network {
    Dense(RealMatrix),
    /// Each output feeds back only onto its own node.
    Diagonal(Vec<f64>),
}

impl Network {
    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Network::Dense(g) => g.matvec(v).expect("square network"),
            Network::Diagonal(d) => d.iter().zip(v).map(|(g, x)| g * x).collect(),
        }
    }
}

/// Linear node network of one stage: `u = (inject + G v) / gΣ`.
struct Stage {
    feedback: Network,
    /// Constant injected current per summing node.
    inject: Vec<f64>,
    g_sigma: Vec<f64>,
}

impl Stage {
    fn inv(p: &CrossbarProgram, inject: Vec<f64>) -> Self {
        let n = p.a.rows();
        let g_sigma = (0..n)
            .map(|j| p.a.row(j).iter().sum::<f64>() + p.b.row(j).iter().sum::<f64>() + p.d[j])
            .collect();
        Self {
            feedback: Network::Dense(p.effective_conductance()),
            inject,
            g_sigma,
        }
    }

    /// MVM columns: the feedback network is the diagonal `g_f`; the row
    /// drive enters as a constant current `Gᵀ r`.
    fn mvm(p: &CrossbarProgram, drive: &[f64]) -> Result<Self> {
        let g = p.a.sub(&p.b)?;
        let inject = g.matvec_transposed(drive)?;
        let cols = p.a.cols();
        let mut g_sigma = vec![p.g_unit; cols];
        for i in 0..p.a.rows() {
            for (c, s) in g_sigma.iter_mut().enumerate() {
                *s += p.a[(i, c)] + p.b[(i, c)];
            }
        }
        Ok(Self {
            feedback: Network::Diagonal(vec![p.g_unit; cols]),
            inject,
            g_sigma,
        })
    }

    fn summing_nodes(&self, v: &[f64]) -> Vec<f64> {
        self.feedback
            .matvec(v)
            .iter()
            .zip(&self.inject)
            .zip(&self.g_sigma)
            .map(|((g, i), s)| (i + g) / s)
            .collect()
    }

    /// Equilibrium `(G + diag(gΣ)/A0) v = −I`.
    fn equilibrium(&self, oa: &OAModel) -> Result<Vec<f64>> {
        let inv_a0 = oa.inv_a0();
        let mut m = match &self.feedback {
            Network::Dense(g) => g.clone(),
            Network::Diagonal(d) => {
                return d
                    .iter()
                    .zip(&self.g_sigma)
                    .zip(&self.inject)
                    .map(|((g, s), i)| {
                        let k = g + s * inv_a0;
                        if k == 0.0 {
                            Err(Error::CircuitSingular)
                        } else {
                            Ok(-i / k)
                        }
                    })
                    .collect();
            }
        };
        for (j, s) in self.g_sigma.iter().enumerate() {
            m[(j, j)] += s * inv_a0;
        }
        let lu = LuFactors::new(&m).map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::CircuitSingular,
            other => other,
        })?;
        let rhs: Vec<f64> = self.inject.iter().map(|i| -i).collect();
        lu.solve(&rhs)
    }

    /// `dv/dt = −ω_u (u + v / A0)`.
    fn derivative(&self, v: &[f64], oa: &OAModel) -> Vec<f64> {
        let w = oa.omega_u();
        let inv_a0 = oa.inv_a0();
        self.summing_nodes(v)
            .iter()
            .zip(v)
            .map(|(u, vj)| -w * (u + vj * inv_a0))
            .collect()
    }

    fn solve_static(
        &self,
        oa: &OAModel,
        orientation: f64,
        cfg: &SolverConfig,
        stage: &'static str,
    ) -> Result<StaticSolution> {
        let v = self.equilibrium(oa)?;
        let saturated: Vec<usize> = v
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > oa.vdd)
            .map(|(j, _)| j)
            .collect();
        if cfg.strict {
            if let Some(&j) = saturated.first() {
                return Err(Error::Saturation {
                    stage,
                    node: j,
                    voltage: v[j],
                    rail: oa.vdd,
                });
            }
        }
        let summing_nodes = self.summing_nodes(&v);
        Ok(StaticSolution {
            output: ExpandedReal::vector(v.iter().map(|x| orientation * x).collect())?,
            amp_outputs: v,
            summing_nodes,
            saturated,
        })
    }

    fn integrate(
        &self,
        oa: &OAModel,
        orientation: f64,
        cfg: &SolverConfig,
        stage: &'static str,
    ) -> Result<TransientResult> {
        oa.validate()?;
        cfg.validate()?;
        if oa.is_ideal() {
            return Err(Error::invalid("transient analysis needs a finite-gain amplifier"));
        }
        let equilibrium: Vec<f64> = self
            .equilibrium(oa)?
            .into_iter()
            .map(|x| x.clamp(-oa.vdd, oa.vdd))
            .collect();
        let band = cfg.settle_band(&equilibrium);
        let n = self.g_sigma.len();
        let dt = cfg.dt_ps * 1e-12;
        let steps = cfg.steps();

        let mut v = vec![0.0; n];
        let mut clipped = vec![false; n];
        let mut times_ns = vec![0.0];
        let mut voltages = vec![v.clone()];
        let outside = |v: &[f64]| v.iter().zip(&equilibrium).any(|(a, b)| (a - b).abs() > band);
        let mut last_outside: Option<usize> = outside(&v).then_some(0);

        let axpy = |v: &[f64], k: &[f64], h: f64| -> Vec<f64> { v.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        for step in 1..=steps {
            let k1 = self.derivative(&v, oa);
            let k2 = self.derivative(&axpy(&v, &k1, dt / 2.0), oa);
            let k3 = self.derivative(&axpy(&v, &k2, dt / 2.0), oa);
            let k4 = self.derivative(&axpy(&v, &k3, dt), oa);
            for j in 0..n {
                let next = v[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                if next.abs() > oa.vdd {
                    clipped[j] = true;
                }
                v[j] = next.clamp(-oa.vdd, oa.vdd);
            }
            if outside(&v) {
                last_outside = Some(step);
            }
            if step % cfg.record_every == 0 || step == steps {
                times_ns.push(step as f64 * cfg.dt_ps * 1e-3);
                voltages.push(v.clone());
            }
        }

        let settled_at_ns = match last_outside {
            None => Some(0.0),
            Some(s) if s == steps => None,
            Some(s) => Some((s + 1) as f64 * cfg.dt_ps * 1e-3),
        };
        if cfg.strict {
            if settled_at_ns.is_none() {
                return Err(Error::NonConvergence {
                    stage,
                    t_end_ns: cfg.t_end_ns,
                });
            }
            if let Some(j) = clipped.iter().position(|&c| c) {
                return Err(Error::Saturation {
                    stage,
                    node: j,
                    voltage: v[j],
                    rail: oa.vdd,
                });
            }
        }
        Ok(TransientResult {
            times_ns,
            voltages,
            settled_at_ns,
            final_voltages: v,
            equilibrium,
            clipped,
            orientation,
        })
    }
}

fn inv_stage(p: &CrossbarProgram, s: &ExpandedReal, oa: &OAModel) -> Result<Stage> {
    if p.role != Role::Inv {
        return Err(Error::invalid("INV solver needs an INV program"));
    }
    let n = p.a.rows();
    if s.len() != n {
        return Err(Error::invalid(format!(
            "input of length {} for a {n}-row INV array",
            s.len()
        )));
    }
    oa.validate()?;
    let scale = p.input_scale();
    let dac: Vec<f64> = s.as_slice().iter().map(|x| x * scale).collect();
    if let Some((j, v)) = dac.iter().enumerate().find(|(_, v)| v.abs() > oa.vdd) {
        return Err(Error::invalid(format!(
            "DAC voltage {v:.4} V on row {j} exceeds the ±{} V supply",
            oa.vdd
        )));
    }
    // DAC voltage through a unit conductance.
    let inject = dac.iter().map(|v| p.g_unit * v).collect();
    Ok(Stage::inv(p, inject))
}

/// Steady state of the INV circuit for expanded symbols `s` (unscaled).
///
/// In ideal mode the output equals `(σ_s / σ_Z) · Ω_Z⁻¹ Ω_s`.
pub fn inv_static(p: &CrossbarProgram, s: &ExpandedReal, oa: &OAModel, cfg: &SolverConfig) -> Result<StaticSolution> {
    inv_stage(p, s, oa)?.solve_static(oa, -1.0, cfg, "INV")
}

/// Integrates the INV circuit from rest with the input switched on at `t = 0`.
pub fn inv_transient(
    p: &CrossbarProgram,
    s: &ExpandedReal,
    oa: &OAModel,
    cfg: &SolverConfig,
) -> Result<TransientResult> {
    inv_stage(p, s, oa)?.integrate(oa, -1.0, cfg, "INV")
}

/// KCL residual `‖(G + diag(gΣ)/A0) v + I‖∞` at a physical INV solution.
pub fn inv_kcl_residual(p: &CrossbarProgram, s: &ExpandedReal, oa: &OAModel, amp_outputs: &[f64]) -> Result<f64> {
    let stage = inv_stage(p, s, oa)?;
    if amp_outputs.len() != stage.g_sigma.len() {
        return Err(Error::invalid("one amplifier output per INV row is required"));
    }
    let gv = stage.feedback.matvec(amp_outputs);
    Ok(gv
        .iter()
        .zip(amp_outputs)
        .zip(&stage.g_sigma)
        .zip(&stage.inject)
        .map(|(((g, v), s), i)| (g + s * v * oa.inv_a0() + i).abs())
        .fold(0.0, f64::max))
}

/// Injected row currents of the INV circuit (μA when conductances are μS).
pub fn inv_input_currents(p: &CrossbarProgram, s: &ExpandedReal, oa: &OAModel) -> Result<Vec<f64>> {
    Ok(inv_stage(p, s, oa)?.inject)
}

fn mvm_stage(p: &CrossbarProgram, v_in: &ExpandedReal, oa: &OAModel) -> Result<Stage> {
    if p.role != Role::Mvm {
        return Err(Error::invalid("MVM solver needs an MVM program"));
    }
    if v_in.len() != p.a.rows() {
        return Err(Error::invalid(format!(
            "input of length {} for a {}-row MVM array",
            v_in.len(),
            p.a.rows()
        )));
    }
    oa.validate()?;
    if let Some((j, v)) = v_in.as_slice().iter().enumerate().find(|(_, v)| v.abs() > oa.vdd) {
        return Err(Error::invalid(format!(
            "MVM input {v:.4} V on row {j} exceeds the ±{} V supply",
            oa.vdd
        )));
    }
    // Rows see the held INV outputs, i.e. the negated mathematical vector.
    let drive: Vec<f64> = v_in.as_slice().iter().map(|v| -v).collect();
    Stage::mvm(p, &drive)
}

/// Column outputs of the MVM circuit,
/// `x = (a − b)ᵀ v / g_f · 1 / (1 + gΣ_col / (A0 g_f))`.
pub fn mvm_compute(
    p: &CrossbarProgram,
    v_in: &ExpandedReal,
    oa: &OAModel,
    cfg: &SolverConfig,
) -> Result<StaticSolution> {
    mvm_stage(p, v_in, oa)?.solve_static(oa, 1.0, cfg, "MVM")
}

pub fn mvm_transient(
    p: &CrossbarProgram,
    v_in: &ExpandedReal,
    oa: &OAModel,
    cfg: &SolverConfig,
) -> Result<TransientResult> {
    mvm_stage(p, v_in, oa)?.integrate(oa, 1.0, cfg, "MVM")
}

/// Hold-capacitor droop: every voltage decays linearly toward zero and stops
/// there.
pub fn sample_hold(v: &ExpandedReal, hold_ns: f64, droop_v_per_ns: f64) -> Result<ExpandedReal> {
    if v.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("held voltages must be finite"));
    }
    if !(hold_ns >= 0.0 && droop_v_per_ns >= 0.0) {
        return Err(Error::invalid("hold time and droop must be non-negative"));
    }
    let loss = droop_v_per_ns * hold_ns;
    let held = v
        .as_slice()
        .iter()
        .map(|&x| x.signum() * (x.abs() - loss).max(0.0))
        .collect();
    ExpandedReal::vector(held)
}

/// Smallest eigenvalue of `S^{-1/2} sym(G_eff) S^{-1/2}`, `S = diag(gΣ)`:
/// the loop matrix whose bottom eigenvalue sets the INV response rate.
pub fn normalized_min_eigenvalue(p: &CrossbarProgram) -> Result<f64> {
    if p.role != Role::Inv {
        return Err(Error::invalid("loop eigenvalue is defined for INV programs"));
    }
    let stage = Stage::inv(p, vec![0.0; p.a.rows()]);
    let g = p.effective_conductance().symmetrized()?;
    let n = g.rows();
    let mut m = g.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = g[(i, j)] / (stage.g_sigma[i] * stage.g_sigma[j]).sqrt();
        }
    }
    min_eigenvalue_sym(&m)
}

/// Enable schedule of the precoding pipeline (ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub input_on_ns: f64,
    pub transfer_ns: f64,
    pub end_ns: f64,
}

impl Schedule {
    /// Input at 10 ns, S&H transfer at 10 ns later, equal MVM window.
    pub fn for_window(window_ns: f64) -> Self {
        Self {
            input_on_ns: 10.0,
            transfer_ns: 10.0 + window_ns,
            end_ns: 10.0 + 2.0 * window_ns,
        }
    }

    /// Time from input application to the end of the MVM window.
    pub fn compute_latency_ns(&self) -> f64 {
        self.end_ns - self.input_on_ns
    }
}

/// Full INV → S&H → MVM time record.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRecord {
    pub schedule: Schedule,
    pub inv: TransientResult,
    pub held: ExpandedReal,
    pub mvm: TransientResult,
}

impl PipelineRecord {
    /// MVM outputs at the end of the window (mathematical orientation).
    pub fn output(&self) -> ExpandedReal {
        self.mvm.output()
    }

    pub fn inv_settled_ns(&self) -> Option<f64> {
        self.inv.settled_at_ns
    }

    pub fn mvm_settled_ns(&self) -> Option<f64> {
        self.mvm.settled_at_ns
    }

    /// Largest node voltage anywhere in the record.
    pub fn peak_abs_voltage(&self) -> f64 {
        self.inv.peak_abs_voltage().max(self.mvm.peak_abs_voltage())
    }

    /// `time_ns,stage,node_index,voltage_v` rows with 9 significant digits.
    ///
    /// Both stages sit at 0 V before their enable edge; the INV record ends at
    /// the S&H transfer.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_ns", "stage", "node_index", "voltage_v"])?;
        let sch = self.schedule;
        let grid = self.inv.times_ns.windows(2).next().map_or(0.1, |w| w[1] - w[0]);
        let mut idle = Vec::new();
        let mut t = 0.0;
        while t < sch.input_on_ns - 1e-9 {
            idle.push(t);
            t += grid;
        }
        let emit = |w: &mut csv::Writer<W>, t: f64, stage: &str, vs: &[f64]| -> Result<()> {
            for (j, v) in vs.iter().enumerate() {
                w.write_record([fmt_sig(t), stage.to_string(), j.to_string(), fmt_sig(*v)])?;
            }
            Ok(())
        };
        let inv_zero = vec![0.0; self.inv.final_voltages.len()];
        let mvm_zero = vec![0.0; self.mvm.final_voltages.len()];
        for &t in &idle {
            emit(&mut w, t, "INV", &inv_zero)?;
        }
        for (t, vs) in self.inv.times_ns.iter().zip(&self.inv.voltages) {
            emit(&mut w, sch.input_on_ns + t, "INV", vs)?;
        }
        let mut t = 0.0;
        while t < sch.transfer_ns - 1e-9 {
            emit(&mut w, t, "MVM", &mvm_zero)?;
            t += grid;
        }
        for (t, vs) in self.mvm.times_ns.iter().zip(&self.mvm.voltages) {
            emit(&mut w, sch.transfer_ns + t, "MVM", vs)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats with 9 significant digits in plain decimal notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// Runs the two-stage transient on the enable schedule: INV for one window
/// after the input edge, S&H transfer, then MVM for one window.
pub fn pipeline_transient(
    inv: &CrossbarProgram,
    mvm: &CrossbarProgram,
    s: &ExpandedReal,
    oa: &OAModel,
    cfg: &SolverConfig,
) -> Result<PipelineRecord> {
    let schedule = Schedule::for_window(cfg.t_end_ns);
    let inv_rec = inv_transient(inv, s, oa, cfg)?;
    let held = sample_hold(&inv_rec.output(), cfg.t_end_ns, cfg.droop_v_per_ns)?;
    let mvm_rec = mvm_transient(mvm, &held, oa, cfg)?;
    Ok(PipelineRecord {
        schedule,
        inv: inv_rec,
        held,
        mvm: mvm_rec,
    })
}

/// Static INV → S&H → MVM chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPipeline {
    pub inv: StaticSolution,
    pub held: ExpandedReal,
    pub mvm: StaticSolution,
}

pub fn pipeline_static(
    inv: &CrossbarProgram,
    mvm: &CrossbarProgram,
    s: &ExpandedReal,
    oa: &OAModel,
    cfg: &SolverConfig,
) -> Result<StaticPipeline> {
    let inv_sol = inv_static(inv, s, oa, cfg)?;
    let held = sample_hold(&inv_sol.output, cfg.t_end_ns, cfg.droop_v_per_ns)?;
    let mvm_sol = mvm_compute(mvm, &held, oa, cfg)?;
    Ok(StaticPipeline {
        inv: inv_sol,
        held,
        mvm: mvm_sol,
    })
}
