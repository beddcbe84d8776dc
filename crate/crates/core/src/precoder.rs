//! Zero-forcing precoders: exact digital, the analog two-step pipeline, and
//! the truncated Neumann series.
//!
//! Every scheme sits behind [`Precoder`]. `prepare` does the per-channel
//! work (factorization, crossbar programming, Gram matrix) once, and the
//! returned [`PreparedPrecoder`] maps symbol vectors to transmit vectors.
//! Schemes are looked up by name in a [`PrecoderRegistry`].

use std::collections::BTreeMap;
use std::fmt;

use crate::circuits::{inv_static, inv_transient, mvm_compute, mvm_transient, sample_hold, OAModel, SolverConfig};
use crate::crossbar::{map_inv, map_mvm, CrossbarProgram, DeviceModel};
use crate::error::{Error, Result};
use crate::numerics::{
    collapse_vector, expand_matrix, expand_vector, gram, ComplexMatrix, ExpandedReal, LuFactors, RealMatrix,
};
use crate::rng::RngStream;

/// Side information from one precoding call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// INV amplifiers whose output hit (or would exceed) the rail.
    pub inv_saturated: usize,
    /// MVM amplifiers whose output hit (or would exceed) the rail.
    pub mvm_saturated: usize,
    /// Conductance targets clipped at the top level, both stages.
    pub clip_count: usize,
    pub inv_settled_ns: Option<f64>,
    pub mvm_settled_ns: Option<f64>,
    /// Largest amplifier output magnitude (V).
    pub peak_voltage: f64,
}

impl Diagnostics {
    pub fn saturated(&self) -> bool {
        self.inv_saturated + self.mvm_saturated > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeResult {
    /// Unit-norm transmit vector, `M × 1`.
    pub x: ComplexMatrix,
    /// `‖x_raw‖₂`; the receiver scales by it to undo the normalization.
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

impl PrecodeResult {
    fn from_raw(x_raw: ComplexMatrix, diagnostics: Diagnostics) -> Result<Self> {
        let alpha = x_raw.norm();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("precoded vector has norm {alpha}")));
        }
        Ok(Self {
            x: x_raw.scale(1.0 / alpha),
            alpha,
            diagnostics,
        })
    }
}

fn check_symbols(h: &ComplexMatrix, s: &ComplexMatrix) -> Result<()> {
    if s.cols() != 1 || s.rows() != h.rows() {
        return Err(Error::invalid(format!(
            "symbol vector {}x{} does not match {} users",
            s.rows(),
            s.cols(),
            h.rows()
        )));
    }
    if !s.is_finite() {
        return Err(Error::invalid("symbols must be finite"));
    }
    Ok(())
}

fn check_channel(h: &ComplexMatrix) -> Result<()> {
    if h.rows() == 0 || h.rows() > h.cols() {
        return Err(Error::invalid(format!(
            "channel must be K x M with 1 <= K <= M, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(Error::invalid("channel must be finite"));
    }
    Ok(())
}

/// `Hᴴ y` for an expanded `y`, returned as a complex column.
fn adjoint_product(h_expanded: &RealMatrix, y: &[f64]) -> Result<ComplexMatrix> {
    collapse_vector(&h_expanded.matvec_transposed(y)?)
}

/// A precoding scheme before it has seen a channel.
pub trait Precoder: Send + Sync {
    fn name(&self) -> &str;

    /// Per-channel setup. `rng` feeds any stochastic setup step (crossbar
    /// programming); deterministic schemes ignore it.
    fn prepare(&self, h: &ComplexMatrix, rng: &mut RngStream) -> Result<Box<dyn PreparedPrecoder>>;
}

/// A scheme bound to one channel realization.
pub trait PreparedPrecoder: Send {
    fn precode(&self, s: &ComplexMatrix) -> Result<PrecodeResult>;
}

/// Exact ZF through an LU factorization of the expanded Gram matrix.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigitalZf;

struct DigitalPrepared {
    h: ComplexMatrix,
    h_expanded: RealMatrix,
    lu: LuFactors,
}

impl DigitalPrepared {
    fn new(h: &ComplexMatrix) -> Result<Self> {
        check_channel(h)?;
        let z = gram(h)?;
        Ok(Self {
            h: h.clone(),
            h_expanded: expand_matrix(h).into_matrix(),
            lu: LuFactors::new(expand_matrix(&z).matrix())?,
        })
    }
}

impl PreparedPrecoder for DigitalPrepared {
    fn precode(&self, s: &ComplexMatrix) -> Result<PrecodeResult> {
        check_symbols(&self.h, s)?;
        let y = self.lu.solve(expand_vector(s)?.as_slice())?;
        PrecodeResult::from_raw(adjoint_product(&self.h_expanded, &y)?, Diagnostics::default())
    }
}

impl Precoder for DigitalZf {
    fn name(&self) -> &str {
        "digital"
    }

    fn prepare(&self, h: &ComplexMatrix, _rng: &mut RngStream) -> Result<Box<dyn PreparedPrecoder>> {
        Ok(Box::new(DigitalPrepared::new(h)?))
    }
}

/// `x_raw = Hᴴ (H Hᴴ)⁻¹ s`, normalized.
pub fn zf_digital(h: &ComplexMatrix, s: &ComplexMatrix) -> Result<PrecodeResult> {
    DigitalPrepared::new(h)?.precode(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmcMode {
    /// Circuit equilibria.
    #[default]
    Static,
    /// Integrated waveforms read at the end of each stage window.
    Transient,
}

impl AmcMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "static" => Ok(Self::Static),
            "transient" => Ok(Self::Transient),
            other => Err(Error::Config(format!("unknown solver mode `{other}`"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Transient => "transient",
        }
    }
}

/// Hardware description of the analog pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcSettings {
    pub device: DeviceModel,
    pub oa: OAModel,
    pub solver: SolverConfig,
    pub mode: AmcMode,
}

impl Default for AmcSettings {
    fn default() -> Self {
        Self {
            device: DeviceModel::default(),
            oa: OAModel::feedback(),
            solver: SolverConfig::default(),
            mode: AmcMode::Static,
        }
    }
}

impl AmcSettings {
    /// No quantization, no programming noise, infinite amplifier gain.
    pub fn ideal() -> Self {
        Self {
            device: DeviceModel::ideal(),
            oa: OAModel::ideal(),
            ..Self::default()
        }
    }
}

/// Both crossbars programmed for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcPrograms {
    pub inv: CrossbarProgram,
    pub mvm: CrossbarProgram,
    users: usize,
}

impl AmcPrograms {
    /// Programs the INV array and then the MVM array from the same stream.
    pub fn new(h: &ComplexMatrix, device: &DeviceModel, rng: &mut RngStream) -> Result<Self> {
        check_channel(h)?;
        let z = gram(h)?;
        let inv = map_inv(&z, h.cols(), device, rng)?;
        let mvm = map_mvm(h, device, rng)?;
        Ok(Self {
            inv,
            mvm,
            users: h.rows(),
        })
    }

    /// Runs one symbol vector through INV → S&H → MVM and normalizes the
    /// read-out.
    pub fn precode(&self, s: &ComplexMatrix, settings: &AmcSettings) -> Result<PrecodeResult> {
        if s.cols() != 1 || s.rows() != self.users {
            return Err(Error::invalid(format!(
                "symbol vector {}x{} does not match {} users",
                s.rows(),
                s.cols(),
                self.users
            )));
        }
        let s_exp = expand_vector(s)?;
        let oa = &settings.oa;
        let cfg = &settings.solver;
        let mut diag = Diagnostics {
            clip_count: self.inv.clip_count + self.mvm.clip_count,
            ..Diagnostics::default()
        };
        let x: ExpandedReal = match settings.mode {
            AmcMode::Static => {
                let inv = inv_static(&self.inv, &s_exp, oa, cfg)?;
                let held = sample_hold(&inv.output, cfg.t_end_ns, cfg.droop_v_per_ns)?;
                let held = clamp_to_rails(held, oa.vdd)?;
                let mvm = mvm_compute(&self.mvm, &held, oa, cfg)?;
                diag.inv_saturated = inv.saturated.len();
                diag.mvm_saturated = mvm.saturated.len();
                diag.peak_voltage = peak(&inv.amp_outputs).max(peak(&mvm.amp_outputs));
                mvm.output
            }
            AmcMode::Transient => {
                let inv = inv_transient(&self.inv, &s_exp, oa, cfg)?;
                let held = sample_hold(&inv.output(), cfg.t_end_ns, cfg.droop_v_per_ns)?;
                let mvm = mvm_transient(&self.mvm, &held, oa, cfg)?;
                diag.inv_saturated = inv.clipped.iter().filter(|&&c| c).count();
                diag.mvm_saturated = mvm.clipped.iter().filter(|&&c| c).count();
                diag.inv_settled_ns = inv.settled_at_ns;
                diag.mvm_settled_ns = mvm.settled_at_ns;
                diag.peak_voltage = inv.peak_abs_voltage().max(mvm.peak_abs_voltage());
                mvm.output()
            }
        };
        // The MVM read-out is already unscaled: σ_H σ_s / σ_Z = 1.
        let x_raw = collapse_vector(x.as_slice())?;
        PrecodeResult::from_raw(x_raw, diag)
    }
}

fn peak(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// A saturated INV amplifier cannot deliver more than its rail to the hold
/// stage.
fn clamp_to_rails(v: ExpandedReal, vdd: f64) -> Result<ExpandedReal> {
    ExpandedReal::vector(v.as_slice().iter().map(|x| x.clamp(-vdd, vdd)).collect())
}

/// The analog two-step pipeline.
#[derive(Debug, Clone, Default)]
pub struct AmcZf {
    pub settings: AmcSettings,
}

struct AmcPrepared {
    programs: AmcPrograms,
    settings: AmcSettings,
}

impl PreparedPrecoder for AmcPrepared {
    fn precode(&self, s: &ComplexMatrix) -> Result<PrecodeResult> {
        self.programs.precode(s, &self.settings)
    }
}

impl Precoder for AmcZf {
    fn name(&self) -> &str {
        "amc"
    }

    fn prepare(&self, h: &ComplexMatrix, rng: &mut RngStream) -> Result<Box<dyn PreparedPrecoder>> {
        Ok(Box::new(AmcPrepared {
            programs: AmcPrograms::new(h, &self.settings.device, rng)?,
            settings: self.settings.clone(),
        }))
    }
}

/// Programs fresh crossbars for `h` and precodes one vector.
pub fn zf_amc(
    h: &ComplexMatrix,
    s: &ComplexMatrix,
    settings: &AmcSettings,
    rng: &mut RngStream,
) -> Result<PrecodeResult> {
    check_symbols(h, s)?;
    AmcPrograms::new(h, &settings.device, rng)?.precode(s, settings)
}

/// Truncated Neumann series around the Gram diagonal.
#[derive(Debug, Clone, Copy)]
pub struct NeumannZf {
    pub terms: usize,
}

impl Default for NeumannZf {
    fn default() -> Self {
        Self { terms: 4 }
    }
}

struct NeumannPrepared {
    h: ComplexMatrix,
    h_expanded: RealMatrix,
    z: RealMatrix,
    diag: Vec<f64>,
    terms: usize,
}

impl NeumannPrepared {
    fn new(h: &ComplexMatrix, terms: usize) -> Result<Self> {
        check_channel(h)?;
        if terms == 0 {
            return Err(Error::invalid("Neumann series needs at least one term"));
        }
        let z = expand_matrix(&gram(h)?).into_matrix();
        let diag: Vec<f64> = (0..z.rows()).map(|i| z[(i, i)]).collect();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("Gram diagonal must be positive"));
        }
        Ok(Self {
            h: h.clone(),
            h_expanded: expand_matrix(h).into_matrix(),
            z,
            diag,
            terms,
        })
    }

    /// `Σ_k (I − D⁻¹Z)^k D⁻¹ s`.
    ///
    /// The iteration matrix is similar to a symmetric one under `D^{1/2}`, so
    /// in that weighted norm successive terms shrink whenever the series
    /// converges. Growth of the weighted norm is reported as divergence.
    fn solve(&self, s: &[f64]) -> Result<Vec<f64>> {
        let weighted = |t: &[f64]| t.iter().zip(&self.diag).map(|(x, d)| x * x * d).sum::<f64>().sqrt();
        let mut term: Vec<f64> = s.iter().zip(&self.diag).map(|(x, d)| x / d).collect();
        let mut sum = term.clone();
        let mut previous = weighted(&term);
        for k in 1..self.terms {
            let zt = self.z.matvec(&term)?;
            for ((t, z), d) in term.iter_mut().zip(&zt).zip(&self.diag) {
                *t -= z / d;
            }
            let current = weighted(&term);
            if current > previous * (1.0 + 1e-12) && current > 1e-300 {
                return Err(Error::Divergence {
                    term: k,
                    previous,
                    current,
                });
            }
            for (acc, t) in sum.iter_mut().zip(&term) {
                *acc += t;
            }
            previous = current;
        }
        Ok(sum)
    }
}

impl PreparedPrecoder for NeumannPrepared {
    fn precode(&self, s: &ComplexMatrix) -> Result<PrecodeResult> {
        check_symbols(&self.h, s)?;
        let y = self.solve(expand_vector(s)?.as_slice())?;
        PrecodeResult::from_raw(adjoint_product(&self.h_expanded, &y)?, Diagnostics::default())
    }
}

impl Precoder for NeumannZf {
    fn name(&self) -> &str {
        "neumann"
    }

    fn prepare(&self, h: &ComplexMatrix, _rng: &mut RngStream) -> Result<Box<dyn PreparedPrecoder>> {
        Ok(Box::new(NeumannPrepared::new(h, self.terms)?))
    }
}

pub fn zf_neumann(h: &ComplexMatrix, s: &ComplexMatrix, n_terms: usize) -> Result<PrecodeResult> {
    NeumannPrepared::new(h, n_terms)?.precode(s)
}

/// Everything a builder may need to construct a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSettings {
    pub amc: AmcSettings,
    pub neumann_terms: usize,
}

impl Default for PrecoderSettings {
    fn default() -> Self {
        Self {
            amc: AmcSettings::default(),
            neumann_terms: NeumannZf::default().terms,
        }
    }
}

pub type Builder = Box<dyn Fn(&PrecoderSettings) -> Box<dyn Precoder> + Send + Sync>;

/// Name → constructor table for precoding schemes.
pub struct PrecoderRegistry {
    builders: BTreeMap<String, Builder>,
}

impl fmt::Debug for PrecoderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.builders.keys()).finish()
    }
}

impl Default for PrecoderRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl PrecoderRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// `digital`, `amc` and `neumann`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("digital", Box::new(|_| Box::new(DigitalZf)));
        r.register(
            "amc",
            Box::new(|s| {
                Box::new(AmcZf {
                    settings: s.amc.clone(),
                })
            }),
        );
        r.register("neumann", Box::new(|s| Box::new(NeumannZf { terms: s.neumann_terms })));
        r
    }

    /// Adds or replaces a scheme. Names are matched case-sensitively and
    /// should be lowercase.
    pub fn register(&mut self, name: &str, builder: Builder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn build(&self, name: &str, settings: &PrecoderSettings) -> Result<Box<dyn Precoder>> {
        self.builders
            .get(name)
            .map(|b| b(settings))
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }
}

/// Relative L2 distance `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = a.sub(b)?;
    let den = b.norm();
    if den == 0.0 {
        return Err(Error::invalid("reference vector is zero"));
    }
    Ok(diff.norm() / den)
}

/// `‖H x − s / α‖∞`, the residual inter-user leakage.
pub fn zf_residual(h: &ComplexMatrix, s: &ComplexMatrix, r: &PrecodeResult) -> Result<f64> {
    let hx = h.matmul(&r.x)?;
    Ok(hx.sub(&s.scale(1.0 / r.alpha))?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channel;
    use crate::modem::{qam16_modulate, ModemConfig};
    use crate::rng::{stream, Purpose, Rng};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_symbols(k: usize, seed: u64) -> ComplexMatrix {
        let mut rng = stream(seed, Purpose::Bits, 0);
        let bits: Vec<u8> = (0..4 * k).map(|_| rng.random_range(0..2u8)).collect();
        qam16_modulate(&bits, &ModemConfig::default()).unwrap()
    }

    fn instance(seed: u64) -> (ComplexMatrix, ComplexMatrix) {
        let h = sample_channel(16, 128, &mut stream(seed, Purpose::Channel, 0)).unwrap();
        (h, random_symbols(16, seed))
    }

    #[test]
    fn digital_hand_example() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)]]).unwrap();
        let s = ComplexMatrix::column(vec![c(1.0, 0.0)]).unwrap();
        let r = zf_digital(&h, &s).unwrap();
        let half = 0.5f64.sqrt();
        assert!((r.alpha - half).abs() < 1e-15);
        assert!((r.x[(0, 0)] - c(half, 0.0)).norm() < 1e-15);
        assert!((r.x[(1, 0)] - c(half, 0.0)).norm() < 1e-15);
        let hx = h.matmul(&r.x).unwrap()[(0, 0)];
        assert!((hx - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn digital_identity_channel() {
        let h = ComplexMatrix::identity(3);
        let s = ComplexMatrix::column(vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.0, 3.0)]).unwrap();
        let r = zf_digital(&h, &s).unwrap();
        let want = s.scale(1.0 / s.norm());
        assert!(r.x.sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn digital_cancels_interference() {
        for seed in 0..5 {
            let (h, s) = instance(seed);
            let r = zf_digital(&h, &s).unwrap();
            assert!((r.x.norm() - 1.0).abs() < 1e-9);
            assert!(zf_residual(&h, &s, &r).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn digital_rejects_rank_deficient_channel() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(2.0, 0.0), c(2.0, 0.0)]]).unwrap();
        let s = ComplexMatrix::column(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(zf_digital(&h, &s), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn ideal_amc_matches_digital() {
        for seed in 0..5 {
            let (h, s) = instance(seed);
            let d = zf_digital(&h, &s).unwrap();
            let a = zf_amc(&h, &s, &AmcSettings::ideal(), &mut stream(seed, Purpose::ProgramInv, 0)).unwrap();
            assert!(relative_error(&a.x, &d.x).unwrap() <= 1e-9);
            assert!((a.alpha - d.alpha).abs() <= 1e-9 * d.alpha);
        }
    }

    #[test]
    fn default_amc_stays_inside_rails() {
        for seed in 0..20 {
            let (h, s) = instance(seed);
            let a = zf_amc(
                &h,
                &s,
                &AmcSettings::default(),
                &mut stream(seed, Purpose::ProgramInv, 0),
            )
            .unwrap();
            assert!(!a.diagnostics.saturated(), "seed {seed}");
            assert!(a.diagnostics.peak_voltage <= 0.6);
            assert!((a.x.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn transient_mode_reports_settling() {
        let (h, s) = instance(3);
        let settings = AmcSettings {
            mode: AmcMode::Transient,
            solver: SolverConfig {
                t_end_ns: 40.0,
                ..SolverConfig::default()
            },
            ..AmcSettings::default()
        };
        let mut rng = stream(3, Purpose::ProgramInv, 0);
        let progs = AmcPrograms::new(&h, &settings.device, &mut rng).unwrap();
        let tr = progs.precode(&s, &settings).unwrap();
        let st = progs
            .precode(
                &s,
                &AmcSettings {
                    mode: AmcMode::Static,
                    ..settings.clone()
                },
            )
            .unwrap();
        assert!(tr.diagnostics.inv_settled_ns.is_some());
        assert!(tr.diagnostics.mvm_settled_ns.is_some());
        assert!(relative_error(&tr.x, &st.x).unwrap() < 0.02);
    }

    #[test]
    fn neumann_diagonal_gram_is_exact_in_one_term() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let s = ComplexMatrix::column(vec![c(1.0, -1.0), c(3.0, 1.0)]).unwrap();
        let n = zf_neumann(&h, &s, 1).unwrap();
        let d = zf_digital(&h, &s).unwrap();
        assert!(relative_error(&n.x, &d.x).unwrap() < 1e-15);
    }

    #[test]
    fn neumann_error_decreases_with_terms() {
        let (h, s) = instance(11);
        let d = zf_digital(&h, &s).unwrap();
        let errs: Vec<f64> = (1..=4)
            .map(|n| relative_error(&zf_neumann(&h, &s, n).unwrap().x, &d.x).unwrap())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn neumann_converges_on_dominant_instance() {
        let h = sample_channel(4, 4096, &mut stream(5, Purpose::Channel, 0)).unwrap();
        let s = random_symbols(4, 5);
        let d = zf_digital(&h, &s).unwrap();
        let n = zf_neumann(&h, &s, 20).unwrap();
        assert!(relative_error(&n.x, &d.x).unwrap() <= 1e-6);
    }

    #[test]
    fn neumann_reports_divergence() {
        // Nearly collinear users: spectral radius of I − D⁻¹Z close to 1 + ε.
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.1, 0.0)],
            vec![c(1.0, 0.0), c(0.9, 0.0), c(0.0, 0.1)],
        ])
        .unwrap();
        let s = ComplexMatrix::column(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(zf_neumann(&h, &s, 50), Err(Error::Divergence { .. })));
        assert!(zf_neumann(&h, &s, 0).is_err());
    }

    #[test]
    fn registry_builds_by_name() {
        let reg = PrecoderRegistry::with_defaults();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["amc", "digital", "neumann"]);
        let settings = PrecoderSettings::default();
        let (h, s) = instance(2);
        let d = zf_digital(&h, &s).unwrap();
        for name in ["digital", "amc", "neumann"] {
            let p = reg.build(name, &settings).unwrap();
            assert_eq!(p.name(), name);
            let prepared = p.prepare(&h, &mut stream(2, Purpose::ProgramInv, 0)).unwrap();
            let r = prepared.precode(&s).unwrap();
            assert!(relative_error(&r.x, &d.x).unwrap() < 0.5);
        }
        assert!(matches!(reg.build("mmse", &settings), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn custom_scheme_can_be_registered() {
        struct Matched;
        struct MatchedPrepared(ComplexMatrix);
        impl PreparedPrecoder for MatchedPrepared {
            fn precode(&self, s: &ComplexMatrix) -> Result<PrecodeResult> {
                PrecodeResult::from_raw(self.0.adjoint().matmul(s)?, Diagnostics::default())
            }
        }
        impl Precoder for Matched {
            fn name(&self) -> &str {
                "matched"
            }
            fn prepare(&self, h: &ComplexMatrix, _: &mut RngStream) -> Result<Box<dyn PreparedPrecoder>> {
                Ok(Box::new(MatchedPrepared(h.clone())))
            }
        }
        let mut reg = PrecoderRegistry::with_defaults();
        reg.register("matched", Box::new(|_| Box::new(Matched)));
        let p = reg.build("matched", &PrecoderSettings::default()).unwrap();
        let (h, s) = instance(0);
        let r = p
            .prepare(&h, &mut stream(0, Purpose::ProgramInv, 0))
            .unwrap()
            .precode(&s)
            .unwrap();
        assert!((r.x.norm() - 1.0).abs() < 1e-12);
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    fn median_error(device: DeviceModel, n: u64) -> f64 {
        let settings = AmcSettings {
            device,
            ..AmcSettings::default()
        };
        median(
            (0..n)
                .map(|seed| {
                    let (h, s) = instance(1000 + seed);
                    let d = zf_digital(&h, &s).unwrap();
                    let a = zf_amc(&h, &s, &settings, &mut stream(seed, Purpose::ProgramInv, 0)).unwrap();
                    relative_error(&a.x, &d.x).unwrap()
                })
                .collect(),
        )
    }

    #[test]
    fn error_shrinks_with_device_precision() {
        let n = 60;
        let noisy = median_error(DeviceModel::default(), n);
        let with = |sigma: f64, quantization: bool| {
            let mut d = DeviceModel::default();
            d.sigma_prog = sigma;
            d.quantization = quantization;
            d
        };
        let quieter = median_error(with(0.05, true), n);
        let noiseless = median_error(with(0.0, true), n);
        let continuous = median_error(with(0.0, false), n);
        assert!(
            noisy >= quieter && quieter >= noiseless,
            "{noisy} {quieter} {noiseless}"
        );
        assert!(noiseless >= continuous, "{noiseless} {continuous}");
    }
}
