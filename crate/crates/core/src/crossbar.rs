//! RRAM device model and the mapping of `Ω_Z` and `Ω_H` onto pairs of
//! non-negative conductance arrays.
//!
//! All conductances are in μS. Matrix values are converted with a single
//! conductance-per-unit `g_unit = g_max / 0.5`, so a scaled entry of
//! magnitude 0.5 lands on the top level.

use std::io::Write;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::{expand_matrix, ComplexMatrix, ExpandedReal, Layout, RealMatrix};
use crate::rng::RngStream;

/// Diagonal offset subtracted from `σ_Z Ω_Z` before mapping and restored by
/// the fixed resistor array.
pub const DIAGONAL_SHIFT: f64 = 2.0;

/// Largest scaled matrix magnitude that fits in the conductance window.
pub const FULL_SCALE_ENTRY: f64 = 0.5;

/// Programmable conductance model of one RRAM cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    /// Deep high-resistance state.
    pub g_hrs: f64,
    /// Programmable levels, strictly increasing, all above `g_hrs`.
    levels: Vec<f64>,
    /// Absolute programming error standard deviation.
    pub sigma_prog: f64,
    pub quantization: bool,
    /// When false the array accepts any non-negative conductance (ideal mode).
    pub bounded: bool,
}

impl Default for DeviceModel {
    /// 4-bit cell: HRS at 0.1 μS plus 15 levels on 2..=30 μS.
    fn default() -> Self {
        Self::uniform(0.1, 2.0, 30.0, 15, 0.15, true).expect("default device is valid")
    }
}

impl DeviceModel {
    pub fn uniform(
        g_hrs: f64,
        level_min: f64,
        level_max: f64,
        level_count: usize,
        sigma_prog: f64,
        quantization: bool,
    ) -> Result<Self> {
        if level_count == 0 {
            return Err(Error::invalid("device needs at least one conductance level"));
        }
        let levels = if level_count == 1 {
            vec![level_max]
        } else {
            let step = (level_max - level_min) / (level_count - 1) as f64;
            (0..level_count).map(|i| level_min + step * i as f64).collect()
        };
        Self::with_levels(g_hrs, levels, sigma_prog, quantization)
    }

    pub fn with_levels(g_hrs: f64, levels: Vec<f64>, sigma_prog: f64, quantization: bool) -> Result<Self> {
        if !(g_hrs > 0.0 && g_hrs.is_finite()) {
            return Err(Error::invalid(format!("g_hrs must be positive, got {g_hrs}")));
        }
        if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("conductance levels must be finite and non-empty"));
        }
        if levels[0] <= g_hrs || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "conductance levels must increase strictly and sit above g_hrs",
            ));
        }
        if !(sigma_prog >= 0.0 && sigma_prog.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_prog must be non-negative, got {sigma_prog}"
            )));
        }
        Ok(Self {
            g_hrs,
            levels,
            sigma_prog,
            quantization,
            bounded: true,
        })
    }

    /// Continuous, noiseless, unbounded conductances.
    pub fn ideal() -> Self {
        Self {
            quantization: false,
            sigma_prog: 0.0,
            bounded: false,
            ..Self::default()
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn g_max(&self) -> f64 {
        *self.levels.last().expect("non-empty")
    }

    /// Conductance per matrix unit.
    pub fn g_unit(&self) -> f64 {
        self.g_max() / FULL_SCALE_ENTRY
    }

    /// Largest gap between adjacent programmable states (HRS included).
    pub fn max_level_spacing(&self) -> f64 {
        std::iter::once(self.g_hrs)
            .chain(self.levels.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Spacing of the uniform level grid.
    pub fn level_spacing(&self) -> f64 {
        self.levels.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Nearest programmable state (HRS or a level); targets above the top level
/// return the top level. Ties resolve to the lower state.
pub fn quantize(target: f64, dev: &DeviceModel) -> Result<f64> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::invalid(format!(
            "conductance target must be non-negative, got {target}"
        )));
    }
    let mut best = dev.g_hrs;
    let mut best_dist = (target - dev.g_hrs).abs();
    for &level in dev.levels() {
        let d = (target - level).abs();
        if d < best_dist {
            best = level;
            best_dist = d;
        }
    }
    Ok(best)
}

/// Programs every target: quantize (if enabled), add Gaussian programming
/// error, clamp at zero. Cells are visited row-major.
pub fn program(targets: &RealMatrix, dev: &DeviceModel, rng: &mut RngStream) -> Result<RealMatrix> {
    let noise = if dev.sigma_prog > 0.0 {
        Some(Normal::new(0.0, dev.sigma_prog).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(targets.as_slice().len());
    for &t in targets.as_slice() {
        let base = if dev.quantization {
            quantize(t, dev)?
        } else if t >= 0.0 {
            t
        } else {
            return Err(Error::invalid(format!(
                "conductance target must be non-negative, got {t}"
            )));
        };
        let g = match &noise {
            Some(n) => (base + n.sample(rng)).max(0.0),
            None => base,
        };
        out.push(g);
    }
    RealMatrix::from_vec(targets.rows(), targets.cols(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Inv,
    Mvm,
}

/// A programmed pair of arrays realizing `scale · matrix` as `(a − b) / g_unit`
/// (plus the resistor diagonal `d` for the inversion circuit).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarProgram {
    pub role: Role,
    pub a: RealMatrix,
    pub b: RealMatrix,
    /// Ideal resistor diagonal, `2 · g_unit` per row (INV only).
    pub d: Vec<f64>,
    pub g_unit: f64,
    /// Matrix scale factor applied before mapping.
    pub scale: f64,
    /// Targets that exceeded the top level and were clipped.
    pub clip_count: usize,
}

impl CrossbarProgram {
    pub fn dim(&self) -> (usize, usize) {
        (self.a.rows(), self.a.cols())
    }

    /// `a − b + diag(d)`, the conductance matrix the INV loop sees.
    pub fn effective_conductance(&self) -> RealMatrix {
        let mut g = self.a.sub(&self.b).expect("a and b share a shape");
        for (i, &d) in self.d.iter().enumerate() {
            g[(i, i)] += d;
        }
        g
    }

    /// Scale applied to the input vector so that the circuit output needs no
    /// rescaling: `σ_s = √σ_Z` for the inversion array.
    pub fn input_scale(&self) -> f64 {
        self.scale.sqrt()
    }
}

/// Positive and negative parts of `r`, both non-negative.
pub fn sign_split(r: f64) -> (f64, f64) {
    if r >= 0.0 {
        (r, 0.0)
    } else {
        (0.0, -r)
    }
}

/// Conductance targets for the positive and negative arrays.
pub fn split_targets(values: &RealMatrix, g_unit: f64) -> (RealMatrix, RealMatrix) {
    (
        values.map(|r| sign_split(r).0 * g_unit),
        values.map(|r| sign_split(r).1 * g_unit),
    )
}

fn clip(targets: &RealMatrix, dev: &DeviceModel) -> (RealMatrix, usize) {
    if !dev.bounded {
        return (targets.clone(), 0);
    }
    let g_max = dev.g_max();
    let count = targets.as_slice().iter().filter(|&&t| t > g_max).count();
    (targets.map(|t| t.min(g_max)), count)
}

fn program_pair(
    values: &RealMatrix,
    dev: &DeviceModel,
    rng: &mut RngStream,
) -> Result<(RealMatrix, RealMatrix, usize)> {
    let g_unit = dev.g_unit();
    let (ta, tb) = split_targets(values, g_unit);
    let (ta, ca) = clip(&ta, dev);
    let (tb, cb) = clip(&tb, dev);
    let a = program(&ta, dev, rng)?;
    let b = program(&tb, dev, rng)?;
    Ok((a, b, ca + cb))
}

/// Scale applied to the Gram matrix, `2 / M` (1/64 at `M = 128`).
pub fn gram_scale(antennas: usize) -> f64 {
    2.0 / antennas as f64
}

/// Scale applied to the channel matrix and the symbol vector, `√(2 / M)`.
pub fn channel_scale(antennas: usize) -> f64 {
    (2.0 / antennas as f64).sqrt()
}

/// `expand(σ_Z Z) − 2·I`, the shifted matrix stored in the INV arrays.
pub fn shifted_gram(z: &ComplexMatrix, antennas: usize) -> RealMatrix {
    let mut m = expand_matrix(&z.scale(gram_scale(antennas))).into_matrix();
    for i in 0..m.rows() {
        m[(i, i)] -= DIAGONAL_SHIFT;
    }
    m
}

fn check_hermitian(z: &ComplexMatrix) -> Result<()> {
    if z.rows() != z.cols() || z.rows() == 0 {
        return Err(Error::invalid("Gram matrix must be square and non-empty"));
    }
    let tol = 1e-9 * z.max_abs().max(1.0);
    for i in 0..z.rows() {
        let d = z[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > tol {
            return Err(Error::invalid(format!(
                "Gram diagonal entry {i} must be real and positive, got {d}"
            )));
        }
        for j in 0..i {
            if (z[(i, j)] - z[(j, i)].conj()).norm() > tol {
                return Err(Error::invalid(format!("Gram matrix is not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Maps the Gram matrix onto the inversion arrays.
pub fn map_inv(z: &ComplexMatrix, antennas: usize, dev: &DeviceModel, rng: &mut RngStream) -> Result<CrossbarProgram> {
    check_hermitian(z)?;
    if antennas == 0 {
        return Err(Error::invalid("antenna count must be positive"));
    }
    let shifted = shifted_gram(z, antennas);
    let (a, b, clip_count) = program_pair(&shifted, dev, rng)?;
    let g_unit = dev.g_unit();
    Ok(CrossbarProgram {
        role: Role::Inv,
        d: vec![DIAGONAL_SHIFT * g_unit; shifted.rows()],
        a,
        b,
        g_unit,
        scale: gram_scale(antennas),
        clip_count,
    })
}

/// Maps the channel matrix onto the multiplication arrays.
pub fn map_mvm(h: &ComplexMatrix, dev: &DeviceModel, rng: &mut RngStream) -> Result<CrossbarProgram> {
    if h.rows() == 0 || h.cols() == 0 {
        return Err(Error::invalid("channel matrix must be non-empty"));
    }
    if !h.is_finite() {
        return Err(Error::invalid("channel matrix must be finite"));
    }
    let scale = channel_scale(h.cols());
    let values = expand_matrix(&h.scale(scale)).into_matrix();
    let (a, b, clip_count) = program_pair(&values, dev, rng)?;
    Ok(CrossbarProgram {
        role: Role::Mvm,
        a,
        b,
        d: Vec::new(),
        g_unit: dev.g_unit(),
        scale,
        clip_count,
    })
}

/// The matrix a program actually stores, in scaled-matrix units.
pub fn readback(p: &CrossbarProgram) -> ExpandedReal {
    let mut m = p.a.sub(&p.b).expect("a and b share a shape").scale(1.0 / p.g_unit);
    if p.role == Role::Inv {
        for i in 0..m.rows() {
            m[(i, i)] += DIAGONAL_SHIFT;
        }
    }
    ExpandedReal::new(m, Layout::MatrixBlock).expect("expanded arrays have even shape")
}

/// Entry populations tracked by [`MapStats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    DiagPreshift,
    DiagPostshift,
    Offdiag,
}

impl Population {
    pub const ALL: [Population; 3] = [Population::DiagPreshift, Population::DiagPostshift, Population::Offdiag];

    pub fn tag(self) -> &'static str {
        match self {
            Population::DiagPreshift => "diag_preshift",
            Population::DiagPostshift => "diag_postshift",
            Population::Offdiag => "offdiag",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    counts: Vec<u64>,
    below: u64,
    above: u64,
    n: u64,
    sum: f64,
    within_half: u64,
}

impl Tally {
    fn add(&mut self, x: f64, lo: f64, width: f64) {
        self.n += 1;
        self.sum += x;
        if x.abs() <= FULL_SCALE_ENTRY {
            self.within_half += 1;
        }
        // Bin edges are `lo + width * i`; nudge the index so a value always
        // lands in the bin whose reported edges contain it.
        let edge = |i: f64| lo + width * i;
        let mut idx = ((x - lo) / width).floor();
        if x < edge(idx) {
            idx -= 1.0;
        } else if x >= edge(idx + 1.0) {
            idx += 1.0;
        }
        if idx < 0.0 {
            self.below += 1;
        } else if idx as usize >= self.counts.len() {
            self.above += 1;
        } else {
            self.counts[idx as usize] += 1;
        }
    }
}

/// Histograms of `σ_Z`-scaled expanded Gram entries, before and after the
/// diagonal shift, accumulated over any number of matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStats {
    lo: f64,
    width: f64,
    bins: usize,
    tallies: [Tally; 3],
    matrices: u64,
}

impl Default for MapStats {
    /// 100 bins of width 0.05 over `[-1.5, 3.5)`.
    fn default() -> Self {
        Self::new(-1.5, 3.5, 100)
    }
}

impl MapStats {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0, "histogram range must be non-empty");
        let tally = Tally {
            counts: vec![0; bins],
            ..Tally::default()
        };
        Self {
            lo,
            width: (hi - lo) / bins as f64,
            bins,
            tallies: [tally.clone(), tally.clone(), tally],
            matrices: 0,
        }
    }

    fn tally(&self, p: Population) -> &Tally {
        &self.tallies[p as usize]
    }

    pub fn accumulate(&mut self, z: &ComplexMatrix, antennas: usize) -> Result<()> {
        check_hermitian(z)?;
        let scaled = expand_matrix(&z.scale(gram_scale(antennas))).into_matrix();
        let (lo, width) = (self.lo, self.width);
        for i in 0..scaled.rows() {
            for j in 0..scaled.cols() {
                let x = scaled[(i, j)];
                if i == j {
                    self.tallies[Population::DiagPreshift as usize].add(x, lo, width);
                    self.tallies[Population::DiagPostshift as usize].add(x - DIAGONAL_SHIFT, lo, width);
                } else {
                    self.tallies[Population::Offdiag as usize].add(x, lo, width);
                }
            }
        }
        self.matrices += 1;
        Ok(())
    }

    pub fn matrices(&self) -> u64 {
        self.matrices
    }

    pub fn count(&self, p: Population) -> u64 {
        self.tally(p).n
    }

    pub fn mean(&self, p: Population) -> f64 {
        let t = self.tally(p);
        t.sum / t.n as f64
    }

    /// Fraction of the population with magnitude at most 0.5.
    pub fn fraction_within_half(&self, p: Population) -> f64 {
        let t = self.tally(p);
        t.within_half as f64 / t.n as f64
    }

    /// `(bin_low, bin_high, count)` rows for one population.
    pub fn histogram(&self, p: Population) -> Vec<(f64, f64, u64)> {
        let t = self.tally(p);
        (0..self.bins)
            .map(|i| {
                let edge = |k: usize| self.lo + self.width * k as f64;
                (edge(i), edge(i + 1), t.counts[i])
            })
            .collect()
    }

    /// Counts falling outside the histogram range, `(below, above)`.
    pub fn out_of_range(&self, p: Population) -> (u64, u64) {
        let t = self.tally(p);
        (t.below, t.above)
    }

    /// `bin_low,bin_high,count,population` rows, every population in turn.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count", "population"])?;
        for p in Population::ALL {
            for (low, high, count) in self.histogram(p) {
                w.write_record([
                    format!("{low:.6}"),
                    format!("{high:.6}"),
                    count.to_string(),
                    p.tag().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram summary of a single Gram matrix.
pub fn mapping_stats(z: &ComplexMatrix, antennas: usize) -> Result<MapStats> {
    let mut stats = MapStats::default();
    stats.accumulate(z, antennas)?;
    Ok(stats)
}
