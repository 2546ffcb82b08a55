//! Time-dependent wave packets built as spectral superpositions of the
//! exact stationary states, for the scalar step and for the two decoupled
//! channels of a spin-1/2 particle entering a Zeeman step.
//!
//! For a grid point `(x, T)` the field is
//!
//! ```text
//! psi(x, T) = sum_j w_j A(k_j) psi_{k_j}(x) exp(-i E(k_j) T)
//! ```
//!
//! where `(k_j, w_j)` are quadrature nodes, `A` is the Gaussian spectrum and
//! `E(k) = k^2/2 + v1`. Each point sums over nodes in ascending index order
//! with a fixed lane split, so the result does not depend on how rows are
//! distributed over threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::KQuadrature;
use crate::scattering::{Branch, StationaryState};
use crate::units::{trapezoid, DensityField, GaussianSpectrum, Region, SpacetimeGrid, StepPotential};

/// Captured initial norm below which the grid window is considered to clip the packet.
pub const NORM_LEAKAGE_THRESHOLD: f64 = 0.999;

/// Smallest region norm for which a centroid is reported.
pub const EMPTY_REGION_NORM: f64 = 1e-9;

/// Zeeman energy `mu B` in region 2; zero field in region 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeemanStep {
    pub mu_b: f64,
}

impl ZeemanStep {
    pub fn new(mu_b: f64) -> Result<Self> {
        if !(mu_b.is_finite() && mu_b >= 0.0) {
            return Err(Error::invalid(format!(
                "Zeeman energy must be finite and nonnegative, got {mu_b}"
            )));
        }
        Ok(Self { mu_b })
    }

    /// Spin up sees the potential drop `-mu B`.
    pub fn up_channel(&self) -> StepPotential {
        StepPotential {
            v1: 0.0,
            v2: -self.mu_b,
        }
    }

    /// Spin down sees the potential rise `+mu B`.
    pub fn down_channel(&self) -> StepPotential {
        StepPotential {
            v1: 0.0,
            v2: self.mu_b,
        }
    }
}

/// Gaussian packet with a spin state `(weight_up, weight_down)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinorPacket {
    pub packet: GaussianSpectrum,
    pub weight_up: Complex64,
    pub weight_down: Complex64,
}

impl SpinorPacket {
    pub fn new(packet: GaussianSpectrum, weight_up: Complex64, weight_down: Complex64) -> Result<Self> {
        let norm = weight_up.norm_sqr() + weight_down.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "spin weights must satisfy |up|^2 + |down|^2 = 1, got {norm}"
            )));
        }
        Ok(Self {
            packet,
            weight_up,
            weight_down,
        })
    }

    /// Equal superposition of both spin states.
    pub fn equal(packet: GaussianSpectrum) -> Self {
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            packet,
            weight_up: w,
            weight_down: w,
        }
    }

    pub fn population_up(&self) -> f64 {
        self.weight_up.norm_sqr()
    }

    pub fn population_down(&self) -> f64 {
        self.weight_down.norm_sqr()
    }
}

/// Unnormalized spectral weight `exp(-i k x0) exp(-(k-k0)^2 / (2 dk^2))`.
///
/// The phase places the packet at `x0` at `T = 0`.
pub fn spectral_amplitude(packet: &GaussianSpectrum, k: f64) -> Complex64 {
    let d = (k - packet.k0) / packet.dk;
    Complex64::from_polar((-0.5 * d * d).exp(), -k * packet.x0)
}

/// Complex field on a grid, row-major with one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpacetimeGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn row(&self, t_index: usize) -> &[Complex64] {
        let nx = self.grid.nx;
        &self.values[t_index * nx..(t_index + 1) * nx]
    }

    pub fn density(&self) -> Result<DensityField> {
        DensityField::new(self.grid, self.values.iter().map(|z| z.norm_sqr()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The grid window holds less than [`NORM_LEAKAGE_THRESHOLD`] of the initial packet.
    NormLeakage { captured: f64 },
}

/// Which quadrature nodes enter the superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvanescentNodes {
    #[default]
    Include,
    /// Drop nodes below the branch point while keeping the normalization of
    /// the full packet, so the missing spectral weight shows up as lost norm.
    /// Kept as a negative control.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvolveOptions {
    pub evanescent: EvanescentNodes,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    /// `|psi|^2`, scaled so the first row integrates to one.
    pub density: DensityField,
    /// `psi` with the same scaling.
    pub field: ComplexField,
    /// Fraction of the full-line initial norm that falls inside the window.
    pub captured_norm: f64,
    pub warnings: Vec<Warning>,
}

/// Scalar packet scattering off `step`.
pub fn evolve_step(
    packet: &GaussianSpectrum,
    step: &StepPotential,
    quad: &KQuadrature,
    grid: &SpacetimeGrid,
) -> Result<Evolution> {
    evolve_step_with(packet, step, quad, grid, EvolveOptions::default())
}

pub fn evolve_step_with(
    packet: &GaussianSpectrum,
    step: &StepPotential,
    quad: &KQuadrature,
    grid: &SpacetimeGrid,
    options: EvolveOptions,
) -> Result<Evolution> {
    let mut states = Vec::with_capacity(quad.n_nodes);
    let mut coefficients = Vec::with_capacity(quad.n_nodes);
    let mut spectral_norm = 0.0;
    let mut dropped_norm = 0.0;
    let k_c = (step.height() > 0.0).then(|| (2.0 * step.height()).sqrt());
    for (k, w) in quad.nodes_with_branch_point(k_c) {
        let state = StationaryState::new(k, *step)?;
        let a = spectral_amplitude(packet, k);
        if options.evanescent == EvanescentNodes::Drop && state.amplitudes.branch == Branch::Evanescent {
            dropped_norm += w * a.norm_sqr();
            continue;
        }
        spectral_norm += w * a.norm_sqr();
        coefficients.push(w * a);
        states.push(state);
    }
    if states.is_empty() {
        return Err(Error::invalid("no quadrature nodes left in the superposition"));
    }
    let n = states.len();
    let (xs, ts) = grid.points();

    // Spatial factors, one contiguous run of n per x.
    let mut phi_re = vec![0.0; xs.len() * n];
    let mut phi_im = vec![0.0; xs.len() * n];
    phi_re
        .par_chunks_mut(n)
        .zip(phi_im.par_chunks_mut(n))
        .zip(xs.par_iter())
        .for_each(|((re, im), &x)| {
            for (j, s) in states.iter().enumerate() {
                let v = s.eval(x);
                re[j] = v.re;
                im[j] = v.im;
            }
        });

    let energies: Vec<f64> = states.iter().map(|s| 0.5 * s.k * s.k + step.v1).collect();
    let nx = xs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values
        .par_chunks_mut(nx)
        .zip(ts.par_iter())
        .for_each(|(row, &t)| {
            let (c_re, c_im): (Vec<f64>, Vec<f64>) = coefficients
                .iter()
                .zip(&energies)
                .map(|(c, e)| {
                    let z = c * Complex64::cis(-e * t);
                    (z.re, z.im)
                })
                .unzip();
            for (i, out) in row.iter_mut().enumerate() {
                let pr = &phi_re[i * n..(i + 1) * n];
                let pi = &phi_im[i * n..(i + 1) * n];
                *out = dot(&c_re, &c_im, pr, pi);
            }
        });

    let dx = grid.dx();
    let first: Vec<f64> = values[..nx].iter().map(|z| z.norm_sqr()).collect();
    let norm0 = trapezoid(&first, dx);
    if !(norm0 > 0.0) {
        return Err(Error::invalid("initial packet has zero norm on the grid"));
    }
    // Without dropped nodes the spatial and spectral norms agree up to window
    // clipping; with them, scale as if the full packet were present.
    let full_norm = norm0 * (spectral_norm + dropped_norm) / spectral_norm;
    let amplitude_scale = 1.0 / full_norm.sqrt();
    for v in values.iter_mut() {
        *v *= amplitude_scale;
    }
    let field = ComplexField {
        grid: *grid,
        values,
    };
    let density = field.density()?;

    // Scattering states are delta-normalized to 2 pi, so the full-line norm
    // of the superposition is 2 pi int |A|^2 dk.
    let captured_norm = norm0 / (2.0 * std::f64::consts::PI * (spectral_norm + dropped_norm));
    let mut warnings = Vec::new();
    if captured_norm < NORM_LEAKAGE_THRESHOLD {
        warnings.push(Warning::NormLeakage {
            captured: captured_norm,
        });
    }
    Ok(Evolution {
        density,
        field,
        captured_norm,
        warnings,
    })
}

const LANES: usize = 4;

/// `sum_j c_j phi_j` with a fixed lane split, independent of threading.
fn dot(c_re: &[f64], c_im: &[f64], p_re: &[f64], p_im: &[f64]) -> Complex64 {
    let mut acc_re = [0.0; LANES];
    let mut acc_im = [0.0; LANES];
    let chunks = c_re.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        for l in 0..LANES {
            let (a, b) = (c_re[base + l], c_im[base + l]);
            let (x, y) = (p_re[base + l], p_im[base + l]);
            acc_re[l] += a * x - b * y;
            acc_im[l] += a * y + b * x;
        }
    }
    for j in chunks * LANES..c_re.len() {
        let l = j % LANES;
        acc_re[l] += c_re[j] * p_re[j] - c_im[j] * p_im[j];
        acc_im[l] += c_re[j] * p_im[j] + c_im[j] * p_re[j];
    }
    Complex64::new(
        (acc_re[0] + acc_re[1]) + (acc_re[2] + acc_re[3]),
        (acc_im[0] + acc_im[1]) + (acc_im[2] + acc_im[3]),
    )
}

#[derive(Debug, Clone)]
pub struct SpinorEvolution {
    /// `|Psi_up|^2 + |Psi_down|^2`.
    pub total: DensityField,
    /// `|Psi_up|^2`, already weighted by the up population.
    pub up: DensityField,
    /// `|Psi_down|^2`, already weighted by the down population.
    pub down: DensityField,
    /// Unweighted channel runs.
    pub up_run: Evolution,
    pub down_run: Evolution,
}

/// Two independent channel runs, weighted by the spin populations and summed.
pub fn evolve_spinor(
    spinor: &SpinorPacket,
    zeeman: &ZeemanStep,
    quad: &KQuadrature,
    grid: &SpacetimeGrid,
) -> Result<SpinorEvolution> {
    let up_run = evolve_step(&spinor.packet, &zeeman.up_channel(), quad, grid)?;
    let down_run = evolve_step(&spinor.packet, &zeeman.down_channel(), quad, grid)?;
    let (pu, pd) = (spinor.population_up(), spinor.population_down());
    let up: Vec<f64> = up_run.density.values().iter().map(|v| pu * v).collect();
    let down: Vec<f64> = down_run.density.values().iter().map(|v| pd * v).collect();
    let total: Vec<f64> = up.iter().zip(&down).map(|(a, b)| a + b).collect();
    Ok(SpinorEvolution {
        total: DensityField::new(*grid, total)?,
        up: DensityField::new(*grid, up)?,
        down: DensityField::new(*grid, down)?,
        up_run,
        down_run,
    })
}

/// Norm, centroid and rms width of a density over part of the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub norm: f64,
    pub centroid: f64,
    pub rms_width: f64,
}

/// Trapezoid weight of each sample, zeroed outside `region`.
///
/// Uses the full-grid weights so that left and right norms add up to the
/// total exactly.
fn region_weights(xs: &[f64], dx: f64, region: Region) -> impl Iterator<Item = f64> + '_ {
    let last = xs.len() - 1;
    xs.iter().enumerate().map(move |(i, &x)| {
        if !region.contains(x) {
            0.0
        } else if i == 0 || i == last {
            0.5 * dx
        } else {
            dx
        }
    })
}

/// Norm only; never fails.
pub fn region_norm(xs: &[f64], density: &[f64], region: Region) -> f64 {
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    region_weights(xs, dx, region)
        .zip(density)
        .map(|(w, r)| w * r)
        .sum()
}

/// Trapezoid moments of one density row.
pub fn observables(xs: &[f64], density: &[f64], region: Region) -> Result<Moments> {
    if xs.len() != density.len() || xs.len() < 2 {
        return Err(Error::invalid(format!(
            "density row has {} samples for {} positions",
            density.len(),
            xs.len()
        )));
    }
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let weights: Vec<f64> = region_weights(xs, dx, region).collect();
    let norm: f64 = weights.iter().zip(density).map(|(w, r)| w * r).sum();
    if !(norm >= EMPTY_REGION_NORM) {
        return Err(Error::EmptyRegion { norm });
    }
    let centroid = weights
        .iter()
        .zip(density)
        .zip(xs)
        .map(|((w, r), x)| w * r * x)
        .sum::<f64>()
        / norm;
    let variance = weights
        .iter()
        .zip(density)
        .zip(xs)
        .map(|((w, r), x)| w * r * (x - centroid) * (x - centroid))
        .sum::<f64>()
        / norm;
    Ok(Moments {
        norm,
        centroid,
        rms_width: variance.sqrt(),
    })
}

/// [`observables`] for the density of one complex field row.
pub fn field_observables(xs: &[f64], field_row: &[Complex64], region: Region) -> Result<Moments> {
    let density: Vec<f64> = field_row.iter().map(|z| z.norm_sqr()).collect();
    observables(xs, &density, region)
}

/// Moments of row `t_index` of a density field.
pub fn row_observables(density: &DensityField, t_index: usize, region: Region) -> Result<Moments> {
    observables(&density.grid().xs(), density.row(t_index), region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureRule;

    #[test]
    fn spectral_amplitude_examples() {
        let p = GaussianSpectrum { k0: 2.35, dk: 0.1, x0: 0.0 };
        assert!((spectral_amplitude(&p, 2.35) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let a = spectral_amplitude(&p, 2.45);
        assert!((a.norm() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((a.norm() - 0.60653).abs() < 5e-6);

        let p = GaussianSpectrum::new(2.35, 0.1, -30.0).unwrap();
        let a = spectral_amplitude(&p, 2.35);
        assert!((a.norm() - 1.0).abs() < 1e-15);
        assert!((a - Complex64::cis(70.5)).norm() < 1e-12);
    }

    #[test]
    fn zeeman_channels() {
        let z = ZeemanStep::new(2.5).unwrap();
        assert_eq!(z.up_channel(), StepPotential { v1: 0.0, v2: -2.5 });
        assert_eq!(z.down_channel(), StepPotential { v1: 0.0, v2: 2.5 });
        assert!(ZeemanStep::new(-1.0).is_err());
    }

    #[test]
    fn spinor_weights_must_be_normalized() {
        let p = GaussianSpectrum::new(3.5, 0.1, -30.0).unwrap();
        assert!(SpinorPacket::new(p, Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)).is_err());
        let s = SpinorPacket::new(p, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        assert!((s.population_up() - 0.36).abs() < 1e-15);
        let e = SpinorPacket::equal(p);
        assert!((e.population_up() + e.population_down() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observables_of_symmetric_density() {
        let xs: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let rho: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let m = observables(&xs, &rho, Region::All).unwrap();
        assert!(m.centroid.abs() < 1e-14);
        assert!((m.norm - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((m.rms_width - 0.5f64.sqrt()).abs() < 1e-12);
        let l = observables(&xs, &rho, Region::Left).unwrap();
        let r = observables(&xs, &rho, Region::Right).unwrap();
        assert!((l.norm + r.norm - m.norm).abs() < 1e-15);
        assert!(l.centroid < 0.0 && r.centroid > 0.0);
    }

    #[test]
    fn empty_region_is_an_error() {
        let xs: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let rho: Vec<f64> = xs.iter().map(|&x| if x < 0.0 { 1.0 } else { 0.0 }).collect();
        assert!(matches!(
            observables(&xs, &rho, Region::Right),
            Err(Error::EmptyRegion { .. })
        ));
    }

    fn small_grid() -> SpacetimeGrid {
        SpacetimeGrid::new(-60.0, 60.0, 241, 0.0, 20.0, 9).unwrap()
    }

    #[test]
    fn spinor_is_weighted_sum_of_channels() {
        let p = GaussianSpectrum::new(3.5, 0.1, -30.0).unwrap();
        let q = KQuadrature::for_packet(&p, 64, QuadratureRule::GaussLegendre).unwrap();
        let g = small_grid();
        let z = ZeemanStep::new(2.5).unwrap();
        let s = SpinorPacket::new(p, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        let run = evolve_spinor(&s, &z, &q, &g).unwrap();
        let up = evolve_step(&p, &z.up_channel(), &q, &g).unwrap();
        let down = evolve_step(&p, &z.down_channel(), &q, &g).unwrap();
        for ((t, u), d) in run.total.values().iter().zip(up.density.values()).zip(down.density.values()) {
            assert_eq!(*t, s.population_up() * u + s.population_down() * d);
        }

        let only_up = SpinorPacket::new(p, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let run = evolve_spinor(&only_up, &z, &q, &g).unwrap();
        assert_eq!(run.total, run.up);

        let field_free = evolve_spinor(&SpinorPacket::equal(p), &ZeemanStep::new(0.0).unwrap(), &q, &g).unwrap();
        assert_eq!(field_free.up, field_free.down);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let p = GaussianSpectrum::new(2.35, 0.1, -30.0).unwrap();
        let q = KQuadrature::for_packet(&p, 67, QuadratureRule::GaussLegendre).unwrap();
        let g = small_grid();
        let step = StepPotential::rising(2.5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| evolve_step(&p, &step, &q, &g).unwrap())
        };
        let a = run(1);
        let b = run(5);
        assert_eq!(a.field, b.field);
        assert_eq!(a.density, b.density);
    }

    #[test]
    fn clipped_window_warns() {
        let p = GaussianSpectrum::new(2.35, 0.1, -30.0).unwrap();
        let q = KQuadrature::for_packet(&p, 64, QuadratureRule::GaussLegendre).unwrap();
        let g = SpacetimeGrid::new(-35.0, 5.0, 401, 0.0, 1.0, 2).unwrap();
        let run = evolve_step(&p, &StepPotential::free(), &q, &g).unwrap();
        assert!(run.captured_norm < 0.9);
        assert!(matches!(run.warnings[..], [Warning::NormLeakage { .. }]));

        let g = SpacetimeGrid::new(-80.0, 20.0, 1001, 0.0, 1.0, 2).unwrap();
        let run = evolve_step(&p, &StepPotential::free(), &q, &g).unwrap();
        assert!(run.warnings.is_empty(), "{:?}", run.warnings);
        assert!((run.captured_norm - 1.0).abs() < 1e-6);
    }
}
