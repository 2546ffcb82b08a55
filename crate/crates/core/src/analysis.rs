//! Measurements on simulated densities: worldline fits, the spacetime
//! Snell check, broadening diagnostics and fringe spacing.

use serde::Serialize;

use crate::dynamics::{observables, region_norm, ZeemanStep};
use crate::error::{Error, Result};
use crate::ray::DispersiveMedium;
use crate::units::{DensityField, GaussianSpectrum, Region};

/// Relative change of the regional norm per row below which a lobe counts as settled.
pub const STABLE_NORM_CHANGE: f64 = 1e-3;
/// Smallest regional norm accepted in a fitted row.
pub const MIN_LOBE_NORM: f64 = 1e-3;
pub const MIN_FIT_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Moving toward `+x`.
    Forward,
    /// Moving toward `-x`.
    Backward,
}

/// Straight-line fit of `v0 T` against a lobe's centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorldlineFit {
    pub region: Region,
    pub direction: Direction,
    /// `d(v0 T)/dx`.
    pub slope: f64,
    /// `v0 T` at `x = 0`.
    pub intercept: f64,
    /// rms deviation of `v0 T` from the line.
    pub residual: f64,
    /// Times of the first and last fitted rows.
    pub window: (f64, f64),
    pub rows: usize,
    pub angle: f64,
    pub v0: f64,
}

impl WorldlineFit {
    /// Lobe speed `v0 / slope`.
    pub fn velocity(&self) -> f64 {
        self.v0 / self.slope
    }
}

/// Rows inside `window` whose regional norm has settled, split into
/// maximal runs of consecutive indices.
fn stable_runs(norms: &[(usize, f64)]) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (pos, &(row, norm)) in norms.iter().enumerate() {
        let neighbour = if pos > 0 {
            norms[pos - 1].1
        } else if norms.len() > 1 {
            norms[1].1
        } else {
            norm
        };
        let scale = norm.abs().max(neighbour.abs()).max(f64::MIN_POSITIVE);
        if (norm - neighbour).abs() / scale < STABLE_NORM_CHANGE {
            current.push(row);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

/// Rows used for a lobe fit.
///
/// `Region::All` takes every row in the window. Otherwise the lobe is
/// isolated by keeping only rows where the regional norm has settled: the
/// incident lobe (left, forward) uses the start of the first settled run, the
/// reflected (left, backward) and transmitted (right, forward) lobes the last
/// run.
pub fn lobe_rows(density: &DensityField, region: Region, direction: Direction, window: (f64, f64)) -> Result<Vec<usize>> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::invalid(format!("empty fit window [{t0}, {t1}]")));
    }
    let grid = density.grid();
    let xs = grid.xs();
    let in_window: Vec<usize> = grid
        .ts()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t0 && t <= t1)
        .map(|(i, _)| i)
        .collect();
    if region == Region::All {
        return Ok(in_window);
    }
    let norms: Vec<(usize, f64)> = in_window
        .iter()
        .map(|&i| (i, region_norm(&xs, density.row(i), region)))
        .collect();
    let runs = stable_runs(&norms);
    let pick = match (region, direction) {
        // The incident lobe leaks into x >= 0 slowly, so each row passes the
        // per-row test long after truncation biases the centroid. Stop once
        // the norm has drifted from its starting value instead.
        (Region::Left, Direction::Forward) => runs.into_iter().next().map(|run| {
            let start = norms[run[0] - in_window[0]].1;
            run.into_iter()
                .take_while(|&i| (norms[i - in_window[0]].1 - start).abs() <= STABLE_NORM_CHANGE * start)
                .collect()
        }),
        (Region::Left, Direction::Backward) | (Region::Right, Direction::Forward) => runs.into_iter().last(),
        (Region::Right, Direction::Backward) => {
            return Err(Error::invalid("no backward-moving lobe exists in region x >= 0"))
        }
        (Region::All, _) => unreachable!(),
    };
    Ok(pick.unwrap_or_default())
}

/// First row from which the regional norm stays within
/// [`STABLE_NORM_CHANGE`] (relative) of its value in the last row, i.e. the
/// lobe has finished crossing into or out of `region`.
pub fn settling_row(density: &DensityField, region: Region) -> Option<usize> {
    let xs = density.grid().xs();
    let norms: Vec<f64> = density.rows().map(|r| region_norm(&xs, r, region)).collect();
    let last = *norms.last()?;
    if last < MIN_LOBE_NORM {
        return None;
    }
    let unsettled = norms
        .iter()
        .rposition(|n| (n - last).abs() > STABLE_NORM_CHANGE * last);
    Some(unsettled.map_or(0, |i| i + 1))
}

/// Least-squares worldline of one density lobe.
pub fn fit_worldline(
    density: &DensityField,
    region: Region,
    direction: Direction,
    window: (f64, f64),
    v0: f64,
) -> Result<WorldlineFit> {
    let rows = lobe_rows(density, region, direction, window)?;
    if rows.len() < MIN_FIT_ROWS {
        return Err(Error::IllConditionedFit(format!(
            "only {} settled rows in [{}, {}], need {MIN_FIT_ROWS}",
            rows.len(),
            window.0,
            window.1
        )));
    }
    let grid = density.grid();
    let (xs, ts) = grid.points();
    let mut cx = Vec::with_capacity(rows.len());
    let mut cy = Vec::with_capacity(rows.len());
    for &i in &rows {
        let m = observables(&xs, density.row(i), region)?;
        if m.norm < MIN_LOBE_NORM {
            return Err(Error::EmptyRegion { norm: m.norm });
        }
        cx.push(m.centroid);
        cy.push(v0 * ts[i]);
    }
    let line = least_squares(&cx, &cy)?;
    let span = cx.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - cx.iter().copied().fold(f64::INFINITY, f64::min);
    if span < 2.0 * grid.dx() {
        return Err(Error::IllConditionedFit(format!(
            "centroid moves only {span} over the window (grid spacing {})",
            grid.dx()
        )));
    }
    Ok(WorldlineFit {
        region,
        direction,
        slope: line.slope,
        intercept: line.intercept,
        residual: line.residual,
        window: (ts[rows[0]], ts[rows[rows.len() - 1]]),
        rows: rows.len(),
        angle: line.slope.atan(),
        v0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<Line> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::IllConditionedFit(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::IllConditionedFit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    Ok(Line {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
    })
}

/// Relative violation of `n1 tan(theta1) = n2 tan(theta2)` for measured angles.
pub fn check_spacetime_snell(
    fit_in: &WorldlineFit,
    fit_out: &WorldlineFit,
    medium1: &DispersiveMedium,
    medium2: &DispersiveMedium,
) -> f64 {
    let lhs = medium1.n * fit_in.angle.tan();
    let rhs = medium2.n * fit_out.angle.tan();
    (lhs - rhs).abs() / lhs.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    RayLike,
    Dispersive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BroadeningDiagnostics {
    /// rms width of the initial density.
    pub delta_x: f64,
    pub wavelength: f64,
    pub distance: f64,
    pub t_broad: f64,
    pub t_prop: f64,
    /// `delta_x^2 / (lambda L)`.
    pub fresnel_f: f64,
    pub regime: Regime,
}

/// Broadening time, propagation time and Fresnel number over distance `L`.
pub fn broadening(packet: &GaussianSpectrum, distance: f64) -> Result<BroadeningDiagnostics> {
    if !(distance > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {distance}")));
    }
    let delta_x = packet.initial_rms_width();
    let wavelength = 2.0 * std::f64::consts::PI / packet.k0;
    let fresnel_f = delta_x * delta_x / (wavelength * distance);
    Ok(BroadeningDiagnostics {
        delta_x,
        wavelength,
        distance,
        t_broad: delta_x * delta_x,
        t_prop: distance / packet.k0,
        fresnel_f,
        regime: if fresnel_f < 1.0 {
            Regime::Dispersive
        } else {
            Regime::RayLike
        },
    })
}

/// Transmitted-to-incident width ratios `sqrt(1 +- 2 mu B / k^2)` for the
/// up and down channels.
pub fn width_ratio(k: f64, zeeman: &ZeemanStep) -> Result<(f64, f64)> {
    let s = 2.0 * zeeman.mu_b / (k * k);
    if !(s < 1.0) {
        return Err(Error::EvanescentRegime(format!(
            "k^2 = {} does not exceed 2 mu B = {}",
            k * k,
            2.0 * zeeman.mu_b
        )));
    }
    Ok(((1.0 + s).sqrt(), (1.0 - s).sqrt()))
}

/// Dominant spatial period of the interference fringes in `region`.
///
/// The row is high-passed by subtracting a centered moving average of
/// length `smoothing`, then the first autocorrelation maximum after the
/// first zero crossing is located and refined with a parabola.
pub fn fringe_period(xs: &[f64], density: &[f64], region: Region, smoothing: f64) -> Result<f64> {
    let samples: Vec<f64> = xs
        .iter()
        .zip(density)
        .filter(|(x, _)| region.contains(**x))
        .map(|(_, r)| *r)
        .collect();
    if xs.len() < 2 || samples.len() < 16 {
        return Err(Error::invalid("too few samples for a fringe period"));
    }
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let half = ((0.5 * smoothing / dx).round() as usize).max(1);
    let n = samples.len();
    let detrended: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mean = samples[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            samples[i] - mean
        })
        .collect();
    let max_lag = n / 2;
    let acf: Vec<f64> = (0..max_lag)
        .map(|lag| {
            detrended[..n - lag]
                .iter()
                .zip(&detrended[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect();
    let first_negative = acf
        .iter()
        .position(|&v| v < 0.0)
        .ok_or_else(|| Error::invalid("autocorrelation never changes sign; no fringes"))?;
    let peak = (first_negative + 1..max_lag - 1)
        .find(|&l| acf[l] >= acf[l - 1] && acf[l] > acf[l + 1] && acf[l] > 0.0)
        .ok_or_else(|| Error::invalid("no autocorrelation peak found"))?;
    let (a, b, c) = (acf[peak - 1], acf[peak], acf[peak + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok((peak as f64 + offset) * dx)
}
