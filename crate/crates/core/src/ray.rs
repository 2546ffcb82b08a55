//! Ray picture: refractive indices, group velocities and Snell-type laws in
//! space and in the `(x, v0 t)` plane.
//!
//! Angles are in radians. A spacetime angle `theta` is measured from the
//! x axis, so `tan(theta) = d(v0 t)/dx = v0 / v` for a ray moving at speed `v`.

use serde::Serialize;

use crate::dynamics::ZeemanStep;
use crate::error::{Error, Result};
use crate::scattering;
use crate::units::{GaussianSpectrum, StepPotential};

const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Refractive index and its frequency derivative at the working frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveMedium {
    pub n: f64,
    pub dn_domega: f64,
}

impl DispersiveMedium {
    pub fn new(n: f64, dn_domega: f64) -> Self {
        Self { n, dn_domega }
    }

    /// Medium with a frequency-independent index.
    pub fn nondispersive(n: f64) -> Self {
        Self { n, dn_domega: 0.0 }
    }

    /// Quantum medium for a constant potential `v` at energy `omega`
    /// (`hbar = 1`): `n = sqrt(1 - v/omega)`, `dn/domega = v / (2 omega^2 n)`.
    pub fn quantum(potential: f64, omega: f64) -> Result<Self> {
        let n = n_quantum(potential, omega)?;
        if n == 0.0 {
            return Err(Error::EvanescentRegime(format!(
                "band edge: potential {potential} equals energy {omega}, index is zero"
            )));
        }
        Ok(Self {
            n,
            dn_domega: potential / (2.0 * omega * omega * n),
        })
    }

    /// `n (1 + alpha_v (omega/n) dn/domega)`, i.e. `v0 / v_g`.
    fn group_index(&self, omega: f64, alpha_v: f64) -> Result<f64> {
        if !(self.n > 0.0) {
            return Err(Error::invalid(format!(
                "refractive index must be positive, got {}",
                self.n
            )));
        }
        let denominator = 1.0 + alpha_v * (omega / self.n) * self.dn_domega;
        if denominator.abs() < DEGENERATE_DENOMINATOR {
            return Err(Error::DegenerateDispersion { denominator });
        }
        Ok(self.n * denominator)
    }
}

/// Quantum refractive index `sqrt(1 - V0/(hbar omega))`.
///
/// Fails with [`Error::EvanescentRegime`] when `V0 > hbar omega`.
pub fn n_quantum(potential: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    let n2 = 1.0 - potential / omega;
    if n2 < 0.0 {
        return Err(Error::EvanescentRegime(format!(
            "potential {potential} exceeds energy {omega} (n^2 = {n2})"
        )));
    }
    Ok(n2.sqrt())
}

/// Snell's law in space: `n1 sin(theta1) = n2 sin(theta2)`.
pub fn snell_spatial(n1: f64, n2: f64, theta1: f64) -> Result<f64> {
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::invalid(format!(
            "indices must be positive, got n1={n1}, n2={n2}"
        )));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta1) {
        return Err(Error::invalid(format!(
            "incidence angle must lie in [0, pi/2), got {theta1}"
        )));
    }
    let s = n1 * theta1.sin() / n2;
    if s > 1.0 {
        return Err(Error::TotalInternalReflection { sin_theta2: s });
    }
    Ok(s.asin())
}

/// `v_g = (v0/n) (1 + alpha_v (omega/n) dn/domega)^-1`.
///
/// `alpha_v` is the group-to-phase velocity ratio of the reference medium:
/// 1 for light in vacuum, 2 for a free massive particle.
pub fn group_velocity(medium: &DispersiveMedium, omega: f64, alpha_v: f64, v0: f64) -> Result<f64> {
    Ok(v0 / medium.group_index(omega, alpha_v)?)
}

/// Refraction angle in the `(x, v0 t)` plane.
///
/// Follows from `v_g1 tan(theta1) = v_g2 tan(theta2)`, written with group
/// indices `n (1 + alpha_v (omega/n) dn/domega)`.
pub fn snell_spacetime(
    medium1: &DispersiveMedium,
    medium2: &DispersiveMedium,
    omega: f64,
    alpha_v: f64,
    theta1: f64,
) -> Result<f64> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta1) {
        return Err(Error::invalid(format!(
            "spacetime incidence angle must lie in [0, pi/2), got {theta1}"
        )));
    }
    let g1 = medium1.group_index(omega, alpha_v)?;
    let g2 = medium2.group_index(omega, alpha_v)?;
    if !(g1 > 0.0 && g2 > 0.0) {
        return Err(Error::invalid(format!(
            "group velocities must be positive (group indices {g1}, {g2})"
        )));
    }
    if theta1 == 0.0 {
        return Ok(0.0);
    }
    Ok((g2 / g1 * theta1.tan()).atan())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayLabel {
    Incident,
    Reflected,
    Transmitted,
    TransmittedUp,
    TransmittedDown,
}

/// Point in the `(x, v0 t)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacetimeEvent {
    pub x: f64,
    pub v0t: f64,
}

/// Straight piece of a worldline, starting at `start` and running forward
/// in time up to `end_v0t` (unbounded when `None`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaySegment {
    pub start: SpacetimeEvent,
    /// `d(v0 t)/dx`.
    pub slope: f64,
    pub end_v0t: Option<f64>,
    pub label: RayLabel,
    /// Fraction of the packet carried by this ray.
    pub weight: f64,
}

impl RaySegment {
    pub fn angle(&self) -> f64 {
        self.slope.atan()
    }

    /// Position on the segment's line at time coordinate `v0t`.
    pub fn x_at(&self, v0t: f64) -> f64 {
        self.start.x + (v0t - self.start.v0t) / self.slope
    }

    pub fn end(&self) -> Option<SpacetimeEvent> {
        self.end_v0t.map(|v0t| SpacetimeEvent {
            x: self.x_at(v0t),
            v0t,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayWorldline {
    /// Speed used to turn time into a length on the vertical axis.
    pub v0: f64,
    pub segments: Vec<RaySegment>,
}

impl RayWorldline {
    fn single(v0: f64, segment: RaySegment) -> Self {
        Self {
            v0,
            segments: vec![segment],
        }
    }

    pub fn label(&self) -> RayLabel {
        self.segments[0].label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayPrediction {
    pub v0: f64,
    /// Where the incident ray meets the step.
    pub arrival: SpacetimeEvent,
    pub worldlines: Vec<RayWorldline>,
    /// No transmitted ray exists at the central wave number.
    pub total_reflection: bool,
}

impl RayPrediction {
    pub fn find(&self, label: RayLabel) -> Option<&RayWorldline> {
        self.worldlines.iter().find(|w| w.label() == label)
    }

    /// Arrival time in natural units.
    pub fn arrival_time(&self) -> f64 {
        self.arrival.v0t / self.v0
    }
}

fn incident_and_arrival(packet: &GaussianSpectrum) -> (f64, SpacetimeEvent, RayWorldline) {
    let v0 = packet.reference_speed();
    let arrival = SpacetimeEvent {
        x: 0.0,
        v0t: v0 * (-packet.x0 / packet.k0),
    };
    let incident = RayWorldline::single(
        v0,
        RaySegment {
            start: SpacetimeEvent {
                x: packet.x0,
                v0t: 0.0,
            },
            slope: v0 / packet.k0,
            end_v0t: Some(arrival.v0t),
            label: RayLabel::Incident,
            weight: 1.0,
        },
    );
    (v0, arrival, incident)
}

fn outgoing(v0: f64, arrival: SpacetimeEvent, velocity: f64, label: RayLabel, weight: f64) -> RayWorldline {
    RayWorldline::single(
        v0,
        RaySegment {
            start: arrival,
            slope: v0 / velocity,
            end_v0t: None,
            label,
            weight,
        },
    )
}

/// Incident, reflected and transmitted rays for the packet's central wave number.
///
/// When the center lies below the step (`k0^2 < 2 (v2 - v1)`) only incident
/// and reflected rays are returned and `total_reflection` is set.
pub fn predict_worldlines(packet: &GaussianSpectrum, step: &StepPotential) -> Result<RayPrediction> {
    let (v0, arrival, incident) = incident_and_arrival(packet);
    let amps = scattering::amplitudes(packet.k0, step)?;
    let reflectance = amps.reflectance();
    let mut worldlines = vec![
        incident,
        outgoing(v0, arrival, -packet.k0, RayLabel::Reflected, reflectance),
    ];
    let total_reflection = amps.branch == scattering::Branch::Evanescent;
    if !total_reflection {
        let kprime = transmitted_wave_number(packet.k0, step.height())?;
        worldlines.push(outgoing(
            v0,
            arrival,
            kprime,
            RayLabel::Transmitted,
            1.0 - reflectance,
        ));
    }
    Ok(RayPrediction {
        v0,
        arrival,
        worldlines,
        total_reflection,
    })
}

/// Rays for an equal-or-unequal spin mixture entering a Zeeman step.
///
/// Each spin channel gets its own transmitted ray; the reflected ray weight
/// is the population-averaged reflectance.
pub fn predict_spinor_worldlines(
    packet: &GaussianSpectrum,
    zeeman: &ZeemanStep,
    population_up: f64,
) -> Result<RayPrediction> {
    let (v0, arrival, incident) = incident_and_arrival(packet);
    let population_down = 1.0 - population_up;
    let mut worldlines = vec![incident];
    let mut reflected = 0.0;
    let mut transmitted = Vec::new();
    let mut total_reflection = true;
    for (step, population, label) in [
        (zeeman.up_channel(), population_up, RayLabel::TransmittedUp),
        (zeeman.down_channel(), population_down, RayLabel::TransmittedDown),
    ] {
        let amps = scattering::amplitudes(packet.k0, &step)?;
        reflected += population * amps.reflectance();
        if amps.branch == scattering::Branch::Propagating {
            total_reflection = false;
            let kprime = transmitted_wave_number(packet.k0, step.height())?;
            transmitted.push(outgoing(
                v0,
                arrival,
                kprime,
                label,
                population * (1.0 - amps.reflectance()),
            ));
        }
    }
    worldlines.push(outgoing(v0, arrival, -packet.k0, RayLabel::Reflected, reflected));
    worldlines.extend(transmitted);
    Ok(RayPrediction {
        v0,
        arrival,
        worldlines,
        total_reflection,
    })
}

/// `sqrt(k^2 - 2 dv)` for a propagating transmitted wave.
pub fn transmitted_wave_number(k: f64, step_height: f64) -> Result<f64> {
    let k2 = k * k - 2.0 * step_height;
    if k2 < 0.0 {
        return Err(Error::EvanescentRegime(format!(
            "k^2 = {} is below 2 dv = {}",
            k * k,
            2.0 * step_height
        )));
    }
    Ok(k2.sqrt())
}
