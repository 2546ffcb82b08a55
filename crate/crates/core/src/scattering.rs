//! Stationary scattering states of the potential step.
//!
//! For incidence from the left with wave number `k`, the transmitted wave
//! number is `k' = sqrt(k^2 - 2 dv)` with `dv = v2 - v1`. Below the branch
//! point `k_c = sqrt(2 dv)` the root is taken as `k' = i kappa`, so the
//! transmitted wave decays into region 2 and `|r| = 1`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::units::StepPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Propagating,
    Evanescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringAmplitudes {
    pub r: Complex64,
    /// Wave-function amplitude `2k/(k+k')`, valid on both branches.
    pub t_field: Complex64,
    /// Flux-symmetrized amplitude `2 sqrt(k k')/(k+k')`; propagating branch only.
    pub t_flux: Option<Complex64>,
    pub branch: Branch,
}

impl ScatteringAmplitudes {
    pub fn reflectance(&self) -> f64 {
        self.r.norm_sqr()
    }

    /// `|t_flux|^2`, zero on the evanescent branch.
    pub fn transmittance(&self) -> f64 {
        self.t_flux.map_or(0.0, |t| t.norm_sqr())
    }
}

/// Transmitted wave number with `Im(k') >= 0`.
pub fn transmitted_wave_number(k: f64, step: &StepPotential) -> (Complex64, Branch) {
    let q = k * k - 2.0 * step.height();
    if q > 0.0 {
        (Complex64::new(q.sqrt(), 0.0), Branch::Propagating)
    } else {
        (Complex64::new(0.0, (-q).sqrt()), Branch::Evanescent)
    }
}

/// Reflection and transmission amplitudes for right-moving incidence.
pub fn amplitudes(k: f64, step: &StepPotential) -> Result<ScatteringAmplitudes> {
    if !(k > 0.0) {
        return Err(Error::NonIncidentWave(k));
    }
    let (kprime, branch) = transmitted_wave_number(k, step);
    Ok(amplitudes_for(k, kprime, branch))
}

fn amplitudes_for(k: f64, kprime: Complex64, branch: Branch) -> ScatteringAmplitudes {
    let sum = kprime + k;
    let r = (Complex64::new(k, 0.0) - kprime) / sum;
    let t_field = Complex64::new(2.0 * k, 0.0) / sum;
    let t_flux = match branch {
        Branch::Propagating => Some(Complex64::new(2.0 * (k * kprime.re).sqrt(), 0.0) / sum),
        Branch::Evanescent => None,
    };
    ScatteringAmplitudes {
        r,
        t_field,
        t_flux,
        branch,
    }
}

/// Stationary state `psi_k(x)` for incidence from the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryState {
    pub k: f64,
    pub kprime: Complex64,
    pub amplitudes: ScatteringAmplitudes,
    pub step: StepPotential,
}

impl StationaryState {
    pub fn new(k: f64, step: StepPotential) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::NonIncidentWave(k));
        }
        let (kprime, branch) = transmitted_wave_number(k, &step);
        Ok(Self {
            k,
            kprime,
            amplitudes: amplitudes_for(k, kprime, branch),
            step,
        })
    }

    /// `e^{ikx} + r e^{-ikx}` for `x < 0`, `t e^{ik'x}` for `x >= 0`.
    pub fn eval(&self, x: f64) -> Complex64 {
        if x < 0.0 {
            self.left(x)
        } else {
            self.right(x)
        }
    }

    /// Region-1 expression, valid as a one-sided limit at `x = 0`.
    pub fn left(&self, x: f64) -> Complex64 {
        Complex64::cis(self.k * x) + self.amplitudes.r * Complex64::cis(-self.k * x)
    }

    /// Region-2 expression, valid as a one-sided limit at `x = 0`.
    pub fn right(&self, x: f64) -> Complex64 {
        self.amplitudes.t_field * (Complex64::i() * self.kprime * x).exp()
    }

    /// `d psi/dx` from each side at the origin.
    pub fn derivative_at_origin(&self) -> (Complex64, Complex64) {
        let i = Complex64::i();
        let left = i * self.k * (Complex64::new(1.0, 0.0) - self.amplitudes.r);
        let right = i * self.kprime * self.amplitudes.t_field;
        (left, right)
    }
}

/// Free-function form of [`StationaryState::eval`].
pub fn eval_state(state: &StationaryState, x: f64) -> Complex64 {
    state.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig2_step() -> StepPotential {
        StepPotential::rising(2.5).unwrap()
    }

    #[test]
    fn fig2_amplitudes() {
        let a = amplitudes(2.35, &fig2_step()).unwrap();
        assert_eq!(a.branch, Branch::Propagating);
        let (kp, _) = transmitted_wave_number(2.35, &fig2_step());
        assert!((kp.re - 0.72284).abs() < 5e-6);
        assert!((a.r.re - 0.52953).abs() < 5e-6 && a.r.im == 0.0);
        assert!((a.reflectance() - 0.280401).abs() < 5e-6);
        assert!((a.t_flux.unwrap().re - 0.84829).abs() < 5e-6);
        assert!((a.reflectance() + a.transmittance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_step_is_transparent() {
        let a = amplitudes(1.7, &StepPotential::free()).unwrap();
        assert_eq!(a.r, Complex64::new(0.0, 0.0));
        assert_eq!(a.t_field, Complex64::new(1.0, 0.0));
        assert_eq!(a.t_flux, Some(Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn evanescent_example() {
        let a = amplitudes(2.0, &fig2_step()).unwrap();
        assert_eq!(a.branch, Branch::Evanescent);
        assert!(a.t_flux.is_none());
        let expected = Complex64::new(2.0, -1.0) / Complex64::new(2.0, 1.0);
        assert!((a.r - expected).norm() < 1e-15);
        assert!((a.r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_k_is_rejected() {
        assert!(matches!(amplitudes(0.0, &fig2_step()), Err(Error::NonIncidentWave(_))));
        assert!(matches!(amplitudes(-1.0, &fig2_step()), Err(Error::NonIncidentWave(_))));
        assert!(StationaryState::new(-0.5, fig2_step()).is_err());
    }

    #[test]
    fn free_state_is_plane_wave() {
        let s = StationaryState::new(1.3, StepPotential::free()).unwrap();
        for x in [-7.0, -0.1, 0.0, 2.5, 40.0] {
            assert!((eval_state(&s, x) - Complex64::cis(1.3 * x)).norm() < 1e-14);
        }
    }

    #[test]
    fn continuity_at_origin_fig2() {
        let s = StationaryState::new(2.35, fig2_step()).unwrap();
        let left = s.left(0.0);
        let right = s.right(0.0);
        assert!((left - right).norm() < 1e-10);
        assert!((right.re - 1.52953).abs() < 5e-6);
        let (dl, dr) = s.derivative_at_origin();
        assert!((dl - dr).norm() < 1e-12);
    }

    #[test]
    fn evanescent_decay_rate() {
        let s = StationaryState::new(2.0, fig2_step()).unwrap();
        let t = s.amplitudes.t_field.norm();
        assert!((s.eval(5.0).norm() - t * (-5.0f64).exp()).abs() < 1e-14);
        // log-linear least squares of |psi| on [1, 5]
        let xs: Vec<f64> = (0..=40).map(|i| 1.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| s.eval(x).norm().ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        assert!((sxy / sxx + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_limits() {
        // k_c = 2 is exact in binary, so k^2 - 2 dv vanishes exactly there
        let step = StepPotential::rising(2.0).unwrap();
        let kc = 2.0;
        let at = amplitudes(kc, &step).unwrap();
        assert_eq!(at.r, Complex64::new(1.0, 0.0));
        let below = amplitudes(kc * (1.0 - 1e-12), &step).unwrap();
        let above = amplitudes(kc * (1.0 + 1e-12), &step).unwrap();
        assert!((below.r - at.r).norm() < 1e-5);
        assert!((above.r - at.r).norm() < 1e-5);
        // r has a square-root branch point at k_c: the jump across it
        // shrinks like sqrt(delta) and vanishes in the limit.
        for delta in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14] {
            let b = amplitudes(kc - delta, &step).unwrap();
            let a = amplitudes(kc + delta, &step).unwrap();
            assert_eq!(b.branch, Branch::Evanescent);
            assert_eq!(a.branch, Branch::Propagating);
            assert!((b.r - a.r).norm() < 4.0 * delta.sqrt(), "delta={delta}");
        }
        let low = amplitudes(1e-9, &step).unwrap();
        assert!((low.r + Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn flux_conservation(k in 2.2361f64..10.0, dv in -3.0f64..2.5) {
            let step = StepPotential::new(0.0, dv).unwrap();
            let a = amplitudes(k, &step).unwrap();
            prop_assume!(a.branch == Branch::Propagating);
            let (kp, _) = transmitted_wave_number(k, &step);
            prop_assert!((a.reflectance() + a.transmittance() - 1.0).abs() < 1e-12);
            let flux = a.reflectance() + kp.re / k * a.t_field.norm_sqr();
            prop_assert!((flux - 1.0).abs() < 1e-12);
        }

        #[test]
        fn derivative_continuity(k in 0.01f64..6.0, v1 in -2.0f64..2.0, v2 in -2.0f64..6.0) {
            let s = StationaryState::new(k, StepPotential::new(v1, v2).unwrap()).unwrap();
            let (dl, dr) = s.derivative_at_origin();
            prop_assert!((dl - dr).norm() < 1e-12);
            prop_assert!((s.left(0.0) - s.right(0.0)).norm() < 1e-10);
            if s.amplitudes.branch == Branch::Evanescent {
                prop_assert!((s.amplitudes.r.norm() - 1.0).abs() < 1e-12);
                prop_assert!(s.kprime.im >= 0.0);
            }
        }
    }
}
