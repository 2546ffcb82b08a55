use spacetime_refraction::analysis::{fit_worldline, Direction};
use spacetime_refraction::dynamics::{
    evolve_spinor, evolve_step, region_norm, row_observables, SpinorPacket, ZeemanStep,
};
use spacetime_refraction::quadrature::{KQuadrature, QuadratureRule};
use spacetime_refraction::units::{GaussianSpectrum, Region, SpacetimeGrid, StepPotential};

use num_complex::Complex64;

fn fig2_grid() -> SpacetimeGrid {
    SpacetimeGrid::new(-60.0, 60.0, 1201, 0.0, 25.0, 600).unwrap()
}

fn packet(k0: f64, dk: f64) -> GaussianSpectrum {
    GaussianSpectrum::new(k0, dk, -30.0).unwrap()
}

#[test]
fn initial_moments_match_the_spectrum() {
    let p = packet(2.35, 0.1);
    let g = SpacetimeGrid::new(-70.0, 10.0, 801, 0.0, 1.0, 2).unwrap();
    let run = evolve_step(&p, &StepPotential::free(), &KQuadrature::default_for(&p).unwrap(), &g).unwrap();
    let m = row_observables(&run.density, 0, Region::All).unwrap();
    assert!((m.centroid + 30.0).abs() < 1e-3, "{}", m.centroid);
    let expected = 1.0 / (2f64.sqrt() * 0.1);
    assert!((m.rms_width - expected).abs() < 0.01 * expected, "{}", m.rms_width);
    assert!(run.warnings.is_empty());
}

#[test]
fn free_centroid_moves_at_k0() {
    let p = packet(2.35, 0.1);
    let g = SpacetimeGrid::new(-120.0, 120.0, 2401, 0.0, 25.0, 26).unwrap();
    let run = evolve_step(&p, &StepPotential::free(), &KQuadrature::default_for(&p).unwrap(), &g).unwrap();
    for (i, t) in g.ts().iter().enumerate() {
        let c = row_observables(&run.density, i, Region::All).unwrap().centroid;
        let exact = -30.0 + 2.35 * t;
        assert!((c - exact).abs() <= 1e-6 * exact.abs().max(1.0), "T={t}: {c} vs {exact}");
    }
    let fit = fit_worldline(&run.density, Region::All, Direction::Forward, (0.0, 25.0), 2.35).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-3);
}

#[test]
fn fig2_transmitted_velocity() {
    let p = packet(2.35, 0.1);
    let step = StepPotential::rising(2.5).unwrap();
    let run = evolve_step(&p, &step, &KQuadrature::default_for(&p).unwrap(), &fig2_grid()).unwrap();
    let fit = fit_worldline(&run.density, Region::Right, Direction::Forward, (0.0, 25.0), 2.35).unwrap();
    let kprime = (2.35f64.powi(2) - 5.0).sqrt();
    assert!((fit.velocity() - kprime).abs() < 0.02 * kprime, "{}", fit.velocity());
    assert!((fit.angle.to_degrees() - 72.90).abs() < 0.5);
}

#[test]
fn norm_splits_once_the_lobes_separate() {
    let p = packet(2.35, 0.1);
    let step = StepPotential::rising(2.5).unwrap();
    let g = SpacetimeGrid::new(-160.0, 80.0, 1201, 0.0, 45.0, 91).unwrap();
    let run = evolve_step(&p, &step, &KQuadrature::default_for(&p).unwrap(), &g).unwrap();
    let mut separated = 0;
    for i in 0..g.nt {
        let left = row_observables(&run.density, i, Region::Left).unwrap();
        let right = row_observables(&run.density, i, Region::Right).unwrap();
        if left.norm < 0.05 || right.norm < 0.05 {
            continue;
        }
        if right.centroid - left.centroid > 5.0 * left.rms_width.max(right.rms_width) {
            separated += 1;
            assert!((left.norm + right.norm - 1.0).abs() < 5e-3, "row {i}: {} + {} sep {} widths {} {}", left.norm, right.norm, right.centroid - left.centroid, left.rms_width, right.rms_width);
        }
    }
    assert!(separated > 10, "{separated}");
}

#[test]
fn below_the_barrier_nothing_gets_through() {
    let p = packet(1.5, 0.1);
    let step = StepPotential::rising(2.5).unwrap();
    let g = SpacetimeGrid::new(-80.0, 40.0, 1201, 0.0, 40.0, 200).unwrap();
    let run = evolve_step(&p, &step, &KQuadrature::default_for(&p).unwrap(), &g).unwrap();
    let transmitted = region_norm(&g.xs(), run.density.row(g.nt - 1), Region::Right);
    assert!(transmitted < 1e-3, "{transmitted}");
}

#[test]
fn quadrature_converges_for_fig2() {
    let p = packet(2.35, 0.1);
    let step = StepPotential::rising(2.5).unwrap();
    let g = SpacetimeGrid::new(-60.0, 60.0, 1201, 0.0, 25.0, 60).unwrap();
    let q = KQuadrature::default_for(&p).unwrap();
    let a = evolve_step(&p, &step, &q, &g).unwrap();
    let b = evolve_step(&p, &step, &q.with_nodes(2 * q.n_nodes).unwrap(), &g).unwrap();
    let diff = a
        .density
        .values()
        .iter()
        .zip(b.density.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn trapezoid_rule_agrees_with_gauss_legendre() {
    let p = packet(2.35, 0.1);
    let step = StepPotential::rising(2.5).unwrap();
    let g = SpacetimeGrid::new(-60.0, 60.0, 601, 0.0, 25.0, 30).unwrap();
    let gl = KQuadrature::default_for(&p).unwrap();
    let tr = KQuadrature::for_packet(&p, 4096, QuadratureRule::Trapezoid).unwrap();
    let a = evolve_step(&p, &step, &gl, &g).unwrap();
    let b = evolve_step(&p, &step, &tr, &g).unwrap();
    let diff = a
        .density
        .values()
        .iter()
        .zip(b.density.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    // trapezoid sees the branch-point kink, so only algebraic agreement
    assert!(diff < 1e-5, "{diff:e}");
}

#[test]
fn spinor_limits() {
    let p = packet(3.5, 0.1);
    let g = SpacetimeGrid::new(-60.0, 90.0, 301, 0.0, 20.0, 40).unwrap();
    let q = KQuadrature::default_for(&p).unwrap();

    let up_only = SpinorPacket::new(p, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
    let z = ZeemanStep::new(2.5).unwrap();
    let evo = evolve_spinor(&up_only, &z, &q, &g).unwrap();
    assert_eq!(evo.total.values(), evo.up_run.density.values());

    let field_free = evolve_spinor(&SpinorPacket::equal(p), &ZeemanStep::new(0.0).unwrap(), &q, &g).unwrap();
    assert_eq!(field_free.up.values(), field_free.down.values());
    let right = field_free.total.row(g.nt - 1);
    let peaks = right
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] >= w[2] && w[1] > 1e-3)
        .count();
    assert_eq!(peaks, 1);
}
