//! Behaviour of the time steppers on small meshes.

use std::sync::Arc;

use thermoporo::checks::mean_conservation;
use thermoporo::experiments::{run_mafea, ElementPair};
use thermoporo::mesh::Segment;
use thermoporo::model::{BarryMercer, Manufactured, PhysicalParams, Problem};
use thermoporo::solver::{SolverSettings, StepperState};

fn test1(b: f64) -> Arc<dyn Problem> {
    let params = PhysicalParams {
        b,
        ..PhysicalParams::test1()
    };
    Arc::new(Manufactured::test1(params).unwrap())
}

fn settings(theta: u8, dt: f64, t_final: f64) -> SolverSettings {
    SolverSettings {
        theta,
        dt,
        t_final,
        ..Default::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_data_keeps_zero_state_for_both_schemes() {
    for theta in [0u8, 1] {
        let pr: Arc<dyn Problem> =
            Arc::new(BarryMercer::new(PhysicalParams::barry_pressure(), Segment::G4).with_amplitude(0.0));
        let s = run_mafea(pr, 4, ElementPair::P2_P1, &settings(theta, 1e-3, 3e-3), None, |_, _| Ok(())).unwrap();
        for f in [&s.u, &s.tau, &s.varpi, &s.varsigma, &s.p, &s.temp, &s.q] {
            assert!(f.coeffs.iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn recovery_uses_the_right_time_level() {
    let c = thermoporo::model::DerivedCoefficients::derive(&PhysicalParams::test1()).unwrap();
    for theta in [0u8, 1] {
        let mut prev: Option<StepperState> = None;
        run_mafea(test1(0.0), 4, ElementPair::P2_P1, &settings(theta, 1e-2, 3e-2), None, |_, s| {
            if let Some(pv) = &prev {
                let (w, z) = if theta == 1 { (&s.varpi, &s.varsigma) } else { (&pv.varpi, &pv.varsigma) };
                for i in 0..s.p.coeffs.len() {
                    let (p, t, q) = c.recover(s.tau.coeffs[i], w.coeffs[i], z.coeffs[i]);
                    assert_eq!(p, s.p.coeffs[i]);
                    assert_eq!(t, s.temp.coeffs[i]);
                    assert_eq!(q, s.q.coeffs[i]);
                }
            }
            prev = Some(s.clone());
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn initial_state_round_trips_through_the_variable_change() {
    let c = thermoporo::model::DerivedCoefficients::derive(&PhysicalParams::test1()).unwrap();
    let mut init = None;
    run_mafea(test1(0.0), 4, ElementPair::P2_P2, &settings(1, 1e-2, 1e-2), None, |_, s| {
        init.get_or_insert_with(|| s.clone());
        Ok(())
    })
    .unwrap();
    let s = init.unwrap();
    for i in 0..s.p.coeffs.len() {
        let (w, t, z) = c.to_reformulated(s.p.coeffs[i], s.temp.coeffs[i], s.q.coeffs[i]);
        assert!((w - s.varpi.coeffs[i]).abs() <= 1e-9 * (1.0 + w.abs()));
        assert!((t - s.tau.coeffs[i]).abs() <= 1e-9 * (1.0 + t.abs()));
        assert!((z - s.varsigma.coeffs[i]).abs() <= 1e-9 * (1.0 + z.abs()));
    }
}

#[test]
fn means_are_conserved_on_flux_only_runs() {
    for n in [4, 8] {
        for theta in [0u8, 1] {
            let (w, s) = mean_conservation(theta, n, 6).unwrap();
            assert!(w <= 1e-8 && s <= 1e-8, "n = {n}, theta = {theta}: {w:e}, {s:e}");
        }
    }
}

#[test]
fn decoupled_and_monolithic_agree_to_first_order() {
    let mut diffs = Vec::new();
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let a = run_mafea(test1(0.0), 4, ElementPair::P2_P1, &settings(0, dt, 0.1), None, |_, _| Ok(())).unwrap();
        let b = run_mafea(test1(0.0), 4, ElementPair::P2_P1, &settings(1, dt, 0.1), None, |_, _| Ok(())).unwrap();
        let scale = b.p.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        diffs.push(max_diff(&a.p.coeffs, &b.p.coeffs) / scale);
    }
    for w in diffs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.6..=2.5).contains(&r), "ratio {r} from {diffs:?}");
    }
}

#[test]
fn picard_is_immediate_for_constant_permeability() {
    run_mafea(test1(0.0), 4, ElementPair::P2_P1, &settings(1, 1e-2, 5e-2), None, |_, s| {
        if s.n > 0 {
            assert!(s.picard_iterations <= 2, "step {}: {}", s.n, s.picard_iterations);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn picard_iterations_do_not_grow_as_coupling_weakens() {
    // The pulse benchmark keeps τ of order one, so the law is never clamped.
    let mut counts = Vec::new();
    for b in [1.0, 1e-1, 1e-2] {
        let params = PhysicalParams {
            b,
            ..PhysicalParams::barry_pressure()
        };
        let pr: Arc<dyn Problem> = Arc::new(BarryMercer::new(params, Segment::G3));
        let mut total = 0;
        run_mafea(pr, 4, ElementPair::P2_P1, &settings(1, 0.125, 1.0), None, |_, s| {
            total += s.picard_iterations;
            Ok(())
        })
        .unwrap();
        counts.push(total);
    }
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

#[test]
fn reruns_are_bitwise_identical() {
    let run = || run_mafea(test1(1.0), 4, ElementPair::P2_P1, &settings(1, 1e-2, 3e-2), None, |_, _| Ok(())).unwrap();
    let (a, b) = (run(), run());
    for (x, y) in [(&a.u, &b.u), (&a.p, &b.p), (&a.temp, &b.temp)] {
        assert!(x.coeffs.iter().zip(&y.coeffs).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}
