//! Property tests of the invariants that hold for every admissible input.

use proptest::prelude::*;

use thermoporo::assembly::CsrMatrix;
use thermoporo::experiments::ConvergenceTable;
use thermoporo::mesh::{build_structured, refine_uniform, Rect};
use thermoporo::model::params::scalar_tensor;
use thermoporo::model::{DerivedCoefficients, PermeabilityLaw, PhysicalParams};
use thermoporo::solver::linear::solve_csr;
use thermoporo::spaces::{shape_functions, ElementGeometry};

/// Parameter sets with storage dominance `c0 > b0`, `a0 > b0`.
fn params() -> impl Strategy<Value = PhysicalParams> {
    (
        0.0..1.0f64,
        0.01..10.0f64,
        0.01..10.0f64,
        0.01..2.0f64,
        0.01..2.0f64,
        1e2..1e7f64,
        0.05..0.45f64,
    )
        .prop_map(|(b0, da, dc, alpha, beta, young, poisson)| PhysicalParams {
            a0: b0 + da,
            b0,
            c0: b0 + dc,
            alpha,
            beta,
            a: 1.0,
            b: 1.0,
            k0: scalar_tensor(1.0),
            theta: scalar_tensor(1.0),
            young,
            poisson,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variable_change_round_trips(p in params(), x in prop::array::uniform3(-10.0..10.0f64)) {
        let c = DerivedCoefficients::derive(&p).unwrap();
        prop_assert!(c.gamma6 > 0.0);
        let (_, rel) = c.identity_residual();
        prop_assert!(rel <= 1e-12, "identity residual {rel:e}");
        let (w, t, s) = c.to_reformulated(x[0], x[1], x[2]);
        let (pp, tt, qq) = c.recover(t, w, s);
        // τ carries λ+μ ~ E, so the round trip loses about log10(E) digits.
        let tol = 1e-12 * p.young * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        prop_assert!((pp - x[0]).abs() <= tol && (tt - x[1]).abs() <= tol && (qq - x[2]).abs() <= tol);
    }

    #[test]
    fn closed_form_gammas_match_inverse(p in params()) {
        let c = DerivedCoefficients::derive(&p).unwrap();
        let closed = c.closed_form_gammas(&p);
        for (g, h) in c.gammas().iter().zip(closed) {
            prop_assert!((g - h).abs() <= 1e-8 * g.abs().max(h.abs()), "{g:e} vs {h:e}");
        }
    }

    #[test]
    fn permeability_is_monotone_in_tau(b in 1e-3..10.0f64, t0 in -5.0..5.0f64, dt in 1e-6..5.0f64) {
        let p = PhysicalParams { b, ..PhysicalParams::test1() };
        let law = PermeabilityLaw::from_params(&p);
        let (lo, hi) = (law.factor(t0).unwrap(), law.factor(t0 + dt).unwrap());
        prop_assert!(hi >= lo && lo > 0.0);
        prop_assert!(hi <= p.a * 1e14 && lo >= p.a * 1e-14);
    }

    #[test]
    fn shape_functions_partition_unity(
        k in 1usize..=2,
        v in prop::array::uniform6(-1.0..1.0f64),
        l in prop::array::uniform2(0.0..1.0f64),
    ) {
        let tri = [[v[0], v[1]], [v[2] + 2.0, v[3]], [v[4], v[5] + 2.0]];
        let (a, b) = if l[0] + l[1] > 1.0 { (1.0 - l[0], 1.0 - l[1]) } else { (l[0], l[1]) };
        let sh = shape_functions(k, &ElementGeometry::new(tri), [1.0 - a - b, a, b]);
        let sum: f64 = sh.values.iter().sum();
        let gsum = sh.grads.iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(gsum[0].abs() < 1e-9 && gsum[1].abs() < 1e-9);
    }

    #[test]
    fn sparse_solves_meet_backward_error(
        n in 2usize..40,
        seed in prop::collection::vec(-1.0..1.0f64, 200),
        scale in prop::sample::select(vec![1e-8, 1.0, 1e8]),
    ) {
        let mut trip = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for j in [i.wrapping_sub(1), i + 1, (i * 7 + 3) % n] {
                if j < n && j != i {
                    let v = seed[(i * 3 + j) % seed.len()];
                    off += v.abs();
                    trip.push((i, j, v * scale));
                }
            }
            trip.push((i, i, (off + 0.5 + seed[i % seed.len()].abs()) * scale));
        }
        let a = CsrMatrix::from_triplets(n, n, &trip);
        let rhs: Vec<f64> = (0..n).map(|i| seed[(5 * i + 1) % seed.len()]).collect();
        let x = solve_csr(&a, &rhs, 1e-12).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&rhs).map(|(u, v)| u - v).collect();
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let norm_a = (0..n).map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        prop_assert!(inf(&r) <= 1e-12 * (norm_a * inf(&x) + inf(&rhs)));
    }

    #[test]
    fn meshes_tile_the_domain(nx in 1usize..12, ny in 1usize..12) {
        let m = build_structured(nx, ny, Rect::UNIT).unwrap();
        let area: f64 = (0..m.num_triangles()).map(|t| m.signed_area(t)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
        prop_assert!((0..m.num_triangles()).all(|t| m.signed_area(t) > 0.0));
        let r = refine_uniform(&m).unwrap();
        prop_assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        prop_assert!((r.h - 0.5 * m.h).abs() < 1e-12);
    }

    #[test]
    fn rates_recover_power_laws(c in 0.1..10.0f64, order in 0.5..4.0f64) {
        let rows: Vec<(f64, [f64; 6])> = [4.0, 8.0, 16.0]
            .iter()
            .map(|n: &f64| (1.0 / n, [c * n.powf(-order); 6]))
            .collect();
        let t = ConvergenceTable { key: "h".into(), relative: false, rows };
        for r in t.finest_rates().unwrap() {
            prop_assert!((r - order).abs() < 1e-10);
        }
    }
}
