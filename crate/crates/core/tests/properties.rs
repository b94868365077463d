use bubblelab::bubbles::{critical_exponent, BubbleParams, DerivativeIndex};
use bubblelab::domain::{DomainModel, Field, GridSpec, Mesh};
use bubblelab::exec::Execution;
use bubblelab::fit::{assemble_error_fields, fit, FitContext, FitOptions};
use bubblelab::interaction::{cross_integral, pair_quantities, McOptions, Region};
use bubblelab::solver::{ProjectionKind, Projector};
use proptest::prelude::*;
use std::sync::Arc;

fn radial(n: usize, cells: usize) -> Arc<Mesh> {
    Mesh::build(&DomainModel::unit_ball(n).unwrap(), &GridSpec::radial(cells)).unwrap()
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #[test]
    fn pair_quantities_are_symmetric_and_bracketed(
        n in 3usize..8,
        di in 1e-4f64..1.0,
        dj in 1e-4f64..1.0,
        shift in 0.0f64..2.0,
    ) {
        let bi = BubbleParams::centered(n, di).unwrap();
        let mut x = vec![0.0; n];
        x[n - 1] = shift;
        let bj = BubbleParams::new(n, dj, x).unwrap();
        prop_assume!(bi != bj);
        let a = pair_quantities(&bi, &bj).unwrap();
        let b = pair_quantities(&bj, &bi).unwrap();
        prop_assert!((a.q - b.q).abs() <= 1e-14 * a.q);
        prop_assert!((a.r - b.r).abs() <= 1e-12 * a.r);
        prop_assert!(a.q > 0.0 && a.q <= 2f64.powf(-(n as f64 - 2.0) / 2.0) * (1.0 + 1e-12));
        // q^{−2/(n−2)} is a sum of three terms whose largest is R².
        let s = a.q.powf(-2.0 / (n as f64 - 2.0));
        prop_assert!(s >= a.r * a.r * (1.0 - 1e-10) && s <= 3.0 * a.r * a.r * (1.0 + 1e-10));
    }

    #[test]
    fn bubbles_are_rescaled_translates(n in 3usize..8, delta in 1e-3f64..10.0, xi in point(7), y in point(7)) {
        let xi = xi[..n].to_vec();
        let y = y[..n].to_vec();
        let b = BubbleParams::new(n, delta, xi.clone()).unwrap();
        let unit = BubbleParams::centered(n, 1.0).unwrap();
        let x: Vec<f64> = xi.iter().zip(&y).map(|(c, v)| c + delta * v).collect();
        let want = delta.powf(-(n as f64 - 2.0) / 2.0) * unit.value(&y);
        prop_assert!((b.value(&x) - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn concentric_cross_integrals_are_symmetric(n in 3usize..6, di in 0.01f64..0.5, dj in 0.01f64..0.5, frac in 0.0f64..1.0) {
        let total = 2.0 * n as f64 / (n as f64 - 2.0);
        let (s, t) = (frac * total, (1.0 - frac) * total);
        let ball = DomainModel::unit_ball(n).unwrap();
        let bi = BubbleParams::centered(n, di).unwrap();
        let bj = BubbleParams::centered(n, dj).unwrap();
        let mc = McOptions::default();
        let a = cross_integral(&bi, &bj, s, t, Region::Domain(&ball), &mc).unwrap();
        let b = cross_integral(&bj, &bi, t, s, Region::Domain(&ball), &mc).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1e-300));
        prop_assert!(a.value > 0.0);
    }

    #[test]
    fn field_csv_round_trips_exactly(values in prop::collection::vec(-1e6f64..1e6, 1..64)) {
        let mesh = radial(3, 40);
        let vals: Vec<f64> = (0..mesh.len()).map(|i| values[i % values.len()]).collect();
        let f = Field::new(mesh, vals).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = Field::read_csv(std::io::Cursor::new(buf)).unwrap();
        prop_assert_eq!(f.values(), g.values());
        prop_assert_eq!(f.mesh().grid(), g.mesh().grid());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn interaction_error_terms_are_nonnegative(d1 in 0.15f64..0.3, ratio in 0.05f64..0.3, kind in prop::bool::ANY) {
        let kind = if kind { ProjectionKind::Pu2 } else { ProjectionKind::Pu1 };
        let mesh = radial(3, 600);
        let ctx = FitContext::new(&mesh, kind, 4.0).unwrap();
        let bs = [BubbleParams::centered(3, d1).unwrap(), BubbleParams::centered(3, d1 * ratio).unwrap()];
        let proj = Projector::new(&mesh, kind, 4.0).unwrap();
        let u = proj.bubble(&bs[0]).unwrap().add(&proj.bubble(&bs[1]).unwrap()).unwrap();
        let st = fit(&ctx, &u, None, &bs, FitOptions::default()).unwrap();
        let e = assemble_error_fields(&st).unwrap();
        let p = critical_exponent(3);
        let scale = u.max_abs().powf(p);
        // Without background the first term vanishes identically.
        prop_assert!(e.i1.max_abs() <= 1e-12 * scale);
        prop_assert!(e.i2.min() >= -1e-10 * scale);
        prop_assert!(e.i2.max_abs() > 0.0);
    }

    #[test]
    fn dilation_direction_matches_difference_quotient(delta in 0.05f64..0.3, kind in prop::bool::ANY) {
        let kind = if kind { ProjectionKind::Pu2 } else { ProjectionKind::Pu1 };
        let mesh = radial(3, 800);
        let proj = Projector::new(&mesh, kind, 4.0).unwrap();
        let b = BubbleParams::centered(3, delta).unwrap();
        let h = 1e-5 * delta;
        let up = proj.bubble(&b.with_delta(delta + h).unwrap()).unwrap();
        let dn = proj.bubble(&b.with_delta(delta - h).unwrap()).unwrap();
        let fd = up.sub(&dn).unwrap().scale(delta / (2.0 * h));
        let pz = proj.derivative(&b, DerivativeIndex::DILATION).unwrap();
        let err = fd.sub(&pz).unwrap().max_abs();
        prop_assert!(err <= 1e-6 * pz.max_abs(), "{err:e} vs {:e}", pz.max_abs());
    }
}

#[test]
fn translation_direction_matches_difference_quotient() {
    let n = 3;
    let domain = DomainModel::unit_ball(n).unwrap();
    let (delta, c) = (0.1, 0.3);
    let mesh = Mesh::build(&domain, &GridSpec::axisymmetric_around(c, delta, 160, 80)).unwrap();
    let proj = Projector::new(&mesh, ProjectionKind::Pu1, 0.0).unwrap();
    let b = BubbleParams::new(n, delta, vec![c, 0.0, 0.0]).unwrap();
    let h = 1e-6;
    let up = proj.bubble(&b.with_xi(vec![c + h, 0.0, 0.0]).unwrap()).unwrap();
    let dn = proj.bubble(&b.with_xi(vec![c - h, 0.0, 0.0]).unwrap()).unwrap();
    let fd = up.sub(&dn).unwrap().scale(delta / (2.0 * h));
    let pz = proj.derivative(&b, DerivativeIndex::translation(1)).unwrap();
    let err = fd.sub(&pz).unwrap().max_abs();
    assert!(err <= 1e-5 * pz.max_abs(), "{err:e} vs {:e}", pz.max_abs());
}

#[test]
fn separated_cross_integral_is_symmetric_within_sampling_error() {
    let n = 3;
    let total = 6.0;
    let bi = BubbleParams::centered(n, 0.2).unwrap();
    let bj = BubbleParams::new(n, 0.1, vec![0.4, 0.0, 0.0]).unwrap();
    let mc = McOptions { samples: 200_000, exec: Execution::Parallel, ..Default::default() };
    let a = cross_integral(&bi, &bj, 2.0, total - 2.0, Region::WholeSpace, &mc).unwrap();
    let b = cross_integral(&bj, &bi, total - 2.0, 2.0, Region::WholeSpace, &mc).unwrap();
    let spread = 4.0 * (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    assert!((a.value - b.value).abs() <= spread, "{a:?} vs {b:?}");
}
