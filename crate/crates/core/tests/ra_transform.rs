use approx::assert_relative_eq;
use proptest::prelude::*;

use kslab::transform::{
    conjugate_poisson, limit_report, ra_direct_pv, ra_spectral, radial_velocity, riesz,
};
use kslab::{bump_initial_data, Grid, Params, RadialProfile, ScalarField};

fn p(a: f64) -> Params {
    Params::new(2, a, 1.0).unwrap()
}

fn bump_field(points: usize) -> ScalarField {
    let grid = Grid::new(2, 4.0, points).unwrap();
    ScalarField::from_radial(grid, &bump_initial_data(1.0, 1.0, 1.0).unwrap())
}

fn blob(x: &[f64]) -> f64 {
    let r2 = (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2);
    (-4.0 * r2).exp() * (1.0 + 0.5 * x[0])
}

#[test]
fn zero_and_constant_fields_map_to_zero() {
    let grid = Grid::new(2, 4.0, 32).unwrap();
    for f in [ScalarField::zeros(grid), ScalarField::constant(grid, -2.5)] {
        let u = ra_spectral(&f, &p(1.0));
        assert!(u.max_magnitude() < 1e-14);
        assert!(conjugate_poisson(&f, &p(1.0)).max_magnitude() < 1e-14);
        assert!(riesz(&f).max_magnitude() < 1e-14);
    }
    let zero = ra_direct_pv(&ScalarField::zeros(grid), &p(1.0), &[vec![0.3, 0.1]]).unwrap();
    assert_eq!(zero[0], vec![0.0, 0.0]);
}

#[test]
fn spectral_magnitude_follows_symbol() {
    let grid = Grid::new(2, 4.0, 32).unwrap();
    let f = ScalarField::from_fn(grid, blob);
    let a = 0.7;
    let u = ra_spectral(&f, &p(a));
    let mut k = [0.0; 2];
    for j in 0..2 {
        let got = u.component(j).spectral();
        for (i, c) in f.spectral().iter().enumerate() {
            if grid.is_nyquist(i, j) {
                continue;
            }
            grid.wavevector(i, &mut k);
            let m = (k[0] * k[0] + k[1] * k[1]).sqrt();
            let want = if m == 0.0 {
                0.0
            } else {
                (1.0 - (-a * m).exp()) * k[j].abs() / m * c.norm()
            };
            assert!((got[i].norm() - want).abs() <= 1e-12 * (1.0 + want));
        }
    }
}

#[test]
fn riesz_minus_poisson_is_ra() {
    let f = ScalarField::from_fn(Grid::new(2, 4.0, 64).unwrap(), blob);
    for a in [0.05, 1.0, 20.0] {
        let (r, q, u) = (
            riesz(&f),
            conjugate_poisson(&f, &p(a)),
            ra_spectral(&f, &p(a)),
        );
        for j in 0..2 {
            let top = r
                .component(j)
                .spectral()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            for ((x, y), z) in r
                .component(j)
                .spectral()
                .iter()
                .zip(q.component(j).spectral())
                .zip(u.component(j).spectral())
            {
                assert!((x - y - z).norm() <= 1e-12 * top);
            }
        }
    }
}

#[test]
fn large_screening_limits() {
    let f = ScalarField::from_fn(Grid::new(2, 4.0, 64).unwrap(), blob);
    let a = 41.0 / f.grid().k_min();
    assert!(conjugate_poisson(&f, &p(a)).l2_norm() < 1e-12);
    let rep = limit_report(&f, &[a]).unwrap();
    assert!(rep.riesz_gap[0] < 1e-10);
}

#[test]
fn riesz_of_a_single_mode() {
    let grid = Grid::new(2, 4.0, 32).unwrap();
    let k = [3.0 * grid.k_min(), -1.0 * grid.k_min()];
    let m = (k[0] * k[0] + k[1] * k[1]).sqrt();
    let f = ScalarField::from_fn(grid, move |x| (k[0] * x[0] + k[1] * x[1]).cos());
    let r = riesz(&f);
    // −i k_j/|k| turns cos into (k_j/|k|)·sin
    for j in 0..2 {
        let want =
            ScalarField::from_fn(grid, move |x| k[j] / m * (k[0] * x[0] + k[1] * x[1]).sin());
        for (a, b) in r.component(j).values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert_relative_eq!(r.l2_norm(), f.l2_norm(), max_relative = 1e-12);
}

#[test]
fn direct_is_zero_at_the_origin_for_radial_data() {
    let f = bump_field(128);
    let u = ra_direct_pv(&f, &p(1.0), &[vec![0.0, 0.0]]).unwrap();
    assert!(u[0][0].abs() < 1e-8 && u[0][1].abs() < 1e-8, "{:?}", u[0]);
}

#[test]
fn direct_matches_spectral_at_a_point() {
    let f = bump_field(128);
    let x = vec![0.5, 0.0];
    let direct = ra_direct_pv(&f, &p(1.0), &[x.clone()]).unwrap()[0].clone();
    let spectral = ra_spectral(&f, &p(1.0)).component(0).evaluate_at(&x);
    assert_relative_eq!(direct[0], spectral, max_relative = 1e-3);
    assert!(direct[1].abs() < 1e-8);
}

#[test]
fn radial_velocity_matches_direct() {
    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let f = bump_field(256);
    let direct = ra_direct_pv(&f, &p(1.0), &[vec![0.5, 0.0]]).unwrap()[0][0];
    assert_relative_eq!(
        radial_velocity(&b, &p(1.0), 0.5),
        direct,
        max_relative = 1e-4
    );
}

#[test]
fn radial_velocity_matches_spectral_along_a_ray() {
    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let f = bump_field(256);
    for n in [2usize] {
        let params = Params::new(n, 0.5, 1.0).unwrap();
        let u = ra_spectral(&f, &params);
        for r in [0.125, 0.5, 0.875, 1.5] {
            let s = u.component(0).evaluate_at(&[r, 0.0]);
            assert!((radial_velocity(&b, &params, r) - s).abs() < 2e-4, "r={r}");
        }
    }
}

#[test]
fn radial_velocity_sign_and_trivial_cases() {
    let b = bump_initial_data(1.0, 1.0, 4.0).unwrap();
    for n in [2usize, 3] {
        for a in [0.1, 1.0, 10.0] {
            let params = Params::new(n, a, 1.0).unwrap();
            for r in [1e-3, 0.1, 0.5, 0.99, 1.0, 3.0] {
                assert!(radial_velocity(&b, &params, r) <= 0.0);
            }
            assert_eq!(radial_velocity(&b, &params, 0.0), 0.0);
        }
    }
    let flat = RadialProfile::new(vec![0.0, 0.5, 1.0], vec![2.0, 2.0, 2.0]).unwrap();
    assert_eq!(radial_velocity(&flat, &p(1.0), 0.4), 0.0);
}

#[test]
fn radial_equivariance_under_quarter_turns() {
    let grid = Grid::new(2, 4.0, 64).unwrap();
    let np = grid.points_per_dim();
    let f1 = ScalarField::from_fn(grid, blob);
    let f2 = ScalarField::from_fn(grid, |x| blob(&[-x[1], x[0]]));
    let (u1, u2) = (ra_spectral(&f1, &p(0.8)), ra_spectral(&f2, &p(0.8)));
    let top = u1.max_magnitude();
    for i in 1..np {
        for j in 1..np {
            // O(x, y) = (−y, x) maps node (i, j) to (N − j, i); O⁻¹(u, v) = (v, −u)
            let at2 = grid.ravel(&[i, j]);
            let at1 = grid.ravel(&[np - j, i]);
            let got = [u2.component(0).values()[at2], u2.component(1).values()[at2]];
            let want = [
                u1.component(1).values()[at1],
                -u1.component(0).values()[at1],
            ];
            assert!(
                (got[0] - want[0]).abs() < 1e-12 * top && (got[1] - want[1]).abs() < 1e-12 * top
            );
        }
    }
}

#[test]
fn limit_report_examples() {
    let f = bump_field(64);
    let mean = f.integral() / f.grid().volume();
    let centred = ScalarField::from_fn(*f.grid(), |x| f.evaluate_at(x) - mean);
    let rep = limit_report(&f, &[0.0, 0.5, 2.0, 8.0]).unwrap();
    assert_eq!(rep.zero_gap[0], 0.0);
    assert_relative_eq!(rep.riesz_gap[0], centred.l2_norm(), max_relative = 1e-10);
    for i in 0..4 {
        assert!(rep.riesz_gap[i] <= f.l2_norm() && rep.zero_gap[i] <= f.l2_norm());
    }
    assert!(limit_report(&f, &[1.0, 0.5]).is_err());
    assert!(limit_report(&f, &[-1.0]).is_err());
}

#[test]
fn doubling_a_halves_the_riesz_gap_on_high_bands() {
    let grid = Grid::new(2, 4.0, 64).unwrap();
    let k = [6.0 * grid.k_min(), 5.0 * grid.k_min()];
    let f = ScalarField::from_fn(grid, move |x| {
        (k[0] * x[0]).sin() + 0.3 * (k[1] * x[1]).cos()
    });
    let a = std::f64::consts::LN_2 / (5.0 * grid.k_min());
    let rep = limit_report(&f, &[a, 2.0 * a, 4.0 * a]).unwrap();
    assert!(rep.riesz_gap[1] <= 0.5 * rep.riesz_gap[0] * (1.0 + 1e-12));
    assert!(rep.riesz_gap[2] <= 0.5 * rep.riesz_gap[1] * (1.0 + 1e-12));
}

fn smooth_field() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec((-3i32..=3, -3i32..=3, -1.0f64..1.0), 1..6).prop_map(|modes| {
        let grid = Grid::new(2, 2.0, 16).unwrap();
        let km = grid.k_min();
        ScalarField::from_fn(grid, move |x| {
            modes
                .iter()
                .map(|&(m1, m2, c)| c * (km * (m1 as f64 * x[0] + m2 as f64 * x[1]) + c).cos())
                .sum()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l2_contraction(f in smooth_field(), a in 0.01f64..50.0, s in 0.0f64..3.0) {
        let params = p(a);
        prop_assert!(ra_spectral(&f, &params).l2_norm() <= f.l2_norm() * (1.0 + 1e-12) + 1e-300);
        let lf = f.lambda_s(s).unwrap();
        let lhs = ra_spectral(&lf, &params).l2_norm();
        prop_assert!(lhs <= lf.l2_norm() * (1.0 + 1e-12) + 1e-300);
        // Λ^s commutes with R_a
        let swapped: f64 = (0..2)
            .map(|j| ra_spectral(&f, &params).component(j).lambda_s(s).unwrap().l2_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        prop_assert!((swapped - lhs).abs() <= 1e-10 * (1.0 + lhs));
    }
}
