use nalgebra::{dmatrix, dvector};
use num_bigint::BigInt;
use num_rational::BigRational;

use kleinsplit::dynamics::{
    affine_orbit_approx, check_hyperbolic_toral, density_report, fixed_point, fixed_point_sweep, generic_point,
    norm_bound_scan_real, orbit_period, torus_orbit_rational, SweepStrategy,
};
use kleinsplit::group::GroupContext;
use kleinsplit::linalg::{logm, IntMatrix, Stability};
use kleinsplit::regions::build_splitting;
use kleinsplit::{Complex, ComplexVector, RealMatrix, RealVector};

fn cat2() -> IntMatrix {
    IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap()
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

/// `x = (I − Bⁿ)⁻¹b` by Cramer's rule in floating point, for small `n`.
fn cramer_fixed_point(n: u32, b: [f64; 2]) -> [f64; 2] {
    let mut p = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n {
        p = [
            [2.0 * p[0][0] + p[1][0], 2.0 * p[0][1] + p[1][1]],
            [p[0][0] + p[1][0], p[0][1] + p[1][1]],
        ];
    }
    let a = [[1.0 - p[0][0], -p[0][1]], [-p[1][0], 1.0 - p[1][1]]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ]
}

#[test]
fn second_hand_solved_fixed_point() {
    let rec = fixed_point(&cat2(), &[BigInt::from(0), BigInt::from(1)], 1).unwrap();
    assert_eq!(rec.x, dvector![-1.0, 1.0]);
    assert_eq!(cramer_fixed_point(1, [0.0, 1.0]), [-1.0, 1.0]);
}

#[test]
fn exhaustive_sweep_matches_brute_force() {
    let target = generic_point(2);
    let report = fixed_point_sweep(&cat2(), &target, 6, SweepStrategy::Exhaustive { radius: 3 }).unwrap();
    let mut best = f64::INFINITY;
    for n in 1..=6 {
        for b0 in -3..=3 {
            for b1 in -3..=3 {
                let x = cramer_fixed_point(n, [b0 as f64, b1 as f64]);
                best = best.min(((x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2)).sqrt());
            }
        }
    }
    let found = report.best().unwrap().distance;
    assert!((found - best).abs() < 1e-12, "{found} vs {best}");
    assert!(report.bound_holds);
}

#[test]
fn target_that_is_a_fixed_point() {
    let report = fixed_point_sweep(&cat2(), &dvector![0.0, -1.0], 3, SweepStrategy::Exhaustive { radius: 1 }).unwrap();
    let best = report.best().unwrap();
    assert_eq!(best.distance, 0.0);
    assert_eq!((best.record.b.clone(), best.record.n), (vec![BigInt::from(1), BigInt::from(0)], 1));
}

#[test]
fn half_lattice_orbit_is_periodic() {
    let x0 = [half(), half()];
    let orbit = torus_orbit_rational(&cat2(), &x0, 12).unwrap();
    let zero = || BigRational::from_integer(0.into());
    let allowed = [[half(), half()], [half(), zero()], [zero(), half()]];
    for p in &orbit {
        assert!(allowed.iter().any(|a| a[..] == p[..]), "{p:?}");
    }
    // (1/2,1/2) → (1/2,0) → (0,1/2) → (1/2,1/2)
    assert_eq!(orbit_period(&cat2(), &x0, 10).unwrap(), Some((0, 3)));
}

#[test]
fn density_edge_cases() {
    let one = density_report(&[dvector![0.1, 0.1]], 0.5).unwrap();
    assert_eq!(one.coverage, 0.25);
    let centres: Vec<RealVector> = (0..8)
        .flat_map(|i| (0..8).map(move |j| dvector![(i as f64 + 0.5) / 8.0, (j as f64 + 0.5) / 8.0]))
        .collect();
    let all = density_report(&centres, 0.125).unwrap();
    assert_eq!(all.coverage, 1.0);
    assert!(all.max_gap < 1e-12);
}

#[test]
fn contracting_scan_tends_to_one() {
    let q = dmatrix![1.0, 2.0; 0.5, 3.0];
    let b = &q * RealMatrix::from_diagonal(&dvector![0.5, 0.5]) * q.try_inverse().unwrap();
    let ns: Vec<i64> = (1..=80).collect();
    let scan = norm_bound_scan_real(&b, &ns).unwrap();
    assert!((scan.value_at(80).unwrap() - 1.0).abs() < 1e-12);
    assert!(scan.tail_stable());
    // n = 1: (I − B)⁻¹ = 2I
    assert!((scan.value_at(1).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn discrete_margins_of_cat_map() {
    let report = check_hyperbolic_toral(&cat2(), 1e-9).unwrap();
    let mut margins = report.margins();
    margins.sort_by(f64::total_cmp);
    let s5 = 5f64.sqrt();
    assert!((margins[0] - (1.0 - (3.0 - s5) / 2.0)).abs() < 1e-12);
    assert!((margins[1] - ((3.0 + s5) / 2.0 - 1.0)).abs() < 1e-12);
}

#[test]
fn cat_map_time_to_sphere_closed_form() {
    let m = logm(&cat2().to_real()).unwrap().log;
    let split = build_splitting(&m, 1e-9).unwrap();
    let v = split.stable.basis.column(0).into_owned();
    // V = P·|x|² on the stable line; scale so that V(x) = 9
    let unit = &v / split.lyapunov_value(Stability::Stable, &v).unwrap().sqrt();
    let t = split.time_to_sphere(&(unit * 3.0)).unwrap();
    let mu = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    assert!((t - 3f64.ln() / mu).abs() < 1e-10, "{t}");
}

#[test]
fn witness_at_ten_steps() {
    let m = RealMatrix::from_diagonal(&dvector![-1.0, 1.0]);
    let ctx = GroupContext::new(m.clone()).unwrap();
    let split = build_splitting(&m, 1e-9).unwrap();
    let i = Complex::new(0.0, 1.0);
    let z1: ComplexVector = dvector![Complex::from(0.0), i];
    let z2: ComplexVector = dvector![i, Complex::from(0.0)];
    let table = split.divergence_witness(&ctx, &z1, &z2, 10, 1e-9).unwrap();
    let row = &table.rows[9];
    assert_eq!(row.n, 10);
    assert!((row.dist_w - (-10f64).exp()).abs() < 1e-18);
}

#[test]
fn affine_orbit_reaches_centre() {
    // frozen from a run of this implementation; the best n up to 10⁴ is 9904
    let approx = affine_orbit_approx(&cat2(), &generic_point(2), &dvector![0.5, 0.5], 10_000).unwrap();
    assert_eq!(approx.n, 9904);
    assert!((approx.distance - 0.004715218819913164).abs() < 1e-12);
}

#[test]
fn affine_orbit_at_start() {
    let x = generic_point(2);
    let approx = affine_orbit_approx(&cat2(), &x, &x, 5).unwrap();
    assert_eq!((approx.n, approx.distance), (0, 0.0));
    assert!(approx.b.iter().all(|v| *v == BigInt::from(0)));
}
