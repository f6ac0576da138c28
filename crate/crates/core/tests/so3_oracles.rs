use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use geofuse::so3::*;

fn gaussian_vec(rng: &mut impl Rng) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

fn random_rotation(rng: &mut impl Rng) -> Rotation {
    Rotation::project(&Matrix3::from_fn(|_, _| rng.sample(StandardNormal)))
}

/// Truncated Taylor series with scaling and squaring: independent of the
/// Rodrigues closed form.
fn series_exp(v: &Vec3) -> Matrix3 {
    let squarings = 4;
    let a = wedge(v) / f64::powi(2.0, squarings);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..=12 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

#[test]
fn exp_matches_series_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let v = gaussian_vec(&mut rng) * 1.2;
        assert_abs_diff_eq!(*exp_so3(&v).matrix(), series_exp(&v), epsilon = 1e-12);
    }
}

#[test]
fn boxplus_matches_series_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let r = random_rotation(&mut rng);
        let u = gaussian_vec(&mut rng);
        assert_abs_diff_eq!(*boxplus(&r, &u).matrix(), r.matrix() * series_exp(&u), epsilon = 1e-12);
    }
}

#[test]
fn exp_known_values() {
    assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Matrix3::identity());
    let half_x = exp_so3(&Vec3::new(std::f64::consts::PI, 0.0, 0.0));
    assert_abs_diff_eq!(
        *half_x.matrix(),
        Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)),
        epsilon = 1e-15
    );
    let quarter_z = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
    assert_abs_diff_eq!(
        *quarter_z.matrix(),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        epsilon = 1e-15
    );
}

#[test]
fn log_rejects_half_turn() {
    let half_x = exp_so3(&Vec3::new(std::f64::consts::PI, 0.0, 0.0));
    assert!(matches!(log_so3(&half_x), Err(geofuse::Error::Domain { .. })));
}

#[test]
fn wedge_vee_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(wedge(&Vec3::zeros()), Matrix3::zeros());
    assert_eq!(
        wedge(&Vec3::new(1.0, 2.0, 3.0)),
        Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0)
    );
    for _ in 0..100 {
        let v = gaussian_vec(&mut rng);
        assert_eq!(vee(&wedge(&v)).unwrap(), v);
    }
}

/// `exp(−u∧) · d/dt exp((u + t w)∧)|₀ = (J_u w)∧`, central differences.
#[test]
fn jacobian_directional_derivative() {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let u = gaussian_vec(&mut rng).normalize() * rng.random_range(0.01..3.0);
        let w = gaussian_vec(&mut rng);
        let deriv = (series_exp(&(u + w * H)) - series_exp(&(u - w * H))) / (2.0 * H);
        let lhs = exp_so3(&u).matrix().transpose() * deriv;
        assert_abs_diff_eq!(lhs, wedge(&(left_jacobian(&u) * w)), epsilon = 1e-5);
    }
}

#[test]
fn jacobian_inverse_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(left_jacobian(&Vec3::zeros()), Matrix3::identity());
    for _ in 0..100 {
        let u = gaussian_vec(&mut rng).normalize() * rng.random_range(1e-6..3.0);
        let prod = left_jacobian(&u) * left_jacobian_inv(&u).unwrap();
        assert_abs_diff_eq!(prod, Matrix3::identity(), epsilon = 1e-8);
        assert_abs_diff_eq!(left_jacobian(&u) * u, u, epsilon = 1e-14);
    }
}

#[test]
fn inverse_jacobian_domain() {
    assert!(left_jacobian_inv(&Vec3::new(0.0, 0.0, std::f64::consts::PI)).is_ok());
    assert!(left_jacobian_inv(&Vec3::new(0.0, 0.0, 2.0 * std::f64::consts::PI)).is_err());
}

#[test]
fn adjoint_definitional_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    assert_eq!(adjoint_matrix(&Rotation::identity()), Matrix3::identity());
    for _ in 0..100 {
        let r = random_rotation(&mut rng);
        let u = gaussian_vec(&mut rng);
        let conj = vee(&(r.matrix() * wedge(&u) * r.matrix().transpose())).unwrap();
        assert_abs_diff_eq!(adjoint_matrix(&r) * u, conj, epsilon = 1e-10);
        assert_eq!(adjoint_matrix(&r), *r.matrix());
    }
}

#[test]
fn ad_commutator_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert_eq!(ad_matrix(&Vec3::zeros()), Matrix3::zeros());
    for _ in 0..100 {
        let u = gaussian_vec(&mut rng);
        let v = gaussian_vec(&mut rng);
        let bracket = wedge(&u) * wedge(&v) - wedge(&v) * wedge(&u);
        assert_abs_diff_eq!(ad_matrix(&u) * v, vee(&bracket).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(ad_matrix(&u) * u, Vec3::zeros(), epsilon = 1e-15);
    }
}

#[test]
fn orthogonality_over_long_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut r = random_rotation(&mut rng);
    for _ in 0..10_000 {
        r = boxplus(&r, &(gaussian_vec(&mut rng) * 0.5));
        let drift = (r.matrix().transpose() * r.matrix() - Matrix3::identity()).norm();
        assert!(drift <= 1e-9, "drift {drift}");
    }
}

#[test]
fn rotation_error_metric() {
    let r = exp_so3(&Vec3::new(0.2, 0.1, -0.3));
    assert_eq!(rotation_error(&r, &r), 0.0);
    let e = rotation_error(&r, &boxplus(&r, &Vec3::new(0.0, 0.7, 0.0)));
    assert_abs_diff_eq!(e, 0.7, epsilon = 1e-12);
}

fn vec_strategy(max_norm: f64) -> impl Strategy<Value = Vec3> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0..max_norm,
    )
        .prop_filter("nonzero direction", |(d, _)| d.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|(d, n)| Vec3::from(d).normalize() * n)
}

proptest! {
    #[test]
    fn log_inverts_exp(v in vec_strategy(std::f64::consts::PI - 1e-3)) {
        let back = log_so3(&exp_so3(&v)).unwrap();
        prop_assert!((back - v).amax() <= 1e-9, "{back:?} vs {v:?}");
    }

    #[test]
    fn exp_is_a_rotation(v in vec_strategy(10.0)) {
        let r = exp_so3(&v);
        prop_assert!(r.orthogonality_error() <= 1e-12);
        prop_assert!((r.matrix().determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn adjoint_commutes_with_exp(a in vec_strategy(3.0), u in vec_strategy(3.0)) {
        let r = exp_so3(&a);
        let lhs = exp_so3(&(adjoint_matrix(&r) * u));
        let rhs = r * exp_so3(&u) * r.inverse();
        prop_assert!((lhs.matrix() - rhs.matrix()).amax() <= 1e-8);
    }

    #[test]
    fn jacobian_of_negated_is_transpose(u in vec_strategy(3.0)) {
        let diff = left_jacobian(&-u) - left_jacobian(&u).transpose();
        prop_assert!(diff.amax() <= 1e-10);
    }

    #[test]
    fn boxplus_identities(a in vec_strategy(3.0), u in vec_strategy(3.0)) {
        let r = exp_so3(&a);
        prop_assert_eq!(boxplus(&r, &Vec3::zeros()), r);
        prop_assert!((boxplus(&Rotation::identity(), &u).matrix() - exp_so3(&u).matrix()).amax() <= 1e-15);
    }

    #[test]
    fn error_metric_is_bounded_and_symmetric(a in vec_strategy(3.1), b in vec_strategy(3.1)) {
        let (ra, rb) = (exp_so3(&a), exp_so3(&b));
        let e = rotation_error(&ra, &rb);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&e));
        prop_assert!((e - rotation_error(&rb, &ra)).abs() <= 1e-12);
    }
}
