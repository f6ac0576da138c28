//! Fast numerical self-checks run by `geofuse selftest`.
//!
//! Each group reports the worst deviation it measured next to its tolerance.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fusion::cce_fuse;
use crate::gaussian::{ConcentratedGaussian, SpdMatrix3};
use crate::so3::{
    boxplus, exp_so3, jacobian_coeffs_closed, jacobian_coeffs_series, left_jacobian_inv, log_so3, vee,
    wedge, Matrix3, Rotation, Vec3, JACOBIAN_SMALL_ANGLE,
};

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Multiplies the `u∧` coefficient of the Jacobian under test. Anything
    /// other than 1 is a negative control that must fail the
    /// finite-difference group.
    pub jacobian_perturbation: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            seed: 0x5e1f,
            jacobian_perturbation: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub groups: Vec<GroupResult>,
    pub elapsed: Duration,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.groups.iter().all(GroupResult::passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            writeln!(
                f,
                "{} {:<22} worst {:.3e}  tol {:.1e}  ({} cases)",
                if g.passed() { "PASS" } else { "FAIL" },
                g.name,
                g.measured,
                g.tolerance,
                g.cases
            )?;
        }
        write!(f, "{:.2} s", self.elapsed.as_secs_f64())
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let groups = vec![
        jacobian_finite_difference(&mut rng, opts.jacobian_perturbation),
        jacobian_inverse(&mut rng),
        exp_log_round_trip(&mut rng),
        adjoint_oracle(&mut rng),
        orthogonality_drift(&mut rng),
        cce_containment(&mut rng),
        covariance_transport(&mut rng),
    ];
    SelftestReport {
        groups,
        elapsed: start.elapsed(),
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

fn vec_with_norm_below<R: Rng>(rng: &mut R, max: f64) -> Vec3 {
    let v = gaussian_vec(rng);
    v / v.norm() * rng.random_range(0.0..max)
}

fn random_rotation<R: Rng>(rng: &mut R) -> Rotation {
    Rotation::project(&Matrix3::from_fn(|_, _| rng.sample(StandardNormal)))
}

fn random_spd<R: Rng>(rng: &mut R, scale: f64) -> SpdMatrix3 {
    let a = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    SpdMatrix3::symmetrize(&((a * a.transpose() + Matrix3::identity() * 0.2) * scale))
}

fn jacobian_under_test(u: &Vec3, perturbation: f64) -> Matrix3 {
    let theta = u.norm();
    let (a, b) = if theta < JACOBIAN_SMALL_ANGLE {
        jacobian_coeffs_series(theta)
    } else {
        jacobian_coeffs_closed(theta)
    };
    let k = wedge(u);
    Matrix3::identity() - k * (a * perturbation) + k * k * b
}

/// Column `i` of `J_u` against `(log(e^{-u} e^{u+h eᵢ}) − log(e^{-u} e^{u−h eᵢ})) / 2h`.
fn jacobian_finite_difference<R: Rng>(rng: &mut R, perturbation: f64) -> GroupResult {
    const H: f64 = 1e-5;
    let cases = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let u = vec_with_norm_below(rng, 3.0);
        let base_inv = exp_so3(&u).inverse();
        let j = jacobian_under_test(&u, perturbation);
        for i in 0..3 {
            let step = Vec3::ith(i, H);
            let plus = log_so3(&(base_inv * exp_so3(&(u + step)))).unwrap();
            let minus = log_so3(&(base_inv * exp_so3(&(u - step)))).unwrap();
            let fd = (plus - minus) / (2.0 * H);
            worst = worst.max((fd - j.column(i)).amax());
        }
    }
    GroupResult {
        name: "jacobian_fd",
        measured: worst,
        tolerance: 1e-5,
        cases,
    }
}

fn jacobian_inverse<R: Rng>(rng: &mut R) -> GroupResult {
    let cases = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let u = vec_with_norm_below(rng, 3.1);
        let prod = left_jacobian_inv(&u).unwrap() * jacobian_under_test(&u, 1.0);
        worst = worst.max((prod - Matrix3::identity()).amax());
    }
    GroupResult {
        name: "jacobian_inverse",
        measured: worst,
        tolerance: 1e-9,
        cases,
    }
}

fn exp_log_round_trip<R: Rng>(rng: &mut R) -> GroupResult {
    let cases = 1000;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let u = vec_with_norm_below(rng, std::f64::consts::PI - 1e-3);
        worst = worst.max((log_so3(&exp_so3(&u)).unwrap() - u).amax());
        let r = random_rotation(rng);
        if let Ok(v) = log_so3(&r) {
            worst = worst.max((exp_so3(&v).matrix() - r.matrix()).amax());
        }
    }
    GroupResult {
        name: "exp_log_round_trip",
        measured: worst,
        tolerance: 1e-9,
        cases,
    }
}

/// `R u∧ Rᵀ = (Ad R · u)∧` and `R exp(u) Rᵀ = exp(Ad R · u)`.
fn adjoint_oracle<R: Rng>(rng: &mut R) -> GroupResult {
    let cases = 500;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let r = random_rotation(rng);
        let u = vec_with_norm_below(rng, 3.0);
        let ad = crate::so3::adjoint_matrix(&r);
        let conj = vee(&(r.matrix() * wedge(&u) * r.matrix().transpose())).unwrap();
        worst = worst.max((conj - ad * u).amax());
        let lhs = r * exp_so3(&u) * r.inverse();
        worst = worst.max((lhs.matrix() - exp_so3(&(ad * u)).matrix()).amax());
    }
    GroupResult {
        name: "adjoint",
        measured: worst,
        tolerance: 1e-10,
        cases,
    }
}

fn orthogonality_drift<R: Rng>(rng: &mut R) -> GroupResult {
    let steps = 10_000;
    let mut r = random_rotation(rng);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        r = boxplus(&r, &(gaussian_vec(rng) * 0.3));
        worst = worst.max(r.orthogonality_error());
    }
    GroupResult {
        name: "orthogonality_drift",
        measured: worst,
        tolerance: 1e-9,
        cases: steps,
    }
}

/// Rejection-samples the intersection of the two prior ellipsoids and
/// measures how far outside the fused ellipsoid any point lands.
fn cce_containment<R: Rng>(rng: &mut R) -> GroupResult {
    let fixtures = 20;
    let samples = 20_000;
    // negative: every accepted point sits strictly inside
    let mut worst = f64::NEG_INFINITY;
    let mut done = 0;
    while done < fixtures {
        let p = random_spd(rng, 0.3);
        let q = random_spd(rng, 0.3);
        let mu = gaussian_vec(rng) * 0.3;
        let alpha = rng.random_range(0.05..0.95);
        let Ok(fused) = cce_fuse(&p, &mu, &q, alpha) else {
            continue;
        };
        done += 1;
        let p_info = p.inverse().unwrap();
        let q_info = q.inverse().unwrap();
        let f_info = fused.cov.inverse().unwrap();
        let l = Cholesky::new(*p.matrix()).unwrap().l();
        for _ in 0..samples {
            // uniform in the unit ball, mapped into the ego ellipsoid
            let dir = gaussian_vec(rng).normalize();
            let u = l * (dir * rng.random::<f64>().cbrt());
            debug_assert!(u.dot(&(p_info * u)) <= 1.0 + 1e-9);
            let e = u - mu;
            if e.dot(&(q_info * e)) > 1.0 {
                continue;
            }
            let c = u - fused.mean_correction;
            worst = worst.max(c.dot(&(f_info * c)) - 1.0);
        }
    }
    GroupResult {
        name: "cce_containment",
        measured: worst,
        tolerance: 1e-9,
        cases: fixtures,
    }
}

/// Sampling oracle for `absorb_mean`: the empirical covariance of samples
/// expressed around the new reference against `J Σ Jᵀ`, as a relative
/// Frobenius error.
fn covariance_transport<R: Rng>(rng: &mut R) -> GroupResult {
    let fixtures = 10;
    let samples = 20_000;
    let mut worst: f64 = 0.0;
    for _ in 0..fixtures {
        let cov = random_spd(rng, 1.0);
        let cov = cov.scale(0.05 / cov.matrix().norm());
        let g = ConcentratedGaussian::new(random_rotation(rng), vec_with_norm_below(rng, 0.5), cov).unwrap();
        let moved = g.absorb_mean().unwrap();
        let back = moved.ref_point.inverse();
        let xs: Vec<Vec3> = (0..samples)
            .map(|_| log_so3(&(back * g.sample(rng))).unwrap())
            .collect();
        let mean = xs.iter().sum::<Vec3>() / samples as f64;
        let emp = xs
            .iter()
            .map(|x| (x - mean) * (x - mean).transpose())
            .sum::<Matrix3>()
            / (samples - 1) as f64;
        let rel = (emp - moved.cov.matrix()).norm() / moved.cov.matrix().norm();
        worst = worst.max(rel);
    }
    GroupResult {
        name: "covariance_transport",
        measured: worst,
        tolerance: 0.10,
        cases: fixtures,
    }
}
