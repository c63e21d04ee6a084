//! Property tests of the kinematic, kernel and configuration invariants.

use proptest::prelude::*;
use relboltz::config::RunConfig;
use relboltz::geometry::{
    com_direction, gbar, gtilde, lorentz_inner, moller_velocity, moller_velocity_determinant, post_collision,
    post_collision_energy, relative_momentum, scattering_angle, Boost, FourMomentum, Vec3,
};
use relboltz::kernel::{chi_k, dyadic_index, shell_solid_integral, CollisionKernel, KernelSpec, PowerLawKernel, RegularKernel};
use std::f64::consts::PI;

fn momentum() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-20.0f64..20.0)
}

fn direction() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0f64..2.0 * PI).prop_map(|(c, phi)| {
        let s = (1.0 - c * c).sqrt();
        [s * phi.cos(), s * phi.sin(), c]
    })
}

fn lift(p: Vec3) -> FourMomentum {
    FourMomentum::lift(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn collisions_conserve_four_momentum(p in momentum(), q in momentum(), w in direction()) {
        let (p, q) = (lift(p), lift(q));
        let (pp, qp) = post_collision(&p, &q, &w).unwrap();
        let scale = 1.0 + p.p0 + q.p0;
        prop_assert!((p.p0 + q.p0 - pp.p0 - qp.p0).abs() <= 1e-12 * scale);
        for i in 0..3 {
            prop_assert!((p.p[i] + q.p[i] - pp.p[i] - qp.p[i]).abs() <= 1e-12 * scale);
        }
        prop_assert!((pp.p0 - post_collision_energy(&p, &q, &w).unwrap()).abs() <= 1e-11 * scale);
        // The relative momentum is unchanged by the collision.
        let (g, g_post) = (relative_momentum(&p, &q).unwrap(), relative_momentum(&pp, &qp).unwrap());
        prop_assert!((g - g_post).abs() <= 1e-9 * scale);
    }

    #[test]
    fn angle_identities(p in momentum(), q in momentum(), w in direction()) {
        let (p, q) = (lift(p), lift(q));
        let g = relative_momentum(&p, &q).unwrap();
        prop_assume!(g > 1e-3);
        let (pp, qp) = post_collision(&p, &q, &w).unwrap();
        let k = com_direction(&p, &q).unwrap();
        let cos = scattering_angle(&p, &q, &pp, &qp).unwrap();
        let kw = k[0] * w[0] + k[1] * w[1] + k[2] * w[2];
        let scale = (1.0 + p.p0 + q.p0) / g;
        prop_assert!((cos - kw).abs() <= 1e-10 * scale * scale, "cos θ {cos} vs k·ω {kw}");
        let (gb, gt) = (gbar(&p, &pp).unwrap(), gtilde(&pp, &q).unwrap());
        prop_assert!((gb * gb + gt * gt - g * g).abs() <= 1e-10 * (1.0 + p.p0 + q.p0).powi(2));
    }

    #[test]
    fn relative_momentum_is_symmetric_and_boost_invariant(p in momentum(), q in momentum(), v in direction(), speed in 0.0f64..0.9) {
        let (p, q) = (lift(p), lift(q));
        let g = relative_momentum(&p, &q).unwrap();
        prop_assert!((g - relative_momentum(&q, &p).unwrap()).abs() <= 1e-12 * (1.0 + g));
        let boost = Boost::with_velocity([speed * v[0], speed * v[1], speed * v[2]]).unwrap();
        let (bp, bq) = (boost.apply_momentum(&p), boost.apply_momentum(&q));
        let scale = (1.0 + p.p0 + q.p0) * boost.gamma();
        prop_assert!((lorentz_inner(&bp, &bq) - lorentz_inner(&p, &q)).abs() <= 1e-11 * scale * scale);
    }

    #[test]
    fn moller_velocity_is_twice_the_flux_factor(p in momentum(), q in momentum()) {
        let (p, q) = (lift(p), lift(q));
        let v = moller_velocity(&p, &q);
        prop_assert!((0.0..=4.0).contains(&v));
        prop_assert!((v - 2.0 * moller_velocity_determinant(&p, &q)).abs() <= 1e-6 * (1.0 + v));
    }

    #[test]
    fn dyadic_shells_partition_the_half_line(x in -40.0f64..10.0) {
        let gbar = 2f64.powf(x);
        let k = dyadic_index(gbar).unwrap();
        prop_assert!(2f64.powi(-k - 1) <= gbar && gbar < 2f64.powi(-k));
        let total: f64 = (k - 3..=k + 3).map(|j| chi_k(j, gbar).unwrap()).sum();
        prop_assert_eq!(total, 1.0);
    }

    #[test]
    fn shell_masses_sum_to_the_total(g in 0.05f64..12.0) {
        let kernel = RegularKernel;
        let total = 2.0 * PI * kernel.phi(g, g * g + 4.0) * kernel.angular_mass(0.0, PI);
        let shells: f64 = (-5..80).map(|k| shell_solid_integral(&kernel, g, k)).sum();
        prop_assert!((shells / total - 1.0).abs() <= 1e-12, "{shells} vs {total}");
    }

    #[test]
    fn power_law_shells_grow_like_two_to_the_gamma(g in 0.5f64..8.0, k in 4i32..20) {
        // Small-angle shells of the non-cutoff kernel scale exactly as 2^{γk}.
        let kernel = PowerLawKernel::new(KernelSpec::default()).unwrap();
        let ratio = shell_solid_integral(&kernel, g, k + 1) / shell_solid_integral(&kernel, g, k);
        prop_assert!((ratio.log2() - 0.5).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), gamma in 0.05f64..1.95, dt in 1e-4f64..0.1, amplitude in 0.0f64..1e-3) {
        let mut c = RunConfig::default().with_seed(seed);
        c.kernel.gamma = gamma;
        c.kernel.b = gamma + 0.5;
        c.solver.dt = dt;
        c.initial.amplitude = amplitude;
        c.validate().unwrap();
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        prop_assert_eq!(back.initial_data().seed, seed);
    }
}
