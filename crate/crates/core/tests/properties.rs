use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdp_core::admm::{step_fixed_point, step_three};
use sdp_core::diagnostics::DEFAULT_TAU;
use sdp_core::sdpa::{parse_sdpa, write_sdpa};
use sdp_core::*;

fn gaussian(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let g = gaussian(n, n, rng);
    SymMat::new((&g + g.transpose()) * 0.5).unwrap()
}

fn random_problem(n: usize, m: usize, rng: &mut ChaCha8Rng) -> SdpProblem {
    let a = (0..m).map(|_| random_sym(n, rng)).collect();
    let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    SdpProblem::new(random_sym(n, rng), a, b).unwrap()
}

fn close(a: &SymMat, b: &SymMat, tol: f64) -> bool {
    (a - b).norm_fro() <= tol * a.norm_fro().max(b.norm_fro()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svec_is_an_isometry(n in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sym(n, &mut rng);
        let b = random_sym(n, &mut rng);
        let va = svec(&a);
        prop_assert!(close(&smat(&va, n).unwrap(), &a, 1e-15));
        prop_assert!((va.dot(&svec(&b)) - a.inner(&b)).abs() <= 1e-12 * (1.0 + a.norm_fro() * b.norm_fro()));
    }

    #[test]
    fn psd_projection_is_moreau(n in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sym(n, &mut rng);
        let d = eig_sym(&a).unwrap();
        let plus = d.psd_part();
        let minus = d.nsd_part();
        prop_assert!(close(&(&plus - &minus), &a, 1e-12));
        prop_assert!(plus.inner(&minus).abs() <= 1e-12 * a.norm_fro().powi(2).max(1.0));
        prop_assert!(close(&psd_project(&plus).unwrap(), &plus, 1e-12));
        let lmin = eig_sym(&plus).unwrap().lambda[n - 1];
        prop_assert!(lmin >= -1e-12 * a.norm_fro().max(1.0));
        prop_assert!(close(&d.reconstruct(), &a, 1e-12));
    }

    #[test]
    fn sylvester_residual_vanishes(r in 1usize..6, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = |m: SymMat, s: f64| {
            let e = eig_sym(&m).unwrap();
            let lam: Vec<f64> = e.lambda.iter().map(|l| s * (0.2 + l.abs())).collect();
            SymMat::from_diagonal(&lam).congruence(&e.q)
        };
        let zx = shift(random_sym(r, &mut rng), 1.0);
        let zs = shift(random_sym(k, &mut rng), -1.0);
        let zo = gaussian(k, r, &mut rng);
        let w = sylvester_solve(&zx, &zs, &zo).unwrap();
        let res = &w * zx.as_matrix() - zs.as_matrix() * &w - &zo;
        prop_assert!(res.norm() <= 1e-10 * zo.norm().max(1.0));
    }

    #[test]
    fn skew_exponential_is_orthogonal(n in 1usize..9, scale in 0.0f64..5.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(n, n, &mut rng);
        let w = (&g - g.transpose()) * scale;
        let e = skew_exp(&w).unwrap();
        let dev = (e.transpose() * &e - DMatrix::identity(n, n)).norm();
        prop_assert!(dev <= 1e-12 * (1.0 + w.norm()));
    }

    #[test]
    fn kernel_projectors_split_the_space(n in 2usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=n * (n + 1) / 2 - 1);
        let p = random_problem(n, m, &mut rng);
        let k = ConstraintKernel::new(&p).unwrap();
        let h = random_sym(n, &mut rng);
        let ph = k.project_range(&h);
        let nh = k.project_null(&h);
        prop_assert!(close(&(&ph + &nh), &h, 1e-12));
        prop_assert!(close(&k.project_range(&ph), &ph, 1e-10));
        prop_assert!(p.apply_a(&nh).unwrap().norm() <= 1e-10 * h.norm_fro().max(1.0));
        prop_assert!(ph.inner(&nh).abs() <= 1e-10 * h.norm_fro().powi(2).max(1.0));
    }

    #[test]
    fn admm_step_is_firmly_nonexpansive(n in 2usize..7, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=n);
        let p = random_problem(n, m, &mut rng);
        let k = ConstraintKernel::new(&p).unwrap();
        let z1 = random_sym(n, &mut rng);
        let z2 = random_sym(n, &mut rng);
        let t1 = step_fixed_point(&p, &k, sigma, &z1).unwrap();
        let t2 = step_fixed_point(&p, &k, sigma, &z2).unwrap();
        let dt = &t1 - &t2;
        let dz = &z1 - &z2;
        let slack = 1e-10 * (1.0 + dz.norm_fro().powi(2) + sigma * sigma * p.c().norm_fro().powi(2));
        prop_assert!(dt.norm_fro().powi(2) <= dt.inner(&dz) + slack);
    }

    #[test]
    fn one_step_matches_three_step(n in 2usize..7, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=n);
        let p = random_problem(n, m, &mut rng);
        let k = ConstraintKernel::new(&p).unwrap();
        let z = random_sym(n, &mut rng);
        let d = eig_sym(&z).unwrap();
        let x = d.psd_part();
        let s = d.nsd_part().scale(1.0 / sigma);
        let (_, s_new, x_new) = step_three(&p, &k, sigma, &x, &s).unwrap();
        let z_new = step_fixed_point(&p, &k, sigma, &z).unwrap();
        prop_assert!(close(&(&x_new - &s_new.scale(sigma)), &z_new, 1e-9));
    }

    #[test]
    fn z_difference_identity_holds(n in 2usize..7, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=n);
        let p = random_problem(n, m, &mut rng);
        let k = ConstraintKernel::new(&p).unwrap();
        let z = random_sym(n, &mut rng);
        let zd = z_difference_identity(&p, &k, sigma, &z).unwrap();
        prop_assert!(zd.gap <= 1e-10, "{:?}", zd);
    }

    #[test]
    fn energy_identities_and_contraction(seed in 0u64..1000, n in 4usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..n);
        let m = rng.random_range(1..=2 * n);
        let (p, cert) = generate_planted(&PlantedSpec::new(n, m, r, seed)).unwrap();
        let k = ConstraintKernel::new(&p).unwrap();
        let d = eig_sym(&cert.zstar(1.0)).unwrap();
        let os = build_omega(&d).unwrap();
        let h = random_sym(n, &mut rng);
        let hh = h.norm_fro().powi(2);
        let (l, rr) = energy_m(&os, &k, &h);
        prop_assert!((l - rr).abs() <= 1e-10 * hh);
        prop_assert!(apply_m(&os, &k, &h).norm_fro() <= h.norm_fro() * (1.0 + 1e-12));
        let ds = build_directional(&d).unwrap();
        let (l, rr) = energy_m_tilde(&ds, &k, &h).unwrap();
        prop_assert!((l - rr).abs() <= 1e-10 * hh);
    }

    #[test]
    fn elimination_matches_eigen_projection(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..n);
        let q = gaussian(n, n, &mut rng).qr().q();
        let lam: Vec<f64> = (0..n)
            .map(|i| {
                let v = 0.5 + rng.random::<f64>();
                if i < r { v } else { -v }
            })
            .collect();
        let z = SymMat::from_diagonal(&lam).congruence(&q);
        let g = random_sym(n, &mut rng);
        let h = g.scale(0.1 / g.norm2());
        let res = run_elimination(&z, &h).unwrap();
        let zh = &z + &h;
        prop_assert!(close(&res.projection, &psd_project(&zh).unwrap(), 1e-9));
        prop_assert!(res.off_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn face_projections_are_complementary(n in 2usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = eig_sym(&random_sym(n, &mut rng)).unwrap();
        let split = FaceSplit::new(&d, DEFAULT_TAU);
        let x = random_sym(n, &mut rng);
        prop_assert!(close(&(&split.project_ts(&x) + &split.project_ns(&x)), &x, 1e-12));
        prop_assert!(close(&(&split.project_tx(&x) + &split.project_nx(&x)), &x, 1e-12));
        let ts = split.project_ts(&x);
        prop_assert!(close(&split.project_ts(&ts), &ts, 1e-12));
    }

    #[test]
    fn geometric_rates_are_recovered(rho in 0.5f64..0.999, c in 1e-3f64..1e3, len in 10usize..80) {
        let v: Vec<f64> = (0..len).map(|k| c * rho.powi(k as i32)).collect();
        let f = rate_fit(&v, len).unwrap();
        prop_assert!((f.rho_hat - rho).abs() <= 1e-9);
        prop_assert!(f.r2 >= 1.0 - 1e-9 || rho > 0.998);
    }

    #[test]
    fn sdpa_round_trip(n in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(0..=n * (n + 1) / 2 - 1);
        let p = random_problem(n, m, &mut rng);
        let q = parse_sdpa(&write_sdpa(&p)).unwrap();
        prop_assert_eq!(q.c(), p.c());
        prop_assert_eq!(q.b(), p.b());
        prop_assert_eq!(q.a(), p.a());
    }
}
