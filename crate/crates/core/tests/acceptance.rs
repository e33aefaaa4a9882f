//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (run with `--nocapture` to see them).

use std::time::Instant;

use buckling_eigen::counting::{self, count_half_interval, count_interval, validate, Verdict};
use buckling_eigen::dense::PinvOracle;
use buckling_eigen::lanczos::{self, LanczosOptions, LanczosResult, Target};
use buckling_eigen::problems::{demo_norm_growth, gen_example1, gen_singular, DemoInner};
use buckling_eigen::transform::{
    build_method1, build_method2, default_scaling, DensePencil, MatvecMethod, OperatorConfig,
    RegularizedInnerProduct,
};
use buckling_eigen::{canonical, dense};
use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(values.to_vec()))
}

fn tiny_pencil() -> DensePencil {
    DensePencil::new(
        diag(&[1.0, 0.0, 0.0]),
        diag(&[2.0, -1.0, 0.0]),
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
        DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
    )
    .unwrap()
}

/// Criterion 1: exact recovery on the 3x3 singular pencil with
/// K = diag(1,0,0), K_G = diag(2,-1,0), sigma = 1.
#[test]
fn criterion1_tiny_pencil_exactness() {
    let started = Instant::now();
    let pencil = tiny_pencil();
    let cfg = OperatorConfig::default();
    let (hn, hc) = default_scaling(&pencil).unwrap();
    let m = RegularizedInnerProduct::new(&pencil, hn, hc).unwrap();
    let x0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);

    let mut etas = Vec::new();
    for method in [MatvecMethod::Augmented, MatvecMethod::Reduced] {
        let op = buckling_eigen::transform::build_operator(&pencil, 1.0, method, &cfg).unwrap();
        let result = lanczos::run(
            &pencil,
            &op,
            &m,
            &x0,
            Target::NearestPairs(1),
            &LanczosOptions::default(),
        )
        .unwrap();
        let pair = result.converged_pairs().next().expect("one converged pair");
        assert!(
            (pair.lambda - 0.5).abs() <= 1e-14,
            "lambda = {}",
            pair.lambda
        );
        assert!(pair.eta <= 1e-14, "eta = {:e}", pair.eta);
        assert!(pair.cos_angle <= 1e-14, "cos angle = {:e}", pair.cos_angle);
        etas.push(pair.eta);

        let report = count_half_interval(&pencil, 1.0, method, &cfg).unwrap();
        assert_eq!(report.count, 1, "count(0,1) via {method}");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 0.1,
        "runtime {:?} exceeds 0.1 s",
        elapsed
    );
    println!(
        "acceptance criterion 1 (tiny pencil): PASS — lambda = 0.5, eta = {:.2e}/{:.2e}, \
         count(0,1) = 1 by both methods, {:.1} ms",
        etas[0],
        etas[1],
        elapsed.as_secs_f64() * 1e3
    );
}

/// Criterion 2: the norm-growth comparison on the n = 500 regular pencil
/// (sigma = -0.6, 40 steps): bounded norms and machine-precision residuals
/// with the M inner product, unbounded growth with the K semi-inner product,
/// restart included.
#[test]
fn criterion2_example1_norm_growth() {
    let started = Instant::now();
    let (n, m_null, sigma, steps, seed) = (500usize, 1usize, -0.6f64, 40usize, 1u64);

    // M-inner run, invariants checked at every step (criterion 6 shares it)
    let gp = gen_example1(n, m_null, seed).unwrap();
    assert_eq!(gp.truth.len(), 499);
    let nearest = gp
        .truth
        .iter()
        .map(|(l, _)| *l)
        .min_by(|x, y| (x - sigma).abs().partial_cmp(&(y - sigma).abs()).unwrap())
        .unwrap();
    assert_eq!(nearest, -1.0, "eigenvalue nearest sigma = -0.6");
    let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
    let cfg = OperatorConfig::default();
    let op = build_method1(&pencil, sigma, &cfg).unwrap();
    let m_ip = RegularizedInnerProduct::new(
        &pencil,
        DMatrix::identity(m_null, m_null),
        DMatrix::zeros(0, 0),
    )
    .unwrap();
    let x0 = DVector::from_element(n, 1.0);
    let result = lanczos::run(
        &pencil,
        &op,
        &m_ip,
        &x0,
        Target::NearestPairs(usize::MAX),
        &LanczosOptions {
            maxit: steps,
            check_invariants: true,
            ..Default::default()
        },
    )
    .unwrap();
    let m_max = result.trace.iter().map(|r| r.vnorm).fold(0.0f64, f64::max);
    assert!(m_max <= 1e2, "M-inner max vnorm {m_max:e}");

    // converged pairs near the shift sit at machine-precision residuals
    let mut near = 0;
    for pair in result.converged_pairs() {
        if (pair.lambda - sigma).abs() < 3.5 {
            near += 1;
            assert!(
                pair.eta <= 1e-12,
                "near-shift pair lambda {} has eta {:e}",
                pair.lambda,
                pair.eta
            );
        }
    }
    assert!(
        near >= 3,
        "expected the near-shift pairs to converge, got {near}"
    );

    // internal invariants (criterion 6 contract on this run)
    let t_norm = result.state.t_norm();
    assert!(result.max_orth_residual.unwrap() <= 1e-10);
    assert!(result.max_gov_residual.unwrap() <= 1e-9 * (1.0 + t_norm));

    // K semi-inner product: norms explode
    let k_run = demo_norm_growth(n, m_null, sigma, steps, DemoInner::K, None, seed).unwrap();
    assert!(
        k_run.max_vnorm >= 1e4 * m_max,
        "K-inner max {:e} vs M-inner max {:e}",
        k_run.max_vnorm,
        m_max
    );

    // one implicit restart does not cure the growth
    let restarted =
        demo_norm_growth(n, m_null, sigma, steps, DemoInner::K, Some(16), seed).unwrap();
    assert!(
        restarted.max_vnorm >= 1e4 * m_max,
        "restarted K-inner max {:e} vs M-inner max {:e}",
        restarted.max_vnorm,
        m_max
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "runtime {:?}", elapsed);
    println!(
        "acceptance criterion 2 (norm growth, n=500): PASS — M-inner max ||v|| = {:.2e}, \
         K-inner max = {:.2e}, restarted = {:.2e}, {} near-shift pairs at eta <= 1e-12, {:.1} s",
        m_max,
        k_run.max_vnorm,
        restarted.max_vnorm,
        near,
        elapsed.as_secs_f64()
    );
}

/// Deterministic parameters of the 20 singular test pencils shared by
/// criteria 3, 4 and 6.
fn pencil_params(i: usize) -> (usize, usize, usize, Vec<f64>, Vec<f64>, u64, f64) {
    let n1 = 12 + 8 * i; // up to 164
    let n2 = i % 3;
    let n3 = 1 + i % 3;
    let lambda1: Vec<f64> = (0..n1)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (0.15 + 0.08 * j as f64)
        })
        .collect();
    let lambda2: Vec<f64> = (0..n2)
        .map(|j| if j % 2 == 0 { 1.3 } else { -2.1 })
        .collect();
    let sigma = 0.9 + 0.013 * i as f64;
    (n1, n2, n3, lambda1, lambda2, 1000 + i as u64, sigma)
}

/// Criterion 3: on 20 generated singular pencils, converged eigenvalues
/// match the planted spectrum, the two matvec methods agree with each other
/// and with the dense pseudo-inverse oracle.
#[test]
fn criterion3_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_eig = 0.0f64;
    let mut worst_m1m2 = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for i in 0..20 {
        let (n1, n2, n3, lambda1, lambda2, seed, sigma) = pencil_params(i);
        let gp = gen_singular(n1, n2, n3, &lambda1, &lambda2, seed).unwrap();
        assert!(buckling_eigen::matio::validate_bundle(&gp.bundle, 1e-10).pass);
        let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
        assert!(pencil.dim() <= 200);
        let cfg = OperatorConfig::default();
        let op1 = build_method1(&pencil, sigma, &cfg).unwrap();
        let op2 = build_method2(&pencil, sigma, &cfg).unwrap();
        let oracle = PinvOracle::new(&pencil.k, &pencil.kg, sigma).unwrap();

        for _ in 0..100 {
            let v = DVector::from_fn(pencil.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let u1 = op1.apply(&v);
            let u2 = op2.apply(&v);
            let uo = oracle.apply(&v);
            let scale = u1.norm().max(1e-300);
            let d12 = (&u1 - &u2).norm() / scale;
            let d1o = (&u1 - &uo).norm() / scale;
            let d2o = (&u2 - &uo).norm() / scale;
            assert!(d12 <= 1e-10, "pencil {i}: methods differ by {d12:e}");
            assert!(
                d1o <= 1e-9 && d2o <= 1e-9,
                "pencil {i}: oracle gap {d1o:e} / {d2o:e}"
            );
            worst_m1m2 = worst_m1m2.max(d12);
            worst_oracle = worst_oracle.max(d1o.max(d2o));
        }

        // Lanczos eigenvalues against the planted spectrum
        let (hn, hc) = default_scaling(&pencil).unwrap();
        let m_ip = RegularizedInnerProduct::new(&pencil, hn, hc).unwrap();
        let x0 = DVector::from_fn(pencil.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let opts = LanczosOptions {
            maxit: 120,
            check_invariants: true,
            ..Default::default()
        };
        let result =
            lanczos::run(&pencil, &op1, &m_ip, &x0, Target::NearestPairs(6), &opts).unwrap();
        assert!(result.converged_count >= 6, "pencil {i} converged too few");
        for pair in result.converged_pairs() {
            let gap = gp
                .truth
                .iter()
                .map(|(l, _)| (l - pair.lambda).abs() / l.abs().max(1e-300))
                .fold(f64::INFINITY, f64::min);
            assert!(
                gap <= 1e-8,
                "pencil {i}: lambda {} off the planted spectrum by {gap:e}",
                pair.lambda
            );
            worst_eig = worst_eig.max(gap);
        }
        // internal invariants (criterion 6 contract on these runs)
        let t_norm = result.state.t_norm();
        assert!(result.max_orth_residual.unwrap() <= 1e-10, "pencil {i}");
        assert!(
            result.max_gov_residual.unwrap() <= 1e-9 * (1.0 + t_norm),
            "pencil {i}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "runtime {:?}", elapsed);
    println!(
        "acceptance criterion 3 (oracle equivalence, 20 pencils): PASS — worst eigenvalue gap \
         {worst_eig:.2e}, methods agree to {worst_m1m2:.2e}, oracle gap {worst_oracle:.2e}, \
         {:.1} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 4: interval counts equal the brute-force tally of the planted
/// spectrum, and the two inertia routes agree as integers at every shift.
#[test]
fn criterion4_counting_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = OperatorConfig::default();
    let mut intervals_checked = 0usize;
    let mut alphas_checked = 0usize;
    for i in 0..20 {
        let (n1, n2, n3, lambda1, lambda2, seed, _) = pencil_params(i);
        let gp = gen_singular(n1, n2, n3, &lambda1, &lambda2, seed).unwrap();
        let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
        let truth: Vec<f64> = gp.truth.iter().map(|(l, _)| *l).collect();
        let spread = truth.iter().fold(0.0f64, |m, l| m.max(l.abs())) + 1.0;

        let mut tested = 0;
        while tested < 20 {
            let a = (rng.random::<f64>() * 2.0 - 1.0) * spread;
            let b = (rng.random::<f64>() * 2.0 - 1.0) * spread;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            let clear = |x: f64| x.abs() > 1e-6 && truth.iter().all(|l| (l - x).abs() > 1e-6);
            if a >= b || !clear(a) || !clear(b) {
                continue;
            }
            tested += 1;
            intervals_checked += 1;
            let want = truth.iter().filter(|&&l| l > a && l < b).count();
            let mut counts = Vec::new();
            for method in [MatvecMethod::Augmented, MatvecMethod::Reduced] {
                let report = count_interval(&pencil, a, b, method, &cfg).unwrap();
                assert_eq!(
                    report.count, want,
                    "pencil {i}, interval ({a}, {b}), {method}"
                );
                // structural reproduction of the integer arithmetic:
                // count = sum of corrections applied to the nu_minus values
                counts.push(report);
            }
            // Lemma identity at each endpoint: nu_minus(A_alpha) - n3 equals
            // nu_minus(S11_alpha)
            for alpha in [a, b] {
                let via_aug =
                    counting::nu_minus_shifted(&pencil, alpha, MatvecMethod::Augmented, &cfg)
                        .unwrap();
                let via_red =
                    counting::nu_minus_shifted(&pencil, alpha, MatvecMethod::Reduced, &cfg)
                        .unwrap();
                assert_eq!(via_aug, via_red, "pencil {i}, alpha {alpha}");
                alphas_checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    println!(
        "acceptance criterion 4 (counting): PASS — {intervals_checked} intervals match the \
         brute-force tally (both methods), inertia identity holds at {alphas_checked} shifts, \
         {:.1} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 5: canonical reduction on 50 mixed-coupling pencils: block
/// residuals, exact dimension formulas, and the simultaneous-diagonalizable
/// flag against an independent rank-based test.
#[test]
fn criterion5_canonical_fidelity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_residual = 0.0f64;
    for trial in 0..50 {
        let n0 = trial % 3;
        let n1 = 2 + (rng.random::<f64>() * 30.0) as usize;
        let n2 = trial % 4;
        let n3 = trial % 3;
        let n = 2 * n0 + n1 + n2 + n3;
        assert!(n <= 60);

        // planted canonical blocks under a random congruence
        let lambda1 = DVector::from_fn(n1, |_, _| {
            let v = 2.0 * rng.random::<f64>() - 1.0;
            v + 0.4f64.copysign(v)
        });
        let lambda2 = DVector::from_fn(n2, |j, _| if j % 2 == 0 { 1.7 } else { -0.9 });
        let cf0 = canonical::CanonicalForm {
            w: DMatrix::identity(n, n),
            n0,
            n1,
            n2,
            n3,
            lambda1,
            lambda2,
        };
        let x = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
            + DMatrix::identity(n, n) * (2.0 + n as f64 / 6.0);
        let mut a = x.transpose() * cf0.canonical_a() * &x;
        let mut b = x.transpose() * cf0.canonical_b() * &x;
        dense::symmetrize(&mut a);
        dense::symmetrize(&mut b);

        let cf = canonical::reduce(&a, &b, canonical::TAU_RANK).unwrap();
        assert_eq!(
            (cf.n0, cf.n1, cf.n2, cf.n3),
            (n0, n1, n2, n3),
            "trial {trial}"
        );
        let (ra, rb) = cf.block_residuals(&a, &b);
        assert!(ra <= 1e-9 && rb <= 1e-9, "trial {trial}: {ra:e} {rb:e}");
        worst_residual = worst_residual.max(ra.max(rb));

        // dimension formulas, independently from SVD ranks
        let dims = canonical::independent_dimensions(&a, &b, canonical::TAU_RANK).unwrap();
        assert_eq!(dims, (n0, n1, n2, n3), "trial {trial} independent dims");

        // the diagonalizability flag against the rank-based test
        let flag = canonical::is_simultaneously_diagonalizable(&cf);
        assert_eq!(flag, dims.0 == 0, "trial {trial}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {:?}", elapsed);
    println!(
        "acceptance criterion 5 (canonical fidelity, 50 pencils): PASS — worst block residual \
         {worst_residual:.2e}, dimension formulas exact, flags agree, {:.1} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 6: the Lanczos internal invariants on representative runs from
/// criteria 2 and 3 (they are also asserted inline at every checkpoint of
/// those criteria).
#[test]
fn criterion6_lanczos_invariants() {
    let started = Instant::now();
    let mut worst_orth = 0.0f64;
    let mut worst_gov_ratio = 0.0f64;
    let mut check = |pencil: &DensePencil, result: &LanczosResult| {
        let t_norm = result.state.t_norm();
        let orth = result.max_orth_residual.unwrap();
        let gov = result.max_gov_residual.unwrap();
        assert!(orth <= 1e-10, "orthonormality residual {orth:e}");
        assert!(gov <= 1e-9 * (1.0 + t_norm), "governing residual {gov:e}");
        worst_orth = worst_orth.max(orth);
        worst_gov_ratio = worst_gov_ratio.max(gov / (1.0 + t_norm));
        let _ = pencil;
    };

    // the criterion-2 M-inner run
    let gp = gen_example1(500, 1, 1).unwrap();
    let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
    let cfg = OperatorConfig::default();
    let op = build_method1(&pencil, -0.6, &cfg).unwrap();
    let m_ip = RegularizedInnerProduct::new(&pencil, DMatrix::identity(1, 1), DMatrix::zeros(0, 0))
        .unwrap();
    let x0 = DVector::from_element(500, 1.0);
    let result = lanczos::run(
        &pencil,
        &op,
        &m_ip,
        &x0,
        Target::NearestPairs(usize::MAX),
        &LanczosOptions {
            maxit: 40,
            check_invariants: true,
            ..Default::default()
        },
    )
    .unwrap();
    check(&pencil, &result);

    // three of the criterion-3 pencils
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in [0usize, 9, 19] {
        let (n1, n2, n3, lambda1, lambda2, seed, sigma) = pencil_params(i);
        let gp = gen_singular(n1, n2, n3, &lambda1, &lambda2, seed).unwrap();
        let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
        let op = build_method2(&pencil, sigma, &cfg).unwrap();
        let (hn, hc) = default_scaling(&pencil).unwrap();
        let m_ip = RegularizedInnerProduct::new(&pencil, hn, hc).unwrap();
        let x0 = DVector::from_fn(pencil.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let result = lanczos::run(
            &pencil,
            &op,
            &m_ip,
            &x0,
            Target::NearestPairs(6),
            &LanczosOptions {
                maxit: 120,
                check_invariants: true,
                ..Default::default()
            },
        )
        .unwrap();
        check(&pencil, &result);
    }

    println!(
        "acceptance criterion 6 (Lanczos invariants): PASS — worst ||V'MV - I||_F = \
         {worst_orth:.2e} (<= 1e-10), worst governing residual ratio {worst_gov_ratio:.2e} \
         (<= 1e-9), {:.1} s",
        started.elapsed().as_secs_f64()
    );
}

/// The count-validate verdict reaches the MATCH state on a full pipeline run
/// (supporting check reused by the CLI tests).
#[test]
fn count_validation_reaches_match() {
    let (n1, n2, n3, lambda1, lambda2, seed, sigma) = pencil_params(2);
    let gp = gen_singular(n1, n2, n3, &lambda1, &lambda2, seed).unwrap();
    let pencil = DensePencil::from_bundle(&gp.bundle).unwrap();
    let cfg = OperatorConfig::default();
    let report = count_interval(&pencil, 0.5, 4.5, MatvecMethod::Reduced, &cfg).unwrap();
    let op = build_method2(&pencil, sigma, &cfg).unwrap();
    let (hn, hc) = default_scaling(&pencil).unwrap();
    let m_ip = RegularizedInnerProduct::new(&pencil, hn, hc).unwrap();
    let x0 = DVector::from_element(pencil.dim(), 1.0);
    let result = lanczos::run(
        &pencil,
        &op,
        &m_ip,
        &x0,
        Target::Interval {
            a: 0.5,
            b: 4.5,
            expected: report.count,
        },
        &LanczosOptions {
            maxit: 200,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(validate(&report, &result.pairs, None), Verdict::Match);
}
