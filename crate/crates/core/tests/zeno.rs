mod common;

use common::{dense_of, exp_apply, from_dvector, random_state, random_term_list, to_dvector};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use spinzeno::hamiltonians::{build_heisenberg, Geometry};
use spinzeno::zeno::{dephase, project, run_repeated_collapse, trotter_reference, CollapseMode, CollapseProtocol, Sign};

fn protocol(mode: CollapseMode, seed: u64) -> CollapseProtocol<f64> {
    CollapseProtocol { site: 0, interval: 0.3, horizon: 1.5, mode, seed }
}

#[test]
fn trajectory_average_converges_to_ensemble() {
    let h = build_heisenberg::<f64>(4, 1.0, Geometry::Open).unwrap();
    let psi = random_state(4, 17);
    let mut ensemble_final = DMatrix::<C>::zeros(16, 16);
    run_repeated_collapse(&h, &psi, &protocol(CollapseMode::Ensemble, 0), |_, rho| {
        ensemble_final = DMatrix::from_fn(16, 16, |i, j| rho.elements()[(i, j)]);
        Ok(())
    })
    .unwrap();

    let runs = 3000;
    let mut mean = DMatrix::<C>::zeros(16, 16);
    for seed in 0..runs {
        let mut last = DMatrix::<C>::zeros(16, 16);
        let rec = run_repeated_collapse(&h, &psi, &protocol(CollapseMode::Trajectory, seed), |_, rho| {
            last = DMatrix::from_fn(16, 16, |i, j| rho.elements()[(i, j)]);
            Ok(())
        })
        .unwrap();
        assert_eq!(rec.outcomes.len(), 6);
        mean += last / C::new(runs as f64, 0.0);
    }
    // Each element is an average of bounded (≤ 1) samples: 5σ ≤ 5/√runs.
    let worst = (&mean - &ensemble_final).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(worst <= 5.0 / (runs as f64).sqrt(), "{worst}");
}

#[test]
fn ensemble_matches_explicit_channel() {
    let h = random_term_list(3, 12, 2);
    let psi = random_state(3, 4);
    let dense = dense_of(&h);
    let eig = dense.clone().symmetric_eigen();
    let u = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C::from_polar(1.0, -0.3 * l)))
        * eig.eigenvectors.adjoint();
    let v = to_dvector(&psi);
    let mut rho = &v * v.adjoint();
    let mut oracle = Vec::new();
    for k in 0..6 {
        // Dephase on site 0 by hand, then evolve.
        let d = DMatrix::from_fn(8, 8, |i, j| if (i ^ j) & 1 == 1 { C::new(0.0, 0.0) } else { rho[(i, j)] });
        oracle.push(d.clone());
        if k < 5 {
            rho = &u * d * u.adjoint();
        }
    }
    let mut step = 0;
    let rec = run_repeated_collapse(&h, &psi, &protocol(CollapseMode::Ensemble, 0), |_, got| {
        assert!(common::max_abs_diff(&oracle[step], got.elements()) <= 1e-12, "step {step}");
        step += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(step, 6);
    assert!(rec.max_probability_defect <= 1e-12);
}

#[test]
fn probabilities_are_conserved() {
    let h = random_term_list(5, 20, 9);
    let psi = random_state(5, 10);
    for seed in 0..20 {
        let rec = run_repeated_collapse(&h, &psi, &protocol(CollapseMode::Trajectory, seed), |_, rho| {
            assert!((rho.trace().re - 1.0).abs() <= 1e-12);
            Ok(())
        })
        .unwrap();
        assert!(rec.max_probability_defect <= 1e-12);
        assert!(rec.p_up.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        for (p, &up) in rec.p_up.iter().zip(&rec.outcomes) {
            // Outcomes are only drawn from branches with nonzero weight.
            assert!(if up { *p > 0.0 } else { *p < 1.0 });
        }
    }
}

#[test]
fn projectors_are_complete() {
    let psi = random_state(4, 3);
    for site in 0..4 {
        let (up, pu) = project(&psi, site, Sign::Plus).unwrap();
        let (down, pd) = project(&psi, site, Sign::Minus).unwrap();
        assert!((pu + pd - 1.0).abs() <= 1e-14);
        let sum: Vec<C> = up.amplitudes().iter().zip(down.amplitudes()).map(|(a, b)| a + b).collect();
        assert_eq!(sum, psi.amplitudes());
    }
}

#[test]
fn dephasing_preserves_diagonal() {
    let psi = random_state(3, 8);
    let mut rho = spinzeno::observables::DensityMatrix::pure(&psi).elements().clone();
    let before = rho.clone();
    dephase(&mut rho, 1);
    for i in 0..8 {
        for j in 0..8 {
            let want = if ((i ^ j) >> 1) & 1 == 1 { C::new(0.0, 0.0) } else { before[(i, j)] };
            assert_eq!(rho[(i, j)], want);
        }
    }
}

#[test]
fn trotter_product_converges_to_exact_evolution() {
    let h_s = random_term_list(4, 10, 31);
    let h_i = random_term_list(4, 10, 32);
    let mut total = h_s.clone();
    for t in h_i.terms() {
        let f: Vec<_> = t.factors.iter().map(|f| (f.site, f.axis)).collect();
        total.push(t.coeff, &f).unwrap();
    }
    let psi = random_state(4, 33);
    let exact = from_dvector(4, &exp_apply(&dense_of(&total), 1.5, &to_dvector(&psi), false));
    let errors: Vec<f64> = [10, 40, 160]
        .iter()
        .map(|&n| trotter_reference(&h_s, &h_i, 1.5, n, &psi).unwrap().distance(&exact))
        .collect();
    // First-order splitting: error ∝ 1/n.
    assert!(errors[1] < errors[0] / 3.0 && errors[2] < errors[1] / 3.0, "{errors:?}");
    assert!(errors[2] < 1e-2);
    assert!(trotter_reference(&h_s, &h_i, 1.0, 0, &psi).is_err());
}
