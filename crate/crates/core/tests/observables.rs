mod common;

use common::{brute_partial_trace, brute_structure_factor, c, dense_of, max_abs_diff, random_state};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use spinzeno::hamiltonians::{add_staggered_field, build_effective_branch, build_heisenberg, neel_signs, Branch, Geometry};
use spinzeno::hilbert::Axis;
use spinzeno::linalg::DenseMatrix;
use spinzeno::observables::{
    coherence_eigenbasis, coherence_global, coherence_local, condition, entropy, reduce, structure_factor,
    DensityMatrix, Spin,
};
use spinzeno::stateprep::ground_state;

fn to_dense(m: &DMatrix<C>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), |i, j| m[(i, j)])
}

#[test]
fn partial_trace_matches_brute_force() {
    let cases: [(usize, &[usize]); 6] = [
        (3, &[0]),
        (4, &[2, 0]),
        (6, &[1, 3, 5]),
        (8, &[0, 1, 2]),
        (8, &[7, 2, 4, 0]),
        (10, &[9, 0, 5]),
    ];
    for (k, (n, kept)) in cases.into_iter().enumerate() {
        let psi = random_state(n, k as u64);
        let rho = reduce(&psi, kept).unwrap();
        let want = brute_partial_trace(&psi, kept);
        assert!(max_abs_diff(&want, rho.elements()) <= 1e-13, "case {k}");
        assert!((rho.trace().re - 1.0).abs() <= 1e-12);
        assert!(rho.elements().hermiticity_defect() <= 1e-12);
    }
}

#[test]
fn conditioned_blocks_match_brute_force() {
    for seed in 0..4u64 {
        let psi = random_state(8, seed);
        let kept = [0, 1, 2, 3];
        let rho = reduce(&psi, &kept).unwrap();
        let full = brute_partial_trace(&psi, &kept);
        let mut traces = C::new(0.0, 0.0);
        for (a, abit) in [(Spin::Up, 1usize), (Spin::Down, 0)] {
            for (b, bbit) in [(Spin::Up, 1usize), (Spin::Down, 0)] {
                let block = condition(&rho, a, b).unwrap();
                // ⟨a|ρ|b⟩ on the measured spin, with the others as row/column.
                let want = DMatrix::from_fn(8, 8, |i, j| full[((i << 1) | abit, (j << 1) | bbit)]);
                assert!(max_abs_diff(&want, &block.block) <= 1e-13);
                if a == b {
                    traces += block.trace_ab;
                    assert!(block.trace_ab.im.abs() <= 1e-12);
                    assert!(block.trace_ab.re >= -1e-12 && block.trace_ab.re <= 1.0 + 1e-12);
                }
            }
        }
        assert!((traces.re - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn structure_factor_matches_brute_force() {
    for (n, seed) in [(3usize, 1u64), (4, 2), (6, 3), (8, 4)] {
        let psi = random_state(n, seed);
        let rho_dense = brute_partial_trace(&psi, &(0..n).collect::<Vec<_>>());
        let rho = DensityMatrix::pure(&psi);
        let mut sums = [0.0; 3];
        for m in 0..n {
            let kappa = std::f64::consts::TAU * m as f64 / n as f64;
            let k = structure_factor(&rho, kappa).unwrap();
            for a in Axis::ALL {
                for b in Axis::ALL {
                    let want = brute_structure_factor(&rho_dense, n, a, b, kappa);
                    assert!((k.get(a, b) - want).norm() <= 1e-13, "n={n} m={m} {a:?}{b:?}");
                    assert!((k.get(a, b) - k.get(b, a).conj()).norm() <= 1e-13);
                }
            }
            for (s, a) in sums.iter_mut().zip(Axis::ALL) {
                assert!(k.get(a, a).re >= -1e-12 && k.get(a, a).im.abs() <= 1e-13);
                *s += k.get(a, a).re;
            }
        }
        for s in sums {
            assert!((s - n as f64 / 4.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn ring_ground_state_reference_values() {
    let h = build_heisenberg::<f64>(4, 1.0, Geometry::Ring).unwrap();
    let (gs, _) = ground_state(&h).unwrap();
    let rho = DensityMatrix::pure(&gs.vector);
    let k = structure_factor(&rho, std::f64::consts::PI).unwrap();
    // Dense oracle: diagonalise, then build K from explicit matrices.
    let dense = dense_of(&h);
    let eig = dense.clone().symmetric_eigen();
    let idx = (0..16).min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap()).unwrap();
    let v = eig.eigenvectors.column(idx);
    let rho_oracle = &v * v.adjoint();
    let want = brute_structure_factor(&rho_oracle, 4, Axis::Z, Axis::Z, std::f64::consts::PI);
    assert!((want.re - 2.0 / 3.0).abs() <= 1e-12);
    assert!((k.get(Axis::Z, Axis::Z).re - 2.0 / 3.0).abs() <= 1e-12);
    assert!((k.get(Axis::X, Axis::X).re - 2.0 / 3.0).abs() <= 1e-12);

    let staggered = add_staggered_field(&h, 0.25, &neel_signs(4)).unwrap();
    let (gs_st, _) = ground_state(&staggered).unwrap();
    let k_st = structure_factor(&DensityMatrix::pure(&gs_st.vector), std::f64::consts::PI).unwrap();
    assert!(k_st.get(Axis::Z, Axis::Z).re > 2.0 / 3.0);
    assert!(k_st.get(Axis::X, Axis::X).re < 2.0 / 3.0);
}

#[test]
fn entropy_matches_dense_eigenvalues() {
    for seed in 0..3u64 {
        let psi = random_state(7, seed);
        let rho = reduce(&psi, &[0, 3, 6]).unwrap();
        let dense = brute_partial_trace(&psi, &[0, 3, 6]);
        let want: f64 = dense
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .filter(|&&l| l > 1e-14)
            .map(|&l| -l * l.ln())
            .sum();
        assert!((entropy(&rho).unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn coherence_measures_match_definitions() {
    let psi = random_state(6, 21);
    let rho = reduce(&psi, &[0, 1, 2]).unwrap();
    let full = brute_partial_trace(&psi, &[0, 1, 2]);
    let mut local: f64 = 0.0;
    let mut global: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            local = local.max(full[((i << 1) | 1, j << 1)].norm());
            if i != j {
                global = global.max(full[((i << 1) | 1, (j << 1) | 1)].norm());
            }
        }
    }
    assert!((coherence_local(&rho).unwrap() - local).abs() <= 1e-14);
    assert!((coherence_global(&rho).unwrap() - global).abs() <= 1e-14);
}

#[test]
fn eigenbasis_coherence_of_diagonal_and_generic_blocks() {
    let h = build_effective_branch::<f64>(4, 1.0, Branch::Up).unwrap();
    // A block that is a function of H_eff and the conserved total S^z is
    // diagonal in every joint eigenbasis, so it carries no coherence.
    let mut shifted = h.clone();
    for s in 0..3 {
        shifted.push(0.37, &[(s, Axis::Z)]).unwrap();
    }
    let eig = dense_of(&shifted).symmetric_eigen();
    let mut diag_block = DMatrix::<C>::zeros(8, 8);
    let z: f64 = eig.eigenvalues.iter().map(|l| (-l).exp()).sum();
    for k in 0..8 {
        let v = eig.eigenvectors.column(k);
        diag_block += (&v * v.adjoint()) * c((-eig.eigenvalues[k]).exp() / z, 0.0);
    }
    assert!(coherence_eigenbasis(&to_dense(&diag_block), &h).unwrap() <= 1e-12);

    // For a generic pure block the measure lies in (0, 1/2]; check against
    // an explicit nondegenerate-Hamiltonian case.
    let h2 = build_heisenberg::<f64>(3, 1.0, Geometry::Open).unwrap();
    let mut h2 = h2;
    h2.push(0.3, &[(0, Axis::Z)]).unwrap();
    h2.push(0.11, &[(1, Axis::Z)]).unwrap();
    h2.push(0.05, &[(2, Axis::X)]).unwrap();
    let d2 = dense_of(&h2);
    let e2 = d2.clone().symmetric_eigen();
    let psi = random_state(3, 5);
    let rho = DensityMatrix::pure(&psi);
    let v = common::to_dvector(&psi);
    let mut want: f64 = 0.0;
    for n in 0..8 {
        for m in 0..8 {
            if n != m {
                let a = e2.eigenvectors.column(n).adjoint() * &v;
                let b = e2.eigenvectors.column(m).adjoint() * &v;
                want = want.max((a[(0, 0)] * b[(0, 0)].conj()).norm());
            }
        }
    }
    let got = coherence_eigenbasis(rho.elements(), &h2).unwrap();
    assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
}
