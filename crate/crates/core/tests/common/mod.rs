//! Independent reference implementations used by the integration tests.
//! Everything here is built from explicit Kronecker products and dense
//! linear algebra, sharing no code with the library's kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinzeno::hilbert::{Axis, StateVector, TermList};

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Single-spin `S^a` in the basis (|↓⟩, |↑⟩) = (bit 0, bit 1).
pub fn spin_matrix(axis: Axis) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[z, c(0.5, 0.0), c(0.5, 0.0), z]),
        // S^y|↑⟩ = (i/2)|↓⟩, S^y|↓⟩ = (−i/2)|↑⟩.
        Axis::Y => DMatrix::from_row_slice(2, 2, &[z, c(0.0, 0.5), c(0.0, -0.5), z]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[c(-0.5, 0.0), z, z, c(0.5, 0.0)]),
    }
}

/// `S_site^a` on `n` sites. Site `k` is bit `k`, so the highest site is the
/// leftmost Kronecker factor.
pub fn site_operator(n: usize, site: usize, axis: Axis) -> DMatrix<C> {
    let mut m = DMatrix::<C>::identity(1, 1);
    for s in (0..n).rev() {
        let f = if s == site { spin_matrix(axis) } else { DMatrix::identity(2, 2) };
        m = m.kronecker(&f);
    }
    m
}

/// Dense matrix of a term list: each term is one Kronecker chain of 2×2
/// factors (products of spin matrices on shared sites, identity elsewhere).
pub fn dense_of(h: &TermList<f64>) -> DMatrix<C> {
    let n = h.n_sites();
    let dim = 1usize << n;
    let mut out = DMatrix::<C>::zeros(dim, dim);
    for t in h.terms() {
        let mut m = DMatrix::<C>::identity(1, 1);
        for s in (0..n).rev() {
            let mut f = DMatrix::<C>::identity(2, 2);
            for factor in t.factors.iter().filter(|f| f.site == s) {
                f = &f * spin_matrix(factor.axis);
            }
            m = m.kronecker(&f);
        }
        out += m * c(t.coeff, 0.0);
    }
    out
}

pub fn to_dvector(psi: &StateVector<f64>) -> DVector<C> {
    DVector::from_iterator(psi.dim(), psi.amplitudes().iter().copied())
}

pub fn from_dvector(n: usize, v: &DVector<C>) -> StateVector<f64> {
    StateVector::from_amplitudes(n, v.iter().copied().collect()).unwrap()
}

/// `exp(−i t H) ψ` (or `exp(−t H) ψ` when `imaginary`) via a Hermitian
/// eigendecomposition.
pub fn exp_apply(h: &DMatrix<C>, t: f64, psi: &DVector<C>, imaginary: bool) -> DVector<C> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * psi;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(a, &l)| {
            if imaginary {
                a * (-t * l).exp()
            } else {
                a * C::from_polar(1.0, -t * l)
            }
        }),
    );
    v * scaled
}

pub fn sorted_eigenvalues(h: &DMatrix<C>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

/// Random term list with 1–3 factor terms on distinct sites and all axes.
pub fn random_term_list(n: usize, terms: usize, seed: u64) -> TermList<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = TermList::new(n);
    let axes = [Axis::X, Axis::Y, Axis::Z];
    for _ in 0..terms {
        let k = rng.gen_range(1..=3.min(n));
        let mut sites: Vec<usize> = Vec::new();
        while sites.len() < k {
            let s = rng.gen_range(0..n);
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        let factors: Vec<(usize, Axis)> = sites.iter().map(|&s| (s, axes[rng.gen_range(0..3)])).collect();
        h.push(rng.gen_range(-1.0..1.0), &factors).unwrap();
    }
    h
}

pub fn random_state(n: usize, seed: u64) -> StateVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<C> = (0..1usize << n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut psi = StateVector::from_amplitudes(n, amps).unwrap();
    psi.normalize().unwrap();
    psi
}

/// `Tr_{other sites} |ψ⟩⟨ψ|` by looping over every pair of basis states.
pub fn brute_partial_trace(psi: &StateVector<f64>, kept: &[usize]) -> DMatrix<C> {
    let n = psi.n_sites();
    let a = psi.amplitudes();
    let dk = 1usize << kept.len();
    let local = |g: usize| -> usize {
        kept.iter().enumerate().map(|(k, &s)| ((g >> s) & 1) << k).sum()
    };
    let others: usize = (0..n).filter(|s| !kept.contains(s)).map(|s| 1usize << s).sum();
    let mut rho = DMatrix::<C>::zeros(dk, dk);
    for g1 in 0..a.len() {
        for g2 in 0..a.len() {
            if g1 & others == g2 & others {
                rho[(local(g1), local(g2))] += a[g1] * a[g2].conj();
            }
        }
    }
    rho
}

/// `Tr[ρ S_l^a S_m^b]` with the operator product built as one Kronecker chain.
pub fn brute_correlation(rho: &DMatrix<C>, n: usize, a: Axis, l: usize, b: Axis, m: usize) -> C {
    let mut op = DMatrix::<C>::identity(1, 1);
    for s in (0..n).rev() {
        let mut f = DMatrix::<C>::identity(2, 2);
        if s == l {
            f = &f * spin_matrix(a);
        }
        if s == m {
            f = &f * spin_matrix(b);
        }
        op = op.kronecker(&f);
    }
    rho.transpose().component_mul(&op).sum()
}

/// `K^{ab}(κ) = (1/N) Σ_{l,m} e^{iκ(l−m)} ⟨S_l^a S_m^b⟩`.
pub fn brute_structure_factor(rho: &DMatrix<C>, n: usize, a: Axis, b: Axis, kappa: f64) -> C {
    let mut acc = c(0.0, 0.0);
    for l in 0..n {
        for m in 0..n {
            acc += C::from_polar(1.0, kappa * (l as f64 - m as f64)) * brute_correlation(rho, n, a, l, b, m);
        }
    }
    acc / n as f64
}

pub fn max_abs_diff(a: &DMatrix<C>, b: &spinzeno::linalg::DenseMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}
