//! Reduced density matrices and everything measured on them: conditioned
//! blocks of the measured spin, coherence measures, von Neumann entropy,
//! bond correlations and the static structure factor.

use crate::error::{Error, Result};
use crate::hilbert::{deposit_bits, Axis, CompiledOperator, StateVector, TermList, DOWN, UP};
use crate::linalg::{hermitian_eigen, DenseMatrix};
use crate::scalar::{cplx, czero, Cplx, Real};

/// Largest subsystem stored as a dense matrix.
pub const MAX_KEPT_SITES: usize = 14;
/// Eigenvalues at or below this count as zero in the entropy.
pub const ENTROPY_CLIP: f64 = 1e-14;
/// Eigenvalues below this make the entropy fail.
pub const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-8;
/// Energy gap treated as a degeneracy when fixing an eigenbasis.
pub const CLUSTER_GAP: f64 = 1e-10;

/// Reduced density matrix of `n_sites_kept` sites; local site `k` is bit
/// `k` of the matrix index.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    n_sites_kept: usize,
    elements: DenseMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(n_sites_kept: usize, elements: DenseMatrix<T>) -> Result<Self> {
        if elements.dim() != 1usize << n_sites_kept {
            return Err(Error::config("density matrix dimension is not 2^sites"));
        }
        Ok(Self { n_sites_kept, elements })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &StateVector<T>) -> Self {
        let a = psi.amplitudes();
        Self {
            n_sites_kept: psi.n_sites(),
            elements: DenseMatrix::from_fn(psi.dim(), |i, j| a[i] * a[j].conj()),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites_kept
    }

    pub fn elements(&self) -> &DenseMatrix<T> {
        &self.elements
    }

    pub fn trace(&self) -> Cplx<T> {
        self.elements.trace()
    }
}

/// `Tr_{complement} |ψ⟩⟨ψ|`, keeping `kept` (local site `k` = `kept[k]`).
pub fn reduce<T: Real>(psi: &StateVector<T>, kept: &[usize]) -> Result<DensityMatrix<T>> {
    let n = psi.n_sites();
    if kept.len() > MAX_KEPT_SITES {
        return Err(Error::capacity(format!(
            "cannot store a {}-site density matrix (limit {MAX_KEPT_SITES})",
            kept.len()
        )));
    }
    let mut used = vec![false; n];
    for &s in kept {
        if s >= n || used[s] {
            return Err(Error::config(format!("kept site {s} out of range or repeated")));
        }
        used[s] = true;
    }
    let traced: Vec<usize> = (0..n).filter(|&s| !used[s]).collect();
    let dim = 1usize << kept.len();
    let kept_off: Vec<usize> = (0..dim).map(|l| deposit_bits(l, kept)).collect();
    let amps = psi.amplitudes();

    let mut rho = DenseMatrix::<T>::zeros(dim);
    let mut column = vec![czero::<T>(); dim];
    for e in 0..1usize << traced.len() {
        let base = deposit_bits(e, &traced);
        for (c, &k) in column.iter_mut().zip(&kept_off) {
            *c = amps[base | k];
        }
        for i in 0..dim {
            let ci = column[i];
            if ci.re == T::zero() && ci.im == T::zero() {
                continue;
            }
            for j in i..dim {
                rho[(i, j)] = rho[(i, j)] + ci * column[j].conj();
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            rho[(i, j)] = rho[(j, i)].conj();
        }
        rho[(i, i)] = cplx(rho[(i, i)].re, T::zero());
    }
    DensityMatrix::new(kept.len(), rho)
}

/// Orientation of the measured spin in a conditioned block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn bit(self) -> usize {
        match self {
            Spin::Up => UP,
            Spin::Down => DOWN,
        }
    }
}

/// `ρ_ab = ⟨a|ρ|b⟩` over the measured spin (local site 0).
#[derive(Clone, Debug)]
pub struct ConditionedBlock<T: Real> {
    pub a: Spin,
    pub b: Spin,
    pub block: DenseMatrix<T>,
    pub trace_ab: Cplx<T>,
}

impl<T: Real> ConditionedBlock<T> {
    /// `ρ̃_ab = ρ_ab / Tr ρ_ab`.
    pub fn normalized(&self) -> Result<DenseMatrix<T>> {
        if self.trace_ab.norm() <= T::lit(1e-12) {
            return Err(Error::numerical(format!(
                "conditioned block ({:?},{:?}) has vanishing trace {}",
                self.a, self.b, self.trace_ab
            )));
        }
        let mut m = self.block.clone();
        m.scale(Cplx::new(T::one(), T::zero()) / self.trace_ab);
        Ok(m)
    }
}

pub fn condition<T: Real>(rho: &DensityMatrix<T>, a: Spin, b: Spin) -> Result<ConditionedBlock<T>> {
    if rho.n_sites() == 0 {
        return Err(Error::config("conditioning needs the measured site in the density matrix"));
    }
    let dim = 1usize << (rho.n_sites() - 1);
    let (ab, bb) = (a.bit(), b.bit());
    let block = DenseMatrix::from_fn(dim, |i, j| rho.elements()[((i << 1) | ab, (j << 1) | bb)]);
    let trace_ab = block.trace();
    Ok(ConditionedBlock { a, b, block, trace_ab })
}

/// `max_{i,j} |⟨i|ρ_↑↓|j⟩|`.
pub fn coherence_local<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let block = condition(rho, Spin::Up, Spin::Down)?.block;
    Ok(block.as_slice().iter().map(|z| z.norm()).fold(T::zero(), T::max))
}

/// `max_{i≠j} |⟨i|ρ_↑↑|j⟩|`.
pub fn coherence_global<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let block = condition(rho, Spin::Up, Spin::Up)?.block;
    Ok(max_offdiagonal(&block))
}

fn max_offdiagonal<T: Real>(m: &DenseMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// `−Tr ρ ln ρ` of a full reduced density matrix.
pub fn entropy<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    entropy_of_matrix(rho.elements())
}

/// von Neumann entropy of any (unit-trace, PSD) Hermitian matrix.
pub fn entropy_of_matrix<T: Real>(m: &DenseMatrix<T>) -> Result<T> {
    let eig = hermitian_eigen(m)?;
    let mut s = T::zero();
    for &l in &eig.values {
        if l.as_f64() < NEGATIVE_EIGENVALUE_LIMIT {
            return Err(Error::numerical(format!("density matrix eigenvalue {l} is negative")));
        }
        if l.as_f64() > ENTROPY_CLIP {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

/// `Tr[ρ O]`.
pub fn expectation_dm<T: Real>(rho: &DensityMatrix<T>, op: &TermList<T>) -> Result<Cplx<T>> {
    if op.n_sites() != rho.n_sites() {
        return Err(Error::config(format!(
            "{}-site operator measured on a {}-site density matrix",
            op.n_sites(),
            rho.n_sites()
        )));
    }
    let compiled = CompiledOperator::new(op);
    let m = rho.elements();
    let mut acc = czero::<T>();
    for col in 0..m.dim() {
        compiled.for_each_in_column(col, |row, amp| acc = acc + m[(col, row)] * amp);
    }
    Ok(acc)
}

/// `Tr[ρ S_i·S_j]` for local sites `i ≠ j`.
pub fn correlation<T: Real>(rho: &DensityMatrix<T>, i: usize, j: usize) -> Result<T> {
    let n = rho.n_sites();
    if i >= n || j >= n || i == j {
        return Err(Error::config(format!("bond ({i}, {j}) invalid for {n} kept sites")));
    }
    let mut op = TermList::new(n);
    op.push_exchange(T::one(), i, j)?;
    Ok(expectation_dm(rho, &op)?.re)
}

/// All `⟨S_l^a S_m^b⟩` of a density matrix, `corr[a][b][l][m]`.
#[derive(Clone, Debug)]
pub struct SpinCorrelations<T: Real> {
    n: usize,
    corr: Vec<Cplx<T>>,
}

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}

impl<T: Real> SpinCorrelations<T> {
    pub fn compute(rho: &DensityMatrix<T>) -> Result<Self> {
        let n = rho.n_sites();
        let mut corr = vec![czero::<T>(); 9 * n * n];
        let mut single = [[czero::<T>(); 3]; 64];
        if n > single.len() {
            return Err(Error::capacity("too many sites for correlation table"));
        }
        for l in 0..n {
            for a in Axis::ALL {
                let mut op = TermList::new(n);
                op.push(T::one(), &[(l, a)])?;
                single[l][axis_index(a)] = expectation_dm(rho, &op)?;
            }
        }
        // ⟨(S^a)²⟩ = Tr ρ / 4, so the sum rule also tracks the norm.
        let quarter = rho.trace().scale(T::lit(0.25));
        let half_i = cplx(T::zero(), T::lit(0.5));
        for a in Axis::ALL {
            for b in Axis::ALL {
                for l in 0..n {
                    for m in 0..n {
                        let v = if l != m {
                            let mut op = TermList::new(n);
                            op.push(T::one(), &[(l, a), (m, b)])?;
                            expectation_dm(rho, &op)?
                        } else if a == b {
                            quarter
                        } else {
                            // S^a S^b = (i/2) ε_abc S^c on one spin-1/2.
                            let (ia, ib) = (axis_index(a), axis_index(b));
                            let c = 3 - ia - ib;
                            let eps = if (ia + 1) % 3 == ib { T::one() } else { -T::one() };
                            half_i * single[l][c].scale(eps)
                        };
                        corr[((axis_index(a) * 3 + axis_index(b)) * n + l) * n + m] = v;
                    }
                }
            }
        }
        Ok(Self { n, corr })
    }

    pub fn get(&self, a: Axis, b: Axis, l: usize, m: usize) -> Cplx<T> {
        self.corr[((axis_index(a) * 3 + axis_index(b)) * self.n + l) * self.n + m]
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// `K^{ab}(κ_m)` with `κ_m = 2πm/N` and site positions `R_l = l`.
    pub fn structure_factor(&self, m: usize) -> StructureFactorSample<T> {
        let n = self.n;
        let kappa = T::TAU() * T::count(m % n) / T::count(n);
        let mut components = [[czero::<T>(); 3]; 3];
        let inv_n = T::one() / T::count(n);
        for a in Axis::ALL {
            for b in Axis::ALL {
                let mut acc = czero::<T>();
                for l in 0..n {
                    for mm in 0..n {
                        let phase = kappa * (T::count(l) - T::count(mm));
                        acc = acc + Cplx::from_polar(T::one(), phase) * self.get(a, b, l, mm);
                    }
                }
                components[axis_index(a)][axis_index(b)] = acc.scale(inv_n);
            }
        }
        StructureFactorSample { kappa, components }
    }
}

/// `K^{ab}(κ)` for all `a, b ∈ {x, y, z}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureFactorSample<T: Real> {
    pub kappa: T,
    pub components: [[Cplx<T>; 3]; 3],
}

impl<T: Real> StructureFactorSample<T> {
    pub fn get(&self, a: Axis, b: Axis) -> Cplx<T> {
        self.components[axis_index(a)][axis_index(b)]
    }
}

/// `K^{ab}(κ)` of a density matrix covering the whole ring; `κ` must be a
/// multiple of `2π/N`.
pub fn structure_factor<T: Real>(rho: &DensityMatrix<T>, kappa: T) -> Result<StructureFactorSample<T>> {
    let n = rho.n_sites();
    let m = kappa_grid_index(kappa, n)?;
    Ok(SpinCorrelations::compute(rho)?.structure_factor(m))
}

/// Grid index `m` of `κ = 2πm/N`, rejecting off-grid wave numbers.
pub fn kappa_grid_index<T: Real>(kappa: T, n: usize) -> Result<usize> {
    let x = kappa.as_f64() * n as f64 / std::f64::consts::TAU;
    let m = x.round();
    if (x - m).abs() > 1e-9 || n == 0 {
        return Err(Error::config(format!("wave number {kappa} is not a multiple of 2π/{n}")));
    }
    Ok((m as i64).rem_euclid(n as i64) as usize)
}

/// `max_{n≠m} |⟨E_n|ρ̃|E_m⟩|` in an eigenbasis of `h_eff`.
///
/// Inside a degenerate cluster the basis is fixed by diagonalising the
/// total `S^z` and then `ρ̃` itself restricted to each remaining cluster.
pub fn coherence_eigenbasis<T: Real>(rho_tilde: &DenseMatrix<T>, h_eff: &TermList<T>) -> Result<T> {
    let m = h_eff.n_sites();
    if rho_tilde.dim() != 1usize << m {
        return Err(Error::config("conditioned block and effective Hamiltonian differ in size"));
    }
    let eig = hermitian_eigen(&h_eff.to_dense())?;
    let mut sz = TermList::new(m);
    for s in 0..m {
        sz.push(T::one(), &[(s, Axis::Z)])?;
    }
    let sz = sz.to_dense();

    let dim = rho_tilde.dim();
    let mut basis: Vec<Vec<Cplx<T>>> = Vec::with_capacity(dim);
    for cluster in clusters(&eig.values) {
        let vecs: Vec<Vec<Cplx<T>>> = cluster.iter().map(|&k| eig.vector(k)).collect();
        if vecs.len() == 1 {
            basis.extend(vecs);
            continue;
        }
        for sub in refine(&vecs, &sz)? {
            if sub.len() == 1 {
                basis.extend(sub);
            } else {
                let (_, fixed) = rotate_into_eigenbasis(&sub, rho_tilde)?;
                basis.extend(fixed);
            }
        }
    }

    let mut worst = T::zero();
    for (i, u) in basis.iter().enumerate() {
        let ru = rho_tilde.matvec(u);
        for (j, v) in basis.iter().enumerate() {
            if i != j {
                let z: Cplx<T> = v.iter().zip(&ru).map(|(a, b)| a.conj() * *b).sum();
                worst = worst.max(z.norm());
            }
        }
    }
    Ok(worst)
}

fn clusters<T: Real>(values: &[T]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (v - values[*c.last().unwrap()]).as_f64() < CLUSTER_GAP => c.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Diagonalise `op` inside span(`vecs`); returns eigenvalues and rotated vectors.
fn rotate_into_eigenbasis<T: Real>(vecs: &[Vec<Cplx<T>>], op: &DenseMatrix<T>) -> Result<(Vec<T>, Vec<Vec<Cplx<T>>>)> {
    let k = vecs.len();
    let opv: Vec<Vec<Cplx<T>>> = vecs.iter().map(|v| op.matvec(v)).collect();
    let restricted = DenseMatrix::from_fn(k, |i, j| vecs[i].iter().zip(&opv[j]).map(|(a, b)| a.conj() * *b).sum());
    let eig = hermitian_eigen(&restricted)?;
    let dim = vecs[0].len();
    let rotated = (0..k)
        .map(|c| {
            let mut v = vec![czero::<T>(); dim];
            for (r, src) in vecs.iter().enumerate() {
                let w = eig.vectors[(r, c)];
                for (x, y) in v.iter_mut().zip(src) {
                    *x = *x + *y * w;
                }
            }
            v
        })
        .collect();
    Ok((eig.values, rotated))
}

/// Split a degenerate cluster into eigenspaces of `op`.
fn refine<T: Real>(vecs: &[Vec<Cplx<T>>], op: &DenseMatrix<T>) -> Result<Vec<Vec<Vec<Cplx<T>>>>> {
    let (values, rotated) = rotate_into_eigenbasis(vecs, op)?;
    let mut out: Vec<Vec<Vec<Cplx<T>>>> = Vec::new();
    for group in clusters(&values) {
        out.push(group.into_iter().map(|k| rotated[k].clone()).collect());
    }
    Ok(out)
}
