//! Initial states: Lanczos ground states, Box–Muller random states and
//! imaginary-time "thermal" typicality states.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{inner_product, CompiledOperator, StateVector, TermList};
use crate::linalg::{hermitian_eigen, tridiagonal_eigen};
use crate::propagation::{spectral_window, Mode, Propagator};
use crate::scalar::{czero, Cplx, Real};
use crate::streams::rng_from_seed;

pub const LANCZOS_MAX_ITER: usize = 500;
/// Dense diagonalisation is used when Lanczos fails below this dimension.
pub const DENSE_FALLBACK_DIM: usize = 256;
/// Ritz gap under which the ground state is flagged as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;
const LANCZOS_START_SEED: u64 = 0x5eed_1a2c;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Ground,
    Random,
    Thermal,
    Product,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance<T: Real> {
    pub seed: Option<u64>,
    pub beta: Option<T>,
    /// `‖Hψ − E₀ψ‖` of a ground state.
    pub residual: Option<T>,
    pub degenerate: bool,
}

/// A normalised state plus how it was made.
#[derive(Clone, Debug)]
pub struct PreparedState<T: Real> {
    pub vector: StateVector<T>,
    pub kind: StateKind,
    pub provenance: Provenance<T>,
}

/// Lowest eigenpair of `h` by Lanczos with full reorthogonalisation.
pub fn ground_state<T: Real>(h: &TermList<T>) -> Result<(PreparedState<T>, T)> {
    let dim = 1usize << h.n_sites();
    let op = CompiledOperator::new(h);
    let scale = T::one().max(spectral_window(h).half_width());
    let tol = T::lit(1e-12).max(T::lit(64.0) * T::epsilon()) * scale;

    match lanczos_lowest(&op, dim, tol) {
        Ok((vector, energy, degenerate)) => {
            let residual = residual_norm(&op, &vector, energy);
            let accept = T::lit(1e-10).max(T::lit(1e3) * T::epsilon()) * scale;
            if residual <= accept {
                return Ok((
                    PreparedState {
                        vector,
                        kind: StateKind::Ground,
                        provenance: Provenance {
                            residual: Some(residual),
                            degenerate,
                            ..Provenance::default()
                        },
                    },
                    energy,
                ));
            }
            dense_fallback(h, dim, Some(residual))
        }
        Err(e) => {
            if dim <= DENSE_FALLBACK_DIM {
                dense_fallback(h, dim, None)
            } else {
                Err(e)
            }
        }
    }
}

fn dense_fallback<T: Real>(h: &TermList<T>, dim: usize, lanczos_residual: Option<T>) -> Result<(PreparedState<T>, T)> {
    if dim > DENSE_FALLBACK_DIM {
        return Err(Error::numerical(format!(
            "Lanczos ground state residual {} above tolerance (dim {dim})",
            lanczos_residual.map(|r| r.to_string()).unwrap_or_default()
        )));
    }
    let eig = hermitian_eigen(&h.to_dense())?;
    let vector = StateVector::from_amplitudes(h.n_sites(), eig.vector(0))?;
    let energy = eig.values[0];
    let op = CompiledOperator::new(h);
    let residual = residual_norm(&op, &vector, energy);
    let degenerate = eig.values.len() > 1 && (eig.values[1] - energy).as_f64() < DEGENERACY_GAP;
    Ok((
        PreparedState {
            vector,
            kind: StateKind::Ground,
            provenance: Provenance {
                residual: Some(residual),
                degenerate,
                ..Provenance::default()
            },
        },
        energy,
    ))
}

fn residual_norm<T: Real>(op: &CompiledOperator<T>, v: &StateVector<T>, energy: T) -> T {
    let mut hv = vec![czero::<T>(); v.dim()];
    op.apply_into(v.amplitudes(), &mut hv);
    hv.iter()
        .zip(v.amplitudes())
        .map(|(a, b)| (*a - b.scale(energy)).norm_sqr())
        .sum::<T>()
        .sqrt()
}

fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * *y).sum()
}

fn lanczos_lowest<T: Real>(op: &CompiledOperator<T>, dim: usize, tol: T) -> Result<(StateVector<T>, T, bool)> {
    let n_sites = op.n_sites();
    let mut rng = rng_from_seed(LANCZOS_START_SEED);
    let mut v: Vec<Cplx<T>> = (0..dim)
        .map(|_| Cplx::new(T::lit(rng.gen::<f64>() - 0.5), T::lit(rng.gen::<f64>() - 0.5)))
        .collect();
    let n0 = dot(&v, &v).re.sqrt();
    v.iter_mut().for_each(|x| *x = x.unscale(n0));

    let max_iter = LANCZOS_MAX_ITER.min(dim);
    let mut basis: Vec<Vec<Cplx<T>>> = vec![v];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut w = vec![czero::<T>(); dim];

    for j in 0..max_iter {
        op.apply_into(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // Full reorthogonalisation (twice is enough).
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (x, y) in w.iter_mut().zip(q) {
                    *x = *x - *y * c;
                }
            }
        }
        let b = dot(&w, &w).re.sqrt();

        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta)?;
        let m = alpha.len();
        let theta = vals[0];
        let last = vecs[(m - 1) * m].abs();
        let exhausted = b <= tol * T::lit(1e-3) || j + 1 == dim;
        if b * last <= tol || exhausted {
            let mut psi = vec![czero::<T>(); dim];
            for (k, q) in basis.iter().enumerate() {
                let yk = vecs[k * m];
                for (p, x) in psi.iter_mut().zip(q) {
                    *p = *p + x.scale(yk);
                }
            }
            let mut state = StateVector::from_amplitudes(n_sites, psi)?;
            state.normalize()?;
            let degenerate = m > 1 && (vals[1] - theta).as_f64() < DEGENERACY_GAP;
            return Ok((state, theta, degenerate));
        }
        beta.push(b);
        let next: Vec<Cplx<T>> = w.iter().map(|x| x.unscale(b)).collect();
        basis.push(next);
    }
    Err(Error::numerical(format!(
        "Lanczos did not converge in {max_iter} iterations"
    )))
}

/// Haar-random state: independent complex Gaussian amplitudes drawn with
/// the Box–Muller transform, then normalised.
pub fn random_state<T: Real>(n_sites: usize, seed: u64) -> Result<PreparedState<T>> {
    if n_sites == 0 {
        return Err(Error::config("a random state needs at least one site"));
    }
    let mut rng = rng_from_seed(seed);
    let amps: Vec<Cplx<T>> = (0..1usize << n_sites)
        .map(|_| {
            let (re, im) = box_muller(&mut rng);
            Cplx::new(T::lit(re), T::lit(im))
        })
        .collect();
    let mut vector = StateVector::from_amplitudes(n_sites, amps)?;
    vector.normalize()?;
    Ok(PreparedState {
        vector,
        kind: StateKind::Random,
        provenance: Provenance {
            seed: Some(seed),
            ..Provenance::default()
        },
    })
}

/// Two independent standard normal deviates.
fn box_muller(rng: &mut impl Rng) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = std::f64::consts::TAU * u2;
    (r * phi.cos(), r * phi.sin())
}

/// `normalize(exp(−β H_env / 2) |random⟩)`.
pub fn thermal_state<T: Real>(h_env: &TermList<T>, beta: T, seed: u64) -> Result<PreparedState<T>> {
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(Error::config(format!("inverse temperature must be finite and ≥ 0, got {beta}")));
    }
    let random = random_state::<T>(h_env.n_sites(), seed)?;
    let mut vector = if beta == T::zero() {
        random.vector
    } else {
        let prop = Propagator::new(h_env)?;
        prop.propagate(&random.vector, beta * T::lit(0.5), Mode::ImaginaryTime)?
    };
    vector.normalize()?;
    Ok(PreparedState {
        vector,
        kind: StateKind::Thermal,
        provenance: Provenance {
            seed: Some(seed),
            beta: Some(beta),
            ..Provenance::default()
        },
    })
}

/// Dense ground state, for cross-checks on small registers.
pub fn dense_spectrum<T: Real>(h: &TermList<T>) -> Result<Vec<T>> {
    Ok(hermitian_eigen(&h.to_dense())?.values)
}

/// `|⟨a|b⟩|²`.
pub fn fidelity<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<T> {
    Ok(inner_product(a, b)?.norm_sqr())
}
