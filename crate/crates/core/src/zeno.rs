//! Projective measurement of a single spin, the repeated-collapse
//! protocol (stochastic trajectories or the exact dephasing ensemble) and
//! the Trotter product used as a reference in tests.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, TermList};
use crate::linalg::DenseMatrix;
use crate::observables::DensityMatrix;
use crate::propagation::{Mode, Propagator};
use crate::scalar::{czero, Real};
use crate::streams::rng_from_seed;

/// Branches with a Born probability below this are never followed.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `P^± ψ` with `P^± = (1 ± σ^z_site)/2`, and its squared norm.
pub fn project<T: Real>(psi: &StateVector<T>, site: usize, sign: Sign) -> Result<(StateVector<T>, T)> {
    if site >= psi.n_sites() {
        return Err(Error::config(format!("site {site} outside a {}-site state", psi.n_sites())));
    }
    let keep_up = sign == Sign::Plus;
    let mut out = psi.clone();
    for (idx, a) in out.amplitudes_mut().iter_mut().enumerate() {
        if ((idx >> site) & 1 == 1) != keep_up {
            *a = czero();
        }
    }
    let p = out.norm_sqr();
    Ok((out, p))
}

/// `ρ → P⁺ρP⁺ + P⁻ρP⁻` on local site `site`.
pub fn dephase<T: Real>(rho: &mut DenseMatrix<T>, site: usize) {
    let n = rho.dim();
    for i in 0..n {
        for j in 0..n {
            if ((i ^ j) >> site) & 1 == 1 {
                rho[(i, j)] = czero();
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollapseMode {
    /// One stochastic measurement record sampled with Born probabilities.
    Trajectory,
    /// Exact average over all records (dephasing channel on ρ).
    Ensemble,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseProtocol<T: Real> {
    pub site: usize,
    pub interval: T,
    pub horizon: T,
    pub mode: CollapseMode,
    pub seed: u64,
}

impl<T: Real> CollapseProtocol<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval > T::zero()) || !self.interval.is_finite() {
            return Err(Error::config(format!("collapse interval must be > 0, got {}", self.interval)));
        }
        if !(self.horizon >= self.interval) || !self.horizon.is_finite() {
            return Err(Error::config(format!(
                "collapse horizon {} shorter than the interval {}",
                self.horizon, self.interval
            )));
        }
        Ok(())
    }

    /// Collapse times `0, Δt, 2Δt, …, ≤ T`.
    pub fn times(&self) -> Vec<T> {
        let steps = (self.horizon / self.interval + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
        (0..=steps).map(|k| self.interval * T::count(k)).collect()
    }
}

/// Summary of a collapse run; observables go through the callback.
#[derive(Clone, Debug, Default)]
pub struct CollapseRecord<T: Real> {
    pub times: Vec<T>,
    /// Probability of `↑` before each collapse.
    pub p_up: Vec<T>,
    /// Outcomes of a trajectory (`true` = up); empty in ensemble mode.
    pub outcomes: Vec<bool>,
    /// Collapses where the sampled branch was below
    /// [`MIN_BRANCH_PROBABILITY`] and the other branch was taken instead.
    pub resampled: usize,
    /// Largest `|p₊ + p₋ − 1|` seen.
    pub max_probability_defect: T,
}

/// Collapse-then-evolve at every protocol time; `observe(t, ρ)` is called
/// after each collapse with the central-system density matrix.
pub fn run_repeated_collapse<T: Real>(
    h_s: &TermList<T>,
    psi0: &StateVector<T>,
    protocol: &CollapseProtocol<T>,
    mut observe: impl FnMut(T, &DensityMatrix<T>) -> Result<()>,
) -> Result<CollapseRecord<T>> {
    protocol.validate()?;
    if h_s.n_sites() != psi0.n_sites() {
        return Err(Error::config("collapse Hamiltonian and state differ in size"));
    }
    if protocol.site >= psi0.n_sites() {
        return Err(Error::config(format!("measured site {} out of range", protocol.site)));
    }
    let prop = Propagator::new(h_s)?;
    let times = protocol.times();
    let mut record = CollapseRecord {
        times: times.clone(),
        ..CollapseRecord::default()
    };

    match protocol.mode {
        CollapseMode::Trajectory => {
            let mut rng = rng_from_seed(protocol.seed);
            let mut psi = psi0.clone();
            for (k, &t) in times.iter().enumerate() {
                let (up, p_up) = project(&psi, protocol.site, Sign::Plus)?;
                let (down, p_down) = project(&psi, protocol.site, Sign::Minus)?;
                let total = psi.norm_sqr();
                record.max_probability_defect = record.max_probability_defect.max((p_up + p_down - total).abs());
                let draw = T::lit(rng.gen::<f64>()) * total;
                let mut choose_up = draw < p_up;
                let chosen_p = if choose_up { p_up } else { p_down };
                if chosen_p.as_f64() < MIN_BRANCH_PROBABILITY {
                    choose_up = !choose_up;
                    record.resampled += 1;
                }
                psi = if choose_up { up } else { down };
                psi.normalize()?;
                record.p_up.push(p_up / total);
                record.outcomes.push(choose_up);
                observe(t, &DensityMatrix::pure(&psi))?;
                if k + 1 < times.len() {
                    psi = prop.propagate(&psi, times[k + 1] - t, Mode::RealTime)?;
                }
            }
        }
        CollapseMode::Ensemble => {
            let mut rho = DensityMatrix::pure(psi0).elements().clone();
            let dim = rho.dim();
            for (k, &t) in times.iter().enumerate() {
                let p_up: T = (0..dim)
                    .filter(|i| (i >> protocol.site) & 1 == 1)
                    .map(|i| rho[(i, i)].re)
                    .sum();
                let total = rho.trace().re;
                record.max_probability_defect =
                    record.max_probability_defect.max((total - T::one()).abs());
                record.p_up.push(p_up);
                dephase(&mut rho, protocol.site);
                let dm = DensityMatrix::new(psi0.n_sites(), rho.clone())?;
                observe(t, &dm)?;
                if k + 1 < times.len() {
                    rho = conjugate_by_evolution(&prop, &rho, psi0.n_sites(), times[k + 1] - t)?;
                }
            }
        }
    }
    Ok(record)
}

/// `U ρ U†` with `U = exp(−i dt H)`, using `U (Uρ)† = UρU†` for Hermitian ρ.
fn conjugate_by_evolution<T: Real>(
    prop: &Propagator<T>,
    rho: &DenseMatrix<T>,
    n_sites: usize,
    dt: T,
) -> Result<DenseMatrix<T>> {
    let dim = rho.dim();
    let evolve_columns = |m: &DenseMatrix<T>| -> Result<DenseMatrix<T>> {
        let mut out = DenseMatrix::zeros(dim);
        for c in 0..dim {
            let col = StateVector::from_amplitudes(n_sites, m.column(c))?;
            let ev = prop.propagate(&col, dt, Mode::RealTime)?;
            for (r, a) in ev.amplitudes().iter().enumerate() {
                out[(r, c)] = *a;
            }
        }
        Ok(out)
    };
    let u_rho = evolve_columns(rho)?;
    let mut out = evolve_columns(&u_rho.adjoint())?;
    // Re-symmetrise against rounding.
    for i in 0..dim {
        for j in i + 1..dim {
            let avg = (out[(i, j)] + out[(j, i)].conj()).scale(T::lit(0.5));
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
        out[(i, i)].im = T::zero();
    }
    Ok(out)
}

/// `[exp(−itH_S/n) exp(−itH_I/n)]^n ψ0`.
pub fn trotter_reference<T: Real>(
    h_s: &TermList<T>,
    h_i: &TermList<T>,
    t: T,
    n: usize,
    psi0: &StateVector<T>,
) -> Result<StateVector<T>> {
    if n == 0 {
        return Err(Error::config("Trotter step count must be ≥ 1"));
    }
    let ps = Propagator::new(h_s)?;
    let pi = Propagator::new(h_i)?;
    let dt = t / T::count(n);
    let mut psi = psi0.clone();
    for _ in 0..n {
        psi = pi.propagate(&psi, dt, Mode::RealTime)?;
        psi = ps.propagate(&psi, dt, Mode::RealTime)?;
    }
    Ok(psi)
}
