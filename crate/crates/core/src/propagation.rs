//! Chebyshev-polynomial propagation of state vectors in real and
//! imaginary time.
//!
//! The operator is rescaled onto `[−1, 1]` with a rigorous spectral window
//! and `exp(−itH)` / `exp(−τH)` is expanded with Bessel-function weights.
//! Coefficients are kept until they fall below `1e-15` of the largest one,
//! plus a fixed safety tail; long durations are split into chained steps so
//! no single expansion exceeds [`MAX_ORDER`] terms. Imaginary time is split
//! much more finely to bound the cancellation error of strongly damped
//! components.

use crate::error::{Error, Result};
use crate::hilbert::{deposit_bits, Axis, CompiledOperator, StateVector, TermList};
use crate::scalar::{cplx, czero, Cplx, Real};

/// Relative truncation threshold of the Chebyshev series.
pub const TRUNCATION: f64 = 1e-15;
/// Coefficients kept beyond the truncation point.
pub const SAFETY_TAIL: usize = 10;
/// Upper bound on the expansion order of a single chained step.
pub const MAX_ORDER: usize = 4096;
/// Largest `half_width × duration` handled in one real-time step.
const MAX_STEP_ARGUMENT: f64 = 3000.0;
/// Largest `half_width × τ` of one imaginary-time step. States near the
/// top of the window are rebuilt by cancelling terms of size
/// `e^{2·half_width·τ}` relative to the result, so steps stay short.
const MAX_IMAGINARY_STEP_ARGUMENT: f64 = 2.0;

/// Interval guaranteed to contain the spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralWindow<T: Real> {
    pub e_min: T,
    pub e_max: T,
    /// Set when the operator was empty and the window is a placeholder.
    pub degenerate: bool,
}

impl<T: Real> SpectralWindow<T> {
    pub fn new(e_min: T, e_max: T) -> Self {
        // Widen a zero-width window so the rescaling stays finite.
        let eps = T::lit(1e-12) * (T::one() + e_min.abs().max(e_max.abs()));
        if e_max - e_min < eps {
            let mid = (e_min + e_max) * T::lit(0.5);
            return Self {
                e_min: mid - eps,
                e_max: mid + eps,
                degenerate: false,
            };
        }
        Self {
            e_min,
            e_max,
            degenerate: false,
        }
    }

    pub fn center(&self) -> T {
        (self.e_max + self.e_min) * T::lit(0.5)
    }

    pub fn half_width(&self) -> T {
        (self.e_max - self.e_min) * T::lit(0.5)
    }
}

/// `[−B, B]` with `B = Σ_t |c_t| 2^{−#factors_t}`.
pub fn spectral_window<T: Real>(h: &TermList<T>) -> SpectralWindow<T> {
    let bound: T = h.terms().iter().map(|t| t.operator_norm()).sum();
    if h.is_empty() || bound == T::zero() {
        let eps = T::lit(1e-12);
        return SpectralWindow {
            e_min: -eps,
            e_max: eps,
            degenerate: true,
        };
    }
    SpectralWindow::new(-bound, bound)
}

/// Tighter window of a compiled operator: exact diagonal range widened by
/// a bound on the off-diagonal norm.
pub fn compiled_window<T: Real>(op: &CompiledOperator<T>) -> SpectralWindow<T> {
    let (lo, hi) = match op.diagonal() {
        Some(d) => d
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x))),
        None => (T::zero(), T::zero()),
    };
    let off = op.offdiagonal_norm_bound();
    SpectralWindow::new(lo - off, hi + off)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `exp(−i t H)`.
    RealTime,
    /// `exp(−τ H)`, unnormalised.
    ImaginaryTime,
}

/// Expansion of `exp(−i·duration·H)` or `exp(−duration·H)` applied as
/// `steps` identical chained steps.
#[derive(Clone, Debug)]
pub struct ChebyshevPlan<T: Real> {
    pub window: SpectralWindow<T>,
    pub mode: Mode,
    pub duration: T,
    pub steps: usize,
    /// Coefficients of one step; `order == coefficients.len()`.
    pub coefficients: Vec<Cplx<T>>,
}

impl<T: Real> ChebyshevPlan<T> {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn step_duration(&self) -> T {
        self.duration / T::count(self.steps)
    }
}

/// `J_0(z) … J_{n}(z)` by Miller's downward recurrence, normalised with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence<T: Real>(z: T, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if z == T::zero() {
        out[0] = T::one();
        return out;
    }
    let start = miller_start(z, n);
    let two = T::lit(2.0);
    let big = miller_rescale_threshold::<T>();
    let (mut above, mut current) = (T::zero(), T::one() / big);
    let mut norm = T::zero();
    for k in (0..=start).rev() {
        if k <= n {
            out[k] = current;
        }
        if k % 2 == 0 && k > 0 {
            norm += two * current;
        } else if k == 0 {
            norm += current;
        }
        if k == 0 {
            break;
        }
        let below = two * T::count(k) / z * current - above;
        above = current;
        current = below;
        if current.abs() > big {
            let s = T::one() / big;
            current *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `e^{−z} I_k(z)` for `k = 0 … n`, `z ≥ 0`, normalised with
/// `Ĩ_0 + 2 Σ Ĩ_k = 1`.
pub fn bessel_i_scaled_sequence<T: Real>(z: T, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if z == T::zero() {
        out[0] = T::one();
        return out;
    }
    let start = miller_start(z, n);
    let two = T::lit(2.0);
    let big = miller_rescale_threshold::<T>();
    let (mut above, mut current) = (T::zero(), T::one() / big);
    let mut norm = T::zero();
    for k in (0..=start).rev() {
        if k <= n {
            out[k] = current;
        }
        norm += if k == 0 { current } else { two * current };
        if k == 0 {
            break;
        }
        let below = two * T::count(k) / z * current + above;
        above = current;
        current = below;
        if current > big {
            let s = T::one() / big;
            current *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Rescale point of the downward recurrences, well inside the range of `T`.
fn miller_rescale_threshold<T: Real>() -> T {
    T::max_value().sqrt().sqrt()
}

fn miller_start(z: impl Real, n: usize) -> usize {
    let top = (n as f64).max(z.as_f64());
    let start = top + 30.0 + (40.0 * top).sqrt();
    let start = start.ceil() as usize;
    start + start % 2
}

/// Enough Bessel orders to see the series decay for argument `z`.
fn candidate_order(z: f64) -> usize {
    (z + 40.0 + 12.0 * z.cbrt()).ceil() as usize
}

/// Chebyshev plan for a given spectral window.
pub fn plan_for_window<T: Real>(window: SpectralWindow<T>, duration: T, mode: Mode) -> Result<ChebyshevPlan<T>> {
    if !duration.is_finite() {
        return Err(Error::config(format!("non-finite evolution duration {duration}")));
    }
    if mode == Mode::ImaginaryTime && duration < T::zero() {
        return Err(Error::config("imaginary-time evolution needs a non-negative duration"));
    }
    let half = window.half_width();
    let total_arg = (half * duration).abs().as_f64();
    let max_arg = match mode {
        Mode::RealTime => MAX_STEP_ARGUMENT,
        Mode::ImaginaryTime => MAX_IMAGINARY_STEP_ARGUMENT,
    };
    let steps = ((total_arg / max_arg).ceil() as usize).max(1);
    let step = duration / T::count(steps);
    let z = half * step;
    let center = window.center();

    let n_max = candidate_order(z.abs().as_f64());
    let (weights, prefactor): (Vec<Cplx<T>>, Cplx<T>) = match mode {
        Mode::RealTime => {
            let j = bessel_j_sequence(z.abs(), n_max);
            // J_k(−z) = (−1)^k J_k(z).
            let sign_flip = z < T::zero();
            let w = j
                .iter()
                .enumerate()
                .map(|(k, &jk)| {
                    let jk = if sign_flip && k % 2 == 1 { -jk } else { jk };
                    let factor = if k == 0 { T::one() } else { T::lit(2.0) };
                    // (−i)^k
                    let phase = match k % 4 {
                        0 => cplx(T::one(), T::zero()),
                        1 => cplx(T::zero(), -T::one()),
                        2 => cplx(-T::one(), T::zero()),
                        _ => cplx(T::zero(), T::one()),
                    };
                    phase * (factor * jk)
                })
                .collect();
            let theta = -(center * step);
            (w, cplx(theta.cos(), theta.sin()))
        }
        Mode::ImaginaryTime => {
            let i = bessel_i_scaled_sequence(z, n_max);
            let w = i
                .iter()
                .enumerate()
                .map(|(k, &ik)| {
                    let factor = if k == 0 { T::one() } else { T::lit(2.0) };
                    let sign = if k % 2 == 1 { -T::one() } else { T::one() };
                    cplx(factor * sign * ik, T::zero())
                })
                .collect();
            // exp(−τH) = e^{−τ e_min} Σ (2−δ)(−1)^k e^{−z} I_k(z) T_k(x).
            let log_pref = -(window.e_min * step);
            let pref = log_pref.exp();
            if !pref.is_finite() {
                return Err(Error::numerical(format!(
                    "imaginary-time prefactor e^{log_pref} overflows; split the duration"
                )));
            }
            (w, cplx(pref, T::zero()))
        }
    };

    let largest = weights.iter().map(|w| w.norm()).fold(T::zero(), T::max);
    let cut = T::lit(TRUNCATION) * largest;
    let last_significant = weights.iter().rposition(|w| w.norm() > cut).unwrap_or(0);
    let order = if z == T::zero() {
        1
    } else {
        (last_significant + 1 + SAFETY_TAIL).min(weights.len()).min(MAX_ORDER)
    };
    let coefficients = weights[..order].iter().map(|w| *w * prefactor).collect();
    Ok(ChebyshevPlan {
        window,
        mode,
        duration,
        steps,
        coefficients,
    })
}

/// Plan using [`spectral_window`] of `h`.
pub fn plan_evolution<T: Real>(h: &TermList<T>, duration: T, mode: Mode) -> Result<ChebyshevPlan<T>> {
    plan_for_window(spectral_window(h), duration, mode)
}

/// Apply a plan to `psi` with the operator `h` the plan was made for.
pub fn evolve<T: Real>(psi: &StateVector<T>, plan: &ChebyshevPlan<T>, h: &TermList<T>) -> Result<StateVector<T>> {
    if psi.n_sites() != h.n_sites() {
        return Err(Error::config(format!(
            "{}-site operator cannot evolve a {}-site state",
            h.n_sites(),
            psi.n_sites()
        )));
    }
    let op = CompiledOperator::new(h);
    let mut work = ChebyshevWorkspace::new(psi.dim());
    let mut amps = psi.amplitudes().to_vec();
    for step in 0..plan.steps {
        work.apply_series(&op, &plan.window, &plan.coefficients, &mut amps);
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::numerical(format!(
                "non-finite amplitudes after Chebyshev step {} of {}",
                step + 1,
                plan.steps
            )));
        }
    }
    StateVector::from_amplitudes(psi.n_sites(), amps)
}

/// Recurrence buffers, reusable across calls of equal dimension.
struct ChebyshevWorkspace<T: Real> {
    prev: Vec<Cplx<T>>,
    curr: Vec<Cplx<T>>,
    hv: Vec<Cplx<T>>,
    acc: Vec<Cplx<T>>,
}

impl<T: Real> ChebyshevWorkspace<T> {
    fn new(dim: usize) -> Self {
        Self {
            prev: vec![czero(); dim],
            curr: vec![czero(); dim],
            hv: vec![czero(); dim],
            acc: vec![czero(); dim],
        }
    }

    /// `v ← Σ_k c_k T_k((H − center)/half) v`.
    fn apply_series(
        &mut self,
        op: &CompiledOperator<T>,
        window: &SpectralWindow<T>,
        coeffs: &[Cplx<T>],
        v: &mut [Cplx<T>],
    ) {
        let center = window.center();
        let inv_half = T::one() / window.half_width();
        let two_inv = T::lit(2.0) * inv_half;

        for (a, x) in self.acc.iter_mut().zip(v.iter()) {
            *a = *x * coeffs[0];
        }
        if coeffs.len() > 1 {
            self.prev.copy_from_slice(v);
            op.apply_into(&self.prev, &mut self.hv);
            let c1 = coeffs[1];
            for ((cur, (h, p)), a) in self.curr.iter_mut().zip(self.hv.iter().zip(&self.prev)).zip(self.acc.iter_mut()) {
                *cur = (*h - p.scale(center)).scale(inv_half);
                *a = *a + *cur * c1;
            }
            for &ck in &coeffs[2..] {
                op.apply_into(&self.curr, &mut self.hv);
                // prev ← 2 x curr − prev, then swap roles.
                for (((p, h), cur), a) in self
                    .prev
                    .iter_mut()
                    .zip(&self.hv)
                    .zip(&self.curr)
                    .zip(self.acc.iter_mut())
                {
                    let next = (*h - cur.scale(center)).scale(two_inv) - *p;
                    *p = next;
                    *a = *a + next * ck;
                }
                std::mem::swap(&mut self.prev, &mut self.curr);
            }
        }
        v.copy_from_slice(&self.acc);
    }
}

/// One block of the register with the frozen sites fixed.
struct Sector<T: Real> {
    /// Global index contribution of the frozen-site configuration.
    offset: usize,
    op: CompiledOperator<T>,
    window: SpectralWindow<T>,
}

/// Reusable propagator for one Hamiltonian.
///
/// Sites on which `H` acts only through `S^z` keep their `S^z` value for
/// all times, so the register splits into independent blocks, one per
/// configuration of those frozen sites. Each block is compiled once with
/// its own (tight, rigorous) spectral window and propagated separately.
pub struct Propagator<T: Real> {
    n_sites: usize,
    active_offsets: Vec<usize>,
    sectors: Vec<Sector<T>>,
}

impl<T: Real> Propagator<T> {
    pub fn new(h: &TermList<T>) -> Result<Self> {
        let n = h.n_sites();
        let mut has_flip = vec![false; n];
        for t in h.terms() {
            for f in &t.factors {
                if f.axis != Axis::Z {
                    has_flip[f.site] = true;
                }
            }
        }
        let active: Vec<usize> = (0..n).filter(|&s| has_flip[s]).collect();
        let frozen: Vec<usize> = (0..n).filter(|&s| !has_flip[s]).collect();
        let mut local_of = vec![usize::MAX; n];
        for (j, &s) in active.iter().enumerate() {
            local_of[s] = j;
        }

        let active_offsets: Vec<usize> = (0..1usize << active.len()).map(|l| deposit_bits(l, &active)).collect();
        let half = T::lit(0.5);
        let mut sectors = Vec::with_capacity(1usize << frozen.len());
        for config in 0..1usize << frozen.len() {
            let offset = deposit_bits(config, &frozen);
            let mut reduced = TermList::new(active.len());
            for t in h.terms() {
                let mut coeff = t.coeff;
                let mut factors = Vec::with_capacity(t.factors.len());
                for f in &t.factors {
                    if has_flip[f.site] {
                        factors.push((local_of[f.site], f.axis));
                    } else if (offset >> f.site) & 1 == 1 {
                        coeff *= half;
                    } else {
                        coeff *= -half;
                    }
                }
                reduced.push(coeff, &factors)?;
            }
            let op = CompiledOperator::new(&reduced);
            let window = compiled_window(&op);
            sectors.push(Sector { offset, op, window });
        }
        Ok(Self {
            n_sites: n,
            active_offsets,
            sectors,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    /// Union of the sector windows.
    pub fn window(&self) -> SpectralWindow<T> {
        let lo = self.sectors.iter().map(|s| s.window.e_min).fold(T::infinity(), T::min);
        let hi = self.sectors.iter().map(|s| s.window.e_max).fold(T::neg_infinity(), T::max);
        SpectralWindow::new(lo, hi)
    }

    /// `exp(−i·duration·H) psi` or `exp(−duration·H) psi`.
    pub fn propagate(&self, psi: &StateVector<T>, duration: T, mode: Mode) -> Result<StateVector<T>> {
        if psi.n_sites() != self.n_sites {
            return Err(Error::config(format!(
                "propagator for {} sites applied to a {}-site state",
                self.n_sites,
                psi.n_sites()
            )));
        }
        let block = self.active_offsets.len();
        let mut work = ChebyshevWorkspace::new(block);
        let mut sub = vec![czero::<T>(); block];
        let mut out = psi.clone();
        for (idx, sector) in self.sectors.iter().enumerate() {
            let amps = out.amplitudes_mut();
            let mut any = false;
            for (x, &o) in sub.iter_mut().zip(&self.active_offsets) {
                *x = amps[sector.offset | o];
                any |= x.re != T::zero() || x.im != T::zero();
            }
            if !any {
                continue;
            }
            let plan = plan_for_window(sector.window, duration, mode)?;
            for step in 0..plan.steps {
                work.apply_series(&sector.op, &plan.window, &plan.coefficients, &mut sub);
                if sub.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
                    return Err(Error::numerical(format!(
                        "non-finite amplitudes in sector {idx} after Chebyshev step {} of {}",
                        step + 1,
                        plan.steps
                    )));
                }
            }
            for (x, &o) in sub.iter().zip(&self.active_offsets) {
                amps[sector.offset | o] = *x;
            }
        }
        Ok(out)
    }
}
