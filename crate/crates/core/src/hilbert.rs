//! Basis conventions, state vectors, spin-operator term lists and the
//! matrix-vector kernel everything else is built on.
//!
//! Site `k` is bit `k` of a basis index; a set bit is `|↑⟩` (`S^z = +1/2`).
//! Spin operators carry their factor 1/2 inside the kernel, so a term
//! `c · S_i^a S_j^b` is stored with coefficient `c` and two factors.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{czero, i_pow, Cplx, Real};

/// Bit value of `|↑⟩` in a basis index.
pub const UP: usize = 1;
/// Bit value of `|↓⟩` in a basis index.
pub const DOWN: usize = 0;

/// Is site `site` up in basis state `index`?
#[inline]
pub fn site_is_up(index: usize, site: usize) -> bool {
    (index >> site) & 1 == UP
}

/// Dense amplitude vector over the `2^n` computational basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n_sites: usize,
    amps: Vec<Cplx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            n_sites,
            amps: vec![czero(); 1usize << n_sites],
        }
    }

    /// The computational basis state with the given bit pattern.
    pub fn basis(n_sites: usize, index: usize) -> Self {
        let mut v = Self::zeros(n_sites);
        v.amps[index] = Cplx::new(T::one(), T::zero());
        v
    }

    pub fn from_amplitudes(n_sites: usize, amps: Vec<Cplx<T>>) -> Result<Self> {
        if amps.len() != 1usize << n_sites {
            return Err(Error::config(format!(
                "{} amplitudes cannot describe {n_sites} sites",
                amps.len()
            )));
        }
        Ok(Self { n_sites, amps })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Cplx<T>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Cplx<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, factor: Cplx<T>) {
        for a in &mut self.amps {
            *a = *a * factor;
        }
    }

    /// Rescale to unit norm, returning the norm before rescaling.
    pub fn normalize(&mut self) -> Result<T> {
        let norm = self.norm();
        if !norm.is_finite() || norm <= T::min_positive_value() {
            return Err(Error::numerical(format!(
                "cannot normalise a state with norm {norm}"
            )));
        }
        let inv = T::one() / norm;
        for a in &mut self.amps {
            *a = a.scale(inv);
        }
        Ok(norm)
    }

    pub fn all_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &Self) -> T {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// `|⟨self|other⟩|²` for normalised states.
    pub fn fidelity(&self, other: &Self) -> T {
        inner_product(self, other).map(|z| z.norm_sqr()).unwrap_or(T::nan())
    }
}

/// `⟨phi|psi⟩`, conjugating `phi`.
pub fn inner_product<T: Real>(phi: &StateVector<T>, psi: &StateVector<T>) -> Result<Cplx<T>> {
    if phi.n_sites != psi.n_sites {
        return Err(Error::config(format!(
            "inner product of {}-site and {}-site states",
            phi.n_sites, psi.n_sites
        )));
    }
    Ok(phi
        .amps
        .iter()
        .zip(&psi.amps)
        .map(|(a, b)| a.conj() * *b)
        .sum())
}

/// Product state `parts[0] ⊗ parts[1] ⊗ …` where part `p` occupies the
/// global sites `blocks[p]` (its local site `j` is global site `blocks[p][j]`).
pub fn embed_product<T: Real>(
    parts: &[&StateVector<T>],
    blocks: &[Vec<usize>],
    n_total: usize,
) -> Result<StateVector<T>> {
    if parts.len() != blocks.len() {
        return Err(Error::config("one site block per product factor required"));
    }
    let mut seen = vec![false; n_total];
    for (part, block) in parts.iter().zip(blocks) {
        if part.n_sites() != block.len() {
            return Err(Error::config(format!(
                "factor with {} sites assigned a block of {} sites",
                part.n_sites(),
                block.len()
            )));
        }
        for &s in block {
            if s >= n_total || seen[s] {
                return Err(Error::config(format!("site {s} out of range or reused")));
            }
            seen[s] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::config("product factors do not cover every site"));
    }

    let mut out = StateVector::<T>::zeros(n_total);
    out.amps[0] = Cplx::new(T::one(), T::zero());
    // Fill progressively: after p factors, `filled` holds the nonzero
    // (index, amplitude) pairs of the partial product.
    let mut filled: Vec<(usize, Cplx<T>)> = vec![(0, Cplx::new(T::one(), T::zero()))];
    for (part, block) in parts.iter().zip(blocks) {
        let spread: Vec<usize> = (0..part.dim()).map(|local| deposit_bits(local, block)).collect();
        let mut next = Vec::with_capacity(filled.len() * part.dim());
        for &(idx, amp) in &filled {
            for (local, a) in part.amplitudes().iter().enumerate() {
                if a.re != T::zero() || a.im != T::zero() {
                    next.push((idx | spread[local], amp * *a));
                }
            }
        }
        filled = next;
    }
    out.amps[0] = czero();
    for (idx, amp) in filled {
        out.amps[idx] = amp;
    }
    Ok(out)
}

/// Scatter the low bits of `local` onto the global bit positions `sites`.
#[inline]
pub fn deposit_bits(local: usize, sites: &[usize]) -> usize {
    sites
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &s)| acc | (((local >> j) & 1) << s))
}

/// Gather the global bits at `sites` into a compact local index.
#[inline]
pub fn extract_bits(global: usize, sites: &[usize]) -> usize {
    sites
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &s)| acc | (((global >> s) & 1) << j))
}

/// Spin component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub site: usize,
    pub axis: Axis,
}

/// `coeff · Π S_site^axis` over distinct sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Term<T: Real> {
    pub coeff: T,
    pub factors: Vec<Factor>,
}

impl<T: Real> Term<T> {
    /// Operator norm: each spin-1/2 factor has norm 1/2.
    pub fn operator_norm(&self) -> T {
        self.coeff.abs() * T::lit(0.5).powi(self.factors.len() as i32)
    }

    pub fn is_diagonal(&self) -> bool {
        self.factors.iter().all(|f| f.axis == Axis::Z)
    }
}

/// A Hermitian operator written as a sum of weighted products of
/// single-site spin operators.
#[derive(Clone, Debug, PartialEq)]
pub struct TermList<T: Real> {
    n_sites: usize,
    terms: Vec<Term<T>>,
}

impl<T: Real> TermList<T> {
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Append `coeff · Π S_site^axis`.
    pub fn push(&mut self, coeff: T, factors: &[(usize, Axis)]) -> Result<()> {
        let mut fs: Vec<Factor> = Vec::with_capacity(factors.len());
        for &(site, axis) in factors {
            if site >= self.n_sites {
                return Err(Error::config(format!(
                    "site {site} outside a {}-site operator",
                    self.n_sites
                )));
            }
            if fs.iter().any(|f| f.site == site) {
                return Err(Error::config(format!("site {site} repeated within one term")));
            }
            fs.push(Factor { site, axis });
        }
        if !coeff.is_finite() {
            return Err(Error::config("non-finite coefficient"));
        }
        self.terms.push(Term { coeff, factors: fs });
        Ok(())
    }

    /// `coeff · S_i · S_j`.
    pub fn push_exchange(&mut self, coeff: T, i: usize, j: usize) -> Result<()> {
        for axis in Axis::ALL {
            self.push(coeff, &[(i, axis), (j, axis)])?;
        }
        Ok(())
    }

    /// Concatenate the terms of `other` (same site count).
    pub fn extend(&mut self, other: &TermList<T>) -> Result<()> {
        if other.n_sites != self.n_sites {
            return Err(Error::config(format!(
                "cannot add a {}-site operator to a {}-site operator",
                other.n_sites, self.n_sites
            )));
        }
        self.terms.extend(other.terms.iter().cloned());
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n_sites: self.n_sites,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    /// Re-index onto a larger register: local site `j` becomes `sites[j]`.
    pub fn embedded(&self, sites: &[usize], n_total: usize) -> Result<Self> {
        if sites.len() != self.n_sites {
            return Err(Error::config("embedding needs one target per site"));
        }
        let mut out = TermList::new(n_total);
        for t in &self.terms {
            let fs: Vec<(usize, Axis)> = t.factors.iter().map(|f| (sites[f.site], f.axis)).collect();
            out.push(t.coeff, &fs)?;
        }
        Ok(out)
    }

    /// Sites appearing in at least one term.
    pub fn support(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_sites];
        for t in &self.terms {
            for f in &t.factors {
                used[f.site] = true;
            }
        }
        (0..self.n_sites).filter(|&s| used[s]).collect()
    }

    /// Dense matrix through the compiled kernel (small registers only).
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let op = CompiledOperator::new(self);
        let dim = 1usize << self.n_sites;
        let mut m = DenseMatrix::zeros(dim);
        for s in 0..dim {
            op.for_each_in_column(s, |row, amp| m[(row, s)] = m[(row, s)] + amp);
        }
        m
    }
}

/// Apply `h` to `psi`, out of place.
pub fn apply_term_list<T: Real>(h: &TermList<T>, psi: &StateVector<T>) -> Result<StateVector<T>> {
    if h.n_sites() != psi.n_sites() {
        return Err(Error::config(format!(
            "{}-site operator applied to {}-site state",
            h.n_sites(),
            psi.n_sites()
        )));
    }
    let op = CompiledOperator::new(h);
    let mut out = StateVector::zeros(psi.n_sites());
    op.apply_into(psi.amplitudes(), out.amplitudes_mut());
    Ok(out)
}

/// `⟨psi|H|psi⟩` (real for Hermitian `H`).
pub fn expectation<T: Real>(h: &TermList<T>, psi: &StateVector<T>) -> Result<T> {
    let hpsi = apply_term_list(h, psi)?;
    Ok(inner_product(psi, &hpsi)?.re)
}

/// Off-diagonal part sharing one flip pattern.
#[derive(Clone, Debug)]
struct FlipGroup<T: Real> {
    flip: usize,
    /// `(sign_mask, amplitude)`: a source state `u` contributes
    /// `amplitude · (−1)^{popcount(u & sign_mask)}`.
    parts: Vec<(usize, Cplx<T>)>,
    /// Set when every sign mask lies inside a flip of one or two sites:
    /// the coefficient then depends only on the flipped bits of `u`.
    local: Option<LocalFlip<T>>,
}

/// `table[p]` is the coefficient for source pattern `p`, where bit 0 of
/// `p` is the lower flipped site of `u` and bit 1 the upper one.
#[derive(Clone, Debug)]
struct LocalFlip<T: Real> {
    low: usize,
    high: Option<usize>,
    table: [Cplx<T>; 4],
}

impl<T: Real> FlipGroup<T> {
    fn coefficient(&self, u: usize) -> Cplx<T> {
        let mut c = czero::<T>();
        for &(mask, amp) in &self.parts {
            if (u & mask).count_ones() & 1 == 1 {
                c = c - amp;
            } else {
                c = c + amp;
            }
        }
        c
    }

    fn with_local(flip: usize, parts: Vec<(usize, Cplx<T>)>) -> Self {
        let mut g = Self { flip, parts, local: None };
        let inside = g.parts.iter().all(|(m, _)| m & !flip == 0);
        let bits: Vec<usize> = (0..usize::BITS as usize).filter(|b| (flip >> b) & 1 == 1).collect();
        if inside && bits.len() <= 2 {
            let low = bits[0];
            let high = bits.get(1).copied();
            let mut table = [czero::<T>(); 4];
            for (p, slot) in table.iter_mut().enumerate() {
                let mut u = (p & 1) << low;
                if let Some(h) = high {
                    u |= ((p >> 1) & 1) << h;
                } else if p > 1 {
                    continue;
                }
                *slot = g.coefficient(u);
            }
            g.local = Some(LocalFlip { low, high, table });
        }
        g
    }
}

/// `out += c · src`, with a cheaper path for real `c`.
#[inline]
fn axpy<T: Real>(out: &mut [Cplx<T>], src: &[Cplx<T>], c: Cplx<T>) {
    if c.im == T::zero() {
        if c.re == T::zero() {
            return;
        }
        let r = c.re;
        for (o, x) in out.iter_mut().zip(src) {
            o.re += r * x.re;
            o.im += r * x.im;
        }
    } else {
        for (o, x) in out.iter_mut().zip(src) {
            *o = *o + *x * c;
        }
    }
}

/// A `TermList` lowered to a dense diagonal plus grouped bit-flip terms.
///
/// The diagonal is tabulated once (`2^n` reals); every term with x/y
/// factors becomes a flip mask with per-state signs, and terms sharing a
/// flip mask are merged so each group costs one sweep over the vector.
#[derive(Clone, Debug)]
pub struct CompiledOperator<T: Real> {
    n_sites: usize,
    diag: Option<Vec<T>>,
    flips: Vec<FlipGroup<T>>,
    rows: Option<RowKernel<T>>,
    offdiag_bound: T,
}

/// Everything that can be applied row by row: the diagonal, flips inside
/// a row (`intra`, as `(target, source, coefficient)` within the row) and
/// flips that move whole rows (`groups`).
#[derive(Clone, Debug)]
struct RowKernel<T: Real> {
    intra: Vec<(usize, usize, Cplx<T>)>,
    groups: Vec<RowGroup<T>>,
    real: bool,
}

/// Sites below this index form the contiguous rows of the row kernel.
const ROW_BITS: usize = 4;
const ROW: usize = 1 << ROW_BITS;

/// A local flip that leaves the row-internal sites alone, in row units.
#[derive(Clone, Debug)]
struct RowGroup<T: Real> {
    flip: usize,
    low: usize,
    high: usize,
    table: [Cplx<T>; 4],
}

impl<T: Real> CompiledOperator<T> {
    pub fn new(h: &TermList<T>) -> Self {
        let n = h.n_sites();
        let dim = 1usize << n;
        let half = T::lit(0.5);
        let mut diag_terms: Vec<(usize, T)> = Vec::new();
        let mut groups: BTreeMap<usize, BTreeMap<usize, Cplx<T>>> = BTreeMap::new();

        for t in h.terms() {
            let mut flip = 0usize;
            let mut sign_mask = 0usize;
            let mut n_y = 0usize;
            for f in &t.factors {
                let bit = 1usize << f.site;
                match f.axis {
                    Axis::X => flip |= bit,
                    Axis::Y => {
                        flip |= bit;
                        sign_mask |= bit;
                        n_y += 1;
                    }
                    Axis::Z => sign_mask |= bit,
                }
            }
            // S^y|↑⟩ = (i/2)|↓⟩ and S^y|↓⟩ = (−i/2)|↑⟩; S^z|↓⟩ = −½|↓⟩.
            // A down bit in the sign mask contributes −1, i.e. the sign is
            // (−1)^{|mask|} · (−1)^{popcount(u & mask)}.
            let magnitude = t.coeff * half.powi(t.factors.len() as i32);
            let parity = if sign_mask.count_ones() % 2 == 1 { -T::one() } else { T::one() };
            let amp = i_pow::<T>(n_y) * (magnitude * parity);
            if flip == 0 {
                diag_terms.push((sign_mask, amp.re));
            } else {
                let slot = groups.entry(flip).or_default().entry(sign_mask).or_insert(czero());
                *slot = *slot + amp;
            }
        }

        let diag = if diag_terms.is_empty() {
            None
        } else {
            let mut d = vec![T::zero(); dim];
            for (mask, a) in diag_terms {
                if mask == 0 {
                    for x in d.iter_mut() {
                        *x += a;
                    }
                } else {
                    for (s, x) in d.iter_mut().enumerate() {
                        if (s & mask).count_ones() & 1 == 1 {
                            *x -= a;
                        } else {
                            *x += a;
                        }
                    }
                }
            }
            Some(d)
        };

        let all_flips = groups
            .into_iter()
            .map(|(flip, parts)| {
                let parts = parts
                    .into_iter()
                    .filter(|(_, a)| a.re != T::zero() || a.im != T::zero())
                    .collect();
                FlipGroup::with_local(flip, parts)
            })
            .filter(|g: &FlipGroup<T>| !g.parts.is_empty());

        let all_flips: Vec<FlipGroup<T>> = all_flips.collect();
        let offdiag_bound = all_flips
            .iter()
            .map(|g| match &g.local {
                Some(l) => l.table.iter().map(|c| c.norm()).fold(T::zero(), T::max),
                None => g.parts.iter().map(|(_, a)| a.norm()).sum(),
            })
            .sum();

        if n <= ROW_BITS {
            return Self {
                n_sites: n,
                diag,
                flips: all_flips,
                rows: None,
                offdiag_bound,
            };
        }

        let mut flips = Vec::new();
        let mut groups = Vec::new();
        let mut intra_dense = vec![czero::<T>(); ROW * ROW];
        for g in all_flips {
            let Some(l) = &g.local else {
                flips.push(g);
                continue;
            };
            let high = l.high.unwrap_or(l.low);
            if l.low >= ROW_BITS {
                // A single flipped site reads its bit twice: patterns 0 and 3.
                let table = match l.high {
                    Some(_) => l.table,
                    None => [l.table[0], czero(), czero(), l.table[1]],
                };
                groups.push(RowGroup {
                    flip: g.flip >> ROW_BITS,
                    low: l.low - ROW_BITS,
                    high: high - ROW_BITS,
                    table,
                });
            } else if high < ROW_BITS {
                for target in 0..ROW {
                    let source = target ^ g.flip;
                    intra_dense[target * ROW + source] = intra_dense[target * ROW + source] + g.coefficient(source);
                }
            } else {
                flips.push(g);
            }
        }
        let intra: Vec<(usize, usize, Cplx<T>)> = intra_dense
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.re != T::zero() || c.im != T::zero())
            .map(|(k, c)| (k / ROW, k % ROW, c))
            .collect();
        let real = groups.iter().all(|r| r.table.iter().all(|c| c.im == T::zero()))
            && intra.iter().all(|(_, _, c)| c.im == T::zero());

        Self {
            n_sites: n,
            diag,
            flips,
            rows: Some(RowKernel { intra, groups, real }),
            offdiag_bound,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Tabulated diagonal, if the operator has diagonal terms.
    pub fn diagonal(&self) -> Option<&[T]> {
        self.diag.as_deref()
    }

    /// `Σ_groups max_pattern |coefficient|`, a bound on the off-diagonal norm.
    pub fn offdiagonal_norm_bound(&self) -> T {
        self.offdiag_bound
    }

    /// `out = H · psi`.
    pub fn apply_into(&self, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        debug_assert_eq!(psi.len(), 1usize << self.n_sites);
        debug_assert_eq!(out.len(), psi.len());
        match &self.rows {
            Some(kernel) => apply_rows(kernel, self.diag.as_deref(), psi, out),
            None => match &self.diag {
                Some(d) => {
                    for ((o, p), dv) in out.iter_mut().zip(psi).zip(d) {
                        *o = p.scale(*dv);
                    }
                }
                None => out.iter_mut().for_each(|o| *o = czero()),
            },
        }
        for g in &self.flips {
            match &g.local {
                Some(local) => apply_local(local, psi, out),
                None => apply_generic(g, psi, out),
            }
        }
    }

    /// Visit the nonzero entries `(row, H[row, col])` of one column.
    pub fn for_each_in_column(&self, col: usize, mut visit: impl FnMut(usize, Cplx<T>)) {
        if let Some(d) = &self.diag {
            visit(col, Cplx::new(d[col], T::zero()));
        }
        for g in &self.flips {
            visit(col ^ g.flip, g.coefficient(col));
        }
        if let Some(kernel) = &self.rows {
            let (r, k) = (col >> ROW_BITS, col & (ROW - 1));
            for &(target, source, c) in &kernel.intra {
                if source == k {
                    visit((r << ROW_BITS) | target, c);
                }
            }
            for g in &kernel.groups {
                let pattern = ((r >> g.low) & 1) | (((r >> g.high) & 1) << 1);
                visit(col ^ (g.flip << ROW_BITS), g.table[pattern]);
            }
        }
    }
}

fn apply_generic<T: Real>(g: &FlipGroup<T>, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
    let flip = g.flip;
    if let [(mask, amp)] = g.parts.as_slice() {
        let (mask, amp) = (*mask, *amp);
        for (s, o) in out.iter_mut().enumerate() {
            let u = s ^ flip;
            let v = psi[u] * amp;
            if (u & mask).count_ones() & 1 == 1 {
                *o = *o - v;
            } else {
                *o = *o + v;
            }
        }
    } else {
        for (s, o) in out.iter_mut().enumerate() {
            let u = s ^ flip;
            *o = *o + psi[u] * g.coefficient(u);
        }
    }
}

/// Row-blocked `out = (D + intra + groups) psi`: each output row of
/// [`ROW`] amplitudes stays in registers while every source row is added.
fn apply_rows<T: Real>(kernel: &RowKernel<T>, diag: Option<&[T]>, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { apply_rows_avx2(kernel, diag, psi, out) };
            return;
        }
    }
    apply_rows_body::<T, false>(kernel, diag, psi, out);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn apply_rows_avx2<T: Real>(kernel: &RowKernel<T>, diag: Option<&[T]>, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
    apply_rows_body::<T, true>(kernel, diag, psi, out);
}

/// `FUSED` selects fused multiply-add, used only where the CPU has it.
#[inline(always)]
fn apply_rows_body<T: Real, const FUSED: bool>(
    kernel: &RowKernel<T>,
    diag: Option<&[T]>,
    psi: &[Cplx<T>],
    out: &mut [Cplx<T>],
) {
    for (r, orow) in out.chunks_exact_mut(ROW).enumerate() {
        let (mut re, mut im) = row_local(kernel, diag, psi, r);
        for g in &kernel.groups {
            let src = r ^ g.flip;
            let pattern = ((src >> g.low) & 1) | (((src >> g.high) & 1) << 1);
            let c = g.table[pattern];
            let y = &psi[src * ROW..src * ROW + ROW];
            if kernel.real {
                let cr = c.re;
                if FUSED {
                    for k in 0..ROW {
                        re[k] = y[k].re.mul_add(cr, re[k]);
                        im[k] = y[k].im.mul_add(cr, im[k]);
                    }
                } else {
                    for k in 0..ROW {
                        re[k] += cr * y[k].re;
                        im[k] += cr * y[k].im;
                    }
                }
            } else {
                for k in 0..ROW {
                    re[k] += c.re * y[k].re - c.im * y[k].im;
                    im[k] += c.re * y[k].im + c.im * y[k].re;
                }
            }
        }
        for (k, o) in orow.iter_mut().enumerate() {
            o.re = re[k];
            o.im = im[k];
        }
    }
}

/// Diagonal and intra-row part of one output row. Kept out of line so the
/// data-dependent indexing here does not pin the caller's accumulators to
/// memory.
#[inline(never)]
fn row_local<T: Real>(kernel: &RowKernel<T>, diag: Option<&[T]>, psi: &[Cplx<T>], r: usize) -> ([T; ROW], [T; ROW]) {
    let x = &psi[r * ROW..r * ROW + ROW];
    let mut re = [T::zero(); ROW];
    let mut im = [T::zero(); ROW];
    if let Some(d) = diag {
        let d = &d[r * ROW..r * ROW + ROW];
        for k in 0..ROW {
            re[k] = d[k] * x[k].re;
            im[k] = d[k] * x[k].im;
        }
    }
    for &(t, s, c) in &kernel.intra {
        re[t] += c.re * x[s].re - c.im * x[s].im;
        im[t] += c.re * x[s].im + c.im * x[s].re;
    }
    (re, im)
}

/// Flip of one or two sites, walked as contiguous runs of equal pattern.
fn apply_local<T: Real>(local: &LocalFlip<T>, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
    let t = &local.table;
    let p = 1usize << local.low;
    match local.high {
        None => {
            for (o, x) in out.chunks_exact_mut(2 * p).zip(psi.chunks_exact(2 * p)) {
                let (o0, o1) = o.split_at_mut(p);
                let (x0, x1) = x.split_at(p);
                axpy(o0, x1, t[1]);
                axpy(o1, x0, t[0]);
            }
        }
        Some(high) => {
            let q = 1usize << high;
            for (oq, xq) in out.chunks_exact_mut(2 * q).zip(psi.chunks_exact(2 * q)) {
                let (oq0, oq1) = oq.split_at_mut(q);
                let (xq0, xq1) = xq.split_at(q);
                for (((o_0, o_1), x_0), x_1) in oq0
                    .chunks_exact_mut(2 * p)
                    .zip(oq1.chunks_exact_mut(2 * p))
                    .zip(xq0.chunks_exact(2 * p))
                    .zip(xq1.chunks_exact(2 * p))
                {
                    let (o00, o01) = o_0.split_at_mut(p);
                    let (o10, o11) = o_1.split_at_mut(p);
                    let (x00, x01) = x_0.split_at(p);
                    let (x10, x11) = x_1.split_at(p);
                    // Pattern bit 0 is the low site, bit 1 the high site.
                    axpy(o00, x11, t[3]);
                    axpy(o11, x00, t[0]);
                    axpy(o01, x10, t[2]);
                    axpy(o10, x01, t[1]);
                }
            }
        }
    }
}
