//! Builders for the spin Hamiltonians of both decoherence models and the
//! comparison Hamiltonians (Lieb–Mattis, staggered field, effective
//! branch Hamiltonians), plus the seeded coupling draws they consume.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ModelKind};
use crate::hilbert::{embed_product, Axis, StateVector, TermList};
use crate::scalar::Real;
use crate::streams::{rng_from_seed, SeedStreams, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Open,
    Ring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    /// Central system.
    Cs,
    /// Strongly coupled bath fragment (the whole bath in model A).
    E1,
    /// Weakly coupled thermal reservoir fragment.
    E2,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Cs => "cs",
            Role::E1 => "e1",
            Role::E2 => "e2",
        })
    }
}

/// Partition of the register into central system and bath fragments.
///
/// Sites are laid out contiguously: CS first (site 0 is the measured
/// spin), then E1, then E2.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemLayout {
    roles: Vec<Role>,
    measured_site: usize,
    cs_geometry: Geometry,
}

impl SystemLayout {
    pub fn contiguous(n_cs: usize, n_e1: usize, n_e2: usize, cs_geometry: Geometry) -> Result<Self> {
        if n_cs == 0 {
            return Err(Error::config("the central system needs at least one site"));
        }
        let mut roles = vec![Role::Cs; n_cs];
        roles.extend(std::iter::repeat(Role::E1).take(n_e1));
        roles.extend(std::iter::repeat(Role::E2).take(n_e2));
        Ok(Self {
            roles,
            measured_site: 0,
            cs_geometry,
        })
    }

    pub fn n_total(&self) -> usize {
        self.roles.len()
    }

    pub fn role_of(&self, site: usize) -> Role {
        self.roles[site]
    }

    pub fn measured_site(&self) -> usize {
        self.measured_site
    }

    pub fn cs_geometry(&self) -> Geometry {
        self.cs_geometry
    }

    pub fn sites(&self, role: Role) -> Vec<usize> {
        (0..self.roles.len()).filter(|&s| self.roles[s] == role).collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    /// Site blocks of the non-empty roles, in role order.
    pub fn blocks(&self) -> Vec<(Role, Vec<usize>)> {
        [Role::Cs, Role::E1, Role::E2]
            .into_iter()
            .map(|r| (r, self.sites(r)))
            .filter(|(_, s)| !s.is_empty())
            .collect()
    }
}

/// `parts[k]` placed on the k-th non-empty role block of `layout`.
pub fn tensor_product<T: Real>(parts: &[&StateVector<T>], layout: &SystemLayout) -> Result<StateVector<T>> {
    let blocks: Vec<Vec<usize>> = layout.blocks().into_iter().map(|(_, s)| s).collect();
    if parts.len() != blocks.len() {
        return Err(Error::config(format!(
            "{} product factors for {} occupied roles",
            parts.len(),
            blocks.len()
        )));
    }
    embed_product(parts, &blocks, layout.n_total())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrawKind {
    /// Uniform on `[0, 1)`.
    Uniform01,
    /// `±magnitude` with equal probability.
    Binary,
    /// Uniform on `[−magnitude, magnitude]`.
    SymUniform,
}

impl fmt::Display for DrawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrawKind::Uniform01 => "uniform01",
            DrawKind::Binary => "binary",
            DrawKind::SymUniform => "sym_uniform",
        })
    }
}

/// One recorded family of random couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingDraw<T: Real> {
    pub label: String,
    pub kind: DrawKind,
    pub magnitude: T,
    pub values: Vec<T>,
    pub seed_used: u64,
}

impl<T: Real> CouplingDraw<T> {
    pub fn generate(label: impl Into<String>, kind: DrawKind, count: usize, magnitude: T, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let values = Self::draw_values(&mut rng, kind, count, magnitude);
        Self {
            label: label.into(),
            kind,
            magnitude,
            values,
            seed_used: seed,
        }
    }

    fn draw_values(rng: &mut impl Rng, kind: DrawKind, count: usize, magnitude: T) -> Vec<T> {
        (0..count)
            .map(|_| match kind {
                DrawKind::Uniform01 => T::lit(rng.gen::<f64>()),
                DrawKind::Binary => {
                    if rng.gen_bool(0.5) {
                        magnitude
                    } else {
                        -magnitude
                    }
                }
                DrawKind::SymUniform => magnitude * T::lit(rng.gen_range(-1.0..=1.0)),
            })
            .collect()
    }

    /// Fixed values (tests, hand-built models).
    pub fn fixed(label: impl Into<String>, kind: DrawKind, magnitude: T, values: Vec<T>) -> Self {
        Self {
            label: label.into(),
            kind,
            magnitude,
            values,
            seed_used: 0,
        }
    }
}

/// `J Σ S_i·S_{i+1}` on `n` sites; a ring adds the bond `(n−1, 0)`.
pub fn build_heisenberg<T: Real>(n: usize, j: T, geometry: Geometry) -> Result<TermList<T>> {
    if n < 2 {
        return Err(Error::config(format!("a Heisenberg chain needs at least 2 sites, got {n}")));
    }
    let mut h = TermList::new(n);
    for i in 0..n - 1 {
        h.push_exchange(j, i, i + 1)?;
    }
    // Two sites on a ring would double the single bond.
    if geometry == Geometry::Ring && n > 2 {
        h.push_exchange(j, n - 1, 0)?;
    }
    Ok(h)
}

/// `scale · Σ_k r_k S_center^z S_{targets[k]}^z`.
pub fn build_star_coupling<T: Real>(
    n_sites: usize,
    center: usize,
    targets: &[usize],
    strengths: &CouplingDraw<T>,
    scale: T,
) -> Result<TermList<T>> {
    if targets.contains(&center) {
        return Err(Error::config(format!("star centre {center} is also a target")));
    }
    if strengths.values.len() != targets.len() {
        return Err(Error::config(format!(
            "{} coupling values for {} targets",
            strengths.values.len(),
            targets.len()
        )));
    }
    let mut h = TermList::new(n_sites);
    for (&t, &r) in targets.iter().zip(&strengths.values) {
        if r != T::zero() {
            h.push(scale * r, &[(center, Axis::Z), (t, Axis::Z)])?;
        }
    }
    Ok(h)
}

/// Number of couplings a spin glass on `m` sites consumes.
pub fn spin_glass_coupling_count(m: usize) -> usize {
    3 * m * m.saturating_sub(1) / 2
}

/// `Σ_a Σ_{k<l} K^a_{kl} S_k^a S_l^a`, one term per unordered pair and
/// axis, couplings uniform on `[−K, K]`. Values are drawn axis-major
/// (all x pairs, then y, then z), pairs in lexicographic order.
pub fn build_spin_glass<T: Real>(
    n_sites: usize,
    sites: &[usize],
    k: T,
    seed: u64,
) -> Result<(TermList<T>, CouplingDraw<T>)> {
    if sites.len() < 2 {
        return Err(Error::config("a spin glass needs at least two sites"));
    }
    let m = sites.len();
    let draw = CouplingDraw::generate("spin_glass", DrawKind::SymUniform, spin_glass_coupling_count(m), k, seed);
    let mut h = TermList::new(n_sites);
    let mut values = draw.values.iter();
    for axis in Axis::ALL {
        for a in 0..m {
            for b in a + 1..m {
                let c = *values.next().expect("coupling count");
                h.push(c, &[(sites[a], axis), (sites[b], axis)])?;
            }
        }
    }
    Ok((h, draw))
}

/// `coupling · S_A·S_B` with `S_A = Σ_{a∈A} S_a`, expanded pairwise.
pub fn build_sublattice_exchange<T: Real>(
    n_sites: usize,
    a_sites: &[usize],
    b_sites: &[usize],
    coupling: T,
) -> Result<TermList<T>> {
    let mut h = TermList::new(n_sites);
    for &a in a_sites {
        for &b in b_sites {
            if a == b {
                return Err(Error::config(format!("site {a} on both sublattices")));
            }
            h.push_exchange(coupling, a, b)?;
        }
    }
    Ok(h)
}

/// Sublattice A (even 0-based index, i.e. the odd sites counted from 1).
pub fn sublattice_a(n: usize) -> Vec<usize> {
    (0..n).step_by(2).collect()
}

pub fn sublattice_b(n: usize) -> Vec<usize> {
    (1..n).step_by(2).collect()
}

/// `(J'/N) S_A·S_B` on `N` sites.
pub fn build_lieb_mattis<T: Real>(n: usize, j_prime: T) -> Result<TermList<T>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::config(format!("Lieb-Mattis model needs an even site count, got {n}")));
    }
    build_sublattice_exchange(n, &sublattice_a(n), &sublattice_b(n), j_prime / T::count(n))
}

/// `+1` on sublattice A, `−1` on sublattice B, for every site.
pub fn neel_signs(n: usize) -> BTreeMap<usize, i8> {
    (0..n).map(|s| (s, if s % 2 == 0 { 1 } else { -1 })).collect()
}

/// `H + Σ_i sign_i · h · S_i^z`. Every site in `H`'s support needs a sign.
pub fn add_staggered_field<T: Real>(h: &TermList<T>, field: T, signs: &BTreeMap<usize, i8>) -> Result<TermList<T>> {
    for s in h.support() {
        if !signs.contains_key(&s) {
            return Err(Error::config(format!("no sublattice sign for site {s}")));
        }
    }
    let mut out = h.clone();
    if field == T::zero() {
        return Ok(out);
    }
    for (&site, &sign) in signs {
        let sign = match sign {
            1 => T::one(),
            -1 => -T::one(),
            other => return Err(Error::config(format!("sublattice sign {other} is not ±1"))),
        };
        out.push(sign * field, &[(site, Axis::Z)])?;
    }
    Ok(out)
}

/// Branch of the pinned measured spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Up,
    Down,
}

/// Effective Hamiltonian of the remaining `n_s − 1` central-system sites
/// once the measured spin (site 0) is pinned:
/// `(J'/N) S_{A'}·S_B ∓ h_st (S_{A'}^z − S_B^z)` with `h_st = J'/(4N)`
/// and `J'/N = j_s`. Local site `k` is central-system site `k + 1`.
pub fn build_effective_branch<T: Real>(n_s: usize, j_s: T, branch: Branch) -> Result<TermList<T>> {
    if n_s < 2 || n_s % 2 != 0 {
        return Err(Error::config(format!("effective branch Hamiltonian needs even n_s ≥ 2, got {n_s}")));
    }
    let m = n_s - 1;
    let a_reduced: Vec<usize> = (0..m).filter(|k| (k + 1) % 2 == 0).collect();
    let b: Vec<usize> = (0..m).filter(|k| (k + 1) % 2 == 1).collect();
    let exchange = build_sublattice_exchange(m, &a_reduced, &b, j_s)?;
    let h_st = j_s / T::lit(4.0);
    // Up branch: −h_st (S_{A'}^z − S_B^z), so A' gets −1 and B gets +1.
    let a_sign: i8 = match branch {
        Branch::Up => -1,
        Branch::Down => 1,
    };
    let mut signs = BTreeMap::new();
    for &a in &a_reduced {
        signs.insert(a, a_sign);
    }
    for &s in &b {
        signs.insert(s, -a_sign);
    }
    add_staggered_field(&exchange, h_st, &signs)
}

/// Ground-state energy bounds `(lower, upper)` for a spin-1/2 Heisenberg
/// antiferromagnet with `n` sites and coordination number `z`.
pub fn gs_energy_bounds(n: usize, j: f64, z: f64) -> (f64, f64) {
    let s = 0.5;
    let upper = -0.5 * n as f64 * j * z * s * s;
    (upper * (1.0 + 1.0 / (z * s)), upper)
}

/// The Hamiltonian of one experiment together with its pieces.
#[derive(Clone, Debug)]
pub struct AssembledModel<T: Real> {
    /// Full Hamiltonian on the whole register.
    pub total: TermList<T>,
    pub layout: SystemLayout,
    pub draws: Vec<CouplingDraw<T>>,
    /// Central-system Hamiltonian on the `n_s` CS sites only.
    pub cs_local: TermList<T>,
    /// Everything except the CS Hamiltonian, on the whole register.
    pub environment_part: TermList<T>,
    /// Reservoir self-Hamiltonian on the `n_e2` reservoir sites only.
    pub reservoir_local: Option<TermList<T>>,
}

/// Build the total Hamiltonian for `config` (model A or model B geometry).
pub fn assemble_model<T: Real>(config: &ExperimentConfig) -> Result<AssembledModel<T>> {
    let streams = SeedStreams::new(config.seed);
    let j_s = T::one();
    match config.model {
        ModelKind::ModelA | ModelKind::ZenoCompare => {
            let layout = SystemLayout::contiguous(config.n_s, config.n_e1, 0, Geometry::Open)?;
            let n = layout.n_total();
            let cs_local = build_heisenberg(config.n_s, j_s, Geometry::Open)?;
            let r = CouplingDraw::generate(
                "star_couplings",
                DrawKind::Uniform01,
                config.n_e1,
                T::one(),
                streams.seed_for(Stream::StarCouplings),
            );
            let coupling = build_star_coupling(n, layout.measured_site(), &layout.sites(Role::E1), &r, T::lit(config.i_strength))?;
            let cs_sites = layout.sites(Role::Cs);
            let mut total = cs_local.embedded(&cs_sites, n)?;
            total.extend(&coupling)?;
            Ok(AssembledModel {
                total,
                layout,
                draws: vec![r],
                cs_local,
                environment_part: coupling,
                reservoir_local: None,
            })
        }
        ModelKind::ModelB => {
            let layout = SystemLayout::contiguous(config.n_s, config.n_e1, config.n_e2, Geometry::Ring)?;
            let n = layout.n_total();
            let cs_sites = layout.sites(Role::Cs);
            let e1 = layout.sites(Role::E1);
            let e2 = layout.sites(Role::E2);
            let cs_local = build_heisenberg(config.n_s, j_s, Geometry::Ring)?;

            let r = CouplingDraw::generate(
                "star_couplings",
                DrawKind::Uniform01,
                e1.len(),
                T::one(),
                streams.seed_for(Stream::StarCouplings),
            );
            let mut env = build_star_coupling(n, layout.measured_site(), &e1, &r, T::lit(config.i_strength))?;
            let mut draws = vec![r];

            // One binary draw per CS site, all from the same stream.
            let mut rng = streams.rng(Stream::BinaryCouplings);
            for &i in &cs_sites {
                let values = CouplingDraw::draw_values(&mut rng, DrawKind::Binary, e2.len(), T::lit(config.i_prime));
                let draw = CouplingDraw {
                    label: format!("binary_couplings[{i}]"),
                    kind: DrawKind::Binary,
                    magnitude: T::lit(config.i_prime),
                    values,
                    seed_used: streams.seed_for(Stream::BinaryCouplings),
                };
                env.extend(&build_star_coupling(n, i, &e2, &draw, T::one())?)?;
                draws.push(draw);
            }

            let local_e2: Vec<usize> = (0..e2.len()).collect();
            let (glass_local, glass_draw) =
                build_spin_glass(e2.len(), &local_e2, T::lit(config.k_strength), streams.seed_for(Stream::SpinGlass))?;
            env.extend(&glass_local.embedded(&e2, n)?)?;
            draws.push(glass_draw);

            let mut total = cs_local.embedded(&cs_sites, n)?;
            total.extend(&env)?;
            Ok(AssembledModel {
                total,
                layout,
                draws,
                cs_local,
                environment_part: env,
                reservoir_local: Some(glass_local),
            })
        }
        ModelKind::GroundStateReport => Err(Error::config(
            "ground_state_report has no system-environment model to assemble",
        )),
    }
}
