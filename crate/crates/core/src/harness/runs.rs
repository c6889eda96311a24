//! The four experiments.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::hamiltonians::{
    add_staggered_field, assemble_model, build_effective_branch, build_heisenberg, gs_energy_bounds, neel_signs,
    tensor_product, AssembledModel, Branch, Geometry, Role,
};
use crate::hilbert::{expectation, Axis, StateVector, TermList};
use crate::observables::{
    coherence_eigenbasis, coherence_global, coherence_local, condition, correlation, entropy, entropy_of_matrix,
    reduce, DensityMatrix, Spin, SpinCorrelations,
};
use crate::propagation::{Mode, Propagator};
use crate::stateprep::{ground_state, random_state, thermal_state};
use crate::streams::{SeedStreams, Stream};
use crate::zeno::{run_repeated_collapse, CollapseProtocol};

use super::config::{ExperimentConfig, ModelKind, Observable};
use super::{check_capacity, write_outputs, RunManifest, RunResult, Table, SOFTWARE_VERSION};

/// Trace and hermiticity tolerance of every reduced density matrix.
pub const DENSITY_TOLERANCE: f64 = 1e-12;
/// Tolerance of `Σ_κ K^{aa}(κ) = N/4` and of `K^{aa} ≥ 0`.
pub const SUM_RULE_TOLERANCE: f64 = 1e-12;

/// Dispatch on `config.model`.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    match config.model {
        ModelKind::ModelA => run_model_a(config),
        ModelKind::ModelB => run_model_b(config),
        ModelKind::ZenoCompare => run_zeno_compare(config),
        ModelKind::GroundStateReport => run_ground_state_report(config),
    }
}

fn expect_model(config: &ExperimentConfig, model: ModelKind) -> Result<()> {
    if config.model != model {
        return Err(Error::config(format!(
            "{} config passed to the {} runner",
            config.model.id(),
            model.id()
        )));
    }
    config.validate()?;
    check_capacity(config)
}

fn new_manifest(config: &ExperimentConfig, model: Option<&AssembledModel<f64>>) -> RunManifest {
    let streams = SeedStreams::new(config.seed);
    let mut seeds = vec![("master".to_string(), config.seed)];
    seeds.extend(Stream::ALL.iter().map(|&s| (s.name().to_string(), streams.seed_for(s))));
    RunManifest {
        config_text: config.to_text(),
        software: SOFTWARE_VERSION.to_string(),
        seeds,
        couplings: model.map(|m| m.draws.clone()).unwrap_or_default(),
        ..RunManifest::default()
    }
}

fn finish(config: &ExperimentConfig, tables: Vec<Table>, mut manifest: RunManifest, start: Instant) -> Result<RunResult> {
    let tables: Vec<Table> = tables
        .into_iter()
        .filter(|t| config.observables.iter().any(|o| o.id() == t.name))
        .collect();
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_outputs(&config.output_dir, &tables, &mut manifest)?;
    Ok(RunResult { manifest, tables })
}

fn check_density(rho: &DensityMatrix<f64>, t: f64) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOLERANCE || tr.im.abs() > DENSITY_TOLERANCE {
        return Err(Error::numerical(format!("trace invariant violated at t = {t}: Tr ρ = {tr}")));
    }
    let h = rho.elements().hermiticity_defect();
    if h > DENSITY_TOLERANCE {
        return Err(Error::numerical(format!("hermiticity invariant violated at t = {t}: defect {h:e}")));
    }
    Ok(())
}

fn check_finite(psi: &StateVector<f64>, t: f64) -> Result<()> {
    if !psi.all_finite() {
        return Err(Error::numerical(format!("non-finite amplitude at t = {t}")));
    }
    Ok(())
}

fn bond_columns(prefix: &str, n_s: usize) -> Vec<String> {
    (1..n_s).map(|i| format!("{prefix}{i}")).collect()
}

fn bonds(rho: &DensityMatrix<f64>) -> Result<Vec<f64>> {
    (0..rho.n_sites() - 1).map(|i| correlation(rho, i, i + 1)).collect()
}

fn initial_model_a(config: &ExperimentConfig, model: &AssembledModel<f64>) -> Result<StateVector<f64>> {
    let streams = SeedStreams::new(config.seed);
    let (gs, _) = ground_state(&model.cs_local)?;
    let bath = random_state::<f64>(config.n_e1, streams.seed_for(Stream::BathState))?;
    tensor_product(&[&gs.vector, &bath.vector], &model.layout)
}

/// Model A: CS ground state times a random bath, evolved under `H_A`.
pub fn run_model_a(config: &ExperimentConfig) -> Result<RunResult> {
    expect_model(config, ModelKind::ModelA)?;
    let start = Instant::now();
    let model = assemble_model::<f64>(config)?;
    let mut manifest = new_manifest(config, Some(&model));
    let cs = model.layout.sites(Role::Cs);
    let prop = Propagator::new(&model.total)?;
    let mut psi = initial_model_a(config, &model)?;
    let e0 = expectation(&model.total, &psi)?;

    let col = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut coherence = Table::new(Observable::Coherence.id(), col(&["t", "m_local", "m_global", "s", "s_uu", "s_dd"]));
    let mut bond_table = Table::new(Observable::Bonds.id(), [vec!["t".to_string()], bond_columns("bond_", config.n_s)].concat());
    let mut diagnostics = Table::new(Observable::Diagnostics.id(), col(&["t", "norm_defect", "energy"]));

    let (mut max_norm_defect, mut max_energy_drift) = (0.0f64, 0.0f64);
    let mut t_prev = 0.0;
    for t in config.time_grid.times_with_origin() {
        if t > t_prev {
            psi = prop.propagate(&psi, t - t_prev, Mode::RealTime)?;
            t_prev = t;
        }
        check_finite(&psi, t)?;
        let rho = reduce(&psi, &cs)?;
        check_density(&rho, t)?;

        if config.wants(Observable::Coherence) {
            let s_uu = entropy_of_matrix(&condition(&rho, Spin::Up, Spin::Up)?.normalized()?)?;
            let s_dd = entropy_of_matrix(&condition(&rho, Spin::Down, Spin::Down)?.normalized()?)?;
            coherence.push(vec![t, coherence_local(&rho)?, coherence_global(&rho)?, entropy(&rho)?, s_uu, s_dd]);
        }
        if config.wants(Observable::Bonds) {
            bond_table.push([vec![t], bonds(&rho)?].concat());
        }
        let norm_defect = psi.norm() - 1.0;
        let energy = expectation(&model.total, &psi)?;
        max_norm_defect = max_norm_defect.max(norm_defect.abs());
        max_energy_drift = max_energy_drift.max(((energy - e0) / e0.abs().max(1.0)).abs());
        diagnostics.push(vec![t, norm_defect, energy]);
    }

    manifest.summary.push(("max_norm_defect".into(), max_norm_defect));
    manifest.summary.push(("max_relative_energy_drift".into(), max_energy_drift));
    finish(config, vec![coherence, bond_table, diagnostics], manifest, start)
}

/// `K^{aa}(κ_m)` for `a ∈ {x, z}` and every `m`, after checking the
/// positivity and sum rule.
fn structure_row(rho: &DensityMatrix<f64>, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rho.n_sites();
    let corr = SpinCorrelations::compute(rho)?;
    let mut kxx = Vec::with_capacity(n);
    let mut kzz = Vec::with_capacity(n);
    for m in 0..n {
        let k = corr.structure_factor(m);
        kxx.push(k.get(Axis::X, Axis::X).re);
        kzz.push(k.get(Axis::Z, Axis::Z).re);
    }
    let target = n as f64 / 4.0;
    for (name, ks) in [("xx", &kxx), ("zz", &kzz)] {
        if let Some(&neg) = ks.iter().find(|&&k| k < -SUM_RULE_TOLERANCE) {
            return Err(Error::numerical(format!("K^{name} = {neg} is negative at t = {t}")));
        }
        let sum: f64 = ks.iter().sum();
        if (sum - target).abs() > SUM_RULE_TOLERANCE {
            return Err(Error::numerical(format!(
                "structure-factor sum rule violated at t = {t}: Σ K^{name} = {sum}, expected {target}"
            )));
        }
    }
    Ok((kxx, kzz))
}

fn reference_structure(h: &TermList<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (gs, _) = ground_state(h)?;
    structure_row(&DensityMatrix::pure(&gs.vector), 0.0)
}

/// `H_S′ = H_S○ + (J_S/4) M^z` on an `n`-site ring.
pub(crate) fn staggered_ring(n: usize) -> Result<TermList<f64>> {
    add_staggered_field(&build_heisenberg(n, 1.0, Geometry::Ring)?, 0.25, &neel_signs(n))
}

/// Model B: ring ground state times a random E1 state and a thermal E2
/// state, evolved under `H_B`.
pub fn run_model_b(config: &ExperimentConfig) -> Result<RunResult> {
    expect_model(config, ModelKind::ModelB)?;
    let start = Instant::now();
    let model = assemble_model::<f64>(config)?;
    let mut manifest = new_manifest(config, Some(&model));
    let streams = SeedStreams::new(config.seed);
    let n_s = config.n_s;
    let cs = model.layout.sites(Role::Cs);

    let (k0_xx, k0_zz) = reference_structure(&model.cs_local)?;
    let (kst_xx, kst_zz) = reference_structure(&staggered_ring(n_s)?)?;
    let h_up = build_effective_branch(n_s, 1.0, Branch::Up)?;
    let h_down = build_effective_branch(n_s, 1.0, Branch::Down)?;

    let (gs, _) = ground_state(&model.cs_local)?;
    let e1 = random_state::<f64>(config.n_e1, streams.seed_for(Stream::BathState))?;
    let reservoir = model
        .reservoir_local
        .as_ref()
        .ok_or_else(|| Error::config("model B without a reservoir"))?;
    let e2 = thermal_state(reservoir, config.beta, streams.seed_for(Stream::ReservoirState))?;
    let mut psi = tensor_product(&[&gs.vector, &e1.vector, &e2.vector], &model.layout)?;
    let prop = Propagator::new(&model.total)?;
    let e_initial = expectation(&model.total, &psi)?;

    let mut sf_cols = vec!["t".to_string()];
    sf_cols.extend((0..n_s).map(|m| format!("kxx_{m}")));
    sf_cols.extend((0..n_s).map(|m| format!("kzz_{m}")));
    let mut sf = Table::new(Observable::StructureFactor.id(), sf_cols);
    let mut eig = Table::new(
        Observable::EigenCoherence.id(),
        vec!["t".into(), "m_eig_uu".into(), "m_eig_dd".into()],
    );
    let mut diagnostics = Table::new(
        Observable::Diagnostics.id(),
        vec!["t".into(), "norm_defect".into(), "energy".into()],
    );

    let (mut max_norm_defect, mut max_energy_drift) = (0.0f64, 0.0f64);
    let mut t_prev = 0.0;
    for t in config.time_grid.times_with_origin() {
        if t > t_prev {
            psi = prop.propagate(&psi, t - t_prev, Mode::RealTime)?;
            t_prev = t;
        }
        check_finite(&psi, t)?;
        let rho = reduce(&psi, &cs)?;
        check_density(&rho, t)?;
        // The sum rule is checked at every output time.
        let (kxx, kzz) = structure_row(&rho, t)?;
        sf.push([vec![t], kxx, kzz].concat());
        if config.wants(Observable::EigenCoherence) {
            let uu = condition(&rho, Spin::Up, Spin::Up)?.normalized()?;
            let dd = condition(&rho, Spin::Down, Spin::Down)?.normalized()?;
            eig.push(vec![t, coherence_eigenbasis(&uu, &h_up)?, coherence_eigenbasis(&dd, &h_down)?]);
        }
        if config.wants(Observable::Diagnostics) {
            let energy = expectation(&model.total, &psi)?;
            let norm_defect = psi.norm() - 1.0;
            max_norm_defect = max_norm_defect.max(norm_defect.abs());
            max_energy_drift = max_energy_drift.max(((energy - e_initial) / e_initial.abs().max(1.0)).abs());
            diagnostics.push(vec![t, norm_defect, energy]);
        }
    }

    let t_max = config.time_grid.t_max;
    let late: Vec<&Vec<f64>> = sf.rows.iter().filter(|r| r[0] >= t_max / 10.0).collect();
    let final_row = sf.rows.last().expect("grid has points").clone();
    let summary = &mut manifest.summary;
    for m in 0..n_s {
        summary.push((format!("reference_ground.xx.m{m}"), k0_xx[m]));
        summary.push((format!("reference_ground.zz.m{m}"), k0_zz[m]));
        summary.push((format!("reference_staggered.xx.m{m}"), kst_xx[m]));
        summary.push((format!("reference_staggered.zz.m{m}"), kst_zz[m]));
    }
    for m in 0..n_s {
        for (name, offset) in [("xx", 1), ("zz", 1 + n_s)] {
            let avg = late.iter().map(|r| r[offset + m]).sum::<f64>() / late.len() as f64;
            summary.push((format!("late_average.{name}.m{m}"), avg));
            summary.push((format!("final.{name}.m{m}"), final_row[offset + m]));
        }
    }
    summary.push(("late_average_points".into(), late.len() as f64));
    if config.wants(Observable::Diagnostics) {
        summary.push(("max_norm_defect".into(), max_norm_defect));
        summary.push(("max_relative_energy_drift".into(), max_energy_drift));
    }
    finish(config, vec![sf, eig, diagnostics], manifest, start)
}

/// Model A decoherence against ensemble (or trajectory) repeated collapse
/// of the measured spin, both baseline-subtracted by the ground-state bonds.
pub fn run_zeno_compare(config: &ExperimentConfig) -> Result<RunResult> {
    expect_model(config, ModelKind::ZenoCompare)?;
    let start = Instant::now();
    let model = assemble_model::<f64>(config)?;
    let mut manifest = new_manifest(config, Some(&model));
    let streams = SeedStreams::new(config.seed);
    let n_s = config.n_s;
    let cs = model.layout.sites(Role::Cs);

    let (gs, _) = ground_state(&model.cs_local)?;
    let baseline = bonds(&DensityMatrix::pure(&gs.vector))?;

    let protocol = CollapseProtocol {
        site: model.layout.measured_site(),
        interval: config.collapse_interval,
        horizon: config.time_grid.t_max,
        mode: config.collapse_mode,
        seed: streams.seed_for(Stream::Collapse),
    };
    let times = protocol.times();

    let mut decoherence = Vec::with_capacity(times.len());
    let prop = Propagator::new(&model.total)?;
    let mut psi = initial_model_a(config, &model)?;
    let mut t_prev = 0.0;
    for &t in &times {
        if t > t_prev {
            psi = prop.propagate(&psi, t - t_prev, Mode::RealTime)?;
            t_prev = t;
        }
        check_finite(&psi, t)?;
        let rho = reduce(&psi, &cs)?;
        check_density(&rho, t)?;
        decoherence.push(bonds(&rho)?);
    }

    let mut collapse = Vec::with_capacity(times.len());
    let record = run_repeated_collapse(&model.cs_local, &gs.vector, &protocol, |t, rho| {
        check_density(rho, t)?;
        collapse.push(bonds(rho)?);
        Ok(())
    })?;

    let mut cols = vec!["t".to_string()];
    for i in 1..n_s {
        cols.push(format!("decoherence_bond_{i}"));
        cols.push(format!("collapse_bond_{i}"));
    }
    let mut table = Table::new(Observable::ZenoBonds.id(), cols);
    let mut max_diff = vec![0.0f64; n_s - 1];
    for (k, &t) in times.iter().enumerate() {
        let mut row = vec![t];
        for b in 0..n_s - 1 {
            let d = decoherence[k][b] - baseline[b];
            let c = collapse[k][b] - baseline[b];
            row.push(d);
            row.push(c);
            max_diff[b] = max_diff[b].max((d - c).abs());
        }
        table.push(row);
    }
    for (b, v) in max_diff.iter().enumerate() {
        manifest.summary.push((format!("max_abs_difference.bond_{}", b + 1), *v));
    }
    let beyond_first = max_diff.iter().skip(1).copied().fold(0.0, f64::max);
    manifest.summary.push(("max_abs_difference.bonds_2_and_up".into(), beyond_first));
    manifest.summary.push(("collapse_resampled".into(), record.resampled as f64));
    manifest.summary.push(("max_probability_defect".into(), record.max_probability_defect));
    finish(config, vec![table], manifest, start)
}

/// Ground states of the isolated central system: energies, bounds, local
/// magnetisations and reference structure factors.
pub fn run_ground_state_report(config: &ExperimentConfig) -> Result<RunResult> {
    expect_model(config, ModelKind::GroundStateReport)?;
    let start = Instant::now();
    let mut manifest = new_manifest(config, None);
    let n = config.n_s;
    let mut tables = Vec::new();

    for (name, geometry) in [("open", Geometry::Open), ("ring", Geometry::Ring)] {
        let h = build_heisenberg(n, 1.0, geometry)?;
        let (gs, e0) = ground_state(&h)?;
        let (lower, upper) = gs_energy_bounds(n, 1.0, 2.0);
        let rho = DensityMatrix::pure(&gs.vector);
        let mut max_sz = 0.0f64;
        for s in 0..n {
            let mut op = TermList::<f64>::new(n);
            op.push(1.0, &[(s, Axis::Z)])?;
            max_sz = max_sz.max(expectation(&op, &gs.vector)?.abs());
        }
        let summary = &mut manifest.summary;
        summary.push((format!("{name}.energy"), e0));
        summary.push((format!("{name}.bound_lower"), lower));
        summary.push((format!("{name}.bound_upper"), upper));
        summary.push((format!("{name}.residual"), gs.provenance.residual.unwrap_or(f64::NAN)));
        summary.push((format!("{name}.max_abs_sz"), max_sz));
        for (i, b) in bonds(&rho)?.into_iter().enumerate() {
            summary.push((format!("{name}.bond_{}", i + 1), b));
        }
    }

    let mut cols = vec!["m".to_string(), "kappa".into(), "ground_xx".into(), "ground_zz".into()];
    let staggered = if n % 2 == 0 {
        cols.push("staggered_xx".into());
        cols.push("staggered_zz".into());
        Some(reference_structure(&staggered_ring(n)?)?)
    } else {
        None
    };
    let (g_xx, g_zz) = reference_structure(&build_heisenberg(n, 1.0, Geometry::Ring)?)?;
    let mut table = Table::new(Observable::StructureFactor.id(), cols);
    for m in 0..n {
        let mut row = vec![m as f64, std::f64::consts::TAU * m as f64 / n as f64, g_xx[m], g_zz[m]];
        if let Some((s_xx, s_zz)) = &staggered {
            row.push(s_xx[m]);
            row.push(s_zz[m]);
        }
        table.push(row);
    }
    tables.push(table);
    finish(config, tables, manifest, start)
}
