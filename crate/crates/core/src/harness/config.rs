//! Experiment configuration: flat `key = value` text with `#` comments.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::zeno::CollapseMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    ModelA,
    ModelB,
    ZenoCompare,
    GroundStateReport,
}

impl ModelKind {
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::ModelA => "model_a",
            ModelKind::ModelB => "model_b",
            ModelKind::ZenoCompare => "zeno_compare",
            ModelKind::GroundStateReport => "ground_state_report",
        }
    }

    fn allowed_observables(self) -> &'static [Observable] {
        match self {
            ModelKind::ModelA => &[Observable::Coherence, Observable::Bonds, Observable::Diagnostics],
            ModelKind::ModelB => &[Observable::StructureFactor, Observable::EigenCoherence, Observable::Diagnostics],
            ModelKind::ZenoCompare => &[Observable::ZenoBonds],
            ModelKind::GroundStateReport => &[Observable::StructureFactor],
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model_a" => Ok(ModelKind::ModelA),
            "model_b" => Ok(ModelKind::ModelB),
            "zeno_compare" => Ok(ModelKind::ZenoCompare),
            "ground_state_report" => Ok(ModelKind::GroundStateReport),
            other => Err(Error::config(format!("unknown model id `{other}`"))),
        }
    }
}

/// Observable families; each is written to its own CSV file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Observable {
    /// `m_local, m_global, s, s_uu, s_dd`.
    Coherence,
    /// Nearest-neighbour `⟨S_i·S_{i+1}⟩`.
    Bonds,
    /// Norm defect and energy of the global state.
    Diagnostics,
    /// `K^{xx}(κ)`, `K^{zz}(κ)` on the κ grid.
    StructureFactor,
    /// Eigenbasis coherence of both conditioned blocks.
    EigenCoherence,
    /// Baseline-subtracted bonds, decoherence vs repeated collapse.
    ZenoBonds,
}

impl Observable {
    pub fn id(self) -> &'static str {
        match self {
            Observable::Coherence => "coherence",
            Observable::Bonds => "bonds",
            Observable::Diagnostics => "diagnostics",
            Observable::StructureFactor => "structure_factor",
            Observable::EigenCoherence => "eigen_coherence",
            Observable::ZenoBonds => "zeno_bonds",
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherence" => Ok(Observable::Coherence),
            "bonds" => Ok(Observable::Bonds),
            "diagnostics" => Ok(Observable::Diagnostics),
            "structure_factor" => Ok(Observable::StructureFactor),
            "eigen_coherence" => Ok(Observable::EigenCoherence),
            "zeno_bonds" => Ok(Observable::ZenoBonds),
            other => Err(Error::config(format!("unknown observable `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridScale {
    Linear,
    Log,
}

/// Output times in units of `ħ/J_S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub scale: GridScale,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite()) || !(self.t_min < self.t_max) {
            return Err(Error::config(format!(
                "time grid needs t_min < t_max, got {} .. {}",
                self.t_min, self.t_max
            )));
        }
        if self.points < 2 {
            return Err(Error::config("time grid needs at least 2 points"));
        }
        if self.t_min < 0.0 {
            return Err(Error::config("time grid must not start before t = 0"));
        }
        if self.scale == GridScale::Log && self.t_min <= 0.0 {
            return Err(Error::config("logarithmic time grid needs t_min > 0"));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let f = k as f64 / last;
                if k + 1 == self.points {
                    return self.t_max;
                }
                match self.scale {
                    GridScale::Linear => self.t_min + f * (self.t_max - self.t_min),
                    GridScale::Log => self.t_min * (self.t_max / self.t_min).powf(f),
                }
            })
            .collect()
    }

    /// `t = 0` followed by the grid (without repeating an initial 0).
    pub fn times_with_origin(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.times().into_iter().filter(|&t| t > 0.0));
        out
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scale = match self.scale {
            GridScale::Linear => "linear",
            GridScale::Log => "log",
        };
        write!(f, "{scale} {} {} {}", self.t_min, self.t_max, self.points)
    }
}

impl FromStr for TimeGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::config(format!(
                "time_grid must be `<linear|log> <t_min> <t_max> <points>`, got `{s}`"
            )));
        }
        let scale = match parts[0] {
            "linear" => GridScale::Linear,
            "log" => GridScale::Log,
            other => return Err(Error::config(format!("unknown time grid scale `{other}`"))),
        };
        let grid = TimeGrid {
            scale,
            t_min: parse_num(parts[1], "time_grid t_min")?,
            t_max: parse_num(parts[2], "time_grid t_max")?,
            points: parse_num(parts[3], "time_grid points")?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

fn parse_num<N: FromStr>(s: &str, what: &str) -> Result<N> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(format!("cannot parse {what} from `{s}`")))
}

/// Full description of one run. Couplings are in units of `J_S`, times in
/// `ħ/J_S`, the inverse temperature in `1/J_S`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n_s: usize,
    pub n_e1: usize,
    pub n_e2: usize,
    pub i_strength: f64,
    pub i_prime: f64,
    pub k_strength: f64,
    pub beta: f64,
    pub seed: u64,
    pub time_grid: TimeGrid,
    pub collapse_interval: f64,
    pub collapse_mode: CollapseMode,
    pub observables: Vec<Observable>,
    pub output_dir: PathBuf,
    pub max_sites: usize,
    pub memory_budget_mib: u64,
}

const KEYS: [&str; 16] = [
    "model",
    "n_s",
    "n_e1",
    "n_e2",
    "i_strength",
    "i_prime",
    "k_strength",
    "beta",
    "seed",
    "time_grid",
    "collapse_interval",
    "collapse_mode",
    "observables",
    "output_dir",
    "max_sites",
    "memory_budget_mib",
];

impl ExperimentConfig {
    /// Published parameter set of each experiment.
    pub fn defaults(model: ModelKind) -> Self {
        let base = ExperimentConfig {
            model,
            n_s: 6,
            n_e1: 8,
            n_e2: 0,
            i_strength: 20.0,
            i_prime: 0.0,
            k_strength: 0.0,
            beta: 0.0,
            seed: 1,
            time_grid: TimeGrid {
                scale: GridScale::Log,
                t_min: 1e-2,
                t_max: 1e1,
                points: 121,
            },
            collapse_interval: 0.1,
            collapse_mode: CollapseMode::Ensemble,
            observables: model.allowed_observables().to_vec(),
            output_dir: PathBuf::from(format!("out/{}", model.id())),
            max_sites: 26,
            memory_budget_mib: 4096,
        };
        match model {
            ModelKind::ModelA => base,
            ModelKind::ModelB => ExperimentConfig {
                n_s: 4,
                n_e1: 6,
                n_e2: 12,
                i_prime: 0.1,
                k_strength: 0.1,
                beta: 50.0,
                time_grid: TimeGrid {
                    scale: GridScale::Log,
                    t_min: 1e-2,
                    t_max: 1e3,
                    points: 121,
                },
                ..base
            },
            ModelKind::ZenoCompare => ExperimentConfig {
                time_grid: TimeGrid {
                    scale: GridScale::Linear,
                    t_min: 0.0,
                    t_max: 5.0,
                    points: 51,
                },
                ..base
            },
            ModelKind::GroundStateReport => ExperimentConfig {
                n_s: 4,
                n_e1: 0,
                ..base
            },
        }
    }

    /// Defaults of `model` overridden by the keys in `text`.
    pub fn parse(model: ModelKind, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(model);
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
            if seen.contains(known) {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            seen.push(known);
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => {
                let m: ModelKind = value.parse()?;
                if m != self.model {
                    return Err(Error::config(format!(
                        "config declares model `{}` but `{}` was requested",
                        m.id(),
                        self.model.id()
                    )));
                }
            }
            "n_s" => self.n_s = parse_num(value, key)?,
            "n_e1" => self.n_e1 = parse_num(value, key)?,
            "n_e2" => self.n_e2 = parse_num(value, key)?,
            "i_strength" => self.i_strength = parse_num(value, key)?,
            "i_prime" => self.i_prime = parse_num(value, key)?,
            "k_strength" => self.k_strength = parse_num(value, key)?,
            "beta" => self.beta = parse_num(value, key)?,
            "seed" => self.seed = parse_num(value, key)?,
            "time_grid" => self.time_grid = value.parse()?,
            "collapse_interval" => self.collapse_interval = parse_num(value, key)?,
            "collapse_mode" => {
                self.collapse_mode = match value {
                    "ensemble" => CollapseMode::Ensemble,
                    "trajectory" => CollapseMode::Trajectory,
                    other => return Err(Error::config(format!("unknown collapse mode `{other}`"))),
                }
            }
            "observables" => {
                self.observables = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "max_sites" => self.max_sites = parse_num(value, key)?,
            "memory_budget_mib" => self.memory_budget_mib = parse_num(value, key)?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.time_grid.validate()?;
        for (name, v) in [
            ("i_strength", self.i_strength),
            ("i_prime", self.i_prime),
            ("k_strength", self.k_strength),
            ("beta", self.beta),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if self.beta < 0.0 {
            return Err(Error::config("beta must be ≥ 0"));
        }
        if !(self.collapse_interval > 0.0) || !self.collapse_interval.is_finite() {
            return Err(Error::config(format!(
                "collapse_interval must be > 0, got {}",
                self.collapse_interval
            )));
        }
        match self.model {
            ModelKind::ModelA | ModelKind::ZenoCompare => {
                if self.n_s < 2 || self.n_e1 < 1 {
                    return Err(Error::config("model A needs n_s ≥ 2 and n_e1 ≥ 1"));
                }
                if self.n_e2 != 0 {
                    return Err(Error::config("model A has no reservoir fragment; set n_e2 = 0"));
                }
            }
            ModelKind::ModelB => {
                if self.n_s < 2 || self.n_s % 2 != 0 || self.n_e1 < 1 || self.n_e2 < 2 {
                    return Err(Error::config("model B needs even n_s ≥ 2, n_e1 ≥ 1 and n_e2 ≥ 2"));
                }
            }
            ModelKind::GroundStateReport => {
                if self.n_s < 2 {
                    return Err(Error::config("ground state report needs n_s ≥ 2"));
                }
            }
        }
        if self.model == ModelKind::ZenoCompare && self.collapse_interval > self.time_grid.t_max {
            return Err(Error::config("collapse_interval exceeds the time horizon"));
        }
        let allowed = self.model.allowed_observables();
        for o in &self.observables {
            if !allowed.contains(o) {
                return Err(Error::config(format!(
                    "observable `{}` is not produced by {}",
                    o.id(),
                    self.model.id()
                )));
            }
        }
        Ok(())
    }

    pub fn n_total(&self) -> usize {
        match self.model {
            ModelKind::GroundStateReport => self.n_s,
            _ => self.n_s + self.n_e1 + self.n_e2,
        }
    }

    pub fn wants(&self, o: Observable) -> bool {
        self.observables.contains(&o)
    }

    /// The config as parseable text (every key present).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let obs: Vec<&str> = self.observables.iter().map(|o| o.id()).collect();
        let mode = match self.collapse_mode {
            CollapseMode::Ensemble => "ensemble",
            CollapseMode::Trajectory => "trajectory",
        };
        let _ = writeln!(s, "model = {}", self.model.id());
        let _ = writeln!(s, "n_s = {}", self.n_s);
        let _ = writeln!(s, "n_e1 = {}", self.n_e1);
        let _ = writeln!(s, "n_e2 = {}", self.n_e2);
        let _ = writeln!(s, "i_strength = {}", self.i_strength);
        let _ = writeln!(s, "i_prime = {}", self.i_prime);
        let _ = writeln!(s, "k_strength = {}", self.k_strength);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "time_grid = {}", self.time_grid);
        let _ = writeln!(s, "collapse_interval = {}", self.collapse_interval);
        let _ = writeln!(s, "collapse_mode = {mode}");
        let _ = writeln!(s, "observables = {}", obs.join(","));
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "max_sites = {}", self.max_sites);
        let _ = writeln!(s, "memory_budget_mib = {}", self.memory_budget_mib);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_parameter_table() {
        let a = ExperimentConfig::defaults(ModelKind::ModelA);
        assert_eq!((a.n_s, a.n_e1, a.n_e2, a.i_strength), (6, 8, 0, 20.0));
        let b = ExperimentConfig::defaults(ModelKind::ModelB);
        assert_eq!((b.n_s, b.n_e1, b.n_e2), (4, 6, 12));
        assert_eq!((b.i_strength, b.i_prime, b.k_strength, b.beta), (20.0, 0.1, 0.1, 50.0));
        assert_eq!(b.n_total(), 22);
    }

    #[test]
    fn text_round_trip() {
        for m in [ModelKind::ModelA, ModelKind::ModelB, ModelKind::ZenoCompare, ModelKind::GroundStateReport] {
            let d = ExperimentConfig::defaults(m);
            assert_eq!(ExperimentConfig::parse(m, &d.to_text()).unwrap(), d);
        }
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# comment\nseed = 9 # trailing\n\nn_e1 = 4\n";
        let c = ExperimentConfig::parse(ModelKind::ModelA, text).unwrap();
        assert_eq!((c.seed, c.n_e1), (9, 4));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "unknown_key = 1",
            "seed = -3",
            "time_grid = log 0.01 0 10",
            "time_grid = linear 0 0 10",
            "time_grid = log 0 10 10",
            "time_grid = linear 0 1 1",
            "collapse_interval = 0",
            "model = model_b",
            "observables = structure_factor",
            "seed = 1\nseed = 2",
            "no equals sign",
        ];
        for text in bad {
            let err = ExperimentConfig::parse(ModelKind::ModelA, text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn grid_times() {
        let g: TimeGrid = "log 0.01 10 4".parse().unwrap();
        let t = g.times();
        assert_eq!(t.len(), 4);
        assert!((t[1] - 0.1).abs() < 1e-15 && (t[2] - 1.0).abs() < 1e-14 && t[3] == 10.0);
        assert_eq!(g.times_with_origin().len(), 5);
        let lin: TimeGrid = "linear 0 5 51".parse().unwrap();
        assert_eq!(lin.times_with_origin().len(), 51);
    }
}
