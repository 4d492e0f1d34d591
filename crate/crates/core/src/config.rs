//! TOML run configuration. Every key is optional; missing keys take the
//! defaults below, which describe the oscillatory-regime reference scenario
//! (100x100 unit cells, `T = 3000`, three fully coupled nodes).
//!
//! ```toml
//! seed = 0
//! dt = 0.005
//! t_end = 3000.0
//! record_every = 100
//! snapshot_times = [1000.0, 3000.0]
//!
//! [grid]
//! nx = 100
//! ny = 100
//! lx = 100.0
//! ly = 100.0
//!
//! [params]
//! eps = 0.1
//! d_u = 0.05
//! a = 1.0
//! b = 0.001
//!
//! [forcing]
//! kind = "constant"          # or "excitable_window"
//! level = 0.0
//! outside_level = -1.1
//! radius = 5.0
//! # center = [50.0, 50.0]    # default: domain centre
//!
//! [network]
//! topology = "complete"      # complete | ring | file
//! n = 3
//! g = 0.015
//! # matrix = "coupling.txt"  # topology = "file", path relative to the config
//!
//! [initial]
//! kind = "uniform"           # uniform | homogeneous | spiral | mixture
//! lo = -1.0
//! hi = 1.0
//! # values = [[0.5, 0.0]]    # homogeneous: one pair, or one per node
//! # p_percent = 50.0         # mixture
//!
//! [sync]
//! tol_rel = 1e-3
//! window_frac = 0.1
//!
//! [threshold]
//! g_lo = 0.0
//! g_hi = 0.05
//! resolution = 1e-3
//! max_expansions = 0
//!
//! [sweep]
//! n_from = 3
//! n_to = 8
//! p_list = []
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::SyncCriterion;
use crate::error::{Error, Result};
use crate::fhn::{FhnParams, ForcingKind, ForcingProfile};
use crate::grid::Grid;
use crate::lab::{ThresholdSearch, Topology, TopologyKind};
use crate::network::{load_matrix, CouplingMatrix};
use crate::simulator::{InitialCondition, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub snapshot_times: Vec<f64>,
    pub grid: GridSection,
    pub params: ParamsSection,
    pub forcing: ForcingSection,
    pub network: NetworkSection,
    pub initial: InitialSection,
    pub sync: SyncSection,
    pub threshold: ThresholdSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dt: 0.005,
            t_end: 3000.0,
            record_every: 100,
            snapshot_times: Vec::new(),
            grid: GridSection::default(),
            params: ParamsSection::default(),
            forcing: ForcingSection::default(),
            network: NetworkSection::default(),
            initial: InitialSection::default(),
            sync: SyncSection::default(),
            threshold: ThresholdSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nx: 100,
            ny: 100,
            lx: 100.0,
            ly: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub eps: f64,
    pub d_u: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = FhnParams::<f64>::reference();
        Self {
            eps: p.eps,
            d_u: p.d_u,
            a: p.a,
            b: p.b,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKindKey {
    #[default]
    Constant,
    ExcitableWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub kind: ForcingKindKey,
    pub level: f64,
    pub outside_level: f64,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
}

impl Default for ForcingSection {
    fn default() -> Self {
        let f = ForcingProfile::<f64>::default();
        Self {
            kind: ForcingKindKey::Constant,
            level: f.level,
            outside_level: f.outside_level,
            radius: f.radius,
            center: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKey {
    #[default]
    Complete,
    Ring,
    File,
}

impl From<TopologyKey> for TopologyKind {
    fn from(k: TopologyKey) -> Self {
        match k {
            TopologyKey::Complete => Self::Complete,
            TopologyKey::Ring => Self::Ring,
            TopologyKey::File => Self::File,
        }
    }
}

impl From<TopologyKind> for TopologyKey {
    fn from(k: TopologyKind) -> Self {
        match k {
            TopologyKind::Complete => Self::Complete,
            TopologyKind::Ring => Self::Ring,
            TopologyKind::File => Self::File,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub topology: TopologyKey,
    pub n: usize,
    pub g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            topology: TopologyKey::Complete,
            n: 3,
            g: 0.015,
            matrix: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKey {
    #[default]
    Uniform,
    Homogeneous,
    Spiral,
    Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKey,
    pub lo: f64,
    pub hi: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<[f64; 2]>,
    pub p_percent: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKey::Uniform,
            lo: -1.0,
            hi: 1.0,
            values: Vec::new(),
            p_percent: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSection {
    pub tol_rel: f64,
    pub window_frac: f64,
}

impl Default for SyncSection {
    fn default() -> Self {
        let c = SyncCriterion::default();
        Self {
            tol_rel: c.tol_rel,
            window_frac: c.window_frac,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub g_lo: f64,
    pub g_hi: f64,
    pub resolution: f64,
    pub max_expansions: u32,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let s = ThresholdSearch::<f64>::default();
        Self {
            g_lo: s.g_lo,
            g_hi: s.g_hi,
            resolution: s.resolution,
            max_expansions: s.max_expansions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_from: usize,
    pub n_to: usize,
    pub p_list: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_from: 3,
            n_to: 8,
            p_list: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parses TOML; unknown keys are rejected by name.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn criterion(&self) -> SyncCriterion {
        SyncCriterion {
            tol_rel: self.sync.tol_rel,
            window_frac: self.sync.window_frac,
        }
    }

    pub fn search(&self) -> ThresholdSearch<f64> {
        ThresholdSearch {
            g_lo: self.threshold.g_lo,
            g_hi: self.threshold.g_hi,
            resolution: self.threshold.resolution,
            criterion: self.criterion(),
            max_expansions: self.threshold.max_expansions,
        }
    }

    /// The unit-strength pattern family; `File` loads its matrix relative to
    /// `base_dir`.
    pub fn topology(&self, base_dir: &Path) -> Result<Topology<f64>> {
        Ok(match self.network.topology {
            TopologyKey::Complete => Topology::Complete,
            TopologyKey::Ring => Topology::Ring,
            TopologyKey::File => {
                let path = self
                    .network
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Config("network.matrix is required for topology = \"file\"".into()))?;
                let text = std::fs::read_to_string(base_dir.join(path))?;
                Topology::File(load_matrix(&text)?)
            }
        })
    }

    /// Node count: `network.n`, or the matrix size for a file topology.
    fn node_count(topology: &Topology<f64>, n: usize) -> usize {
        match topology {
            Topology::File(m) => m.n(),
            _ => n,
        }
    }

    /// Fully validated simulation config. The coupling is the pattern at
    /// strength `network.g`.
    pub fn sim_config(&self, base_dir: &Path) -> Result<SimConfig<f64>> {
        let topology = self.topology(base_dir)?;
        let n = Self::node_count(&topology, self.network.n);
        let coupling = topology.build(n, self.network.g)?;
        let config = self.sim_config_with(coupling)?;
        config.validate()?;
        Ok(config)
    }

    /// Like [`Self::sim_config`] with the coupling replaced by its unit-strength
    /// pattern, as threshold searches expect. Stability is checked per probe,
    /// not here.
    pub fn unit_sim_config(&self, base_dir: &Path) -> Result<SimConfig<f64>> {
        let topology = self.topology(base_dir)?;
        let n = Self::node_count(&topology, self.network.n);
        self.sim_config_with(topology.build(n, 1.0)?)
    }

    fn sim_config_with(&self, coupling: CouplingMatrix<f64>) -> Result<SimConfig<f64>> {
        let g = &self.grid;
        let p = &self.params;
        let f = &self.forcing;
        let i = &self.initial;
        let grid = Grid::new(g.nx, g.ny, g.lx, g.ly)?;
        let params = FhnParams::new(p.eps, p.d_u, p.a, p.b)?;
        let forcing = ForcingProfile {
            kind: match f.kind {
                ForcingKindKey::Constant => ForcingKind::Constant,
                ForcingKindKey::ExcitableWindow => ForcingKind::ExcitableWindow,
            },
            level: f.level,
            outside_level: f.outside_level,
            center: f.center.map(|[x, y]| (x, y)),
            radius: f.radius,
        };
        let ic = match i.kind {
            InitialKey::Uniform => InitialCondition::UniformRandom { lo: i.lo, hi: i.hi },
            InitialKey::Homogeneous => {
                let values = if i.values.is_empty() {
                    vec![(0.0, 0.0)]
                } else {
                    i.values.iter().map(|&[u, v]| (u, v)).collect()
                };
                InitialCondition::Homogeneous { values }
            }
            InitialKey::Spiral => InitialCondition::SpiralSeed,
            InitialKey::Mixture => InitialCondition::Mixture { p_percent: i.p_percent },
        };
        if self.sync.tol_rel <= 0.0 || !(0.0..=1.0).contains(&self.sync.window_frac) {
            return Err(Error::Config(
                "sync.tol_rel must be > 0 and sync.window_frac in [0, 1]".into(),
            ));
        }
        let mut config = SimConfig::new(grid, coupling, self.t_end);
        config.params = params;
        config.forcing = forcing;
        config.dt = self.dt;
        config.ic = ic;
        config.seed = self.seed;
        config.record_every = self.record_every;
        config.snapshot_times = self.snapshot_times.clone();
        Ok(config)
    }
}
