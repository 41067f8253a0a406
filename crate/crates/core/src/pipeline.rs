//! End-to-end experiment orchestration over a run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json                      config snapshot with its hash
//! circuits/d{d}_{prep}_{basis}.txt noiseless circuit skeletons
//! dem/d{d}_p{p}_{basis}.dem        detector error models of the measurement-basis circuits
//! dem/d{d}_p{p}_{basis}.graph      matching graphs
//! shots/d{d}_p{p}_{prep}_{basis}.bin
//! decode/d{d}_p{p}_{prep}_{basis}.json
//! ev.csv
//! fit.json, plot_*.csv, curve_*.csv
//! report.txt, report.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{build_memory_circuit, Basis, PrepState};
use crate::decoder::{decode_batch, ler_with_error, sample_and_decode, Decoder};
use crate::dem::{build_matching_graph, extract_dem, MatchingGraph};
use crate::error::{Error, Result};
use crate::ev::{
    channel_estimate, combine_evs, decompose_state, ev_from_ler, EVEstimate, EvLabel, EvMethod, DECOMPOSITION_BASIS,
    EV_CSV_HEADER, TOMOGRAPHY_INPUTS,
};
use crate::extrapolation::{
    bootstrap, effective_distance, improvement_ratio, lm_fit, resource_savings, richardson_extrapolate, Ansatz,
    BootstrapSummary, DataPoint, DataSeries, ExpTerm, Parity, ResourceSavings,
};
use crate::frame::FrameSampler;
use crate::layout::build_patch;
use crate::noise::{apply_si1000, NoiseParams};
use crate::shots::ShotBatch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Decomposition,
    Tomography,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputState {
    /// A stabiliser state (`0`, `1`, `+`, `-`, `+i`, `-i`) or `T`.
    Named(String),
    XyPlane { xy_plane: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotSchedule {
    Uniform(usize),
    PerDistance(Vec<usize>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub inhomogeneity_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub lambdas: Vec<f64>,
    pub fs: Vec<f64>,
    pub baseline_d: usize,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig { lambdas: vec![2.0, 5.0, 10.0], fs: vec![10.0, 100.0, 1000.0], baseline_d: 9 }
    }
}

fn default_rounds_factor() -> usize {
    3
}
fn default_bootstrap_trials() -> usize {
    1000
}
fn default_workers() -> usize {
    1
}
fn default_parity() -> Parity {
    Parity::All
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distances: Vec<usize>,
    #[serde(default = "default_parity")]
    pub parity: Parity,
    #[serde(default = "default_rounds_factor")]
    pub rounds_factor: usize,
    pub p_values: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub shots_per_point: ShotSchedule,
    pub input_state: InputState,
    pub observable: Basis,
    pub method: Method,
    pub cutoff_d: usize,
    #[serde(default = "default_bootstrap_trials")]
    pub bootstrap_trials: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Fit ansatz; unset picks the double exponential when there are at least seven
    /// fit points and the single exponential otherwise.
    #[serde(default)]
    pub ansatz: Option<Ansatz>,
    #[serde(default = "default_true")]
    pub persist_shots: bool,
    #[serde(default)]
    pub resource: ResourceConfig,
}

/// A state whose expectation values are being estimated.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub label: String,
    /// Pauli expectations `(1, ⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
    pub b: [f64; 4],
    pub stabiliser: Option<PrepState>,
}

impl Target {
    pub fn true_ev(&self, observable: Basis) -> f64 {
        match observable {
            Basis::X => self.b[1],
            Basis::Y => self.b[2],
            Basis::Z => self.b[3],
        }
    }
}

/// One memory experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Experiment {
    pub d: usize,
    pub p_index: usize,
    pub prep: PrepState,
    pub basis: Basis,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.distances.is_empty() {
            return bad("no distances".into());
        }
        if self.distances.windows(2).any(|w| w[0] >= w[1]) {
            return bad("distances must be strictly increasing".into());
        }
        if self.distances[0] < 2 {
            return bad("distances must be at least 2".into());
        }
        if !self.distances.contains(&self.cutoff_d) {
            return bad(format!("cutoff_d {} is not one of the distances", self.cutoff_d));
        }
        if self.rounds_factor == 0 {
            return bad("rounds_factor must be at least 1".into());
        }
        if self.p_values.is_empty() {
            return bad("no p values".into());
        }
        for &p in &self.p_values {
            let params = NoiseParams { p, inhomogeneity_sigma: self.noise.inhomogeneity_sigma, seed: self.noise.seed };
            params.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        match &self.shots_per_point {
            ShotSchedule::Uniform(n) if *n == 0 => return bad("shots_per_point must be at least 1".into()),
            ShotSchedule::PerDistance(v) if v.len() != self.distances.len() => {
                return bad("per-distance shot list must match distances".into())
            }
            ShotSchedule::PerDistance(v) if v.contains(&0) => return bad("shots_per_point must be at least 1".into()),
            _ => {}
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let targets = self.targets()?;
        if self.method == Method::Direct && targets.iter().any(|t| t.stabiliser.is_none()) {
            return bad("direct estimation needs a stabiliser input state".into());
        }
        Ok(())
    }

    pub fn shots_for(&self, d: usize) -> usize {
        match &self.shots_per_point {
            ShotSchedule::Uniform(n) => *n,
            ShotSchedule::PerDistance(v) => v[self.distances.iter().position(|&x| x == d).unwrap()],
        }
    }

    pub fn noise_params(&self, p: f64) -> NoiseParams {
        NoiseParams { p, inhomogeneity_sigma: self.noise.inhomogeneity_sigma, seed: self.noise.seed }
    }

    pub fn targets(&self) -> Result<Vec<Target>> {
        match &self.input_state {
            InputState::Named(name) if name.eq_ignore_ascii_case("t") => Ok(vec![Target {
                label: "T".into(),
                b: crate::ev::xy_plane_target(std::f64::consts::FRAC_PI_4),
                stabiliser: None,
            }]),
            InputState::Named(name) => {
                let s: PrepState = name.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
                let [x, y, z] = s.bloch();
                Ok(vec![Target { label: s.label().into(), b: [1.0, x, y, z], stabiliser: Some(s) }])
            }
            InputState::XyPlane { xy_plane } => {
                if xy_plane.is_empty() {
                    return Err(Error::Config("empty xy_plane angle list".into()));
                }
                Ok(xy_plane
                    .iter()
                    .map(|&theta| Target {
                        label: format!("xy{theta}"),
                        b: crate::ev::xy_plane_target(theta),
                        stabiliser: None,
                    })
                    .collect())
            }
        }
    }

    /// The memory experiments the configured method needs at every `(d, p)`.
    pub fn experiments(&self) -> Result<Vec<Experiment>> {
        let mut per_point: Vec<(PrepState, Basis)> = match self.method {
            Method::Direct => self.targets()?.iter().map(|t| (t.stabiliser.unwrap(), self.observable)).collect(),
            Method::Decomposition => DECOMPOSITION_BASIS.iter().map(|s| (*s, self.observable)).collect(),
            Method::Tomography => TOMOGRAPHY_INPUTS
                .iter()
                .flat_map(|s| Basis::ALL.iter().map(move |b| (*s, *b)))
                .collect(),
        };
        per_point.sort();
        per_point.dedup();
        let mut out = Vec::new();
        for &d in &self.distances {
            for p_index in 0..self.p_values.len() {
                for &(prep, basis) in &per_point {
                    out.push(Experiment { d, p_index, prep, basis });
                }
            }
        }
        Ok(out)
    }

    /// Hash over everything except `workers`, which does not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        let text = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Seed for one experiment, derived from the run seed and the experiment's identity so
/// that it does not depend on scheduling.
pub fn experiment_seed(seed: u64, e: &Experiment, p: f64) -> u64 {
    let key = format!("{seed}:{}:{p}:{}:{}", e.d, e.prep.label(), e.basis);
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Build,
    Sample,
    Dem,
    Decode,
    Estimate,
    Fit,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Build, Stage::Sample, Stage::Dem, Stage::Decode, Stage::Estimate, Stage::Fit, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Build => "build",
            Stage::Sample => "sample",
            Stage::Dem => "dem",
            Stage::Decode => "decode",
            Stage::Estimate => "estimate",
            Stage::Fit => "fit",
            Stage::Report => "report",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeSummary {
    pub config_hash: String,
    pub seed: u64,
    pub d: usize,
    pub p: f64,
    pub prep: String,
    pub basis: Basis,
    pub n_shots: usize,
    pub n_fails: usize,
    #[serde(rename = "P_L")]
    pub p_l: f64,
    pub std_err: f64,
}

/// A run directory bound to its configuration.
pub struct ResultStore {
    pub root: PathBuf,
    pub config: ExperimentConfig,
    pub config_hash: String,
}

fn stage_err(stage: Stage, item: impl Into<String>) -> impl FnOnce(Error) -> Error {
    move |e| Error::Stage { stage: stage.name().into(), item: item.into(), source: Box::new(e) }
}

impl ResultStore {
    /// Opens (creating if needed) a run directory and writes the config snapshot. An
    /// existing snapshot with a different hash is replaced, and stale intermediates are
    /// ignored because every artifact records the hash it was made with.
    pub fn create(root: &Path, config: ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(root)?;
        let config_hash = config.hash();
        let snapshot = serde_json::json!({ "config_hash": config_hash, "config": config });
        fs::write(root.join("config.json"), serde_json::to_string_pretty(&snapshot)? + "\n")?;
        Ok(ResultStore { root: root.to_path_buf(), config, config_hash })
    }

    /// Opens a run directory from its snapshot.
    pub fn open(root: &Path) -> Result<Self> {
        let text = fs::read_to_string(root.join("config.json"))
            .map_err(|e| Error::Config(format!("{}: no config snapshot ({e})", root.display())))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let config: ExperimentConfig = serde_json::from_value(v["config"].clone())
            .map_err(|e| Error::Config(format!("bad config snapshot: {e}")))?;
        config.validate()?;
        Self::create(root, config)
    }

    fn p(&self, e: &Experiment) -> f64 {
        self.config.p_values[e.p_index]
    }

    fn seed_of(&self, e: &Experiment) -> u64 {
        experiment_seed(self.config.seed, e, self.p(e))
    }

    fn path(&self, dir: &str, name: String) -> PathBuf {
        self.root.join(dir).join(name)
    }

    fn circuit_path(&self, d: usize, prep: PrepState, basis: Basis) -> PathBuf {
        self.path("circuits", format!("d{d}_{}_{basis}.txt", prep.label()))
    }

    fn dem_path(&self, d: usize, p: f64, basis: Basis, ext: &str) -> PathBuf {
        self.path("dem", format!("d{d}_p{p}_{basis}.{ext}"))
    }

    fn shots_path(&self, e: &Experiment) -> PathBuf {
        self.path("shots", format!("d{}_p{}_{}_{}.bin", e.d, self.p(e), e.prep.label(), e.basis))
    }

    fn decode_path(&self, e: &Experiment) -> PathBuf {
        self.path("decode", format!("d{}_p{}_{}_{}.json", e.d, self.p(e), e.prep.label(), e.basis))
    }

    fn item(&self, e: &Experiment) -> String {
        format!("d={} p={} prep={} basis={}", e.d, self.p(e), e.prep, e.basis)
    }

    fn noisy(&self, e: &Experiment) -> Result<crate::noise::NoisyCircuit> {
        let patch = build_patch(e.d)?;
        let circuit = build_memory_circuit(&patch, e.prep, e.basis, self.config.rounds_factor)?;
        apply_si1000(&circuit, &self.config.noise_params(self.p(e)))
    }

    /// Matching graph for shots measured in `basis`, persisted by the `dem` stage.
    fn load_graph(&self, d: usize, p: f64, basis: Basis) -> Result<MatchingGraph> {
        let path = self.dem_path(d, p, basis, "graph");
        let text = fs::read_to_string(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        MatchingGraph::from_text(&text)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| match stage {
            Stage::Build => self.stage_build(),
            Stage::Sample => self.stage_sample(),
            Stage::Dem => self.stage_dem(),
            Stage::Decode => self.stage_decode(),
            Stage::Estimate => self.stage_estimate(),
            Stage::Fit => self.stage_fit(),
            Stage::Report => self.stage_report(),
        })
    }

    /// Runs every stage up to and including `last`.
    pub fn run_through(&self, last: Stage) -> Result<()> {
        for stage in Stage::ALL.into_iter().filter(|s| *s <= last) {
            self.run_stage(stage)?;
        }
        Ok(())
    }

    fn stage_build(&self) -> Result<()> {
        fs::create_dir_all(self.root.join("circuits"))?;
        let mut seen = std::collections::BTreeSet::new();
        for e in self.config.experiments()? {
            if !seen.insert((e.d, e.prep, e.basis)) {
                continue;
            }
            let path = self.circuit_path(e.d, e.prep, e.basis);
            let built = build_patch(e.d)
                .and_then(|patch| build_memory_circuit(&patch, e.prep, e.basis, self.config.rounds_factor))
                .map_err(stage_err(Stage::Build, self.item(&e)))?;
            fs::write(path, built.to_text())?;
        }
        Ok(())
    }

    fn stage_dem(&self) -> Result<()> {
        fs::create_dir_all(self.root.join("dem"))?;
        let mut seen = std::collections::BTreeSet::new();
        for e in self.config.experiments()? {
            let p = self.p(&e);
            if !seen.insert((e.d, e.p_index, e.basis)) {
                continue;
            }
            let graph_path = self.dem_path(e.d, p, e.basis, "graph");
            let item = format!("d={} p={p} basis={}", e.d, e.basis);
            let run = || -> Result<(String, String)> {
                let patch = build_patch(e.d)?;
                let circuit =
                    build_memory_circuit(&patch, PrepState::eigenstate(e.basis), e.basis, self.config.rounds_factor)?;
                let noisy = apply_si1000(&circuit, &self.config.noise_params(p))?;
                let dem = extract_dem(&noisy)?;
                let graph = build_matching_graph(&dem)?;
                Ok((dem.to_text(), graph.to_text()))
            };
            let (dem, graph) = run().map_err(stage_err(Stage::Dem, item))?;
            fs::write(self.dem_path(e.d, p, e.basis, "dem"), dem)?;
            fs::write(graph_path, graph)?;
        }
        Ok(())
    }

    fn stage_sample(&self) -> Result<()> {
        if !self.config.persist_shots {
            return Ok(());
        }
        fs::create_dir_all(self.root.join("shots"))?;
        for e in self.config.experiments()? {
            let path = self.shots_path(&e);
            let seed = self.seed_of(&e);
            let n = self.config.shots_for(e.d);
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(batch) = ShotBatch::read_binary(&bytes[..]) {
                    if batch.seed == seed && batch.n_shots == n {
                        continue;
                    }
                }
            }
            let batch = self
                .noisy(&e)
                .and_then(|noisy| Ok(FrameSampler::new(&noisy)?.sample(n, seed)))
                .map_err(stage_err(Stage::Sample, self.item(&e)))?;
            let mut buf = Vec::new();
            batch.write_binary(&mut buf)?;
            let tmp = path.with_extension("bin.tmp");
            fs::write(&tmp, buf)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    fn read_summary(&self, e: &Experiment) -> Option<DecodeSummary> {
        let text = fs::read_to_string(self.decode_path(e)).ok()?;
        let s: DecodeSummary = serde_json::from_str(&text).ok()?;
        (s.config_hash == self.config_hash).then_some(s)
    }

    fn stage_decode(&self) -> Result<()> {
        fs::create_dir_all(self.root.join("decode"))?;
        for e in self.config.experiments()? {
            if self.read_summary(&e).is_some() {
                continue;
            }
            let p = self.p(&e);
            let seed = self.seed_of(&e);
            let n = self.config.shots_for(e.d);
            let run = || -> Result<(usize, usize)> {
                let graph = self.load_graph(e.d, p, e.basis)?;
                let decoder = Decoder::new(&graph)?;
                if self.config.persist_shots {
                    let bytes = fs::read(self.shots_path(&e))?;
                    let batch = ShotBatch::read_binary(&bytes[..])?;
                    if batch.seed != seed || batch.n_shots != n {
                        return Err(Error::Format("shot file does not match the configuration".into()));
                    }
                    let r = decode_batch(&decoder, &batch)?;
                    Ok((r.n_shots, r.n_fails))
                } else {
                    let sampler = FrameSampler::new(&self.noisy(&e)?)?;
                    let c = sample_and_decode(&sampler, &decoder, n, seed)?;
                    Ok((c.n_shots, c.n_fails))
                }
            };
            let (n_shots, n_fails) = run().map_err(stage_err(Stage::Decode, self.item(&e)))?;
            let (p_l, std_err) = ler_with_error(n_fails, n_shots);
            let summary = DecodeSummary {
                config_hash: self.config_hash.clone(),
                seed,
                d: e.d,
                p,
                prep: e.prep.label().into(),
                basis: e.basis,
                n_shots,
                n_fails,
                p_l,
                std_err,
            };
            fs::write(self.decode_path(&e), serde_json::to_string_pretty(&summary)? + "\n")?;
        }
        Ok(())
    }

    fn component_ev(&self, e: &Experiment) -> Result<EVEstimate> {
        let s = self
            .read_summary(e)
            .ok_or_else(|| Error::Format(format!("missing decode summary for {}", self.item(e))))?;
        let sign = if e.prep.basis == e.basis && e.prep.negative { -1.0 } else { 1.0 };
        let label = EvLabel { state: e.prep.label().into(), observable: e.basis, d: e.d, p: s.p };
        ev_from_ler(s.p_l, sign, s.n_shots, label)
    }

    /// Every EV row for the run: components (method `direct`) followed by the target
    /// estimates.
    pub fn estimates(&self) -> Result<Vec<(EVEstimate, EvMethod)>> {
        let cfg = &self.config;
        let targets = cfg.targets()?;
        let mut rows = Vec::new();
        for p_index in 0..cfg.p_values.len() {
            for &d in &cfg.distances {
                let exp = |prep, basis| Experiment { d, p_index, prep, basis };
                let item = format!("d={d} p={}", cfg.p_values[p_index]);
                let err = || stage_err(Stage::Estimate, item.clone());
                match cfg.method {
                    Method::Direct => {
                        for t in &targets {
                            let ev = self.component_ev(&exp(t.stabiliser.unwrap(), cfg.observable)).map_err(err())?;
                            rows.push((ev, EvMethod::Direct));
                        }
                    }
                    Method::Decomposition => {
                        let comps = DECOMPOSITION_BASIS
                            .iter()
                            .map(|s| self.component_ev(&exp(*s, cfg.observable)))
                            .collect::<Result<Vec<_>>>()
                            .map_err(err())?;
                        let comps: [EVEstimate; 6] = comps.try_into().unwrap();
                        rows.extend(comps.iter().cloned().map(|c| (c, EvMethod::Direct)));
                        for t in &targets {
                            let dec = decompose_state(t.b).map_err(err())?;
                            rows.push((combine_evs(&dec, &comps, &t.label).map_err(err())?, EvMethod::Decomposition));
                        }
                    }
                    Method::Tomography => {
                        let mut data = Vec::new();
                        for s in TOMOGRAPHY_INPUTS {
                            let row = Basis::ALL
                                .iter()
                                .map(|b| self.component_ev(&exp(s, *b)))
                                .collect::<Result<Vec<_>>>()
                                .map_err(err())?;
                            rows.extend(row.iter().cloned().map(|c| (c, EvMethod::Direct)));
                            data.push(<[EVEstimate; 3]>::try_from(row).unwrap());
                        }
                        let data: [[EVEstimate; 3]; 4] = data.try_into().unwrap();
                        for t in &targets {
                            rows.push((channel_estimate(&data, t.b, cfg.observable, &t.label), EvMethod::Channel));
                        }
                    }
                }
            }
        }
        Ok(rows)
    }

    fn stage_estimate(&self) -> Result<()> {
        let mut out = format!("# config_hash={} seed={}\n{EV_CSV_HEADER}\n", self.config_hash, self.config.seed);
        for (ev, method) in self.estimates()? {
            out.push_str(&ev.csv_row(method));
            out.push('\n');
        }
        fs::write(self.root.join("ev.csv"), out)?;
        Ok(())
    }

    fn final_method(&self) -> EvMethod {
        match self.config.method {
            Method::Direct => EvMethod::Direct,
            Method::Decomposition => EvMethod::Decomposition,
            Method::Tomography => EvMethod::Channel,
        }
    }

    /// Reads `ev.csv` back and groups the target rows into one series per `(p, target)`.
    pub fn series(&self) -> Result<Vec<(f64, Target, DataSeries)>> {
        let path = self.root.join("ev.csv");
        let text = fs::read_to_string(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let rows = parse_ev_csv(&text)?;
        let method = self.final_method().to_string();
        let mut out = Vec::new();
        for &p in &self.config.p_values {
            for t in self.config.targets()? {
                let points: Vec<DataPoint> = rows
                    .iter()
                    .filter(|r| r.method == method && r.state == t.label && r.p == p && r.observable == self.config.observable)
                    .map(|r| DataPoint { d: r.d, ev: r.value, std_err: r.std_err, n_shots: r.n_shots })
                    .collect();
                let series = DataSeries::new(points, self.config.parity, self.config.cutoff_d)?;
                out.push((p, t, series));
            }
        }
        Ok(out)
    }

    fn ansatz_for(&self, series: &DataSeries) -> Ansatz {
        self.config.ansatz.unwrap_or(if series.fit_points().len() >= 7 { Ansatz::DoubleExp } else { Ansatz::SingleExp })
    }

    fn stage_fit(&self) -> Result<()> {
        let mut reports = Vec::new();
        for (p, target, series) in self.series()? {
            let item = format!("p={p} state={}", target.label);
            let report = self.fit_series(p, &target, &series).map_err(stage_err(Stage::Fit, item))?;
            let stem = format!("p{p}_{}", target.label);
            let mut plot = String::from("d,ev,std_err,fitted_value,residual\n");
            if let Some(fit) = &report.fit {
                for r in fit_rows(&series, fit) {
                    let _ = writeln!(plot, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4]);
                }
                let mut curve = String::from("d,fitted_value\n");
                let (lo, hi) = (series.points[0].d as f64, series.points.last().unwrap().d as f64);
                for k in 0..=200 {
                    let d = lo + (hi + 4.0 - lo) * k as f64 / 200.0;
                    let _ = writeln!(curve, "{d},{}", crate::extrapolation::FitResult::evaluate(fit, d));
                }
                fs::write(self.root.join(format!("curve_{stem}.csv")), curve)?;
            }
            fs::write(self.root.join(format!("plot_{stem}.csv")), plot)?;
            reports.push(report);
        }
        let doc = FitDocument {
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
            series: reports,
        };
        fs::write(self.root.join("fit.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    pub fn fit_series(&self, p: f64, target: &Target, series: &DataSeries) -> Result<SeriesReport> {
        let true_ev = target.true_ev(self.config.observable);
        let fit_points = series.fit_points();
        let ev_values: Vec<f64> = fit_points.iter().map(|pt| pt.ev).collect();
        let degenerate = ev_values.windows(2).all(|w| w[0] == w[1]);
        let ansatz = self.ansatz_for(series);
        let mut notes = Vec::new();
        let fit = match lm_fit(series, ansatz) {
            Ok(f) => Some(f),
            Err(e) => {
                notes.push(format!("fit failed: {e}"));
                None
            }
        };
        if degenerate {
            notes.push("all fit points are equal; the fit is degenerate".into());
        }
        let richardson = richardson_extrapolate(series).ok();
        let boot_seed = self.config.seed ^ u64::from_le_bytes(Sha256::digest(format!("{p}:{}", target.label).as_bytes())[..8].try_into().unwrap());
        let boot = fit.as_ref().map(|f| bootstrap(series, f.ansatz, self.config.bootstrap_trials, boot_seed));
        let extrapolated = fit.as_ref().map(|f| f.extrapolated);
        let d_eff = extrapolated.and_then(|a| match effective_distance(series, a - true_ev, true_ev) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("d_eff undefined: {e}"));
                None
            }
        });
        let ir = extrapolated
            .map(|a| fit_points.iter().map(|pt| ImprovementRatio { d: pt.d, ratio: improvement_ratio(pt.ev, a, true_ev) }).collect())
            .unwrap_or_default();
        if let Some(f) = &fit {
            if !f.converged {
                notes.push("fit did not converge; parameters are best-so-far".into());
            }
        }
        Ok(SeriesReport {
            p,
            state: target.label.clone(),
            observable: self.config.observable,
            true_ev,
            points: series.points.clone(),
            fit: fit.map(|mut f| {
                if let Some(b) = &boot {
                    f.bootstrap_samples = b.samples.clone();
                }
                f
            }),
            bootstrap: boot.map(|mut b| {
                b.samples.clear();
                b
            }),
            richardson,
            d_eff,
            improvement_ratios: ir,
            degenerate,
            notes,
        })
    }

    fn stage_report(&self) -> Result<()> {
        let fit_path = self.root.join("fit.json");
        let doc: Option<FitDocument> =
            fs::read_to_string(&fit_path).ok().and_then(|t| serde_json::from_str(&t).ok());
        let resources = self.resource_table()?;
        let text = render_report(doc.as_ref(), &resources);
        fs::write(self.root.join("report.txt"), &text)?;
        let json = serde_json::json!({
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "series": doc.map(|d| d.series).unwrap_or_default(),
            "resource_savings": resources,
        });
        fs::write(self.root.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
        Ok(())
    }

    pub fn resource_table(&self) -> Result<Vec<ResourceRow>> {
        let r = &self.config.resource;
        let mut rows = Vec::new();
        for &lambda in &r.lambdas {
            for &f in &r.fs {
                let s = resource_savings(lambda, f, r.baseline_d)?;
                rows.push(ResourceRow { lambda, f, baseline_d: r.baseline_d, savings: s });
            }
        }
        Ok(rows)
    }
}

fn fit_rows(series: &DataSeries, fit: &crate::extrapolation::FitResult) -> Vec<[f64; 5]> {
    fit.plot_rows(series)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub lambda: f64,
    pub f: f64,
    pub baseline_d: usize,
    #[serde(flatten)]
    pub savings: ResourceSavings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub p: f64,
    pub state: String,
    pub observable: Basis,
    pub true_ev: f64,
    pub points: Vec<DataPoint>,
    pub fit: Option<crate::extrapolation::FitResult>,
    pub bootstrap: Option<BootstrapSummary>,
    #[serde(with = "crate::jsonfloat::option")]
    pub richardson: Option<f64>,
    #[serde(with = "crate::jsonfloat::option")]
    pub d_eff: Option<f64>,
    pub improvement_ratios: Vec<ImprovementRatio>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRatio {
    pub d: usize,
    #[serde(with = "crate::jsonfloat")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub config_hash: String,
    pub seed: u64,
    pub series: Vec<SeriesReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvRow {
    pub state: String,
    pub observable: Basis,
    pub d: usize,
    pub p: f64,
    pub value: f64,
    pub std_err: f64,
    pub n_shots: usize,
    pub method: String,
}

pub fn parse_ev_csv(text: &str) -> Result<Vec<EvRow>> {
    let mut rows = Vec::new();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == EV_CSV_HEADER => {}
        _ => return Err(Error::Format("EV CSV: missing header".into())),
    }
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Format(format!("EV CSV: bad row `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("EV CSV: bad number `{s}`")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("EV CSV: bad integer `{s}`")));
        rows.push(EvRow {
            state: f[0].into(),
            observable: f[1].parse()?,
            d: int(f[2])?,
            p: num(f[3])?,
            value: num(f[4])?,
            std_err: num(f[5])?,
            n_shots: int(f[6])?,
            method: f[7].into(),
        });
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6}"))
}

pub fn render_report(doc: Option<&FitDocument>, resources: &[ResourceRow]) -> String {
    let mut out = String::new();
    match doc {
        None => out.push_str("no results: run the pipeline through the fit stage first\n"),
        Some(doc) if doc.series.is_empty() => out.push_str("no results\n"),
        Some(doc) => {
            let _ = writeln!(out, "config {}  seed {}", doc.config_hash, doc.seed);
            for s in &doc.series {
                let _ = writeln!(out, "\n== state {}  observable {}  p = {}  (true EV {:.6})", s.state, s.observable, s.p, s.true_ev);
                let _ = writeln!(out, "{:>4} {:>12} {:>10} {:>12} {:>12}", "d", "EV", "std_err", "fitted", "residual");
                for pt in &s.points {
                    let fitted = s.fit.as_ref().map(|f| f.evaluate(pt.d as f64));
                    let _ = writeln!(
                        out,
                        "{:>4} {:>12.6} {:>10.2e} {:>12} {:>12}",
                        pt.d,
                        pt.ev,
                        pt.std_err,
                        fmt_opt(fitted),
                        fitted.map_or("-".into(), |f| format!("{:.2e}", pt.ev - f))
                    );
                }
                if let Some(f) = &s.fit {
                    let _ = writeln!(out, "ansatz {}  A = {:.6}  R2 = {:.6}  converged = {}", f.ansatz, f.a, f.r2, f.converged);
                    let terms: Vec<String> = f.terms.iter().map(|ExpTerm { b, c }| format!("B={b:.4e} C={c:.4}")).collect();
                    let _ = writeln!(out, "terms {}", terms.join(", "));
                }
                if let Some(b) = &s.bootstrap {
                    let _ = writeln!(out, "bootstrap 68% [{:.6}, {:.6}]  95% [{:.6}, {:.6}]  std {:.2e}", b.p16, b.p84, b.p2_5, b.p97_5, b.std);
                }
                let _ = writeln!(out, "richardson {}  d_eff {}", fmt_opt(s.richardson), fmt_opt(s.d_eff));
                let irs: Vec<String> = s.improvement_ratios.iter().map(|r| format!("d={}: {:.3}", r.d, r.ratio)).collect();
                let _ = writeln!(out, "improvement ratio {}", irs.join("  "));
                for n in &s.notes {
                    let _ = writeln!(out, "note: {n}");
                }
            }
        }
    }
    if !resources.is_empty() {
        let _ = writeln!(out, "\n== resource savings (baseline d = {})", resources[0].baseline_d);
        let _ = writeln!(out, "{:>8} {:>8} {:>10} {:>10}", "Lambda", "f", "delta_d", "qubits/");
        for r in resources {
            let _ = writeln!(out, "{:>8} {:>8} {:>10.2} {:>10.2}", r.lambda, r.f, r.savings.delta_d, r.savings.qubit_ratio);
        }
    }
    out
}
