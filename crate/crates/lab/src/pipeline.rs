//! Stage orchestration with an on-disk stage store.
//!
//! Every stage has an input hash built from its configuration subsection and
//! the hashes of the stages it depends on. A stage whose stored record matches
//! that hash, and whose files still carry the recorded checksums, is skipped.
//! Cheap upstream objects (condensate, kernels, blocks) are rebuilt in memory
//! when a downstream stage needs them; the ground state is read back from its
//! `FOCKVEC1` file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use bosegas_core::decay::{
    certify, fit_decay_rate, tail_energy_check, CertifyOptions, DecayCertificate, DecayFit, DecayProfile, ProfileSource,
};
use bosegas_core::fock::{build_basis, FockBasis};
use bosegas_core::grid::Grid1D;
use bosegas_core::hamiltonian::{
    assemble_blocks, assemble_bogoliubov, assemble_full, compute_kernels, Blocks, ExcitationHamiltonian, KernelSet,
    Variant,
};
use bosegas_core::hartree::{solve_hartree, HartreeOptions, HartreeProblem, HartreeSolution};
use bosegas_core::lemmas::{
    check_k0_gap, check_k1_bound, check_k2_bound, check_k2_coulomb, check_k3_bound, check_k4_bound, CoulombSurrogate,
    LemmaId, LemmaReport,
};
use bosegas_core::potentials::{
    make_bounded_potential, residual_supnorm, yukawa_split, PairPotential, RadialFunction, RadialGrid, SpectrumPolicy,
};
use bosegas_core::solver::{bogoliubov_oracle, lanczos_ground_state, GroundState, LanczosOptions};

use crate::config::{CoulombConfig, ExternalSpec, Geometry, PotentialSpec, RunConfig};
use crate::error::{LabError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Hartree,
    Assemble,
    Solve,
    Decay,
    Certify,
    Lemmas,
    CoulombSplit,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Hartree,
        Stage::Assemble,
        Stage::Solve,
        Stage::Decay,
        Stage::Certify,
        Stage::Lemmas,
        Stage::CoulombSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Hartree => "hartree",
            Stage::Assemble => "assemble",
            Stage::Solve => "solve",
            Stage::Decay => "decay",
            Stage::Certify => "certify",
            Stage::Lemmas => "lemmas",
            Stage::CoulombSplit => "coulomb-split",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Hartree | Stage::CoulombSplit => None,
            Stage::Assemble => Some(Stage::Hartree),
            Stage::Solve | Stage::Lemmas => Some(Stage::Assemble),
            Stage::Decay => Some(Stage::Solve),
            Stage::Certify => Some(Stage::Decay),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub hash: String,
    pub status: String,
    pub wall_time_s: f64,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: Value,
    pub seeds: Value,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub status: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Recompute every stage even when its record matches.
    pub force: bool,
    /// Also write the assembled matrix as a coordinate list.
    pub export_matrix: bool,
}

/// Certificate source for the `certify` stage run on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifySource {
    GroundState,
    Oracle,
}

/// Lazily built objects shared between stages of one run.
pub struct Run {
    pub config: RunConfig,
    pub options: RunOptions,
    out: PathBuf,
    problem: Option<HartreeProblem>,
    potential: Option<PairPotential>,
    sol: Option<HartreeSolution>,
    kernels: Option<KernelSet>,
    basis: Option<FockBasis>,
    blocks: Option<Blocks>,
    hamiltonian: Option<ExcitationHamiltonian>,
    ground: Option<GroundState>,
    profile: Option<DecayProfile>,
    fit: Option<DecayFit>,
    records: Vec<StageRecord>,
}

impl std::fmt::Debug for Run {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Run").field("out", &self.out).field("records", &self.records).finish_non_exhaustive()
    }
}

/// Outcome of one stage body: files written plus an optional refusal to certify.
struct StageOutput {
    files: Vec<PathBuf>,
    no_certificate: Option<String>,
}

impl StageOutput {
    fn files(files: Vec<PathBuf>) -> Self {
        Self { files, no_certificate: None }
    }
}

impl Run {
    pub fn new(config: RunConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let out = config.output_dir.clone();
        Ok(Self {
            config,
            options,
            out,
            problem: None,
            potential: None,
            sol: None,
            kernels: None,
            basis: None,
            blocks: None,
            hamiltonian: None,
            ground: None,
            profile: None,
            fit: None,
            records: Vec::new(),
        })
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record_path(&self, stage: Stage) -> PathBuf {
        self.out.join("stages").join(format!("{}.json", stage.name()))
    }

    pub fn stage_hash(&self, stage: Stage) -> String {
        let c = &self.config;
        let upstream = stage.upstream().map(|s| self.stage_hash(s));
        let input = match stage {
            Stage::Hartree => json!({ "model": c.model }),
            Stage::Assemble => json!({ "up": upstream, "many_body": c.many_body }),
            Stage::Solve => json!({ "up": upstream, "solve": c.solve }),
            Stage::Decay | Stage::Certify => json!({ "up": upstream, "decay": c.analyses.decay }),
            Stage::Lemmas => json!({ "up": upstream, "lemmas": c.analyses.lemmas }),
            Stage::CoulombSplit => json!({ "coulomb": c.analyses.coulomb }),
        };
        crate::config::digest_json(&json!({ "stage": stage.name(), "input": input }))
    }

    fn stored_record(&self, stage: Stage) -> Option<StageRecord> {
        let value = io::read_json(&self.record_path(stage)).ok()?;
        serde_json::from_value(value).ok()
    }

    /// Record on disk with the current input hash and intact files.
    fn valid_record(&self, stage: Stage) -> Option<StageRecord> {
        let record = self.stored_record(stage)?;
        if record.hash != self.stage_hash(stage) {
            return None;
        }
        let intact = record
            .files
            .iter()
            .all(|f| io::sha256_file(&self.out.join(&f.path)).map(|h| h == f.sha256).unwrap_or(false));
        intact.then_some(record)
    }

    fn file_records(&self, files: &[PathBuf]) -> Result<Vec<FileRecord>> {
        files
            .iter()
            .map(|p| {
                Ok(FileRecord {
                    path: p.strip_prefix(&self.out).unwrap_or(p).to_string_lossy().into_owned(),
                    sha256: io::sha256_file(p)?,
                })
            })
            .collect()
    }

    /// Runs every stage in dependency order; analyses without configuration are skipped.
    pub fn run_all(&mut self) -> Result<RunManifest> {
        let mut failure = None;
        for stage in Stage::ALL {
            if stage == Stage::CoulombSplit && self.config.analyses.coulomb.is_none() {
                continue;
            }
            if let Err(e) = self.stage(stage, !self.options.force) {
                failure = Some((stage, e));
                break;
            }
        }
        let status = match &failure {
            None => "ok".to_string(),
            Some((stage, e)) => format!("failed at {}: {e}", stage.name()),
        };
        let manifest = self.write_manifest(status)?;
        match failure {
            Some((_, e)) => Err(e),
            None => Ok(manifest),
        }
    }

    /// Runs one stage on its own. Its upstream stage must already be stored.
    pub fn run_single(&mut self, stage: Stage) -> Result<RunManifest> {
        if let Some(up) = stage.upstream() {
            if self.valid_record(up).is_none() {
                return Err(LabError::MissingStage { stage: stage.name(), required: up.name() });
            }
        }
        let result = self.stage(stage, false);
        let status = match &result {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed at {}: {e}", stage.name()),
        };
        let manifest = self.write_manifest(status)?;
        result.map(|_| manifest)
    }

    fn stage(&mut self, stage: Stage, use_cache: bool) -> Result<()> {
        let hash = self.stage_hash(stage);
        if use_cache {
            if let Some(mut record) = self.valid_record(stage) {
                record.status = "cached".into();
                self.records.push(record);
                return Ok(());
            }
        }
        let start = Instant::now();
        let output = match stage {
            Stage::Hartree => self.hartree_stage()?,
            Stage::Assemble => self.assemble_stage()?,
            Stage::Solve => self.solve_stage()?,
            Stage::Decay => self.decay_stage()?,
            Stage::Certify => self.certify_stage(None)?,
            Stage::Lemmas => self.lemma_stage()?,
            Stage::CoulombSplit => self.coulomb_stage()?,
        };
        let record = StageRecord {
            stage: stage.name().into(),
            hash,
            status: "computed".into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            files: self.file_records(&output.files)?,
        };
        io::write_json(&self.record_path(stage), &serde_json::to_value(&record).expect("record serializes"))?;
        self.records.push(record);
        match output.no_certificate {
            Some(reason) => Err(LabError::NoCertificate { reason }),
            None => Ok(()),
        }
    }

    /// `certify` on its own, choosing the profile; refuses with exit status 4
    /// when no window reaches the target.
    pub fn run_certify(&mut self, source: CertifySource) -> Result<RunManifest> {
        let up = Stage::Decay;
        if self.valid_record(up).is_none() {
            return Err(LabError::MissingStage { stage: Stage::Certify.name(), required: up.name() });
        }
        let start = Instant::now();
        let result = self.certify_stage(Some(source));
        let status = match &result {
            Ok(output) => {
                let record = StageRecord {
                    stage: Stage::Certify.name().into(),
                    hash: self.stage_hash(Stage::Certify),
                    status: "computed".into(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                    files: self.file_records(&output.files)?,
                };
                self.records.push(record);
                match &output.no_certificate {
                    Some(reason) => format!("no certificate: {reason}"),
                    None => "ok".into(),
                }
            }
            Err(e) => format!("failed at certify: {e}"),
        };
        let manifest = self.write_manifest(status)?;
        match result? {
            StageOutput { no_certificate: Some(reason), .. } => Err(LabError::NoCertificate { reason }),
            _ => Ok(manifest),
        }
    }

    fn write_manifest(&self, status: String) -> Result<RunManifest> {
        let c = &self.config;
        let mut files: Vec<FileRecord> = self.records.iter().flat_map(|r| r.files.iter().cloned()).collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        files.dedup_by(|a, b| a.path == b.path);
        let manifest = RunManifest {
            config_hash: c.hash(),
            versions: json!({
                "bosegas-lab": env!("CARGO_PKG_VERSION"),
                "fock_vector_format": "FOCKVEC1",
            }),
            seeds: json!({
                "solve": c.solve.seed,
                "lemmas": c.analyses.lemmas.seed,
                "coulomb": c.analyses.coulomb.as_ref().map(|k| k.seed),
            }),
            stages: self.records.clone(),
            files,
            status,
        };
        io::write_json(&self.path("config.json"), &serde_json::to_value(c).expect("config serializes"))?;
        io::write_json(&self.path("manifest.json"), &serde_json::to_value(&manifest).expect("manifest serializes"))?;
        Ok(manifest)
    }

    // ---- lazily built objects ----

    pub fn problem(&mut self) -> Result<&HartreeProblem> {
        if self.problem.is_none() {
            let m = &self.config.model;
            let stage = LabError::stage("hartree");
            let grid = match m.geometry {
                Geometry::Torus => Grid1D::periodic(m.n, m.length),
                Geometry::Trap => Grid1D::hard_wall(m.n, m.length),
            }
            .map_err(LabError::stage("hartree"))?;
            let potential = match &m.potential {
                PotentialSpec::Zero => PairPotential::zero(m.length),
                PotentialSpec::Bounded { coefficients, symmetrize } => {
                    let pairs = coefficients.iter().map(|c| (c.mode, c.value));
                    if *symmetrize {
                        PairPotential::bounded(pairs, m.length, SpectrumPolicy::Symmetrize)
                    } else {
                        make_bounded_potential(pairs, &grid)
                    }
                }
            }
            .map_err(LabError::stage("hartree"))?;
            let problem = match (&m.geometry, &m.external) {
                (Geometry::Torus, _) => HartreeProblem::homogeneous(grid, potential.clone()),
                (Geometry::Trap, ExternalSpec::None) => HartreeProblem::new(grid, vec![0.0; m.n], potential.clone()),
                (Geometry::Trap, ExternalSpec::Harmonic { omega }) => {
                    HartreeProblem::quadratic_trap(grid, *omega, potential.clone())
                }
                (Geometry::Trap, ExternalSpec::Table { values }) => {
                    HartreeProblem::new(grid, values.clone(), potential.clone())
                }
            }
            .map_err(stage)?;
            self.potential = Some(potential);
            self.problem = Some(problem);
        }
        Ok(self.problem.as_ref().unwrap())
    }

    pub fn potential(&mut self) -> Result<&PairPotential> {
        self.problem()?;
        Ok(self.potential.as_ref().unwrap())
    }

    pub fn solution(&mut self) -> Result<&HartreeSolution> {
        if self.sol.is_none() {
            let tol = self.config.model.hartree_tol;
            let problem = self.problem()?;
            let sol = solve_hartree(problem, &HartreeOptions { tol, ..Default::default() })
                .map_err(LabError::stage("hartree"))?;
            self.sol = Some(sol);
        }
        Ok(self.sol.as_ref().unwrap())
    }

    pub fn kernels(&mut self) -> Result<&KernelSet> {
        if self.kernels.is_none() {
            let m = self.config.many_body.m;
            self.solution()?;
            let sol = self.sol.as_ref().unwrap();
            let v = self.potential.as_ref().unwrap();
            let stage = LabError::stage("assemble");
            let modes = sol.modes(m).map_err(LabError::stage("assemble"))?;
            self.kernels = Some(compute_kernels(sol, v, &modes).map_err(stage)?);
        }
        Ok(self.kernels.as_ref().unwrap())
    }

    pub fn blocks(&mut self) -> Result<(&FockBasis, &Blocks)> {
        if self.blocks.is_none() {
            let b = self.config.many_body.clone();
            self.kernels()?;
            let basis = build_basis(b.m, b.cutoff, b.budget).map_err(LabError::stage("assemble"))?;
            let blocks =
                assemble_blocks(self.kernels.as_ref().unwrap(), &basis).map_err(LabError::stage("assemble"))?;
            self.basis = Some(basis);
            self.blocks = Some(blocks);
        }
        Ok((self.basis.as_ref().unwrap(), self.blocks.as_ref().unwrap()))
    }

    pub fn hamiltonian(&mut self) -> Result<&ExcitationHamiltonian> {
        if self.hamiltonian.is_none() {
            let b = self.config.many_body.clone();
            self.blocks()?;
            let blocks = self.blocks.as_ref().unwrap();
            let h = match Variant::from(b.variant) {
                Variant::Full => assemble_full(b.n_particles, blocks).map_err(LabError::stage("assemble"))?,
                Variant::Bogoliubov => assemble_bogoliubov(blocks),
            };
            self.hamiltonian = Some(h);
        }
        Ok(self.hamiltonian.as_ref().unwrap())
    }

    pub fn ground_state(&mut self) -> Result<&GroundState> {
        if self.ground.is_none() {
            let stored = self.path("ground_state.fockvec");
            let meta = self.path("ground_state.json");
            let gs = if self.valid_record(Stage::Solve).is_some() {
                let v = io::read_fock_vector(&stored)?;
                let meta = io::read_json(&meta)?;
                let b = &self.config.many_body;
                if v.modes != b.m || v.cutoff != b.cutoff {
                    return Err(LabError::Format {
                        path: stored,
                        message: "stored vector belongs to another basis".into(),
                    });
                }
                GroundState {
                    energy: meta["energy"].as_f64().unwrap_or(f64::NAN),
                    vector: v.amplitudes,
                    residual: meta["residual"].as_f64().unwrap_or(f64::NAN),
                    iterations: meta["iterations"].as_u64().unwrap_or(0) as usize,
                    seed: meta["seed"].as_u64(),
                    ritz_gap: meta["ritz_gap"].as_f64(),
                }
            } else {
                let s = &self.config.solve;
                let options = LanczosOptions { tol: s.tol, seed: s.seed, max_iter: s.max_iter, krylov: s.krylov };
                lanczos_ground_state(self.hamiltonian()?, &options).map_err(LabError::stage("solve"))?
            };
            self.ground = Some(gs);
        }
        Ok(self.ground.as_ref().unwrap())
    }

    pub fn profile(&mut self) -> Result<&DecayProfile> {
        if self.profile.is_none() {
            let source = match Variant::from(self.config.many_body.variant) {
                Variant::Full => ProfileSource::Full,
                Variant::Bogoliubov => ProfileSource::Bogoliubov,
            };
            self.ground_state()?;
            self.blocks()?;
            let profile =
                DecayProfile::from_ground_state(self.basis.as_ref().unwrap(), self.ground.as_ref().unwrap(), source)
                    .map_err(LabError::stage("decay"))?;
            self.profile = Some(profile);
        }
        Ok(self.profile.as_ref().unwrap())
    }

    /// Closed-form profile, available on the homogeneous torus only.
    pub fn oracle_profile(&mut self) -> Result<Option<DecayProfile>> {
        let truncation = self.config.analyses.decay.oracle_truncation.unwrap_or(self.config.many_body.cutoff);
        if !self.solution()?.homogeneous {
            return Ok(None);
        }
        let oracle = bogoliubov_oracle(self.kernels()?, truncation).map_err(LabError::stage("decay"))?;
        Ok(Some(DecayProfile::from_oracle(&oracle).map_err(LabError::stage("decay"))?))
    }

    // ---- stage bodies ----

    fn hartree_stage(&mut self) -> Result<StageOutput> {
        let m = self.config.many_body.m;
        let v_ext = self.problem()?.v_ext().to_vec();
        let sol = self.solution()?.clone();
        let potential = self.potential.clone().unwrap();
        let files = vec![self.path("potential.json"), self.path("grid.csv"), self.path("hartree.json")];
        io::write_json(&files[0], &io::potential_json(&potential))?;
        io::write_file(&files[1], io::grid_csv(&sol, &v_ext).as_bytes())?;
        io::write_json(&files[2], &io::hartree_json(&sol, m))?;
        Ok(StageOutput::files(files))
    }

    fn assemble_stage(&mut self) -> Result<StageOutput> {
        self.check_hartree_reproduced()?;
        let kernels = self.kernels()?.clone();
        let (basis, blocks) = self.blocks()?;
        let dim = basis.dim();
        let momentum = kernels.momenta.as_ref().map(|p| basis.momentum_diagonal(p));
        blocks.verify_signatures().map_err(LabError::stage("assemble"))?;
        let h = self.hamiltonian()?;
        let summary = json!({
            "variant": format!("{:?}", h.variant).to_lowercase(),
            "N": h.n_particles,
            "dim": dim,
            "nnz": h.matrix.nnz(),
            "max_asymmetry": h.max_asymmetry(),
            "signatures_exact": true,
            "momentum_commutator": momentum.map(|p| h.commutator_with_diagonal(&p)),
        });
        let mut files = vec![self.path("kernels.json"), self.path("hamiltonian.json")];
        io::write_json(&files[0], &io::kernels_json(&kernels))?;
        io::write_json(&files[1], &summary)?;
        if self.options.export_matrix {
            let coo = self.path("hamiltonian_coo.csv");
            io::write_coo(&coo, &self.hamiltonian.as_ref().unwrap().matrix)?;
            files.push(coo);
        }
        Ok(StageOutput::files(files))
    }

    /// A stored `grid.csv` must match the condensate rebuilt in memory.
    fn check_hartree_reproduced(&mut self) -> Result<()> {
        let Some(record) = self.stored_record(Stage::Hartree) else { return Ok(()) };
        let Some(file) = record.files.iter().find(|f| f.path == "grid.csv") else { return Ok(()) };
        let v_ext = self.problem()?.v_ext().to_vec();
        let text = io::grid_csv(self.solution()?, &v_ext);
        let digest = crate::config::digest_bytes(text.as_bytes());
        if digest != file.sha256 {
            return Err(LabError::StaleArtifact { stage: "hartree", file: file.path.clone() });
        }
        Ok(())
    }

    fn solve_stage(&mut self) -> Result<StageOutput> {
        self.ground = None;
        let s = self.config.solve.clone();
        let options = LanczosOptions { tol: s.tol, seed: s.seed, max_iter: s.max_iter, krylov: s.krylov };
        let gs = lanczos_ground_state(self.hamiltonian()?, &options).map_err(LabError::stage("solve"))?;
        let b = &self.config.many_body;
        let files = vec![self.path("ground_state.fockvec"), self.path("ground_state.json")];
        io::write_fock_vector(&files[0], b.m, b.cutoff, &gs.vector)?;
        io::write_json(
            &files[1],
            &json!({
                "energy": gs.energy,
                "residual": gs.residual,
                "iterations": gs.iterations,
                "seed": gs.seed,
                "ritz_gap": gs.ritz_gap,
                "dim": gs.vector.len(),
            }),
        )?;
        self.ground = Some(gs);
        Ok(StageOutput::files(files))
    }

    fn decay_stage(&mut self) -> Result<StageOutput> {
        let d = self.config.analyses.decay.clone();
        let profile = self.profile()?.clone();
        let parity_name = serde_json::to_value(d.parity).unwrap().as_str().unwrap_or("all").to_string();
        let fit = fit_decay_rate(&profile, d.fit_range[0]..=d.fit_range[1], d.parity.into())
            .map_err(LabError::stage("decay"))?;
        self.fit = Some(fit);

        let mut files = vec![self.path("decay.csv"), self.path("decay_fit.json"), self.path("decay_summary.json")];
        io::write_file(&files[0], io::decay_csv(&profile, &d.windows).as_bytes())?;
        io::write_json(&files[1], &io::fit_json(&fit, d.fit_range, &parity_name))?;

        let tau = self.solution()?.tau;
        let cut = d.tail_cut;
        self.hamiltonian()?;
        let tail = tail_energy_check(
            self.hamiltonian.as_ref().unwrap(),
            self.blocks.as_ref().unwrap(),
            self.ground.as_ref().unwrap(),
            tau,
            cut,
        )
        .map_err(LabError::stage("decay"))?;
        let tail_path = self.path("tail.json");
        io::write_json(&tail_path, &io::tail_json(&tail))?;
        files.push(tail_path);

        if let Some(oracle) = self.oracle_profile()? {
            let path = self.path("oracle.csv");
            io::write_file(&path, io::decay_csv(&oracle, &d.windows).as_bytes())?;
            files.push(path);
        }
        let stability = if d.stability { Some(self.stability()?) } else { None };
        let summary = json!({
            "source": profile.source.name(),
            "valid_max": profile.valid_max(),
            "total": profile.p().iter().sum::<f64>(),
            "max_odd": profile.max_odd(),
            "windows_monotone": profile.windows_monotone(d.max_half_width),
            "stability": stability,
        });
        io::write_json(&files[2], &summary)?;
        Ok(StageOutput::files(files))
    }

    /// Re-solves with cutoff `M + 2` and compares `P(l)` on the valid range.
    fn stability(&mut self) -> Result<Value> {
        let b = self.config.many_body.clone();
        let s = self.config.solve.clone();
        let base = self.profile()?.clone();
        let stage = || LabError::stage("decay");
        let basis = build_basis(b.m, b.cutoff + 2, b.budget).map_err(stage())?;
        let blocks = assemble_blocks(self.kernels()?, &basis).map_err(stage())?;
        let h = match Variant::from(b.variant) {
            Variant::Full => assemble_full(b.n_particles, &blocks).map_err(stage())?,
            Variant::Bogoliubov => assemble_bogoliubov(&blocks),
        };
        let options = LanczosOptions { tol: s.tol, seed: s.seed, max_iter: s.max_iter, krylov: s.krylov };
        let gs = lanczos_ground_state(&h, &options).map_err(stage())?;
        let wider = DecayProfile::from_ground_state(&basis, &gs, base.source).map_err(stage())?;
        let changes: Vec<f64> =
            (0..=base.valid_max()).map(|ell| relative_change(base.p()[ell], wider.p()[ell])).collect();
        let worst = changes.iter().copied().fold(0.0, f64::max);
        Ok(json!({
            "cutoff": b.cutoff + 2,
            "relative_change": changes,
            "max_relative_change": worst,
            "floor": STABILITY_FLOOR,
            "stable": worst < 0.01,
        }))
    }

    fn certify_stage(&mut self, only: Option<CertifySource>) -> Result<StageOutput> {
        let d = self.config.analyses.decay.clone();
        let options =
            CertifyOptions { target_sigma: d.target_sigma, max_half_width: d.max_half_width, ..Default::default() };
        let profile = self.profile()?.clone();
        let fit = match self.fit {
            Some(f) => Some(f),
            None => fit_decay_rate(&profile, d.fit_range[0]..=d.fit_range[1], d.parity.into()).ok(),
        };
        let mut files = Vec::new();
        let mut refusal = None;
        let mut primary_certificate: Option<DecayCertificate> = None;

        let mut sources = Vec::new();
        if only != Some(CertifySource::Oracle) {
            sources.push((CertifySource::GroundState, Some(profile.clone())));
        }
        if only != Some(CertifySource::GroundState) {
            sources.push((CertifySource::Oracle, self.oracle_profile()?));
        }
        for (source, candidate) in sources {
            let (name, file) = match source {
                CertifySource::GroundState => (profile.source.name(), "certificate.json"),
                CertifySource::Oracle => ("oracle", "certificate_oracle.json"),
            };
            let path = self.path(file);
            let Some(candidate) = candidate else {
                if only == Some(CertifySource::Oracle) {
                    return Err(LabError::Stage { stage: "certify", source: bosegas_core::Error::NotHomogeneous });
                }
                continue;
            };
            match certify(&candidate, &options) {
                Ok(cert) => {
                    let mut value = io::certificate_json(&cert, name);
                    if let Some(f) = fit.filter(|_| source == CertifySource::GroundState) {
                        value["fit_epsilon"] = json!(f.epsilon);
                        value["epsilon_discrepancy"] = json!(f.epsilon - cert.epsilon);
                    }
                    io::write_json(&path, &value)?;
                    if source == CertifySource::GroundState {
                        primary_certificate = Some(cert);
                    }
                }
                Err(e) => {
                    let reason = e.to_string();
                    io::write_json(&path, &io::no_certificate_json(name, &reason))?;
                    if only.is_some() {
                        refusal = Some(reason);
                    }
                }
            }
            files.push(path);
        }
        if only != Some(CertifySource::Oracle) {
            let svg = self.path("decay.svg");
            io::write_file(&svg, io::decay_svg(&profile, primary_certificate.as_ref(), fit.as_ref()).as_bytes())?;
            files.push(svg);
        }
        Ok(StageOutput { files, no_certificate: refusal })
    }

    fn lemma_stage(&mut self) -> Result<StageOutput> {
        let l = self.config.analyses.lemmas.clone();
        let n = self.config.many_body.n_particles;
        let tau = self.solution()?.tau;
        let v = self.potential.clone().unwrap();
        self.blocks()?;
        let (basis, blocks, sol) =
            (self.basis.as_ref().unwrap(), self.blocks.as_ref().unwrap(), self.sol.as_ref().unwrap());
        let stage = || LabError::stage("lemmas");
        let mut reports: Vec<LemmaReport> = Vec::new();
        for name in &l.which {
            let report = match LemmaId::from_name(name) {
                Some(LemmaId::K1) => check_k1_bound(blocks, basis, sol, &v, l.samples, l.seed),
                Some(LemmaId::K2) => check_k2_bound(blocks, basis, &v, l.samples, l.seed),
                Some(LemmaId::K3) => check_k3_bound(blocks, basis, n, l.delta, l.samples, l.seed),
                Some(LemmaId::K4) => check_k4_bound(blocks, basis, n, l.delta, l.samples, l.seed),
                Some(LemmaId::K0Gap) => check_k0_gap(blocks, basis, tau),
                _ => continue,
            }
            .map_err(stage())?;
            reports.push(report);
        }
        let mut files = vec![self.path("lemmas.json")];
        for r in &reports {
            if let Some(f) = &r.failure {
                let path = self.path(&format!("lemma_{}_failure.fockvec", r.lemma.name()));
                io::write_fock_vector(&path, basis.modes(), basis.cutoff(), &f.amplitudes)?;
                files.push(path);
            }
        }
        let value = Value::Array(reports.iter().map(io::lemma_json).collect());
        io::write_json(&files[0], &value)?;
        Ok(StageOutput::files(files))
    }

    fn coulomb_stage(&mut self) -> Result<StageOutput> {
        let c = self
            .config
            .analyses
            .coulomb
            .clone()
            .ok_or_else(|| LabError::Config("coulomb-split needs an analyses.coulomb section or --kappa".into()))?;
        let table = coulomb_table(&c)?;
        let mut files = vec![self.path("coulomb_split.csv")];
        io::write_file(&files[0], table.as_bytes())?;

        let grid =
            Grid1D::periodic(c.grid_points, self.config.model.length).map_err(LabError::stage("coulomb-split"))?;
        let surrogate = CoulombSurrogate { lambda: c.lambda, grid, momenta: c.momenta.clone() };
        let basis = build_basis(c.momenta.len(), c.cutoff, self.config.many_body.budget)
            .map_err(LabError::stage("coulomb-split"))?;
        let report = check_k2_coulomb(&surrogate, &c.kappas, &basis, c.epsilon, c.samples, c.seed)
            .map_err(LabError::stage("coulomb-split"))?;
        let path = self.path("coulomb_lemma.json");
        io::write_json(&path, &io::lemma_json(&report))?;
        files.push(path);
        if let Some(f) = &report.failure {
            let path = self.path("lemma_k2c_failure.fockvec");
            io::write_fock_vector(&path, basis.modes(), basis.cutoff(), &f.amplitudes)?;
            files.push(path);
        }
        Ok(StageOutput::files(files))
    }
}

/// Probabilities below this are treated as zero when comparing truncations.
pub const STABILITY_FLOOR: f64 = 1e-14;

pub fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(STABILITY_FLOOR)
}

/// Width of the Gaussian test orbital in the radial residual column.
pub const TEST_ORBITAL_WIDTH: f64 = 1.0;

/// One row per `kappa`: three-dimensional residual sup-norm for a Gaussian
/// orbital, smallest sampled Yukawa transform, reconstruction error of
/// `lambda / r`, and the torus surrogate quantities `delta` and `nu_kappa`.
pub fn coulomb_table(c: &CoulombConfig) -> Result<String> {
    let stage = || LabError::stage("coulomb-split");
    let smallest = c.kappas.iter().copied().fold(f64::INFINITY, f64::min);
    let radial =
        RadialGrid::logarithmic(1e-7f64.min(1e-6 * smallest), 12.0 * TEST_ORBITAL_WIDTH, 4000).map_err(stage())?;
    let phi = RadialFunction::gaussian(TEST_ORBITAL_WIDTH, &radial).map_err(stage())?;
    let grid = Grid1D::periodic(c.grid_points, 2.0 * std::f64::consts::PI).map_err(stage())?;
    let surrogate = CoulombSurrogate { lambda: c.lambda, grid, momenta: c.momenta.clone() };
    let levels = surrogate.levels(&c.kappas).map_err(stage())?;
    let mut previous: Option<(f64, f64)> = None;
    let mut out = String::from("kappa,residual_supnorm,min_transform,reconstruction_error,delta_torus,nu_kappa\n");
    for (level, &kappa) in levels.iter().zip(&c.kappas) {
        let split = yukawa_split(c.lambda, kappa).map_err(stage())?;
        let sup = residual_supnorm(c.lambda, kappa, &phi).map_err(stage())?;
        if let Some((pk, pv)) = previous {
            if !(sup < pv) {
                return Err(LabError::Stage {
                    stage: "coulomb-split",
                    source: bosegas_core::Error::NonMonotoneResidual {
                        kappa,
                        value: sup,
                        previous_kappa: pk,
                        previous: pv,
                    },
                });
            }
        }
        previous = Some((kappa, sup));
        let min_transform = transform_samples(kappa)
            .map(|k| split.yukawa.transform_3d(k).unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min);
        let reconstruction = split.reconstruction_error(radial.radii());
        out += &format!(
            "{},{},{},{},{},{}\n",
            io::fmt12(kappa),
            io::fmt12(sup),
            io::fmt12(min_transform),
            io::fmt12(reconstruction),
            io::fmt12(level.delta),
            io::fmt12(level.nu_kappa)
        );
    }
    Ok(out)
}

/// Logarithmically spaced wavenumbers from `1e-4 / kappa` to `1e4 / kappa`.
pub fn transform_samples(kappa: f64) -> impl Iterator<Item = f64> {
    (0..=400).map(move |i| 10f64.powf(-4.0 + 8.0 * i as f64 / 400.0) / kappa)
}
