//! Executes the requested checks on one configuration and assembles the report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mlsi_core::certify::{
    assemble_lower_bound, classical_log_defect, conditional_mlsi_estimate, defect_factors, dynamics_property_suite,
    entropy_property_range, lemma_bound_cre_check, mixing_scan, mixing_time_check, mlsi_estimate, qf_constant_estimate,
    qf_ratio, sample_full_rank, sample_state, shielded_tripartitions, site_entropy_production_suite,
    spin_defect_condition, step1_check, step2_check, CertState, EstimateOptions, GibbsRef, InequalityReport,
    LemmaReport, MixingConditionReport, MlsiEstimate, PropertyKind, PropertyResult, QfReport, Step1Report, SuiteReport,
    HEURISTIC_CAVEAT,
};
use mlsi_core::classical::{ClassicalGibbs, LowRankState, CLASSICAL_DIM_CAP};
use mlsi_core::dynamics::lindbladian;
use mlsi_core::gibbs::{check_commuting_with, cmi, gibbs_state, qmc_log_defect_gibbs, GibbsState, LocalPotential};
use mlsi_core::linalg::{from_row_major, C64};
use mlsi_core::sampling::stream_rng;
use mlsi_core::{DensityOperator, HermitianOperator, Lattice, Region, Splitting, Tolerances};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Check, Engine, OperatorFormat, PotentialSpec, Resolved, TermSpec};
use crate::error::{is_configuration, LabError, LabResult};
use crate::formats::{cell_f, cell_opt, cell_region, read_operator, write_operator, Table};
use crate::report::{CheckOutcome, Inputs, Meta, Report};

/// Most failing entries listed per check.
const MAX_FAILING: usize = 10;
/// Relative agreement required when recomputing a reported quasi-factorization ratio.
const RECOMPUTE_TOLERANCE: f64 = 1e-9;

/// Builds the potential described by the configuration on its chain.
pub fn build_potential(config: &Resolved) -> LabResult<LocalPotential> {
    let lattice = Lattice::chain_with_cap(config.n_sites, config.local_dim, CLASSICAL_DIM_CAP)?;
    match &config.potential {
        PotentialSpec::Preset(p) => Ok(p.build(lattice)?),
        PotentialSpec::Explicit(e) => {
            let terms = e
                .terms
                .iter()
                .map(|t| Ok((t.center, term_operator(config, t)?)))
                .collect::<LabResult<Vec<_>>>()?;
            Ok(LocalPotential::new(lattice, e.k, terms)?)
        }
    }
}

fn term_operator(config: &Resolved, t: &TermSpec) -> LabResult<HermitianOperator> {
    let support = Region::new(t.sites.clone());
    if support.len() != t.sites.len() {
        return Err(LabError::config(format!("term at {} repeats a site", t.center)));
    }
    let dim = config.local_dim.pow(support.len() as u32);
    let matrix = match (&t.re, &t.im, &t.file) {
        (None, None, Some(file)) => read_operator(&config.resolve_path(file))?,
        (Some(re), im, None) => {
            let rows_ok = |m: &Vec<Vec<f64>>| m.len() == dim && m.iter().all(|r| r.len() == dim);
            if !rows_ok(re) || im.as_ref().is_some_and(|m| !rows_ok(m)) {
                return Err(LabError::config(format!(
                    "term at {} needs {dim}x{dim} matrices",
                    t.center
                )));
            }
            let entries: Vec<C64> = (0..dim * dim)
                .map(|n| {
                    let (i, j) = (n / dim, n % dim);
                    C64::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j]))
                })
                .collect();
            from_row_major(dim, dim, &entries).expect("square")
        }
        _ => {
            return Err(LabError::config(format!(
                "term at {} needs either `re` (with optional `im`) or `file`",
                t.center
            )))
        }
    };
    if matrix.nrows() != dim || matrix.ncols() != dim {
        return Err(LabError::config(format!(
            "term at {} has a {}x{} matrix, expected {dim}x{dim}",
            t.center,
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    Ok(HermitianOperator::new(support, config.local_dim, matrix)?)
}

/// SHA-256 over the chain, range and every term's support and matrix bits.
pub fn potential_hash(p: &LocalPotential) -> String {
    let mut h = Sha256::new();
    let lattice = p.lattice();
    for word in [lattice.n_sites(), lattice.local_dim(), p.k(), p.terms().len()] {
        h.update((word as u64).to_le_bytes());
    }
    for t in p.terms() {
        h.update((t.center as u64).to_le_bytes());
        let sites = t.op.support();
        h.update((sites.len() as u64).to_le_bytes());
        for s in sites.iter() {
            h.update((s as u64).to_le_bytes());
        }
        for z in t.op.matrix().iter() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Outcome of a whole run.
pub struct RunOutput {
    pub report: Report,
    pub report_path: PathBuf,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            1
        }
    }
}

/// State shared between checks of one run.
pub struct Experiment {
    pub config: Resolved,
    pub potential: LocalPotential,
    pub splitting: Splitting,
    out_dir: PathBuf,
    write_sigma: bool,
    dense: Option<GibbsState>,
    classical: Option<ClassicalGibbs>,
    conditional: Option<Vec<MlsiEstimate>>,
    qf: Option<Vec<QfReport>>,
}

impl Experiment {
    pub fn new(config: Resolved) -> LabResult<Self> {
        let potential = build_potential(&config)?;
        let g = config.geometry;
        let splitting = mlsi_core::standard_splitting(g.k, g.l, g.n_blocks)?;
        let out_dir = config.output.dir.clone();
        Ok(Self {
            config,
            potential,
            splitting,
            out_dir,
            write_sigma: false,
            dense: None,
            classical: None,
            conditional: None,
            qf: None,
        })
    }

    /// Also writes the Gibbs state when the structure check runs.
    pub fn with_sigma_artifact(mut self) -> Self {
        self.write_sigma = true;
        self
    }

    fn lattice(&self) -> Lattice {
        *self.potential.lattice()
    }

    fn seed(&self) -> u64 {
        self.config.seed()
    }

    fn ensure_dense(&mut self) -> LabResult<()> {
        if self.dense.is_some() {
            return Ok(());
        }
        if self.config.engine == Engine::Classical {
            return Err(LabError::config("this check needs the dense engine"));
        }
        let (dim, cap) = (self.lattice().dim(), self.config.dense_cap);
        if dim > cap {
            return Err(mlsi_core::Error::DimensionCap { dim, cap }.into());
        }
        self.dense = Some(gibbs_state(&self.potential, self.config.beta)?);
        Ok(())
    }

    fn ensure_classical(&mut self) -> LabResult<()> {
        if self.classical.is_none() {
            self.classical = Some(ClassicalGibbs::new(&self.potential, self.config.beta)?);
        }
        Ok(())
    }

    /// Picks the engine for checks that run on either; `true` means dense.
    fn choose_engine(&mut self) -> LabResult<bool> {
        match self.config.engine {
            Engine::Dense => self.ensure_dense().map(|_| true),
            Engine::Classical => self.ensure_classical().map(|_| false),
            Engine::Auto => {
                if self.lattice().dim() <= self.config.dense_cap || !self.potential.is_diagonal() {
                    self.ensure_dense().map(|_| true)
                } else {
                    self.ensure_classical().map(|_| false)
                }
            }
        }
    }

    fn dense_state(&self) -> &GibbsState {
        self.dense.as_ref().expect("dense state built")
    }

    fn gibbs_ref(&self, dense: bool) -> GibbsRef<'_> {
        if dense {
            GibbsRef::Dense(self.dense_state())
        } else {
            GibbsRef::Classical(self.classical.as_ref().expect("classical state built"))
        }
    }

    fn estimate_options(&self) -> EstimateOptions {
        let s = &self.config.sampling;
        EstimateOptions {
            n_random: s.n_random,
            optimizer_steps: s.optimizer_steps,
            n_starts: s.n_starts,
            seed: self.seed(),
            initial_states: Vec::new(),
        }
    }

    fn table(&self, name: &str, table: &Table) -> LabResult<String> {
        table.write(&self.out_dir.join(name))?;
        Ok(name.to_string())
    }

    /// Runs every configured check and writes `report.json`.
    pub fn run(mut self, command: &str) -> LabResult<RunOutput> {
        let start = Instant::now();
        std::fs::create_dir_all(&self.out_dir).map_err(|e| LabError::io(&self.out_dir, e))?;
        let mut outcomes = Vec::new();
        for check in self.config.checks.clone() {
            let outcome = match self.run_check(check) {
                Ok(o) => o,
                Err(LabError::Core(e)) if !is_configuration(&e) => CheckOutcome::failed(check, e.to_string()),
                Err(e) => return Err(e),
            };
            outcomes.push(outcome);
        }
        let pass = outcomes.iter().all(|o| o.pass);
        let report = Report {
            meta: Meta {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                timestamp: chrono::Utc::now().to_rfc3339(),
                runtime_seconds: start.elapsed().as_secs_f64(),
                threads: rayon::current_num_threads(),
            },
            inputs: Inputs {
                command: command.into(),
                potential_hash: potential_hash(&self.potential),
                config: self.config.clone(),
            },
            checks: outcomes,
            pass,
        };
        let report_path = self.out_dir.join("report.json");
        report.write(&report_path)?;
        Ok(RunOutput { report, report_path })
    }

    pub fn run_check(&mut self, check: Check) -> LabResult<CheckOutcome> {
        if check.needs_dense() {
            self.ensure_dense()?;
        }
        match check {
            Check::GibbsStructure => self.gibbs_structure(),
            Check::EntropyProperties => self.entropy_properties(),
            Check::DynamicsProperties => self.dynamics_properties(),
            Check::Mixing => self.mixing(),
            Check::Step1 => self.step1(),
            Check::Step2 => self.step2(),
            Check::LemmaCre => self.lemma_cre(),
            Check::Mlsi => self.mlsi(),
            Check::ConditionalMlsi => self.conditional_mlsi(),
            Check::Qf => self.qf(),
            Check::Assemble => self.assemble(),
            Check::MixingTime => self.mixing_time(),
        }
    }

    fn gibbs_structure(&mut self) -> LabResult<CheckOutcome> {
        let tol = self.config.tolerances;
        let commuting = check_commuting_with(&self.potential, tol.comm);
        let mut outcome = CheckOutcome {
            name: Check::GibbsStructure,
            pass: commuting.pass,
            failing: Vec::new(),
            error: None,
            result: Value::Null,
            tables: Vec::new(),
        };
        if !commuting.pass {
            outcome.failing.push(format!(
                "potential terms do not commute: max commutator norm {:e}",
                commuting.max_commutator_norm
            ));
            outcome.result = json!({ "commuting": commuting });
            return Ok(outcome);
        }
        let dense = self.choose_engine()?;
        let n = self.lattice().n_sites();
        let parts = shielded_tripartitions(n, self.potential.k());
        let rows: Vec<(f64, f64)> = if dense {
            let g = self.dense_state();
            parts
                .par_iter()
                .map(|(a, b, c)| Ok((cmi(g.sigma(), a, b, c)?, qmc_log_defect_gibbs(g, a, b, c)?)))
                .collect::<mlsi_core::Result<_>>()?
        } else {
            let g = self.classical.as_ref().expect("classical state built");
            let shannon = |r: &Region| -> mlsi_core::Result<f64> {
                Ok(-g
                    .marginal(r)?
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| p * p.ln())
                    .sum::<f64>())
            };
            parts
                .par_iter()
                .map(|(a, b, c)| {
                    let full = a.union(b).union(c);
                    let i = shannon(&a.union(b))? + shannon(&b.union(c))? - shannon(b)? - shannon(&full)?;
                    Ok((i, classical_log_defect(g, a, b, c)?))
                })
                .collect::<mlsi_core::Result<_>>()?
        };
        let mut table = Table::new(&["a", "b", "c", "cmi", "log_defect"]);
        for ((a, b, c), (i, defect)) in parts.iter().zip(&rows) {
            table.push(vec![
                cell_region(a),
                cell_region(b),
                cell_region(c),
                cell_f(*i),
                cell_f(*defect),
            ]);
            if !(*i <= tol.qmc && *defect <= tol.qmc) {
                outcome.failing.push(format!(
                    "{a:?}|{b:?}|{c:?}: cmi {i:e}, log defect {defect:e} above {:e}",
                    tol.qmc
                ));
            }
        }
        outcome.pass = outcome.failing.is_empty();
        outcome.tables.push(self.table("qmc.csv", &table)?);
        let log_partition = if dense {
            self.dense_state().log_partition()
        } else {
            self.classical.as_ref().expect("classical state built").log_partition()
        };
        let max = |f: fn(&(f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        outcome.result = json!({
            "commuting": commuting,
            "engine": if dense { "dense" } else { "classical" },
            "dim": self.lattice().dim(),
            "log_partition": log_partition,
            "n_tripartitions": parts.len(),
            "max_cmi": max(|r| r.0),
            "max_log_defect": max(|r| r.1),
            "tolerance": tol.qmc,
        });
        if self.write_sigma {
            outcome.tables.push(self.write_sigma_artifact(dense)?);
        }
        truncate(&mut outcome.failing);
        Ok(outcome)
    }

    fn write_sigma_artifact(&self, dense: bool) -> LabResult<String> {
        if dense {
            let name = match self.config.output.operator_format {
                OperatorFormat::Text => "sigma.op",
                OperatorFormat::Binary => "sigma.bin",
            };
            let m = self.dense_state().sigma().matrix();
            write_operator(&self.out_dir.join(name), m, self.config.output.operator_format)?;
            Ok(name.into())
        } else {
            let g = self.classical.as_ref().expect("classical state built");
            let mut table = Table::new(&["index", "probability"]);
            for (i, p) in g.probabilities().iter().enumerate() {
                table.push(vec![i.to_string(), cell_f(*p)]);
            }
            self.table("sigma_diagonal.csv", &table)
        }
    }

    fn property_outcome(&self, check: Check, props: Vec<PropertyResult>, file: &str) -> LabResult<CheckOutcome> {
        let mut table = Table::new(&["property", "kind", "n_instances", "worst", "tolerance", "pass"]);
        let mut failing = Vec::new();
        for p in &props {
            let kind = match p.kind {
                PropertyKind::Inequality => "inequality",
                PropertyKind::Identity => "identity",
            };
            table.push(vec![
                p.name.clone(),
                kind.into(),
                p.n_instances.to_string(),
                cell_f(p.worst),
                cell_f(p.tolerance),
                p.pass.to_string(),
            ]);
            if !p.pass {
                failing.push(format!(
                    "{}: worst {:e} against tolerance {:e}",
                    p.name, p.worst, p.tolerance
                ));
            }
        }
        Ok(CheckOutcome {
            name: check,
            pass: failing.is_empty(),
            failing,
            error: None,
            result: json!({ "properties": props }),
            tables: vec![self.table(file, &table)?],
        })
    }

    fn entropy_properties(&mut self) -> LabResult<CheckOutcome> {
        let n = self.config.sampling.n_instances;
        let seed = self.seed();
        let tol = self.config.tolerances;
        let parts: Vec<SuiteReport> = chunk_ranges(n)
            .par_iter()
            .map(|&(lo, hi)| entropy_property_range(lo..hi, seed, &tol))
            .collect::<mlsi_core::Result<_>>()?;
        let props = SuiteReport::merge(parts).map(|r| r.properties).unwrap_or_default();
        self.property_outcome(Check::EntropyProperties, props, "entropy_properties.csv")
    }

    fn dynamics_properties(&mut self) -> LabResult<CheckOutcome> {
        let g = self.dense_state();
        let n = self.config.sampling.n_instances;
        let seed = self.seed();
        let mut props = dynamics_property_suite(g, n, seed)?.properties;
        props.push(site_entropy_production_suite(g, n, seed, &self.config.tolerances)?);
        self.property_outcome(Check::DynamicsProperties, props, "dynamics_properties.csv")
    }

    fn mixing_potential(&self) -> impl Fn(Lattice) -> mlsi_core::Result<LocalPotential> + '_ {
        move |lattice: Lattice| match &self.config.potential {
            PotentialSpec::Preset(p) => p.build(lattice),
            PotentialSpec::Explicit(_) if lattice == *self.potential.lattice() => Ok(self.potential.clone()),
            PotentialSpec::Explicit(_) => Err(mlsi_core::Error::InvalidParameter(format!(
                "an explicit potential is fixed to {} sites; restrict the mixing family to that chain",
                self.potential.lattice().n_sites()
            ))),
        }
    }

    fn mixing(&mut self) -> LabResult<CheckOutcome> {
        let family: Vec<(usize, usize, usize)> = self.config.mixing_family.iter().map(|&[k, l, n]| (k, l, n)).collect();
        let report = mixing_scan(
            &self.mixing_potential(),
            self.config.beta,
            self.config.local_dim,
            &family,
        )?;
        let mut table = Table::new(&["k", "l", "n_blocks", "n_sites", "engine", "h_norm", "interval_pass"]);
        let mut failing = Vec::new();
        for r in &report.rows {
            table.push(vec![
                r.k.to_string(),
                r.l.to_string(),
                r.n_blocks.to_string(),
                r.n_sites.to_string(),
                r.engine.clone(),
                cell_f(r.h_norm),
                r.interval.pass.to_string(),
            ]);
            if r.h_norm >= 0.5 {
                failing.push(format!("l = {}: h-norm {} is not below 1/2", r.l, r.h_norm));
            }
            if r.interval.pass != (r.h_norm < 0.5) {
                failing.push(format!("l = {}: interval verdict disagrees with the h-norm", r.l));
            }
        }
        let spin_defect = if self.lattice().n_sites() == self.splitting.n_sites {
            let f = defect_factors(&self.potential, self.config.beta, &self.splitting)?;
            let verdict = spin_defect_condition(&f.gammas, &f.deltas)?;
            json!({ "factors": f, "condition": verdict })
        } else {
            Value::Null
        };
        Ok(CheckOutcome {
            name: Check::Mixing,
            pass: failing.is_empty(),
            failing,
            error: None,
            result: json!({ "scan": report, "spin_defect": spin_defect }),
            tables: vec![self.table("mixing_scan.csv", &table)?],
        })
    }

    /// Mixing measurement on the configured geometry only.
    fn geometry_mixing(&self) -> LabResult<MixingConditionReport> {
        let g = self.config.geometry;
        Ok(mixing_scan(
            &self.mixing_potential(),
            self.config.beta,
            self.config.local_dim,
            &[(g.k, g.l, g.n_blocks)],
        )?)
    }

    /// Applies `check` to sampled states in parallel chunks and merges the slacks.
    fn inequality<F>(&mut self, check: F) -> LabResult<(bool, InequalityReport, Vec<f64>)>
    where
        F: Fn(GibbsRef<'_>, &dyn StateChunk) -> mlsi_core::Result<(InequalityReport, f64)> + Sync,
    {
        let dense = self.choose_engine()?;
        let (n, seed, lattice) = (self.config.sampling.n_states, self.seed(), self.lattice());
        let sigma = self.gibbs_ref(dense);
        let ranges = chunk_ranges(n);
        let rank = self.config.sampling.rank;
        let parts: Vec<(InequalityReport, f64)> = if dense {
            let s = self.dense_state().sigma();
            ranges
                .par_iter()
                .map(|&(lo, hi)| {
                    let states: Vec<DensityOperator> = (lo..hi).map(|i| sample_state(&lattice, s, seed, i)).collect();
                    check(sigma, &states)
                })
                .collect::<mlsi_core::Result<_>>()?
        } else {
            // same streams as the sequential low-rank sampler
            ranges
                .par_iter()
                .map(|&(lo, hi)| {
                    let states: Vec<LowRankState> = (lo..hi)
                        .map(|i| LowRankState::random(&mut stream_rng(seed, i as u64), lattice, rank))
                        .collect();
                    check(sigma, &states)
                })
                .collect::<mlsi_core::Result<_>>()?
        };
        let extras: Vec<f64> = parts.iter().map(|p| p.1).collect();
        let merged = merge_inequality(parts.into_iter().map(|p| p.0).collect(), self.config.tolerances.slack);
        Ok((dense, merged, extras))
    }

    fn inequality_outcome(
        &self,
        check: Check,
        parts: Vec<(&str, InequalityReport)>,
        extra: Value,
        file: &str,
    ) -> LabResult<CheckOutcome> {
        let mut table = Table::new(&["part", "state", "slack"]);
        let mut failing = Vec::new();
        let mut summaries = Vec::new();
        for (label, r) in &parts {
            for (i, s) in r.slacks.iter().enumerate() {
                table.push(vec![label.to_string(), i.to_string(), cell_f(*s)]);
                if *s < -r.tolerance {
                    failing.push(format!("{label}, state {i}: slack {s:e} below -{:e}", r.tolerance));
                }
            }
            summaries.push(json!({
                "part": label,
                "n_states": r.slacks.len(),
                "min_slack": finite_or_null(r.min_slack),
                "tolerance": r.tolerance,
                "vacuous": r.vacuous,
                "pass": r.pass,
            }));
        }
        let pass = parts.iter().all(|(_, r)| r.pass);
        truncate(&mut failing);
        Ok(CheckOutcome {
            name: check,
            pass,
            failing,
            error: None,
            result: json!({ "parts": summaries, "details": extra }),
            tables: vec![self.table(file, &table)?],
        })
    }

    fn step1(&mut self) -> LabResult<CheckOutcome> {
        let splitting = self.splitting.clone();
        let tol = self.config.tolerances;
        let (dense, report, h) = self.inequality(|sigma, states| {
            let r = states.step1(sigma, &splitting, &tol)?;
            Ok((r.report, r.h_norm))
        })?;
        let h_norm = h.first().copied().unwrap_or(f64::NAN);
        let extra = json!({ "engine": engine_name(dense), "h_norm": h_norm });
        self.inequality_outcome(Check::Step1, vec![("A,B", report)], extra, "step1.csv")
    }

    fn step2(&mut self) -> LabResult<CheckOutcome> {
        let tol = self.config.tolerances;
        let mut parts = Vec::new();
        let mut engine = "";
        for (label, blocks) in [
            ("A", self.splitting.a_blocks.clone()),
            ("B", self.splitting.b_blocks.clone()),
        ] {
            let (dense, report, _) = self.inequality(|sigma, states| Ok((states.step2(sigma, &blocks, &tol)?, 0.0)))?;
            engine = engine_name(dense);
            parts.push((label, report));
        }
        self.inequality_outcome(Check::Step2, parts, json!({ "engine": engine }), "step2.csv")
    }

    fn lemma_cre(&mut self) -> LabResult<CheckOutcome> {
        let tol = self.config.tolerances;
        let mut parts = Vec::new();
        let mut defects = Vec::new();
        let mut engine = "";
        for (label, region) in [("A", self.splitting.a()), ("B", self.splitting.b())] {
            let (dense, report, d) = self.inequality(|sigma, states| {
                let r = states.lemma(sigma, &region, &tol)?;
                Ok((r.report, r.qmc_defect))
            })?;
            engine = engine_name(dense);
            defects.push(json!({ "part": label, "qmc_log_defect": d.first().copied().unwrap_or(0.0) }));
            parts.push((label, report));
        }
        let extra = json!({ "engine": engine, "markov": defects, "qmc_tolerance": tol.qmc });
        self.inequality_outcome(Check::LemmaCre, parts, extra, "lemma_cre.csv")
    }

    fn mlsi(&mut self) -> LabResult<CheckOutcome> {
        let g = self.dense_state();
        let gen = lindbladian(g, &g.lattice().full_region())?;
        let est = mlsi_estimate(&gen, &self.estimate_options())?;
        let mut tables = vec![self.table("mlsi_trace.csv", &trace_table(&est.optimizer_trace))?];
        tables.push(self.write_state("mlsi_argmin", &est.argmin_state)?);
        let pass = est.alpha_hat.is_finite() && est.alpha_hat > 0.0;
        Ok(CheckOutcome {
            name: Check::Mlsi,
            pass,
            failing: if pass {
                vec![]
            } else {
                vec![format!("alpha_hat = {}", est.alpha_hat)]
            },
            error: None,
            result: estimate_json(&est),
            tables,
        })
    }

    fn conditional_estimates(&mut self) -> LabResult<Vec<MlsiEstimate>> {
        if let Some(c) = &self.conditional {
            return Ok(c.clone());
        }
        let g = self.dense_state();
        let opts = self.estimate_options();
        let blocks = self.splitting.blocks();
        let est: Vec<MlsiEstimate> = blocks
            .par_iter()
            .map(|b| conditional_mlsi_estimate(g, b, &opts))
            .collect::<mlsi_core::Result<_>>()?;
        self.conditional = Some(est.clone());
        Ok(est)
    }

    fn conditional_mlsi(&mut self) -> LabResult<CheckOutcome> {
        let est = self.conditional_estimates()?;
        let mut table = Table::new(&["region", "alpha_hat", "n_samples", "n_excluded"]);
        let mut failing = Vec::new();
        for e in &est {
            let region = e.region.clone().unwrap_or_default();
            table.push(vec![
                cell_region(&region),
                cell_f(e.alpha_hat),
                e.n_samples.to_string(),
                e.n_excluded.to_string(),
            ]);
            if !(e.alpha_hat.is_finite() && e.alpha_hat > 0.0) {
                failing.push(format!("{region:?}: alpha_hat = {}", e.alpha_hat));
            }
        }
        Ok(CheckOutcome {
            name: Check::ConditionalMlsi,
            pass: failing.is_empty(),
            failing,
            error: None,
            result: json!({ "estimates": est.iter().map(estimate_json).collect::<Vec<_>>() }),
            tables: vec![self.table("conditional_mlsi.csv", &table)?],
        })
    }

    fn qf_reports(&mut self) -> LabResult<Vec<QfReport>> {
        if let Some(q) = &self.qf {
            return Ok(q.clone());
        }
        let g = self.dense_state();
        let opts = self.estimate_options();
        let reports: Vec<QfReport> = self
            .splitting
            .blocks()
            .par_iter()
            .map(|b| qf_constant_estimate(g, b, &opts))
            .collect::<mlsi_core::Result<_>>()?;
        self.qf = Some(reports.clone());
        Ok(reports)
    }

    fn qf(&mut self) -> LabResult<CheckOutcome> {
        let reports = self.qf_reports()?;
        let g = self.dense_state();
        let lattice = self.lattice();
        let (n, seed) = (self.config.sampling.n_random, self.seed());
        let blocks = self.splitting.blocks();
        let jobs: Vec<(usize, usize)> = (0..blocks.len()).flat_map(|b| (0..n).map(move |i| (b, i))).collect();
        let ratios: Vec<Option<f64>> = jobs
            .par_iter()
            .map(|&(b, i)| qf_ratio(g, &blocks[b], &sample_state(&lattice, g.sigma(), seed, i)))
            .collect::<mlsi_core::Result<_>>()?;
        let mut samples = Table::new(&["region", "sample", "ratio"]);
        for (&(b, i), r) in jobs.iter().zip(&ratios) {
            samples.push(vec![cell_region(&blocks[b]), i.to_string(), cell_opt(*r)]);
        }
        let mut failing = Vec::new();
        let mut summaries = Vec::new();
        for q in &reports {
            let recomputed = qf_ratio(g, &q.region, &q.witness_state)?;
            let agrees =
                recomputed.is_some_and(|r| (r - q.f_hat).abs() <= RECOMPUTE_TOLERANCE * q.f_hat.abs().max(1.0));
            if !(agrees && q.f_hat.is_finite()) {
                failing.push(format!(
                    "{:?}: reported f_hat {} but the witness gives {recomputed:?}",
                    q.region, q.f_hat
                ));
            }
            summaries.push(json!({
                "region": q.region,
                "f_hat": q.f_hat,
                "bound_kind": QfReport::BOUND_KIND,
                "recomputed": recomputed,
                "degenerate_count": q.degenerate_count,
                "n_samples": q.n_samples,
                "seed": q.seed,
                "optimizer_trace": q.optimizer_trace,
            }));
        }
        Ok(CheckOutcome {
            name: Check::Qf,
            pass: failing.is_empty(),
            failing,
            error: None,
            result: json!({ "estimates": summaries }),
            tables: vec![self.table("qf_samples.csv", &samples)?],
        })
    }

    fn assemble(&mut self) -> LabResult<CheckOutcome> {
        let cond = self.conditional_estimates()?;
        let qf = self.qf_reports()?;
        let mix = self.geometry_mixing()?;
        let bound = assemble_lower_bound(&mix, &cond, &qf)?;
        let pass = bound.k_tilde > 0.0 && bound.alpha_lower_certificate > 0.0;
        let mut failing = Vec::new();
        if !pass {
            failing.push(format!(
                "K~ = {}, certificate = {}",
                bound.k_tilde, bound.alpha_lower_certificate
            ));
        }
        let argmin = cond
            .iter()
            .min_by(|a, b| a.alpha_hat.total_cmp(&b.alpha_hat))
            .and_then(|e| e.region.clone());
        Ok(CheckOutcome {
            name: Check::Assemble,
            pass,
            failing,
            error: None,
            result: json!({
                "bound": bound,
                "h_norm_source": "measured on the configured geometry",
                "min_alpha_region": argmin,
                "conditional_alphas": cond.iter().map(|e| json!({ "region": e.region, "alpha_hat": e.alpha_hat })).collect::<Vec<_>>(),
                "f_hats": qf.iter().map(|q| json!({ "region": q.region, "f_hat": q.f_hat })).collect::<Vec<_>>(),
                "caveat": HEURISTIC_CAVEAT,
            }),
            tables: Vec::new(),
        })
    }

    fn mixing_time(&mut self) -> LabResult<CheckOutcome> {
        let g = self.dense_state();
        let gen = lindbladian(g, &g.lattice().full_region())?;
        let rho0 = sample_full_rank(&self.lattice(), 1, self.seed()).remove(0);
        let report = mixing_time_check(&gen, &rho0, &self.config.times)?;
        let mut table = Table::new(&[
            "t",
            "relative_entropy",
            "trace_distance",
            "quotient",
            "pinsker_ok",
            "decay_ok",
            "bound_ok",
        ]);
        let mut failing = Vec::new();
        for r in &report.rows {
            table.push(vec![
                cell_f(r.t),
                cell_f(r.relative_entropy),
                cell_f(r.trace_distance),
                cell_opt(r.quotient),
                r.pinsker_ok.to_string(),
                r.decay_ok.to_string(),
                r.bound_ok.to_string(),
            ]);
            for (ok, what) in [
                (r.pinsker_ok, "Pinsker"),
                (r.decay_ok, "decay"),
                (r.bound_ok, "mixing-time bound"),
            ] {
                if !ok {
                    failing.push(format!("t = {}: {what} check fails", r.t));
                }
            }
        }
        truncate(&mut failing);
        Ok(CheckOutcome {
            name: Check::MixingTime,
            pass: report.pass,
            failing,
            error: None,
            result: json!({
                "alpha_traj": report.alpha_traj,
                "prefactor": report.prefactor,
                "pinsker_pass": report.pinsker_pass,
                "decay_pass": report.decay_pass,
                "bound_pass": report.bound_pass,
                "initial_state": "floored Haar-diagonal sample 0",
            }),
            tables: vec![self.table("trajectory.csv", &table)?],
        })
    }

    fn write_state(&self, stem: &str, rho: &DensityOperator) -> LabResult<String> {
        let format = self.config.output.operator_format;
        let name = match format {
            OperatorFormat::Text => format!("{stem}.op"),
            OperatorFormat::Binary => format!("{stem}.bin"),
        };
        write_operator(&self.out_dir.join(&name), rho.matrix(), format)?;
        Ok(name)
    }
}

/// Sampled states of either engine.
pub trait StateChunk: Sync {
    fn step1(&self, sigma: GibbsRef<'_>, s: &Splitting, tol: &Tolerances) -> mlsi_core::Result<Step1Report>;
    fn step2(&self, sigma: GibbsRef<'_>, blocks: &[Region], tol: &Tolerances) -> mlsi_core::Result<InequalityReport>;
    fn lemma(&self, sigma: GibbsRef<'_>, a: &Region, tol: &Tolerances) -> mlsi_core::Result<LemmaReport>;
}

impl<S: CertState + Sync> StateChunk for Vec<S> {
    fn step1(&self, sigma: GibbsRef<'_>, s: &Splitting, tol: &Tolerances) -> mlsi_core::Result<Step1Report> {
        step1_check(sigma, s, self, tol)
    }

    fn step2(&self, sigma: GibbsRef<'_>, blocks: &[Region], tol: &Tolerances) -> mlsi_core::Result<InequalityReport> {
        step2_check(sigma, blocks, self, tol)
    }

    fn lemma(&self, sigma: GibbsRef<'_>, a: &Region, tol: &Tolerances) -> mlsi_core::Result<LemmaReport> {
        lemma_bound_cre_check(sigma, a, self, tol)
    }
}

fn engine_name(dense: bool) -> &'static str {
    if dense {
        "dense"
    } else {
        "classical"
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn truncate(failing: &mut Vec<String>) {
    if failing.len() > MAX_FAILING {
        let extra = failing.len() - MAX_FAILING;
        failing.truncate(MAX_FAILING);
        failing.push(format!("... and {extra} more"));
    }
}

/// Splits `0..n` into contiguous ranges, one per worker thread.
fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    let size = n.div_ceil(rayon::current_num_threads().max(1)).max(1);
    (0..n).step_by(size).map(|lo| (lo, (lo + size).min(n))).collect()
}

fn merge_inequality(parts: Vec<InequalityReport>, tolerance: f64) -> InequalityReport {
    let vacuous = parts.iter().any(|p| p.vacuous);
    let slacks: Vec<f64> = parts.into_iter().flat_map(|p| p.slacks).collect();
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    InequalityReport {
        pass: slacks.iter().all(|&s| s >= -tolerance),
        slacks,
        min_slack,
        tolerance,
        vacuous,
    }
}

fn trace_table(trace: &[(usize, f64)]) -> Table {
    let mut t = Table::new(&["iteration", "best"]);
    for (i, v) in trace {
        t.push(vec![i.to_string(), cell_f(*v)]);
    }
    t
}

fn estimate_json(e: &MlsiEstimate) -> Value {
    json!({
        "region": e.region,
        "alpha_hat": e.alpha_hat,
        "bound_kind": MlsiEstimate::BOUND_KIND,
        "n_samples": e.n_samples,
        "n_excluded": e.n_excluded,
        "seed": e.seed,
        "optimizer_trace": e.optimizer_trace,
    })
}

/// Loads, resolves and runs a configuration file.
pub fn run_file(
    path: &Path,
    command: &str,
    overrides: &crate::config::Overrides,
    default_checks: Option<&[Check]>,
    sigma_artifact: bool,
) -> LabResult<RunOutput> {
    let config = crate::config::ExperimentConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolved = config.resolve(overrides, default_checks, &base)?;
    let mut exp = Experiment::new(resolved)?;
    if sigma_artifact {
        exp = exp.with_sigma_artifact();
    }
    exp.run(command)
}
