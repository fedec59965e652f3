//! The inequality verification suite.
//!
//! Every entropy, dispersion, and Fisher-information relation the crate
//! implements is exercised here as a *check*: a named procedure that builds
//! densities from a seeded configuration, measures both sides of each claimed
//! relation, and records the outcome with an explicit tolerance. Checks are
//! registered in a static table ([`REGISTRY`]); the summary writer generates
//! its catalogue from the same table, so the list of claims and the list of
//! tests cannot drift apart.
//!
//! Conventions:
//!
//! * An *inequality* instance claims `lhs <= rhs` and passes when
//!   `rhs - lhs >= -tolerance`.
//! * An *equality* instance claims `lhs = rhs` and passes when
//!   `|lhs - rhs| <= tolerance`.
//! * Tolerances are pinned per instance at the call site. A per-check
//!   multiplicative `tolerance_scale` from the config is applied on top,
//!   which the convergence meta-test uses to tighten everything at higher
//!   resolution.
//! * Instances marked non-asserted record both sides of a comparison the
//!   suite does not gate on (used where a stated relation is demonstrably
//!   weaker than its proof); they can never fail the run.
//!
//! Determinism: all randomness is drawn from per-check streams seeded by
//! `config.seed` and a fixed per-check salt, so reports are byte-identical
//! across runs and thread counts except for the embedded timestamp.

mod entropy_checks;
mod info_checks;

pub use entropy_checks::{
    check_dispersion, check_entropy_convolution, check_entropy_equalities, check_finite_entropy,
    check_haar_invariance, check_marginal_inequalities, check_plancherel,
};
pub use info_checks::{
    check_de_bruijn, check_epi_counterexample, check_fisher_suite, check_log_sobolev,
};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::group::{chart_to_element, ChartId, ChartPoint, GroupElement, GroupId, Side};
use crate::harmonic::{
    derivative_spectrum, grid_bandwidth, So3Harmonics, So3Spectrum, MAX_BANDWIDTH,
};
use crate::info;
use crate::quadrature::Grid;
use crate::util::neumaier_sum;

/// Version stamp written into every report.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Parameters of the random densities the checks draw.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DensityParams {
    /// Band limit of the random band-limited families (some instances use
    /// `band + 1` and `band + 2`, clipped to the grid's capacity).
    pub band: usize,
    /// Fluctuation amplitude of those families, in `(0, 1)`.
    pub amplitude: f64,
    /// Base diffusion time for heat-kernel instances.
    pub heat_time: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            band: 3,
            amplitude: 0.45,
            heat_time: 0.5,
        }
    }
}

impl DensityParams {
    fn validate(&self) -> Result<()> {
        if self.band == 0 || self.band > MAX_BANDWIDTH {
            return Err(Error::Config(format!(
                "density band {} outside 1..={MAX_BANDWIDTH}",
                self.band
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0 && self.amplitude < 1.0) {
            return Err(Error::Config(format!(
                "density amplitude {} outside (0, 1)",
                self.amplitude
            )));
        }
        if !(self.heat_time.is_finite() && self.heat_time > 0.0) {
            return Err(Error::Config(format!(
                "heat time {} must be positive",
                self.heat_time
            )));
        }
        Ok(())
    }
}

/// Suite configuration. `seed` is mandatory: every random draw in the suite
/// descends from it, and the fingerprint embeds it, so a report is
/// reproducible from its own header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Group the Lie-group checks run on. Only the rotation group carries
    /// the harmonic machinery; selecting another group leaves the
    /// rotation-bound checks in an errored state rather than skipping them
    /// silently.
    #[serde(default = "default_group")]
    pub group: GroupId,
    /// Optional chart override. Grids are built on the default chart; any
    /// other admissible chart is rejected rather than silently remapped.
    #[serde(default)]
    pub chart: Option<ChartId>,
    /// Nodes per chart axis.
    #[serde(default = "default_resolution")]
    pub resolution: Vec<usize>,
    /// Spectral band limit for harmonic work, clipped to what the grid can
    /// resolve exactly.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    /// Truncation half-width for non-compact axes (`None`: library default).
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Root seed for all random draws.
    pub seed: u64,
    /// Random-density parameters.
    #[serde(default)]
    pub density: DensityParams,
    /// Check ids to run. `None` runs the full registry; an empty list runs
    /// nothing and produces an empty passing report.
    #[serde(default)]
    pub select: Option<Vec<String>>,
    /// Per-check multiplicative factor applied to every tolerance in that
    /// check. Keys must be registered check ids; values must be positive.
    #[serde(default)]
    pub tolerance_scale: BTreeMap<String, f64>,
    /// Run the selected checks on one thread each instead of sequentially.
    /// Results are identical either way; only wall time changes.
    #[serde(default)]
    pub parallel: bool,
}

fn default_group() -> GroupId {
    GroupId::So3
}

fn default_resolution() -> Vec<usize> {
    vec![16, 16, 16]
}

fn default_bandwidth() -> usize {
    8
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            group: default_group(),
            chart: None,
            resolution: default_resolution(),
            bandwidth: default_bandwidth(),
            half_width: None,
            seed: 42,
            density: DensityParams::default(),
            select: None,
            tolerance_scale: BTreeMap::new(),
            parallel: false,
        }
    }
}

impl SuiteConfig {
    /// Default configuration with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        SuiteConfig {
            seed,
            ..SuiteConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(chart) = self.chart {
            self.group.check_chart(chart)?;
            if chart != self.group.default_chart() {
                return Err(Error::Config(format!(
                    "suite grids are built on the default chart {:?} for {:?}; got {:?}",
                    self.group.default_chart(),
                    self.group,
                    chart
                )));
            }
        }
        if self.resolution.len() != self.group.dim() {
            return Err(Error::Config(format!(
                "resolution has {} axes but {:?} has dimension {}",
                self.resolution.len(),
                self.group,
                self.group.dim()
            )));
        }
        if self.resolution.iter().any(|&n| n < 4) {
            return Err(Error::Config(
                "resolution needs at least 4 nodes per axis".into(),
            ));
        }
        if self.bandwidth == 0 || self.bandwidth > MAX_BANDWIDTH {
            return Err(Error::Config(format!(
                "bandwidth {} outside 1..={MAX_BANDWIDTH}",
                self.bandwidth
            )));
        }
        if let Some(w) = self.half_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("half-width {w} must be positive")));
            }
        }
        self.density.validate()?;
        if let Some(ids) = &self.select {
            let mut seen = Vec::new();
            for id in ids {
                if find_check(id).is_none() {
                    return Err(Error::Config(format!(
                        "unknown check '{id}'; registered: {}",
                        check_ids().join(", ")
                    )));
                }
                if seen.contains(&id.as_str()) {
                    return Err(Error::Config(format!("check '{id}' selected twice")));
                }
                seen.push(id);
            }
        }
        for (id, scale) in &self.tolerance_scale {
            if find_check(id).is_none() {
                return Err(Error::Config(format!(
                    "tolerance scale names unknown check '{id}'"
                )));
            }
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(Error::Config(format!(
                    "tolerance scale for '{id}' must be positive, got {scale}"
                )));
            }
        }
        Ok(())
    }

    fn scale_for(&self, check: &str) -> f64 {
        self.tolerance_scale.get(check).copied().unwrap_or(1.0)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Whether an instance claims an ordering or an identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Inequality,
    Equality,
}

/// One measured relation: both sides, the slack, and the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub label: String,
    pub kind: RelationKind,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` for inequalities, `|lhs - rhs|` for equalities.
    pub slack: f64,
    pub tolerance: f64,
    /// Non-asserted instances record a comparison without gating on it.
    pub asserted: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InstanceRecord {
    /// Distance from the failure boundary (negative iff the instance fails).
    pub fn headroom(&self) -> f64 {
        match self.kind {
            RelationKind::Inequality => self.slack + self.tolerance,
            RelationKind::Equality => self.tolerance - self.slack,
        }
    }
}

/// Reproducibility stamp carried by every check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub group: GroupId,
    pub resolution: Vec<usize>,
    pub bandwidth: usize,
    pub seed: u64,
}

impl Fingerprint {
    fn of(cfg: &SuiteConfig) -> Self {
        Fingerprint {
            group: cfg.group,
            resolution: cfg.resolution.clone(),
            bandwidth: cfg.bandwidth,
            seed: cfg.seed,
        }
    }
}

/// Outcome of one check: every instance it measured, plus warnings that do
/// not affect the verdict (clipped bandwidths, low-support mass, refused
/// decompositions demonstrated on purpose).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check: String,
    pub title: String,
    pub fingerprint: Fingerprint,
    pub instances: Vec<InstanceRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl InequalityReport {
    /// Smallest headroom over asserted instances (`None` when empty).
    pub fn min_headroom(&self) -> Option<f64> {
        self.instances
            .iter()
            .filter(|i| i.asserted)
            .map(InstanceRecord::headroom)
            .fold(None, |acc, h| Some(acc.map_or(h, |a: f64| a.min(h))))
    }
}

/// A check either completes with a report or surfaces the error that
/// stopped it. Errored checks fail the suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckResult {
    Completed {
        #[serde(flatten)]
        report: InequalityReport,
    },
    Errored {
        check: String,
        title: String,
        error: String,
    },
}

impl CheckResult {
    pub fn check_id(&self) -> &str {
        match self {
            CheckResult::Completed { report } => &report.check,
            CheckResult::Errored { check, .. } => check,
        }
    }

    pub fn passed(&self) -> bool {
        match self {
            CheckResult::Completed { report } => report.pass,
            CheckResult::Errored { .. } => false,
        }
    }

    pub fn report(&self) -> Option<&InequalityReport> {
        match self {
            CheckResult::Completed { report } => Some(report),
            CheckResult::Errored { .. } => None,
        }
    }
}

/// Full suite outcome. Serializes deterministically (modulo `timestamp_ms`)
/// for a fixed config: map keys are ordered and instance order is fixed by
/// the registry and the per-check drawing order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    /// Milliseconds since the Unix epoch; the only nondeterministic field.
    pub timestamp_ms: u64,
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// JSON with the timestamp zeroed: byte-identical across reruns of the
    /// same configuration.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timestamp_ms = 0;
        copy.to_json()
    }

    /// Flat CSV of every instance across all completed checks.
    pub fn instances_csv(&self) -> String {
        let mut out = String::from("check,label,kind,lhs,rhs,slack,tolerance,asserted,pass,note\n");
        for result in &self.checks {
            let Some(report) = result.report() else {
                continue;
            };
            for inst in &report.instances {
                let kind = match inst.kind {
                    RelationKind::Inequality => "inequality",
                    RelationKind::Equality => "equality",
                };
                out.push_str(&format!(
                    "{},{},{},{:e},{:e},{:e},{:e},{},{},{}\n",
                    csv_field(&report.check),
                    csv_field(&inst.label),
                    kind,
                    inst.lhs,
                    inst.rhs,
                    inst.slack,
                    inst.tolerance,
                    inst.asserted,
                    inst.pass,
                    csv_field(inst.note.as_deref().unwrap_or("")),
                ));
            }
        }
        out
    }

    /// Human-readable summary. Contains no timestamp, so reruns of the same
    /// config produce byte-identical summaries.
    pub fn summary_text(&self) -> String {
        let fp = Fingerprint::of(&self.config);
        let mut out = String::new();
        out.push_str("inequality suite summary\n");
        out.push_str("========================\n");
        out.push_str(&format!(
            "fingerprint: group={:?} resolution={:?} bandwidth={} seed={}\n",
            fp.group, fp.resolution, fp.bandwidth, fp.seed
        ));
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        out.push_str(&format!(
            "checks: {} run, {} passed\n\n",
            self.checks.len(),
            passed
        ));
        for result in &self.checks {
            match result {
                CheckResult::Completed { report } => {
                    let head = report
                        .min_headroom()
                        .map_or("n/a".to_string(), |h| format!("{h:.2e}"));
                    out.push_str(&format!(
                        "[{}] {:<22} {} ({} instances, min headroom {})\n",
                        if report.pass { "PASS" } else { "FAIL" },
                        report.check,
                        report.title,
                        report.instances.len(),
                        head
                    ));
                    for w in &report.warnings {
                        out.push_str(&format!("       warning: {w}\n"));
                    }
                    for inst in report.instances.iter().filter(|i| i.asserted && !i.pass) {
                        out.push_str(&format!(
                            "       FAILED: {} (lhs {:e}, rhs {:e}, slack {:e}, tol {:e})\n",
                            inst.label, inst.lhs, inst.rhs, inst.slack, inst.tolerance
                        ));
                    }
                }
                CheckResult::Errored {
                    check,
                    title,
                    error,
                } => {
                    out.push_str(&format!("[ERR ] {check:<22} {title}\n       {error}\n"));
                }
            }
        }
        out.push_str(&format!(
            "\noverall: {}\n",
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out.push_str("\nregistered checks\n-----------------\n");
        for entry in REGISTRY {
            out.push_str(&format!("{:<22} {}\n", entry.id, entry.title));
        }
        out
    }

    /// Write `report.json`, `instances.csv`, and `summary.txt` into `dir`
    /// (created if missing).
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("instances.csv"), self.instances_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary_text())?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// Registry and runner
// ---------------------------------------------------------------------------

/// A registered check: stable id, one-line claim, entry point.
pub struct CheckEntry {
    pub id: &'static str,
    pub title: &'static str,
    pub run: fn(&SuiteConfig) -> Result<InequalityReport>,
}

/// Every check the suite knows, in report order. The summary catalogue and
/// the selection validator both read this table.
pub const REGISTRY: &[CheckEntry] = &[
    CheckEntry {
        id: "haar-invariance",
        title: "integrals are unchanged by shifts and inversion",
        run: check_haar_invariance,
    },
    CheckEntry {
        id: "plancherel",
        title: "spectral power equals the squared integral norm",
        run: check_plancherel,
    },
    CheckEntry {
        id: "entropy-convolution",
        title: "convolution never loses entropy",
        run: check_entropy_convolution,
    },
    CheckEntry {
        id: "dispersion",
        title: "dispersion bounds entropy and is superadditive",
        run: check_dispersion,
    },
    CheckEntry {
        id: "finite-entropy",
        title: "finite-group entropy bounds under convolution",
        run: check_finite_entropy,
    },
    CheckEntry {
        id: "marginals",
        title: "entropy is subadditive across subgroup splits",
        run: check_marginal_inequalities,
    },
    CheckEntry {
        id: "entropy-equalities",
        title: "rearranged convolutions keep their entropy",
        run: check_entropy_equalities,
    },
    CheckEntry {
        id: "fisher",
        title: "Fisher information: invariance and convolution bounds",
        run: check_fisher_suite,
    },
    CheckEntry {
        id: "de-bruijn",
        title: "entropy production along diffusion matches Fisher information",
        run: check_de_bruijn,
    },
    CheckEntry {
        id: "log-sobolev",
        title: "entropy-power and relative-entropy bounds by Fisher information",
        run: check_log_sobolev,
    },
    CheckEntry {
        id: "epi-counterexample",
        title: "the entropy-power inequality fails on the rotation group",
        run: check_epi_counterexample,
    },
];

pub fn check_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.id).collect()
}

pub fn find_check(id: &str) -> Option<&'static CheckEntry> {
    REGISTRY.iter().find(|e| e.id == id)
}

fn run_one(entry: &CheckEntry, cfg: &SuiteConfig) -> CheckResult {
    match (entry.run)(cfg) {
        Ok(report) => CheckResult::Completed { report },
        Err(e) => CheckResult::Errored {
            check: entry.id.to_string(),
            title: entry.title.to_string(),
            error: e.to_string(),
        },
    }
}

/// Run the configured selection (default: everything) and assemble the
/// report. Checks are independent; `config.parallel` runs each on its own
/// thread with results joined in registry order, so the report is identical
/// either way.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let selected: Vec<&'static CheckEntry> = match &cfg.select {
        None => REGISTRY.iter().collect(),
        Some(ids) => ids
            .iter()
            .map(|id| find_check(id).expect("selection validated"))
            .collect(),
    };
    let checks: Vec<CheckResult> = if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = selected
                .iter()
                .map(|entry| scope.spawn(move || run_one(entry, cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("check thread panicked"))
                .collect()
        })
    } else {
        selected.iter().map(|entry| run_one(entry, cfg)).collect()
    };
    let pass = checks.iter().all(CheckResult::passed);
    let timestamp_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        timestamp_ms,
        config: cfg.clone(),
        checks,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Section builder (check-side API)
// ---------------------------------------------------------------------------

/// Accumulates instances for one check, applying the configured tolerance
/// scale and the pass rules uniformly.
pub(crate) struct Section {
    check: &'static str,
    title: &'static str,
    scale: f64,
    fingerprint: Fingerprint,
    instances: Vec<InstanceRecord>,
    warnings: Vec<String>,
}

impl Section {
    pub(crate) fn new(cfg: &SuiteConfig, check: &'static str) -> Section {
        let entry = find_check(check).expect("check id registered");
        Section {
            check,
            title: entry.title,
            scale: cfg.scale_for(check),
            fingerprint: Fingerprint::of(cfg),
            instances: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn push(
        &mut self,
        kind: RelationKind,
        label: String,
        lhs: f64,
        rhs: f64,
        tol: f64,
        asserted: bool,
        note: Option<String>,
    ) {
        let tolerance = tol * self.scale;
        let slack = match kind {
            RelationKind::Inequality => rhs - lhs,
            RelationKind::Equality => (lhs - rhs).abs(),
        };
        let holds = match kind {
            RelationKind::Inequality => slack >= -tolerance,
            RelationKind::Equality => slack <= tolerance,
        };
        self.instances.push(InstanceRecord {
            label,
            kind,
            lhs,
            rhs,
            slack,
            tolerance,
            asserted,
            pass: !asserted || holds,
            note,
        });
    }

    /// Assert `lhs <= rhs` within `tol`.
    pub(crate) fn le(&mut self, label: impl Into<String>, lhs: f64, rhs: f64, tol: f64) {
        self.push(RelationKind::Inequality, label.into(), lhs, rhs, tol, true, None);
    }

    pub(crate) fn le_note(
        &mut self,
        label: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
        note: impl Into<String>,
    ) {
        self.push(
            RelationKind::Inequality,
            label.into(),
            lhs,
            rhs,
            tol,
            true,
            Some(note.into()),
        );
    }

    /// Assert `lhs = rhs` within `tol`.
    pub(crate) fn eq(&mut self, label: impl Into<String>, lhs: f64, rhs: f64, tol: f64) {
        self.push(RelationKind::Equality, label.into(), lhs, rhs, tol, true, None);
    }

    pub(crate) fn eq_note(
        &mut self,
        label: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
        note: impl Into<String>,
    ) {
        self.push(
            RelationKind::Equality,
            label.into(),
            lhs,
            rhs,
            tol,
            true,
            Some(note.into()),
        );
    }

    /// Record `lhs <= rhs` without gating the suite on it.
    pub(crate) fn observe_le(
        &mut self,
        label: impl Into<String>,
        lhs: f64,
        rhs: f64,
        note: impl Into<String>,
    ) {
        self.push(
            RelationKind::Inequality,
            label.into(),
            lhs,
            rhs,
            0.0,
            false,
            Some(note.into()),
        );
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub(crate) fn finish(self) -> InequalityReport {
        let pass = self.instances.iter().all(|i| i.pass);
        InequalityReport {
            check: self.check.to_string(),
            title: self.title.to_string(),
            fingerprint: self.fingerprint,
            instances: self.instances,
            warnings: self.warnings,
            pass,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared numerical helpers for the checks
// ---------------------------------------------------------------------------

/// Score samples below this fraction of the density's peak are floored
/// (matching the Fisher engine's convention).
const SCORE_FLOOR: f64 = 1e-12;

/// Per-check random stream: decorrelated from other checks, independent of
/// execution order and thread count.
pub(crate) fn rng_for(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(salt),
    )
}

/// Rotation-grid environment shared by the harmonic checks.
pub(crate) struct So3Env {
    pub grid: Arc<Grid>,
    /// Working band limit: the configured bandwidth clipped to what the
    /// grid transforms exactly.
    pub l_eff: usize,
}

pub(crate) fn so3_env(cfg: &SuiteConfig, check: &'static str) -> Result<So3Env> {
    if cfg.group != GroupId::So3 {
        return Err(Error::Config(format!(
            "check '{check}' needs the rotation group; configured group is {:?}",
            cfg.group
        )));
    }
    let grid = Grid::build(GroupId::So3, &cfg.resolution, cfg.half_width)?;
    let l_eff = cfg.bandwidth.min(grid_bandwidth(&grid));
    Ok(So3Env { grid, l_eff })
}

impl So3Env {
    /// Warn once if the configured bandwidth exceeds the grid's capacity.
    pub(crate) fn note_clip(&self, cfg: &SuiteConfig, section: &mut Section) {
        if self.l_eff < cfg.bandwidth {
            section.warn(format!(
                "bandwidth {} clipped to {} (exact-transform capacity of a {:?} grid)",
                cfg.bandwidth, self.l_eff, cfg.resolution
            ));
        }
    }
}

/// Synthesize a spectrum on the grid.
pub(crate) fn synth_values(grid: &Arc<Grid>, spec: &So3Spectrum) -> Result<Vec<f64>> {
    So3Harmonics::new(grid.clone(), spec.l_max())?.synthesize(spec)
}

/// Synthesize a spectrum into a density field.
pub(crate) fn field_from_spectrum(grid: &Arc<Grid>, spec: &So3Spectrum) -> Result<DensityField> {
    DensityField::new(grid.clone(), synth_values(grid, spec)?)
}

/// Entropy of a sample vector on the grid.
pub(crate) fn entropy_of(grid: &Arc<Grid>, values: Vec<f64>) -> Result<f64> {
    Ok(info::entropy(&DensityField::new(grid.clone(), values)?))
}

/// Score fields `(X_i f) / f` computed spectrally: differentiate the
/// spectrum, synthesize, divide by the synthesized density. Exact up to
/// rounding for band-limited spectra, which keeps the tight Fisher
/// tolerances honest.
pub(crate) fn spectral_scores(
    grid: &Arc<Grid>,
    spec: &So3Spectrum,
    side: Side,
) -> Result<(DensityField, Vec<Vec<f64>>)> {
    let harmonics = So3Harmonics::new(grid.clone(), spec.l_max())?;
    let values = harmonics.synthesize(spec)?;
    let peak = values.iter().cloned().fold(0.0_f64, f64::max);
    let floor = SCORE_FLOOR * peak.max(f64::MIN_POSITIVE);
    let mut scores = Vec::with_capacity(3);
    for i in 0..3 {
        let dspec = derivative_spectrum(spec, i, side);
        let dvals = harmonics.synthesize(&dspec)?;
        scores.push(
            dvals
                .iter()
                .zip(&values)
                .map(|(&d, &v)| d / v.max(floor))
                .collect(),
        );
    }
    let field = DensityField::new(grid.clone(), values)?;
    Ok((field, scores))
}

/// Fisher matrix from exact spectral scores.
pub(crate) fn fisher_spectral(
    grid: &Arc<Grid>,
    spec: &So3Spectrum,
    side: Side,
) -> Result<DMatrix<f64>> {
    let (field, scores) = spectral_scores(grid, spec, side)?;
    info::fisher_from_scores(&field, &scores)
}

/// Largest absolute entry difference between two square matrices.
pub(crate) fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Haar-probability random rotation.
pub(crate) fn random_rotation(rng: &mut ChaCha8Rng) -> Result<GroupElement> {
    let tau = std::f64::consts::TAU;
    let alpha = rng.gen::<f64>() * tau;
    let gamma = rng.gen::<f64>() * tau;
    let beta = (1.0 - 2.0 * rng.gen::<f64>()).clamp(-1.0, 1.0).acos();
    chart_to_element(&ChartPoint::new(
        GroupId::So3,
        ChartId::EulerZxz,
        vec![alpha, beta, gamma],
    )?)
}

/// Rotation about the chart's distinguished axis by `k` first-axis grid
/// steps. Shifting by it permutes grid nodes exactly, so invariance
/// statements proved through it are free of quadrature error.
pub(crate) fn z_node_rotation(grid: &Grid, k: usize) -> Result<GroupElement> {
    let n = grid.shape()[0];
    let angle = k as f64 * std::f64::consts::TAU / n as f64;
    chart_to_element(&ChartPoint::new(
        GroupId::So3,
        ChartId::EulerZxz,
        vec![angle, 0.0, 0.0],
    )?)
}

/// Random symmetric positive-definite pairing matrix `A^T A + 0.05 I`.
pub(crate) fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| 2.0 * rng.gen::<f64>() - 1.0);
    a.transpose() * &a + DMatrix::identity(dim, dim) * 0.05
}

/// `tr(F P)`.
pub(crate) fn trace_pair(f: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (f * p).trace()
}

/// Quadrature L1 distance between two sample vectors on the same grid.
pub(crate) fn l1_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    neumaier_sum(
        grid.weights()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&w, (&x, &y))| w * (x - y).abs()),
    )
}

/// The uniform density's spectrum: unit mass, nothing else.
pub(crate) fn uniform_spectrum() -> So3Spectrum {
    let mut spec = So3Spectrum::zeros(0);
    spec.block_mut(0)[(0, 0)] = num_complex::Complex64::new(1.0, 0.0);
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_roundtrip() {
        let cfg = SuiteConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.group, GroupId::So3);
        assert_eq!(cfg.resolution, vec![16, 16, 16]);
        assert_eq!(cfg.bandwidth, 8);
        assert_eq!(cfg.seed, 42);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SuiteConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_requires_seed() {
        let err = SuiteConfig::from_json("{}");
        assert!(err.is_err(), "seed must be mandatory");
        SuiteConfig::from_json(r#"{"seed": 7}"#).unwrap();
    }

    #[test]
    fn config_rejects_unknown_fields() {
        assert!(SuiteConfig::from_json(r#"{"seed": 1, "bogus": 3}"#).is_err());
    }

    #[test]
    fn config_rejects_unknown_selection() {
        let cfg = SuiteConfig {
            select: Some(vec!["no-such-check".into()]),
            ..SuiteConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_rejects_duplicate_selection() {
        let cfg = SuiteConfig {
            select: Some(vec!["plancherel".into(), "plancherel".into()]),
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_rejects_bad_tolerance_scales() {
        let mut cfg = SuiteConfig::default();
        cfg.tolerance_scale.insert("nope".into(), 1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SuiteConfig::default();
        cfg.tolerance_scale.insert("fisher".into(), 0.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SuiteConfig::default();
        cfg.tolerance_scale.insert("fisher".into(), 0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_rejects_mismatched_resolution() {
        let cfg = SuiteConfig {
            resolution: vec![16, 16],
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SuiteConfig {
            group: GroupId::R1,
            resolution: vec![64],
            ..SuiteConfig::default()
        };
        cfg.validate().unwrap();
    }

    #[test]
    fn config_rejects_non_default_chart() {
        let cfg = SuiteConfig {
            chart: Some(ChartId::AxisAngleExp),
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SuiteConfig {
            chart: Some(ChartId::EulerZxz),
            ..SuiteConfig::default()
        };
        cfg.validate().unwrap();
        let cfg = SuiteConfig {
            chart: Some(ChartId::Angle),
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err(), "chart from another group");
    }

    #[test]
    fn registry_ids_are_unique_and_known() {
        let ids = check_ids();
        assert_eq!(ids.len(), 11);
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len(), "duplicate registry id");
        assert!(find_check("fisher").is_some());
        assert!(find_check("missing").is_none());
    }

    #[test]
    fn section_pass_rules() {
        let cfg = SuiteConfig::default();
        let mut s = Section::new(&cfg, "plancherel");
        s.le("holds", 1.0, 2.0, 1e-9);
        s.le("holds on the boundary", 1.0, 1.0 - 0.5e-9, 1e-9);
        s.eq("equal enough", 1.0, 1.0 + 1e-10, 1e-9);
        let report = s.finish();
        assert!(report.pass);
        assert!((report.instances[0].slack - 1.0).abs() < 1e-15);

        let mut s = Section::new(&cfg, "plancherel");
        s.le("fails", 2.0, 1.0, 1e-9);
        let report = s.finish();
        assert!(!report.pass);
        assert!(report.min_headroom().unwrap() < 0.0);
    }

    #[test]
    fn section_applies_tolerance_scale() {
        let mut cfg = SuiteConfig::default();
        cfg.tolerance_scale.insert("plancherel".into(), 100.0);
        let mut s = Section::new(&cfg, "plancherel");
        s.eq("loosened", 0.0, 5e-8, 1e-9);
        assert!(s.finish().pass, "scale 100 turns 1e-9 into 1e-7");
        let mut s = Section::new(&SuiteConfig::default(), "plancherel");
        s.eq("strict", 0.0, 5e-8, 1e-9);
        assert!(!s.finish().pass);
    }

    #[test]
    fn observed_instances_never_fail() {
        let cfg = SuiteConfig::default();
        let mut s = Section::new(&cfg, "fisher");
        s.observe_le("recorded only", 2.0, 1.0, "not asserted");
        let report = s.finish();
        assert!(report.pass);
        assert!(!report.instances[0].asserted);
        assert!(report.instances[0].slack < 0.0);
        assert_eq!(report.min_headroom(), None);
    }

    #[test]
    fn csv_escapes_fields() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\"q"), "\"q\"\"q\"");
    }

    #[test]
    fn uniform_spectrum_is_unit_mass() {
        let u = uniform_spectrum();
        assert_eq!(u.l_max(), 0);
        assert!((u.mass().re - 1.0).abs() < 1e-15);
        assert!((u.power() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn z_node_rotation_matches_grid_angle() {
        let grid = Grid::build(GroupId::So3, &[16, 8, 16], None).unwrap();
        let g = z_node_rotation(&grid, 3).unwrap();
        let p = crate::group::element_to_chart(&g, ChartId::EulerZxz).unwrap();
        let expect = 3.0 * std::f64::consts::TAU / 16.0;
        let wrapped = crate::util::wrap_2pi(p.coords[0] + p.coords[2]);
        assert!((wrapped - expect).abs() < 1e-12);
    }
}
