//! On-disk benchmark workspace.
//!
//! ```text
//! <root>/sites/<site>.csv, <site>.json
//! <root>/split.json
//! <root>/artifacts/<site>/olfc/scenario_model.v1.json
//! <root>/artifacts/<site>/sdp/noise_model.v1.json, value_function.vf
//! <root>/artifacts/<site>/sdpar<k>/ar_model.v1.json, value_function.vf
//! <root>/results/<controller>.jsonl, .csv, .meta.json, .timings.csv
//! <root>/scores.json
//! <root>/report/score_table.{csv,json}, per_site.{csv,json}, timings.csv
//! ```
//!
//! Everything but the timing files is a pure function of the inputs and
//! seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calib::{fit_ar_model, fit_noise_model, ArConfig, ArModel, NoiseModel};
use crate::controllers::vfile::{read_value_function, write_value_function};
use crate::controllers::{sdp_value_function, sdpar_value_function, GridConfig};
use crate::data::{
    build_chronicles, ingest_site, write_site, CalibrationWeek, Schema, SimulationWeek, SiteRecord,
    Split,
};
use crate::error::{Error, Result};
use crate::kmeans::KMeansConfig;
use crate::scenario::{fit_scenario_model, ScenarioConfig, ScenarioModel};
use crate::scoring::{self, ScoreReport};
use crate::seed::content_hash;
use crate::simulate::{
    run_benchmark, BenchmarkOutput, BenchmarkPlan, ControllerSpec, SimResult, SiteArtifacts,
    SiteContext,
};
use crate::tariff::Tariff;

/// Calibrated artifact family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArtifactKind {
    Scenario,
    Noise,
    Ar(usize),
}

impl ArtifactKind {
    pub fn for_controller(spec: &ControllerSpec) -> Option<Self> {
        match spec {
            ControllerSpec::Olfc { .. } => Some(ArtifactKind::Scenario),
            ControllerSpec::Sdp => Some(ArtifactKind::Noise),
            ControllerSpec::SdpAr { order } => Some(ArtifactKind::Ar(*order)),
            _ => None,
        }
    }

    /// Accepts `olfc`, `sdp`, `sdpar-<k>` or any controller name that needs
    /// calibration.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "olfc" {
            return Ok(ArtifactKind::Scenario);
        }
        let spec = ControllerSpec::parse(s)?;
        Self::for_controller(&spec)
            .ok_or_else(|| Error::Validation(format!("controller `{s}` needs no calibration")))
    }

    pub fn dir_name(&self) -> String {
        match self {
            ArtifactKind::Scenario => "olfc".into(),
            ArtifactKind::Noise => "sdp".into(),
            ArtifactKind::Ar(k) => format!("sdpar{k}"),
        }
    }

    fn model_file(&self) -> &'static str {
        match self {
            ArtifactKind::Scenario => "scenario_model.v1.json",
            ArtifactKind::Noise => "noise_model.v1.json",
            ArtifactKind::Ar(_) => "ar_model.v1.json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub sites: BTreeMap<String, Split>,
}

/// Settings shared by calibration runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct CalibrationSettings {
    pub kmeans: KMeansConfig,
    pub grid: GridConfig,
    pub seed: u64,
    /// Same-daytype slot pooling half-width for AR fits; automatic if unset.
    pub ar_pooling: Option<usize>,
    pub strict_distinct: bool,
}


/// What a simulation run was configured with; stored next to its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub controller: String,
    pub seed: u64,
    pub tariff_hash: String,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Timing {
    seconds: f64,
}

pub fn tariff_hash(tariff: &Tariff) -> String {
    content_hash(&serde_json::to_vec(tariff).expect("tariff serializes"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn sites_dir(&self) -> PathBuf {
        self.root.join("sites")
    }

    pub fn site_csv(&self, site: &str) -> PathBuf {
        self.sites_dir().join(format!("{site}.csv"))
    }

    pub fn split_path(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn artifact_dir(&self, site: &str, kind: ArtifactKind) -> PathBuf {
        self.root.join("artifacts").join(site).join(kind.dir_name())
    }

    pub fn model_path(&self, site: &str, kind: ArtifactKind) -> PathBuf {
        self.artifact_dir(site, kind).join(kind.model_file())
    }

    pub fn value_function_path(&self, site: &str, kind: ArtifactKind) -> PathBuf {
        self.artifact_dir(site, kind).join("value_function.vf")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.root.join("results")
    }

    pub fn results_path(&self, controller: &str) -> PathBuf {
        self.results_dir().join(format!("{controller}.jsonl"))
    }

    pub fn scores_path(&self) -> PathBuf {
        self.root.join("scores.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    /// Sorted ids of the stored sites.
    pub fn site_ids(&self) -> Result<Vec<String>> {
        let dir = self.sites_dir();
        let entries = fs::read_dir(&dir).map_err(|e| {
            Error::Validation(format!("no sites in {}: {e}", dir.display()))
        })?;
        let mut ids = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        if ids.is_empty() {
            return Err(Error::Validation(format!("no sites in {}", dir.display())));
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_site(&self, site: &str) -> Result<Arc<SiteRecord>> {
        Ok(Arc::new(ingest_site(&self.site_csv(site), Schema::Canonical)?))
    }

    pub fn write_sites(&self, records: &[SiteRecord]) -> Result<()> {
        for rec in records {
            write_site(rec, &self.site_csv(&rec.site_id))?;
        }
        Ok(())
    }

    /// Validates external files and stores them in canonical form.
    pub fn ingest(&self, paths: &[PathBuf], schema: Schema) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for path in paths {
            let rec = ingest_site(path, schema)?;
            write_site(&rec, &self.site_csv(&rec.site_id))?;
            ids.push(rec.site_id.clone());
        }
        Ok(ids)
    }

    pub fn split(&self, seed: u64) -> Result<SplitFile> {
        let mut sites = BTreeMap::new();
        for id in self.site_ids()? {
            let rec = self.load_site(&id)?;
            let (chronicles, report) = build_chronicles(&rec);
            if report.dropped_weeks > 0 {
                log::warn!("{id}: {} incomplete weeks dropped", report.dropped_weeks);
            }
            sites.insert(id, crate::data::split_weeks(&chronicles, seed)?);
        }
        let file = SplitFile { seed, sites };
        write_json(&self.split_path(), &file)?;
        Ok(file)
    }

    pub fn read_split(&self) -> Result<SplitFile> {
        let path = self.split_path();
        if !path.exists() {
            return Err(Error::Validation(format!(
                "no calibration/simulation split at {}; run `split` first",
                path.display()
            )));
        }
        read_json(&path)
    }

    fn site_weeks(
        &self,
        site: &str,
        split: &SplitFile,
    ) -> Result<(Arc<SiteRecord>, Vec<CalibrationWeek>, Vec<SimulationWeek>)> {
        let rec = self.load_site(site)?;
        let part = split
            .sites
            .get(site)
            .ok_or_else(|| Error::Validation(format!("site {site} is not in the split")))?;
        let (chronicles, _) = build_chronicles(&rec);
        let (calib, sim) = part.apply(chronicles)?;
        Ok((rec, calib, sim))
    }

    /// Fits and stores the requested artifacts for every site.
    pub fn calibrate(
        &self,
        kinds: &[ArtifactKind],
        settings: &CalibrationSettings,
        tariff: &Tariff,
    ) -> Result<()> {
        let split = self.read_split()?;
        settings.grid.validate()?;
        let kinds: BTreeSet<ArtifactKind> = kinds.iter().copied().collect();
        for site in self.site_ids()? {
            let (rec, calib, _) = self.site_weeks(&site, &split)?;
            if calib.is_empty() {
                return Err(Error::Validation(format!("site {site} has no calibration weeks")));
            }
            for &kind in &kinds {
                let start = Instant::now();
                self.calibrate_one(&site, &rec, &calib, kind, settings, tariff)?;
                let seconds = start.elapsed().as_secs_f64();
                log::info!("{site}: {} calibrated in {seconds:.3} s", kind.dir_name());
                write_json(
                    &self.artifact_dir(&site, kind).join("timing.json"),
                    &Timing { seconds },
                )?;
            }
        }
        Ok(())
    }

    fn calibrate_one(
        &self,
        site: &str,
        rec: &SiteRecord,
        calib: &[CalibrationWeek],
        kind: ArtifactKind,
        s: &CalibrationSettings,
        tariff: &Tariff,
    ) -> Result<()> {
        let path = self.model_path(site, kind);
        let vf = match kind {
            ArtifactKind::Scenario => {
                let cfg = ScenarioConfig {
                    kmeans: s.kmeans,
                    strict_distinct: s.strict_distinct,
                    seed: s.seed,
                    ..ScenarioConfig::default()
                };
                write_json(&path, &fit_scenario_model(calib, &cfg)?)?;
                None
            }
            ArtifactKind::Noise => {
                let model = fit_noise_model(calib, &s.kmeans, s.seed)?;
                write_json(&path, &model)?;
                Some(sdp_value_function(&model, &rec.battery, tariff, &s.grid)?)
            }
            ArtifactKind::Ar(order) => {
                let cfg = ArConfig {
                    kmeans: s.kmeans,
                    pooling: s.ar_pooling,
                    seed: s.seed,
                    ..ArConfig::new(order)
                };
                let model = fit_ar_model(calib, &cfg)?;
                write_json(&path, &model)?;
                Some(sdpar_value_function(&model, &rec.battery, tariff, &s.grid)?)
            }
        };
        if let Some(vf) = vf {
            let provenance = provenance_hash(&fs::read(&path)?, tariff, &s.grid)?;
            write_value_function(&self.value_function_path(site, kind), &vf, &provenance)?;
        }
        Ok(())
    }

    /// Hash of the stored model artifact, empty when absent.
    pub fn artifact_hash(&self, site: &str, kind: ArtifactKind) -> String {
        fs::read(self.model_path(site, kind))
            .map(|b| content_hash(&b))
            .unwrap_or_default()
    }

    fn load_artifacts(
        &self,
        site: &str,
        kinds: &BTreeSet<ArtifactKind>,
        tariff: &Tariff,
        grid: &GridConfig,
    ) -> Result<SiteArtifacts> {
        let mut out = SiteArtifacts::default();
        for &kind in kinds {
            let path = self.model_path(site, kind);
            if !path.exists() {
                continue;
            }
            let bytes = fs::read(&path)?;
            let check_vf = |vf_path: &Path| -> Result<_> {
                let (vf, header) = read_value_function(vf_path)?;
                if header.provenance != provenance_hash(&bytes, tariff, grid)? {
                    return Err(Error::Artifact(format!(
                        "{} was computed from another model, tariff or grid; recalibrate",
                        vf_path.display()
                    )));
                }
                Ok(Arc::new(vf))
            };
            match kind {
                ArtifactKind::Scenario => {
                    let m: ScenarioModel = serde_json::from_slice(&bytes)?;
                    m.validate()?;
                    out.scenario = Some(Arc::new(m));
                }
                ArtifactKind::Noise => {
                    let m: NoiseModel = serde_json::from_slice(&bytes)?;
                    m.validate()?;
                    let vf = check_vf(&self.value_function_path(site, kind))?;
                    out.sdp = Some((Arc::new(m), vf));
                }
                ArtifactKind::Ar(order) => {
                    let m: ArModel = serde_json::from_slice(&bytes)?;
                    m.validate()?;
                    let vf = check_vf(&self.value_function_path(site, kind))?;
                    out.sdpar.insert(order, (Arc::new(m), vf));
                }
            }
        }
        Ok(out)
    }

    /// Simulates `controllers` on the simulation weeks of every site and
    /// stores one result file per controller.
    pub fn simulate(
        &self,
        controllers: &[ControllerSpec],
        tariff: Arc<Tariff>,
        grid: GridConfig,
        seed: u64,
        parallelism: usize,
    ) -> Result<BenchmarkOutput> {
        let split = self.read_split()?;
        let kinds: BTreeSet<ArtifactKind> =
            controllers.iter().filter_map(ArtifactKind::for_controller).collect();
        let mut sites = Vec::new();
        for site in self.site_ids()? {
            let (rec, _, weeks) = self.site_weeks(&site, &split)?;
            sites.push(SiteContext {
                artifacts: self.load_artifacts(&site, &kinds, &tariff, &grid)?,
                site_id: site,
                battery: rec.battery,
                weeks,
            });
        }
        let plan = BenchmarkPlan {
            controllers: controllers.to_vec(),
            sites,
            tariff: tariff.clone(),
            grid,
            seed,
        };
        let out = run_benchmark(&plan, parallelism)?;
        let hash = tariff_hash(&tariff);
        for spec in controllers {
            let name = spec.name();
            let rows: Vec<&SimResult> = out.results.iter().filter(|r| r.controller == name).collect();
            self.write_results(&name, &rows)?;
            let meta = RunMeta {
                controller: name.clone(),
                seed,
                tariff_hash: hash.clone(),
                grid,
            };
            write_json(&self.results_dir().join(format!("{name}.meta.json")), &meta)?;
        }
        Ok(out)
    }

    fn write_results(&self, name: &str, rows: &[&SimResult]) -> Result<()> {
        fs::create_dir_all(self.results_dir())?;
        let mut jsonl = String::new();
        let mut csv = String::from("site_id,week_id,management_cost,fault_step\n");
        let mut timings = String::from("site_id,week_id,online_seconds\n");
        for r in rows {
            jsonl.push_str(&serde_json::to_string(r)?);
            jsonl.push('\n');
            let step = opt(r.fault.as_ref().map(|f| f.step));
            writeln!(csv, "{},{},{},{step}", r.site_id, r.week_id, r.management_cost).unwrap();
            writeln!(timings, "{},{},{}", r.site_id, r.week_id, r.online_time).unwrap();
        }
        fs::write(self.results_path(name), jsonl)?;
        fs::write(self.results_dir().join(format!("{name}.csv")), csv)?;
        fs::write(self.results_dir().join(format!("{name}.timings.csv")), timings)?;
        Ok(())
    }

    /// Every stored result, ordered by controller, site and week.
    pub fn load_results(&self) -> Result<Vec<SimResult>> {
        let mut out = Vec::new();
        let Ok(entries) = fs::read_dir(self.results_dir()) else {
            return Ok(out);
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            for line in fs::read_to_string(&path)?.lines().filter(|l| !l.is_empty()) {
                out.push(serde_json::from_str(line)?);
            }
        }
        out.sort_by(|a, b| {
            (&a.controller, &a.site_id, a.week_id).cmp(&(&b.controller, &b.site_id, b.week_id))
        });
        Ok(out)
    }

    fn run_meta(&self, controller: &str) -> Option<RunMeta> {
        read_json(&self.results_dir().join(format!("{controller}.meta.json"))).ok()
    }

    /// Scores every simulated controller and stores `scores.json`.
    ///
    /// Dummy and anticipative runs are simulated first when absent.
    pub fn score(&self, tariff: Arc<Tariff>, grid: GridConfig, seed: u64) -> Result<ScoreReport> {
        let split = self.read_split()?;
        let mut results = self.load_results()?;
        let present: BTreeSet<String> = results.iter().map(|r| r.controller.clone()).collect();
        let missing: Vec<ControllerSpec> = [ControllerSpec::Dummy, ControllerSpec::Anticipative]
            .into_iter()
            .filter(|s| !present.contains(&s.name()))
            .collect();
        if !missing.is_empty() {
            let out = self.simulate(&missing, tariff.clone(), grid, seed, 1)?;
            if out.has_faults() {
                return Err(Error::Validation("reference controllers faulted".into()));
            }
            results = self.load_results()?;
        }
        let hash = tariff_hash(&tariff);
        for ctrl in results.iter().map(|r| r.controller.as_str()).collect::<BTreeSet<_>>() {
            if let Some(meta) = self.run_meta(ctrl) {
                if meta.tariff_hash != hash {
                    return Err(Error::Validation(format!(
                        "{ctrl} was simulated with another tariff; re-run `simulate`"
                    )));
                }
            }
        }
        let mut rmse = BTreeMap::new();
        for site in self.site_ids()? {
            let rec = self.load_site(&site)?;
            match scoring::rmse(&rec) {
                Ok(v) => {
                    rmse.insert(site, v);
                }
                Err(e) => log::warn!("{site}: no RMSE: {e}"),
            }
        }
        let mut metadata = BTreeMap::new();
        metadata.insert("split_seed".to_string(), split.seed.to_string());
        metadata.insert("tariff_hash".to_string(), hash);
        metadata.insert("sites".to_string(), split.sites.len().to_string());
        let mut report = scoring::score_results(&results, &rmse, metadata)?;
        for row in &mut report.sites {
            let p = &mut row.provenance;
            p.insert("split_seed".into(), split.seed.to_string());
            if let Some(meta) = self.run_meta(&row.controller) {
                p.insert("seed".into(), meta.seed.to_string());
            }
            if let Some(kind) = ControllerSpec::parse(&row.controller)
                .ok()
                .and_then(|s| ArtifactKind::for_controller(&s))
            {
                p.insert("artifact_hash".into(), self.artifact_hash(&row.site_id, kind));
            }
        }
        write_json(&self.scores_path(), &report)?;
        Ok(report)
    }

    pub fn read_scores(&self) -> Result<ScoreReport> {
        let path = self.scores_path();
        if !path.exists() {
            return Err(Error::Validation(format!(
                "no scores at {}; run `score` first",
                path.display()
            )));
        }
        read_json(&path)
    }

    /// Renders the score table, the per-site long table and the timing
    /// table into `report/`. Returns the written paths.
    pub fn report(&self, format: ReportFormat) -> Result<Vec<PathBuf>> {
        let scores = self.read_scores()?;
        let dir = self.report_dir();
        fs::create_dir_all(&dir)?;
        let mut written = Vec::new();
        let ext = match format {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        };
        let table = dir.join(format!("score_table.{ext}"));
        let per_site = dir.join(format!("per_site.{ext}"));
        match format {
            ReportFormat::Json => {
                write_json(&table, &scores.controllers)?;
                write_json(&per_site, &scores.sites)?;
            }
            ReportFormat::Csv => {
                let mut t = String::from("controller,score,sites_scored\n");
                for c in &scores.controllers {
                    writeln!(t, "{},{},{}", c.controller, opt(c.score), c.sites_scored).unwrap();
                }
                fs::write(&table, t)?;
                let mut s = String::from(
                    "site_id,controller,weeks,rmse,gain,upper,score,note,provenance\n",
                );
                for r in &scores.sites {
                    let prov: Vec<String> =
                        r.provenance.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    writeln!(
                        s,
                        "{},{},{},{},{},{},{},\"{}\",{}",
                        r.site_id,
                        r.controller,
                        r.weeks,
                        opt(r.rmse),
                        opt(r.gain),
                        opt(r.upper),
                        opt(r.score),
                        r.note.clone().unwrap_or_default().replace('"', "'"),
                        prov.join(";")
                    )
                    .unwrap();
                }
                fs::write(&per_site, s)?;
            }
        }
        written.push(table);
        written.push(per_site);
        let timings = dir.join("timings.csv");
        fs::write(&timings, self.timing_table(&scores)?)?;
        written.push(timings);
        Ok(written)
    }

    /// Mean offline seconds per site and mean online seconds per decision.
    fn timing_table(&self, scores: &ScoreReport) -> Result<String> {
        let mut out = String::from("controller,offline_seconds_per_site,online_seconds_per_step\n");
        for c in &scores.controllers {
            let offline = ControllerSpec::parse(&c.controller)
                .ok()
                .and_then(|s| ArtifactKind::for_controller(&s))
                .and_then(|kind| {
                    let secs: Vec<f64> = self
                        .site_ids()
                        .ok()?
                        .iter()
                        .filter_map(|site| {
                            read_json::<Timing>(&self.artifact_dir(site, kind).join("timing.json")).ok()
                        })
                        .map(|t| t.seconds)
                        .collect();
                    (!secs.is_empty()).then(|| secs.iter().sum::<f64>() / secs.len() as f64)
                });
            let path = self.results_dir().join(format!("{}.timings.csv", c.controller));
            let online = fs::read_to_string(path).ok().and_then(|text| {
                let v: Vec<f64> = text
                    .lines()
                    .skip(1)
                    .filter_map(|l| l.rsplit(',').next()?.parse().ok())
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            });
            writeln!(out, "{},{},{}", c.controller, opt(offline), opt(online)).unwrap();
        }
        Ok(out)
    }
}

fn provenance_hash(model: &[u8], tariff: &Tariff, grid: &GridConfig) -> Result<String> {
    let mut bytes = model.to_vec();
    bytes.extend(serde_json::to_vec(tariff)?);
    bytes.extend(serde_json::to_vec(grid)?);
    Ok(content_hash(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}
