use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{covariance_tag, method_tag, DataSource, RunConfig};
use super::presets::preset;
use crate::ar::{
    combine_scans, ensemble_residual_weights, fit, residual_diagnostics, residuals, scan_orders, ArModel,
    EstimatorKind, OrderScan, Provenance, ResidualDiagnostics,
};
use crate::damage_index::{di_evolution, write_di_csv};
use crate::error::{Error, Result};
use crate::signals::{
    downsample, ingest_csv, synthesize_ar_ensemble, synthesize_ensemble, write_csv, SignalEnsemble, SignalRecord,
};
use crate::stats::{
    roc, summarize, write_confusion_csv, write_roc_csv, ConfusionTable, CovarianceSource, Decision,
    InspectionOutcome, LibraryOptions, ReductionSpec, RiskSpec, StateLibrary, TableKey,
};

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

/// File-name-safe form of a label.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Loads or synthesizes the configured ensemble, decimates it, and keeps only
/// the configured paths.
pub fn load_ensemble(cfg: &RunConfig) -> Result<SignalEnsemble> {
    let (ensemble, factor) = match &cfg.data {
        DataSource::Csv { path, downsample } => (ingest_csv(path, &cfg.column_map())?, *downsample),
        DataSource::Preset { name } => synthesize(&preset(*name), cfg.seed)?,
        DataSource::Synthetic(spec) => synthesize(spec, cfg.seed)?,
        DataSource::ArProcess(spec) => (
            synthesize_ar_ensemble(
                &spec.path_id,
                &spec.states,
                spec.realizations,
                spec.length,
                spec.sample_rate,
                cfg.seed,
            )?,
            1,
        ),
    };
    let ensemble = if factor > 1 {
        ensemble.map_records(|r| downsample(&r, factor))?
    } else {
        ensemble
    };
    match &cfg.paths {
        None => Ok(ensemble),
        Some(keep) => {
            for p in keep {
                if !ensemble.records().iter().any(|r| &r.path_id == p) {
                    return Err(Error::Config(format!("path {p} not present in the data")));
                }
            }
            let records: Vec<SignalRecord> =
                ensemble.into_records().into_iter().filter(|r| keep.contains(&r.path_id)).collect();
            SignalEnsemble::new(records)
        }
    }
}

/// Paths are synthesized independently, each from its own derived seed.
fn synthesize(spec: &super::config::SyntheticData, seed: u64) -> Result<(SignalEnsemble, usize)> {
    let mut merged: Option<SignalEnsemble> = None;
    for (i, p) in spec.paths.iter().enumerate() {
        let e = synthesize_ensemble(
            &p.path_id,
            &spec.burst,
            &p.states,
            spec.realizations,
            spec.acquisition_length,
            spec.acquisition_rate,
            seed.wrapping_add((i as u64) << 48),
        )?;
        merged = Some(match merged {
            None => e,
            Some(m) => m.merge(e)?,
        });
    }
    let e = merged.ok_or_else(|| Error::Config("synthetic data defines no paths".into()))?;
    Ok((e, spec.downsample))
}

/// Realizations of one state, split into the library part and the part that
/// is inspected.
struct StateRecords<'a> {
    label: String,
    library: Vec<&'a SignalRecord>,
    inspection: Vec<&'a SignalRecord>,
}

fn split_states<'a>(cfg: &RunConfig, ens: &'a SignalEnsemble, path: &str) -> Result<Vec<StateRecords<'a>>> {
    let states = ens.states(path);
    if !states.contains(&cfg.baseline_label) {
        return Err(Error::Config(format!(
            "path {path} has no `{}` records",
            cfg.baseline_label
        )));
    }
    // baseline first, the rest in order of appearance
    let ordered = std::iter::once(cfg.baseline_label.clone()).chain(states.into_iter().filter(|s| *s != cfg.baseline_label));
    ordered
        .map(|label| {
            let group = ens.group(path, &label);
            if group.len() < cfg.holdout + 2 {
                return Err(Error::Config(format!(
                    "state {label} on path {path} has {} realizations; need at least {} with holdout {}",
                    group.len(),
                    cfg.holdout + 2,
                    cfg.holdout
                )));
            }
            let cut = group.len() - cfg.holdout;
            let inspection = if cfg.holdout == 0 { group.clone() } else { group[cut..].to_vec() };
            Ok(StateRecords {
                label,
                library: group[..cut].to_vec(),
                inspection,
            })
        })
        .collect()
}

/// Models of one path, fitted at a common order.
pub struct PathFit {
    pub path_id: String,
    pub scan: Option<OrderScan>,
    pub order: usize,
    /// Library models per state, baseline first.
    pub library: Vec<(String, Vec<ArModel>)>,
    /// Inspection models per state, same order.
    pub inspection: Vec<(String, Vec<ArModel>)>,
}

fn fit_record(r: &SignalRecord, order: usize, kind: EstimatorKind, weights: Option<&[f64]>) -> Result<ArModel> {
    Ok(fit(&r.samples, order, kind, weights)?.with_provenance(Provenance {
        path_id: r.path_id.clone(),
        state_label: r.state_label.clone(),
        realization_index: Some(r.realization_index),
    }))
}

/// Selects the order on the baseline library records and fits every record.
/// WLS weights also come from the baseline library records only.
pub fn fit_path(cfg: &RunConfig, ens: &SignalEnsemble, path: &str) -> Result<PathFit> {
    let states = split_states(cfg, ens, path)?;
    let baseline = &states[0].library;
    let scan = match cfg.order.scan {
        None => None,
        Some(range) => {
            let orders: Vec<usize> = (range.min..=range.max).collect();
            let scans = baseline
                .iter()
                .map(|r| scan_orders(&r.samples, &orders, range.rule))
                .collect::<Result<Vec<_>>>()?;
            Some(combine_scans(&scans, range.rule)?.with_override(cfg.order.fixed))
        }
    };
    let order = match (&scan, cfg.order.fixed) {
        (_, Some(o)) => o,
        (Some(s), None) => s.final_order(),
        (None, None) => unreachable!("validated config"),
    };
    let weights = match cfg.estimator {
        EstimatorKind::Ols => None,
        EstimatorKind::Wls => {
            let samples: Vec<&[f64]> = baseline.iter().map(|r| r.samples.as_slice()).collect();
            Some(ensemble_residual_weights(&samples, order)?)
        }
    };
    let w = weights.as_deref();
    let fit_all = |recs: &[&SignalRecord]| -> Result<Vec<ArModel>> {
        recs.iter().map(|r| fit_record(r, order, cfg.estimator, w)).collect()
    };
    let mut library = Vec::with_capacity(states.len());
    let mut inspection = Vec::with_capacity(states.len());
    for s in &states {
        library.push((s.label.clone(), fit_all(&s.library)?));
        inspection.push((s.label.clone(), fit_all(&s.inspection)?));
    }
    Ok(PathFit {
        path_id: path.to_string(),
        scan,
        order,
        library,
        inspection,
    })
}

fn paths(ens: &SignalEnsemble) -> Vec<String> {
    ens.paths()
}

// ---------------------------------------------------------------- simulate

/// Writes `ensemble.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let ens = load_ensemble(cfg)?;
    let out = cfg.output_dir.join("ensemble.csv");
    write_with(&out, |buf| write_csv(&ens, buf))?;
    Ok(out)
}

// ---------------------------------------------------------------- identify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathIdentification {
    pub path_id: String,
    pub estimator: EstimatorKind,
    pub final_order: usize,
    pub order_scan: Option<OrderScan>,
    pub models: usize,
    pub whiteness_pass: usize,
    pub normality_pass: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub seed: u64,
    pub paths: Vec<PathIdentification>,
}

fn write_scan_csv(scan: &OrderScan, buf: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["order", "log_likelihood", "aic", "bic", "rss_sss", "selected"])?;
    for (i, o) in scan.candidate_orders.iter().enumerate() {
        w.write_record([
            o.to_string(),
            format!("{:?}", scan.log_likelihood[i]),
            format!("{:?}", scan.aic[i]),
            format!("{:?}", scan.bic[i]),
            format!("{:?}", scan.rss_sss[i]),
            (*o == scan.final_order()).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Fits every record. Writes one JSON file per model under
/// `models/<path>/`, `order_scan_<path>.csv`, `diagnostics_<path>.csv`
/// (residual whiteness and normality per model) and `identify.json`.
pub fn cmd_identify(cfg: &RunConfig) -> Result<IdentifyReport> {
    let ens = load_ensemble(cfg)?;
    let mut report = IdentifyReport {
        seed: cfg.seed,
        paths: Vec::new(),
    };
    for path in paths(&ens) {
        let fitted = fit_path(cfg, &ens, &path)?;
        let dir = cfg.output_dir.join("models").join(slug(&path));
        let mut diag_rows: Vec<(ArModel, ResidualDiagnostics)> = Vec::new();
        // with a holdout the two sets are disjoint; without one they coincide
        let all: Vec<&ArModel> = if cfg.holdout == 0 {
            fitted.library.iter().flat_map(|(_, m)| m).collect()
        } else {
            fitted
                .library
                .iter()
                .zip(&fitted.inspection)
                .flat_map(|((_, a), (_, b))| a.iter().chain(b))
                .collect()
        };
        for m in all {
            let prov = m.provenance.as_ref().expect("fitted models carry provenance");
            let r = prov.realization_index.unwrap_or(0);
            let rec = ens
                .group(&path, &prov.state_label)
                .into_iter()
                .find(|x| x.realization_index == r)
                .expect("model comes from this ensemble");
            let e = residuals(m, &rec.samples)?;
            let d = residual_diagnostics(&e, cfg.diagnostics.max_lag, cfg.diagnostics.alpha)?;
            write_atomic(
                &dir.join(format!("{}_r{r:03}.json", slug(&prov.state_label))),
                (m.to_json()? + "\n").as_bytes(),
            )?;
            diag_rows.push((m.clone(), d));
        }
        if let Some(scan) = &fitted.scan {
            write_with(&cfg.output_dir.join(format!("order_scan_{}.csv", slug(&path))), |b| {
                write_scan_csv(scan, b)
            })?;
        }
        write_with(&cfg.output_dir.join(format!("diagnostics_{}.csv", slug(&path))), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "state_label",
                "realization_index",
                "order",
                "sigma2_e",
                "whiteness_statistic",
                "whiteness_threshold",
                "whiteness_pass",
                "normality_statistic",
                "normality_threshold",
                "normality_pass",
            ])?;
            for (m, d) in &diag_rows {
                let prov = m.provenance.as_ref().unwrap();
                w.write_record([
                    prov.state_label.clone(),
                    prov.realization_index.unwrap_or(0).to_string(),
                    m.order.to_string(),
                    format!("{:?}", m.sigma2_e),
                    format!("{:?}", d.whiteness_statistic),
                    format!("{:?}", d.whiteness_threshold),
                    d.whiteness_pass.to_string(),
                    format!("{:?}", d.normality_statistic),
                    format!("{:?}", d.normality_threshold),
                    d.normality_pass.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<csv writer>", e))?;
            Ok(())
        })?;
        report.paths.push(PathIdentification {
            path_id: path.clone(),
            estimator: cfg.estimator,
            final_order: fitted.order,
            order_scan: fitted.scan.clone(),
            models: diag_rows.len(),
            whiteness_pass: diag_rows.iter().filter(|(_, d)| d.whiteness_pass).count(),
            normality_pass: diag_rows.iter().filter(|(_, d)| d.normality_pass).count(),
        });
    }
    write_json(&cfg.output_dir.join("identify.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- diagnose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: ReductionSpec,
    pub tag: String,
    pub covariance: CovarianceSource,
    /// Reduced dimension, the χ² degrees of freedom.
    pub dof: usize,
    pub risk: RiskSpec,
    pub threshold: f64,
    pub table: ConfusionTable,
    pub outcomes: Vec<InspectionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub path_id: String,
    pub order: usize,
    pub order_scan: Option<OrderScan>,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub seed: u64,
    pub baseline_label: String,
    pub estimator: EstimatorKind,
    pub holdout: usize,
    pub paths: Vec<PathReport>,
}

impl DetectionReport {
    pub fn all_correct(&self) -> bool {
        self.paths.iter().all(|p| p.methods.iter().all(|m| m.table.all_correct()))
    }
}

fn library_options(cfg: &RunConfig) -> LibraryOptions {
    LibraryOptions {
        covariance_source: cfg.covariance,
        identification_covariance: cfg.identification_covariance,
        delta_covariance: cfg.delta_covariance,
        singular_policy: cfg.singular_policy,
    }
}

/// Builds the library for one method and tests every inspection model.
pub fn inspect(cfg: &RunConfig, fitted: &PathFit, method: &ReductionSpec) -> Result<(StateLibrary, MethodReport)> {
    let (base_label, base_models) = &fitted.library[0];
    let damage: Vec<(&str, &[ArModel])> =
        fitted.library[1..].iter().map(|(l, m)| (l.as_str(), m.as_slice())).collect();
    let lib = StateLibrary::build((base_label, base_models), &damage, method, library_options(cfg))?;
    let mut outcomes = Vec::new();
    for (label, models) in &fitted.inspection {
        for m in models {
            let (theta, p) = lib.reduce(m)?;
            let detection = lib.detect(&theta, Some(&p), cfg.risk)?;
            let identification = if label != base_label && !lib.damage_states.is_empty() {
                Some(lib.identify(&theta, Some(&p), cfg.risk)?)
            } else {
                None
            };
            outcomes.push(InspectionOutcome {
                path_id: fitted.path_id.clone(),
                state_label: label.clone(),
                realization_index: m.provenance.as_ref().and_then(|p| p.realization_index).unwrap_or(0),
                detection,
                identification,
            });
        }
    }
    let damage_labels: Vec<String> = fitted.library[1..].iter().map(|(l, _)| l.clone()).collect();
    let table = summarize(&outcomes, base_label, &damage_labels);
    let report = MethodReport {
        method: method.clone(),
        tag: method_tag(method),
        covariance: cfg.covariance,
        dof: lib.dim(),
        risk: cfg.risk,
        threshold: cfg.risk.threshold(lib.dim())?,
        table,
        outcomes,
    };
    Ok((lib, report))
}

/// Baseline phase and inspection phase for every path and method. Writes
/// `library_<path>_<method>.json`, `report.json`, `confusion.csv` and
/// `q_values.csv`.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<DetectionReport> {
    let report = run_diagnosis(cfg, true)?;
    let out = &cfg.output_dir;
    write_json(&out.join("report.json"), &report)?;
    let keyed: Vec<(TableKey, &ConfusionTable)> = report
        .paths
        .iter()
        .flat_map(|p| {
            p.methods.iter().map(move |m| {
                (
                    TableKey {
                        path_id: p.path_id.clone(),
                        method: m.tag.clone(),
                        covariance: covariance_tag(m.covariance).into(),
                    },
                    &m.table,
                )
            })
        })
        .collect();
    // tables of different paths may have different damage states
    let mut groups: Vec<Vec<(TableKey, &ConfusionTable)>> = Vec::new();
    for (k, t) in keyed {
        match groups.iter_mut().find(|g| g[0].1.hypotheses == t.hypotheses) {
            Some(g) => g.push((k, t)),
            None => groups.push(vec![(k, t)]),
        }
    }
    write_with(&out.join("confusion.csv"), |buf| {
        for g in &groups {
            write_confusion_csv(g, &mut *buf)?;
        }
        Ok(())
    })?;
    write_with(&out.join("q_values.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "path_id",
            "method",
            "covariance",
            "state_label",
            "realization_index",
            "q",
            "threshold",
            "decision",
            "identified_as",
        ])?;
        for p in &report.paths {
            for m in &p.methods {
                for o in &m.outcomes {
                    w.write_record([
                        o.path_id.clone(),
                        m.tag.clone(),
                        covariance_tag(m.covariance).to_string(),
                        o.state_label.clone(),
                        o.realization_index.to_string(),
                        format!("{:?}", o.detection.q_value),
                        format!("{:?}", o.detection.threshold),
                        match o.detection.decision {
                            Decision::Healthy => "healthy".to_string(),
                            Decision::Damaged => "damaged".to_string(),
                        },
                        o.identification.as_ref().map(|i| i.label.clone()).unwrap_or_default(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    })?;
    Ok(report)
}

fn run_diagnosis(cfg: &RunConfig, write_libraries: bool) -> Result<DetectionReport> {
    let ens = load_ensemble(cfg)?;
    let mut report = DetectionReport {
        seed: cfg.seed,
        baseline_label: cfg.baseline_label.clone(),
        estimator: cfg.estimator,
        holdout: cfg.holdout,
        paths: Vec::new(),
    };
    for path in paths(&ens) {
        let fitted = fit_path(cfg, &ens, &path)?;
        let mut methods = Vec::new();
        for method in &cfg.methods {
            let (lib, m) = inspect(cfg, &fitted, method)?;
            if write_libraries {
                write_json(
                    &cfg.output_dir.join(format!("library_{}_{}.json", slug(&path), m.tag)),
                    &lib,
                )?;
            }
            methods.push(m);
        }
        report.paths.push(PathReport {
            path_id: path,
            order: fitted.order,
            order_scan: fitted.scan,
            methods,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------- roc

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub path_id: String,
    pub method: String,
    pub covariance: CovarianceSource,
    pub auc: f64,
    pub file: String,
}

/// Healthy versus damaged inspection Q values, swept over `roc_sweep`.
/// Writes `roc_<path>_<method>_<covariance>.csv` and `roc_auc.json`.
pub fn cmd_roc(cfg: &RunConfig) -> Result<Vec<RocSummary>> {
    let report = run_diagnosis(cfg, false)?;
    let mut out = Vec::new();
    for p in &report.paths {
        for m in &p.methods {
            let (healthy, damaged): (Vec<&InspectionOutcome>, Vec<&InspectionOutcome>) =
                m.outcomes.iter().partition(|o| o.state_label == cfg.baseline_label);
            let qh: Vec<f64> = healthy.iter().map(|o| o.detection.q_value).collect();
            let qd: Vec<f64> = damaged.iter().map(|o| o.detection.q_value).collect();
            let curve = roc(&qh, &qd, cfg.roc_sweep)?;
            let file = format!("roc_{}_{}_{}.csv", slug(&p.path_id), m.tag, covariance_tag(m.covariance));
            write_with(&cfg.output_dir.join(&file), |b| write_roc_csv(&curve, b))?;
            out.push(RocSummary {
                path_id: p.path_id.clone(),
                method: m.tag.clone(),
                covariance: m.covariance,
                auc: curve.auc,
                file,
            });
        }
    }
    write_json(&cfg.output_dir.join("roc_auc.json"), &out)?;
    Ok(out)
}

// ---------------------------------------------------------------- di

/// Damage index of every record against the mean baseline signal, one
/// `di_<path>.csv` per path.
pub fn cmd_di(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ens = load_ensemble(cfg)?;
    let mut files = Vec::new();
    for path in paths(&ens) {
        let res = di_evolution(&ens, &cfg.baseline_label, &path)?;
        let file = cfg.output_dir.join(format!("di_{}.csv", slug(&path)));
        write_with(&file, |b| write_di_csv(&res, b))?;
        files.push(file);
    }
    Ok(files)
}
