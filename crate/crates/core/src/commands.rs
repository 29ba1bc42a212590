//! The four pipeline commands behind the `lgm` binary: `fit`, `batch`,
//! `synth` and `eval`. Each one computes everything before it writes a
//! single byte, so a failing command leaves no partial output.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::distributions::{sample_lgm, LgmParams, ModelKind};
use crate::error::{Error, Result};
use crate::evaluation::Bins;
use crate::ingestion::{load_manifest, load_trial, read_matrix, select_max_energy, ManifestEntry};
use crate::report::{
    analyze, analyze_params, average_kld_csv, Analysis, EvalReport, HeatmapMatrix, PerModel,
    PipelineOptions, TrialMeta,
};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json_pretty(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Loads a single-trial file and picks its highest-energy channel.
fn load_single(input: &Path, header: bool) -> Result<(usize, Vec<f64>)> {
    let channels = read_matrix(input, header, None)?;
    let (idx, y) = select_max_energy(&channels);
    Ok((idx, y.to_vec()))
}

fn write_analysis(dir: &Path, analysis: &Analysis, report_json: &str, curves: bool) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("report.json"), report_json)?;
    if curves {
        write_file(&dir.join("curves.csv"), analysis.curves_csv())?;
        write_file(&dir.join("qq.csv"), analysis.qq_csv())?;
    }
    Ok(())
}

/// Fits and evaluates all three models on one trial file.
///
/// Returns the report as pretty JSON. With `out_dir`, also writes
/// `report.json` there, plus `curves.csv` and `qq.csv` when `curves` is set.
pub fn cmd_fit(
    input: &Path,
    header: bool,
    opts: &PipelineOptions,
    out_dir: Option<&Path>,
    curves: bool,
) -> Result<String> {
    let (channel, y) = load_single(input, header)?;
    let analysis = analyze(&y, opts)?;
    let json = to_json_pretty(&analysis.report(TrialMeta {
        channel,
        ..Default::default()
    }));
    if let Some(dir) = out_dir {
        write_analysis(dir, &analysis, &json, curves)?;
    }
    Ok(json)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Bare(LgmParams),
    Report { lgm: LgmParams },
}

/// Reads mixture parameters from JSON: either a bare parameter object or any
/// report containing an `lgm` field.
pub fn read_params_file(path: &Path) -> Result<LgmParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: ParamsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: Some(e.line()),
        message: format!("not an LGM parameter set: {e}"),
    })?;
    Ok(match parsed {
        ParamsFile::Bare(p) | ParamsFile::Report { lgm: p } => p,
    })
}

/// Evaluates supplied mixture parameters on one trial file without refitting
/// them; the single-component baselines are refitted as the LRT requires.
pub fn cmd_eval(
    input: &Path,
    params_file: &Path,
    header: bool,
    bins: Bins,
    out_dir: Option<&Path>,
    curves: bool,
) -> Result<String> {
    let params = read_params_file(params_file)?;
    let (channel, y) = load_single(input, header)?;
    let analysis = analyze_params(&y, params, bins)?;
    let json = to_json_pretty(&analysis.report(TrialMeta {
        channel,
        ..Default::default()
    }));
    if let Some(dir) = out_dir {
        write_analysis(dir, &analysis, &json, curves)?;
    }
    Ok(json)
}

/// Draws `n` samples from `params` and writes them as a one-column file.
pub fn cmd_synth(params: &LgmParams, n: usize, seed: u64, out: &Path) -> Result<()> {
    let y = sample_lgm(n, params, seed)?;
    crate::ingestion::write_matrix(out, &[y])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub entry: ManifestEntry,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub reports: Vec<EvalReport>,
    pub failures: Vec<TrialFailure>,
    pub heatmaps: PerModel<HeatmapMatrix>,
    pub lambda1: HeatmapMatrix,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' })
        .collect()
}

fn first_seen(entries: &[ManifestEntry], f: impl Fn(&ManifestEntry) -> &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in entries {
        let label = f(e);
        if !out.iter().any(|l| l == label) {
            out.push(label.to_string());
        }
    }
    out
}

fn run_trial(entry: &ManifestEntry, header: bool, opts: &PipelineOptions) -> Result<EvalReport> {
    let rec = load_trial(entry, header)?;
    let (channel, y) = select_max_energy(&rec.channels);
    let analysis = analyze(y, opts)?;
    Ok(analysis.report(TrialMeta {
        subject: Some(entry.subject.clone()),
        activity: Some(entry.activity.clone()),
        trial: Some(entry.trial.clone()),
        channel,
    }))
}

/// Runs every manifest entry and writes reports, heatmaps and failures to
/// `out_dir`. Trials that fail are recorded and skipped; a bad manifest is fatal.
///
/// Output layout:
///
/// ```text
/// out_dir/
///   reports/NNNN_<subject>_<activity>_<trial>.json
///   reports.jsonl                 one line per successful trial, manifest order
///   failures.csv
///   heatmap_kld_{lgm,laplacian,gaussian}.csv
///   heatmap_lambda1.csv           trial-averaged Laplacian weight
///   heatmap_counts.csv            trials per cell
///   avg_kld_by_subject.csv        mean over activities
///   avg_kld_by_activity.csv       mean over subjects
/// ```
pub fn cmd_batch(manifest: &Path, header: bool, opts: &PipelineOptions, out_dir: &Path) -> Result<BatchOutcome> {
    let manifest = load_manifest(manifest).map_err(|e| Error::Manifest(Box::new(e)))?;
    let entries = &manifest.entries;

    let results: Vec<Result<EvalReport>> = entries
        .par_iter()
        .map(|e| run_trial(e, header, opts))
        .collect();

    let mut reports = Vec::new();
    let mut named = Vec::new();
    let mut failures = Vec::new();
    for (i, (entry, result)) in entries.iter().zip(results).enumerate() {
        match result {
            Ok(r) => {
                let name = format!(
                    "{i:04}_{}_{}_{}.json",
                    sanitize(&entry.subject),
                    sanitize(&entry.activity),
                    sanitize(&entry.trial)
                );
                named.push(name);
                reports.push(r);
            }
            Err(e) => failures.push(TrialFailure {
                entry: entry.clone(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }

    let subjects = first_seen(entries, |e| &e.subject);
    let activities = first_seen(entries, |e| &e.activity);
    let heat = |kind: ModelKind| {
        HeatmapMatrix::from_reports(
            &format!("kld_{kind}"),
            &subjects,
            &activities,
            &reports,
            |r| r.kld.get(kind).d_kl,
        )
    };
    let heatmaps = PerModel {
        lgm: heat(ModelKind::Lgm),
        laplacian: heat(ModelKind::Laplacian),
        gaussian: heat(ModelKind::Gaussian),
    };
    let lambda1 = HeatmapMatrix::from_reports("lambda1", &subjects, &activities, &reports, |r| r.lgm.lambda1());

    let reports_dir = out_dir.join("reports");
    create_dir(&reports_dir)?;
    let mut jsonl = String::new();
    for (name, r) in named.iter().zip(&reports) {
        write_file(&reports_dir.join(name), to_json_pretty(r))?;
        jsonl.push_str(&serde_json::to_string(r).expect("reports serialize"));
        jsonl.push('\n');
    }
    write_file(&out_dir.join("reports.jsonl"), jsonl)?;

    for kind in ModelKind::ALL {
        write_file(&out_dir.join(format!("heatmap_kld_{kind}.csv")), heatmaps.get(kind).to_csv())?;
    }
    write_file(&out_dir.join("heatmap_lambda1.csv"), lambda1.to_csv())?;
    write_file(&out_dir.join("heatmap_counts.csv"), heatmaps.lgm.counts_csv())?;

    let by_subject = PerModel {
        lgm: heatmaps.lgm.row_means(),
        laplacian: heatmaps.laplacian.row_means(),
        gaussian: heatmaps.gaussian.row_means(),
    };
    write_file(
        &out_dir.join("avg_kld_by_subject.csv"),
        average_kld_csv("subject", &subjects, &by_subject),
    )?;
    let by_activity = PerModel {
        lgm: heatmaps.lgm.col_means(),
        laplacian: heatmaps.laplacian.col_means(),
        gaussian: heatmaps.gaussian.col_means(),
    };
    write_file(
        &out_dir.join("avg_kld_by_activity.csv"),
        average_kld_csv("activity", &activities, &by_activity),
    )?;

    let failures_path = out_dir.join("failures.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "activity", "trial", "path", "exit_code", "error"])
        .expect("in-memory csv");
    for f in &failures {
        w.write_record([
            f.entry.subject.as_str(),
            f.entry.activity.as_str(),
            f.entry.trial.as_str(),
            &f.entry.path.display().to_string(),
            &f.exit_code.to_string(),
            &f.message,
        ])
        .expect("in-memory csv");
    }
    write_file(&failures_path, w.into_inner().expect("in-memory csv"))?;

    Ok(BatchOutcome {
        reports,
        failures,
        heatmaps,
        lambda1,
    })
}

/// Default directory for `--curves` output when no `--out-dir` is given.
pub fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}
