//! Per-trial evaluation reports and the subject × activity tables built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distributions::{Density, GaussianParams, LaplacianParams, LgmParams, ModelKind};
use crate::em::{fit_gaussian, fit_laplacian, fit_lgm, EmConfig, FitResult};
use crate::error::Result;
use crate::evaluation::{
    empirical_pdf, goodness_of_fit, kld_empirical_vs_model, likelihood_ratio_test, Bins,
    EmpiricalPdf, GofResult, GofSummary, KldResult, LrtResult,
};
use crate::stats::{Fitted, SampleHash};

/// Knobs shared by every pipeline entry point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub bins: Bins,
    pub em: EmConfig,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            bins: Bins::Auto,
            em: EmConfig::default(),
            seed: 0,
        }
    }
}

/// One value per candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerModel<T> {
    pub lgm: T,
    pub laplacian: T,
    pub gaussian: T,
}

impl<T> PerModel<T> {
    pub fn get(&self, kind: ModelKind) -> &T {
        match kind {
            ModelKind::Lgm => &self.lgm,
            ModelKind::Laplacian => &self.laplacian,
            ModelKind::Gaussian => &self.gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtPair {
    pub vs_laplacian: LrtResult,
    pub vs_gaussian: LrtResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_loglik: f64,
    pub restart: usize,
    pub n1: f64,
    pub n2: f64,
}

impl From<&FitResult> for EmSummary {
    fn from(fit: &FitResult) -> Self {
        EmSummary {
            iterations: fit.trace.iterations,
            converged: fit.trace.converged,
            final_loglik: fit.final_loglik,
            restart: fit.restart,
            n1: fit.n1,
            n2: fit.n2,
        }
    }
}

/// Identifies where a sample array came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<String>,
    /// Index of the channel that was modelled.
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub meta: TrialMeta,
    pub sample_count: usize,
    /// All three fits and every evaluation refer to this sample array.
    pub data_hash: SampleHash,
    pub bins: usize,
    pub lgm: LgmParams,
    pub laplacian: LaplacianParams,
    pub gaussian: GaussianParams,
    pub kld: PerModel<KldResult>,
    pub gof: PerModel<GofSummary>,
    pub lrt: LrtPair,
    /// Absent when the mixture parameters were supplied rather than fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmSummary>,
}

/// Everything computed for one sample array, including the plot data that
/// does not go into the report.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub data_hash: SampleHash,
    pub sample_count: usize,
    pub lgm: LgmParams,
    pub laplacian: LaplacianParams,
    pub gaussian: GaussianParams,
    pub mpdf: EmpiricalPdf,
    pub kld: PerModel<KldResult>,
    pub gof: PerModel<GofResult>,
    pub lrt: LrtPair,
    pub em: Option<EmSummary>,
}

impl Analysis {
    pub fn report(&self, meta: TrialMeta) -> EvalReport {
        EvalReport {
            meta,
            sample_count: self.sample_count,
            data_hash: self.data_hash.clone(),
            bins: self.mpdf.bin_count(),
            lgm: self.lgm,
            laplacian: self.laplacian,
            gaussian: self.gaussian,
            kld: self.kld.clone(),
            gof: PerModel {
                lgm: self.gof.lgm.summary(),
                laplacian: self.gof.laplacian.summary(),
                gaussian: self.gof.gaussian.summary(),
            },
            lrt: self.lrt.clone(),
            em: self.em.clone(),
        }
    }

    /// Bin centers with the empirical density and the three model pdfs.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("y,mpdf,lgm,laplacian,gaussian\n");
        for (c, d) in self.mpdf.centers().iter().zip(self.mpdf.density()) {
            writeln!(
                out,
                "{c},{d},{},{},{}",
                self.lgm.pdf(*c),
                self.laplacian.pdf(*c),
                self.gaussian.pdf(*c)
            )
            .expect("writing to a String");
        }
        out
    }

    /// Sorted samples against each model's quantiles at the same plotting positions.
    pub fn qq_csv(&self) -> String {
        let mut out = String::from("empirical,lgm,laplacian,gaussian\n");
        let g = &self.gof;
        for k in 0..g.lgm.empirical_q.len() {
            writeln!(
                out,
                "{},{},{},{}",
                g.lgm.empirical_q[k], g.lgm.model_q[k], g.laplacian.model_q[k], g.gaussian.model_q[k]
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Runs the evaluation battery for a given mixture; the baselines are always
/// refitted on `y`.
pub fn evaluate_with(y: &[f64], lgm: Fitted<LgmParams>, em: Option<EmSummary>, bins: Bins) -> Result<Analysis> {
    let laplacian = Fitted::on(y, fit_laplacian(y)?);
    let gaussian = Fitted::on(y, fit_gaussian(y)?);
    let mpdf = empirical_pdf(y, bins)?;
    let kld = PerModel {
        lgm: kld_empirical_vs_model(&mpdf, &lgm.params),
        laplacian: kld_empirical_vs_model(&mpdf, &laplacian.params),
        gaussian: kld_empirical_vs_model(&mpdf, &gaussian.params),
    };
    let gof = PerModel {
        lgm: goodness_of_fit(y, &lgm.params)?,
        laplacian: goodness_of_fit(y, &laplacian.params)?,
        gaussian: goodness_of_fit(y, &gaussian.params)?,
    };
    let lrt = LrtPair {
        vs_laplacian: likelihood_ratio_test(y, &lgm, &laplacian)?,
        vs_gaussian: likelihood_ratio_test(y, &lgm, &gaussian)?,
    };
    Ok(Analysis {
        data_hash: lgm.data_hash,
        sample_count: y.len(),
        lgm: lgm.params,
        laplacian: laplacian.params,
        gaussian: gaussian.params,
        mpdf,
        kld,
        gof,
        lrt,
        em,
    })
}

/// Fits all three models to `y` and evaluates them.
pub fn analyze(y: &[f64], opts: &PipelineOptions) -> Result<Analysis> {
    let fit = fit_lgm(y, &opts.em, opts.seed)?;
    evaluate_with(y, fit.fitted(), Some(EmSummary::from(&fit)), opts.bins)
}

/// Evaluates supplied mixture parameters on `y` without refitting them.
pub fn analyze_params(y: &[f64], lgm: LgmParams, bins: Bins) -> Result<Analysis> {
    evaluate_with(y, Fitted::on(y, lgm), None, bins)
}

/// Subject × activity matrix of a per-trial metric averaged over trials.
/// Cells with no trials are `None` and excluded from any further averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapMatrix {
    pub metric_name: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl HeatmapMatrix {
    /// Labels fix the row/column order; reports whose labels are absent are ignored.
    pub fn from_reports<'a, I, F>(
        metric_name: &str,
        row_labels: &[String],
        col_labels: &[String],
        reports: I,
        metric: F,
    ) -> Self
    where
        I: IntoIterator<Item = &'a EvalReport>,
        F: Fn(&EvalReport) -> f64,
    {
        let rows: BTreeMap<&str, usize> = row_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let cols: BTreeMap<&str, usize> = col_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut sums = vec![vec![0.0; col_labels.len()]; row_labels.len()];
        let mut counts = vec![vec![0usize; col_labels.len()]; row_labels.len()];
        for r in reports {
            let (Some(s), Some(a)) = (r.meta.subject.as_deref(), r.meta.activity.as_deref()) else {
                continue;
            };
            if let (Some(&i), Some(&j)) = (rows.get(s), cols.get(a)) {
                sums[i][j] += metric(r);
                counts[i][j] += 1;
            }
        }
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(srow, crow)| {
                srow.iter()
                    .zip(crow)
                    .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                    .collect()
            })
            .collect();
        HeatmapMatrix {
            metric_name: metric_name.to_string(),
            row_labels: row_labels.to_vec(),
            col_labels: col_labels.to_vec(),
            values,
            counts,
        }
    }

    /// Mean of the available cells in each row, with the number of cells used.
    pub fn row_means(&self) -> Vec<(Option<f64>, usize)> {
        self.values.iter().map(|row| mean_present(row.iter().copied())).collect()
    }

    /// Mean of the available cells in each column, with the number of cells used.
    pub fn col_means(&self) -> Vec<(Option<f64>, usize)> {
        (0..self.col_labels.len())
            .map(|j| mean_present(self.values.iter().map(|row| row[j])))
            .collect()
    }

    /// Rectangular CSV: a `subject` header column, one column per activity;
    /// empty cells mark subject/activity pairs with no trials.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject");
        for c in &self.col_labels {
            write!(out, ",{c}").expect("writing to a String");
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            out.push_str(label);
            for v in row {
                match v {
                    Some(x) => write!(out, ",{x}").expect("writing to a String"),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn counts_csv(&self) -> String {
        let mut out = String::from("subject");
        for c in &self.col_labels {
            write!(out, ",{c}").expect("writing to a String");
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.counts) {
            out.push_str(label);
            for c in row {
                write!(out, ",{c}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    ((n > 0).then(|| sum / n as f64), n)
}

/// Per-row (or per-column) average KLD of the three models, as CSV.
pub fn average_kld_csv(label_name: &str, labels: &[String], per_model: &PerModel<Vec<(Option<f64>, usize)>>) -> String {
    let mut out = format!("{label_name},lgm,laplacian,gaussian,cells\n");
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, label) in labels.iter().enumerate() {
        writeln!(
            out,
            "{label},{},{},{},{}",
            fmt(per_model.lgm[i].0),
            fmt(per_model.laplacian[i].0),
            fmt(per_model.gaussian[i].0),
            per_model.lgm[i].1
        )
        .expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_lgm;

    fn fake_report(subject: &str, activity: &str, trial: &str, kld: f64) -> EvalReport {
        let y = sample_lgm(200, &LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 4.0).unwrap(), 1).unwrap();
        let mut r = analyze(&y, &PipelineOptions::default()).unwrap().report(TrialMeta {
            subject: Some(subject.into()),
            activity: Some(activity.into()),
            trial: Some(trial.into()),
            channel: 0,
        });
        r.kld.lgm.d_kl = kld;
        r
    }

    #[test]
    fn heatmap_averages_and_missing_cells() {
        let reports = vec![
            fake_report("s1", "a1", "1", 1.0),
            fake_report("s1", "a1", "2", 2.0),
            fake_report("s1", "a2", "1", 4.0),
            fake_report("s2", "a1", "1", 8.0),
        ];
        let rows = vec!["s1".to_string(), "s2".to_string()];
        let cols = vec!["a1".to_string(), "a2".to_string()];
        let h = HeatmapMatrix::from_reports("kld_lgm", &rows, &cols, &reports, |r| r.kld.lgm.d_kl);
        assert_eq!(h.values, vec![vec![Some(1.5), Some(4.0)], vec![Some(8.0), None]]);
        assert_eq!(h.counts, vec![vec![2, 1], vec![1, 0]]);
        assert_eq!(h.row_means(), vec![(Some(2.75), 2), (Some(8.0), 1)]);
        assert_eq!(h.col_means(), vec![(Some(4.75), 2), (Some(4.0), 1)]);
        assert_eq!(h.to_csv(), "subject,a1,a2\ns1,1.5,4\ns2,8,\n");
        assert_eq!(h.counts_csv(), "subject,a1,a2\ns1,2,1\ns2,1,0\n");
    }

    #[test]
    fn report_serializes_with_flat_meta() {
        let r = fake_report("s1", "a1", "1", 0.5);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["subject"], "s1");
        assert_eq!(v["channel"], 0);
        assert_eq!(v["lrt"]["vs_laplacian"]["df"], 3);
        assert!(v["em"]["iterations"].as_u64().unwrap() >= 1);
        let back: EvalReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn curve_tables_have_one_row_per_bin_and_sample() {
        let y = sample_lgm(300, &LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 4.0).unwrap(), 2).unwrap();
        let a = analyze(&y, &PipelineOptions { bins: Bins::Fixed(25), ..Default::default() }).unwrap();
        assert_eq!(a.curves_csv().lines().count(), 26);
        assert_eq!(a.qq_csv().lines().count(), 301);
    }
}
