//! Report files written by `evaluate`: the structured JSON report, a
//! compact mean-error table, and flat CSV exports for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use stereoclust_core::channel::CombinationMethod;
use stereoclust_core::experiment::ExperimentReport;

/// Stamp carried by every generated report file.
#[derive(Clone, Copy, Debug)]
pub struct Provenance {
    pub config_hash: u64,
    pub seed: u64,
}

impl Provenance {
    fn comment(&self) -> String {
        format!(
            "# config_hash={:016x} seed={}\n",
            self.config_hash, self.seed
        )
    }
}

/// One projected embedding: method, speaker, segment index, 2-D coordinates.
pub type PcaRow = (CombinationMethod, String, usize, [f64; 2]);

#[derive(Serialize)]
struct ReportDoc {
    config_hash: String,
    seed: u64,
    mean_error: BTreeMap<String, f64>,
    pairwise_p: BTreeMap<String, f64>,
    zscores: BTreeMap<String, Vec<f64>>,
    runs: Vec<RunDoc>,
}

#[derive(Serialize)]
struct RunDoc {
    method: String,
    run_index: usize,
    error_rate: f64,
    predictions: Vec<String>,
    truth: Vec<String>,
}

pub fn write_report_json(
    path: &Path,
    report: &ExperimentReport,
    provenance: Provenance,
) -> std::io::Result<()> {
    let doc = ReportDoc {
        config_hash: format!("{:016x}", provenance.config_hash),
        seed: provenance.seed,
        mean_error: report
            .per_method_mean_error
            .iter()
            .map(|(m, &e)| (m.to_string(), e))
            .collect(),
        pairwise_p: report
            .pairwise_p
            .iter()
            .map(|(&(a, b), &p)| (format!("{a}_vs_{b}"), p))
            .collect(),
        zscores: report
            .zscores
            .iter()
            .map(|(m, z)| (m.to_string(), z.clone()))
            .collect(),
        runs: report
            .run_results
            .iter()
            .map(|r| RunDoc {
                method: r.method.to_string(),
                run_index: r.run_index,
                error_rate: r.error_rate,
                predictions: r.predictions.clone(),
                truth: r.truth.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
}

/// The mean clustering error per method: one row per dataset, one column
/// per method, `*` on the row minimum.
pub fn write_mean_error_table(
    path: &Path,
    dataset: &str,
    report: &ExperimentReport,
    provenance: Provenance,
) -> std::io::Result<()> {
    let mut text = String::from("# mean clustering error rate per feature variant\n");
    text.push_str(&provenance.comment());

    let methods: Vec<CombinationMethod> = report.per_method_mean_error.keys().copied().collect();
    let best = report
        .per_method_mean_error
        .values()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    write!(text, "{:<16}", "dataset").unwrap();
    for method in &methods {
        write!(text, " {:>10}", method.label().to_lowercase()).unwrap();
    }
    text.push('\n');
    write!(text, "{dataset:<16}").unwrap();
    for method in &methods {
        let value = report.per_method_mean_error[method];
        let mark = if value == best { "*" } else { "" };
        write!(text, " {:>10}", format!("{value:.4}{mark}")).unwrap();
    }
    text.push('\n');
    std::fs::write(path, text)
}

/// Per-run error rates and pooled z-scores, one row per (method, run):
/// the flat export behind ridgeline plots.
pub fn write_zscores_csv(
    path: &Path,
    report: &ExperimentReport,
    provenance: Provenance,
) -> std::io::Result<()> {
    let mut text = String::from("# z-scores of per-run error rates, pooled across methods\n");
    text.push_str(&provenance.comment());
    text.push_str("method,run_index,error_rate,zscore\n");

    let mut per_method_seen: BTreeMap<CombinationMethod, usize> = BTreeMap::new();
    for result in &report.run_results {
        let position = per_method_seen.entry(result.method).or_insert(0);
        let z = report
            .zscores
            .get(&result.method)
            .and_then(|zs| zs.get(*position))
            .map(|z| z.to_string())
            .unwrap_or_default();
        writeln!(
            text,
            "{},{},{},{z}",
            result.method, result.run_index, result.error_rate
        )
        .unwrap();
        *position += 1;
    }
    std::fs::write(path, text)
}

pub fn write_pairwise_csv(
    path: &Path,
    report: &ExperimentReport,
    provenance: Provenance,
) -> std::io::Result<()> {
    let mut text = String::from("# two-sided Mann-Whitney p-values between z-score samples\n");
    text.push_str(&provenance.comment());
    text.push_str("method_a,method_b,p_value\n");
    for (&(a, b), &p) in &report.pairwise_p {
        writeln!(text, "{a},{b},{p}").unwrap();
    }
    std::fs::write(path, text)
}

pub fn write_pca_csv(path: &Path, rows: &[PcaRow], provenance: Provenance) -> std::io::Result<()> {
    let mut text = String::from("# embeddings projected onto their top two principal components\n");
    text.push_str(&provenance.comment());
    text.push_str("method,speaker_id,segment_index,pc1,pc2\n");
    for (method, speaker, index, coords) in rows {
        writeln!(
            text,
            "{method},{speaker},{index},{},{}",
            coords[0], coords[1]
        )
        .unwrap();
    }
    std::fs::write(path, text)
}
