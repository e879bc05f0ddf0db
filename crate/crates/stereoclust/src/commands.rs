//! Subcommand implementations. Each command is a pure function of its
//! config and the files it names, so `run-all` equals the three stages run
//! back to back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use stereoclust_core::channel::{combine, CombinationMethod, StereoSegment};
use stereoclust_core::embed::{embed_spectral, EmbeddingSet};
use stereoclust_core::experiment::{run_experiment, run_experiment_kfold, ExperimentReport};
use stereoclust_core::stats::pca_project;

use crate::audio::{cut_and_segment, decode_wav, encode_wav_pcm16, load_manifest};
use crate::config::{EmbedderMode, ExperimentConfig, Protocol};
use crate::formats::{corpus_from_sets, export_embeddings, import_embeddings};
use crate::report::{self, PcaRow, Provenance};
use crate::synth;

fn provenance(config: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: config.config_hash,
        seed: config.seed,
    }
}

fn inventory_path(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.join("inventory.csv")
}

fn embeddings_path(config: &ExperimentConfig, method: CombinationMethod) -> PathBuf {
    config
        .output_dir
        .join(format!("embeddings_{}.dvec", method.label()))
}

/// Generates the seeded synthetic stereo corpus into the output directory.
pub fn cmd_synth_corpus(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;
    let corpus = synth::generate(&config.synth);
    let wav_path = config.output_dir.join("corpus.wav");
    let manifest_path = config.output_dir.join("corpus.csv");
    fs::write(&wav_path, encode_wav_pcm16(&corpus.signal))
        .with_context(|| format!("cannot write {}", wav_path.display()))?;
    fs::write(&manifest_path, &corpus.manifest)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    println!(
        "synthesized {} speakers x {}s at {} Hz -> {}",
        config.synth.n_speakers,
        config.synth.seconds_per_speaker,
        config.synth.sample_rate,
        wav_path.display()
    );
    Ok(())
}

/// Decodes every input pair and merges the per-speaker segments. Speakers
/// appearing in several files keep one continuous 1-based index sequence;
/// mixed sample rates are rejected.
fn collect_segments(config: &ExperimentConfig) -> Result<BTreeMap<String, Vec<StereoSegment>>> {
    let input = config
        .input
        .as_ref()
        .context("this command needs [input] audio and manifests in the config")?;
    if input.audio.is_empty() {
        bail!("[input] lists no audio files");
    }

    let mut merged: BTreeMap<String, Vec<StereoSegment>> = BTreeMap::new();
    let mut sample_rate: Option<u32> = None;
    for (audio_path, manifest_path) in input.audio.iter().zip(&input.manifests) {
        let bytes = fs::read(audio_path)
            .with_context(|| format!("cannot read {}", audio_path.display()))?;
        let signal = decode_wav(&bytes)
            .with_context(|| format!("cannot decode {}", audio_path.display()))?;
        match sample_rate {
            None => sample_rate = Some(signal.sample_rate),
            Some(rate) if rate != signal.sample_rate => bail!(
                "mixed sample rates: {} is {} Hz but earlier input was {} Hz",
                audio_path.display(),
                signal.sample_rate,
                rate
            ),
            _ => {}
        }
        let manifest_text = fs::read_to_string(manifest_path)
            .with_context(|| format!("cannot read {}", manifest_path.display()))?;
        let spans = load_manifest(&manifest_text)
            .with_context(|| format!("bad manifest {}", manifest_path.display()))?;
        let segments = cut_and_segment(&signal, &spans)
            .with_context(|| format!("cannot segment {}", audio_path.display()))?;

        for (speaker, mut segs) in segments {
            let merged_segs = merged.entry(speaker).or_default();
            let offset = merged_segs.len();
            for seg in segs.iter_mut() {
                seg.index += offset;
            }
            merged_segs.append(&mut segs);
        }
    }
    Ok(merged)
}

/// Writes the segment inventory: per-speaker counts plus one row per
/// segment.
pub fn cmd_segment(config: &ExperimentConfig) -> Result<()> {
    let segments = collect_segments(config)?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;

    let mut text = String::from("# stereoclust segment inventory\n");
    let p = provenance(config);
    text.push_str(&format!(
        "# config_hash={:016x} seed={}\n",
        p.config_hash, p.seed
    ));
    let counts: Vec<String> = segments
        .iter()
        .map(|(speaker, segs)| format!("{speaker}={}", segs.len()))
        .collect();
    writeln!(text, "# counts: {}", counts.join(" ")).unwrap();
    text.push_str("speaker_id,segment_index\n");
    for (speaker, segs) in &segments {
        for seg in segs {
            writeln!(text, "{speaker},{}", seg.index).unwrap();
        }
    }
    let path = inventory_path(config);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;

    let total: usize = segments.values().map(|s| s.len()).sum();
    println!(
        "segmented {} speakers into {} one-second segments -> {}",
        segments.len(),
        total,
        path.display()
    );
    Ok(())
}

/// Produces one DVEC embedding file per requested method.
pub fn cmd_embed(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;
    match &config.embedder {
        EmbedderMode::Spectral(spectral) => {
            let inventory = inventory_path(config);
            if !inventory.exists() {
                bail!(
                    "no inventory at {} — run `stereoclust segment` first",
                    inventory.display()
                );
            }
            let segments = collect_segments(config)?;
            for &method in &config.methods {
                let mut set: Option<EmbeddingSet> = None;
                for segs in segments.values() {
                    for seg in segs {
                        let processed = combine(seg, method);
                        let vector = embed_spectral(&processed, spectral)
                            .with_context(|| format!("embedding failed for {method}"))?;
                        let set = set
                            .get_or_insert_with(|| EmbeddingSet::new(vector.values.len(), method));
                        set.push(vector)
                            .context("embedding set invariant violated")?;
                    }
                }
                let set = set.unwrap_or_else(|| EmbeddingSet::new(spectral.output_dim, method));
                let path = embeddings_path(config, method);
                let mut buffer = Vec::new();
                export_embeddings(&set, &mut buffer)?;
                fs::write(&path, buffer)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                println!("embedded {} vectors -> {}", set.len(), path.display());
            }
        }
        EmbedderMode::External(files) => {
            for &method in &config.methods {
                let source = &files[&method];
                let bytes = fs::read(source)
                    .with_context(|| format!("cannot read {}", source.display()))?;
                let set = import_embeddings(BufReader::new(bytes.as_slice()))
                    .with_context(|| format!("invalid embedding file {}", source.display()))?;
                if set.method() != method {
                    bail!(
                        "{} declares method {} but the config assigns it to {}",
                        source.display(),
                        set.method(),
                        method
                    );
                }
                let path = embeddings_path(config, method);
                fs::write(&path, bytes)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                println!(
                    "validated {} external vectors -> {}",
                    set.len(),
                    path.display()
                );
            }
        }
    }
    Ok(())
}

fn load_embedding_sets(
    config: &ExperimentConfig,
) -> Result<BTreeMap<CombinationMethod, EmbeddingSet>> {
    let mut sets = BTreeMap::new();
    for &method in &config.methods {
        let path = embeddings_path(config, method);
        let file = fs::File::open(&path).with_context(|| {
            format!(
                "missing embeddings for {method} at {} — run `stereoclust embed` first",
                path.display()
            )
        })?;
        let set = import_embeddings(BufReader::new(file))
            .with_context(|| format!("invalid embedding file {}", path.display()))?;
        sets.insert(method, set);
    }
    Ok(sets)
}

/// Runs the experiment over the embedding files and writes every report.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<()> {
    let sets = load_embedding_sets(config)?;
    let corpus = corpus_from_sets(&sets);
    let report: ExperimentReport = match config.protocol {
        Protocol::RepeatedSplit => run_experiment(&corpus, &config.plan, &config.fit)?,
        Protocol::KFold(k) => run_experiment_kfold(&corpus, k, config.plan.rng_seed, &config.fit)?,
    };

    let mut pca_rows: Vec<PcaRow> = Vec::new();
    for (&method, set) in &sets {
        if set.len() < 3 {
            bail!(
                "method {method} has only {} embeddings; need at least 3 for PCA",
                set.len()
            );
        }
        let data: Vec<Vec<f64>> = set.entries().iter().map(|e| e.values.clone()).collect();
        let coords = pca_project(&data, 2)?;
        for (entry, c) in set.entries().iter().zip(coords) {
            pca_rows.push((method, entry.speaker_id.clone(), entry.index, [c[0], c[1]]));
        }
    }

    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;
    let p = provenance(config);
    let dataset = config
        .input
        .as_ref()
        .and_then(|i| i.audio.first())
        .and_then(|a| a.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());

    let dir = &config.output_dir;
    report::write_report_json(&dir.join("report.json"), &report, p)?;
    report::write_mean_error_table(&dir.join("mean_error_table.txt"), &dataset, &report, p)?;
    report::write_zscores_csv(&dir.join("zscores.csv"), &report, p)?;
    report::write_pairwise_csv(&dir.join("pairwise_p.csv"), &report, p)?;
    report::write_pca_csv(&dir.join("pca_coords.csv"), &pca_rows, p)?;

    for (method, mean) in &report.per_method_mean_error {
        println!("mean error {method}: {mean:.4}");
    }
    for ((a, b), p) in &report.pairwise_p {
        println!("p({a} vs {b}) = {p:.3e}");
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

/// `segment` + `embed` + `evaluate` in one invocation. With an external
/// embedder there is no audio stage to run.
pub fn cmd_run_all(config: &ExperimentConfig) -> Result<()> {
    if matches!(config.embedder, EmbedderMode::Spectral(_)) {
        cmd_segment(config)?;
    }
    cmd_embed(config)?;
    cmd_evaluate(config)
}

/// Convenience for tests and callers that already have a config: full
/// pipeline, returning the in-memory report instead of only writing files.
pub fn evaluate_in_memory(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let sets = load_embedding_sets(config)?;
    let corpus = corpus_from_sets(&sets);
    Ok(match config.protocol {
        Protocol::RepeatedSplit => run_experiment(&corpus, &config.plan, &config.fit)?,
        Protocol::KFold(k) => run_experiment_kfold(&corpus, k, config.plan.rng_seed, &config.fit)?,
    })
}

/// Directory listing of the report files `evaluate` produces.
pub fn report_files(out: &Path) -> Vec<PathBuf> {
    [
        "report.json",
        "mean_error_table.txt",
        "zscores.csv",
        "pairwise_p.csv",
        "pca_coords.csv",
    ]
    .iter()
    .map(|name| out.join(name))
    .collect()
}
