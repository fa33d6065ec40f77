use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use storycause::alignment::{
    clip_accuracy, infer, parse_gold, parse_segments, parse_similarity, sentence_iou, write_gold,
    ClipWeighting, GoldAlignment, Granularity, SimilarityMatrix, VideoSegment,
};
use storycause::corpus::{
    load_glucose, load_stories, make_fixture, read_graphs, reference_sets, write_atomic,
    FixtureShape,
};
use storycause::ensemble::{
    read_detection_tsv, vote, write_detection_tsv, Comparator, DetectionTable, EnsembleConfig,
};
use storycause::extract::{run_extraction, Extraction, ExtractionSettings};
use storycause::gateway::{Gateway, GatewayMode, HttpProvider, ResponseCache, RetryPolicy};
use storycause::metrics::{evaluate, EvalItem, HashingEmbedder, MetricReport, REPORT_HEADER};
use storycause::prompt::{PromptCatalog, TemplateName};
use storycause::scoring::{
    correlation_rows, correlation_tsv, join_scores, read_generated_stories, read_scores_tsv,
    run_scoring, write_scores_tsv, ScoreRecord, ScoringVariant,
};
use storycause::{CausalStatement, EventGraph, EventNode, Story};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Kind};

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", path.display())))
}

fn emit(cfg: &RunConfig, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = cfg.out.join(name);
    write_atomic(&path, contents.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn gateway(cfg: &RunConfig) -> Gateway {
    let cache = ResponseCache::new(&cfg.cache_dir);
    match cfg.mode {
        GatewayMode::Replay => Gateway::replay(cache),
        GatewayMode::Stub => Gateway::stub(cache),
        GatewayMode::Live => {
            let key = cfg.api_key.clone().expect("validated: live mode has a key");
            let provider = HttpProvider::new(&cfg.api_url, key, cfg.timeout);
            Gateway::live(cache, Arc::new(provider), RetryPolicy::default())
        }
    }
}

fn catalog(cfg: &RunConfig) -> CliResult<PromptCatalog> {
    match &cfg.catalog {
        Some(p) => Ok(PromptCatalog::load(p)?),
        None => Ok(PromptCatalog::builtin()),
    }
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn settings(cfg: &RunConfig, single_demonstration: bool) -> ExtractionSettings {
    ExtractionSettings {
        model: cfg.model.clone(),
        temperature: cfg.temperature,
        single_demonstration,
        max_in_flight: cfg.workers,
    }
}

fn emit_extraction(cfg: &RunConfig, run: &Extraction) -> CliResult<()> {
    emit(
        cfg,
        "detections.tsv",
        &write_detection_tsv(run.tables.values()),
    )?;
    emit(cfg, "diagnostics.tsv", &run.diagnostics.to_tsv())?;
    let mut by_template: BTreeMap<&str, Vec<EventGraph>> = BTreeMap::new();
    for g in &run.graphs {
        by_template
            .entry(&g.template)
            .or_default()
            .push(g.graph.clone());
    }
    for (template, graphs) in by_template {
        for g in graphs {
            emit(
                cfg,
                &format!(
                    "graphs/{}/{}.txt",
                    file_stem(template),
                    file_stem(g.story_id())
                ),
                &g.to_text(),
            )?;
        }
    }
    for (story, template, message) in &run.failures {
        warn!("{story} {template}: {message}");
    }
    if !run.failures.is_empty() {
        let rows: String = run
            .failures
            .iter()
            .map(|(s, t, m)| format!("{s}\t{t}\t{}\n", m.replace(['\t', '\n'], " ")))
            .collect();
        emit(cfg, "failures.tsv", &rows)?;
    }
    Ok(())
}

pub fn extract(cfg: &RunConfig, stories: &Path, single_demonstration: bool) -> CliResult<()> {
    let stories = load_stories(stories)?;
    let run = run_extraction(
        &gateway(cfg),
        &catalog(cfg)?,
        &stories,
        &cfg.templates,
        &settings(cfg, single_demonstration),
    )?;
    emit_extraction(cfg, &run)
}

fn voted_tables(
    tables: &BTreeMap<String, DetectionTable>,
    config: &EnsembleConfig,
) -> Vec<DetectionTable> {
    tables
        .iter()
        .map(|(id, t)| {
            let mut out = DetectionTable::new(id.as_str());
            for s in vote(t, config) {
                let name = template_of(&s);
                out.insert(name, s);
            }
            out
        })
        .collect()
}

fn template_of(s: &CausalStatement) -> TemplateName {
    let name = s.source_prompt.split('/').next().unwrap_or_default();
    name.parse()
        .expect("statements in detection tables carry a template label")
}

pub fn ensemble(cfg: &RunConfig, detections: &Path) -> CliResult<()> {
    let tables = read_detection_tsv(&read(detections)?)?;
    let voted = voted_tables(&tables, &cfg.ensemble);
    emit(cfg, "ensemble.tsv", &write_detection_tsv(&voted))?;
    Ok(())
}

fn single_prompt(name: TemplateName) -> EnsembleConfig {
    EnsembleConfig {
        threshold: 1,
        comparator: Comparator::AtLeast,
        participating: BTreeSet::from([name]),
        priority: vec![name],
    }
}

pub fn eval_glucose(cfg: &RunConfig, glucose: &Path, detections: Option<&Path>) -> CliResult<()> {
    let load = load_glucose(glucose, &cfg.mapping)?;
    let notes: String = load
        .diagnostics
        .iter()
        .map(|d| format!("{}\t{}\n", d.line, d.reason))
        .collect();
    emit(cfg, "glucose_diagnostics.tsv", &notes)?;
    let gold = reference_sets(&load.records);
    if gold.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no usable annotation rows",
            glucose.display()
        )));
    }
    let stories: Vec<Story> = gold.iter().map(|(s, _)| s.clone()).collect();
    let tables = match detections {
        Some(p) => read_detection_tsv(&read(p)?)?,
        None => {
            let run = run_extraction(
                &gateway(cfg),
                &catalog(cfg)?,
                &stories,
                &cfg.templates,
                &settings(cfg, false),
            )?;
            emit_extraction(cfg, &run)?;
            run.tables
        }
    };
    let embedder = HashingEmbedder::default();
    let empty = DetectionTable::new("-");
    let mut systems: Vec<(String, EnsembleConfig)> = cfg
        .templates
        .iter()
        .map(|&t| (t.as_str().to_string(), single_prompt(t)))
        .collect();
    let mut ensemble = cfg.ensemble.clone();
    ensemble.participating.retain(|p| cfg.templates.contains(p));
    systems.push(("ensemble".into(), ensemble));
    let mut report = format!("{REPORT_HEADER}\n");
    for (name, config) in &systems {
        let predicted: Vec<Vec<CausalStatement>> = gold
            .iter()
            .map(|(s, _)| vote(tables.get(s.id()).unwrap_or(&empty), config))
            .collect();
        let items: Vec<EvalItem<'_>> = gold
            .iter()
            .zip(&predicted)
            .map(|((story, refs), p)| EvalItem {
                story,
                gold: refs,
                predicted: p,
            })
            .collect();
        let r: MetricReport = evaluate(name, &items, &embedder)?;
        report.push_str(&r.body_tsv());
    }
    emit(cfg, "glucose_report.tsv", &report)?;
    Ok(())
}

fn parse_variants(raw: &str) -> CliResult<Vec<ScoringVariant>> {
    if raw == "all" {
        return Ok(ScoringVariant::ALL.to_vec());
    }
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse::<ScoringVariant>()
                .map_err(|e| CliError::config(e.to_string()))
        })
        .collect()
}

fn emit_correlations(
    cfg: &RunConfig,
    records: &[ScoreRecord],
    stories: &[storycause::scoring::GeneratedStory],
) -> CliResult<()> {
    let mut rows = Vec::new();
    for v in ScoringVariant::ALL {
        let subset: Vec<ScoreRecord> = records.iter().filter(|r| r.variant == v).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        rows.extend(correlation_rows(
            v,
            &join_scores(&subset, stories),
            cfg.min_stars,
            cfg.inclusive,
        ));
    }
    emit(cfg, "correlation.tsv", &correlation_tsv(&rows))?;
    Ok(())
}

pub fn score_stories(cfg: &RunConfig, stories: &Path, variants: &str) -> CliResult<()> {
    let variants = parse_variants(variants)?;
    let stories = read_generated_stories(&read(stories)?)?;
    let gw = gateway(cfg);
    let catalog = catalog(cfg)?;
    let mut records = Vec::new();
    let mut failures = String::new();
    for v in variants {
        let run = run_scoring(&gw, &catalog, &stories, v, &cfg.model, cfg.workers)?;
        for (p, m, e) in &run.failures {
            warn!("{v} ({p}, {m}): {e}");
            failures.push_str(&format!(
                "{v}\t{p}\t{m}\t{}\n",
                e.replace(['\t', '\n'], " ")
            ));
        }
        records.extend(run.records);
    }
    emit(cfg, "scores.tsv", &write_scores_tsv(&records))?;
    if !failures.is_empty() {
        emit(cfg, "score_failures.tsv", &failures)?;
    }
    emit_correlations(cfg, &records, &stories)
}

pub fn correlate(cfg: &RunConfig, scores: &Path, stories: &Path) -> CliResult<()> {
    let records = read_scores_tsv(&read(scores)?)?;
    let stories = read_generated_stories(&read(stories)?)?;
    emit_correlations(cfg, &records, &stories)
}

struct Video {
    id: String,
    similarity: SimilarityMatrix,
    segments: Vec<VideoSegment>,
    gold: Option<GoldAlignment>,
}

/// Every `<id>.sim` under `dir` with its `<id>.segments` and optional
/// `<id>.gold`, sorted by id.
fn load_videos(dir: &Path) -> CliResult<Vec<Video>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", dir.display())))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_suffix(".sim"))
                .map(String::from)
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no .sim files",
            dir.display()
        )));
    }
    let with = |id: &str, what: &str, e: String| CliError::validation(format!("{id}.{what}: {e}"));
    ids.into_iter()
        .map(|id| {
            let similarity = parse_similarity(&read(&dir.join(format!("{id}.sim")))?, &id)
                .map_err(|e| with(&id, "sim", e.to_string()))?;
            let segments = parse_segments(&read(&dir.join(format!("{id}.segments")))?)
                .map_err(|e| with(&id, "segments", e.to_string()))?;
            if segments.len() != similarity.n() {
                return Err(with(
                    &id,
                    "segments",
                    format!(
                        "{} segments for {} matrix rows",
                        segments.len(),
                        similarity.n()
                    ),
                ));
            }
            let gold_path = dir.join(format!("{id}.gold"));
            let gold = if gold_path.exists() {
                let g =
                    parse_gold(&read(&gold_path)?).map_err(|e| with(&id, "gold", e.to_string()))?;
                if g.assignment.len() != segments.len() {
                    return Err(with(
                        &id,
                        "gold",
                        format!(
                            "{} rows for {} segments",
                            g.assignment.len(),
                            segments.len()
                        ),
                    ));
                }
                Some(g)
            } else {
                None
            };
            Ok(Video {
                id,
                similarity,
                segments,
                gold,
            })
        })
        .collect()
}

fn graph_for(id: &str, m: usize, graphs: &BTreeMap<String, EventGraph>) -> CliResult<EventGraph> {
    match graphs.get(id) {
        Some(g) if g.len() == m => Ok(g.clone()),
        Some(g) => Err(CliError::validation(format!(
            "graph for `{id}` has {} nodes, matrix has {m} sentences",
            g.len()
        ))),
        None => {
            let nodes = (0..m)
                .map(|index| EventNode {
                    index,
                    text: format!("sentence {index}"),
                })
                .collect();
            Ok(EventGraph::new(id, nodes, Vec::new(), []).expect("placeholder nodes are valid"))
        }
    }
}

fn load_graphs(path: Option<&Path>) -> CliResult<BTreeMap<String, EventGraph>> {
    let Some(p) = path else {
        return Ok(BTreeMap::new());
    };
    Ok(read_graphs(&read(p)?)?
        .into_iter()
        .map(|g| (g.story_id().to_string(), g))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub const ALIGN_HEADER: &str =
    "video\tsegments\tdecoder\tt\tclip_accuracy\tclip_accuracy_count\tsentence_iou";

pub fn align(cfg: &RunConfig, data: &Path, graphs: Option<&Path>) -> CliResult<()> {
    let graphs = load_graphs(graphs)?;
    let videos = load_videos(data)?;
    let mut report = format!("{ALIGN_HEADER}\n");
    let (mut clips, mut counts, mut ious) = (Vec::new(), Vec::new(), Vec::new());
    for v in &videos {
        let graph = graph_for(&v.id, v.similarity.m(), &graphs)?;
        let run = infer(
            &v.similarity,
            &graph,
            cfg.context,
            cfg.context_mode,
            cfg.blend,
            cfg.decoder,
            cfg.t,
            cfg.warmup,
        )?;
        let pred = GoldAlignment {
            assignment: run.assignment,
            granularity: Granularity::Sentence,
        };
        emit(
            cfg,
            &format!("alignment/{}.pred", file_stem(&v.id)),
            &write_gold(&pred),
        )?;
        let (mut clip, mut count, mut iou) = (None, None, None);
        if let Some(g) = &v.gold {
            clip = Some(clip_accuracy(
                &pred.assignment,
                &g.assignment,
                &v.segments,
                ClipWeighting::Duration,
            )?);
            count = Some(clip_accuracy(
                &pred.assignment,
                &g.assignment,
                &v.segments,
                ClipWeighting::Count,
            )?);
            iou = sentence_iou(&pred.assignment, &g.assignment, &v.segments).ok();
        }
        clips.extend(clip);
        counts.extend(count);
        ious.extend(iou);
        report.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            v.id,
            v.segments.len(),
            cfg.decoder,
            cfg.t,
            fmt_opt(clip),
            fmt_opt(count),
            fmt_opt(iou)
        ));
    }
    let total: usize = videos.iter().map(|v| v.segments.len()).sum();
    report.push_str(&format!(
        "mean\t{total}\t{}\t{}\t{}\t{}\t{}\n",
        cfg.decoder,
        cfg.t,
        fmt_opt(mean(&clips)),
        fmt_opt(mean(&counts)),
        fmt_opt(mean(&ious))
    ));
    emit(cfg, "alignment_report.tsv", &report)?;
    Ok(())
}

fn parse_grid(raw: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = raw
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad grid `{raw}`")))
        })
        .collect::<CliResult<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(CliError::config(format!(
            "grid `{raw}` must be start:stop:step"
        )));
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(CliError::config(format!(
            "grid `{raw}` must have step > 0 and stop >= start"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

pub fn calibrate(cfg: &RunConfig, data: &Path, graphs: Option<&Path>, grid: &str) -> CliResult<()> {
    let grid = parse_grid(grid)?;
    let graphs = load_graphs(graphs)?;
    let videos: Vec<Video> = load_videos(data)?
        .into_iter()
        .filter(|v| v.gold.is_some())
        .collect();
    if videos.is_empty() {
        return Err(CliError::validation(
            "calibration needs videos with gold alignments",
        ));
    }
    let mut report = "decoder\tt\tmean_clip_accuracy\n".to_string();
    let mut best: Option<(f64, f64)> = None;
    for &t in &grid {
        let mut accs = Vec::new();
        for v in &videos {
            let graph = graph_for(&v.id, v.similarity.m(), &graphs)?;
            let run = infer(
                &v.similarity,
                &graph,
                cfg.context,
                cfg.context_mode,
                cfg.blend,
                cfg.decoder,
                t,
                cfg.warmup,
            )?;
            let gold = &v.gold.as_ref().expect("filtered").assignment;
            accs.push(clip_accuracy(
                &run.assignment,
                gold,
                &v.segments,
                ClipWeighting::Duration,
            )?);
        }
        let acc = mean(&accs).expect("non-empty");
        report.push_str(&format!("{}\t{t:.4}\t{acc:.4}\n", cfg.decoder));
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((t, acc));
        }
    }
    let (t, acc) = best.expect("grid is non-empty");
    report.push_str(&format!("best\t{t:.4}\t{acc:.4}\n"));
    emit(cfg, "threshold.tsv", &report)?;
    println!("{t}");
    Ok(())
}

pub fn fixture(cfg: &RunConfig, seed: u64, shape: FixtureShape) -> CliResult<()> {
    let bundle = make_fixture(seed, shape)?;
    for (name, contents) in bundle.files() {
        emit(cfg, &name, &contents)?;
    }
    Ok(())
}
