//! The five pipeline commands. Every command validates its inputs up front,
//! never mutates them, and stamps each output artifact with the run seed and
//! config hash through a `.meta.json` companion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use simpleqa::error::{Error, Result};
use simpleqa::eval::{
    self, baselines, ErrorBreakdown, EvalReport,
};
use simpleqa::graphembed::{train_embeddings_logged, EmbeddingTable};
use simpleqa::kbstore::KnowledgeGraph;
use simpleqa::predicate::{prepare_examples, M1Model, M2Model, M3Model, M4Model, ModelKind, PredicateModel};
use simpleqa::ranker::{answer_batch, answer_question, PipelineOptions, PipelineOutput};
use simpleqa::spanner::{find_span, read_dataset, train_ner, EpochStats, NerModel};
use simpleqa::surface::{default_name_predicates, SurfaceFormIndex};
use simpleqa::synth::generate;
use simpleqa::wordvec::WordVectors;

use crate::config::{file_digest, require_inputs, RunConfig};

#[derive(Serialize)]
struct ArtifactMeta<'a> {
    seed: u64,
    config_hash: String,
    inputs: BTreeMap<&'a str, String>,
}

fn write_meta(
    config: &RunConfig,
    artifact: &Path,
    inputs: &[(&str, &Path)],
) -> Result<()> {
    let mut digests = BTreeMap::new();
    for (name, path) in inputs {
        digests.insert(*name, file_digest(path)?);
    }
    let meta = ArtifactMeta {
        seed: config.seed,
        config_hash: config.hash(),
        inputs: digests,
    };
    let path = meta_path(artifact);
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| Error::io(&path, e))
}

fn meta_path(artifact: &Path) -> PathBuf {
    let mut p = artifact.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

fn write_training_log(path: &Path, log: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch\tloss\taccuracy\n");
    for e in log {
        out.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.loss, e.accuracy));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn log_path(artifact: &Path) -> PathBuf {
    let mut p = artifact.as_os_str().to_owned();
    p.push(".log.tsv");
    PathBuf::from(p)
}

pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let data = generate(&config.synth)?;
    let paths = data.write_files(out_dir)?;
    write_meta(config, &paths.meta, &[])?;
    println!(
        "synth: {} facts, {} name triples, {} train questions, {} test questions -> {}",
        data.graph.len(),
        data.names.len(),
        data.train.len(),
        data.test.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_build_index(
    config: &RunConfig,
    kb: &Path,
    extra: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let (names_graph, stats) = KnowledgeGraph::load(kb)?;
    log::info!(
        "loaded {} triples ({} lines, {} malformed, {} duplicates)",
        stats.unique_triples,
        stats.lines,
        stats.malformed,
        stats.duplicates
    );
    let (mut index, build_stats) =
        SurfaceFormIndex::build_from_kb(&names_graph, &default_name_predicates());
    for path in extra {
        let other = SurfaceFormIndex::load(path)?;
        index = index.merge(&other);
    }
    index.save(out)?;
    let mut inputs: Vec<(&str, &Path)> = vec![("kb", kb)];
    for p in extra {
        inputs.push(("extra", p));
    }
    write_meta(config, out, &inputs)?;
    println!(
        "index: {} surfaces, {} entries, total frequency {} ({} labels skipped) -> {}",
        index.surface_count(),
        index.entry_count(),
        index.total_frequency(),
        build_stats.labels_skipped,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainKind {
    Ner,
    M1,
    M2,
    M3,
    M4,
    #[value(name = "kb-embed")]
    KbEmbed,
}

pub fn cmd_train(config: &RunConfig, kind: TrainKind, out: &Path) -> Result<()> {
    let paths = &config.paths;
    let word_vectors = match &paths.word_vectors {
        Some(p) => {
            require_inputs(&[("word-vectors", Some(p))])?;
            Some(WordVectors::load(p)?)
        }
        None => None,
    };

    match kind {
        TrainKind::Ner => {
            let [train_path, index_path] = two(require_inputs(&[
                ("dataset", paths.train.as_ref()),
                ("index", paths.index.as_ref()),
            ])?);
            let dataset = read_dataset(&train_path)?;
            let index = SurfaceFormIndex::load(&index_path)?;
            let outcome = train_ner(&dataset, &index, &config.ner, word_vectors.as_ref())?;
            outcome.model.save(out)?;
            write_training_log(&log_path(out), &outcome.log)?;
            write_meta(config, out, &[("dataset", &train_path), ("index", &index_path)])?;
            let last = outcome.log.last().expect("at least one epoch");
            println!(
                "ner: trained on {} records ({} skipped by weak supervision), final loss {:.4}, token accuracy {:.4} -> {}",
                outcome.used, outcome.skipped, last.loss, last.accuracy, out.display()
            );
        }
        TrainKind::KbEmbed => {
            let [kb_path] = one(require_inputs(&[("kb", paths.kb.as_ref())])?);
            let (graph, _) = KnowledgeGraph::load(&kb_path)?;
            let (table, log) = train_embeddings_logged(&graph, &config.kb_embed)?;
            table.save(out)?;
            write_training_log(&log_path(out), &log)?;
            write_meta(config, out, &[("kb", &kb_path)])?;
            println!(
                "kb-embed: {} role tokens, dimension {} -> {}",
                table.len(),
                table.dim,
                out.display()
            );
        }
        TrainKind::M1 | TrainKind::M4 => {
            let [train_path, index_path] = two(require_inputs(&[
                ("dataset", paths.train.as_ref()),
                ("index", paths.index.as_ref()),
            ])?);
            let dataset = read_dataset(&train_path)?;
            let index = SurfaceFormIndex::load(&index_path)?;
            let (examples, unmasked) = prepare_examples(&dataset, &index, config.max_ngram);
            log::info!("{unmasked} of {} questions kept unmasked", examples.len());
            let log = match kind {
                TrainKind::M1 => {
                    let model_config = config.model_config(ModelKind::M1, None);
                    let (model, log) =
                        M1Model::train(&examples, &model_config, word_vectors.as_ref())?;
                    model.save(out)?;
                    log
                }
                _ => {
                    let model_config = config.model_config(ModelKind::M4, None);
                    let (model, log) = M4Model::train(&examples, &model_config)?;
                    model.save(out)?;
                    log
                }
            };
            write_training_log(&log_path(out), &log)?;
            write_meta(config, out, &[("dataset", &train_path), ("index", &index_path)])?;
            let last = log.last().expect("at least one epoch");
            println!(
                "{}: final loss {:.4}, training accuracy {:.4} -> {}",
                if kind == TrainKind::M1 { "m1" } else { "m4" },
                last.loss,
                last.accuracy,
                out.display()
            );
        }
        TrainKind::M2 => {
            let [train_path, index_path, kb_path, emb_path] = four(require_inputs(&[
                ("dataset", paths.train.as_ref()),
                ("index", paths.index.as_ref()),
                ("kb", paths.kb.as_ref()),
                ("embeddings", paths.embeddings.as_ref()),
            ])?);
            let dataset = read_dataset(&train_path)?;
            let index = SurfaceFormIndex::load(&index_path)?;
            let (graph, _) = KnowledgeGraph::load(&kb_path)?;
            let table = EmbeddingTable::load(&emb_path)?;
            let (examples, _) = prepare_examples(&dataset, &index, config.max_ngram);
            let mut model_config = config.model_config(ModelKind::M2, Some(&emb_path));
            model_config.embedding_dim = table.dim;
            let (model, log) =
                M2Model::train(&examples, &graph, &table, &model_config, word_vectors.as_ref())?;
            model.save(out)?;
            write_training_log(&log_path(out), &log)?;
            write_meta(
                config,
                out,
                &[
                    ("dataset", &train_path),
                    ("index", &index_path),
                    ("kb", &kb_path),
                    ("embeddings", &emb_path),
                ],
            )?;
            println!(
                "m2: final cosine loss {:.4}, support {} predicates -> {}",
                log.last().expect("at least one epoch").loss,
                model.support().len(),
                out.display()
            );
        }
        TrainKind::M3 => {
            let [train_path, index_path, kb_path] = three(require_inputs(&[
                ("dataset", paths.train.as_ref()),
                ("index", paths.index.as_ref()),
                ("kb", paths.kb.as_ref()),
            ])?);
            let dataset = read_dataset(&train_path)?;
            let index = SurfaceFormIndex::load(&index_path)?;
            let (graph, _) = KnowledgeGraph::load(&kb_path)?;
            let (examples, _) = prepare_examples(&dataset, &index, config.max_ngram);
            let model_config = config.model_config(ModelKind::M3, None);
            let (model, log) =
                M3Model::train(&examples, &graph, &model_config, word_vectors.as_ref())?;
            model.save(out)?;
            write_training_log(&log_path(out), &log)?;
            write_meta(
                config,
                out,
                &[("dataset", &train_path), ("index", &index_path), ("kb", &kb_path)],
            )?;
            let last = log.last().expect("at least one epoch");
            println!(
                "m3: final loss {:.4}, in-batch ranking accuracy {:.4} -> {}",
                last.loss, last.accuracy, out.display()
            );
        }
    }
    Ok(())
}

fn one(v: Vec<PathBuf>) -> [PathBuf; 1] {
    v.try_into().expect("arity checked")
}

fn two(v: Vec<PathBuf>) -> [PathBuf; 2] {
    v.try_into().expect("arity checked")
}

fn three(v: Vec<PathBuf>) -> [PathBuf; 3] {
    v.try_into().expect("arity checked")
}

fn four(v: Vec<PathBuf>) -> [PathBuf; 4] {
    v.try_into().expect("arity checked")
}

struct LoadedPipeline {
    index: SurfaceFormIndex,
    graph: KnowledgeGraph,
    ner: NerModel,
    model: PredicateModel,
}

fn load_pipeline(config: &RunConfig) -> Result<(LoadedPipeline, [PathBuf; 4])> {
    let paths = &config.paths;
    let [index_path, kb_path, ner_path, model_path] = four(require_inputs(&[
        ("index", paths.index.as_ref()),
        ("kb", paths.kb.as_ref()),
        ("ner", paths.ner.as_ref()),
        ("model", paths.model.as_ref()),
    ])?);
    let index = SurfaceFormIndex::load(&index_path)?;
    let (graph, _) = KnowledgeGraph::load(&kb_path)?;
    let ner = NerModel::load(&ner_path)?;
    let model = PredicateModel::load(&model_path, &graph)?;
    Ok((
        LoadedPipeline {
            index,
            graph,
            ner,
            model,
        },
        [index_path, kb_path, ner_path, model_path],
    ))
}

#[derive(Serialize)]
struct PairLine<'a> {
    subject: &'a str,
    predicate: &'a str,
    subject_prior: f64,
    predicate_prob: f64,
    score: f64,
}

#[derive(Serialize)]
struct AnswerLine<'a> {
    question: &'a str,
    mention: Option<&'a str>,
    masked: Option<&'a str>,
    empty: bool,
    subject: Option<&'a str>,
    predicate: Option<&'a str>,
    score: Option<f64>,
    objects: Option<Vec<&'a str>>,
    top: Vec<PairLine<'a>>,
}

fn answer_line<'a>(output: &'a PipelineOutput, top_n: usize) -> AnswerLine<'a> {
    let best = output.ranked.best();
    AnswerLine {
        question: &output.question,
        mention: output.mention.as_deref(),
        masked: output.masked.as_deref(),
        empty: output.ranked.is_empty_prediction(),
        subject: best.map(|b| b.subject.as_str()),
        predicate: best.map(|b| b.predicate.as_str()),
        score: best.map(|b| b.score),
        objects: output
            .ranked
            .objects
            .as_ref()
            .map(|set| set.iter().map(String::as_str).collect()),
        top: output
            .ranked
            .pairs
            .iter()
            .take(top_n)
            .map(|p| PairLine {
                subject: &p.subject,
                predicate: &p.predicate,
                subject_prior: p.subject_prior,
                predicate_prob: p.predicate_prob,
                score: p.score,
            })
            .collect(),
    }
}

pub fn cmd_answer(
    config: &RunConfig,
    question: Option<String>,
    questions_file: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let (pipeline, input_paths) = load_pipeline(config)?;
    let options = PipelineOptions {
        k_subjects: config.k_subjects,
        max_ngram: config.max_ngram,
        top_n: config.top_n,
    };

    match (question, questions_file) {
        (Some(q), None) => {
            let output = answer_question(
                &q,
                &pipeline.ner,
                &pipeline.model,
                &pipeline.index,
                &pipeline.graph,
                &options,
            )?;
            print_human(&output);
            Ok(())
        }
        (None, Some(file)) => {
            require_inputs(&[("questions", Some(&file))])?;
            let text =
                std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let questions: Vec<String> = text.lines().map(str::to_string).collect();
            let outputs = answer_batch(
                &questions,
                &pipeline.ner,
                &pipeline.model,
                &pipeline.index,
                &pipeline.graph,
                &options,
                config.workers,
            )?;
            let mut lines = String::new();
            for output in &outputs {
                lines.push_str(&serde_json::to_string(&answer_line(output, config.top_n))?);
                lines.push('\n');
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
                    let meta_inputs: Vec<(&str, &Path)> = vec![
                        ("index", &input_paths[0]),
                        ("kb", &input_paths[1]),
                        ("ner", &input_paths[2]),
                        ("model", &input_paths[3]),
                        ("questions", &file),
                    ];
                    write_meta(config, &path, &meta_inputs)?;
                    println!("answered {} questions -> {}", outputs.len(), path.display());
                }
                None => print!("{lines}"),
            }
            Ok(())
        }
        _ => Err(Error::Config(
            "provide exactly one of --question or --questions".to_string(),
        )),
    }
}

fn print_human(output: &PipelineOutput) {
    println!("question:  {}", output.question);
    match &output.mention {
        Some(m) => println!("mention:   {m}"),
        None => println!("mention:   (none)"),
    }
    match output.ranked.best() {
        None => println!("answer:    no prediction"),
        Some(best) => {
            println!(
                "answer:    ({}, {})  score {:.6}",
                best.subject, best.predicate, best.score
            );
            if let Some(objects) = &output.ranked.objects {
                let list: Vec<&str> = objects.iter().map(String::as_str).collect();
                println!("objects:   {}", list.join(", "));
            }
            println!("top candidates:");
            for (i, p) in output.ranked.pairs.iter().take(5).enumerate() {
                println!(
                    "  {}. ({}, {})  prior {:.4} * prob {:.4} = {:.6}",
                    i + 1,
                    p.subject,
                    p.predicate,
                    p.subject_prior,
                    p.predicate_prob,
                    p.score
                );
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MentionSource {
    Predicted,
    Gold,
}

#[derive(Serialize)]
struct EvalRun {
    seed: u64,
    config_hash: String,
    dataset_fingerprint: String,
    model_kind: String,
    mention_source: String,
    ner_accuracy: EvalReport,
    linking_recall: EvalReport,
    predicate_accuracy: EvalReport,
    answer_accuracy: EvalReport,
    pair_recall: EvalReport,
    subject_recall: EvalReport,
    predicate_recall: EvalReport,
    error_taxonomy: ErrorBreakdown,
    /// Full-data reference counts for the taxonomy table.
    published_error_counts: (u64, u64, u64, u64),
    published_test_instances: u64,
}

pub fn cmd_evaluate(
    config: &RunConfig,
    out_dir: &Path,
    mention_source: MentionSource,
) -> Result<()> {
    let (pipeline, input_paths) = load_pipeline(config)?;
    let [test_path] = one(require_inputs(&[("dataset", config.paths.test.as_ref())])?);
    let records = read_dataset(&test_path)?;
    let questions: Vec<String> = records.iter().map(|r| r.question.clone()).collect();
    let options = PipelineOptions {
        k_subjects: config.k_subjects,
        max_ngram: config.max_ngram,
        top_n: config.top_n,
    };
    let outputs = answer_batch(
        &questions,
        &pipeline.ner,
        &pipeline.model,
        &pipeline.index,
        &pipeline.graph,
        &options,
        config.workers,
    )?;

    let mentions: Vec<Option<String>> = match mention_source {
        MentionSource::Predicted => outputs.iter().map(|o| o.mention.clone()).collect(),
        MentionSource::Gold => records
            .iter()
            .map(|r| find_span(&r.question, &r.subject, &pipeline.index, config.max_ngram))
            .collect(),
    };
    let answers: Vec<_> = outputs.iter().map(|o| o.ranked.clone()).collect();

    let kind = pipeline.model.kind();
    let kind_index = match kind {
        ModelKind::M1 => 0,
        ModelKind::M2 => 1,
        ModelKind::M3 => 2,
        ModelKind::M4 => 3,
    };
    let ner_report = eval::ner_accuracy_from(&mentions, &records, &pipeline.index);
    let linking = eval::linking_recall_from(&mentions, &records, &pipeline.index, &config.ks);
    let predicate_accuracy = eval::predicate_accuracy_from(&answers, &records)
        .with_baseline(baselines::PREDICATE_ACCURACY[kind_index]);
    let answer_accuracy = eval::answer_accuracy_from(&answers, &records)
        .with_baseline(baselines::ANSWER_ACCURACY[kind_index]);
    let recall_ks: Vec<usize> = vec![1, 2, 3, 4, 5, 10, 20];
    let pair_reports = eval::pair_recall_from(&answers, &records, &recall_ks);
    let taxonomy = eval::error_taxonomy_from(&answers, &records);

    let run = EvalRun {
        seed: config.seed,
        config_hash: config.hash(),
        dataset_fingerprint: file_digest(&test_path)?,
        model_kind: kind.as_str().to_string(),
        mention_source: format!("{mention_source:?}").to_lowercase(),
        ner_accuracy: ner_report,
        linking_recall: linking,
        predicate_accuracy,
        answer_accuracy,
        pair_recall: pair_reports.pair,
        subject_recall: pair_reports.subject,
        predicate_recall: pair_reports.predicate,
        error_taxonomy: taxonomy,
        published_error_counts: baselines::ERROR_COUNTS,
        published_test_instances: baselines::TEST_INSTANCES,
    };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&run)?)
        .map_err(|e| Error::io(&report_path, e))?;
    write_tables(out_dir, &run)?;
    let meta_inputs: Vec<(&str, &Path)> = vec![
        ("index", &input_paths[0]),
        ("kb", &input_paths[1]),
        ("ner", &input_paths[2]),
        ("model", &input_paths[3]),
        ("dataset", &test_path),
    ];
    write_meta(config, &report_path, &meta_inputs)?;

    println!("ner accuracy:        {:.4}", run.ner_accuracy.value);
    println!(
        "linking recall@K:    {}",
        format_per_k(&run.linking_recall)
    );
    println!("predicate accuracy:  {:.4}", run.predicate_accuracy.value);
    println!("answer accuracy:     {:.4}", run.answer_accuracy.value);
    println!("pair recall@K:       {}", format_per_k(&run.pair_recall));
    println!(
        "errors: wrong-predicate {}, wrong-subject {}, both {}, empty {} (of {} wrong)",
        run.error_taxonomy.only_wrong_predicate,
        run.error_taxonomy.only_wrong_subject,
        run.error_taxonomy.wrong_subject_and_predicate,
        run.error_taxonomy.empty_prediction,
        run.error_taxonomy.total_wrong
    );
    println!("reports -> {}", out_dir.display());
    Ok(())
}

fn format_per_k(report: &EvalReport) -> String {
    report
        .per_k
        .as_ref()
        .map(|points| {
            points
                .iter()
                .map(|p| format!("{}:{:.3}", p.k, p.value))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default()
}

fn write_tables(out_dir: &Path, run: &EvalRun) -> Result<()> {
    let write = |name: &str, content: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))
    };

    let mut linking = String::from("K\tRecall\n");
    for p in run.linking_recall.per_k.as_ref().unwrap_or(&Vec::new()) {
        linking.push_str(&format!("{}\t{:.4}\n", p.k, p.value));
    }
    write("table_linking.tsv", linking)?;

    write(
        "table_predicate_accuracy.tsv",
        format!(
            "Name\tAccuracy\n{}\t{:.4}\n",
            run.model_kind, run.predicate_accuracy.value
        ),
    )?;
    write(
        "table_answer_accuracy.tsv",
        format!(
            "Name\tAccuracy\n{}\t{:.4}\n",
            run.model_kind, run.answer_accuracy.value
        ),
    )?;

    let mut pair = String::from("K\tPair\tSubject\tPredicate\n");
    let (pp, sp, dp) = (
        run.pair_recall.per_k.as_ref(),
        run.subject_recall.per_k.as_ref(),
        run.predicate_recall.per_k.as_ref(),
    );
    if let (Some(pp), Some(sp), Some(dp)) = (pp, sp, dp) {
        for ((a, b), c) in pp.iter().zip(sp).zip(dp) {
            pair.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\n",
                a.k, a.value, b.value, c.value
            ));
        }
    }
    write("table_pair_recall.tsv", pair)?;

    let t = &run.error_taxonomy;
    let percentage = |count: u64| {
        if t.total_wrong == 0 {
            0.0
        } else {
            count as f64 / t.total_wrong as f64
        }
    };
    let mut errors = String::from("Error Type\tCount\tPercentage\n");
    for (name, count) in [
        ("Only Wrong Predicate", t.only_wrong_predicate),
        ("Only Wrong Subject", t.only_wrong_subject),
        ("Wrong Subject & Predicate", t.wrong_subject_and_predicate),
        ("Empty Prediction", t.empty_prediction),
    ] {
        errors.push_str(&format!("{name}\t{count}\t{:.2}\n", percentage(count)));
    }
    errors.push_str(&format!("Total\t{}\t1.0\n", t.total_wrong));
    write("table_error_analysis.tsv", errors)?;
    Ok(())
}
