use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use storypref_annotate::{Queue, Service};
use storypref_core::construct::{build_benchmark, generate_candidates, route_all, score_candidate_sets, FinalDecision, RoutedSet, TaskMode};
use storypref_core::corpus::{dataset_stats, filter_min_words, ingest_stories, read_premises, write_stories};
use storypref_core::evalharness::{bon_select, evaluate, head_to_head_all, BonRanking, BonSelection, MockAdapter, RmAdapter};
use storypref_core::jsonl::{read_records, verify_file, write_records, Verification};
use storypref_core::judgekit::{CandidateSet, Judge, JudgePanel, ResponseCache, ScoreMatrix};
use storypref_core::pairforge::{
    build_backgen_pairs, build_continuation_pairs, build_llm_pairs, build_rewrite_pairs, canonical_order, cluster_stories,
    export_training_pairs, method_counts, Method, PreferencePair, TrainingRecord,
};
use storypref_core::stylometrics::{corpus_kurtosis, kurtosis_table, story_kurtosis, with_relative_differences};
use storypref_core::{BenchmarkInstance, Corpus, PipelineConfig, Provenance, Route};

use crate::{Cli, Command};

struct Ctx {
    cfg: PipelineConfig,
    cache: Option<Arc<ResponseCache>>,
}

impl Ctx {
    fn header(&self, kind: &str) -> Result<Option<Provenance>> {
        Ok(Some(Provenance::new(kind, &self.cfg)?))
    }

    fn judge(&self, name: &str) -> Result<Judge> {
        Ok(Judge::from_config(self.cfg.backend(name)?, self.cfg.seed, self.cache.clone())?)
    }

    fn judges(&self, names: &[String]) -> Result<Vec<Judge>> {
        names.iter().map(|n| self.judge(n)).collect()
    }

    fn adapter(&self, name: &str) -> Result<Box<dyn RmAdapter>> {
        if let Some(mock) = name.strip_prefix("mock:") {
            return Ok(Box::new(MockAdapter::new(mock, self.cfg.seed)));
        }
        Ok(self.cfg.adapter(name)?.build())
    }

    fn default_backend(&self) -> Result<String> {
        self.cfg
            .generators
            .first()
            .map(|b| b.name.clone())
            .context("config has no generators")
    }

    fn write<T: Serialize>(&self, kind: &str, path: &Path, records: &[T]) -> Result<usize> {
        let n = write_records(path, self.header(kind)?, records).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {n} {kind} records to {}", path.display());
        Ok(n)
    }
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(read_records(path)?.into_records())
}

fn names_or(explicit: &[String], configured: &[storypref_core::judgekit::BackendConfig]) -> Vec<String> {
    if explicit.is_empty() {
        configured.iter().map(|b| b.name.clone()).collect()
    } else {
        explicit.to_vec()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    apply_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    let cache = cfg.cache_dir.as_deref().map(ResponseCache::persistent).transpose()?.map(Arc::new);
    let ctx = Ctx { cfg, cache };
    dispatch(&ctx, cli.command)
}

fn apply_overrides(cfg: &mut PipelineConfig, cmd: &Command) {
    match cmd {
        Command::Filter { min_words: Some(n), .. } => cfg.thresholds.min_words = *n,
        Command::ForgePairs { min_words, backend, .. } => {
            if let Some(n) = min_words {
                cfg.thresholds.min_words = *n;
                cfg.pairforge.continuation.min_words = *n;
            }
            if backend.is_some() {
                cfg.pairforge.backend = backend.clone();
            }
        }
        Command::AgreeAndRoute { threshold: Some(t), .. } => cfg.thresholds.agreement = *t,
        _ => {}
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> Result<()> {
    let cfg = &ctx.cfg;
    match cmd {
        Command::Ingest { input, label, out } => {
            let corpus = ingest_stories(&input, &label)?;
            let n = write_stories(&corpus, &out.out, ctx.header("stories")?)?;
            println!("ingested {n} stories from {}", input.display());
        }
        Command::Filter { input, out, .. } => {
            let corpus = ingest_stories(&input, "input")?;
            let kept = filter_min_words(&corpus, cfg.thresholds.min_words);
            write_stories(&kept, &out.out, ctx.header("stories")?)?;
            println!("kept {} of {} stories with at least {} words", kept.len(), corpus.len(), cfg.thresholds.min_words);
        }
        Command::Stats { input } => {
            println!("{}", dataset_stats(&ingest_stories(&input, "input")?)?);
        }
        Command::GenerateCandidates { premises, stories, backend, out } => {
            let premises = read_premises(&premises)?;
            let humans = match stories {
                Some(p) => ingest_stories(&p, "human")?,
                None => Corpus::empty("human"),
            };
            let generators = ctx.judges(&names_or(&backend, &cfg.generators))?;
            let sets = generate_candidates(&premises, &humans, &generators, &cfg.generation.plan())?;
            ctx.write("candidate-sets", &out.out, &sets)?;
            println!("generated {} candidate sets", sets.len());
        }
        Command::PanelScore { candidates, backend, out } => {
            let sets: Vec<CandidateSet> = read(&candidates)?;
            let panel = JudgePanel::new(ctx.judges(&names_or(&backend, &cfg.judges))?)?;
            let matrices = score_candidate_sets(&panel, &sets)?;
            ctx.write("score-matrices", &out.out, &matrices)?;
            println!("scored {} candidate sets with {} judges", matrices.len(), panel.len());
        }
        Command::AgreeAndRoute { candidates, scores, out, .. } => {
            let sets: Vec<CandidateSet> = read(&candidates)?;
            let matrices: Vec<ScoreMatrix> = read(&scores)?;
            let routed = route_all(sets, matrices, cfg.thresholds.agreement)?;
            ctx.write("routed-sets", &out.out, &routed)?;
            let count = |m: TaskMode| routed.iter().filter(|r| r.mode == m).count();
            let human = routed.iter().filter(|r| r.agreement.route == Route::HumanAnnotate).count();
            println!(
                "routed {} sets: {} full_ranking, {} verification, {} human_best_check ({} below threshold {})",
                routed.len(),
                count(TaskMode::FullRanking),
                count(TaskMode::Verification),
                count(TaskMode::HumanBestCheck),
                human,
                cfg.thresholds.agreement
            );
        }
        Command::Categorize { routed, decisions, auto_confirm, out } => {
            let routed: Vec<RoutedSet> = read(&routed)?;
            let decisions: Vec<FinalDecision> = match decisions {
                Some(p) => read(&p)?,
                None => Vec::new(),
            };
            let (bench, counts) = build_benchmark(&routed, &decisions, auto_confirm, cfg.thresholds.tie_tolerance, &cfg.priority)?;
            ctx.write("benchmark", &out.out, &bench)?;
            println!(
                "{} instances ({} annotated, {} auto-confirmed); {} dropped, {} awaiting annotation",
                bench.len(),
                counts.finalized,
                counts.auto_confirmed,
                counts.dropped,
                counts.pending
            );
        }
        Command::ForgePairs { method, stories, premises, out, .. } => {
            let pf = &cfg.pairforge;
            let backend_name = match &pf.backend {
                Some(b) => b.clone(),
                None => ctx.default_backend()?,
            };
            let need_stories = || -> Result<Corpus> {
                let p = stories.as_deref().context("this method needs --stories")?;
                Ok(ingest_stories(p, "stories")?)
            };
            let need_premises = || -> Result<Vec<storypref_core::Premise>> {
                let p = premises.as_deref().context("this method needs --premises")?;
                Ok(read_premises(p)?)
            };
            let outcome = match method {
                Method::BackGeneration => {
                    let corpus = need_stories()?;
                    build_backgen_pairs(&cluster_stories(&corpus), &corpus, &ctx.judge(&backend_name)?, &pf.backgen, cfg.seed)?
                }
                Method::Rewriting => {
                    let corpus = need_stories()?;
                    build_rewrite_pairs(&corpus, &need_premises()?, &ctx.judge(&backend_name)?, &pf.rewrite, cfg.seed)?
                }
                Method::Continuation => {
                    build_continuation_pairs(&need_stories()?, &ctx.judge(&backend_name)?, &pf.continuation)?
                }
                Method::LlmVsLlm => {
                    let pick = |explicit: &Option<String>, i: usize| -> Result<String> {
                        match explicit {
                            Some(n) => Ok(n.clone()),
                            None => cfg.generators.get(i).map(|b| b.name.clone()).context("config needs two generators"),
                        }
                    };
                    let judge = match &pf.judge {
                        Some(j) => j.clone(),
                        None => cfg.judges.first().map(|b| b.name.clone()).context("config has no judges")?,
                    };
                    build_llm_pairs(
                        &need_premises()?,
                        &ctx.judge(&pick(&pf.generator_a, 0)?)?,
                        &ctx.judge(&pick(&pf.generator_b, 1)?)?,
                        &ctx.judge(&judge)?,
                        &cfg.generation.template,
                        cfg.generation.target_words,
                    )?
                }
            };
            ctx.write("preference-pairs", &out.out, &outcome.pairs)?;
            println!("{} {} pairs, {} skipped", outcome.pairs.len(), method.as_str(), outcome.skipped.len());
        }
        Command::ExportPairs { inputs, out } => {
            let mut pairs: Vec<PreferencePair> = Vec::new();
            for p in &inputs {
                pairs.extend(read::<PreferencePair>(p)?);
            }
            let pairs = canonical_order(pairs);
            let n = export_training_pairs(&pairs, &out.out, ctx.header("training-pairs")?)?;
            let records: Vec<TrainingRecord> = pairs.iter().map(TrainingRecord::from).collect();
            println!("exported {n} training pairs");
            for (m, c) in method_counts(&records) {
                println!("  {:<16} {c}", m.as_str());
            }
        }
        Command::Evaluate { benchmark, adapter, out } => {
            let bench: Vec<BenchmarkInstance> = read(&benchmark)?;
            let rm = ctx.adapter(&adapter)?;
            let report = evaluate(rm.as_ref(), &bench)?;
            print!("adapter {}\n{}", rm.name(), report.to_table());
            if let Some(out) = out {
                ctx.write("eval-report", &out, &[serde_json::json!({"adapter": rm.name(), "report": report})])?;
            }
        }
        Command::Bon { stories, premises, adapter, out } => {
            let corpus = ingest_stories(&stories, "pool")?;
            let premises = read_premises(&premises)?;
            let rm = ctx.adapter(&adapter)?;
            let mut pools: BTreeMap<&str, Vec<storypref_core::StoryRecord>> = BTreeMap::new();
            for s in corpus.records() {
                let p = s.premise_id.as_deref().with_context(|| format!("story `{}` has no premise id", s.id))?;
                pools.entry(p).or_default().push(s.clone());
            }
            let mut selections = Vec::new();
            for p in &premises {
                let pool = pools.get(p.id.as_str()).with_context(|| format!("no stories for premise `{}`", p.id))?;
                let (story, score) = bon_select(rm.as_ref(), &p.text, pool)?;
                selections.push(BonSelection {
                    premise_id: Some(p.id.clone()),
                    adapter: rm.name().to_string(),
                    story_id: story.id.clone(),
                    score,
                });
            }
            ctx.write("bon-selections", &out.out, &selections)?;
            println!("selected {} stories with {}", selections.len(), rm.name());
        }
        Command::HeadToHead { a, b, rankings, out } => {
            let rankings: Vec<BonRanking> = read(&rankings)?;
            let (results, summary) = head_to_head_all(&read(&a)?, &read(&b)?, &rankings)?;
            println!(
                "a_wins {}  b_wins {}  ties {}  total {}",
                summary.a_wins,
                summary.b_wins,
                summary.ties,
                summary.total()
            );
            if let Some(out) = out {
                ctx.write("head-to-head", &out, &results)?;
            }
        }
        Command::Kurtosis { inputs, reference, out } => {
            let mut rows = Vec::new();
            let mut per_story = Vec::new();
            for p in &inputs {
                let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let corpus = ingest_stories(p, &label)?;
                rows.push(corpus_kurtosis(&label, corpus.records())?);
                per_story.extend(corpus.records().iter().map(|s| serde_json::json!({"source": label, "story": story_kurtosis(s)})));
            }
            if let Some(r) = reference {
                rows = with_relative_differences(rows, &r)?;
            }
            print!("{}", kurtosis_table(&rows));
            if let Some(out) = out {
                ctx.write("story-kurtosis", &out, &per_story)?;
            }
        }
        Command::AnnotateServe { routed, log, addr } => {
            let queue = open_queue(ctx, &routed, &log)?;
            let service = Service::new(queue, cfg.thresholds.tie_tolerance, cfg.priority);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(storypref_annotate::serve(service, addr))?;
        }
        Command::AnnotateExport { routed, log, out } => {
            if !log.exists() {
                bail!("event log {} does not exist", log.display());
            }
            let queue = open_queue(ctx, &routed, &log)?;
            let decisions = queue.decisions();
            ctx.write("final-decisions", &out.out, &decisions)?;
            let p = queue.progress();
            println!(
                "{} decisions: {} submitted, {} dropped; {} pending, {} assigned",
                decisions.len(),
                p.counts.submitted,
                p.counts.dropped,
                p.counts.pending,
                p.counts.assigned
            );
        }
        Command::Verify { files, expect_config } => {
            let mut failed = 0;
            for f in &files {
                match verify_file(f, expect_config.as_deref())? {
                    Verification::Ok { kind, config_hash } => println!("ok      {} ({kind}, config {config_hash})", f.display()),
                    other => {
                        failed += 1;
                        println!("FAILED  {}: {other:?}", f.display());
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} of {} files failed verification", files.len());
            }
        }
        Command::ShowConfig => print!("{}", toml::to_string(cfg)?),
    }
    Ok(())
}

fn open_queue(ctx: &Ctx, routed: &Path, log: &Path) -> Result<Queue> {
    let routed: Vec<RoutedSet> = read(routed)?;
    Ok(Queue::new(routed, ctx.cfg.annotation.qc_every, ctx.cfg.seed)?.with_event_log(log)?)
}

