//! File-based stages behind the command-line tool.
//!
//! Every stage reads a [`Config`], loads what earlier stages wrote into the
//! work directory, and refuses artifacts whose config hash does not match
//! the keys that produced them.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Policies, PolicyConfig};
use crate::attacks::{AttackTables, GeneratorConfig, PhraseTable, SynonymTable};
use crate::bench::{BenchmarkConfig, Dataset, QueryShift};
use crate::config::Config;
use crate::corpus::{
    ingest_corpus, load_qrels, load_queries, write_qrels, write_records, BigramLm, Corpus, Qrel, Query, Record,
    SyntheticConfig,
};
use crate::env::{
    train, AttackerConfig, Environment, ExternalConfig, ExternalOracle, LocalOracle, NaturalnessOracle, OptimizerKind,
    ReinforceConfig, RewardConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    compute_metrics, ranked_lists, render_outcomes, render_screening, render_summary, run_attacks, screen_outcomes,
    select_targets, target_inputs, AttackMode, AttackOutcome, BlackBox, Difficulty, Report,
};
use crate::ranker::{
    distill_surrogate, ranking_agreement, Checkpoint, DistillConfig, NeuralRanker, RankerConfig, TargetConfig,
    TargetRanker, TrainConfig,
};

pub const CORPUS_KEYS: &[&str] = &[
    "seed",
    "n_docs",
    "n_topics",
    "vocab_size",
    "min_doc_len",
    "max_doc_len",
    "synonym_group",
    "query_head",
    "truncate_len",
    "add_k",
    "n_target_queries",
    "n_distill_queries",
    "n_eval_queries",
    "query_pool",
    "query_shift",
    "phrase_min_freq",
];

pub const TARGET_KEYS: &[&str] = &[
    "target_dim",
    "target_hidden",
    "target_epochs",
    "target_lr",
    "target_margin",
    "target_weight_decay",
    "target_max_positives",
    "target_negatives",
    "target_seed",
];

pub const SURROGATE_KEYS: &[&str] = &[
    "surrogate_dim",
    "surrogate_hidden",
    "distill_epochs",
    "distill_lr",
    "distill_margin",
    "distill_weight_decay",
    "distill_depth",
    "distill_gap",
    "distill_seed",
];

pub const ATTACKER_KEYS: &[&str] = &[
    "policy_hidden",
    "policy_seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "optimizer",
    "baseline",
    "baseline_decay",
    "max_grad_norm",
    "xi",
    "beta",
    "gamma",
    "budget",
    "sim_floor",
    "score_scale",
    "top_n",
    "shortlist",
    "fluency_weight",
    "oracle",
    "oracle_endpoint",
    "oracle_timeout_ms",
    "oracle_retries",
    "oracle_scale_min",
    "oracle_scale_max",
    "train_difficulty",
    "train_targets_per_query",
    "selection_seed",
    "attacker_seed",
];

const DATASET_MANIFEST: &str = "dataset.json";
const CORPUS_FILE: &str = "corpus.jsonl";
const QRELS_FILE: &str = "qrels.txt";
const TARGET_QUERIES: &str = "queries-target.jsonl";
const DISTILL_QUERIES: &str = "queries-distill.jsonl";
const EVAL_QUERIES: &str = "queries-eval.jsonl";
const SYNONYMS_FILE: &str = "synonyms.tsv";
const PHRASES_FILE: &str = "phrases.tsv";
const TARGET_CKPT: &str = "target.json";
const SURROGATE_CKPT: &str = "surrogate.json";
const POLICIES_CKPT: &str = "policies.json";
const TRAIN_LOG: &str = "train_log.jsonl";

fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

pub fn dataset_hash(cfg: &Config) -> Result<String> {
    cfg.hash(CORPUS_KEYS)
}

pub fn target_hash(cfg: &Config) -> Result<String> {
    cfg.hash(&keys(&[CORPUS_KEYS, TARGET_KEYS]))
}

pub fn surrogate_hash(cfg: &Config) -> Result<String> {
    cfg.hash(&keys(&[CORPUS_KEYS, TARGET_KEYS, SURROGATE_KEYS]))
}

pub fn policies_hash(cfg: &Config) -> Result<String> {
    cfg.hash(&keys(&[CORPUS_KEYS, TARGET_KEYS, SURROGATE_KEYS, ATTACKER_KEYS]))
}

/// Work directory, with relative paths in the config resolved against it.
pub fn workdir(cfg: &Config) -> Result<PathBuf> {
    Ok(PathBuf::from(cfg.raw("workdir")?))
}

pub fn resolve(cfg: &Config, key: &str) -> Result<PathBuf> {
    let p = PathBuf::from(cfg.raw(key)?);
    Ok(if p.is_absolute() { p } else { workdir(cfg)?.join(p) })
}

pub fn benchmark_config(cfg: &Config) -> Result<BenchmarkConfig> {
    let synthetic = SyntheticConfig {
        seed: cfg.get("seed")?,
        n_docs: cfg.get("n_docs")?,
        n_queries: 0,
        n_topics: cfg.get("n_topics")?,
        vocab_size: cfg.get("vocab_size")?,
        min_doc_len: cfg.get("min_doc_len")?,
        max_doc_len: cfg.get("max_doc_len")?,
        synonym_group: cfg.get("synonym_group")?,
        query_head: cfg.get("query_head")?,
    };
    let target = TargetConfig {
        model: RankerConfig {
            dim: cfg.get("target_dim")?,
            hidden: cfg.get("target_hidden")?,
        },
        train: TrainConfig {
            epochs: cfg.get("target_epochs")?,
            learning_rate: cfg.get("target_lr")?,
            margin: cfg.get("target_margin")?,
            weight_decay: cfg.get("target_weight_decay")?,
        },
        max_positives: cfg.get("target_max_positives")?,
        negatives: cfg.get("target_negatives")?,
        seed: cfg.get("target_seed")?,
    };
    Ok(BenchmarkConfig {
        synthetic,
        max_doc_len: cfg.get("truncate_len")?,
        add_k: cfg.get("add_k")?,
        n_target_queries: cfg.get("n_target_queries")?,
        n_distill_queries: cfg.get("n_distill_queries")?,
        n_eval_queries: cfg.get("n_eval_queries")?,
        pool: cfg.get("query_pool")?,
        target,
        distill: distill_config(cfg)?,
    })
}

pub fn distill_config(cfg: &Config) -> Result<DistillConfig> {
    Ok(DistillConfig {
        model: RankerConfig {
            dim: cfg.get("surrogate_dim")?,
            hidden: cfg.get("surrogate_hidden")?,
        },
        train: TrainConfig {
            epochs: cfg.get("distill_epochs")?,
            learning_rate: cfg.get("distill_lr")?,
            margin: cfg.get("distill_margin")?,
            weight_decay: cfg.get("distill_weight_decay")?,
        },
        depth: cfg.get("distill_depth")?,
        gap: cfg.get("distill_gap")?,
        seed: cfg.get("distill_seed")?,
    })
}

pub fn reward_config(cfg: &Config) -> Result<RewardConfig> {
    let r = RewardConfig {
        xi: cfg.get("xi")?,
        beta: cfg.get("beta")?,
        gamma: cfg.get("gamma")?,
        budget: cfg.get("budget")?,
        sim_floor: cfg.optional("sim_floor")?,
        score_scale: cfg.get("score_scale")?,
    };
    r.validate()?;
    Ok(r)
}

pub fn generator_config(cfg: &Config) -> Result<GeneratorConfig> {
    Ok(GeneratorConfig {
        top_n: cfg.get("top_n")?,
        shortlist: cfg.get("shortlist")?,
        fluency_weight: cfg.get("fluency_weight")?,
    })
}

pub fn policy_config(cfg: &Config) -> Result<PolicyConfig> {
    Ok(PolicyConfig {
        hidden: cfg.get("policy_hidden")?,
        seed: cfg.get("policy_seed")?,
    })
}

pub fn attacker_config(cfg: &Config) -> Result<AttackerConfig> {
    let optimizer = match cfg.raw("optimizer")? {
        "adam" => OptimizerKind::Adam,
        "sgd" => OptimizerKind::Sgd,
        other => {
            return Err(Error::BadValue {
                key: "optimizer".into(),
                value: other.into(),
            })
        }
    };
    Ok(AttackerConfig {
        epochs: cfg.get("epochs")?,
        batch_size: cfg.get("batch_size")?,
        seed: cfg.get("attacker_seed")?,
        reinforce: ReinforceConfig {
            learning_rate: cfg.get("learning_rate")?,
            optimizer,
            baseline: cfg.get("baseline")?,
            baseline_decay: cfg.get("baseline_decay")?,
            max_grad_norm: cfg.get("max_grad_norm")?,
        },
    })
}

pub fn external_config(cfg: &Config) -> Result<ExternalConfig> {
    Ok(ExternalConfig {
        endpoint: cfg.get("oracle_endpoint")?,
        timeout_ms: cfg.get("oracle_timeout_ms")?,
        retries: cfg.get("oracle_retries")?,
        scale_min: cfg.get("oracle_scale_min")?,
        scale_max: cfg.get("oracle_scale_max")?,
    })
}

/// Local oracle, or the external judge with the local one as fallback.
pub fn build_oracle<'a>(cfg: &Config, surrogate: &'a NeuralRanker, lm: &'a BigramLm, corpus: &'a Corpus) -> Result<NaturalnessOracle<'a>> {
    match cfg.raw("oracle")? {
        "local" => Ok(NaturalnessOracle::local(surrogate, lm)),
        "external" => {
            let fallback = LocalOracle {
                embeddings: surrogate,
                lm,
            };
            Ok(NaturalnessOracle::External(ExternalOracle::new(
                external_config(cfg)?,
                &corpus.vocab,
                fallback,
            )?))
        }
        other => Err(Error::BadValue {
            key: "oracle".into(),
            value: other.into(),
        }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    n_docs: usize,
    vocab: usize,
    target_queries: usize,
    distill_queries: usize,
    eval_queries: usize,
}

fn query_records(queries: &[Query]) -> Vec<Record> {
    queries
        .iter()
        .map(|q| Record {
            id: q.id.clone(),
            text: q.text.clone(),
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `gen-corpus`: synthetic corpus, judgements, query splits and tables.
pub fn gen_corpus(cfg: &Config) -> Result<String> {
    let dir = workdir(cfg)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let bench = benchmark_config(cfg)?;
    let shift: QueryShift = cfg.get("query_shift")?;
    let data = Dataset::generate(&bench)?;
    let tables = data.tables(cfg.get("phrase_min_freq")?);
    let distill = data.distill_queries(shift);
    let eval = data.eval_queries();
    write_records(&dir.join(CORPUS_FILE), &data.synthetic.docs)?;
    write_qrels(&dir.join(QRELS_FILE), &data.qrels)?;
    write_records(&dir.join(TARGET_QUERIES), &query_records(&data.target_queries))?;
    write_records(&dir.join(DISTILL_QUERIES), &query_records(&distill))?;
    write_records(&dir.join(EVAL_QUERIES), &query_records(&eval))?;
    write_text(&dir.join(SYNONYMS_FILE), &tables.synonyms.to_tsv(&data.corpus.vocab))?;
    write_text(&dir.join(PHRASES_FILE), &tables.phrases.to_tsv(&data.corpus.vocab))?;
    let manifest = Manifest {
        config_hash: dataset_hash(cfg)?,
        n_docs: data.corpus.len(),
        vocab: data.corpus.vocab.len(),
        target_queries: data.target_queries.len(),
        distill_queries: distill.len(),
        eval_queries: eval.len(),
    };
    write_text(&dir.join(DATASET_MANIFEST), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(format!(
        "wrote {} documents ({} terms), {}/{}/{} target/distill/eval queries to {}",
        manifest.n_docs,
        manifest.vocab,
        manifest.target_queries,
        manifest.distill_queries,
        manifest.eval_queries,
        dir.display()
    ))
}

/// Everything `gen-corpus` wrote, loaded back.
pub struct Workspace {
    pub dir: PathBuf,
    pub corpus: Corpus,
    pub lm: BigramLm,
    pub qrels: Vec<Qrel>,
    pub target_queries: Vec<Query>,
    pub distill_queries: Vec<Query>,
    pub eval_queries: Vec<Query>,
    pub tables: AttackTables,
}

impl Workspace {
    pub fn open(cfg: &Config) -> Result<Self> {
        let dir = workdir(cfg)?;
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let expected = dataset_hash(cfg)?;
        if manifest.config_hash != expected {
            return Err(Error::HashMismatch {
                expected: manifest.config_hash,
                found: expected,
            });
        }
        let corpus = ingest_corpus(&dir.join(CORPUS_FILE), cfg.get("truncate_len")?)?;
        let lm = BigramLm::from_corpus(&corpus, cfg.get("add_k")?)?;
        let vocab = &corpus.vocab;
        let tables = AttackTables {
            synonyms: SynonymTable::load(&dir.join(SYNONYMS_FILE), vocab)?,
            phrases: PhraseTable::load(&dir.join(PHRASES_FILE), vocab)?,
        };
        Ok(Workspace {
            qrels: load_qrels(&dir.join(QRELS_FILE))?,
            target_queries: load_queries(&dir.join(TARGET_QUERIES), vocab)?,
            distill_queries: load_queries(&dir.join(DISTILL_QUERIES), vocab)?,
            eval_queries: load_queries(&dir.join(EVAL_QUERIES), vocab)?,
            tables,
            lm,
            corpus,
            dir,
        })
    }

    pub fn load_target(&self, cfg: &Config) -> Result<TargetRanker> {
        TargetRanker::from_checkpoint(&Checkpoint::load(&self.dir.join(TARGET_CKPT), &target_hash(cfg)?)?)
    }

    pub fn load_surrogate(&self, cfg: &Config) -> Result<NeuralRanker> {
        let ck = Checkpoint::load(&self.dir.join(SURROGATE_CKPT), &surrogate_hash(cfg)?)?;
        ck.expect_kind("surrogate")?;
        NeuralRanker::from_checkpoint(&ck)
    }

    pub fn load_policies(&self, cfg: &Config) -> Result<Policies> {
        Policies::from_checkpoint(&Checkpoint::load(&self.dir.join(POLICIES_CKPT), &policies_hash(cfg)?)?)
    }
}

/// `train-target`: the black-box ranker from the judgements.
pub fn train_target(cfg: &Config) -> Result<String> {
    let ws = Workspace::open(cfg)?;
    let bench = benchmark_config(cfg)?;
    let (target, loss) = TargetRanker::train(&ws.corpus, &ws.target_queries, &ws.qrels, &bench.target)?;
    target.to_checkpoint(&target_hash(cfg)?).save(&ws.dir.join(TARGET_CKPT))?;
    Ok(format!(
        "target trained on {} queries, loss {:.4} -> {:.4}",
        ws.target_queries.len(),
        loss.first().copied().unwrap_or(f64::NAN),
        loss.last().copied().unwrap_or(f64::NAN)
    ))
}

/// `distill-surrogate`: fit the surrogate to the target's rankings.
pub fn distill(cfg: &Config) -> Result<String> {
    let ws = Workspace::open(cfg)?;
    let target = ws.load_target(cfg)?;
    let d = distill_surrogate(&target, &ws.distill_queries, &ws.corpus, &distill_config(cfg)?)?;
    d.surrogate
        .to_checkpoint("surrogate", &surrogate_hash(cfg)?)
        .save(&ws.dir.join(SURROGATE_CKPT))?;
    let tau = ranking_agreement(&d.surrogate, &target, &ws.eval_queries, &ws.corpus, ws.corpus.len())?;
    Ok(format!(
        "surrogate distilled from {} pairs; held-out Kendall tau {tau:.4}",
        d.n_pairs
    ))
}

/// `train-attacker`: REINFORCE on targets drawn from the distillation queries.
pub fn train_attacker(cfg: &Config) -> Result<String> {
    let ws = Workspace::open(cfg)?;
    let target = ws.load_target(cfg)?;
    let surrogate = ws.load_surrogate(cfg)?;
    let oracle = build_oracle(cfg, &surrogate, &ws.lm, &ws.corpus)?;
    let env = Environment {
        surrogate: &surrogate,
        lm: &ws.lm,
        tables: &ws.tables,
        oracle: &oracle,
        reward: reward_config(cfg)?,
        generator: generator_config(cfg)?,
    };
    let lists = ranked_lists(&target, &ws.distill_queries, &ws.corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("selection_seed")?);
    let difficulty: Difficulty = cfg.get("train_difficulty")?;
    let targets = select_targets(&lists, difficulty, cfg.get("train_targets_per_query")?, &mut rng)?;
    let inputs = target_inputs(&ws.corpus, &ws.distill_queries, &lists, &targets)?;
    let mut pols = Policies::random(surrogate.dim(), &policy_config(cfg)?);
    let log_path = ws.dir.join(TRAIN_LOG);
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    let logs = train(&env, &mut pols, &inputs, &attacker_config(cfg)?, Some(&mut writer))?;
    drop(writer);
    pols.to_checkpoint(&policies_hash(cfg)?).save(&ws.dir.join(POLICIES_CKPT))?;
    let last = logs.last().expect("train logs the test pass");
    Ok(format!(
        "attacker trained on {} targets; final return {:.3}, {:.2} steps, budget {:.2}",
        inputs.len(),
        last.mean_return,
        last.mean_steps,
        last.mean_budget
    ))
}

fn write_outcomes(path: &Path, outcomes: &[AttackOutcome]) -> Result<()> {
    let mut text = String::new();
    for o in outcomes {
        text.push_str(&serde_json::to_string(o)?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_outcomes(path: &Path) -> Result<Vec<AttackOutcome>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                line: n + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// `attack`: frozen policies against the black box on evaluation targets.
pub fn attack(cfg: &Config) -> Result<String> {
    let ws = Workspace::open(cfg)?;
    let target = ws.load_target(cfg)?;
    let surrogate = ws.load_surrogate(cfg)?;
    let pols = ws.load_policies(cfg)?;
    let mode: AttackMode = cfg.get("mode")?;
    let oracle = build_oracle(cfg, &surrogate, &ws.lm, &ws.corpus)?;
    let env = Environment {
        surrogate: &surrogate,
        lm: &ws.lm,
        tables: &ws.tables,
        oracle: &oracle,
        reward: reward_config(cfg)?,
        generator: generator_config(cfg)?,
    };
    let lists = ranked_lists(&target, &ws.eval_queries, &ws.corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("selection_seed")?);
    let difficulty: Difficulty = cfg.get("difficulty")?;
    let targets = select_targets(&lists, difficulty, cfg.get("targets_per_query")?, &mut rng)?;
    let black_box = BlackBox {
        target: &target,
        corpus: &ws.corpus,
    };
    let outcomes = run_attacks(
        &env,
        &pols,
        &black_box,
        &ws.eval_queries,
        &lists,
        &targets,
        mode,
        cfg.get("attack_seed")?,
    )?;
    let path = resolve(cfg, "outcomes")?;
    write_outcomes(&path, &outcomes)?;
    Ok(format!("{mode}: attacked {} {difficulty} targets -> {}", outcomes.len(), path.display()))
}

/// `evaluate`: metrics and spam screening for an outcomes file.
pub fn evaluate(cfg: &Config) -> Result<String> {
    let path = resolve(cfg, "outcomes")?;
    let outcomes = read_outcomes(&path)?;
    let metrics = compute_metrics(&outcomes, &cfg.list::<usize>("ks")?)?;
    let ws = Workspace::open(cfg)?;
    let screening = screen_outcomes(
        &outcomes,
        &ws.corpus,
        &ws.eval_queries,
        &ws.lm,
        &cfg.list::<f64>("spam_thresholds")?,
        cfg.get("spam_window")?,
    )?;
    let label = outcomes.first().map(|o| o.mode.clone()).unwrap_or_default();
    let report = Report {
        label,
        metrics,
        screening: Some(screening),
        outcomes,
    };
    let out = resolve(cfg, "report")?;
    write_text(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(render_summary(std::slice::from_ref(&report)))
}

/// `report`: text tables for one or more evaluated reports.
pub fn report(cfg: &Config) -> Result<String> {
    let dir = workdir(cfg)?;
    let mut reports = Vec::new();
    for name in cfg.list::<String>("report")? {
        let p = PathBuf::from(&name);
        let p = if p.is_absolute() { p } else { dir.join(p) };
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        reports.push(serde_json::from_str::<Report>(&text)?);
    }
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports given".into()));
    }
    let mut text = render_summary(&reports);
    for r in &reports {
        text.push_str(&format!("\n[{}]\n", r.label));
        text.push_str(&render_outcomes(r));
        if let Some(s) = &r.screening {
            text.push_str(&render_screening(s));
        }
    }
    let out = resolve(cfg, "report_text")?;
    write_text(&out, &text)?;
    Ok(text)
}
