use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use monoprobe::corpus::{
    filter_no_env, filter_no_npi, Corpus, EnvClass, LicensorLexicon, NpiLexicon, SourceLabel,
    Vocabulary,
};
use monoprobe::evalgen::{generate_pairs_with, generate_synth_corpus, load_pairs, write_pairs, MinimalPair, SynthConfig};
use monoprobe::lm::{load_checkpoint, save_checkpoint, train_lm, LmConfig};
use monoprobe::probe::{collect_dataset, cross_validate, evaluate_split, DcWeights, SplitSpec};
use monoprobe::ranking::{rank_tokens, ranking_report, NpiTokenSet};
use monoprobe::runner::{
    emit_report, load_records, npi_acceptability, pair_is_encodable, with_aggregates,
    ExperimentConfig, ResultRecord, Runner,
};

#[derive(Parser)]
#[command(name = "monoprobe", version, about = "Monotonicity probing for LSTM language models")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusIo {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ModelInputs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a frequency-ordered vocabulary from a corpus.
    BuildVocab {
        #[command(flatten)]
        io: CorpusIo,
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
    },
    /// Remove every sentence containing an NPI.
    FilterNpi {
        #[command(flatten)]
        io: CorpusIo,
        #[arg(long)]
        npi_lexicon: Option<PathBuf>,
    },
    /// Remove sentences with an NPI licensed by one environment class.
    FilterEnv {
        #[command(flatten)]
        io: CorpusIo,
        #[arg(long)]
        env: EnvClass,
        #[arg(long)]
        npi_lexicon: Option<PathBuf>,
        #[arg(long)]
        licensors: Option<PathBuf>,
    },
    /// Generate DM/UM minimal pairs as TSV.
    GenPairs {
        #[arg(long)]
        output: PathBuf,
        /// Single class; all nine when omitted.
        #[arg(long)]
        env: Option<EnvClass>,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Generate the synthetic training corpus.
    GenSynth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        sentences: Option<usize>,
    },
    /// Train a language model and write its checkpoint.
    Train {
        #[command(flatten)]
        io: CorpusIo,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Train and evaluate a diagnostic classifier on pre-NPI hidden states.
    Probe {
        #[command(flatten)]
        model: ModelInputs,
        #[arg(long)]
        pairs: PathBuf,
        /// `ALL-ENV` or the name of the held-out class.
        #[arg(long, default_value = "ALL-ENV")]
        split: String,
        /// Also run k-fold cross-validation on the whole dataset.
        #[arg(long)]
        cv: bool,
        /// Where to save the trained DC weights.
        #[arg(long)]
        save_dc: Option<PathBuf>,
    },
    /// Rank vocabulary tokens by cosine similarity to a DC.
    Rank {
        #[command(flatten)]
        model: ModelInputs,
        #[arg(long)]
        dc: PathBuf,
    },
    /// NPI acceptability of a model on minimal pairs.
    Accept {
        #[command(flatten)]
        model: ModelInputs,
        #[arg(long)]
        pairs: PathBuf,
    },
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp5,
    /// Run all five experiments.
    All,
    /// Rebuild the grid from a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
    },
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string(value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn npi_lexicon(path: Option<&Path>) -> Result<NpiLexicon> {
    Ok(match path {
        Some(p) => NpiLexicon::load(p)?,
        None => NpiLexicon::default(),
    })
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Corpus::read(path, SourceLabel::Full).with_context(|| format!("reading {}", path.display()))
}

fn read_pairs(path: &Path, vocab: &Vocabulary) -> Result<Vec<MinimalPair>> {
    let loaded = load_pairs(path)?;
    for row in &loaded.errors {
        log::warn!("{}:{}: {}", path.display(), row.line, row.reason);
    }
    Ok(loaded
        .pairs
        .into_iter()
        .filter(|p| pair_is_encodable(vocab, p))
        .collect())
}

fn run_experiment(config: ExperimentConfig, name: &str) -> Result<()> {
    let runner = Runner::new(config)?;
    let records: Vec<ResultRecord> = match name {
        "exp1" => with_aggregates(runner.run_exp1()?),
        "exp2" => with_aggregates(runner.run_exp2()?),
        "exp3" => with_aggregates(runner.run_exp3()?),
        "exp4" => with_aggregates(runner.run_exp4()?),
        "exp5" => with_aggregates(runner.run_exp5()?),
        _ => runner.run_all()?,
    };
    let dir = runner.reports_dir().join(name);
    emit_report(&records, &dir)?;
    print_json(&serde_json::json!({"records": records.len(), "report": dir}))
}

fn run(cli: &Cli) -> Result<()> {
    let config = experiment_config(cli)?;
    match &cli.command {
        Command::BuildVocab { io, max_size } => {
            let vocab = Vocabulary::build(&read_corpus(&io.corpus)?, *max_size)?;
            vocab.save(&io.output)?;
            print_json(&serde_json::json!({"vocab_size": vocab.size()}))
        }
        Command::FilterNpi { io, npi_lexicon: lex } => {
            let (kept, stats) = filter_no_npi(&read_corpus(&io.corpus)?, &npi_lexicon(lex.as_deref())?);
            kept.write(&io.output)?;
            print_json(&stats)
        }
        Command::FilterEnv {
            io,
            env,
            npi_lexicon: lex,
            licensors,
        } => {
            let licensors = match licensors {
                Some(p) => LicensorLexicon::load(p)?,
                None => LicensorLexicon::default(),
            };
            let corpus = read_corpus(&io.corpus)?;
            let (kept, stats) = filter_no_env(&corpus, *env, &npi_lexicon(lex.as_deref())?, &licensors);
            kept.write(&io.output)?;
            print_json(&stats)
        }
        Command::GenPairs { output, env, n } => {
            let envs = match env {
                Some(e) => vec![*e],
                None => EnvClass::ALL.to_vec(),
            };
            let mut pairs = Vec::new();
            for env in envs {
                let seed = config.master_seed.wrapping_add(env.index() as u64);
                pairs.extend(generate_pairs_with(env, *n, seed, &config.synth.words)?);
            }
            write_pairs(&pairs, output)?;
            print_json(&serde_json::json!({"pairs": pairs.len()}))
        }
        Command::GenSynth { output, sentences } => {
            let synth = SynthConfig {
                seed: config.master_seed,
                num_sentences: sentences.unwrap_or(config.synth.num_sentences),
                ..config.synth.clone()
            };
            let corpus = generate_synth_corpus(&synth)?;
            corpus.write(output)?;
            print_json(&serde_json::json!({"sentences": corpus.len(), "tokens": corpus.num_tokens()}))
        }
        Command::Train { io, vocab } => {
            let vocab = Vocabulary::load(vocab)?;
            let lm = LmConfig {
                vocab_size: vocab.size(),
                seed: config.master_seed,
                ..config.lm.clone()
            };
            let run = train_lm(&read_corpus(&io.corpus)?, &vocab, &lm, &config.regime)?;
            save_checkpoint(&run.params, &io.output)?;
            let log_path = io.output.with_extension("log.jsonl");
            let mut file = fs::File::create(&log_path)?;
            run.write_log(&mut file)?;
            print_json(run.log.last().context("empty training log")?)
        }
        Command::Probe {
            model,
            pairs,
            split,
            cv,
            save_dc,
        } => {
            let params = load_checkpoint(&model.model)?;
            let vocab = Vocabulary::load(&model.vocab)?;
            let pairs = read_pairs(pairs, &vocab)?;
            let data = collect_dataset(&params, &vocab, &pairs)?;
            let spec = if split.eq_ignore_ascii_case("ALL-ENV") {
                SplitSpec::AllEnv
            } else {
                SplitSpec::HeldOut(split.parse()?)
            };
            let dc = monoprobe::probe::DcConfig {
                seed: config.master_seed,
                ..config.dc.clone()
            };
            let result = evaluate_split(&data, spec, &dc)?;
            let folds = if *cv { Some(cross_validate(&data, &dc)?) } else { None };
            if let Some(path) = save_dc {
                result.weights.save(path)?;
            }
            print_json(&result.report(folds.as_ref()))
        }
        Command::Rank { model, dc } => {
            let params = load_checkpoint(&model.model)?;
            let vocab = Vocabulary::load(&model.vocab)?;
            let weights = DcWeights::load(dc)?;
            let ranking = rank_tokens(&weights, params.decoder.view())?;
            let id = dc.display().to_string();
            print_json(&ranking_report(&id, &ranking, &vocab, &NpiTokenSet::default_for(&vocab))?)
        }
        Command::Accept { model, pairs } => {
            let params = load_checkpoint(&model.model)?;
            let vocab = Vocabulary::load(&model.vocab)?;
            let loaded = load_pairs(pairs)?;
            print_json(&npi_acceptability(&params, &vocab, &loaded.pairs)?)
        }
        Command::Exp1 => run_experiment(config, "exp1"),
        Command::Exp2 => run_experiment(config, "exp2"),
        Command::Exp3 => run_experiment(config, "exp3"),
        Command::Exp4 => run_experiment(config, "exp4"),
        Command::Exp5 => run_experiment(config, "exp5"),
        Command::All => run_experiment(config, "all"),
        Command::Report { records } => {
            let records = load_records(records)?;
            if records.is_empty() {
                bail!("no records in input");
            }
            let records = if records.iter().any(ResultRecord::is_aggregate) {
                records
            } else {
                with_aggregates(records)
            };
            let dir = config.out_dir.join("reports");
            emit_report(&records, &dir)?;
            info!("report written to {}", dir.display());
            print_json(&serde_json::json!({"records": records.len(), "report": dir}))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let line = serde_json::json!({"error": e.kind().to_string(), "detail": e.to_string()});
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": format!("{e:#}")});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
