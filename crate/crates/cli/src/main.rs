//! `emend` — unsupervised OCR post-correction pipeline.
//!
//! Subcommands mirror the pipeline stages: `ingest` counts a corpus,
//! `train-embeddings` fits CBOW vectors, `extract` mines parallel pairs,
//! `train-nmt` fits the character-level corrector, `correct` applies it,
//! `evaluate` scores against a gold standard, and `synthesize` fabricates a
//! noisy corpus with known ground truth for end-to-end validation.

mod params;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use emend_core::corpus::{count_frequencies, FrequencyTable, SentenceStream, Token};
use emend_core::corrector::{correct_document, Corrector};
use emend_core::embeddings::{train_cbow, EmbeddingModel};
use emend_core::extraction::{
    build_seed_list, extract_pairs, read_dataset, write_dataset, write_provenance, SeedSource,
};
use emend_core::harness::{
    evaluate, generate_clean_text, read_gold, synthesize_corpus, write_corpus, write_gold,
    NoiseModel, TextShape,
};
use emend_core::lexicon::Lexicon;
use emend_core::nmt::{train as train_nmt_model, Decoder, LogSink, Seq2SeqCheckpoint};

use params::{CbowParams, ExtractParams, NmtParams, SynthesizeParams};

#[derive(Parser)]
#[command(
    name = "emend",
    version,
    about = "Unsupervised OCR post-correction: mine parallel data from a noisy corpus and correct it with a character-level translator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus directory and write a frequency table.
    Ingest(IngestArgs),
    /// Train CBOW word embeddings on a corpus.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Mine (error form, correct form) training pairs from an embedding model.
    Extract(ExtractArgs),
    /// Train the character-level corrector on extracted pairs.
    TrainNmt(TrainNmtArgs),
    /// Correct words, word lists or whole documents.
    Correct(CorrectArgs),
    /// Score a corrector against a gold standard.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic noisy corpus with known ground truth.
    Synthesize(SynthesizeArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of UTF-8 .txt files, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output frequency table (`token<TAB>count`, descending count).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainEmbeddingsArgs {
    /// Directory of UTF-8 .txt files, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Reuse a frequency table instead of recounting.
    #[arg(long)]
    freq: Option<PathBuf>,
    /// Output model file (versioned binary).
    #[arg(long)]
    out: PathBuf,
    /// Also export the text interchange format.
    #[arg(long)]
    export_text: Option<PathBuf>,
    /// Base parameter preset.
    #[arg(long, value_parser = ["desk", "paper"], default_value = "paper")]
    preset: String,
    /// TOML file overriding preset parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    negative: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// 1 = deterministic; more threads trade reproducibility for speed.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Trained embedding model.
    #[arg(long)]
    model: PathBuf,
    /// Lemma wordlist (one per line, '#' comments).
    #[arg(long)]
    lexicon: PathBuf,
    /// Optional suffix-rule override (`suffix<TAB>replacement`).
    #[arg(long)]
    suffix_rules: Option<PathBuf>,
    /// Seed-list source; inferred from --seeds/--freq when omitted.
    #[arg(long)]
    source: Option<String>,
    /// Corpus frequency table (for the corpus-freq source).
    #[arg(long)]
    freq: Option<PathBuf>,
    /// External frequency table (for the external-freq source).
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// TOML file overriding extraction parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    min_length: Option<usize>,
    /// Neighbors inspected per seed word.
    #[arg(long)]
    k: Option<usize>,
    /// Edit-distance cutoff (pairs beyond it are dropped).
    #[arg(long)]
    max_dist: Option<usize>,
    /// Output dataset TSV. A provenance JSON sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Override the provenance sidecar path.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Args)]
struct TrainNmtArgs {
    /// Extracted parallel dataset TSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Output checkpoint file.
    #[arg(long)]
    out: PathBuf,
    /// Base parameter preset.
    #[arg(long, value_parser = ["desk", "paper"], default_value = "desk")]
    preset: String,
    /// TOML file overriding preset parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    /// Held-out fraction used for plateau decisions.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write intermediate checkpoints every N steps.
    #[arg(long)]
    save_every: Option<usize>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Emit `step<TAB>loss` every N steps (stdout, or --log-file).
    #[arg(long, default_value_t = 0)]
    log_every: usize,
    #[arg(long)]
    log_file: Option<PathBuf>,
}

#[derive(Args)]
struct CorrectArgs {
    /// Lemma wordlist.
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    suffix_rules: Option<PathBuf>,
    /// Corrector: nmt, w2v or cascade.
    #[arg(long, value_parser = ["nmt", "w2v", "cascade"], default_value = "nmt")]
    method: String,
    /// Corrector checkpoint (nmt and cascade).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Embedding model (w2v and cascade).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Correct a single word and print one TSV line.
    #[arg(long)]
    word: Option<String>,
    /// Correct a word list (one word per line) into a TSV file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Correct a whole document, preserving layout.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Output path for --input/--text modes.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Change-log TSV for --text mode.
    #[arg(long)]
    changes: Option<PathBuf>,
    /// Beam candidates inspected by the NMT corrector.
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    /// Neighbors inspected by the w2v corrector.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Strict edit-distance bound of the w2v corrector.
    #[arg(long, default_value_t = 4)]
    max_dist: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold standard TSV (`erroneous<TAB>expected`).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    suffix_rules: Option<PathBuf>,
    #[arg(long, value_parser = ["nmt", "w2v", "cascade"], default_value = "nmt")]
    method: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Row label of the printed table.
    #[arg(long, default_value = "gold")]
    label: String,
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    max_dist: usize,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Clean wordlist; doubles as the lexicon deciding gold membership.
    #[arg(long)]
    wordlist: PathBuf,
    /// Corrupt an existing clean text instead of sampling one.
    #[arg(long)]
    text: Option<PathBuf>,
    /// TOML file overriding synthesis parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tokens to sample when no --text is given.
    #[arg(long)]
    tokens: Option<usize>,
    #[arg(long)]
    sentence_len: Option<usize>,
    /// Zipf exponent of the sampled word distribution.
    #[arg(long)]
    zipf: Option<f64>,
    /// Successor-set size of the sampled bigram chain.
    #[arg(long)]
    successors: Option<usize>,
    /// Probability of following the chain between adjacent tokens.
    #[arg(long)]
    chain_weight: Option<f64>,
    /// Per-token corruption probability.
    #[arg(long)]
    corrupt_prob: Option<f64>,
    /// Noise rules TSV (`pattern<TAB>replacement<TAB>weight`); the built-in
    /// long-s era confusion table is used when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output noisy corpus (plain text, one sentence per line).
    #[arg(long)]
    out_corpus: PathBuf,
    /// Output gold pairs TSV.
    #[arg(long)]
    out_gold: PathBuf,
}

fn load_lexicon(wordlist: &Path, suffix_rules: Option<&Path>) -> Result<Lexicon> {
    let mut lexicon = Lexicon::load_wordlist(wordlist)?;
    if let Some(path) = suffix_rules {
        lexicon = lexicon.with_suffix_rules(Lexicon::load_suffix_rules(path)?);
    }
    Ok(lexicon)
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let stream = SentenceStream::from_dir(&args.corpus)?;
    let table = count_frequencies(&stream)?;
    table.write_tsv(&args.out)?;
    eprintln!(
        "ingested {} tokens ({} distinct) -> {}",
        table.total_tokens(),
        table.distinct_tokens(),
        args.out.display()
    );
    Ok(())
}

fn run_train_embeddings(args: TrainEmbeddingsArgs) -> Result<()> {
    let mut p = CbowParams::preset(&args.preset)?;
    p.overlay_file(args.config.as_deref())?;
    p.overlay_cli(
        args.dim,
        args.window,
        args.epochs,
        args.min_count,
        args.negative,
        args.lr,
        args.seed,
        args.threads,
    );

    let stream = SentenceStream::from_dir(&args.corpus)?;
    let table = match &args.freq {
        Some(path) => FrequencyTable::read_tsv(path)?,
        None => count_frequencies(&stream)?,
    };
    let (model, stats) = train_cbow(&stream, &table, &p.into_config())?;
    model.save(&args.out)?;
    if let Some(path) = &args.export_text {
        model.export_text(path)?;
    }
    eprintln!(
        "trained {} vectors of dim {} over {} epochs (loss {} -> {}) -> {}",
        model.len(),
        model.dim(),
        model.trained_epochs(),
        stats.epoch_losses.first().map(|l| format!("{l:.4}")).unwrap_or_default(),
        stats.epoch_losses.last().map(|l| format!("{l:.4}")).unwrap_or_default(),
        args.out.display()
    );
    Ok(())
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    let mut p = ExtractParams::default();
    p.overlay_file(args.config.as_deref())?;
    p.overlay_cli(args.min_freq, args.min_length, args.k, args.max_dist);

    let model = EmbeddingModel::load(&args.model)?;
    let lexicon = load_lexicon(&args.lexicon, args.suffix_rules.as_deref())?;

    let source: SeedSource = match &args.source {
        Some(s) => s.parse()?,
        None if args.seeds.is_some() => SeedSource::ExternalFreq,
        None if args.freq.is_some() => SeedSource::CorpusFreq,
        None => SeedSource::VocabAll,
    };
    let corpus_freq = args.freq.as_deref().map(FrequencyTable::read_tsv).transpose()?;
    let external_freq = args.seeds.as_deref().map(FrequencyTable::read_tsv).transpose()?;

    let seed_list = build_seed_list(
        source,
        &model,
        corpus_freq.as_ref(),
        external_freq.as_ref(),
        &lexicon,
        p.min_freq,
        p.min_length,
    )?;
    let dataset = extract_pairs(&seed_list, &model, &lexicon, p.k, p.max_dist)?;
    write_dataset(&dataset, &args.out)?;
    let sidecar = args
        .provenance
        .unwrap_or_else(|| args.out.with_extension("json"));
    write_provenance(&dataset.provenance, &sidecar)?;
    eprintln!(
        "extracted {} pairs from {} seeds ({} out of vocabulary) -> {}",
        dataset.len(),
        dataset.provenance.seed_count,
        dataset.provenance.oov_seeds,
        args.out.display()
    );
    Ok(())
}

fn run_train_nmt(args: TrainNmtArgs) -> Result<()> {
    let mut p = NmtParams::preset(&args.preset)?;
    p.overlay_file(args.config.as_deref())?;
    p.overlay_cli(
        args.steps,
        args.batch,
        args.hidden,
        args.embed,
        args.layers,
        args.lr,
        args.dropout,
        args.clip,
        args.holdout,
        args.seed,
        args.threads,
    );

    let dataset = read_dataset(&args.dataset)?;
    let mut config = p.into_config();
    config.checkpoint_every = args.save_every;
    config.checkpoint_dir = args.checkpoint_dir.clone();
    config.log_every = args.log_every;
    config.log = match &args.log_file {
        Some(path) => LogSink::File(path.clone()),
        None if args.log_every > 0 => LogSink::Stdout,
        None => LogSink::Quiet,
    };

    let (checkpoint, report) = train_nmt_model(&dataset, &config)?;
    checkpoint.save(&args.out)?;
    eprintln!(
        "trained {} steps on {} pairs (holdout {}; loss {:.4} -> {:.4}; final lr {}) -> {}",
        config.steps,
        report.train_examples,
        report.holdout_examples,
        report.step_losses.first().copied().unwrap_or(f64::NAN),
        report.step_losses.last().copied().unwrap_or(f64::NAN),
        report.final_lr,
        args.out.display()
    );
    Ok(())
}

struct LoadedModels {
    decoder: Option<Decoder>,
    embeddings: Option<EmbeddingModel>,
}

impl LoadedModels {
    fn for_method(
        method: &str,
        checkpoint: Option<&Path>,
        embeddings: Option<&Path>,
    ) -> Result<LoadedModels> {
        let needs_decoder = method == "nmt" || method == "cascade";
        let needs_embeddings = method == "w2v" || method == "cascade";
        let decoder = if needs_decoder {
            let path = checkpoint
                .with_context(|| format!("--checkpoint is required for method {method}"))?;
            Some(Decoder::new(&Seq2SeqCheckpoint::load(path)?)?)
        } else {
            None
        };
        let embeddings = if needs_embeddings {
            let path = embeddings
                .with_context(|| format!("--embeddings is required for method {method}"))?;
            Some(EmbeddingModel::load(path)?)
        } else {
            None
        };
        Ok(LoadedModels {
            decoder,
            embeddings,
        })
    }

    fn corrector(&self, method: &str, candidates: usize, k: usize, max_dist: usize) -> Corrector<'_> {
        match method {
            "nmt" => Corrector::Nmt {
                decoder: self.decoder.as_ref().expect("decoder loaded"),
                n_candidates: candidates,
            },
            "w2v" => Corrector::W2v {
                index: self.embeddings.as_ref().expect("embeddings loaded").neighbor_index(),
                k,
                max_dist,
            },
            "cascade" => Corrector::Cascade {
                index: self.embeddings.as_ref().expect("embeddings loaded").neighbor_index(),
                decoder: self.decoder.as_ref().expect("decoder loaded"),
                k,
                max_dist,
                n_candidates: candidates,
            },
            other => unreachable!("clap rejects method {other}"),
        }
    }
}

fn correction_line(word: &Token, corrector: &Corrector<'_>, lexicon: &Lexicon) -> String {
    if lexicon.is_correct(word) {
        return format!("{word}\t{word}\tpass\t-");
    }
    let correction = corrector.correct(word, lexicon);
    let output = correction
        .output
        .as_ref()
        .map(|t| t.to_string())
        .unwrap_or_else(|| "NONE".into());
    let rank = correction
        .candidate_rank
        .map(|r| r.to_string())
        .unwrap_or_else(|| "-".into());
    format!("{word}\t{output}\t{}\t{rank}", correction.method.as_str())
}

fn run_correct(args: CorrectArgs) -> Result<()> {
    let lexicon = load_lexicon(&args.lexicon, args.suffix_rules.as_deref())?;
    let models = LoadedModels::for_method(
        &args.method,
        args.checkpoint.as_deref(),
        args.embeddings.as_deref(),
    )?;
    let corrector = models.corrector(&args.method, args.candidates, args.k, args.max_dist);

    let modes = usize::from(args.word.is_some())
        + usize::from(args.input.is_some())
        + usize::from(args.text.is_some());
    if modes != 1 {
        bail!("exactly one of --word, --input or --text must be given");
    }

    if let Some(word) = &args.word {
        let token = Token::new(word.to_lowercase())
            .with_context(|| format!("{word:?} is not a valid word"))?;
        println!("{}", correction_line(&token, &corrector, &lexicon));
        return Ok(());
    }

    if let Some(input) = &args.input {
        let out = args
            .out
            .as_ref()
            .context("--out is required with --input")?;
        let text = std::fs::read_to_string(input)
            .with_context(|| format!("cannot read {}", input.display()))?;
        let mut lines = Vec::new();
        for raw in text.lines() {
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let token = Token::new(raw.to_lowercase())
                .with_context(|| format!("{raw:?} is not a valid word"))?;
            lines.push(correction_line(&token, &corrector, &lexicon));
        }
        std::fs::write(out, lines.join("\n") + "\n")
            .with_context(|| format!("cannot write {}", out.display()))?;
        eprintln!("corrected {} words -> {}", lines.len(), out.display());
        return Ok(());
    }

    let text_path = args.text.as_ref().expect("mode checked above");
    let out = args.out.as_ref().context("--out is required with --text")?;
    let text = std::fs::read_to_string(text_path)
        .with_context(|| format!("cannot read {}", text_path.display()))?;
    let result = correct_document(&text, &corrector, &lexicon);
    std::fs::write(out, &result.text).with_context(|| format!("cannot write {}", out.display()))?;
    if let Some(changes_path) = &args.changes {
        let mut lines = vec!["# position\toriginal\treplacement\tmethod".to_string()];
        for change in &result.changes {
            lines.push(format!(
                "{}\t{}\t{}\t{}",
                change.position,
                change.original,
                change.replacement.as_deref().unwrap_or("NONE"),
                change.method.as_str()
            ));
        }
        std::fs::write(changes_path, lines.join("\n") + "\n")
            .with_context(|| format!("cannot write {}", changes_path.display()))?;
    }
    eprintln!(
        "corrected document with {} change entries -> {}",
        result.changes.len(),
        out.display()
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let lexicon = load_lexicon(&args.lexicon, args.suffix_rules.as_deref())?;
    let models = LoadedModels::for_method(
        &args.method,
        args.checkpoint.as_deref(),
        args.embeddings.as_deref(),
    )?;
    let corrector = models.corrector(&args.method, args.candidates, args.k, args.max_dist);
    let gold = read_gold(&args.gold, &lexicon)?;
    let report = evaluate(&gold, |w| corrector.correct(w, &lexicon), &lexicon)?;
    print!("{}", report.human_table(&args.label));
    if let Some(path) = &args.report {
        report.write_json(path)?;
        eprintln!("report -> {}", path.display());
    }
    Ok(())
}

fn run_synthesize(args: SynthesizeArgs) -> Result<()> {
    let mut p = SynthesizeParams::default();
    p.overlay_file(args.config.as_deref())?;
    p.overlay_cli(
        args.tokens,
        args.sentence_len,
        args.zipf,
        args.successors,
        args.chain_weight,
        args.corrupt_prob,
        args.seed,
    );

    let lexicon = Lexicon::load_wordlist(&args.wordlist)?;
    let clean = match &args.text {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            SentenceStream::from_text(&text)
        }
        None => {
            let text = std::fs::read_to_string(&args.wordlist)
                .with_context(|| format!("cannot read {}", args.wordlist.display()))?;
            let words: Vec<Token> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .filter_map(|l| Token::new(l.to_lowercase()))
                .collect();
            generate_clean_text(
                &words,
                p.tokens,
                &TextShape {
                    zipf_exponent: p.zipf,
                    sentence_len: p.sentence_len,
                    successors: p.successors,
                    chain_weight: p.chain_weight,
                },
                p.seed,
            )?
        }
    };

    let noise = match &args.rules {
        Some(path) => NoiseModel::from_tsv(path, p.corrupt_prob)?,
        None => NoiseModel::default_confusions(p.corrupt_prob),
    };
    let (noisy, gold) = synthesize_corpus(&clean, &noise, &lexicon, p.seed)?;
    if let Some(parent) = args.out_corpus.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    write_corpus(&noisy, &args.out_corpus)?;
    write_gold(&gold, &args.out_gold)?;
    eprintln!(
        "synthesized corpus -> {} ({} gold pair types -> {})",
        args.out_corpus.display(),
        gold.len(),
        args.out_gold.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::TrainEmbeddings(args) => run_train_embeddings(args),
        Command::Extract(args) => run_extract(args),
        Command::TrainNmt(args) => run_train_nmt(args),
        Command::Correct(args) => run_correct(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Synthesize(args) => run_synthesize(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
