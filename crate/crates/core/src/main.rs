use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sermon::corpus::verify_alignment;
use sermon::labels::emit_predictions;
use sermon::ngrams::{extract_ngrams, top_k};
use sermon::polarity::{calibrate, Calibration};
use sermon::report::{
    analyze, chapter_totals_csv, deviation_csv, load_inputs, overlap_csv, overlap_rows, polarity_csv,
    run_pipeline, sentiment_matrices, sentiment_matrix_csv, RunConfig, StageError, ARTIFACTS,
};
use sermon::{compare, Error};

#[derive(Parser)]
#[command(name = "sermon", version, about = "Verse-aligned translation analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Translation file, repeatable; defaults to the bundled corpus
    #[arg(long = "corpus", value_name = "ID=PATH")]
    corpora: Vec<String>,
    /// AFINN-format lexicon
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Lemma table (inflected<TAB>lemma)
    #[arg(long)]
    lemmas: Option<PathBuf>,
    /// Seed lexicons for the baseline classifier
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Prediction JSONL for one translation, repeatable
    #[arg(long = "predictions", value_name = "ID=PATH")]
    predictions: Vec<String>,
    #[arg(long)]
    no_lowercase: bool,
    #[arg(long)]
    keep_stopwords: bool,
    #[arg(long)]
    no_lemmatize: bool,
    #[arg(long)]
    keep_apostrophes: bool,
    /// Token stream scored against the lexicon: lemmatized or surface
    #[arg(long)]
    match_stage: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// key = value or JSON file; its settings override flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus and check verse alignment
    Validate(Common),
    /// Top-k n-gram table as CSV
    Ngrams {
        #[command(flatten)]
        common: Common,
        /// Only this order (1, 2 or 3); default 2 and 3
        #[arg(long)]
        n: Option<usize>,
    },
    /// Chapter polarity totals as CSV, or a calibration sweep
    Polarity {
        #[command(flatten)]
        common: Common,
        /// Per-verse scores instead of chapter totals
        #[arg(long)]
        verses: bool,
        /// Sweep preprocessing flags against chapter targets and print JSON
        #[arg(long)]
        calibrate: bool,
        /// Translation to calibrate
        #[arg(long, default_value = "KJV")]
        translation: String,
        #[arg(long, default_value = "5=-2,6=21,7=-18", value_name = "C=T,...")]
        targets: String,
        /// Write the calibration JSON here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sentiment matrix as CSV
    Labels {
        #[command(flatten)]
        common: Common,
        /// Also write all predictions as JSONL
        #[arg(long, value_name = "PATH")]
        emit: Option<PathBuf>,
    },
    /// Vocabulary overlap, polarity deviation and label agreement
    Compare(Common),
    /// Full pipeline into an output directory
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn id_path(flag: &str, raw: &str) -> Result<(String, PathBuf), Error> {
    match raw.split_once('=') {
        Some((id, path)) if !id.is_empty() && !path.is_empty() => Ok((id.to_string(), PathBuf::from(path))),
        _ => Err(Error::Invalid(format!("--{flag} expects ID=PATH, got {raw:?}"))),
    }
}

fn build_config(common: &Common) -> Result<RunConfig, StageError> {
    let inner = || -> Result<RunConfig, Error> {
        let mut c = RunConfig::default();
        for raw in &common.corpora {
            c.corpora.push(id_path("corpus", raw)?);
        }
        for raw in &common.predictions {
            c.predictions.push(id_path("predictions", raw)?);
        }
        c.lexicon = common.lexicon.clone();
        c.stopwords = common.stopwords.clone();
        c.lemmas = common.lemmas.clone();
        c.seeds = common.seeds.clone();
        c.lowercase &= !common.no_lowercase;
        c.remove_stopwords &= !common.keep_stopwords;
        c.lemmatize &= !common.no_lemmatize;
        c.keep_apostrophes |= common.keep_apostrophes;
        if let Some(stage) = &common.match_stage {
            c.match_stage = stage.parse()?;
        }
        if let Some(tau) = common.tau {
            c.tau = tau;
        }
        if let Some(k) = common.top_k {
            c.top_k = k;
        }
        if let Some(path) = &common.config {
            c.apply_file(path)?;
        }
        Ok(c)
    };
    inner().map_err(|source| StageError { stage: "config", source })
}

fn parse_targets(raw: &str) -> Result<BTreeMap<u32, i64>, Error> {
    raw.split(',')
        .map(|pair| {
            let (c, t) = pair
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("target {pair:?} is not CHAPTER=TOTAL")))?;
            let c = c.trim().parse().map_err(|_| Error::Invalid(format!("bad chapter in {pair:?}")))?;
            let t = t.trim().parse().map_err(|_| Error::Invalid(format!("bad total in {pair:?}")))?;
            Ok((c, t))
        })
        .collect()
}

fn stdout(bytes: &[u8]) -> Result<(), StageError> {
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| StageError { stage: "output", source: Error::Io { path: "<stdout>".into(), source: e } })
}

fn stage<T>(stage: &'static str, r: Result<T, Error>) -> Result<T, StageError> {
    r.map_err(|source| StageError { stage, source })
}

fn execute(command: Command) -> Result<ExitCode, StageError> {
    match command {
        Command::Validate(common) => {
            let config = build_config(&common)?;
            let inputs = load_inputs(&config)?;
            for t in inputs.corpus.translations() {
                let chapters: Vec<String> = t
                    .chapters()
                    .iter()
                    .map(|c| format!("{}:{}", c.number(), c.verses().len()))
                    .collect();
                println!("{}\t{} verses\t{}", t.id(), t.verse_count(), chapters.join(" "));
            }
            let report = verify_alignment(&inputs.corpus);
            if report.aligned() {
                println!("aligned");
                return Ok(ExitCode::SUCCESS);
            }
            for m in report.mismatches() {
                println!("{}\t{}\t{:?}", m.translation_id, m.reference, m.kind);
            }
            eprintln!("error: {} alignment mismatches", report.mismatches().len());
            Ok(ExitCode::from(2))
        }
        Command::Ngrams { common, n } => {
            let config = build_config(&common)?;
            let inputs = load_inputs(&config)?;
            let analyses = analyze(&inputs, &config)?;
            let orders = match n {
                Some(n) => vec![n],
                None => vec![2, 3],
            };
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let mut rows = vec![vec!["translation".to_string(), "n".into(), "rank".into(), "gram".into(), "count".into()]];
            for a in &analyses {
                for &n in &orders {
                    let table = stage("ngrams", extract_ngrams(&a.tokenized, n))?;
                    for (rank, (g, c)) in top_k(&table, config.top_k).into_iter().enumerate() {
                        rows.push(vec![a.id.clone(), n.to_string(), (rank + 1).to_string(), g.join(" "), c.to_string()]);
                    }
                }
            }
            for row in rows {
                stage("output", w.write_record(&row).map_err(Error::from))?;
            }
            stdout(&w.into_inner().expect("in-memory csv"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Polarity { common, verses, calibrate: sweep, translation, targets, output } => {
            let config = build_config(&common)?;
            let inputs = load_inputs(&config)?;
            if sweep {
                let targets = stage("config", parse_targets(&targets))?;
                let t = stage(
                    "polarity",
                    inputs
                        .corpus
                        .get(&translation)
                        .ok_or_else(|| Error::Invalid(format!("no translation {translation:?} in the corpus"))),
                )?;
                let cal: Calibration = stage(
                    "polarity",
                    calibrate(t, &inputs.lexicon, inputs.stopwords.clone(), inputs.lemmatizer.clone(), &targets),
                )?;
                let mut json = serde_json::to_string_pretty(&cal).expect("calibration serializes");
                json.push('\n');
                match output {
                    Some(path) => stage("output", std::fs::write(&path, json).map_err(|e| Error::Io { path, source: e }))?,
                    None => stdout(json.as_bytes())?,
                }
                return Ok(ExitCode::SUCCESS);
            }
            let analyses = analyze(&inputs, &config)?;
            let series: Vec<_> = analyses.iter().map(|a| &a.polarity).collect();
            let bytes = if verses { polarity_csv(&series) } else { chapter_totals_csv(&series) };
            stdout(&stage("polarity", bytes)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Labels { common, emit } => {
            let config = build_config(&common)?;
            let inputs = load_inputs(&config)?;
            let analyses = analyze(&inputs, &config)?;
            let all: Vec<_> = analyses.iter().flat_map(|a| a.predictions.iter().cloned()).collect();
            if let Some(path) = emit {
                stage("output", std::fs::write(&path, emit_predictions(&all)).map_err(|e| Error::Io { path, source: e }))?;
            }
            stdout(&stage("labels", sentiment_matrix_csv(&sentiment_matrices(&inputs.corpus, &all)))?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(common) => {
            let config = build_config(&common)?;
            let inputs = load_inputs(&config)?;
            let analyses = analyze(&inputs, &config)?;
            let pre = config.preprocess(inputs.stopwords.clone(), inputs.lemmatizer.clone());
            stdout(&stage("compare", overlap_csv(&overlap_rows(&inputs.corpus, &pre)))?)?;
            if analyses.len() >= 2 {
                let series: Vec<_> = analyses.iter().map(|a| a.polarity.clone()).collect();
                let dev = stage("compare", compare::polarity_deviation(&series))?;
                println!();
                stdout(&stage("compare", deviation_csv(&dev))?)?;
            }
            let all: Vec<_> = analyses.iter().flat_map(|a| a.predictions.iter().cloned()).collect();
            let agreement = stage("compare", compare::label_agreement(&all, &inputs.corpus))?;
            let n = agreement.records.len().max(1) as f64;
            let mean = agreement.records.iter().map(|r| r.jaccard).sum::<f64>() / n;
            println!("\nmean_label_jaccard,{mean:.6}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, out } => {
            let mut config = build_config(&common)?;
            if common.config.is_none() || config.out == RunConfig::default().out {
                config.out = out;
            }
            let bundle = run_pipeline(&config)?;
            println!(
                "wrote {} artifacts and manifest to {} (labels_source={})",
                ARTIFACTS.len(),
                bundle.out_dir.display(),
                bundle.labels_source
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.source.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
