//! Command-line front end for the grammatical error detection toolkit.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ged::corpus::{
    self, normalize_sentence, read_sentences_file, NormalizeConfig, Vocabulary,
};
use ged::lingpipe::{parse_tagged_corpus, PosGroup};
use ged::model::{Arch, Model, ModelConfig};
use ged::noisegen::{
    generate_training_set, NoiseConfig, NoiseMode, SubstitutionTable,
};
use ged::traineval::{
    encode_dataset, evaluate, load_checkpoint_file, save_checkpoint_file, train, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "ged",
    about = "Token-level grammatical error detection: corpus preparation, \
             artificial error injection, training, and evaluation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArchArg {
    BilstmAttn,
    BilstmNoattn,
    Conv,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::BilstmAttn => Arch::BilstmAttn,
            ArchArg::BilstmNoattn => Arch::BilstmNoattn,
            ArchArg::Conv => Arch::Conv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Uniform,
    Ling,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw text: filter markup-like sentences, strip
    /// parenthesized spans, map numbers, and apply length limits.
    Preprocess {
        /// Input file, one whitespace-tokenized sentence per line.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Output file of accepted, normalized sentences.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, default_value_t = 6)]
        min_len: usize,
        #[arg(long, default_value_t = 50)]
        max_len: usize,
    },
    /// Count token frequencies and write a vocabulary file.
    BuildVocab {
        /// Normalized corpus, one sentence per line.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        /// Keep tokens occurring at least this many times.
        #[arg(long, default_value_t = 2)]
        min_frequency: usize,
    },
    /// Build a substitution table from a part-of-speech tagged corpus.
    BuildSubst {
        /// Tagged corpus: `token<TAB>TAG` lines, blank line between sentences.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Inject one artificial error per sentence, producing labeled data.
    Noisify {
        /// Normalized corpus, one sentence per line.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Labeled TSV output.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Substitution table (required for ling mode, used as replacement
        /// dictionary in uniform mode when no vocabulary is given).
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,
        /// Vocabulary supplying the replacement pool for uniform mode.
        #[arg(long, value_name = "FILE")]
        vocab: Option<PathBuf>,
        /// Restrict errors to these part-of-speech groups
        /// (comma-separated, e.g. DET,PREP).
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
    },
    /// Train a detector on labeled TSV data and save a checkpoint.
    Train {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        vocab: PathBuf,
        /// Checkpoint output path.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "bilstm-attn")]
        model: ArchArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 5.0)]
        clip_norm: f64,
        /// Use plain SGD instead of Adam.
        #[arg(long)]
        sgd: bool,
        #[arg(long, default_value_t = 150)]
        d_emb: usize,
        #[arg(long, default_value_t = 150)]
        d_hidden: usize,
        #[arg(long, default_value_t = 3)]
        conv_window: usize,
        #[arg(long, default_value_t = 50)]
        conv_d_emb: usize,
    },
    /// Score labeled TSV data with a trained model and report
    /// precision/recall/F.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        vocab: PathBuf,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Flag a token when its correctness probability is below this.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
    },
    /// Flag suspicious tokens in plain sentences.
    Detect {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        vocab: PathBuf,
        /// Input file, one whitespace-tokenized sentence per line.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

fn parse_groups(groups: &[String]) -> Result<Option<BTreeSet<PosGroup>>, String> {
    if groups.is_empty() {
        return Ok(None);
    }
    let mut set = BTreeSet::new();
    for g in groups {
        let group = PosGroup::from_name(&g.to_uppercase())
            .ok_or_else(|| format!("unknown part-of-speech group: {g}"))?;
        set.insert(group);
    }
    Ok(Some(set))
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Preprocess {
            input,
            output,
            min_len,
            max_len,
        } => {
            let config = NormalizeConfig {
                min_len,
                max_len,
                ..NormalizeConfig::default()
            };
            let raw = std::fs::read_to_string(&input).map_err(|e| e.to_string())?;
            let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
            let total = lines.len();
            let mut kept = Vec::new();
            for line in lines {
                if let Ok(norm) = normalize_sentence(line, &config) {
                    kept.push(norm.join(" "));
                }
            }
            std::fs::write(&output, kept.join("\n") + "\n").map_err(|e| e.to_string())?;
            eprintln!("accepted {} of {} sentences", kept.len(), total);
            Ok(())
        }
        Command::BuildVocab {
            input,
            output,
            min_frequency,
        } => {
            let sentences = read_sentences_file(&input).map_err(|e| e.to_string())?;
            let vocab =
                Vocabulary::build(&sentences, min_frequency).map_err(|e| e.to_string())?;
            vocab.write_file(&output).map_err(|e| e.to_string())?;
            eprintln!("vocabulary of {} tokens written", vocab.len());
            Ok(())
        }
        Command::BuildSubst { input, output } => {
            let tagged = parse_tagged_corpus(&input).map_err(|e| e.to_string())?;
            let table = SubstitutionTable::build(tagged.iter());
            table.write_file(&output).map_err(|e| e.to_string())?;
            for (group, sets) in &table.group_stats() {
                eprintln!("{group}: {sets} sets");
            }
            Ok(())
        }
        Command::Noisify {
            input,
            output,
            mode,
            seed,
            table,
            vocab,
            groups,
        } => {
            let sentences = read_sentences_file(&input).map_err(|e| e.to_string())?;
            let group_filter = parse_groups(&groups)?;
            let mode = match mode {
                ModeArg::Uniform => NoiseMode::Uniform,
                ModeArg::Ling => NoiseMode::Linguistic,
            };
            if mode == NoiseMode::Linguistic && table.is_none() {
                return Err("--table is required for ling mode".into());
            }
            let table = match &table {
                Some(p) => SubstitutionTable::read_file(p).map_err(|e| e.to_string())?,
                None => SubstitutionTable::default(),
            };
            let vocab = match &vocab {
                Some(p) => Some(Vocabulary::read_file(p).map_err(|e| e.to_string())?),
                None => {
                    if mode == NoiseMode::Uniform {
                        Some(Vocabulary::build(&sentences, 2).map_err(|e| e.to_string())?)
                    } else {
                        None
                    }
                }
            };
            let config = NoiseConfig {
                mode,
                seed,
                group_filter,
            };
            let labeled = generate_training_set(&sentences, &table, vocab.as_ref(), &config)
                .map_err(|e| e.to_string())?;
            corpus::write_dataset_file(&output, &labeled).map_err(|e| e.to_string())?;
            eprintln!(
                "wrote {} labeled sentences ({} skipped)",
                labeled.len(),
                sentences.len() - labeled.len()
            );
            Ok(())
        }
        Command::Train {
            data,
            vocab,
            output,
            model,
            seed,
            epochs,
            learning_rate,
            batch_size,
            clip_norm,
            sgd,
            d_emb,
            d_hidden,
            conv_window,
            conv_d_emb,
        } => {
            let vocab = Vocabulary::read_file(&vocab).map_err(|e| e.to_string())?;
            let labeled = corpus::read_dataset_file(&data).map_err(|e| e.to_string())?;
            let encoded = encode_dataset(&vocab, &labeled);
            let mut config = ModelConfig::new(model.into(), vocab.len());
            config.d_emb = d_emb;
            config.d_hidden = d_hidden;
            config.conv_window = conv_window;
            config.conv_d_emb = conv_d_emb;
            let mut net: Model<f32> = Model::new(config, seed);
            let train_config = TrainConfig {
                seed,
                epochs,
                learning_rate,
                batch_size,
                clip_norm,
                sgd,
                quiet: false,
            };
            train(&mut net, &encoded, &train_config).map_err(|e| e.to_string())?;
            save_checkpoint_file(&net, &output).map_err(|e| e.to_string())?;
            eprintln!("checkpoint written to {}", output.display());
            Ok(())
        }
        Command::Evaluate {
            model,
            vocab,
            data,
            threshold,
            beta,
        } => {
            let vocab = Vocabulary::read_file(&vocab).map_err(|e| e.to_string())?;
            let net = load_checkpoint_file::<f32>(&model).map_err(|e| e.to_string())?;
            if net.config.vocab_size != vocab.len() {
                return Err(format!(
                    "model was trained with a vocabulary of {} tokens, got {}",
                    net.config.vocab_size,
                    vocab.len()
                ));
            }
            let labeled = corpus::read_dataset_file(&data).map_err(|e| e.to_string())?;
            let encoded = encode_dataset(&vocab, &labeled);
            let report = evaluate(&net, &encoded, threshold, beta).map_err(|e| e.to_string())?;
            println!(
                "precision={:.2} recall={:.2} f{}={:.2}",
                report.precision, report.recall, report.beta, report.f_score
            );
            println!(
                "tp={} fp={} fn={} threshold={}",
                report.true_positives,
                report.false_positives,
                report.false_negatives,
                report.threshold
            );
            Ok(())
        }
        Command::Detect {
            model,
            vocab,
            input,
            threshold,
        } => {
            let vocab = Vocabulary::read_file(&vocab).map_err(|e| e.to_string())?;
            let net = load_checkpoint_file::<f32>(&model).map_err(|e| e.to_string())?;
            let sentences = read_sentences_file(&input).map_err(|e| e.to_string())?;
            for sentence in &sentences {
                if sentence.is_empty() {
                    println!();
                    println!("indices:");
                    continue;
                }
                let ids = vocab.encode(sentence);
                let probs = net.predict(&ids).map_err(|e| e.to_string())?;
                let mut flagged = Vec::new();
                let rendered: Vec<String> = sentence
                    .iter()
                    .zip(&probs)
                    .enumerate()
                    .map(|(i, (tok, &p))| {
                        if (p as f64) < threshold {
                            flagged.push(i.to_string());
                            format!("[[{tok}]]")
                        } else {
                            tok.clone()
                        }
                    })
                    .collect();
                println!("{}", rendered.join(" "));
                println!("indices: {}", flagged.join(","));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
