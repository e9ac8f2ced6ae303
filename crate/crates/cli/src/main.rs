use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use commands::Failure;
use config::RunConfig;

/// Form Sanskrit derivative nouns from stem and suffix, or split them back.
#[derive(Parser, Debug)]
#[command(name = "pratyaya", version)]
struct Cli {
    /// Flat `key = value` file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on the training partition and write a checkpoint.
    Train(Settings),
    /// Run a checkpoint on words given as arguments or one per stdin line.
    Predict {
        #[command(flatten)]
        settings: Settings,
        /// Inputs are ITRANS; they are converted to SLP1 first.
        #[arg(long)]
        itrans: bool,
        inputs: Vec<String>,
    },
    /// Score a checkpoint on the test partition it was trained against.
    Evaluate(Settings),
    /// Per-suffix record counts of a corpus.
    Stats {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, value_enum, default_value_t = StatsFormat::Table)]
        format: StatsFormat,
    },
    /// Convert stdin line by line between ITRANS and SLP1.
    Translit {
        #[arg(long, value_enum, default_value_t = Scheme::Itrans)]
        from: Scheme,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StatsFormat {
    Table,
    Kv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Itrans,
    Slp1,
}

/// Flags mirroring the config file keys.
#[derive(Args, Debug, Default)]
struct Settings {
    #[arg(long)]
    corpus: Option<String>,
    /// krit, taddhit, or all
    #[arg(long)]
    category: Option<String>,
    /// Comma-separated suffixes to drop.
    #[arg(long)]
    exclude: Option<String>,
    /// formation or split
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    split_fraction: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    latent_dim: Option<String>,
    /// Pin the source length instead of fitting it to the corpus.
    #[arg(long)]
    source_max: Option<String>,
    /// Pin the pada length (markers excluded) instead of fitting it.
    #[arg(long)]
    target_max: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    beta1: Option<String>,
    #[arg(long)]
    beta2: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    validation_fraction: Option<String>,
    #[arg(long)]
    init_scale: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    history: Option<String>,
    #[arg(long)]
    report: Option<String>,
    #[arg(long)]
    report_tsv: Option<String>,
    /// positional or levenshtein
    #[arg(long)]
    char_alignment: Option<String>,
    /// Exit with status 1 when accuracy falls below this ratio.
    #[arg(long)]
    min_accuracy: Option<String>,
    #[arg(long)]
    model_name: Option<String>,
}

impl Settings {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let fields = [
            ("corpus", &self.corpus),
            ("category", &self.category),
            ("exclude", &self.exclude),
            ("direction", &self.direction),
            ("split_fraction", &self.split_fraction),
            ("split_seed", &self.split_seed),
            ("seed", &self.seed),
            ("latent_dim", &self.latent_dim),
            ("source_max", &self.source_max),
            ("target_max", &self.target_max),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("learning_rate", &self.learning_rate),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("epsilon", &self.epsilon),
            ("validation_fraction", &self.validation_fraction),
            ("init_scale", &self.init_scale),
            ("patience", &self.patience),
            ("checkpoint", &self.checkpoint),
            ("history", &self.history),
            ("report", &self.report),
            ("report_tsv", &self.report_tsv),
            ("char_alignment", &self.char_alignment),
            ("min_accuracy", &self.min_accuracy),
            ("model_name", &self.model_name),
        ];
        fields.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect()
    }
}

fn resolve(cli_config: &Option<PathBuf>, settings: &Settings) -> Result<RunConfig, Failure> {
    RunConfig::resolve(cli_config.as_deref(), &settings.pairs()).map_err(|e| Failure::Usage(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Train(s) => commands::train(&resolve(&cli.config, s)?),
        Command::Predict { settings, itrans, inputs } => {
            commands::predict(&resolve(&cli.config, settings)?, settings.direction.is_some(), *itrans, inputs)
        }
        Command::Evaluate(s) => commands::evaluate(&resolve(&cli.config, s)?),
        Command::Stats { settings, format } => {
            commands::stats(&resolve(&cli.config, settings)?, matches!(format, StatsFormat::Kv))
        }
        Command::Translit { from } => commands::translit(*from == Scheme::Itrans),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, err) = match failure {
                Failure::Usage(e) => (2, e),
                Failure::Runtime(e) => (1, e),
            };
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_cover_every_config_key() {
        let all = Settings {
            corpus: Some("x".into()),
            category: Some("x".into()),
            exclude: Some("x".into()),
            direction: Some("x".into()),
            split_fraction: Some("x".into()),
            split_seed: Some("x".into()),
            seed: Some("x".into()),
            latent_dim: Some("x".into()),
            source_max: Some("x".into()),
            target_max: Some("x".into()),
            batch_size: Some("x".into()),
            epochs: Some("x".into()),
            learning_rate: Some("x".into()),
            beta1: Some("x".into()),
            beta2: Some("x".into()),
            epsilon: Some("x".into()),
            validation_fraction: Some("x".into()),
            init_scale: Some("x".into()),
            patience: Some("x".into()),
            checkpoint: Some("x".into()),
            history: Some("x".into()),
            report: Some("x".into()),
            report_tsv: Some("x".into()),
            char_alignment: Some("x".into()),
            min_accuracy: Some("x".into()),
            model_name: Some("x".into()),
        };
        let keys: Vec<&str> = all.pairs().iter().map(|(k, _)| *k).collect();
        assert_eq!(keys, config::KEYS);
        assert!(Settings::default().pairs().is_empty());
    }
}
