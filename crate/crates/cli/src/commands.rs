//! Command implementations behind the thin clap layer in `main`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use candleprobe::attack::{batch_attack, AttackOutcome};
use candleprobe::config::RunConfig;
use candleprobe::gasf::encode_window;
use candleprobe::market::container::{read_dataset, write_dataset};
use candleprobe::market::csv::{parse_csv, CsvSchema};
use candleprobe::market::synth::generate_dataset;
use candleprobe::market::{slide_windows, Channel, Dataset, LabeledWindow, SplitTag};
use candleprobe::nn::{
    encode_dataset, evaluate, read_checkpoint, train as train_model, write_checkpoint,
    write_metrics_log, Arch, Checkpoint, LayerStack, TrainMeta,
};
use candleprobe::patterns::{detect_pattern, PatternLabel};
use candleprobe::render::{
    render_candles, render_figure, render_gasf, FigureSpec, Panel, PanelContent,
};

/// Errors carrying the process exit code: 1 internal, 2 bad input, 3
/// divergence.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Diverged(String),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Diverged(msg) => write!(f, "{msg}"),
            CliError::Internal(err) => write!(f, "{err}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Internal(err)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn internal(err: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError::Internal(anyhow::Error::new(err))
}

/// Defaults, then the config file, then flags.
fn resolve_config(path: Option<&Path>, overrides: impl FnOnce(&mut RunConfig)) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path)
            .map_err(|e| input_err(format!("config {}: {e}", path.display())))?;
        config.apply(&text).map_err(|e| input_err(format!("config {}: {e}", path.display())))?;
    }
    overrides(&mut config);
    config.validate().map_err(|e| input_err(e.to_string()))?;
    Ok(config)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| input_err(format!("cannot create {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<(Dataset, String)> {
    if !path.exists() {
        return Err(input_err(format!("dataset not found: {}", path.display())));
    }
    read_dataset(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(input_err(format!("checkpoint not found: {}", path.display())));
    }
    read_checkpoint(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn class_count_lines(data: &Dataset) -> String {
    let counts = data.class_counts();
    let mut out = String::new();
    for label in PatternLabel::ALL {
        out.push_str(&format!(
            "label {} ({}): {}\n",
            label.code(),
            label.name(),
            counts[label.code() as usize]
        ));
    }
    out
}

pub fn generate(
    out: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    per_label: Option<usize>,
    train_fraction: Option<f64>,
) -> Result<()> {
    let config = resolve_config(config.as_deref(), |c| {
        if let Some(seed) = seed {
            c.seed = seed;
        }
        if let Some(per_label) = per_label {
            c.per_label = per_label;
        }
        if let Some(f) = train_fraction {
            c.train_fraction = f;
        }
    })?;
    ensure_dir(&out)?;

    let dataset = generate_dataset(config.seed, config.per_label, &config.generator, &config.thresholds)
        .map_err(internal)?;
    let (train, test) =
        candleprobe::market::split(&dataset, config.train_fraction, config.seed).map_err(internal)?;

    let echo = config.to_text();
    write_dataset(&out.join("train.gafl"), &train, &echo).map_err(internal)?;
    write_dataset(&out.join("test.gafl"), &test, &echo).map_err(internal)?;

    let manifest = format!(
        "# generation manifest\n{echo}\n# class counts (before split)\n{}",
        class_count_lines(&dataset)
    );
    fs::write(out.join("manifest.txt"), manifest).map_err(internal)?;

    println!(
        "generated {} samples ({} train / {} test) into {}",
        dataset.len(),
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

pub struct IngestArgs {
    pub csv: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stride: Option<usize>,
    pub train_fraction: Option<f64>,
    pub col_timestamp: String,
    pub col_open: String,
    pub col_high: String,
    pub col_low: String,
    pub col_close: String,
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let config = resolve_config(args.config.as_deref(), |c| {
        if let Some(seed) = args.seed {
            c.seed = seed;
        }
        if let Some(stride) = args.stride {
            c.stride = stride;
        }
        if let Some(f) = args.train_fraction {
            c.train_fraction = f;
        }
    })?;
    ensure_dir(&args.out)?;

    let file = fs::File::open(&args.csv)
        .map_err(|e| input_err(format!("csv {}: {e}", args.csv.display())))?;
    let schema = CsvSchema {
        timestamp: (args.col_timestamp != "none").then(|| args.col_timestamp.clone()),
        open: args.col_open.clone(),
        high: args.col_high.clone(),
        low: args.col_low.clone(),
        close: args.col_close.clone(),
    };
    let parsed = parse_csv(std::io::BufReader::new(file), &schema)
        .map_err(|e| input_err(format!("csv {}: {e}", args.csv.display())))?;
    if !parsed.errors.is_empty() {
        eprintln!("skipped {} malformed row(s):", parsed.errors.len());
        for row in parsed.errors.iter().take(5) {
            eprintln!("  line {}: {}", row.line, row.reason);
        }
        if parsed.errors.len() > 5 {
            eprintln!("  ... and {} more", parsed.errors.len() - 5);
        }
    }

    let windows = slide_windows(&parsed.bars, config.stride)
        .map_err(|e| input_err(format!("csv {}: {e}", args.csv.display())))?;
    let samples: Vec<LabeledWindow> = windows
        .into_iter()
        .map(|window| {
            let label = detect_pattern(&window, &config.thresholds);
            LabeledWindow { window, label }
        })
        .collect();
    let dataset = Dataset { samples, split: SplitTag::All, seed: config.seed };

    let echo = config.to_text();
    write_dataset(&args.out.join("windows.gafl"), &dataset, &echo).map_err(internal)?;
    print!("{}", class_count_lines(&dataset));

    if args.train_fraction.is_some() {
        let (train, test) = candleprobe::market::split(&dataset, config.train_fraction, config.seed)
            .map_err(|e| input_err(e.to_string()))?;
        write_dataset(&args.out.join("train.gafl"), &train, &echo).map_err(internal)?;
        write_dataset(&args.out.join("test.gafl"), &test, &echo).map_err(internal)?;
        println!("split {} train / {} test", train.len(), test.len());
    }
    println!("ingested {} windows into {}", dataset.len(), args.out.display());
    Ok(())
}

pub fn train(
    data: PathBuf,
    out: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<()> {
    let config = resolve_config(config.as_deref(), |c| {
        if let Some(seed) = seed {
            c.seed = seed;
            c.train.seed = seed;
        }
        if let Some(epochs) = epochs {
            c.train.epochs = epochs;
        }
    })?;
    ensure_dir(&out)?;

    let (train_set, _) = load_dataset(&data.join("train.gafl"))?;
    let (test_set, _) = load_dataset(&data.join("test.gafl"))?;
    let train_enc = encode_dataset(&train_set).map_err(internal)?;
    let test_enc = encode_dataset(&test_set).map_err(internal)?;

    let model = LayerStack::new(Arch::default(), config.seed);
    let mut train_config = config.train;
    train_config.seed = config.seed;
    let outcome = train_model(model, &train_enc, &test_enc, &train_config).map_err(internal)?;

    let meta = TrainMeta {
        seed: config.seed,
        epochs: outcome.history.len() as u32,
        best_epoch: outcome.best_epoch as u32,
        best_valid_accuracy: outcome.best_valid_accuracy,
        final_train_loss: outcome.history.last().map(|m| m.train_loss).unwrap_or(f64::NAN),
        config_echo: config.to_text(),
        ..TrainMeta::default()
    };
    write_checkpoint(&out.join("model.gcnn"), &Checkpoint { model: outcome.model, meta })
        .map_err(internal)?;
    write_metrics_log(&out.join("metrics.log"), &outcome.history).map_err(internal)?;

    if let Some(epoch) = outcome.diverged_at {
        return Err(CliError::Diverged(format!(
            "training diverged (non-finite loss) at epoch {epoch}; last good checkpoint written to {}",
            out.join("model.gcnn").display()
        )));
    }
    println!(
        "trained {} epochs; best validation accuracy {:.4} at epoch {}; checkpoint at {}",
        outcome.history.len(),
        outcome.best_valid_accuracy,
        outcome.best_epoch,
        out.join("model.gcnn").display()
    );
    Ok(())
}

pub fn eval(checkpoint: PathBuf, data: PathBuf) -> Result<()> {
    let checkpoint = load_model(&checkpoint)?;
    let (dataset, _) = load_dataset(&data)?;
    let encoded = encode_dataset(&dataset).map_err(internal)?;
    let report = evaluate(&checkpoint.model, &encoded).map_err(internal)?;

    println!("samples: {}", report.total);
    println!("accuracy: {:.4}", report.accuracy);
    println!("class | name              | support | precision | recall");
    for metrics in &report.per_class {
        let name = PatternLabel::from_code(metrics.class as u8)
            .map(|l| l.name())
            .unwrap_or("?");
        println!(
            "{:>5} | {:<17} | {:>7} | {:>9.4} | {:>6.4}",
            metrics.class, name, metrics.support, metrics.precision, metrics.recall
        );
    }
    println!("confusion matrix (rows = actual, columns = predicted):");
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
        println!("{}", cells.join(" "));
    }
    Ok(())
}

pub struct AttackArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub render: usize,
    pub archive: bool,
    pub include_none: bool,
}

pub fn attack(args: AttackArgs) -> Result<()> {
    let config = resolve_config(args.config.as_deref(), |c| {
        if let Some(seed) = args.seed {
            c.seed = seed;
        }
        if let Some(workers) = args.workers {
            c.workers = workers;
        }
    })?;
    ensure_dir(&args.out)?;

    let checkpoint = load_model(&args.checkpoint)?;
    let (mut dataset, _) = load_dataset(&args.data)?;
    if !args.include_none {
        dataset.samples.retain(|s| s.label != PatternLabel::None);
    }
    if dataset.is_empty() {
        return Err(input_err("no samples to attack (dataset empty after filtering)"));
    }

    let mut attack_config = config.attack;
    attack_config.seed = config.seed;
    let (report, outcomes) =
        batch_attack(&checkpoint.model, &dataset, &attack_config, config.workers)
            .map_err(internal)?;

    for label in report.empty_labels() {
        eprintln!("warning: label {label} had no correctly-classified samples; omitted from ratios");
    }

    let echo = config.to_text();
    let provenance: String = echo.lines().map(|l| format!("# {l}\n")).collect();
    let table = report.to_table_text();
    fs::write(args.out.join("report.txt"), format!("{provenance}{table}")).map_err(internal)?;
    fs::write(args.out.join("report.csv"), format!("{provenance}{}", report.to_csv()))
        .map_err(internal)?;
    print!("{table}");

    if args.render > 0 {
        let figures = args.out.join("figures");
        ensure_dir(&figures)?;
        render_outcome_figures(&figures, &dataset, &outcomes, args.render, &echo)?;
    }
    if args.archive {
        let archive = args.out.join("outcomes");
        ensure_dir(&archive)?;
        write_outcome_archive(&archive, &dataset, &outcomes)?;
    }
    println!("report written to {}", args.out.join("report.txt").display());
    Ok(())
}

fn label_name(code: usize) -> &'static str {
    PatternLabel::from_code(code as u8).map(|l| l.name()).unwrap_or("?")
}

fn render_outcome_figures(
    dir: &Path,
    dataset: &Dataset,
    outcomes: &[Option<AttackOutcome>],
    per_label: usize,
    echo: &str,
) -> Result<()> {
    let mut rendered = [0usize; 9];
    for (sample, outcome) in dataset.samples.iter().zip(outcomes) {
        let Some(outcome) = outcome else { continue };
        let Some(adv) = &outcome.adversarial else { continue };
        let label = sample.label.code() as usize;
        if rendered[label] >= per_label {
            continue;
        }
        let ordinal = rendered[label];
        rendered[label] += 1;

        let original_title = format!(
            "original: {} p={:.3}",
            label_name(label),
            outcome.original.confidence
        );
        let attacked_title =
            format!("attacked: {} p={:.3}", label_name(adv.predicted), adv.confidence);

        let candles = render_figure(&FigureSpec {
            left: Panel {
                content: PanelContent::Candles(&outcome.original.window),
                title: original_title.clone(),
            },
            right: Panel { content: PanelContent::Candles(&adv.window), title: attacked_title.clone() },
            provenance: echo.to_string(),
        });
        fs::write(dir.join(format!("label{label}_{ordinal}_candles.svg")), candles)
            .map_err(internal)?;

        let heatmaps = render_figure(&FigureSpec {
            left: Panel {
                content: PanelContent::Heatmap(&outcome.original.tensor, Channel::Close),
                title: original_title,
            },
            right: Panel {
                content: PanelContent::Heatmap(&adv.tensor, Channel::Close),
                title: attacked_title,
            },
            provenance: echo.to_string(),
        });
        fs::write(dir.join(format!("label{label}_{ordinal}_gasf.svg")), heatmaps)
            .map_err(internal)?;
    }
    Ok(())
}

fn write_outcome_archive(
    dir: &Path,
    dataset: &Dataset,
    outcomes: &[Option<AttackOutcome>],
) -> Result<()> {
    for (index, (sample, outcome)) in dataset.samples.iter().zip(outcomes).enumerate() {
        let Some(outcome) = outcome else { continue };
        let mut record = String::new();
        record.push_str(&format!(
            "label = {} ({})\nsuccess = {}\nepisodes_used = {}\noriginal_confidence = {:.6}\n",
            sample.label.code(),
            sample.label.name(),
            outcome.success,
            outcome.episodes_used,
            outcome.original.confidence
        ));
        record.push_str("[original bars: open high low close]\n");
        for bar in outcome.original.window.bars() {
            record.push_str(&format!("{} {} {} {}\n", bar.open, bar.high, bar.low, bar.close));
        }
        if let Some(adv) = &outcome.adversarial {
            record.push_str(&format!(
                "[adversarial bars: open high low close] predicted = {} ({}) confidence = {:.6}\n",
                adv.predicted,
                label_name(adv.predicted),
                adv.confidence
            ));
            for bar in adv.window.bars() {
                record.push_str(&format!("{} {} {} {}\n", bar.open, bar.high, bar.low, bar.close));
            }
        }
        record.push_str("[trace: episode reset predicted confidence]\n");
        for ep in &outcome.trace {
            record.push_str(&format!(
                "{} {} {} {:.6}\n",
                ep.episode, ep.reset, ep.predicted, ep.confidence
            ));
        }
        fs::write(
            dir.join(format!("label{}_{index}.txt", sample.label.code())),
            record,
        )
        .map_err(internal)?;
    }
    Ok(())
}

pub fn render(data: PathBuf, index: usize, out: PathBuf, channel: String) -> Result<()> {
    let channel: Channel = channel
        .parse()
        .map_err(|e: String| input_err(e))?;
    let (dataset, _) = load_dataset(&data)?;
    let sample = dataset
        .samples
        .get(index)
        .ok_or_else(|| input_err(format!("index {index} out of range (dataset has {} samples)", dataset.len())))?;
    ensure_dir(&out)?;

    let annotation = format!("label: {}", sample.label.name());
    let candles = render_candles(&sample.window, &annotation);
    fs::write(out.join(format!("sample{index}_candles.svg")), candles).map_err(internal)?;

    let tensor = encode_window(&sample.window).map_err(internal)?;
    let heatmap = render_gasf(&tensor, channel, &annotation);
    fs::write(out.join(format!("sample{index}_gasf_{}.svg", channel.name())), heatmap)
        .map_err(internal)?;
    println!("rendered sample {index} into {}", out.display());
    Ok(())
}
