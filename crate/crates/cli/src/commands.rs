use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ensemblefuse::ensemble::{
    de_optimize, fuse, is_on_simplex, parse_weight_list, project_to_simplex, DEConfig,
};
use ensemblefuse::losses::{combined_loss, compute_prevalence, LossConfig};
use ensemblefuse::metrics::{evaluate, roc_curve, AucReport};
use ensemblefuse::model_io::{
    read_features, read_labels, read_predictions, write_features, write_labels, write_predictions,
    LabelMatrix, PredictionMatrix,
};
use ensemblefuse::synthlab::{
    generate, simulate_models, split, train_toy, SplitFractions, SynthConfig, ToyTrainConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{
    Cli, CliError, Command, EvaluateArgs, FuseArgs, LossArgs, OptimizeArgs, RocArgs, SynthArgs,
    TrainArgs, SEED_ENV,
};

type CmdResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Fuse(args) => cmd_fuse(&args),
        Command::Loss(args) => cmd_loss(&args),
        Command::Roc(args) => cmd_roc(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args),
    }
}

fn with_path(path: &Path) -> impl Fn(ensemblefuse::Error) -> CliError + '_ {
    move |err| {
        let mut e = CliError::from(err);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    }
}

fn load_predictions(path: &Path) -> Result<PredictionMatrix, CliError> {
    read_predictions(path).map_err(with_path(path))
}

fn load_labels(path: &Path) -> Result<LabelMatrix, CliError> {
    read_labels(path).map_err(with_path(path))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CmdResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn save<T>(
    writer: impl Fn(&T, &Path) -> ensemblefuse::Result<()>,
    value: &T,
    path: &Path,
) -> CmdResult {
    writer(value, path).map_err(with_path(path))
}

fn print_report(report: &AucReport) {
    let mut names: Vec<&str> = report.classes.iter().collect();
    names.push("Mean");
    let mut values: Vec<String> = report
        .per_class
        .iter()
        .map(|v| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}")))
        .collect();
    values.push(format!("{:.4}", report.mean));
    let widths: Vec<usize> = names.iter().map(|n| n.len().max(6)).collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "{}", line(&header));
    let _ = writeln!(out, "{}", line(&values));
}

// Writes to stdout, ignoring a closed pipe (e.g. `| head`).
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn note_undefined(report: &AucReport) {
    for name in report.undefined() {
        eprintln!("note: AUC undefined for class {name:?} (no positives or no negatives); excluded from mean");
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let preds = load_predictions(&args.pred)?;
    let labels = load_labels(&args.labels)?;
    let report = evaluate(&preds, &labels)?;
    note_undefined(&report);
    print_report(&report);
    write_json(&report, &args.out)
}

fn cmd_optimize(args: &OptimizeArgs) -> CmdResult {
    if args.pred.len() < 2 {
        return Err(CliError::validation(format!(
            "optimize needs at least 2 prediction files, got {}",
            args.pred.len()
        )));
    }
    let preds = args
        .pred
        .iter()
        .map(|p| load_predictions(p))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = load_labels(&args.labels)?;
    let k = preds.len();
    let defaults = DEConfig::for_models(k, args.seed);
    let cfg = DEConfig {
        population_size: args.pop.unwrap_or(defaults.population_size),
        mutation: args.mutation,
        crossover: args.crossover,
        max_generations: args.max_generations,
        stall_generations: args.stall,
        seed: args.seed,
    };
    let result = de_optimize(&preds, &labels, &cfg)?;

    let mut best_single = f64::NEG_INFINITY;
    for (path, p) in args.pred.iter().zip(&preds) {
        let mean = evaluate(p, &labels)?.mean;
        eprintln!("model {}: mean AUC {mean:.6}", path.display());
        best_single = best_single.max(mean);
    }
    let holds = result.objective >= best_single - 1e-12;
    eprintln!(
        "ensemble mean AUC {:.6} after {} generations; best single model {:.6}; seeded-population guarantee {}",
        result.objective,
        result.generations_run,
        best_single,
        if holds { "holds" } else { "VIOLATED" }
    );
    if !holds {
        return Err(CliError::runtime(
            "ensemble scored below the best single model",
        ));
    }
    write_json(&result, &args.out)
}

fn cmd_fuse(args: &FuseArgs) -> CmdResult {
    let raw = parse_weight_list(&args.weights)?;
    if raw.len() != args.pred.len() {
        return Err(CliError::validation(format!(
            "{} weights given for {} prediction files",
            raw.len(),
            args.pred.len()
        )));
    }
    let weights = project_to_simplex(&raw);
    if !is_on_simplex(&raw) {
        eprintln!(
            "warning: weights {:?} are not on the simplex; projected to {:?}",
            raw,
            weights.as_slice()
        );
    }
    let preds = args
        .pred
        .iter()
        .map(|p| load_predictions(p))
        .collect::<Result<Vec<_>, _>>()?;
    let fused = fuse(&preds, &weights)?;
    save(|m, p| write_predictions(m, p), &fused, &args.out)
}

#[derive(Serialize)]
struct LossOutput {
    loss: f64,
    config: LossConfig,
}

fn cmd_loss(args: &LossArgs) -> CmdResult {
    let cfg = LossConfig {
        gamma_pos: args.gamma_pos,
        gamma_neg: args.gamma_neg,
        margin: args.margin,
        use_class_weights: args.weighted,
        prob_clamp_epsilon: args.epsilon,
    };
    cfg.validate()?;
    let preds = load_predictions(&args.pred)?;
    let labels = load_labels(&args.labels)?;
    let prevalence = compute_prevalence(&labels);
    let loss = combined_loss(&preds, &labels, &prevalence, &cfg)?;
    let output = LossOutput { loss, config: cfg };
    let text =
        serde_json::to_string_pretty(&output).map_err(|e| CliError::runtime(e.to_string()))?;
    say(&text);
    if let Some(out) = &args.out {
        write_json(&output, out)?;
    }
    Ok(())
}

fn cmd_roc(args: &RocArgs) -> CmdResult {
    let preds = load_predictions(&args.pred)?;
    let labels = load_labels(&args.labels)?;
    ensemblefuse::model_io::align(std::slice::from_ref(&preds), &labels)?;
    let j = labels.classes().position(&args.class).ok_or_else(|| {
        CliError::from(ensemblefuse::Error::UnknownClass {
            name: args.class.clone(),
            available: labels.classes().names().to_vec(),
        })
    })?;
    let roc = roc_curve(&preds.column(j), &labels.column(j), &args.class)?;
    let file = fs::File::create(&args.out)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.out.display())))?;
    roc.write_csv(BufWriter::new(file))
        .map_err(with_path(&args.out))
}

fn parse_split(text: &str) -> Result<SplitFractions, CliError> {
    let parts = parse_weight_list(text)
        .map_err(|_| CliError::validation(format!("--split {text:?}: expected train,test,val")))?;
    let [train, test, val] = parts[..] else {
        return Err(CliError::validation(format!(
            "--split {text:?}: expected three fractions"
        )));
    };
    let fractions = SplitFractions { train, test, val };
    fractions.validate()?;
    Ok(fractions)
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| {
            CliError::validation(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(None),
    }
}

fn read_config(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Default::default()));
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn has_key(value: &Value, section: &str, key: &str) -> bool {
    value.get(section).and_then(|s| s.get(key)).is_some()
}

/// Contents of a `synth --config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFile {
    synth: SynthConfig,
    split: SplitFractions,
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    config: &'a SynthConfig,
    split_fractions: &'a SplitFractions,
    classes: &'a [String],
    positives: Vec<usize>,
    model_files: Vec<String>,
    warnings: &'a [String],
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let raw = read_config(args.config.as_deref())?;
    let mut file: SynthFile = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::validation(format!("synth config: {e}")))?;
    if let Some(seed) = args.seed {
        file.synth.seed = seed;
    } else if !has_key(&raw, "synth", "seed") {
        if let Some(seed) = env_seed()? {
            file.synth.seed = seed;
        }
    }
    if let Some(text) = &args.split {
        file.split = parse_split(text)?;
    }
    file.split.validate()?;

    let cfg = &file.synth;
    let data = generate(cfg)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    let models = simulate_models(&data, cfg)?;
    let parts = split(cfg.n_samples, &file.split, cfg.seed)?;

    let out = &args.out;
    create_dir(out)?;
    save(
        |m, p| write_features(m, p),
        &data.features,
        &out.join("features.csv"),
    )?;
    save(
        |m, p| write_labels(m, p),
        &data.labels,
        &out.join("labels.csv"),
    )?;
    let mut model_files = Vec::new();
    for (k, model) in models.iter().enumerate() {
        let name = format!("model_{}.csv", k + 1);
        save(|m, p| write_predictions(m, p), model, &out.join(&name))?;
        for (part, rows) in [("val", &parts.val), ("test", &parts.test)] {
            let subset = model.select_rows(rows)?;
            save(
                |m, p| write_predictions(m, p),
                &subset,
                &out.join(format!("{part}_{name}")),
            )?;
        }
        model_files.push(name);
    }
    for (part, rows) in [
        ("train", &parts.train),
        ("val", &parts.val),
        ("test", &parts.test),
    ] {
        let subset = data.labels.select_rows(rows)?;
        save(
            |m, p| write_labels(m, p),
            &subset,
            &out.join(format!("{part}_labels.csv")),
        )?;
    }
    write_json(&parts, &out.join("split.json"))?;
    let positives = (0..data.labels.n_classes())
        .map(|j| data.labels.column(j).iter().filter(|&&y| y == 1).count())
        .collect();
    let summary = SynthSummary {
        config: cfg,
        split_fractions: &file.split,
        classes: data.labels.classes().names(),
        positives,
        model_files,
        warnings: &data.warnings,
    };
    write_json(&summary, &out.join("summary.json"))?;
    say(&format!(
        "wrote {} samples x {} classes and {} simulated models to {}",
        cfg.n_samples,
        data.labels.n_classes(),
        models.len(),
        out.display()
    ));
    Ok(())
}

/// Contents of a `train --config` file. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    features: Option<PathBuf>,
    labels: Option<PathBuf>,
    loss: LossConfig,
    train: ToyTrainConfig,
}

#[derive(Serialize)]
struct HistoryOutput<'a> {
    best_epoch: usize,
    epochs_run: usize,
    loss: &'a LossConfig,
    train: &'a ToyTrainConfig,
    prevalence: &'a [f64],
    history: &'a [ensemblefuse::synthlab::EpochRecord],
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let raw = read_config(args.config.as_deref())?;
    let mut file: TrainFile = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::validation(format!("train config: {e}")))?;
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let features_path = args
        .features
        .clone()
        .or_else(|| file.features.as_ref().map(|p| base.join(p)))
        .ok_or_else(|| {
            CliError::validation("no feature file (use --features or config \"features\")")
        })?;
    let labels_path = args
        .labels
        .clone()
        .or_else(|| file.labels.as_ref().map(|p| base.join(p)))
        .ok_or_else(|| CliError::validation("no label file (use --labels or config \"labels\")"))?;
    if let Some(seed) = args.seed {
        file.train.seed = seed;
    } else if !has_key(&raw, "train", "seed") {
        if let Some(seed) = env_seed()? {
            file.train.seed = seed;
        }
    }
    if let Some(text) = &args.split {
        file.train.split = parse_split(text)?;
    }

    let features = read_features(&features_path).map_err(with_path(&features_path))?;
    let labels = load_labels(&labels_path)?;
    let outcome = train_toy(&features, &labels, &file.loss, &file.train)?;

    let out = &args.out;
    create_dir(out)?;
    write_json(&outcome.model, &out.join("model.json"))?;
    write_json(
        &HistoryOutput {
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
            loss: &file.loss,
            train: &file.train,
            prevalence: &outcome.prevalence.rho,
            history: &outcome.history,
        },
        &out.join("history.json"),
    )?;
    write_json(&outcome.split, &out.join("split.json"))?;
    for (part, rows) in [("val", &outcome.split.val), ("test", &outcome.split.test)] {
        let preds = outcome.model.predict(&features.select_rows(rows)?)?;
        save(
            |m, p| write_predictions(m, p),
            &preds,
            &out.join(format!("{part}_predictions.csv")),
        )?;
        let subset = labels.select_rows(rows)?;
        save(
            |m, p| write_labels(m, p),
            &subset,
            &out.join(format!("{part}_labels.csv")),
        )?;
    }
    let best = outcome.history[outcome.best_epoch - 1];
    say(&format!(
        "trained {} epochs; best epoch {} with validation mean AUC {:.4}",
        outcome.history.len(),
        outcome.best_epoch,
        best.val_mean_auc
    ));
    Ok(())
}
