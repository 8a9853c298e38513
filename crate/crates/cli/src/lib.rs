//! The `rrl` command line: `train`, `cv`, `eval` and `explain`.
//!
//! Exit codes: 0 on success, 2 for usage or contract errors (bad flags,
//! missing or malformed files, schema mismatches), 3 for numeric failures
//! during computation.

pub mod args;
pub mod pipeline;
pub mod settings;

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use rrl_core::data::{confusion_matrix, load_dataset, macro_f1, Dataset, FeatureSchema};
use rrl_core::model::RrlModel;
use rrl_core::numerics::Rng;
use rrl_core::persist::ModelFile;
use rrl_core::rules::{extract, render, weight_distribution, ExtractOptions, RuleSet};
use rrl_core::trainer::EpochRecord;
use rrl_core::RrlError;
use thiserror::Error;

use crate::args::{Cli, Command, CvArgs, EvalArgs, ExplainArgs, TrainArgs};
use crate::pipeline::{cross_validate, train_run, CvResult};
use crate::settings::Settings;

pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";
pub const VALIDATION_REPORT_FILE: &str = "validation_report.txt";
pub const MODEL_FILE: &str = "model.json";
pub const CV_REPORT_FILE: &str = "cv_report.csv";
pub const EVAL_REPORT_FILE: &str = "eval_report.txt";
pub const RULES_TEXT_FILE: &str = "rules.txt";
pub const RULES_JSON_FILE: &str = "rules.json";
pub const WEIGHT_CSV_FILE: &str = "weight_distribution.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] RrlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_contract_violation() => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Cv(a) => cmd_cv(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Explain(a) => cmd_explain(&a),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let settings = Settings::for_data_file(&a.data.data).apply(&a.hyper, a.seed)?;
    let ds = load_dataset(&a.data.data, &a.data.schema)?;
    create_dir(&a.out_dir)?;
    let model_path = a.model.clone().unwrap_or_else(|| a.out_dir.join(MODEL_FILE));

    let run = train_run(&ds, &settings, &Rng::new(a.seed), |r| {
        if (r.epoch + 1) % 50 == 0 {
            eprintln!("epoch {:>4}: discrete loss {:.4}", r.epoch + 1, r.discrete_loss);
        }
    })?;
    let file = ModelFile::new(run.fit.model.clone(), settings.model, settings.train, run.fit.best_epoch);
    file.save(&model_path)?;
    write_file(&a.out_dir.join(LOSS_HISTORY_FILE), &loss_history_csv(&run.fit.history))?;

    let model = &run.fit.model;
    let mut report = String::new();
    let _ = writeln!(report, "# Training report");
    let _ = writeln!(report, "seed: {}", a.seed);
    let _ = writeln!(report, "best epoch: {} of {}", run.fit.best_epoch, run.fit.history.len());
    let _ = writeln!(report, "edges: {}", run.ruleset.edge_count);
    let _ = writeln!(report);
    let _ = writeln!(report, "{:<12} {:>6}  macro_f1", "split", "rows");
    for (name, part) in [("train", &run.train), ("validation", &run.valid), ("all", &ds)] {
        let f1 = macro_f1(part.classes(), &model.predict(part)?, ds.class_count())?;
        let _ = writeln!(report, "{name:<12} {:>6}  {f1}", part.len());
    }
    let _ = writeln!(report);
    let _ = writeln!(report, "confusion matrix (validation; rows are true classes)");
    report.push_str(&confusion_table(model, &run.valid)?);
    write_file(&a.out_dir.join(VALIDATION_REPORT_FILE), &report)?;
    print!("{report}");
    Ok(())
}

pub fn loss_history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,discrete_loss,continuous_loss,valid_macro_f1\n");
    for r in history {
        let f1 = r.valid_macro_f1.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{f1}", r.epoch, r.discrete_loss, r.continuous_loss);
    }
    out
}

fn confusion_table(model: &RrlModel, ds: &Dataset) -> Result<String, CliError> {
    let m = ds.class_count();
    let cm = confusion_matrix(ds.classes(), &model.predict(ds)?, m)?;
    let names = ds.schema().class_names();
    let width = names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(6);
    let mut out = format!("{:width$}", "");
    for n in names {
        let _ = write!(out, " {n:>width$}");
    }
    out.push('\n');
    for (name, row) in names.iter().zip(&cm) {
        let _ = write!(out, "{name:width$}");
        for c in row {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_cv(a: &CvArgs) -> Result<(), CliError> {
    let settings = Settings::for_data_file(&a.data.data).apply(&a.hyper, a.seed)?;
    if a.folds < 2 {
        return Err(CliError::Usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    let ds = load_dataset(&a.data.data, &a.data.schema)?;
    create_dir(&a.out_dir)?;
    let cv = cross_validate(&ds, &settings, a.folds, a.seed, |f| {
        eprintln!("fold {}: macro-F1 {:.4}, {} edges", f.fold, f.macro_f1, f.edges);
    })?;
    let report = cv_report_csv(&cv);
    write_file(&a.out_dir.join(CV_REPORT_FILE), &report)?;
    println!(
        "macro-F1 {:.4} ± {:.4} over {} folds, mean log(#edges) {:.3}",
        cv.mean_f1(),
        cv.std_f1(),
        cv.folds.len(),
        cv.mean_log_edges()
    );
    Ok(())
}

/// One row per fold, then a `summary` row holding the mean macro-F1, its
/// standard deviation, the mean edge count and the mean log edge count.
pub fn cv_report_csv(cv: &CvResult) -> String {
    let mut out = String::from("fold,train_rows,test_rows,macro_f1,macro_f1_std,edges,log_edges,best_epoch\n");
    for f in &cv.folds {
        let _ = writeln!(
            out,
            "{},{},{},{},,{},{},{}",
            f.fold,
            f.train_size,
            f.test_indices.len(),
            f.macro_f1,
            f.edges,
            f.log_edges(),
            f.best_epoch
        );
    }
    let mean_edges = cv.folds.iter().map(|f| f.edges as f64).sum::<f64>() / cv.folds.len().max(1) as f64;
    let _ = writeln!(
        out,
        "summary,,,{},{},{mean_edges},{},",
        cv.mean_f1(),
        cv.std_f1(),
        cv.mean_log_edges()
    );
    out
}

/// Loads `data` with the model's schema, after checking that an explicitly
/// given schema matches it.
fn load_for_model(model: &RrlModel, data: &Path, schema: Option<&Path>) -> Result<Dataset, CliError> {
    if let Some(path) = schema {
        let given = FeatureSchema::load(path)?;
        if given != model.schema {
            return Err(CliError::Usage(format!(
                "{}: schema does not match the one the model was trained with",
                path.display()
            )));
        }
    }
    let file = File::open(data).map_err(io_err(data))?;
    let ds = Dataset::from_csv_reader(std::io::BufReader::new(file), model.schema.clone())
        .map_err(|e| RrlError::Data(format!("{}: {e}", data.display())))?;
    Ok(ds)
}

/// Number of rows on which the rule set and the model predict the same class.
fn agreement(model: &RrlModel, ruleset: &RuleSet, ds: &Dataset) -> Result<usize, CliError> {
    let u0 = model.encode(ds)?;
    let a = model.predict_encoded(&u0)?;
    let b = ruleset.predict_encoded(&u0)?;
    Ok(a.iter().zip(&b).filter(|(x, y)| x == y).count())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&a.model)?;
    let model = &file.model;
    let ds = load_for_model(model, &a.data, a.schema.as_deref())?;
    let ruleset = extract(model, &ExtractOptions::default())?;
    let pred = model.predict(&ds)?;
    let f1 = macro_f1(ds.classes(), &pred, ds.class_count())?;

    let mut report = String::new();
    let _ = writeln!(report, "# Evaluation report");
    let _ = writeln!(report, "rows: {}", ds.len());
    let _ = writeln!(report, "macro_f1: {f1}");
    let _ = writeln!(report, "edges: {}", ruleset.edge_count);
    let _ = writeln!(report, "rule set agreement: {}/{}", agreement(model, &ruleset, &ds)?, ds.len());
    let _ = writeln!(report);
    let _ = writeln!(report, "confusion matrix (rows are true classes)");
    report.push_str(&confusion_table(model, &ds)?);
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        write_file(&dir.join(EVAL_REPORT_FILE), &report)?;
    }
    print!("{report}");
    Ok(())
}

pub fn weight_csv(ruleset: &RuleSet) -> String {
    let mut out = String::from("rule,normalized_weight\n");
    for (i, w) in weight_distribution(ruleset) {
        let _ = writeln!(out, "{i},{w}");
    }
    out
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&a.model)?;
    let model = &file.model;
    let ds = match &a.data {
        Some(data) => Some(load_for_model(model, data, a.schema.as_deref())?),
        None => None,
    };
    let ruleset = extract(model, &ExtractOptions::default())?;
    create_dir(&a.out_dir)?;
    let doc = render(&ruleset);
    write_file(&a.out_dir.join(RULES_TEXT_FILE), &doc)?;
    write_file(&a.out_dir.join(RULES_JSON_FILE), &ruleset.to_json()?)?;
    write_file(&a.out_dir.join(WEIGHT_CSV_FILE), &weight_csv(&ruleset))?;
    print!("{doc}");
    if let Some(ds) = ds {
        println!();
        println!("rule set agreement: {}/{}", agreement(model, &ruleset, &ds)?, ds.len());
    }
    Ok(())
}
