use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use arat_core::error::Result;
use arat_core::eval::{grid_csv, grid_search, run_cv, truncation_comparison, ConfusionMatrix, CvOptions, CvReport};
use arat_core::ingest::{balance_junk, load_dataset, truncate_longest, write_atomic, write_dataset};
use arat_core::preprocess::{apply_config, enumerate_grid, parse_config_list, FilterSweep, Phase};
use arat_core::rocket::RocketModel;
use arat_core::synth::{generate, SynthSpec};
use arat_core::{Dataset, Error, FittedPipeline, LabelTaxonomy, PreprocessConfig};
use serde_json::{json, Value};

use crate::{ConfigArgs, DataArgs, GridArgs, ModelArgs, ReportArgs, RunArgs, SynthArgs, TransformArgs, TruncateArgs};

const METADATA_FILE: &str = "run_metadata.json";

fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let taxonomy = match &data.taxonomy {
        Some(p) => LabelTaxonomy::load(p)?,
        None => LabelTaxonomy::default(),
    };
    let ds = load_dataset(&data.manifest, &taxonomy)?;
    if data.balance_junk {
        balance_junk(&ds, data.seed)
    } else {
        Ok(ds)
    }
}

fn resolve_config(args: &ConfigArgs) -> Result<PreprocessConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            PreprocessConfig::from_kv_str(&text)?
        }
        None => PreprocessConfig::default(),
    };
    let overrides = [
        ("padding", &args.padding),
        ("filter_acc_hz", &args.filter_acc_hz),
        ("filter_gyr_hz", &args.filter_gyr_hz),
        ("free_acceleration", &args.free_acceleration),
        ("free_angular_velocity", &args.free_angular_velocity),
        ("noise_std_acc", &args.noise_std_acc),
        ("noise_std_gyr", &args.noise_std_gyr),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn cv_options(model: &ModelArgs, seed: u64) -> CvOptions {
    CvOptions {
        k: model.folds,
        seed,
        num_features: model.features,
        channels: model.channels,
        stratified: model.stratified,
        ..Default::default()
    }
}

fn dataset_summary(ds: &Dataset) -> Value {
    let counts: serde_json::Map<String, Value> = ds
        .class_counts()
        .into_iter()
        .map(|(l, c)| (l.to_string(), json!(c)))
        .collect();
    json!({
        "sequences": ds.len(),
        "max_len": ds.max_len(),
        "channels": ds.channels().iter().map(|c| c.name()).collect::<Vec<_>>(),
        "class_counts": counts,
    })
}

/// Collects what every run records next to its outputs.
struct Metadata {
    command: &'static str,
    argv: Vec<String>,
    started: Instant,
    fields: serde_json::Map<String, Value>,
}

impl Metadata {
    fn new(command: &'static str, argv: &[String]) -> Self {
        Metadata {
            command,
            argv: argv.to_vec(),
            started: Instant::now(),
            fields: serde_json::Map::new(),
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.to_string(), value);
    }

    fn run(&mut self, data: &DataArgs, cfg: Option<&PreprocessConfig>, model: Option<&ModelArgs>) {
        self.set("seed", json!(data.seed));
        self.set("manifest", json!(data.manifest.display().to_string()));
        self.set("balance_junk", json!(data.balance_junk));
        if let Some(cfg) = cfg {
            self.set("config", json!(cfg));
        }
        if let Some(m) = model {
            self.set("channels", json!(m.channels.as_str()));
            self.set("folds", json!(m.folds));
            self.set("features", json!(m.features));
            self.set("stratified", json!(m.stratified));
        }
    }

    fn write(mut self, dir: &Path, outputs: &[&str]) -> Result<()> {
        self.set("command", json!(self.command));
        self.set("argv", json!(self.argv));
        self.set(
            "versions",
            json!({ "arat": env!("CARGO_PKG_VERSION"), "format": 1 }),
        );
        self.set("outputs", json!(outputs));
        self.set(
            "timings",
            json!({ "total_seconds": self.started.elapsed().as_secs_f64() }),
        );
        write_json(&dir.join(METADATA_FILE), &Value::Object(self.fields))
    }
}

pub fn validate(args: &DataArgs, argv: &[String]) -> Result<()> {
    let mut meta = Metadata::new("validate", argv);
    let ds = load(args)?;
    println!(
        "ok: {} sequences, {} labels, max length {}",
        ds.len(),
        ds.class_counts().len(),
        ds.max_len()
    );
    for (label, count) in ds.class_counts() {
        println!("  {label}: {count}");
    }
    if let Some(dir) = &args.out {
        meta.run(args, None, None);
        meta.set("dataset", dataset_summary(&ds));
        meta.write(dir, &[])?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs, argv: &[String]) -> Result<()> {
    let mut meta = Metadata::new("synth", argv);
    let base = if args.heavy_tail {
        SynthSpec::heavy_tail()
    } else {
        SynthSpec::default()
    };
    let spec = SynthSpec {
        num_classes: args.classes,
        sequences_per_class: args.per_class,
        median_len: args.median_len.unwrap_or(base.median_len),
        length_sigma: args.length_sigma.unwrap_or(base.length_sigma),
        max_len: args.max_len.unwrap_or(base.max_len),
        noise_floor: args.noise_floor,
        hard: args.hard,
        junk_sequences: args.junk,
        seed: args.seed,
        ..base
    };
    let ds = generate(&spec)?;
    let manifest = write_dataset(&ds, &args.out)?;
    println!("wrote {} sequences to {}", ds.len(), manifest.display());
    meta.set("seed", json!(args.seed));
    meta.set("spec", json!(spec));
    meta.set("dataset", dataset_summary(&ds));
    meta.write(&args.out, &["manifest.csv", "sequences/"])
}

fn features_csv(ids: &[String], labels: &[String], cols: usize, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from("sequence_id,label");
    for j in 0..cols {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for ((id, label), row) in ids.iter().zip(labels).zip(rows) {
        out.push_str(id);
        out.push(',');
        out.push_str(label);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn transform(args: &TransformArgs, argv: &[String]) -> Result<()> {
    let run = &args.run;
    let mut meta = Metadata::new("transform", argv);
    let dir = out_dir(&run.data.out);
    let ds = load(&run.data)?;
    let mut outputs = vec!["features.csv"];
    let (prepared, features, predictions) = match &args.model {
        Some(model_dir) => {
            let p = FittedPipeline::load(model_dir)?;
            let prepared = p.prepare(ds.sequences())?;
            let features = p.features(&prepared.tensor)?;
            let predictions = p.predict_tensor(&prepared.tensor)?;
            meta.set("model", json!(model_dir.display().to_string()));
            meta.set("config", json!(p.config));
            (prepared, features, Some(predictions))
        }
        None => {
            let cfg = resolve_config(&run.config)?;
            let prepared = apply_config(
                ds.sequences(),
                &cfg,
                Phase::Eval,
                run.model.channels.roles(),
                None,
                run.data.seed,
            )?;
            let rocket = RocketModel::fit(&prepared.tensor, run.model.features, run.data.seed)?;
            let features = rocket.transform(&prepared.tensor)?;
            write_text(&dir.join("rocket.json"), &rocket.to_json()?)?;
            outputs.push("rocket.json");
            meta.run(&run.data, Some(&cfg), Some(&run.model));
            (prepared, features, None)
        }
    };
    let labels: Vec<String> = prepared.labels.iter().map(|l| l.to_string()).collect();
    let shape = features.dim();
    let csv = features_csv(&prepared.ids, &labels, shape.1, features.outer_iter().map(|r| r.to_vec()));
    write_text(&dir.join("features.csv"), &csv)?;
    if let Some(pred) = predictions {
        let mut text = String::from("sequence_id,label,predicted\n");
        for ((id, l), p) in prepared.ids.iter().zip(&labels).zip(&pred) {
            let _ = writeln!(text, "{id},{l},{p}");
        }
        write_text(&dir.join("predictions.csv"), &text)?;
        outputs.push("predictions.csv");
        let correct = labels.iter().zip(&pred).filter(|(l, p)| l.as_str() == p.as_str()).count();
        println!("accuracy against manifest labels: {:.4}", correct as f64 / labels.len() as f64);
    }
    println!("wrote {} × {} features to {}", shape.0, shape.1, dir.join("features.csv").display());
    meta.set("padded_length", json!(prepared.target_len));
    meta.write(&dir, &outputs)
}

pub fn fit(args: &RunArgs, argv: &[String]) -> Result<()> {
    let mut meta = Metadata::new("fit", argv);
    let dir = out_dir(&args.data.out);
    let ds = load(&args.data)?;
    let cfg = resolve_config(&args.config)?;
    let spec = cv_options(&args.model, args.data.seed).pipeline_spec(&cfg);
    let pipeline = FittedPipeline::fit(ds.sequences(), &spec)?;
    pipeline.save(&dir)?;
    println!(
        "fitted on {} sequences: padded length {}, lambda {}",
        ds.len(),
        pipeline.target_len,
        pipeline.ridge.lambda
    );
    meta.run(&args.data, Some(&cfg), Some(&args.model));
    meta.set("dataset", dataset_summary(&ds));
    meta.set("lambda", json!(pipeline.ridge.lambda));
    meta.set("padded_length", json!(pipeline.target_len));
    meta.write(&dir, &["rocket.json", "classifier.json"])
}

fn folds_csv(report: &CvReport) -> String {
    let mut out = String::from("fold,train_size,eval_size,accuracy,domain_accuracy,lambda,padded_length,seconds\n");
    for (f, secs) in report.folds.iter().zip(&report.timing.fold_seconds) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3}",
            f.fold, f.train_size, f.eval_size, f.accuracy, f.domain_accuracy, f.lambda, f.padded_length, secs
        );
    }
    out
}

const CV_OUTPUTS: [&str; 6] = [
    "cv_report.json",
    "item_confusion.csv",
    "item_confusion.txt",
    "domain_confusion.csv",
    "domain_confusion.txt",
    "folds.csv",
];

fn write_confusions(dir: &Path, report: &CvReport, percent: bool) -> Result<()> {
    write_text(&dir.join("item_confusion.csv"), &report.item_confusion.to_csv())?;
    write_text(&dir.join("item_confusion.txt"), &report.item_confusion.render_text(percent))?;
    write_text(&dir.join("domain_confusion.csv"), &report.domain_confusion.to_csv())?;
    write_text(&dir.join("domain_confusion.txt"), &report.domain_confusion.render_text(percent))
}

fn write_cv_outputs(dir: &Path, report: &CvReport) -> Result<()> {
    let mut json = report.to_json()?;
    json.push('\n');
    write_text(&dir.join("cv_report.json"), &json)?;
    write_confusions(dir, report, false)?;
    write_text(&dir.join("folds.csv"), &folds_csv(report))
}

pub fn cv(args: &RunArgs, argv: &[String]) -> Result<()> {
    let mut meta = Metadata::new("cv", argv);
    let dir = out_dir(&args.data.out);
    let ds = load(&args.data)?;
    let cfg = resolve_config(&args.config)?;
    let report = run_cv(&ds, &cfg, &cv_options(&args.model, args.data.seed))?;
    write_cv_outputs(&dir, &report)?;
    println!("mean accuracy: {:.4}", report.mean_accuracy);
    println!("mean domain accuracy: {:.4}", report.mean_domain_accuracy);
    meta.run(&args.data, Some(&cfg), Some(&args.model));
    meta.set("dataset", dataset_summary(&ds));
    meta.set("fold_seconds", json!(report.timing.fold_seconds));
    meta.write(&dir, &CV_OUTPUTS)
}

pub fn grid(args: &GridArgs, argv: &[String]) -> Result<()> {
    let run = &args.run;
    let mut meta = Metadata::new("grid", argv);
    let dir = out_dir(&run.data.out);
    let mut ds = load(&run.data)?;
    let loaded = ds.len();
    if let Some(f) = args.keep_fraction {
        ds = truncate_longest(&ds, f)?;
    }
    let configs = match &args.configs {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_config_list(&text)?
        }
        None if args.independent_filters => enumerate_grid(FilterSweep::Independent),
        None => enumerate_grid(FilterSweep::Paired),
    };
    let rows = grid_search(&ds, &configs, &cv_options(&run.model, run.data.seed))?;
    write_text(&dir.join("grid.csv"), &grid_csv(&rows))?;
    let mut json = serde_json::to_string_pretty(&rows)?;
    json.push('\n');
    write_text(&dir.join("grid.json"), &json)?;
    if let Some(best) = rows.first() {
        match best.mean_accuracy {
            Some(acc) => println!("best: {} (mean accuracy {:.4})", best.config.key(), acc),
            None => println!("every config failed"),
        }
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        println!("{failed} of {} configs failed", rows.len());
    }
    meta.run(&run.data, None, Some(&run.model));
    meta.set("keep_fraction", json!(args.keep_fraction));
    meta.set("loaded_sequences", json!(loaded));
    meta.set("dataset", dataset_summary(&ds));
    meta.set("configs", json!(configs.len()));
    meta.write(&dir, &["grid.csv", "grid.json"])
}

pub fn truncate_cv(args: &TruncateArgs, argv: &[String]) -> Result<()> {
    let run = &args.run;
    let mut meta = Metadata::new("truncate-cv", argv);
    let dir = out_dir(&run.data.out);
    let ds = load(&run.data)?;
    let cfg = resolve_config(&run.config)?;
    let opts = cv_options(&run.model, run.data.seed);
    let cmp = truncation_comparison(&ds, &cfg, &opts, args.keep_fraction)?;
    if let (Some(full), Some(truncated)) = (&cmp.full_report, &cmp.truncated_report) {
        write_cv_outputs(&dir.join("full"), full)?;
        write_cv_outputs(&dir.join("truncated"), truncated)?;
    }
    let delta: serde_json::Map<String, Value> = cmp
        .deltas()
        .iter()
        .map(|(name, a, b)| (name.replace(' ', "_").replace("_(s)", "_seconds"), json!(b - a)))
        .collect();
    let mut summary = json!(cmp);
    summary["delta"] = Value::Object(delta);
    write_json(&dir.join("delta.json"), &summary)?;
    let table = cmp.render_text();
    write_text(&dir.join("delta.txt"), &table)?;
    print!("{table}");

    meta.run(&run.data, Some(&cfg), Some(&run.model));
    meta.set("keep_fraction", json!(args.keep_fraction));
    meta.write(&dir, &["full/", "truncated/", "delta.json", "delta.txt"])
}

pub fn report(args: &ReportArgs, argv: &[String]) -> Result<()> {
    let mut meta = Metadata::new("report", argv);
    if let Some(path) = &args.report {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let report = CvReport::from_json(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        let dir = args
            .out
            .clone()
            .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
        write_confusions(&dir, &report, args.normalize)?;
        println!("items (mean accuracy {:.4})", report.mean_accuracy);
        print!("{}", report.item_confusion.render_text(args.normalize));
        println!("domains (mean accuracy {:.4})", report.mean_domain_accuracy);
        print!("{}", report.domain_confusion.render_text(args.normalize));
        meta.set("report", json!(path.display().to_string()));
        meta.set("normalize", json!(args.normalize));
        return meta.write(
            &dir,
            &["item_confusion.csv", "item_confusion.txt", "domain_confusion.csv", "domain_confusion.txt"],
        );
    }
    let path = args.confusion.as_ref().expect("clap enforces one input");
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let cm = ConfusionMatrix::from_csv(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    let rendered = cm.render_text(args.normalize);
    print!("{rendered}");
    if let Some(dir) = &args.out {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("confusion");
        let name = format!("{stem}.txt");
        write_text(&dir.join(&name), &rendered)?;
        write_text(&dir.join(format!("{stem}.csv")), &cm.to_csv())?;
        meta.set("confusion", json!(path.display().to_string()));
        meta.set("normalize", json!(args.normalize));
        meta.write(dir, &[name.as_str()])?;
    }
    Ok(())
}
