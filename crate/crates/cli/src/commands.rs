use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dvrisk_core::forest::{EnsembleConfig, EnsembleModel};
use dvrisk_core::geo::geocode::read_addresses;
use dvrisk_core::geo::{
    aggregate, export_geojson, table1_summary, AggregateContext, Boundaries, CaseType, CaseTypeMapping,
    FileGeocoder, GeocoderClient, Table1Row,
};
use dvrisk_core::metrics::eda_report;
use dvrisk_core::pipeline::{evaluate, train_and_evaluate};
use dvrisk_core::preprocess::{
    build_frame, read_records, write_records, CaseRecord, Feature, FeatureFrame, FrameConfig, Schema,
};
use dvrisk_core::synthgen::{generate, GeneratorConfig};
use dvrisk_service::ServiceConfig;
use serde_json::json;

use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::{
    settings, AggregateArgs, Cli, Command, EdaArgs, EvaluateArgs, GenerateArgs, PreprocessArgs, Preset,
    ServeArgs, TrainArgs, UsageError,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Generate(a) => cmd_generate(&cli, config, a),
        Command::Preprocess(a) => cmd_preprocess(&cli, a),
        Command::Eda(a) => cmd_eda(&cli, a),
        Command::Train(a) => cmd_train(&cli, config, a),
        Command::Evaluate(a) => cmd_evaluate(&cli, a),
        Command::Aggregate(a) => cmd_aggregate(&cli, a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_records(path: &Path, lenient: bool) -> Result<Vec<CaseRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let outcome = read_records(BufReader::new(file), lenient).with_context(|| format!("reading {}", path.display()))?;
    for skip in &outcome.skipped {
        log::warn!("{}: skipped line {}: {}", path.display(), skip.line, skip.message);
    }
    log::info!("read {} records from {}", outcome.records.len(), path.display());
    Ok(outcome.records)
}

fn load_frame(path: &Path) -> Result<FeatureFrame> {
    let bytes = fs::read(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("{} is not a feature frame", path.display()))
}

fn load_model(path: &Path) -> Result<EnsembleModel> {
    let bytes = fs::read(path).with_context(|| format!("opening {}", path.display()))?;
    EnsembleModel::from_json(&bytes).with_context(|| format!("loading model {}", path.display()))
}

fn cmd_generate(cli: &Cli, config: Option<&Path>, a: &GenerateArgs) -> Result<()> {
    let mut g = match a.preset {
        Preset::Map => GeneratorConfig::map_mode(),
        Preset::Model => GeneratorConfig::model_mode(),
    };
    for (k, v) in settings::collect(config, "generate", &a.sets)? {
        g.apply(&k, &v).map_err(|e| UsageError(e.to_string()))?;
    }
    if let Some(seed) = cli.seed {
        g.seed = seed;
    }
    g.validate().map_err(|e| UsageError(e.to_string()))?;
    let records = generate(&g)?;
    ensure_parent(&a.out)?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, &records)?;
    w.flush()?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());

    let mut m = ManifestBuilder::new("generate");
    m.seed(g.seed).config(&g).output(&a.out);
    if let Some(b) = &a.boundaries_out {
        write_bytes(b, Boundaries::synthetic().to_geojson().as_bytes())?;
        m.output(b);
    }
    m.write(&manifest_path_for(&a.out))
}

fn cmd_preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<()> {
    let records = load_records(&a.input, cli.lenient)?;
    let prior: Option<Schema> = match &a.schema_from {
        Some(p) => Some(match load_frame(p) {
            Ok(f) => f.schema,
            Err(_) => load_model(p)
                .with_context(|| format!("{} is neither a frame nor a model", p.display()))?
                .schema()
                .clone(),
        }),
        None => None,
    };
    let features = match &a.features {
        Some(names) => names
            .iter()
            .map(|n| n.trim().parse::<Feature>().map_err(|e| UsageError(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => match &prior {
            Some(s) => s.feature_list(),
            None => Feature::MODEL_DEFAULT.to_vec(),
        },
    };
    if !(0.0..1.0).contains(&a.rare_threshold) {
        return Err(UsageError(format!("--rare-threshold {} outside [0, 1)", a.rare_threshold)).into());
    }
    let fc = FrameConfig {
        features,
        rare_threshold: a.rare_threshold,
    };
    let built = build_frame(&records, &fc, prior.as_ref())?;
    let frame = &built.frame;
    log::info!(
        "frame: {} rows, {} features, {} positives, {} dropped",
        frame.len(),
        frame.n_features(),
        frame.positives(),
        built.dropped
    );
    write_bytes(&a.out, &serde_json::to_vec(frame)?)?;
    let mut m = ManifestBuilder::new("preprocess");
    m.config(json!({
        "features": fc.features,
        "rare_threshold": fc.rare_threshold,
        "replay": a.schema_from,
        "warnings": built.warnings,
    }))
    .input(&a.input)
    .output(&a.out);
    if let Some(p) = &a.schema_from {
        m.input(p);
    }
    m.write(&manifest_path_for(&a.out))
}

fn cmd_eda(cli: &Cli, a: &EdaArgs) -> Result<()> {
    let records = load_records(&a.input, cli.lenient)?;
    let report = eda_report(&records);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{report}");
    }
    if let Some(out) = &a.out {
        write_bytes(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
        ManifestBuilder::new("eda")
            .input(&a.input)
            .output(out)
            .write(&manifest_path_for(out))?;
    }
    Ok(())
}

fn cmd_train(cli: &Cli, config: Option<&Path>, a: &TrainArgs) -> Result<()> {
    let mut ec = if a.paper_scale {
        EnsembleConfig::paper_scale()
    } else {
        EnsembleConfig::desk_scale()
    };
    for (k, v) in settings::collect(config, "train", &a.sets)? {
        ec.apply(&k, &v).map_err(|e| UsageError(e.to_string()))?;
    }
    if let Some(seed) = cli.seed {
        ec.master_seed = seed;
    }
    let frame = load_frame(&a.frame)?;
    if a.holdout >= frame.len() {
        return Err(UsageError(format!(
            "--holdout {} must be smaller than the frame ({} rows)",
            a.holdout,
            frame.len()
        ))
        .into());
    }
    ec.validate(frame.n_features()).map_err(|e| UsageError(e.to_string()))?;
    log::info!(
        "training {} forests x {} trees on {} rows ({} threads)",
        ec.outer_rounds * ec.inner_repeats,
        ec.trees_per_forest,
        frame.len() - a.holdout,
        rayon::current_num_threads()
    );
    let started = std::time::Instant::now();
    let out = train_and_evaluate(&frame, &ec, a.holdout, a.stratified)?;
    let elapsed = started.elapsed().as_secs_f64();
    println!("{}", out.report);

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let path = |name: &str| -> PathBuf { a.out_dir.join(name) };
    write_bytes(&path("model.json"), &out.model.to_json())?;
    let report = json!({
        "model_version": out.model.version(),
        "train_rows": out.split.train.len(),
        "holdout_rows": out.split.holdout.len(),
        "stratified_holdout": a.stratified,
        "training_seconds": elapsed,
        "metrics": out.report,
    });
    write_bytes(&path("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    write_bytes(&path("report.txt"), format!("{}\n", out.report).as_bytes())?;
    let mut scores = String::from("case_id,label,probability,predicted\n");
    for s in &out.scores {
        scores.push_str(&format!("{},{},{:.6},{}\n", s.case_id, s.label, s.probability, s.predicted));
    }
    write_bytes(&path("holdout_scores.csv"), scores.as_bytes())?;
    log::info!("model {} written to {}", out.model.version(), a.out_dir.display());

    let mut m = ManifestBuilder::new("train");
    m.seed(ec.master_seed)
        .config(json!({"ensemble": ec, "holdout": a.holdout, "stratified": a.stratified}))
        .input(&a.frame);
    for name in ["model.json", "report.json", "report.txt", "holdout_scores.csv"] {
        m.output(&path(name));
    }
    m.write(&path("manifest.json"))
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (frame, input) = match (&a.frame, &a.input) {
        (Some(f), _) => {
            let frame = load_frame(f)?;
            if frame.schema != *model.schema() {
                bail!("{} was not encoded with this model's schema; pass --input with the case CSV instead", f.display());
            }
            (frame, f)
        }
        (None, Some(i)) => {
            let records = load_records(i, cli.lenient)?;
            let fc = FrameConfig {
                features: model.schema().feature_list(),
                ..FrameConfig::default()
            };
            (build_frame(&records, &fc, Some(model.schema()))?.frame, i)
        }
        (None, None) => return Err(UsageError("one of --frame or --input is required".into()).into()),
    };
    let (report, _) = evaluate(&model, &frame)?;
    println!("{report}");
    if let Some(out) = &a.out {
        let body = json!({"model_version": model.version(), "rows": frame.len(), "metrics": report});
        write_bytes(out, serde_json::to_string_pretty(&body)?.as_bytes())?;
        ManifestBuilder::new("evaluate")
            .input(&a.model)
            .input(input)
            .output(out)
            .write(&manifest_path_for(out))?;
    }
    Ok(())
}

fn print_table1(rows: &[Table1Row]) {
    println!(
        "{:<20}{:>8}{:>12}{:>14}{:>12}{:>8}",
        "", "n", "Proportion", "Male/Female", "Low income", "D/MI"
    );
    for r in rows {
        println!(
            "{:<20}{:>8}{:>11.1}%{:>14}{:>11.1}%{:>7.1}%",
            r.category.as_str(),
            r.n,
            r.proportion,
            format!("{:.0}/{:.0}", r.male, r.female),
            r.low_mid_income,
            r.disability_or_mental_illness
        );
    }
}

fn cmd_aggregate(cli: &Cli, a: &AggregateArgs) -> Result<()> {
    let records = load_records(&a.input, cli.lenient)?;
    let boundaries = match &a.boundaries {
        Some(p) => Boundaries::from_geojson(
            &fs::read_to_string(p).with_context(|| format!("opening {}", p.display()))?,
        )
        .with_context(|| format!("loading {}", p.display()))?,
        None => Boundaries::synthetic(),
    };
    let mapping = match &a.mapping {
        Some(p) => CaseTypeMapping::from_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?)
            .with_context(|| format!("loading {}", p.display()))?,
        None => CaseTypeMapping::builtin(),
    };
    let geocoder = match &a.geocoder_table {
        Some(p) => Some(FileGeocoder::from_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let addresses = match &a.addresses {
        Some(p) => Some(read_addresses(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let model = a.model.as_deref().map(load_model).transpose()?;
    let ctx = AggregateContext {
        boundaries: &boundaries,
        mapping: &mapping,
        geocoder: geocoder.as_ref().map(|g| g as &dyn GeocoderClient),
        addresses: addresses.as_ref(),
        model: model.as_ref(),
    };
    let bundle = aggregate(&records, &ctx);
    let s = bundle.stats;
    log::info!(
        "placed by village {}, coordinates {}, address {}; unlocated {}",
        s.by_village_id,
        s.by_coordinates,
        s.by_address,
        s.unlocated
    );
    write_bytes(&a.out, serde_json::to_string_pretty(&bundle)?.as_bytes())?;
    print_table1(&table1_summary(&records, &mapping));

    let mut m = ManifestBuilder::new("aggregate");
    m.input(&a.input).output(&a.out);
    for p in [&a.boundaries, &a.mapping, &a.addresses, &a.geocoder_table, &a.model]
        .into_iter()
        .flatten()
    {
        m.input(p);
    }
    if let Some(dir) = &a.geojson_dir {
        let views = std::iter::once(None).chain(CaseType::ALL.into_iter().map(Some));
        for view in views {
            let name = format!("map_{}.geojson", view.map_or("all", |c| c.as_str()));
            let path = dir.join(name);
            write_bytes(&path, export_geojson(bundle.view(view), &boundaries)?.as_bytes())?;
            m.output(&path);
        }
    }
    m.write(&manifest_path_for(&a.out))
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        listen: a.listen,
        model_path: a.model.clone(),
        aggregates_path: a.aggregates.clone(),
        boundaries_path: a.boundaries.clone(),
        allow_remote_reload: a.allow_remote_reload,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(dvrisk_service::serve(config))?;
    Ok(())
}
