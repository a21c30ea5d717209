use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use bayesbin::config::detect_delimiter;
use bayesbin::data::{encode, encode_with, parse_dataset, parse_unlabeled, prepare, write_dataset};
use bayesbin::diagnostics::summarize;
use bayesbin::loo::{compare, dataset_fingerprint, pointwise_loglik, psis_loo};
use bayesbin::oracle::verify_suite;
use bayesbin::predict::posterior_predict;
use bayesbin::sampler::sample;
use bayesbin::{ChainFile, Error, ModelSpec, OutputFormat, RecordTable, Result, RunConfig};
use serde_json::json;

use crate::args::{CompareArgs, DiagnoseArgs, FitArgs, PredictArgs, VerifyArgs};
use crate::report;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn delimiter_for(bytes: &[u8], explicit: Option<char>) -> u8 {
    match explicit {
        Some(c) => c as u8,
        None => {
            let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
            detect_delimiter(&String::from_utf8_lossy(first))
        }
    }
}

fn load_table(path: &Path, delimiter: Option<char>) -> Result<(RecordTable, u8)> {
    let bytes = read_bytes(path)?;
    let delim = delimiter_for(&bytes, delimiter);
    Ok((parse_dataset(bytes.as_slice(), delim)?, delim))
}

fn read_chain_file(path: &Path) -> Result<ChainFile> {
    let file = File::open(path).map_err(io_err(path))?;
    ChainFile::read(BufReader::new(file))
}

fn emit(out: &mut dyn Write, format: OutputFormat, text: &str, value: &serde_json::Value) -> Result<()> {
    let io = |e| Error::io("stdout", e);
    if format.text() {
        out.write_all(text.as_bytes()).map_err(io)?;
    }
    if format.json() {
        if format.text() {
            writeln!(out).map_err(io)?;
        }
        writeln!(out, "{}", serde_json::to_string_pretty(value)?).map_err(io)?;
    }
    Ok(())
}

fn summary_json(file: &ChainFile, summary: &[bayesbin::ParamSummary]) -> serde_json::Value {
    let d = &file.draws;
    json!({
        "model": file.header.model_name,
        "link": file.header.link,
        "n_obs": file.header.n_obs,
        "parameters": summary,
        "divergent_transitions": d.divergence_count.iter().sum::<usize>(),
        "max_depth_hits": d.max_depth_hits.iter().sum::<usize>(),
        "step_size": d.step_size,
        "accept_rate": d.accept_rate,
        "warnings": report::warnings(d, summary),
    })
}

pub fn fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let base = match &args.config {
        Some(path) => {
            let text = String::from_utf8(read_bytes(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let config = args.apply(base);
    config.validate()?;

    let (table, delim) = load_table(&config.data, config.delimiter)?;
    let prepared = prepare(&table, &config.pipeline())?;
    let (design, target) = encode(&prepared.train, config.standardize)?;
    let prior = config.prior_spec();
    let model = ModelSpec::new(config.link, prior, &design, &target)?;
    let draws = sample(&model, &config.sampler())?;
    let fingerprint = dataset_fingerprint(&design, &target);
    let file = ChainFile::new(&config, prior, design.meta.clone(), design.nrows(), fingerprint, draws);
    let summary = summarize(&file.draws)?;

    let dir = &config.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("config.json"), config.to_json().as_bytes())?;
    let chains_path = dir.join("chains.csv");
    let sink = File::create(&chains_path).map_err(io_err(&chains_path))?;
    file.write(BufWriter::new(sink))?;
    write_file(&dir.join("design.json"), serde_json::to_string_pretty(&design.meta)?.as_bytes())?;
    write_file(&dir.join("balance.json"), serde_json::to_string_pretty(&prepared.balance)?.as_bytes())?;
    let text = report::summary_text(&file.header, &file.draws, &summary);
    write_file(&dir.join("summary.txt"), text.as_bytes())?;
    let value = summary_json(&file, &summary);
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&value)?.as_bytes())?;
    if !prepared.holdout.is_empty() {
        let path = dir.join("holdout.csv");
        let sink = File::create(&path).map_err(io_err(&path))?;
        write_dataset(&prepared.holdout, BufWriter::new(sink), delim)?;
    }
    emit(out, config.format, &text, &value)
}

pub fn diagnose(args: &DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let file = read_chain_file(&args.chains)?;
    let summary = summarize(&file.draws)?;
    let text = report::summary_text(&file.header, &file.draws, &summary);
    emit(out, args.format.into(), &text, &summary_json(&file, &summary))
}

pub fn compare_cmd(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let files = args
        .chains
        .iter()
        .map(|p| read_chain_file(p))
        .collect::<Result<Vec<_>>>()?;

    let bytes = read_bytes(&args.data)?;
    let mut tables: HashMap<u8, RecordTable> = HashMap::new();
    let mut results = Vec::with_capacity(files.len());
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (path, file) in args.chains.iter().zip(&files) {
        let h = &file.header;
        let delim = delimiter_for(&bytes, args.delimiter.or(h.config.delimiter));
        let table = match tables.entry(delim) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(parse_dataset(bytes.as_slice(), delim)?),
        };
        let prepared = prepare(table, &h.config.pipeline())?;
        let (design, target) = encode_with(&prepared.train, &h.design)?;
        let fingerprint = dataset_fingerprint(&design, &target);
        if design.nrows() != h.n_obs || fingerprint != h.fingerprint {
            return Err(Error::DatasetMismatch(h.fingerprint, fingerprint));
        }
        let model = ModelSpec::new(h.link, h.prior, &design, &target)?;
        let loo = psis_loo(&pointwise_loglik(&file.draws, &model)?)?;

        let count = seen.entry(h.model_name.clone()).or_insert(0);
        *count += 1;
        let name = if *count == 1 {
            h.model_name.clone()
        } else {
            format!("{} ({})", h.model_name, path.display())
        };
        results.push((name, loo));
    }

    let cmp = compare(&results)?;
    let text = report::comparison_text(&cmp, &results);
    let models: Vec<_> = results.iter().map(|(n, r)| json!({ "model": n, "loo": r })).collect();
    emit(out, args.format.into(), &text, &json!({ "comparison": cmp, "models": models }))
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let file = read_chain_file(&args.chains)?;
    let h = &file.header;
    let bytes = read_bytes(&args.data)?;
    let rows = if bytes.iter().all(u8::is_ascii_whitespace) {
        Vec::new()
    } else {
        let delim = delimiter_for(&bytes, args.delimiter.or(h.config.delimiter));
        let table = parse_unlabeled(bytes.as_slice(), delim)?;
        if table.is_empty() {
            Vec::new()
        } else {
            let (design, _) = encode_with(&table, &h.design)?;
            let seed = args.seed.unwrap_or(h.config.seed);
            posterior_predict(&file.draws, h.link, &h.design, &design, args.scale.into(), seed)?
        }
    };
    let text = report::predictions_text(&rows, args.scale.into());
    emit(out, args.format.into(), &text, &json!(rows))
}

/// Returns whether every check passed.
pub fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    let checks = verify_suite(args.seed)?;
    let text = report::verify_text(&checks);
    emit(out, args.format.into(), &text, &json!(checks))?;
    Ok(checks.iter().all(|c| c.passed))
}
