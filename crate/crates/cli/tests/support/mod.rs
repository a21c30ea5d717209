//! Synthetic tables in the bank-marketing schema.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bayesbin::data::{write_dataset, ColumnKind, Feature, Record, FEATURES};
use bayesbin::RecordTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEVELS: [&[&str]; 3] = [&["admin.", "blue-collar", "technician"], &["married", "single"], &["no", "yes", "unknown"]];

/// `n` rows with roughly 25% positives; the outcome depends on `duration`
/// and `job`.
pub fn table(n: usize, seed: u64) -> RecordTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut eta = -1.5;
            let features = FEATURES
                .iter()
                .enumerate()
                .map(|(j, (name, kind))| match kind {
                    ColumnKind::Numeric => {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        if *name == "duration" {
                            eta += 1.5 * v;
                        }
                        Feature::Numeric((100.0 * v).round() / 10.0 + j as f64)
                    }
                    ColumnKind::Categorical => {
                        let levels = LEVELS[j % LEVELS.len()];
                        let k = rng.random_range(0..levels.len());
                        if *name == "job" && k == 1 {
                            eta += 0.8;
                        }
                        Feature::Categorical(levels[k].to_string())
                    }
                })
                .collect();
            let p = 1.0 / (1.0 + (-eta).exp());
            Record {
                features,
                target: u8::from(rng.random::<f64>() < p),
            }
        })
        .collect();
    RecordTable::new(rows)
}

pub fn write_table(table: &RecordTable, path: &Path) {
    let file = std::fs::File::create(path).unwrap();
    write_dataset(table, file, b';').unwrap();
}

pub fn write_csv(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    write_table(&table(n, seed), &path);
    path
}

/// Drop the `y` column from a written table.
pub fn strip_target(src: &Path, dst: &Path) {
    let text = std::fs::read_to_string(src).unwrap();
    let out: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(';').collect();
            f.pop();
            f.join(";") + "\n"
        })
        .collect();
    std::fs::write(dst, out).unwrap();
}

pub fn bayesbin(args: &[&str]) -> Output {
    bayesbin_env(args, &[])
}

pub fn bayesbin_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bayesbin"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small, fast fit settings.
pub const QUICK: [&str; 10] = ["--chains", "2", "--warmup", "150", "--draws", "150", "--subsample", "all", "--format", "text"];

pub fn fit(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["fit", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(&QUICK);
    args.extend_from_slice(extra);
    bayesbin(&args)
}
