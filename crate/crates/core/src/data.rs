//! Bank-marketing records: parsing, resampling and design-matrix encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

/// Predictor columns in model order. The target column `y` follows them.
pub const FEATURES: [(&str, ColumnKind); 20] = [
    ("age", ColumnKind::Numeric),
    ("job", ColumnKind::Categorical),
    ("marital", ColumnKind::Categorical),
    ("education", ColumnKind::Categorical),
    ("default", ColumnKind::Categorical),
    ("housing", ColumnKind::Categorical),
    ("loan", ColumnKind::Categorical),
    ("contact", ColumnKind::Categorical),
    ("month", ColumnKind::Categorical),
    ("day_of_week", ColumnKind::Categorical),
    ("duration", ColumnKind::Numeric),
    ("campaign", ColumnKind::Numeric),
    ("pdays", ColumnKind::Numeric),
    ("previous", ColumnKind::Numeric),
    ("poutcome", ColumnKind::Categorical),
    ("emp.var.rate", ColumnKind::Numeric),
    ("cons.price.idx", ColumnKind::Numeric),
    ("cons.conf.idx", ColumnKind::Numeric),
    ("euribor3m", ColumnKind::Numeric),
    ("nr.employed", ColumnKind::Numeric),
];

pub const TARGET_COLUMN: &str = "y";
pub const N_COLUMNS: usize = FEATURES.len() + 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Categorical(String),
    Numeric(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// One entry per [`FEATURES`] column, same order.
    pub features: Vec<Feature>,
    pub target: u8,
}

/// Parsed rows plus, for each row, its index in the originally parsed file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordTable {
    rows: Vec<Record>,
    provenance: Vec<usize>,
}

impl RecordTable {
    pub fn new(rows: Vec<Record>) -> Self {
        let provenance = (0..rows.len()).collect();
        Self { rows, provenance }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn n_positive(&self) -> usize {
        self.rows.iter().filter(|r| r.target == 1).count()
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
        }
    }
}

fn parse_number(text: &str, row: usize, column: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::UnparseableNumber {
            row,
            column: column.to_string(),
            text: text.to_string(),
        })
}

/// Parse delimiter-separated text with a header naming all 21 columns.
///
/// Rows are numbered from 1 (the first data row) in error messages.
pub fn parse_dataset<R: Read>(source: R, delimiter: u8) -> Result<RecordTable> {
    parse_table(source, delimiter, true)
}

/// Like [`parse_dataset`], but the `y` column may be absent (targets read as 0).
pub fn parse_unlabeled<R: Read>(source: R, delimiter: u8) -> Result<RecordTable> {
    parse_table(source, delimiter, false)
}

fn parse_table<R: Read>(source: R, delimiter: u8, labeled: bool) -> Result<RecordTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let header = reader.headers()?.clone();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        let known = FEATURES.iter().any(|(f, _)| *f == name) || name == TARGET_COLUMN;
        if !known {
            return Err(Error::UnknownColumn(name.to_string()));
        }
        position.insert(
            FEATURES
                .iter()
                .map(|(f, _)| *f)
                .chain(std::iter::once(TARGET_COLUMN))
                .find(|f| *f == name)
                .unwrap(),
            i,
        );
    }
    let mut columns = Vec::with_capacity(N_COLUMNS);
    for (name, _) in FEATURES.iter() {
        columns.push(*position.get(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?);
    }
    let target_pos = position.get(TARGET_COLUMN).copied();
    if labeled && target_pos.is_none() {
        return Err(Error::MissingColumn(TARGET_COLUMN.to_string()));
    }
    let width = if target_pos.is_some() { N_COLUMNS } else { FEATURES.len() };

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() < width {
            return Err(Error::MissingField {
                row,
                found: record.len(),
            });
        }
        if record.len() > width {
            return Err(Error::Csv(format!(
                "row {row}: expected {width} fields, found {}",
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(FEATURES.len());
        for (&(name, kind), &pos) in FEATURES.iter().zip(&columns) {
            let text = &record[pos];
            features.push(match kind {
                ColumnKind::Numeric => Feature::Numeric(parse_number(text, row, name)?),
                ColumnKind::Categorical => Feature::Categorical(text.trim().to_string()),
            });
        }
        let target = match target_pos.map(|t| record[t].trim()) {
            None | Some("no") => 0,
            Some("yes") => 1,
            Some(other) => {
                return Err(Error::UnknownTargetLabel {
                    row,
                    label: other.to_string(),
                })
            }
        };
        rows.push(Record { features, target });
    }
    Ok(RecordTable::new(rows))
}

/// Write a table back out in the input schema (features in model order, then `y`).
pub fn write_dataset<W: Write>(table: &RecordTable, sink: W, delimiter: u8) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    writer.write_record(
        FEATURES
            .iter()
            .map(|(name, _)| *name)
            .chain(std::iter::once(TARGET_COLUMN)),
    )?;
    for record in table.rows() {
        let mut fields: Vec<String> = record
            .features
            .iter()
            .map(|f| match f {
                Feature::Categorical(s) => s.clone(),
                Feature::Numeric(v) => v.to_string(),
            })
            .collect();
        fields.push(if record.target == 1 { "yes" } else { "no" }.to_string());
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// First `n` positions of a seeded Fisher–Yates shuffle of `0..len`.
fn partial_shuffle<R: Rng>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}

/// Draw `n` rows uniformly without replacement.
pub fn subsample(table: &RecordTable, n: usize, seed: u64) -> Result<RecordTable> {
    if n == 0 {
        return Err(Error::InvalidConfig("subsample size must be positive".into()));
    }
    if n > table.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: table.len(),
        });
    }
    let mut rng = rng::substream(seed, domain::SUBSAMPLE);
    Ok(table.select(&partial_shuffle(table.len(), n, &mut rng)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub n_before: usize,
    pub n_positive_before: usize,
    pub n_after: usize,
    pub n_positive_after: usize,
    /// Input-table indices of the duplicated minority rows, in draw order.
    pub duplicated_indices: Vec<usize>,
    pub seed: u64,
}

/// Duplicate minority rows (with replacement) until both classes have equal counts.
///
/// Input rows keep their order; duplicates are appended after them.
pub fn balance_oversample(table: &RecordTable, seed: u64) -> Result<(RecordTable, BalanceReport)> {
    let positives: Vec<usize> = (0..table.len()).filter(|&i| table.rows[i].target == 1).collect();
    let negatives: Vec<usize> = (0..table.len()).filter(|&i| table.rows[i].target == 0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::DegenerateClasses);
    }
    let (minority, majority_len) = if positives.len() < negatives.len() {
        (&positives, negatives.len())
    } else {
        (&negatives, positives.len())
    };
    let mut rng = rng::substream(seed, domain::BALANCE);
    let duplicated_indices: Vec<usize> = (0..majority_len - minority.len())
        .map(|_| minority[rng.random_range(0..minority.len())])
        .collect();

    let all: Vec<usize> = (0..table.len()).chain(duplicated_indices.iter().copied()).collect();
    let out = table.select(&all);
    let report = BalanceReport {
        n_before: table.len(),
        n_positive_before: positives.len(),
        n_after: out.len(),
        n_positive_after: out.n_positive(),
        duplicated_indices,
        seed,
    };
    Ok((out, report))
}

/// Keep `per_class` rows of each class, drawn without replacement; positives first.
pub fn trim_balanced(table: &RecordTable, per_class: usize, seed: u64) -> Result<RecordTable> {
    let mut rng = rng::substream(seed, domain::TRIM);
    let mut keep = Vec::with_capacity(2 * per_class);
    for class in [1u8, 0u8] {
        let members: Vec<usize> = (0..table.len()).filter(|&i| table.rows[i].target == class).collect();
        if per_class > members.len() {
            return Err(Error::SampleTooLarge {
                requested: per_class,
                available: members.len(),
            });
        }
        keep.extend(partial_shuffle(members.len(), per_class, &mut rng).into_iter().map(|j| members[j]));
    }
    Ok(table.select(&keep))
}

/// Split into `(train, holdout)` with `n_holdout` rows drawn uniformly for the holdout.
///
/// Train rows keep their input order; holdout rows are in draw order.
pub fn holdout_split(table: &RecordTable, n_holdout: usize, seed: u64) -> Result<(RecordTable, RecordTable)> {
    if n_holdout == 0 {
        return Err(Error::InvalidConfig("holdout size must be positive".into()));
    }
    if n_holdout >= table.len() {
        return Err(Error::SampleTooLarge {
            requested: n_holdout,
            available: table.len().saturating_sub(1),
        });
    }
    let mut rng = rng::substream(seed, domain::HOLDOUT);
    let held = partial_shuffle(table.len(), n_holdout, &mut rng);
    let mut is_held = vec![false; table.len()];
    for &i in &held {
        is_held[i] = true;
    }
    let train: Vec<usize> = (0..table.len()).filter(|&i| !is_held[i]).collect();
    Ok((table.select(&train), table.select(&held)))
}

/// Where class balancing happens relative to subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BalanceOrder {
    /// Oversample the full table, then draw `n/2` rows per class.
    Before,
    /// Subsample `n` rows, oversample, then trim to `n/2` rows per class.
    #[default]
    After,
    Off,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub subsample: Option<usize>,
    pub balance: BalanceOrder,
    pub holdout: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            subsample: Some(10_000),
            balance: BalanceOrder::After,
            holdout: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: RecordTable,
    pub holdout: RecordTable,
    pub balance: Option<BalanceReport>,
}

/// Subsample, balance and split a parsed table according to `opts`.
pub fn prepare(table: &RecordTable, opts: &PipelineOptions) -> Result<PreparedData> {
    let seed = opts.seed;
    let (model_table, balance) = match (opts.balance, opts.subsample) {
        (BalanceOrder::Off, None) => (table.clone(), None),
        (BalanceOrder::Off, Some(n)) => (subsample(table, n, seed)?, None),
        (BalanceOrder::After, None) | (BalanceOrder::Before, None) => {
            let (b, r) = balance_oversample(table, seed)?;
            (b, Some(r))
        }
        (BalanceOrder::After, Some(n)) => {
            let sub = subsample(table, n, seed)?;
            let (b, r) = balance_oversample(&sub, seed)?;
            (trim_balanced(&b, n / 2, seed)?, Some(r))
        }
        (BalanceOrder::Before, Some(n)) => {
            let (b, r) = balance_oversample(table, seed)?;
            (trim_balanced(&b, n / 2, seed)?, Some(r))
        }
    };
    let (train, holdout) = if opts.holdout > 0 {
        holdout_split(&model_table, opts.holdout, seed)?
    } else {
        (model_table, RecordTable::default())
    };
    Ok(PreparedData {
        train,
        holdout,
        balance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub center: f64,
    pub scale: f64,
    /// Column had zero sample variance; `scale` was forced to 1.
    pub constant: bool,
}

/// Everything needed to encode new rows exactly as the training rows were.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetadata {
    pub column_names: Vec<String>,
    /// Per categorical column, levels in code order (level at position `i` has code `i + 1`).
    pub encoding_map: BTreeMap<String, Vec<String>>,
    /// Per column; `None` is the identity.
    pub scaling: Vec<Option<ColumnScaling>>,
}

impl DesignMetadata {
    /// Metadata for a purely numeric design with no encoding or scaling.
    pub fn plain(column_names: Vec<String>) -> Self {
        let k = column_names.len();
        Self {
            column_names,
            encoding_map: BTreeMap::new(),
            scaling: vec![None; k],
        }
    }

    pub fn constant_columns(&self) -> Vec<&str> {
        self.scaling
            .iter()
            .zip(&self.column_names)
            .filter(|(s, _)| s.is_some_and(|s| s.constant))
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// Map an encoded (and possibly scaled) value back to its category label.
    pub fn decode_level(&self, column: usize, value: f64) -> Option<&str> {
        let levels = self.encoding_map.get(&self.column_names[column])?;
        let raw = match self.scaling[column] {
            Some(s) => value * s.scale + s.center,
            None => value,
        };
        let code = raw.round();
        if code < 1.0 || code as usize > levels.len() {
            return None;
        }
        Some(&levels[code as usize - 1])
    }
}

/// Numeric predictors, one row per observation; the intercept is not a column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    pub meta: DesignMetadata,
    /// Source-row identity of each observation.
    pub provenance: Vec<usize>,
}

impl DesignMatrix {
    pub fn from_values(values: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.ncols() != column_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} names",
                values.ncols(),
                column_names.len()
            )));
        }
        let provenance = (0..values.nrows()).collect();
        Ok(Self {
            values,
            meta: DesignMetadata::plain(column_names),
            provenance,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

fn raw_columns(table: &RecordTable, encoding_map: &BTreeMap<String, Vec<String>>) -> Result<Array2<f64>> {
    let lookup: BTreeMap<&str, HashMap<&str, usize>> = encoding_map
        .iter()
        .map(|(col, levels)| {
            (
                col.as_str(),
                levels.iter().enumerate().map(|(i, l)| (l.as_str(), i + 1)).collect(),
            )
        })
        .collect();
    let mut values = Array2::zeros((table.len(), FEATURES.len()));
    for (i, record) in table.rows().iter().enumerate() {
        for (j, feature) in record.features.iter().enumerate() {
            let name = FEATURES[j].0;
            values[[i, j]] = match feature {
                Feature::Numeric(v) => *v,
                Feature::Categorical(level) => *lookup
                    .get(name)
                    .and_then(|m| m.get(level.as_str()))
                    .ok_or_else(|| Error::UnseenLevel {
                        column: name.to_string(),
                        level: level.clone(),
                    })? as f64,
            };
        }
    }
    Ok(values)
}

fn apply_scaling(values: &mut Array2<f64>, scaling: &[Option<ColumnScaling>]) {
    for (j, s) in scaling.iter().enumerate() {
        if let Some(s) = s {
            values.column_mut(j).mapv_inplace(|v| (v - s.center) / s.scale);
        }
    }
}

/// Encode a training table: label-encode categoricals, optionally standardize.
///
/// Returns the design and the 0/1 target vector.
pub fn encode(table: &RecordTable, standardize: bool) -> Result<(DesignMatrix, Vec<f64>)> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut encoding_map = BTreeMap::new();
    for (j, (name, kind)) in FEATURES.iter().enumerate() {
        if *kind == ColumnKind::Categorical {
            let levels: BTreeSet<&str> = table
                .rows()
                .iter()
                .map(|r| match &r.features[j] {
                    Feature::Categorical(s) => s.as_str(),
                    Feature::Numeric(_) => unreachable!("schema mismatch"),
                })
                .collect();
            encoding_map.insert(name.to_string(), levels.into_iter().map(String::from).collect());
        }
    }
    let mut values = raw_columns(table, &encoding_map)?;
    let n = values.nrows() as f64;
    let scaling: Vec<Option<ColumnScaling>> = if standardize {
        values
            .columns()
            .into_iter()
            .map(|col| {
                let mean = col.sum() / n;
                let var = if n > 1.0 {
                    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let sd = var.sqrt();
                let constant = !(sd > 0.0);
                Some(ColumnScaling {
                    center: mean,
                    scale: if constant { 1.0 } else { sd },
                    constant,
                })
            })
            .collect()
    } else {
        vec![None; FEATURES.len()]
    };
    apply_scaling(&mut values, &scaling);
    let meta = DesignMetadata {
        column_names: FEATURES.iter().map(|(n, _)| n.to_string()).collect(),
        encoding_map,
        scaling,
    };
    let target = table.rows().iter().map(|r| r.target as f64).collect();
    Ok((
        DesignMatrix {
            values,
            meta,
            provenance: table.provenance().to_vec(),
        },
        target,
    ))
}

/// Encode rows with the metadata of an existing fit. An empty table yields an empty design.
pub fn encode_with(table: &RecordTable, meta: &DesignMetadata) -> Result<(DesignMatrix, Vec<f64>)> {
    let expected: Vec<&str> = FEATURES.iter().map(|(n, _)| *n).collect();
    if meta.column_names != expected || meta.scaling.len() != expected.len() {
        return Err(Error::EncodingMismatch(
            "metadata does not describe the bank-marketing predictor set".into(),
        ));
    }
    let mut values = raw_columns(table, &meta.encoding_map)?;
    apply_scaling(&mut values, &meta.scaling);
    let target = table.rows().iter().map(|r| r.target as f64).collect();
    Ok((
        DesignMatrix {
            values,
            meta: meta.clone(),
            provenance: table.provenance().to_vec(),
        },
        target,
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const HEADER: &str = "age;job;marital;education;default;housing;loan;contact;month;day_of_week;duration;campaign;pdays;previous;poutcome;emp.var.rate;cons.price.idx;cons.conf.idx;euribor3m;nr.employed;y";

    pub(crate) fn row(age: f64, job: &str, y: &str) -> String {
        format!(
            "{age};\"{job}\";\"married\";\"basic.4y\";\"no\";\"no\";\"no\";\"telephone\";\"may\";\"mon\";261;1;999;0;\"nonexistent\";1.1;93.994;-36.4;4.857;5191;\"{y}\""
        )
    }

    fn table_of(rows: &[String]) -> RecordTable {
        let text = std::iter::once(HEADER.to_string())
            .chain(rows.iter().cloned())
            .collect::<Vec<_>>()
            .join("\n");
        parse_dataset(text.as_bytes(), b';').unwrap()
    }

    fn classes(pos: usize, neg: usize) -> RecordTable {
        let mut rows = Vec::new();
        for i in 0..pos {
            rows.push(row(20.0 + i as f64, "admin.", "yes"));
        }
        for i in 0..neg {
            rows.push(row(50.0 + i as f64, "services", "no"));
        }
        table_of(&rows)
    }

    #[test]
    fn parses_single_yes_row() {
        let t = table_of(&[row(56.0, "housemaid", "yes")]);
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].target, 1);
        assert_eq!(t.rows()[0].features[0], Feature::Numeric(56.0));
        assert_eq!(t.rows()[0].features[1], Feature::Categorical("housemaid".into()));
    }

    #[test]
    fn rejects_unknown_target() {
        let text = format!("{HEADER}\n{}", row(30.0, "admin.", "maybe"));
        assert!(matches!(
            parse_dataset(text.as_bytes(), b';'),
            Err(Error::UnknownTargetLabel { row: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_header_short_rows_and_bad_numbers() {
        let bad_header = HEADER.replace("euribor3m", "euribor");
        assert!(matches!(
            parse_dataset(bad_header.as_bytes(), b';'),
            Err(Error::UnknownColumn(c)) if c == "euribor"
        ));
        let short = format!("{HEADER}\n30;\"admin.\";\"married\"");
        assert!(matches!(
            parse_dataset(short.as_bytes(), b';'),
            Err(Error::MissingField { row: 1, found: 3 })
        ));
        let bad_num = format!("{HEADER}\n{}", row(30.0, "admin.", "no").replacen("30", "thirty", 1));
        assert!(matches!(
            parse_dataset(bad_num.as_bytes(), b';'),
            Err(Error::UnparseableNumber { row: 1, .. })
        ));
    }

    #[test]
    fn header_order_is_free() {
        let mut cols: Vec<&str> = HEADER.split(';').collect();
        let mut vals: Vec<String> = row(41.0, "admin.", "no").split(';').map(String::from).collect();
        cols.swap(0, 20);
        vals.swap(0, 20);
        let text = format!("{}\n{}", cols.join(","), vals.join(","));
        let t = parse_dataset(text.as_bytes(), b',').unwrap();
        assert_eq!(t.rows()[0].features[0], Feature::Numeric(41.0));
        assert_eq!(t.rows()[0].target, 0);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let t = classes(2, 3);
        let mut buf = Vec::new();
        write_dataset(&t, &mut buf, b';').unwrap();
        let back = parse_dataset(buf.as_slice(), b';').unwrap();
        assert_eq!(back.rows(), t.rows());
    }

    #[test]
    fn subsample_full_size_is_a_permutation() {
        let t = classes(4, 6);
        let s = subsample(&t, 10, 3).unwrap();
        let mut p = s.provenance().to_vec();
        p.sort_unstable();
        assert_eq!(p, (0..10).collect::<Vec<_>>());
        assert!(matches!(subsample(&t, 11, 3), Err(Error::SampleTooLarge { .. })));
    }

    #[test]
    fn subsample_is_seed_deterministic() {
        let t = classes(40, 60);
        assert_eq!(subsample(&t, 30, 9).unwrap(), subsample(&t, 30, 9).unwrap());
        assert_ne!(
            subsample(&t, 30, 9).unwrap().provenance(),
            subsample(&t, 30, 10).unwrap().provenance()
        );
    }

    #[test]
    fn balanced_input_is_untouched() {
        let t = classes(3, 3);
        let (out, report) = balance_oversample(&t, 1).unwrap();
        assert_eq!(out, t);
        assert!(report.duplicated_indices.is_empty());
    }

    #[test]
    fn oversampling_equalizes_classes() {
        let t = classes(2, 6);
        let (out, report) = balance_oversample(&t, 1).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(out.n_positive(), 6);
        assert_eq!(report.duplicated_indices.len(), 4);
        assert!(report.duplicated_indices.iter().all(|&i| t.rows()[i].target == 1));
        assert_eq!(report.n_positive_after, report.n_after - report.n_positive_after);
        assert_eq!(&out.rows()[..8], t.rows());
    }

    #[test]
    fn single_class_cannot_be_balanced() {
        assert!(matches!(balance_oversample(&classes(0, 4), 1), Err(Error::DegenerateClasses)));
    }

    #[test]
    fn holdout_partitions_rows() {
        let t = classes(4, 6);
        let (train, hold) = holdout_split(&t, 3, 5).unwrap();
        assert_eq!((train.len(), hold.len()), (7, 3));
        let mut all: Vec<usize> = train.provenance().iter().chain(hold.provenance()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(holdout_split(&t, 10, 5).is_err());
    }

    #[test]
    fn pipeline_after_order_gives_exact_halves() {
        let t = classes(30, 170);
        let opts = PipelineOptions {
            subsample: Some(100),
            balance: BalanceOrder::After,
            holdout: 3,
            seed: 4,
        };
        let p = prepare(&t, &opts).unwrap();
        assert_eq!(p.train.len() + p.holdout.len(), 100);
        assert_eq!(p.train.n_positive() + p.holdout.n_positive(), 50);
        let before = prepare(&t, &PipelineOptions { balance: BalanceOrder::Before, holdout: 0, ..opts.clone() }).unwrap();
        assert_eq!((before.train.len(), before.train.n_positive()), (100, 50));
    }

    #[test]
    fn categorical_levels_are_lexicographic() {
        let t = table_of(&[row(20.0, "b", "yes"), row(30.0, "a", "no")]);
        let (d, y) = encode(&t, false).unwrap();
        assert_eq!(d.meta.encoding_map["job"], vec!["a", "b"]);
        assert_eq!(d.values[[0, 1]], 2.0);
        assert_eq!(d.values[[1, 1]], 1.0);
        assert_eq!(y, vec![1.0, 0.0]);
    }

    #[test]
    fn standardization_uses_sample_sd() {
        let t = table_of(&[row(20.0, "a", "yes"), row(30.0, "a", "no"), row(40.0, "a", "no")]);
        let (d, _) = encode(&t, true).unwrap();
        // sd over n - 1 is 10, so z = (x - 30) / 10; over n it would be ±1.2247
        assert!((d.values[[0, 0]] + 1.0).abs() < 1e-15);
        assert_eq!(d.values[[1, 0]], 0.0);
        assert!((d.values[[2, 0]] - 1.0).abs() < 1e-15);
        // job is constant: centered, scale forced to 1 and flagged
        let s = d.meta.scaling[1].unwrap();
        assert!(s.constant && s.scale == 1.0);
        assert!(d.values.column(1).iter().all(|&v| v == 0.0));
        assert!(d.meta.constant_columns().contains(&"job"));
    }

    #[test]
    fn empty_table_cannot_be_encoded() {
        assert!(matches!(encode(&RecordTable::default(), true), Err(Error::EmptyTable)));
    }

    #[test]
    fn unseen_level_is_reported() {
        let (d, _) = encode(&table_of(&[row(20.0, "a", "yes")]), true).unwrap();
        let other = table_of(&[row(20.0, "zzz", "yes")]);
        match encode_with(&other, &d.meta) {
            Err(Error::UnseenLevel { column, level }) => {
                assert_eq!((column.as_str(), level.as_str()), ("job", "zzz"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let (empty, _) = encode_with(&RecordTable::default(), &d.meta).unwrap();
        assert_eq!(empty.nrows(), 0);
    }

    #[test]
    fn unlabeled_rows_parse_without_target() {
        let header = HEADER.trim_end_matches(";y");
        let line = row(30.0, "admin.", "no");
        let line = &line[..line.rfind(';').unwrap()];
        let text = format!("{header}\n{line}\n");
        let t = parse_unlabeled(text.as_bytes(), b';').unwrap();
        assert_eq!((t.len(), t.n_positive()), (1, 0));
        assert!(matches!(parse_dataset(text.as_bytes(), b';'), Err(Error::MissingColumn(c)) if c == "y"));
        let labeled = format!("{HEADER}\n{}\n", row(30.0, "admin.", "yes"));
        assert_eq!(parse_unlabeled(labeled.as_bytes(), b';').unwrap().n_positive(), 1);
    }
}
