//! Chain files: a one-line JSON header followed by the draws as CSV.
//!
//! ```text
//! {"version":1,"model_name":"logit_model",...}
//! chain,iteration,Intercept,age,...
//! 0,0,3.41,0.12,...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the draws bit for bit and writing is deterministic.

use std::io::{BufRead, Write};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::DesignMetadata;
use crate::error::{Error, Result};
use crate::model::{LinkKind, PriorSpec};
use crate::sampler::PosteriorDraws;

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to interpret the draws without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub version: u32,
    pub model_name: String,
    pub link: LinkKind,
    pub prior: PriorSpec,
    pub config: RunConfig,
    pub param_names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub step_size: Vec<f64>,
    pub accept_rate: Vec<f64>,
    pub divergent_iterations: Vec<Vec<usize>>,
    pub max_depth_hits: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub design: DesignMetadata,
    pub n_obs: usize,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFile {
    pub header: ChainHeader,
    pub draws: PosteriorDraws,
}

impl ChainFile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &RunConfig,
        prior: PriorSpec,
        design: DesignMetadata,
        n_obs: usize,
        fingerprint: u64,
        draws: PosteriorDraws,
    ) -> Self {
        let header = ChainHeader {
            version: FORMAT_VERSION,
            model_name: config.model_name(),
            link: config.link,
            prior,
            config: config.clone(),
            param_names: draws.param_names.clone(),
            n_chains: draws.n_chains(),
            n_draws: draws.n_draws(),
            step_size: draws.step_size.clone(),
            accept_rate: draws.accept_rate.clone(),
            divergent_iterations: draws.divergent_iterations.clone(),
            max_depth_hits: draws.max_depth_hits.clone(),
            n_leapfrog: draws.n_leapfrog.clone(),
            design,
            n_obs,
            fingerprint,
        };
        Self { header, draws }
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        let io = |e| Error::io("chain file", e);
        serde_json::to_writer(&mut sink, &self.header)?;
        writeln!(sink).map_err(io)?;
        writeln!(sink, "chain,iteration,{}", self.header.param_names.join(",")).map_err(io)?;
        let mut line = String::new();
        for c in 0..self.draws.n_chains() {
            for d in 0..self.draws.n_draws() {
                use std::fmt::Write as _;
                line.clear();
                write!(line, "{c},{d}").expect("string write");
                for v in self.draws.draws.slice(ndarray::s![c, d, ..]) {
                    write!(line, ",{v}").expect("string write");
                }
                line.push('\n');
                sink.write_all(line.as_bytes()).map_err(io)?;
            }
        }
        sink.flush().map_err(io)
    }

    pub fn read<R: BufRead>(mut source: R) -> Result<Self> {
        let corrupt = |offset: u64, reason: String| Error::CorruptChainFile { offset, reason };
        let mut offset = 0u64;
        let mut line = String::new();

        let mut next_line = |line: &mut String, offset: &mut u64| -> Result<Option<u64>> {
            line.clear();
            let start = *offset;
            let n = source
                .read_line(line)
                .map_err(|e| corrupt(start, format!("unreadable: {e}")))?;
            if n == 0 {
                return Ok(None);
            }
            *offset += n as u64;
            if !line.ends_with('\n') {
                return Err(corrupt(start, "incomplete final line".into()));
            }
            line.pop();
            if line.ends_with('\r') {
                line.pop();
            }
            Ok(Some(start))
        };

        let Some(_) = next_line(&mut line, &mut offset)? else {
            return Err(corrupt(0, "empty file".into()));
        };
        let header: ChainHeader = serde_json::from_str(&line)
            .map_err(|e| corrupt(e.column().saturating_sub(1) as u64, format!("bad header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(corrupt(0, format!("unsupported version {}", header.version)));
        }
        let p = header.param_names.len();
        let per_chain = |v: usize| v == header.n_chains;
        if !(per_chain(header.step_size.len())
            && per_chain(header.accept_rate.len())
            && per_chain(header.divergent_iterations.len())
            && per_chain(header.max_depth_hits.len())
            && per_chain(header.n_leapfrog.len()))
        {
            return Err(corrupt(0, "per-chain header fields disagree with n_chains".into()));
        }

        let columns_at = offset;
        let expected = format!("chain,iteration,{}", header.param_names.join(","));
        match next_line(&mut line, &mut offset)? {
            Some(_) if line == expected => {}
            Some(start) => return Err(corrupt(start, "column header does not match parameter names".into())),
            None => return Err(corrupt(columns_at, "missing column header".into())),
        }

        let total = header.n_chains * header.n_draws;
        let mut values = Vec::with_capacity(total * p);
        for row in 0..total {
            let start = match next_line(&mut line, &mut offset)? {
                Some(s) => s,
                None => {
                    return Err(corrupt(
                        offset,
                        format!("truncated: expected {total} draws, found {row}"),
                    ))
                }
            };
            let (c, d) = (row / header.n_draws, row % header.n_draws);
            let mut fields = line.split(',');
            let index_ok = fields.next() == Some(c.to_string().as_str()) && fields.next() == Some(d.to_string().as_str());
            if !index_ok {
                return Err(corrupt(start, format!("expected chain {c} iteration {d}")));
            }
            let before = values.len();
            for f in fields {
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => values.push(v),
                    _ => return Err(corrupt(start, format!("bad value '{f}'"))),
                }
            }
            if values.len() - before != p {
                return Err(corrupt(start, format!("expected {p} values, found {}", values.len() - before)));
            }
        }
        let trailing = offset;
        if next_line(&mut line, &mut offset)?.is_some() {
            return Err(corrupt(trailing, "data after the last draw".into()));
        }

        let draws = PosteriorDraws {
            draws: Array3::from_shape_vec((header.n_chains, header.n_draws, p), values)
                .map_err(|e| corrupt(0, e.to_string()))?,
            param_names: header.param_names.clone(),
            divergence_count: header.divergent_iterations.iter().map(Vec::len).collect(),
            divergent_iterations: header.divergent_iterations.clone(),
            step_size: header.step_size.clone(),
            accept_rate: header.accept_rate.clone(),
            max_depth_hits: header.max_depth_hits.clone(),
            n_leapfrog: header.n_leapfrog.clone(),
            seed: header.config.seed,
        };
        Ok(Self { header, draws })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample_file() -> ChainFile {
        let values: Vec<f64> = (0..2 * 3 * 2).map(|i| (i as f64 * 0.37).sin() * 1e3 / 7.0).collect();
        let draws = PosteriorDraws {
            draws: Array3::from_shape_vec((2, 3, 2), values).unwrap(),
            param_names: vec!["Intercept".into(), "x".into()],
            divergence_count: vec![1, 0],
            divergent_iterations: vec![vec![2], vec![]],
            step_size: vec![0.31, 0.29],
            accept_rate: vec![0.81, 0.79],
            max_depth_hits: vec![0, 0],
            n_leapfrog: vec![21, 17],
            seed: 5,
        };
        let config = RunConfig {
            data: "d.csv".into(),
            seed: 5,
            ..Default::default()
        };
        let prior = config.prior_spec();
        ChainFile::new(&config, prior, DesignMetadata::plain(vec!["x".into()]), 40, 77, draws)
    }

    fn bytes(f: &ChainFile) -> Vec<u8> {
        let mut out = Vec::new();
        f.write(&mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample_file();
        let b = bytes(&f);
        let back = ChainFile::read(Cursor::new(&b)).unwrap();
        assert_eq!(back, f);
        assert_eq!(bytes(&back), b);
    }

    #[test]
    fn truncation_reports_offset() {
        let b = bytes(&sample_file());
        let cut = b.len() - 10;
        let err = ChainFile::read(Cursor::new(&b[..cut])).unwrap_err();
        let last_line_start = b[..b.len() - 1].iter().rposition(|&c| c == b'\n').unwrap() as u64 + 1;
        match err {
            Error::CorruptChainFile { offset, .. } => assert_eq!(offset, last_line_start),
            e => panic!("{e}"),
        }
        // whole rows missing
        let end_of_row_4 = b.iter().enumerate().filter(|(_, &c)| c == b'\n').nth(5).unwrap().0 + 1;
        match ChainFile::read(Cursor::new(&b[..end_of_row_4])).unwrap_err() {
            Error::CorruptChainFile { offset, reason } => {
                assert_eq!(offset, end_of_row_4 as u64);
                assert!(reason.contains("found 4"), "{reason}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn garbage_is_rejected() {
        let mut b = bytes(&sample_file());
        let pos = b.len() - 3;
        b[pos] = b'x';
        assert!(matches!(ChainFile::read(Cursor::new(&b)), Err(Error::CorruptChainFile { .. })));
        assert!(matches!(ChainFile::read(Cursor::new(b"not json\n")), Err(Error::CorruptChainFile { .. })));
        assert!(matches!(ChainFile::read(Cursor::new(b"")), Err(Error::CorruptChainFile { offset: 0, .. })));
    }
}
