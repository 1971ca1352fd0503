//! Instance and labeled-dataset files.
//!
//! Both are line-delimited: a version header line, then one JSON record per
//! line. Instance files start with `offload-instance v1`; labeled datasets
//! start with `offload-labels v1` and carry the instance, the optimal
//! decision index (vehicle 0 is the most significant bit), the allocation
//! vector and the optimal cost.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{solve_exhaustive, solve_grid, solve_sbb, SbbConfig, SolveReport};
use crate::system::OffloadInstance;

pub const INSTANCE_HEADER: &str = "offload-instance v1";
pub const LABEL_HEADER: &str = "offload-labels v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub instance: OffloadInstance,
    pub decision: usize,
    pub alloc: Vec<f64>,
    pub cost: f64,
}

impl LabelRecord {
    pub fn from_report(instance: OffloadInstance, report: &SolveReport) -> Self {
        LabelRecord {
            decision: report.solution.decision_index(),
            alloc: report.solution.alloc.clone(),
            cost: report.solution.cost,
            instance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "solver")]
pub enum LabelSolver {
    Exhaustive,
    Grid { step: f64 },
    Sbb(SbbConfig),
}

impl LabelSolver {
    pub fn solve(&self, inst: &OffloadInstance) -> Result<SolveReport> {
        match self {
            LabelSolver::Exhaustive => solve_exhaustive(inst),
            LabelSolver::Grid { step } => solve_grid(inst, *step),
            LabelSolver::Sbb(cfg) => solve_sbb(inst, cfg),
        }
    }
}

/// Labels every instance, in parallel on the current rayon pool. Output order
/// matches input order.
pub fn label_instances(
    instances: &[OffloadInstance],
    solver: &LabelSolver,
) -> Result<Vec<LabelRecord>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let report = solver
                .solve(inst)
                .map_err(|e| Error::InvalidParameter(format!("instance {i}: {e}")))?;
            Ok(LabelRecord::from_report(inst.clone(), &report))
        })
        .collect()
}

fn encode_lines<T: Serialize>(header: &str, records: &[T]) -> Result<String> {
    let mut out = String::with_capacity(64 + records.len() * 400);
    out.push_str(header);
    out.push('\n');
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::InvalidParameter(format!("cannot encode record: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

fn decode_lines<T: DeserializeOwned>(
    header: &str,
    reader: impl BufRead,
    source: &str,
) -> Result<Vec<T>> {
    let mut lines = reader.lines();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(|e| Error::io(source, e))?;
    if first.trim_end() != header {
        return Err(parse_err(
            1,
            format!("expected header `{header}`, found `{}`", first.trim_end()),
        ));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn encode_instances(instances: &[OffloadInstance]) -> Result<String> {
    encode_lines(INSTANCE_HEADER, instances)
}

pub fn decode_instances(text: &str) -> Result<Vec<OffloadInstance>> {
    let insts: Vec<OffloadInstance> = decode_lines(INSTANCE_HEADER, text.as_bytes(), "<memory>")?;
    validate_instances(&insts, "<memory>")?;
    Ok(insts)
}

pub fn encode_labels(records: &[LabelRecord]) -> Result<String> {
    encode_lines(LABEL_HEADER, records)
}

pub fn decode_labels(text: &str) -> Result<Vec<LabelRecord>> {
    decode_lines(LABEL_HEADER, text.as_bytes(), "<memory>")
}

fn validate_instances(insts: &[OffloadInstance], source: &str) -> Result<()> {
    for (i, inst) in insts.iter().enumerate() {
        inst.validate().map_err(|e| Error::Parse {
            path: source.to_string(),
            line: i + 2,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn write_instances(path: &Path, instances: &[OffloadInstance]) -> Result<()> {
    write_text(path, &encode_instances(instances)?)
}

pub fn read_instances(path: &Path) -> Result<Vec<OffloadInstance>> {
    let source = path.display().to_string();
    let insts: Vec<OffloadInstance> = decode_lines(INSTANCE_HEADER, open(path)?, &source)?;
    validate_instances(&insts, &source)?;
    Ok(insts)
}

pub fn write_labels(path: &Path, records: &[LabelRecord]) -> Result<()> {
    write_text(path, &encode_labels(records)?)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    decode_lines(LABEL_HEADER, open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_gen::{generate_instances, RangeConfig};

    #[test]
    fn instance_text_round_trip() {
        let insts = generate_instances(3, 5, &RangeConfig::default(), 2).unwrap();
        let text = encode_instances(&insts).unwrap();
        assert!(text.starts_with("offload-instance v1\n"));
        assert_eq!(text.lines().count(), 6);
        assert_eq!(decode_instances(&text).unwrap(), insts);
    }

    #[test]
    fn malformed_line_is_named() {
        let insts = generate_instances(2, 3, &RangeConfig::default(), 2).unwrap();
        let mut text = encode_instances(&insts).unwrap();
        text.push_str("{not json}\n");
        match decode_instances(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            decode_labels("offload-instance v1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn labels_keep_input_order() {
        let insts = generate_instances(3, 40, &RangeConfig::default(), 6).unwrap();
        let labels = label_instances(&insts, &LabelSolver::Exhaustive).unwrap();
        for (l, i) in labels.iter().zip(&insts) {
            assert_eq!(&l.instance, i);
        }
        let text = encode_labels(&labels).unwrap();
        assert_eq!(decode_labels(&text).unwrap(), labels);
    }
}
