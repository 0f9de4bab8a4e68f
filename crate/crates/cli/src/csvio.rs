//! Wide CSV datasets: one row per patient, blank cells for stages not reached.
//!
//! Columns are `Y1..YJ, Y_primary, A1..AJ`, the covariates of each stage and
//! `R1..R(J-1)`, optionally preceded by `id`. Covariate columns are `O1..OJ`, or
//! `name_1..name_J` for each name when the model declares named covariates.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use qshared_core::{SmartDataset, Trajectory, TreatmentCoding};

use crate::error::CliError;

/// What to do with a responder whose row still has cells for later stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ResponderPolicy {
    /// Refuse the dataset, naming the row.
    #[default]
    Reject,
    /// Drop every cell after the stage the patient responded at.
    Truncate,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Named covariates; empty means the single covariate `O_j` per stage.
    pub covariates: Vec<String>,
    /// Treatment coding; inferred from the data (smaller value first) when absent.
    pub coding: Option<TreatmentCoding>,
    pub responders: ResponderPolicy,
    /// `(stage, covariate index)` columns that may be left out of the header; they
    /// are read as 0.
    pub optional: Vec<(usize, usize)>,
}

struct Schema {
    stages: usize,
    id: Option<usize>,
    y: Vec<usize>,
    y_primary: usize,
    a: Vec<usize>,
    /// `o[j][k]`: column of covariate `k` of stage `j + 1`, if present.
    o: Vec<Vec<Option<usize>>>,
    r: Vec<usize>,
}

fn covariate_column(names: &[String], k: usize, stage: usize) -> String {
    if names.is_empty() {
        format!("O{stage}")
    } else {
        format!("{}_{stage}", names[k])
    }
}

impl Schema {
    fn from_header(header: &csv::StringRecord, opts: &IngestOptions) -> Result<Self, CliError> {
        let covariates = &opts.covariates;
        if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
            return Err(CliError::Schema("empty file: no header row".into()));
        }
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if pos.insert(h.trim(), i).is_some() {
                return Err(CliError::Schema(format!("duplicate column `{}`", h.trim())));
            }
        }
        let stages = (1..).take_while(|j| pos.contains_key(format!("A{j}").as_str())).count();
        if stages == 0 {
            return Err(CliError::Schema("missing column `A1`".into()));
        }
        let n_cov = covariates.len().max(1);
        let mut expected = Vec::new();
        if pos.contains_key("id") {
            expected.push("id".to_string());
        }
        expected.extend((1..=stages).map(|j| format!("Y{j}")));
        expected.push("Y_primary".into());
        expected.extend((1..=stages).map(|j| format!("A{j}")));
        expected.extend((1..stages).map(|j| format!("R{j}")));
        if let Some(missing) = expected.iter().find(|c| !pos.contains_key(c.as_str())) {
            return Err(CliError::Schema(format!("missing column `{missing}`")));
        }
        for j in 1..=stages {
            for k in 0..n_cov {
                let c = covariate_column(covariates, k, j);
                if !pos.contains_key(c.as_str()) && !opts.optional.contains(&(j, k)) {
                    return Err(CliError::Schema(format!("missing column `{c}`")));
                }
                expected.push(c);
            }
        }
        if let Some(extra) = header.iter().map(str::trim).find(|h| !expected.iter().any(|e| e == h)) {
            return Err(CliError::Schema(format!("unexpected column `{extra}`")));
        }
        let at = |c: String| pos[c.as_str()];
        Ok(Schema {
            stages,
            id: pos.get("id").copied(),
            y: (1..=stages).map(|j| at(format!("Y{j}"))).collect(),
            y_primary: at("Y_primary".into()),
            a: (1..=stages).map(|j| at(format!("A{j}"))).collect(),
            o: (1..=stages)
                .map(|j| (0..n_cov).map(|k| pos.get(covariate_column(covariates, k, j).as_str()).copied()).collect())
                .collect(),
            r: (1..stages).map(|j| at(format!("R{j}"))).collect(),
        })
    }

    /// Cells belonging to stage `j` (1-based), the responder flag included.
    fn stage_cells(&self, j: usize) -> Vec<usize> {
        let mut cells = vec![self.y[j - 1], self.a[j - 1]];
        cells.extend(self.o[j - 1].iter().flatten());
        if j < self.stages {
            cells.push(self.r[j - 1]);
        }
        cells
    }
}

fn number(cell: &str, row: usize, column: &str) -> Result<Option<f64>, CliError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match f64::from_str(cell) {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(CliError::Parse { row, column: column.to_string(), value: cell.to_string() }),
    }
}

/// Read and validate a dataset.
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<SmartDataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv(input: impl Read, opts: &IngestOptions) -> Result<SmartDataset, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(CliError::Schema("empty file: no header row".into())),
        Some(h) => h.map_err(|e| CliError::Schema(e.to_string()))?,
    };
    let schema = Schema::from_header(&header, opts)?;
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let j_max = schema.stages;
    let mut trajectories = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::Schema(format!("row {row}: {e}")))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != names.len() {
            return Err(CliError::Schema(format!("row {row}: {} cells for {} columns", rec.len(), names.len())));
        }
        let mut cells: Vec<Option<f64>> = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            cells.push(if Some(c) == schema.id { None } else { number(cell, row, &names[c])? });
        }
        let patient_id = match schema.id {
            Some(c) => rec[c].trim().to_string(),
            None => row.to_string(),
        };
        let violation = |msg: String| CliError::Invariant { row, patient: patient_id.clone(), message: msg };

        for (j, &c) in schema.r.iter().enumerate() {
            if let Some(v) = cells[c] {
                if v != 0.0 && v != 1.0 {
                    return Err(CliError::Parse { row, column: format!("R{}", j + 1), value: v.to_string() });
                }
            }
        }
        if let Some(exit) = (1..j_max).find(|&j| cells[schema.r[j - 1]] == Some(1.0)) {
            let later: Vec<usize> = (exit + 1..=j_max).flat_map(|k| schema.stage_cells(k)).collect();
            match opts.responders {
                ResponderPolicy::Truncate => later.iter().for_each(|&c| cells[c] = None),
                ResponderPolicy::Reject => {
                    if let Some(&c) = later.iter().find(|&&c| cells[c].is_some()) {
                        return Err(violation(format!(
                            "responder at stage {exit} (R{exit} = 1) has a value in `{}`",
                            names[c]
                        )));
                    }
                }
            }
        }
        let reached = (1..=j_max).take_while(|&j| cells[schema.a[j - 1]].is_some()).count();
        if reached == 0 {
            return Err(violation("`A1` is blank".into()));
        }
        if let Some(&c) = (reached + 1..=j_max)
            .flat_map(|k| schema.stage_cells(k))
            .collect::<Vec<_>>()
            .iter()
            .find(|&&c| cells[c].is_some())
        {
            return Err(violation(format!("`A{}` is blank but `{}` is not", reached + 1, names[c])));
        }
        let mut covariates = Vec::with_capacity(reached);
        for j in 1..=reached {
            let o = schema.o[j - 1]
                .iter()
                .map(|&c| match c {
                    None => Ok(0.0),
                    Some(c) => cells[c]
                        .ok_or_else(|| violation(format!("`{}` is blank at a stage the patient reached", names[c]))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            covariates.push(o);
        }
        let mut responders = Vec::new();
        for j in 1..=reached.min(j_max - 1) {
            let c = schema.r[j - 1];
            responders.push(
                cells[c].ok_or_else(|| violation(format!("`{}` is blank at a stage the patient reached", names[c])))?
                    == 1.0,
            );
        }
        let primary_outcome = cells[schema.y_primary].ok_or_else(|| violation("`Y_primary` is blank".into()))?;
        trajectories.push(Trajectory {
            patient_id: patient_id.clone(),
            covariates,
            treatments: (1..=reached).map(|j| cells[schema.a[j - 1]].expect("reached")).collect(),
            responders,
            stage_outcomes: (1..=reached).map(|j| cells[schema.y[j - 1]]).collect(),
            primary_outcome,
        });
        if let Err(e) = trajectories.last().expect("pushed").validate(j_max) {
            return Err(violation(e.to_string()));
        }
    }
    if trajectories.is_empty() {
        return Err(CliError::Schema("no data rows".into()));
    }
    let coding = match opts.coding {
        Some(c) => c,
        None => infer_coding(&trajectories)?,
    };
    Ok(SmartDataset::new(j_max, coding, trajectories)?)
}

fn infer_coding(trajectories: &[Trajectory]) -> Result<TreatmentCoding, CliError> {
    let mut values: Vec<f64> = trajectories.iter().flat_map(|t| t.treatments.iter().copied()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    match values[..] {
        [t1, t2] => Ok(TreatmentCoding::new(t1, t2)?),
        _ => Err(CliError::Invalid(format!(
            "cannot infer the treatment coding from {} distinct treatment values; pass --coding",
            values.len()
        ))),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Write `data` in the wide layout with an `id` column.
pub fn write_csv(data: &SmartDataset, covariates: &[String], out: impl Write) -> Result<(), CliError> {
    let j_max = data.num_stages();
    let n_cov = covariates.len().max(1);
    let mut header = vec!["id".to_string()];
    header.extend((1..=j_max).map(|j| format!("Y{j}")));
    header.push("Y_primary".into());
    header.extend((1..=j_max).map(|j| format!("A{j}")));
    for j in 1..=j_max {
        header.extend((0..n_cov).map(|k| covariate_column(covariates, k, j)));
    }
    header.extend((1..j_max).map(|j| format!("R{j}")));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(CliError::csv)?;
    for t in data.trajectories() {
        let mut rec = vec![t.patient_id.clone()];
        rec.extend((1..=j_max).map(|j| cell(t.stage_outcomes.get(j - 1).copied().flatten())));
        rec.push(t.primary_outcome.to_string());
        rec.extend((1..=j_max).map(|j| cell(t.treatment(j))));
        for j in 1..=j_max {
            rec.extend((0..n_cov).map(|k| cell(t.covariate(j, k))));
        }
        rec.extend((1..j_max).map(|j| cell(t.responders.get(j - 1).map(|&r| f64::from(u8::from(r))))));
        w.write_record(&rec).map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::Io { path: "<output>".into(), message: e.to_string() })?;
    Ok(())
}
