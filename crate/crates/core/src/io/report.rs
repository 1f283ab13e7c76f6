//! The JSON report document and the per-point score table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnomalyReport, Direction, EagleEyeConfig};
use crate::pipeline::{PipelineRun, Provenance};
use crate::scoring::NullModel;

pub const REPORT_FORMAT: &str = "eagleeye-report/1";

/// Serialisable summary of a [`PipelineRun`]. Every id list is ascending and
/// nothing depends on wall-clock time, so identical runs give identical text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format: String,
    pub config: EagleEyeConfig,
    pub provenance: Provenance,
    pub directions: Vec<DirectionDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDocument {
    pub direction: Direction,
    pub null_model: NullModel,
    pub flagged: Vec<usize>,
    pub pruned: Vec<usize>,
    pub equalized_count: usize,
    /// `None` when injection was disabled.
    pub injected_count: Option<usize>,
    pub ide_iterations: usize,
    pub ide_rescored: usize,
    pub report: AnomalyReport,
}

impl ReportDocument {
    pub fn from_run(run: &PipelineRun) -> Self {
        let directions = run
            .directions
            .iter()
            .map(|d| DirectionDocument {
                direction: d.direction,
                null_model: d.null_model.clone(),
                flagged: d.partition.flagged.clone(),
                pruned: d.partition.pruned.clone(),
                equalized_count: d.partition.equalized.len(),
                injected_count: d.injection_scores.as_ref().map(|_| d.injected.len()),
                ide_iterations: d.ide_iterations,
                ide_rescored: d.ide_rescored,
                report: d.report.clone(),
            })
            .collect();
        ReportDocument {
            format: REPORT_FORMAT.to_string(),
            config: run.config.clone(),
            provenance: run.provenance.clone(),
            directions,
        }
    }

    pub fn direction(&self, d: Direction) -> Option<&DirectionDocument> {
        self.directions.iter().find(|x| x.direction == d)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values are finite");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDocument =
            serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if doc.format != REPORT_FORMAT {
            return Err(Error::Report(format!(
                "unsupported format {:?}, expected {REPORT_FORMAT:?}",
                doc.format
            )));
        }
        Ok(doc)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Per-point table for both samples:
/// `sample,id,upsilon,k_star,flagged,pruned,cluster`, where `cluster` is the
/// recovered anomaly label or empty.
pub fn format_scores(run: &PipelineRun) -> String {
    let mut out = String::from("sample,id,upsilon,k_star,flagged,pruned,cluster\n");
    for d in &run.directions {
        let n = d.scores.len();
        let mark = |ids: &[usize]| {
            let mut m = vec![false; n];
            for &i in ids {
                m[i] = true;
            }
            m
        };
        let flagged = mark(&d.partition.flagged);
        let pruned = mark(&d.partition.pruned);
        let mut cluster = vec![None; n];
        for c in &d.report.clusters {
            for &i in &c.members {
                cluster[i] = Some(c.alpha);
            }
        }
        let sample = d.direction.scanned();
        for r in &d.scores {
            let i = r.point_id;
            let _ = write!(
                out,
                "{sample},{i},{},{},{},{},",
                r.upsilon, r.k_star, flagged[i] as u8, pruned[i] as u8
            );
            if let Some(a) = cluster[i] {
                let _ = write!(out, "{a}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_scores(path: &Path, run: &PipelineRun) -> Result<()> {
    fs::write(path, format_scores(run)).map_err(|e| Error::io(path, e))
}
