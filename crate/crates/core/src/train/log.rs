use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::RankingLoss;

pub const LOG_HEADER: &str = "iteration,epoch,variant,total_loss,rank_loss,reg_loss,degenerate,lr,val_accuracy";

/// One optimizer step. Losses are batch means; `reg_loss` is empty when
/// regression is off and `val_accuracy` only on validation iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub iteration: u64,
    pub epoch: u64,
    pub variant: RankingLoss,
    pub total_loss: f64,
    pub rank_loss: f64,
    pub reg_loss: Option<f64>,
    pub degenerate: usize,
    pub learning_rate: f64,
    pub val_accuracy: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainLogEntry {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.epoch,
            self.variant.name(),
            self.total_loss,
            self.rank_loss,
            opt(self.reg_loss),
            self.degenerate,
            self.learning_rate,
            opt(self.val_accuracy)
        )
    }

    pub fn from_csv(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("expected 9 fields, found {}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let int = |s: &str| s.parse::<u64>().map_err(|e| format!("{s:?}: {e}"));
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        Ok(Self {
            iteration: int(f[0])?,
            epoch: int(f[1])?,
            variant: f[2].parse()?,
            total_loss: num(f[3])?,
            rank_loss: num(f[4])?,
            reg_loss: maybe(f[5])?,
            degenerate: int(f[6])? as usize,
            learning_rate: num(f[7])?,
            val_accuracy: maybe(f[8])?,
        })
    }
}

pub fn write_log(path: &Path, entries: &[TrainLogEntry]) -> Result<()> {
    let mut out = String::with_capacity(64 * (entries.len() + 1));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(out, "{}", e.to_csv());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<TrainLogEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(format(1, "unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| TrainLogEntry::from_csv(l).map_err(|r| format(i + 2, r)))
        .collect()
}
