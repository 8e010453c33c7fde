//! JSONL record formats for batch adjustment.
//!
//! One input object per line; the output has exactly one object per non-blank
//! input line, in input order. Failures are reported in-band through the
//! `error` field as `"<Kind>: <detail>"`.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use reward_adjust_core::{adjust_group, Error, RewardGroup, SolverConfig};
use serde::{Deserialize, Serialize};

/// Environment variable capping the worker threads used by [`adjust_stream`].
pub const THREADS_ENV: &str = "REWARD_ADJ_THREADS";

/// Lines handed to the worker pool at once.
const CHUNK_LINES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustInput {
    pub id: String,
    pub rewards: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    pub min: f64,
    pub max: f64,
}

impl AdjustInput {
    pub fn into_group(self) -> Result<RewardGroup, String> {
        let group = RewardGroup::new(self.id, self.rewards, self.min, self.max);
        match (self.probs, self.logprobs) {
            (Some(_), Some(_)) => Err("InvalidRecord: both probs and logprobs are present".into()),
            (Some(p), None) => Ok(group.with_probabilities(p)),
            (None, Some(lp)) => Ok(group.with_log_probabilities(lp)),
            (None, None) => Ok(group),
        }
    }
}

impl From<&RewardGroup> for AdjustInput {
    fn from(g: &RewardGroup) -> Self {
        use reward_adjust_core::ProbSpec;
        let (probs, logprobs) = match &g.prob_spec {
            ProbSpec::Uniform => (None, None),
            ProbSpec::Probabilities(p) => (Some(p.clone()), None),
            ProbSpec::LogProbabilities(lp) => (None, Some(lp.clone())),
        };
        Self {
            id: g.group_id.clone(),
            rewards: g.rewards.clone(),
            probs,
            logprobs,
            min: g.lower,
            max: g.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustOutput {
    /// `None` only when the line was too malformed to recover an id.
    pub id: Option<String>,
    pub adjusted: Vec<f64>,
    pub objective: Option<f64>,
    pub original_objective: Option<f64>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub alpha: Option<f64>,
    pub error: Option<String>,
}

impl AdjustOutput {
    fn failed(id: Option<String>, error: String) -> Self {
        Self {
            id,
            adjusted: Vec::new(),
            objective: None,
            original_objective: None,
            k: None,
            l: None,
            alpha: None,
            error: Some(error),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

pub fn format_error(e: &Error) -> String {
    format!("{}: {}", e.name(), e)
}

/// Best-effort id recovery from a line that failed to deserialize.
fn salvage_id(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("id")?.as_str().map(str::to_owned)
}

/// Parses and adjusts one JSONL line.
pub fn adjust_line(line: &str, cfg: &SolverConfig) -> AdjustOutput {
    let input: AdjustInput = match serde_json::from_str(line) {
        Ok(input) => input,
        Err(e) => return AdjustOutput::failed(salvage_id(line), format!("MalformedRecord: {e}")),
    };
    let id = input.id.clone();
    let group = match input.into_group() {
        Ok(g) => g,
        Err(msg) => return AdjustOutput::failed(Some(id), msg),
    };
    match adjust_group(&group, cfg) {
        Ok(res) => AdjustOutput {
            id: Some(id),
            adjusted: res.adjusted_rewards,
            objective: Some(res.objective),
            original_objective: Some(res.original_objective),
            k: Some(res.k),
            l: Some(res.l),
            alpha: res.alpha,
            error: None,
        },
        Err(e) => AdjustOutput::failed(Some(id), format_error(&e)),
    }
}

/// Summary of an [`adjust_stream`] run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub records: usize,
    pub errors: usize,
}

impl StreamStats {
    /// Process exit code for a run that finished without I/O failure.
    pub fn exit_code(&self) -> i32 {
        if self.errors == 0 {
            0
        } else {
            2
        }
    }
}

/// Builds the worker pool, honouring [`THREADS_ENV`] when it holds a positive
/// integer.
pub fn thread_pool() -> io::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(io::Error::other)
}

/// Adjusts every non-blank line of `reader`, writing one output line each.
/// Records are processed in parallel chunks but emitted in input order.
pub fn adjust_stream<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    cfg: &SolverConfig,
    pool: &rayon::ThreadPool,
) -> io::Result<StreamStats> {
    let mut stats = StreamStats::default();
    let mut chunk: Vec<String> = Vec::with_capacity(CHUNK_LINES);
    let mut lines = reader.lines();
    loop {
        chunk.clear();
        for line in lines.by_ref() {
            let line = line?;
            if !line.trim().is_empty() {
                chunk.push(line);
                if chunk.len() == CHUNK_LINES {
                    break;
                }
            }
        }
        if chunk.is_empty() {
            break;
        }
        let outputs: Vec<AdjustOutput> = pool.install(|| chunk.par_iter().map(|l| adjust_line(l, cfg)).collect());
        for out in &outputs {
            stats.records += 1;
            stats.errors += usize::from(out.is_error());
            serde_json::to_writer(&mut writer, out)?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(stats)
}
