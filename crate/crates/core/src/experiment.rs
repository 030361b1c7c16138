//! Seed batches and parameter sweeps over the two-stage optimizer, plus
//! the training driver.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::Scenario;
use crate::config::{override_field, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::layout_encode_normalized;
use crate::maddpg::{self, StepLog};
use crate::optimizer::{run_two_stage, Baseline, TwoStageSolution};
use crate::parallel::par_map;

/// One evaluated (seed, sweep point, scheme).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub var: String,
    pub value: Option<f64>,
    pub r_b: f64,
    pub r_e: f64,
    pub r_s: f64,
    pub sinr_r: f64,
    pub eps_theta: f64,
    pub alpha: f64,
    pub rho0: f64,
    pub pose_n: Option<usize>,
    pub pose_m: Option<usize>,
    pub p_f: f64,
    pub wall_time_s: f64,
    pub infeasible: bool,
    pub baseline: Baseline,
}

impl ResultRow {
    pub fn from_outcome(
        seed: u64,
        var: &str,
        value: Option<f64>,
        baseline: Baseline,
        outcome: &Result<TwoStageSolution>,
        wall_time_s: f64,
    ) -> Self {
        let mut row = Self {
            seed,
            var: var.to_string(),
            value,
            r_b: f64::NAN,
            r_e: f64::NAN,
            r_s: f64::NAN,
            sinr_r: f64::NAN,
            eps_theta: f64::NAN,
            alpha: f64::NAN,
            rho0: f64::NAN,
            pose_n: None,
            pose_m: None,
            p_f: f64::NAN,
            wall_time_s,
            infeasible: true,
            baseline,
        };
        if let Ok(s) = outcome {
            row.r_b = s.metrics.r_b;
            row.r_e = s.metrics.r_e;
            row.r_s = s.metrics.r_s;
            row.sinr_r = s.metrics.sinr_r;
            row.eps_theta = s.metrics.eps_theta;
            row.alpha = s.split.alpha;
            row.rho0 = s.split.rho0;
            row.pose_n = Some(s.pose.n);
            row.pose_m = Some(s.pose.m);
            row.p_f = layout_encode_normalized(&s.layout);
            row.infeasible = false;
        }
        row
    }

    /// `R_s`, counting an infeasible run as zero.
    pub fn secrecy_rate_or_zero(&self) -> f64 {
        if self.infeasible {
            0.0
        } else {
            self.r_s
        }
    }
}

/// Parses `a..b` (inclusive) or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("seeds '{s}': {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| bad(&e))?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|e| bad(&e))?;
        if b < a {
            return Err(bad(&"empty range"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|e| bad(&e)))
        .collect()
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("value '{t}': {e}")))
        })
        .collect()
}

/// The proposed scheme followed by `extra`, without repeats.
pub fn schemes(extra: &[Baseline]) -> Vec<Baseline> {
    let mut out = vec![Baseline::Proposed];
    for b in extra {
        if !out.contains(b) {
            out.push(*b);
        }
    }
    out
}

fn evaluate(
    cfg: &ScenarioConfig,
    seed: u64,
    baseline: Baseline,
    var: &str,
    value: Option<f64>,
) -> ResultRow {
    let start = Instant::now();
    let outcome = Scenario::new(cfg, seed).and_then(|sc| run_two_stage(&sc, baseline));
    ResultRow::from_outcome(
        seed,
        var,
        value,
        baseline,
        &outcome,
        start.elapsed().as_secs_f64(),
    )
}

/// One row per (scheme, seed), schemes outermost.
pub fn optimize(
    cfg: &ScenarioConfig,
    seeds: &[u64],
    baselines: &[Baseline],
    workers: usize,
) -> Vec<ResultRow> {
    let jobs: Vec<(Baseline, u64)> = baselines
        .iter()
        .flat_map(|&b| seeds.iter().map(move |&s| (b, s)))
        .collect();
    par_map(jobs.len(), workers, |i| {
        evaluate(cfg, jobs[i].1, jobs[i].0, "", None)
    })
}

/// Grid over one config key; rows ordered by (value, scheme, seed).
pub fn sweep(
    doc: &Value,
    var: &str,
    values: &[f64],
    seeds: &[u64],
    baselines: &[Baseline],
    workers: usize,
) -> Result<Vec<ResultRow>> {
    let configs = values
        .iter()
        .map(|&v| {
            let mut d = doc.clone();
            override_field(&mut d, var, v)?;
            ScenarioConfig::from_value(&d)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        for &b in baselines {
            for &s in seeds {
                jobs.push((k, v, b, s));
            }
        }
    }
    Ok(par_map(jobs.len(), workers, |i| {
        let (k, v, b, s) = jobs[i];
        evaluate(&configs[k], s, b, var, Some(v))
    }))
}

/// Training log plus the learned policy's evaluation row.
pub struct TrainReport {
    pub log: Vec<StepLog>,
    pub evaluation: ResultRow,
    pub reference: ResultRow,
}

/// Trains on the scenario drawn from `seed` for `episodes` episodes.
pub fn train(cfg: &ScenarioConfig, seed: u64, episodes: usize) -> Result<TrainReport> {
    let mut tc = cfg.train.clone();
    tc.episodes = episodes;
    let sc = Scenario::new(cfg, seed)?;
    let start = Instant::now();
    let out = maddpg::train(&sc, &tc, seed)?;
    let outcome = out
        .evaluation
        .ok_or_else(|| Error::Infeasible("learned policy lands on an infeasible point".into()));
    let evaluation = ResultRow::from_outcome(
        seed,
        "episodes",
        Some(episodes as f64),
        Baseline::Proposed,
        &outcome,
        start.elapsed().as_secs_f64(),
    );
    let reference = evaluate(cfg, seed, Baseline::Proposed, "episodes", Some(0.0));
    Ok(TrainReport {
        log: out.log,
        evaluation,
        reference,
    })
}

/// Median of finite values; `NaN` when none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median `R_s` (infeasible as zero) per scheme and sweep value, in row order.
pub fn median_series(rows: &[ResultRow]) -> Vec<(Baseline, Vec<(f64, f64)>)> {
    let mut out: Vec<(Baseline, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let x = r.value.unwrap_or(0.0);
        let idx = match out.iter().position(|(b, _)| *b == r.baseline) {
            Some(i) => i,
            None => {
                out.push((r.baseline, Vec::new()));
                out.len() - 1
            }
        };
        if !out[idx].1.iter().any(|(v, _)| *v == x) {
            out[idx].1.push((x, 0.0));
        }
    }
    for (b, pts) in out.iter_mut() {
        for (x, y) in pts.iter_mut() {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.baseline == *b && r.value.unwrap_or(0.0) == *x)
                .map(ResultRow::secrecy_rate_or_zero)
                .collect();
            *y = median(&vals);
        }
    }
    out
}
