//! Paired-run comparison and report emission.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::chain::{classify_steps, Outcome};
use crate::pipeline::Decision;
use crate::threats::stealth_check;
use crate::trace::{EpisodeTrace, StepRecord};

pub const CSV_HEADER: [&str; 11] = [
    "scenario_id",
    "episode",
    "step",
    "baseline_target_kph",
    "attacked_target_kph",
    "delta_kph",
    "verdict_baseline",
    "verdict_attacked",
    "stealth",
    "persistence_episodes",
    "outcome",
];

/// One row per (scenario, episode, step). Fields that need both runs are
/// empty when only one side was executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub episode: u32,
    pub step: u32,
    pub baseline_target_kph: Option<f64>,
    pub attacked_target_kph: Option<f64>,
    pub delta_kph: Option<f64>,
    pub verdict_baseline: Option<String>,
    pub verdict_attacked: Option<String>,
    pub stealth: Option<bool>,
    pub persistence_episodes: Option<u32>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub stealth: Option<bool>,
    pub persistence_episodes: Option<u32>,
    pub sc_rejections_baseline: Option<u32>,
    pub sc_rejections_attacked: Option<u32>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub baseline: Option<EpisodeTrace>,
    pub attacked: Option<EpisodeTrace>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentReport {
    pub rows: Vec<ReportRow>,
    pub summaries: Vec<ScenarioSummary>,
    pub runs: Vec<RunRecord>,
}

impl MisalignmentReport {
    pub fn merge(mut self, other: MisalignmentReport) -> Self {
        self.rows.extend(other.rows);
        self.summaries.extend(other.summaries);
        self.runs.extend(other.runs);
        self
    }

    pub fn summary(&self, scenario_id: &str) -> Option<&ScenarioSummary> {
        self.summaries.iter().find(|s| s.scenario_id == scenario_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Baseline,
    Attacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn sc_rejections(trace: &EpisodeTrace) -> u32 {
    trace
        .steps
        .iter()
        .flat_map(|s| s.verdicts.iter())
        .filter(|v| v.decision != Decision::Approve)
        .count() as u32
}

/// Episodes after the last injected one that still differ from the baseline.
fn persistence(baseline: &EpisodeTrace, attacked: &EpisodeTrace) -> u32 {
    let Some(last) = attacked.injected_episodes().into_iter().max() else {
        return 0;
    };
    (last + 1..attacked.episodes)
        .filter(|e| {
            let b = baseline.steps.iter().filter(|s| s.episode == *e);
            let a = attacked.steps.iter().filter(|s| s.episode == *e);
            b.zip(a)
                .any(|(b, a)| b.approved.target_speed_kph != a.approved.target_speed_kph)
        })
        .count() as u32
}

fn non_negative_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

pub fn compare(baseline: &EpisodeTrace, attacked: &EpisodeTrace) -> Result<MisalignmentReport, HarnessError> {
    let stealth = stealth_check(baseline, attacked)?;
    let persistence = persistence(baseline, attacked);
    let rows = baseline
        .steps
        .iter()
        .zip(&attacked.steps)
        .map(|(b, a)| ReportRow {
            scenario_id: baseline.scenario_id.clone(),
            episode: b.episode,
            step: b.step,
            baseline_target_kph: Some(b.approved.target_speed_kph),
            attacked_target_kph: Some(a.approved.target_speed_kph),
            delta_kph: Some(non_negative_zero(
                a.approved.target_speed_kph - b.approved.target_speed_kph,
            )),
            verdict_baseline: Some(b.verdict_label()),
            verdict_attacked: Some(a.verdict_label()),
            stealth: Some(stealth),
            persistence_episodes: Some(persistence),
            outcome: Some(classify_steps(std::slice::from_ref(b), std::slice::from_ref(a))),
        })
        .collect();
    Ok(MisalignmentReport {
        rows,
        summaries: vec![ScenarioSummary {
            scenario_id: baseline.scenario_id.clone(),
            stealth: Some(stealth),
            persistence_episodes: Some(persistence),
            sc_rejections_baseline: Some(sc_rejections(baseline)),
            sc_rejections_attacked: Some(sc_rejections(attacked)),
            outcome: Some(classify_steps(&baseline.steps, &attacked.steps)),
        }],
        runs: vec![RunRecord {
            scenario_id: baseline.scenario_id.clone(),
            baseline: Some(baseline.clone()),
            attacked: Some(attacked.clone()),
        }],
    })
}

/// Report for a run executed on one side only.
pub fn single_run(trace: &EpisodeTrace, side: Side) -> MisalignmentReport {
    let pick = |s: &StepRecord, want: Side| (side == want).then_some(s.approved.target_speed_kph);
    let label = |s: &StepRecord, want: Side| (side == want).then(|| s.verdict_label());
    let rows = trace
        .steps
        .iter()
        .map(|s| ReportRow {
            scenario_id: trace.scenario_id.clone(),
            episode: s.episode,
            step: s.step,
            baseline_target_kph: pick(s, Side::Baseline),
            attacked_target_kph: pick(s, Side::Attacked),
            delta_kph: None,
            verdict_baseline: label(s, Side::Baseline),
            verdict_attacked: label(s, Side::Attacked),
            stealth: None,
            persistence_episodes: None,
            outcome: None,
        })
        .collect();
    let rejections = Some(sc_rejections(trace));
    MisalignmentReport {
        rows,
        summaries: vec![ScenarioSummary {
            scenario_id: trace.scenario_id.clone(),
            stealth: None,
            persistence_episodes: None,
            sc_rejections_baseline: rejections.filter(|_| side == Side::Baseline),
            sc_rejections_attacked: rejections.filter(|_| side == Side::Attacked),
            outcome: None,
        }],
        runs: vec![RunRecord {
            scenario_id: trace.scenario_id.clone(),
            baseline: (side == Side::Baseline).then(|| trace.clone()),
            attacked: (side == Side::Attacked).then(|| trace.clone()),
        }],
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{:.3}", non_negative_zero(v))).unwrap_or_default()
}

fn csv_record(row: &ReportRow) -> [String; 11] {
    [
        row.scenario_id.clone(),
        row.episode.to_string(),
        row.step.to_string(),
        num(row.baseline_target_kph),
        num(row.attacked_target_kph),
        num(row.delta_kph),
        row.verdict_baseline.clone().unwrap_or_default(),
        row.verdict_attacked.clone().unwrap_or_default(),
        row.stealth.map(|b| b.to_string()).unwrap_or_default(),
        row.persistence_episodes.map(|p| p.to_string()).unwrap_or_default(),
        row.outcome.map(|o| o.to_string()).unwrap_or_default(),
    ]
}

pub fn write_report<W: Write>(report: &MisalignmentReport, format: ReportFormat, out: W) -> std::io::Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for row in &report.rows {
                w.write_record(csv_record(row))?;
            }
            w.flush()
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")
        }
    }
}

pub fn render_report(report: &MisalignmentReport, format: ReportFormat) -> String {
    let mut buf = Vec::new();
    write_report(report, format, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("reports are UTF-8")
}

pub fn emit_report(report: &MisalignmentReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render_report(report, format)).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{builtin_scenario, run};

    #[test]
    fn empty_report_is_header_only() {
        let csv = render_report(&MisalignmentReport::default(), ReportFormat::Csv);
        assert_eq!(csv, format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn identical_traces_have_no_delta() {
        let c = builtin_scenario("case1-highway-routine").unwrap();
        let b = run(&c, false).unwrap();
        let r = compare(&b, &b).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|r| r.delta_kph == Some(0.0) && r.persistence_episodes == Some(0)));
        assert_eq!(r.summaries[0].outcome, Some(Outcome::NoEffect));
    }

    #[test]
    fn two_scenarios_one_step_two_rows() {
        let mut total = MisalignmentReport::default();
        for id in ["case1-highway-routine", "case2-arterial-routine"] {
            let mut c = builtin_scenario(id).unwrap();
            c.steps = 1;
            let r = compare(&run(&c, false).unwrap(), &run(&c, true).unwrap()).unwrap();
            total = total.merge(r);
        }
        let csv = render_report(&total, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn unpaired_traces_rejected() {
        let a = run(&builtin_scenario("case1-highway-routine").unwrap(), false).unwrap();
        let b = run(&builtin_scenario("case1-arterial-routine").unwrap(), false).unwrap();
        assert!(compare(&a, &b).is_err());
    }

    #[test]
    fn single_side_leaves_other_columns_blank() {
        let t = run(&builtin_scenario("case1-highway-routine").unwrap(), false).unwrap();
        let csv = render_report(&single_run(&t, Side::Baseline), ReportFormat::Csv);
        let first = csv.lines().nth(1).unwrap();
        assert_eq!(first, "case1-highway-routine,0,0,81.000,,,Approve,,,,");
    }
}
