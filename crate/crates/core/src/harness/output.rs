use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::agent::Outcome;
use crate::env;

use super::plot::{learning_curve_svg, trailing_mean_curves};
use super::{BlockRates, EpisodeTrace, ExperimentConfig, HarnessError, OutcomeLog};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub paths: Vec<PathBuf>,
}

pub fn outcomes_csv(log: &OutcomeLog) -> String {
    let mut s = String::from("cells,trial,episode,result\n");
    for r in &log.rows {
        let _ = writeln!(s, "{},{},{},{}", r.cells, r.trial, r.episode, r.result);
    }
    s
}

pub fn block_rates_csv(rates: &BlockRates) -> String {
    let mut s = String::from("cells,block_end,pos,neg,zero\n");
    for r in &rates.rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6}",
            r.cells,
            r.block_end,
            r.pos,
            r.neg,
            r.zero
        );
    }
    s
}

/// One line per step: the environment columns followed by what the agent saw
/// and did.
pub fn trace_text(traces: &[(usize, usize, Vec<EpisodeTrace>)]) -> String {
    let mut s = String::from(
        "cells,trial,episode,phase,bits,cued,dummy,sample,target,salient,positive,negative,neutral,action,prediction,outcome\n",
    );
    for (cells, trial, episodes) in traces {
        for (e, ep) in episodes.iter().enumerate() {
            for st in &ep.steps {
                let env_cols = env::trace_line(*trial, e + 1, st.step, &ep.config)
                    .unwrap_or_else(|_| format!("{trial},{},{},{},,,,", e + 1, st.step, st.obs));
                let salient: Vec<&str> = st.salient.iter().map(|c| c.name()).collect();
                let _ = writeln!(
                    s,
                    "{cells},{env_cols},{},{},{},{},{},{},{}",
                    salient.join("|"),
                    st.positive,
                    st.negative,
                    st.neutral,
                    st.action.attend,
                    st.prediction.map(|p| p.to_string()).unwrap_or_default(),
                    st.outcome.map(|o| o.to_string()).unwrap_or_default(),
                );
            }
        }
    }
    s
}

fn write(dir: &Path, name: &str, body: &str, paths: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|source| HarnessError::Io {
        path: p.display().to_string(),
        source,
    })?;
    paths.push(p);
    Ok(())
}

/// Writes `outcomes.csv`, `block_rates.csv`, one SVG per outcome class, and
/// `trace.txt` when traces are given.
pub fn emit(
    log: &OutcomeLog,
    rates: &BlockRates,
    config: &ExperimentConfig,
    traces: Option<&[(usize, usize, Vec<EpisodeTrace>)]>,
) -> Result<EmittedFiles, HarnessError> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();
    write(dir, "outcomes.csv", &outcomes_csv(log), &mut paths)?;
    write(dir, "block_rates.csv", &block_rates_csv(rates), &mut paths)?;
    for (class, name, title) in [
        (Outcome::Positive, "positive.svg", "Successful hypotheses (positive)"),
        (Outcome::Zero, "zero.svg", "No hypothesis found (zero)"),
        (Outcome::Negative, "negative.svg", "Unsuccessful hypotheses (negative)"),
    ] {
        let title = format!("{title}, mean of {} trials", log.trials);
        let svg = learning_curve_svg(&title, &trailing_mean_curves(log, class));
        write(dir, name, &svg, &mut paths)?;
    }
    if let Some(t) = traces {
        write(dir, "trace.txt", &trace_text(t), &mut paths)?;
    }
    Ok(EmittedFiles { paths })
}
