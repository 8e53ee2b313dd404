//! CSV renderings of diagnostic results.

use std::fmt::Write as _;

use super::passivity::PassivityReport;
use super::rollout::{RolloutComparison, RolloutMetrics};
use super::stability::StabilityReport;
use crate::numfmt::fmt_f64;

pub const ROLLOUT_HEADER: &str = "model,true_mse,mean_abs_dq,mean_abs_dp,mean_abs_dH,valid";

pub fn passivity_csv(rep: &PassivityReport) -> String {
    let mut out = String::from("t,E_H,se_H,supply,margin\n");
    for k in 0..rep.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(rep.times[k]),
            fmt_f64(rep.mean_energy[k]),
            fmt_f64(rep.se_energy[k]),
            fmt_f64(rep.supply[k]),
            fmt_f64(rep.margin[k])
        );
    }
    out
}

pub fn stability_csv(rep: &StabilityReport) -> String {
    format!(
        "alpha,beta,L_hat,bound,F_T\n{},{},{},{},{}\n",
        fmt_f64(rep.alpha),
        fmt_f64(rep.beta),
        fmt_f64(rep.l_hat),
        fmt_f64(rep.analytic_bound),
        fmt_f64(rep.empirical_f_t)
    )
}

pub fn rollout_row(name: &str, m: &RolloutMetrics) -> String {
    format!(
        "{name},{},{},{},{},{}",
        fmt_f64(m.true_mse),
        fmt_f64(m.mean_abs_dq),
        fmt_f64(m.mean_abs_dp),
        fmt_f64(m.mean_abs_dh),
        m.valid
    )
}

pub fn rollout_csv(rows: &[(String, RolloutMetrics)]) -> String {
    let mut out = format!("{ROLLOUT_HEADER}\n");
    for (name, m) in rows {
        out.push_str(&rollout_row(name, m));
        out.push('\n');
    }
    out
}

/// Time, truth and model states, and both energies; model columns are
/// empty after a divergence.
pub fn phase_csv(cmp: &RolloutComparison) -> String {
    let n = cmp.truth.first().map_or(0, |x| x.len());
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",truth_x{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",model_x{i}");
    }
    out.push_str(",truth_H,model_H\n");
    for k in 0..cmp.times.len() {
        out.push_str(&fmt_f64(cmp.times[k]));
        for v in cmp.truth[k].iter() {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        match cmp.model.get(k) {
            Some(x) => {
                for v in x.iter() {
                    let _ = write!(out, ",{}", fmt_f64(*v));
                }
            }
            None => out.push_str(&",".repeat(n)),
        }
        let _ = write!(out, ",{},", fmt_f64(cmp.truth_energy[k]));
        if let Some(h) = cmp.model_energy.get(k) {
            out.push_str(&fmt_f64(*h));
        }
        out.push('\n');
    }
    out
}
