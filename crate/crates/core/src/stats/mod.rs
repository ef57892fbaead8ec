//! Scaling statistics: per-model aggregates and log-log rank correlations
//! across a model family.

mod correlation;

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

pub use correlation::{
    average_ranks, kendall, kendall_approx, kendall_exact_max_n, pearson, spearman, spearman_approx,
    spearman_exact_max_n,
    Correlation, CorrelationError, PMethod,
};

use crate::eval::{mean_stderr, EvalReport, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub model: ModelSpec,
    pub mean_loss: f64,
    pub stderr: f64,
    pub n_examples: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("report for {0} has no successful results")]
    NoResults(String),
    #[error("family {family:?} has {found} sized point(s); at least 2 are needed")]
    TooFewPoints { family: String, found: usize },
    #[error("{model} has non-positive mean loss {loss}; logs are undefined")]
    NonPositiveLoss { model: String, loss: f64 },
    #[error("points span several families: {0:?}")]
    MixedFamilies(Vec<String>),
}

pub fn aggregate(report: &EvalReport) -> Result<ScalingPoint, StatsError> {
    if report.results.is_empty() {
        return Err(StatsError::NoResults(report.model.name.clone()));
    }
    let losses: Vec<f64> = report.results.iter().map(|r| r.loss).collect();
    let (mean_loss, stderr) = mean_stderr(&losses);
    Ok(ScalingPoint {
        model: report.model.clone(),
        mean_loss,
        stderr,
        n_examples: losses.len(),
    })
}

/// A coefficient with an optional p-value; both absent when undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: Option<f64>,
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_method: Option<PMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Coefficient {
    fn from_result(r: Result<Correlation, CorrelationError>) -> Self {
        match r {
            Ok(c) => Coefficient {
                value: Some(c.coefficient),
                p: Some(c.p),
                p_method: Some(c.method),
                note: None,
            },
            Err(e) => Coefficient {
                value: None,
                p: None,
                p_method: None,
                note: Some(e.to_string()),
            },
        }
    }

    fn without_p(value: f64) -> Self {
        Coefficient {
            value: Some(value),
            p: None,
            p_method: None,
            note: Some("p-value needs at least 3 points".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub family: String,
    /// Sorted by size.
    pub points: Vec<ScalingPoint>,
    pub pearson: Coefficient,
    pub spearman: Coefficient,
    pub kendall: Coefficient,
    /// Pearson r > 0 with p < 0.1.
    pub inverse_scaling: bool,
}

/// Correlations on `(ln size_b, ln mean_loss)` for one family.
pub fn scaling_report(points: &[ScalingPoint]) -> Result<ScalingReport, StatsError> {
    let families: Vec<String> = {
        let mut f: Vec<String> = points.iter().map(|p| p.model.family.clone()).collect();
        f.sort();
        f.dedup();
        f
    };
    if families.len() > 1 {
        return Err(StatsError::MixedFamilies(families));
    }
    let family = families.into_iter().next().unwrap_or_default();
    let mut sized: Vec<ScalingPoint> = points.iter().filter(|p| p.model.size_b.is_some()).cloned().collect();
    if sized.len() < 2 {
        return Err(StatsError::TooFewPoints {
            family,
            found: sized.len(),
        });
    }
    for p in &sized {
        if p.mean_loss.is_nan() || p.mean_loss <= 0.0 {
            return Err(StatsError::NonPositiveLoss {
                model: p.model.name.clone(),
                loss: p.mean_loss,
            });
        }
    }
    sized.sort_by(|a, b| {
        a.model
            .size_b
            .partial_cmp(&b.model.size_b)
            .expect("sizes are finite")
            .then_with(|| a.model.name.cmp(&b.model.name))
    });
    let x: Vec<f64> = sized.iter().map(|p| p.model.size_b.expect("filtered").ln()).collect();
    let y: Vec<f64> = sized.iter().map(|p| p.mean_loss.ln()).collect();

    let (pearson_c, spearman_c, kendall_c) = if sized.len() == 2 {
        let dx = x[1] - x[0];
        let dy = y[1] - y[0];
        if dx == 0.0 || dy == 0.0 {
            let undefined = Coefficient::from_result(Err(CorrelationError::ZeroVariance));
            (undefined.clone(), undefined.clone(), undefined)
        } else {
            let s = (dx * dy).signum();
            (Coefficient::without_p(s), Coefficient::without_p(s), Coefficient::without_p(s))
        }
    } else {
        (
            Coefficient::from_result(pearson(&x, &y)),
            Coefficient::from_result(spearman(&x, &y)),
            Coefficient::from_result(kendall(&x, &y)),
        )
    };
    let inverse_scaling = matches!(
        (pearson_c.value, pearson_c.p),
        (Some(r), Some(p)) if r > 0.0 && p < 0.1
    );
    Ok(ScalingReport {
        family,
        points: sized,
        pearson: pearson_c,
        spearman: spearman_c,
        kendall: kendall_c,
        inverse_scaling,
    })
}

/// Groups points by family and reports every family with at least two
/// sized models, in family order.
pub fn scaling_reports(points: &[ScalingPoint]) -> (Vec<ScalingReport>, Vec<StatsError>) {
    let mut by_family: BTreeMap<&str, Vec<ScalingPoint>> = BTreeMap::new();
    for p in points {
        by_family.entry(&p.model.family).or_default().push(p.clone());
    }
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (_, pts) in by_family {
        match scaling_report(&pts) {
            Ok(r) => reports.push(r),
            Err(e) => skipped.push(e),
        }
    }
    (reports, skipped)
}

pub const PLOT_COLUMNS: [&str; 5] = ["family", "model", "size_b", "mean_loss", "stderr"];

/// CSV with [`PLOT_COLUMNS`], one row per point, reports in the given order.
pub fn emit_plot_data<W: io::Write>(reports: &[ScalingReport], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PLOT_COLUMNS)?;
    for r in reports {
        for p in &r.points {
            w.write_record([
                r.family.clone(),
                p.model.name.clone(),
                p.model.size_b.map_or_else(String::new, |s| s.to_string()),
                p.mean_loss.to_string(),
                p.stderr.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
