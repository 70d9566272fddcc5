//! Safety/performance/predictive metrics, sample statistics, Pearson
//! correlation with significance, and the diagnosis/prediction tables.
//!
//! Metrics are pure folds over run logs: centerline distance CD (and its
//! predictive form from the 500 ms prediction point), minimum time to
//! collision, mean following distance, and mean detection ratio. Diagnosis
//! correlates per-run predictive metrics against per-run response metrics
//! within one modality; prediction correlates condition-level MIL means
//! against condition-level VIL means.

pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{nearest_centerline_pair, Road, ScenarioError};
use crate::world::{DrivingType, Pose, RunLog, Terminal};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("coincident centerline points")]
    CoincidentPoints,
    #[error("no samples qualify for the detection ratio (window {0} m)")]
    NoQualifyingSamples(f64),
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 points for a correlation, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate variance in {0} series")]
    DegenerateVariance(&'static str),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Ego speed below which TTC samples are excluded (division guard at
/// launch/stop).
pub const TTC_SPEED_FLOOR: f64 = 0.1;

/// Per-run metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub run_id: String,
    /// Mean centerline distance of the ego, m.
    pub cd: f64,
    /// Mean centerline distance of the 500 ms prediction point, m.
    pub cd_hat: f64,
    /// Mean following distance, m.
    pub fd: f64,
    /// Minimum time to collision, s; 0 iff the run ended in collision.
    pub min_ttc: f64,
    /// Mean detection ratio.
    pub dr: f64,
    /// Lower true-distance cutoff applied to DR, m (0 = no window).
    pub dr_window: f64,
}

/// Pearson correlation with two-sided significance and the least-squares
/// line for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
}

/// Perpendicular distance from `e` to the infinite line through `c1`, `c2`.
pub fn point_line_distance(e: Pose, c1: Pose, c2: Pose) -> Result<f64, AnalysisError> {
    let dx = c2.x - c1.x;
    let dy = c2.y - c1.y;
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        return Err(AnalysisError::CoincidentPoints);
    }
    Ok((dx * (e.y - c1.y) - dy * (e.x - c1.x)).abs() / norm)
}

/// Mean centerline distance over a log, using the ego pose (CD) or the
/// 500 ms prediction point (CD-hat).
pub fn mean_centerline_distance(
    log: &RunLog,
    road: &Road,
    use_prediction: bool,
) -> Result<f64, AnalysisError> {
    if log.records.is_empty() {
        return Err(AnalysisError::EmptyInput("run log"));
    }
    let mut sum = 0.0;
    for rec in &log.records {
        let point = if use_prediction {
            rec.predicted_pose_500ms
        } else {
            rec.ego.pose
        };
        let (c1, c2) = nearest_centerline_pair(road, point)?;
        sum += point_line_distance(point, c1, c2)?;
    }
    Ok(sum / log.records.len() as f64)
}

/// Minimum instantaneous time to collision, in seconds.
///
/// TTC is d_t / v_t at each sample; samples below the speed floor are
/// excluded. A collision terminal forces 0.
pub fn min_ttc(log: &RunLog) -> Result<f64, AnalysisError> {
    if log.records.is_empty() {
        return Err(AnalysisError::EmptyInput("run log"));
    }
    if log.terminal == Terminal::Collision {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for rec in &log.records {
        if rec.ego.speed < TTC_SPEED_FLOOR {
            continue;
        }
        best = best.min(rec.true_distance / rec.ego.speed);
    }
    if best.is_infinite() {
        return Err(AnalysisError::EmptyInput("no samples above the TTC speed floor"));
    }
    Ok(best)
}

/// Mean true inter-vehicle distance over the collection window.
pub fn mean_following_distance(log: &RunLog) -> Result<f64, AnalysisError> {
    if log.records.is_empty() {
        return Err(AnalysisError::EmptyInput("run log"));
    }
    Ok(log.records.iter().map(|r| r.true_distance).sum::<f64>() / log.records.len() as f64)
}

/// Mean perceived-to-true distance ratio over samples with a detection and
/// true distance above `min_distance`.
pub fn mean_detection_ratio(log: &RunLog, min_distance: f64) -> Result<f64, AnalysisError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for rec in &log.records {
        if let Some(dhat) = rec.perceived_distance {
            if rec.true_distance > min_distance {
                sum += dhat / rec.true_distance;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(AnalysisError::NoQualifyingSamples(min_distance));
    }
    Ok(sum / count as f64)
}

/// Arithmetic mean.
pub fn sample_mean(values: &[f64]) -> Result<f64, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput("sample mean"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// (min, max) pair.
pub fn sample_minmax(values: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput("sample minmax"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Product-moment correlation with a two-sided t-test p-value.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(AnalysisError::DegenerateVariance("x"));
    }
    if var_y == 0.0 {
        return Err(AnalysisError::DegenerateVariance("y"));
    }
    let r = (cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        stats::t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationResult {
        r,
        p_value,
        n,
        slope: cov / var_x,
        intercept: mean_y - (cov / var_x) * mean_x,
    })
}

/// Metric records of one experimental condition under one modality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionGroup {
    /// Environment condition label, e.g. "night/sedan".
    pub condition: String,
    pub driving: DrivingType,
    pub records: Vec<MetricRecord>,
}

/// One scatter point of a correlation row. For prediction rows the min-max
/// bounds span the per-run spread behind each condition mean (the plotted
/// ovals); diagnosis points are single runs and carry degenerate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// One predictive-vs-response correlation row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub driving: DrivingType,
    pub predictive: String,
    pub response: String,
    pub result: CorrelationResult,
    pub points: Vec<TablePoint>,
}

/// The diagnosis (within-modality) and prediction (cross-modality) tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationTables {
    pub diagnosis: Vec<TableRow>,
    pub prediction: Vec<TableRow>,
}

fn metric_pair(
    rec: &MetricRecord,
    predictive: &str,
    response: &str,
) -> (f64, f64) {
    let get = |name: &str| -> f64 {
        match name {
            "dr" => rec.dr,
            "cd_hat" => rec.cd_hat,
            "min_ttc" => rec.min_ttc,
            "fd" => rec.fd,
            "cd" => rec.cd,
            other => unreachable!("unknown metric {other}"),
        }
    };
    (get(predictive), get(response))
}

fn diagnosis_row(
    groups: &[&ConditionGroup],
    driving: DrivingType,
    predictive: &str,
    response: &str,
) -> Result<TableRow, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut points = Vec::new();
    for g in groups {
        for rec in &g.records {
            let (x, y) = metric_pair(rec, predictive, response);
            xs.push(x);
            ys.push(y);
            points.push(TablePoint {
                label: g.condition.clone(),
                x,
                y,
                x_min: x,
                x_max: x,
                y_min: y,
                y_max: y,
            });
        }
    }
    Ok(TableRow {
        driving,
        predictive: predictive.into(),
        response: response.into(),
        result: pearson(&xs, &ys)?,
        points,
    })
}

fn prediction_row(
    mil: &[&ConditionGroup],
    vil: &[&ConditionGroup],
    driving: DrivingType,
    predictive: &str,
    response: &str,
) -> Result<TableRow, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut points = Vec::new();
    for m in mil {
        let Some(v) = vil.iter().find(|v| v.condition == m.condition) else {
            continue;
        };
        let pred: Vec<f64> = m
            .records
            .iter()
            .map(|r| metric_pair(r, predictive, response).0)
            .collect();
        let resp: Vec<f64> = v
            .records
            .iter()
            .map(|r| metric_pair(r, predictive, response).1)
            .collect();
        let x = sample_mean(&pred)?;
        let y = sample_mean(&resp)?;
        let (x_min, x_max) = sample_minmax(&pred)?;
        let (y_min, y_max) = sample_minmax(&resp)?;
        xs.push(x);
        ys.push(y);
        points.push(TablePoint {
            label: m.condition.clone(),
            x,
            y,
            x_min,
            x_max,
            y_min,
            y_max,
        });
    }
    if xs.len() < 3 {
        return Err(AnalysisError::TooFewPoints(xs.len()));
    }
    Ok(TableRow {
        driving,
        predictive: predictive.into(),
        response: response.into(),
        result: pearson(&xs, &ys)?,
        points,
    })
}

/// Build the diagnosis (VIL-to-VIL, per-run pairs pooled across conditions)
/// and prediction (MIL-to-VIL, condition-level sample means) tables.
pub fn build_tables(
    vil: &[ConditionGroup],
    mil: &[ConditionGroup],
) -> Result<CorrelationTables, AnalysisError> {
    let vil_stopping: Vec<&ConditionGroup> = vil
        .iter()
        .filter(|g| g.driving == DrivingType::Stopping)
        .collect();
    let vil_following: Vec<&ConditionGroup> = vil
        .iter()
        .filter(|g| g.driving == DrivingType::Following)
        .collect();
    let mil_stopping: Vec<&ConditionGroup> = mil
        .iter()
        .filter(|g| g.driving == DrivingType::Stopping)
        .collect();
    let mil_following: Vec<&ConditionGroup> = mil
        .iter()
        .filter(|g| g.driving == DrivingType::Following)
        .collect();

    let diagnosis = vec![
        diagnosis_row(&vil_stopping, DrivingType::Stopping, "dr", "min_ttc")?,
        diagnosis_row(&vil_following, DrivingType::Following, "dr", "fd")?,
        diagnosis_row(&vil_following, DrivingType::Following, "cd_hat", "cd")?,
    ];
    let prediction = vec![
        prediction_row(&mil_stopping, &vil_stopping, DrivingType::Stopping, "dr", "min_ttc")?,
        prediction_row(&mil_following, &vil_following, DrivingType::Following, "dr", "fd")?,
        prediction_row(&mil_following, &vil_following, DrivingType::Following, "cd_hat", "cd")?,
    ];
    Ok(CorrelationTables {
        diagnosis,
        prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{
        EgoState, Environment, LeadClass, LeadState, Modality, SampleRecord, WeatherPreset,
    };
    use proptest::prelude::*;

    fn synthetic_log(samples: &[(f64, f64, Option<f64>)], terminal: Terminal) -> RunLog {
        // samples: (true_distance, speed, perceived)
        let records = samples
            .iter()
            .enumerate()
            .map(|(i, &(d, v, dhat))| SampleRecord {
                t: i as f64 * 0.05,
                ego: EgoState {
                    speed: v,
                    speed_estimate: v,
                    ..EgoState::at_rest(Pose::origin())
                },
                lead: LeadState {
                    pose: Pose::new(d + 2.39, 0.0, 0.0),
                    speed: 0.0,
                    rear_offset: 2.39,
                },
                true_distance: d,
                perceived_distance: dhat,
                predicted_pose_500ms: Pose::origin(),
                accel_cmd: 0.0,
                steer_cmd: 0.0,
            })
            .collect();
        RunLog {
            config_digest: "test".into(),
            modality: Modality::Vil,
            driving_type: DrivingType::Stopping,
            environment: Environment::preset(WeatherPreset::NoonClear, LeadClass::BlackSedan),
            seed: 0,
            records,
            terminal,
        }
    }

    #[test]
    fn point_line_distance_examples() {
        let on_line = point_line_distance(
            Pose::new(0.5, 0.0, 0.0),
            Pose::origin(),
            Pose::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(on_line, 0.0);

        let unit = point_line_distance(
            Pose::new(1.0, 1.0, 0.0),
            Pose::origin(),
            Pose::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(unit, 1.0);

        let diag = point_line_distance(
            Pose::new(1.0, 0.0, 0.0),
            Pose::origin(),
            Pose::new(1.0, 1.0, 0.0),
        )
        .unwrap();
        assert!((diag - 0.7071067811865475).abs() < 1e-9);

        assert!(point_line_distance(Pose::origin(), Pose::origin(), Pose::origin()).is_err());
    }

    #[test]
    fn min_ttc_examples() {
        let log = synthetic_log(&[(50.0, 10.0, None)], Terminal::Stopped);
        assert_eq!(min_ttc(&log).unwrap(), 5.0);

        let log = synthetic_log(
            &[(50.0, 10.0, None), (30.0, 15.0, None), (10.0, 5.0, None)],
            Terminal::Stopped,
        );
        assert_eq!(min_ttc(&log).unwrap(), 2.0);

        let collision = synthetic_log(&[(50.0, 10.0, None)], Terminal::Collision);
        assert_eq!(min_ttc(&collision).unwrap(), 0.0);

        // Samples below the speed floor are excluded.
        let slow = synthetic_log(
            &[(5.0, 0.05, None), (50.0, 10.0, None)],
            Terminal::Stopped,
        );
        assert_eq!(min_ttc(&slow).unwrap(), 5.0);
    }

    #[test]
    fn following_distance_examples() {
        let log = synthetic_log(&[(22.0, 13.0, None); 10], Terminal::DistanceComplete);
        assert_eq!(mean_following_distance(&log).unwrap(), 22.0);

        let alternating = synthetic_log(
            &[(20.0, 13.0, None), (24.0, 13.0, None)],
            Terminal::DistanceComplete,
        );
        assert_eq!(mean_following_distance(&alternating).unwrap(), 22.0);
    }

    #[test]
    fn detection_ratio_examples() {
        let perfect = synthetic_log(
            &[(50.0, 10.0, Some(50.0)), (40.0, 10.0, Some(40.0))],
            Terminal::Stopped,
        );
        assert_eq!(mean_detection_ratio(&perfect, 10.0).unwrap(), 1.0);

        let biased = synthetic_log(
            &[(50.0, 10.0, Some(60.0)), (40.0, 10.0, Some(48.0))],
            Terminal::Stopped,
        );
        assert!((mean_detection_ratio(&biased, 0.0).unwrap() - 1.2).abs() < 1e-12);

        // Window excludes close samples; no qualifying samples is an error.
        let close = synthetic_log(&[(5.0, 1.0, Some(6.0))], Terminal::Stopped);
        assert!(matches!(
            mean_detection_ratio(&close, 10.0),
            Err(AnalysisError::NoQualifyingSamples(_))
        ));
    }

    #[test]
    fn sample_statistics_examples() {
        assert_eq!(sample_mean(&[3.0]).unwrap(), 3.0);
        assert_eq!(sample_minmax(&[3.0]).unwrap(), (3.0, 3.0));
        assert_eq!(sample_mean(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(sample_minmax(&[1.0, 2.0, 3.0, 4.0]).unwrap(), (1.0, 4.0));
        assert!(sample_mean(&[]).is_err());
        assert!(sample_minmax(&[]).is_err());
    }

    #[test]
    fn metrics_match_brute_force_recomputation() {
        // Independent fold over an arbitrary synthetic log.
        let samples: Vec<(f64, f64, Option<f64>)> = (0..100)
            .map(|i| {
                let d = 120.0 - i as f64;
                let v = 13.0 - 0.1 * i as f64;
                let dhat = if d < 115.0 { Some(d * 1.17) } else { None };
                (d, v.max(0.0), dhat)
            })
            .collect();
        let log = synthetic_log(&samples, Terminal::Stopped);

        let mut fd_sum = 0.0;
        let mut ttc = f64::INFINITY;
        let mut dr_sum = 0.0;
        let mut dr_n = 0;
        for &(d, v, dhat) in &samples {
            fd_sum += d;
            if v >= TTC_SPEED_FLOOR {
                ttc = ttc.min(d / v);
            }
            if let Some(dh) = dhat {
                if d > 10.0 {
                    dr_sum += dh / d;
                    dr_n += 1;
                }
            }
        }
        assert!((mean_following_distance(&log).unwrap() - fd_sum / 100.0).abs() < 1e-12);
        assert!((min_ttc(&log).unwrap() - ttc).abs() < 1e-12);
        assert!(
            (mean_detection_ratio(&log, 10.0).unwrap() - dr_sum / dr_n as f64).abs() < 1e-12
        );
    }

    #[test]
    fn pearson_exact_linearity() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = pearson(&xs, &ys).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p_value < 1e-12);
        assert!((c.slope - 2.0).abs() < 1e-12);
        assert!((c.intercept - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = xs.iter().map(|x| -0.5 * x + 3.0).collect();
        assert!((pearson(&xs, &neg).unwrap().r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_reproduces_published_p_cells() {
        // Construct series with exactly the target r: y = r * unit(x_hat) +
        // sqrt(1 - r^2) * unit(e) with e centered and orthogonal to x_hat.
        fn series_with_r(r: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let x_hat: Vec<f64> = xs.iter().map(|x| x - mean).collect();
            let x_norm_sq: f64 = x_hat.iter().map(|v| v * v).sum();

            let mut e: Vec<f64> = (0..n)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (i as f64 + 1.0))
                .collect();
            let e_mean = e.iter().sum::<f64>() / n as f64;
            for v in &mut e {
                *v -= e_mean;
            }
            let dot: f64 = e.iter().zip(&x_hat).map(|(a, b)| a * b).sum();
            for (v, xh) in e.iter_mut().zip(&x_hat) {
                *v -= dot / x_norm_sq * xh;
            }
            let e_norm: f64 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(e_norm > 1e-9);

            let ys: Vec<f64> = x_hat
                .iter()
                .zip(&e)
                .map(|(xh, ev)| r * xh / x_norm_sq.sqrt() + (1.0 - r * r).sqrt() * ev / e_norm)
                .collect();
            (xs, ys)
        }

        let (xs, ys) = series_with_r(-0.9, 9);
        let c = pearson(&xs, &ys).unwrap();
        assert!((c.r + 0.9).abs() < 1e-12);
        assert!((c.p_value - 0.001).abs() <= 0.0005, "p = {}", c.p_value);
        assert!((c.p_value - 0.0009430623223403293).abs() < 1e-10);

        let (xs, ys) = series_with_r(0.93, 8);
        let c = pearson(&xs, &ys).unwrap();
        assert!((c.p_value - 0.001).abs() <= 0.0005, "p = {}", c.p_value);
        assert!((c.p_value - 0.0008131115124999968).abs() < 1e-10);
    }

    #[test]
    fn pearson_rejects_degenerate_inputs() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(AnalysisError::TooFewPoints(2))
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(AnalysisError::DegenerateVariance("x"))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[0.5; 3]),
            Err(AnalysisError::DegenerateVariance("y"))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(AnalysisError::LengthMismatch(3, 2))
        ));
    }

    fn group(condition: &str, driving: DrivingType, drs: &[f64], ttcs: &[f64]) -> ConditionGroup {
        ConditionGroup {
            condition: condition.into(),
            driving,
            records: drs
                .iter()
                .zip(ttcs.iter())
                .enumerate()
                .map(|(i, (&dr, &ttc))| MetricRecord {
                    run_id: format!("{condition}-{i}"),
                    cd: 0.1 + 0.01 * dr,
                    cd_hat: 0.1 + 0.012 * dr,
                    fd: 20.0 + dr,
                    min_ttc: ttc,
                    dr,
                    dr_window: 10.0,
                })
                .collect(),
        }
    }

    #[test]
    fn build_tables_rejects_too_few_conditions() {
        let mk = |cond: &str, dr: f64| {
            (
                group(cond, DrivingType::Stopping, &[dr, dr + 0.01], &[2.0, 2.1]),
                group(cond, DrivingType::Following, &[dr, dr + 0.01], &[5.0, 5.1]),
            )
        };
        let (s1, f1) = mk("a", 1.0);
        let (s2, f2) = mk("b", 1.2);
        let vil = vec![s1.clone(), f1.clone(), s2.clone(), f2.clone()];
        let mil = vec![s1, f1, s2, f2];
        assert!(matches!(
            build_tables(&vil, &mil),
            Err(AnalysisError::TooFewPoints(2))
        ));
    }

    #[test]
    fn build_tables_prediction_sees_engineered_monotone_bias() {
        // Five conditions with DR increasing and TTC decreasing: prediction
        // (DR, minTTC) must come out strongly negative.
        let conditions = [
            ("c1", 0.9, 3.2),
            ("c2", 1.0, 2.8),
            ("c3", 1.1, 2.1),
            ("c4", 1.2, 1.2),
            ("c5", 1.3, 0.2),
        ];
        let mut vil = Vec::new();
        let mut mil = Vec::new();
        for &(cond, dr, ttc) in &conditions {
            vil.push(group(
                cond,
                DrivingType::Stopping,
                &[dr, dr + 0.02, dr - 0.02],
                &[ttc, ttc + 0.1, ttc - 0.1],
            ));
            vil.push(group(
                cond,
                DrivingType::Following,
                &[dr, dr + 0.02, dr - 0.02],
                &[5.0, 5.0, 5.0],
            ));
            mil.push(group(
                cond,
                DrivingType::Stopping,
                &[dr + 0.01, dr - 0.01, dr],
                &[ttc, ttc, ttc],
            ));
            mil.push(group(
                cond,
                DrivingType::Following,
                &[dr + 0.01, dr - 0.01, dr],
                &[5.0, 5.0, 5.0],
            ));
        }
        let tables = build_tables(&vil, &mil).unwrap();
        let pred_ttc = &tables.prediction[0];
        assert_eq!(pred_ttc.result.n, 5);
        assert!(pred_ttc.result.r < -0.9, "r = {}", pred_ttc.result.r);
        // Min-max bounds bracket the means.
        for p in &pred_ttc.points {
            assert!(p.x_min <= p.x && p.x <= p.x_max);
            assert!(p.y_min <= p.y && p.y <= p.y_max);
        }
        assert_eq!(tables.diagnosis.len(), 3);
        assert_eq!(tables.prediction.len(), 3);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            seed_vals in proptest::collection::vec(-10.0f64..10.0, 8..20),
            a in 0.1f64..5.0,
            b in -10.0f64..10.0,
        ) {
            let xs = seed_vals.clone();
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.7 + (i as f64 * 0.37).sin()).collect();
            if let (Ok(base), Ok(scaled)) = (
                pearson(&xs, &ys),
                pearson(&xs.iter().map(|x| a * x + b).collect::<Vec<_>>(), &ys),
            ) {
                prop_assert!((base.r - scaled.r).abs() < 1e-12);
            }
        }

        #[test]
        fn p_value_monotone_in_r_and_n(r1 in 0.05f64..0.9, dr in 0.01f64..0.09, n in 5usize..50) {
            let r2 = (r1 + dr).min(0.99);
            let df = (n - 2) as f64;
            let t = |r: f64| r * (df / (1.0 - r * r)).sqrt();
            let p1 = stats::t_two_sided_p(t(r1), df);
            let p2 = stats::t_two_sided_p(t(r2), df);
            prop_assert!(p2 < p1, "p({r2}) = {p2} !< p({r1}) = {p1}");

            let t1 = r1 * ((df + 5.0) / (1.0 - r1 * r1)).sqrt();
            let p_bigger_n = stats::t_two_sided_p(t1, df + 5.0);
            prop_assert!(p_bigger_n < p1);
        }
    }
}
