use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logs::{read_outcomes, write_csv, OutcomeLine, RunStatus};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty cell: no successful runs")]
    EmptyCell,
    #[error("input lengths differ: {0} parameter values, {1} order parameters")]
    LengthMismatch(usize, usize),
    #[error("no transition in range")]
    NoTransition,
    #[error("multiple transitions at {0:?}")]
    MultipleTransitions(Vec<(f64, f64)>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub extinct: usize,
    pub exploded: usize,
    pub completed: usize,
    pub failed: usize,
}

impl OutcomeCounts {
    pub fn from_statuses<'a>(statuses: impl IntoIterator<Item = &'a RunStatus>) -> Self {
        let mut c = Self::default();
        for s in statuses {
            c.add(*s);
        }
        c
    }

    pub fn add(&mut self, s: RunStatus) {
        match s {
            RunStatus::Extinct => self.extinct += 1,
            RunStatus::Exploded => self.exploded += 1,
            RunStatus::Completed => self.completed += 1,
            RunStatus::Failed => self.failed += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.extinct + self.exploded + self.completed + self.failed
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            extinct: self.extinct + o.extinct,
            exploded: self.exploded + o.exploded,
            completed: self.completed + o.completed,
            failed: self.failed + o.failed,
        }
    }
}

/// `(explosions - extinctions) / runs`, where runs counts completed ones
/// too. Failed runs are left out of numerator and denominator.
pub fn order_parameter(c: &OutcomeCounts) -> Result<f64, AnalysisError> {
    let n = c.extinct + c.exploded + c.completed;
    if n == 0 {
        return Err(AnalysisError::EmptyCell);
    }
    Ok((c.exploded as f64 - c.extinct as f64) / n as f64)
}

/// Zero crossing of φ by linear interpolation between the bracketing
/// parameter values. A φ of exactly zero at a sample counts as a crossing
/// at that sample.
pub fn estimate_critical_point(xs: &[f64], phis: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != phis.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), phis.len()));
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(phis.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut crossings = Vec::new();
    let mut roots = Vec::new();
    for (k, w) in pts.windows(2).enumerate() {
        let ((x0, p0), (x1, p1)) = (w[0], w[1]);
        if p0 == 0.0 {
            // Counted once, as the left end of a bracket.
            if k == 0 || pts[k - 1].1 != 0.0 {
                crossings.push((x0, x0));
                roots.push(x0);
            }
        } else if p0 * p1 < 0.0 {
            crossings.push((x0, x1));
            roots.push(x0 + (x1 - x0) * (-p0) / (p1 - p0));
        }
    }
    if let (Some(&(x, p)), true) = (pts.last(), pts.len() >= 2) {
        if p == 0.0 && pts[pts.len() - 2].1 != 0.0 {
            crossings.push((x, x));
            roots.push(x);
        }
    }
    match roots.len() {
        0 => Err(AnalysisError::NoTransition),
        1 => Ok(roots[0]),
        _ => Err(AnalysisError::MultipleTransitions(crossings)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub value: f64,
    pub runs: usize,
    pub extinct: usize,
    pub exploded: usize,
    pub completed: usize,
    pub failed: usize,
    pub phi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: String,
    pub runs: usize,
    pub extinct: usize,
    pub exploded: usize,
    pub completed: usize,
    pub failed: usize,
    pub phi: Option<f64>,
    pub mean_final_population: Option<f64>,
    pub mean_best_fitness: Option<f64>,
    pub mean_final_generation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub param: String,
    /// Runs pooled over all other axes, one row per value of `param`.
    pub phi: Vec<PhiRow>,
    pub critical_point: Result<f64, AnalysisError>,
    pub summary: Vec<SummaryRow>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub(crate) fn summarize(cell: &str, runs: &[&OutcomeLine]) -> SummaryRow {
    let counts = OutcomeCounts::from_statuses(runs.iter().map(|r| &r.status));
    let ok: Vec<&&OutcomeLine> = runs.iter().filter(|r| r.status != RunStatus::Failed).collect();
    SummaryRow {
        cell: cell.to_string(),
        runs: runs.len(),
        extinct: counts.extinct,
        exploded: counts.exploded,
        completed: counts.completed,
        failed: counts.failed,
        phi: order_parameter(&counts).ok(),
        mean_final_population: mean_of(ok.iter().map(|r| r.final_population as f64)),
        mean_best_fitness: mean_of(ok.iter().filter_map(|r| r.best_fitness)),
        mean_final_generation: mean_of(ok.iter().map(|r| r.final_generation as f64)),
    }
}

/// Pool outcome lines by the numeric value of `param`.
pub fn analyze_outcomes(lines: &[OutcomeLine], param: &str) -> Result<Analysis, HarnessError> {
    let mut by_cell: BTreeMap<(usize, &str), Vec<&OutcomeLine>> = BTreeMap::new();
    for l in lines {
        by_cell.entry((l.cell_index, &l.cell)).or_default().push(l);
    }
    let summary = by_cell.iter().map(|((_, c), runs)| summarize(c, runs)).collect();

    let mut pooled: Vec<(f64, OutcomeCounts)> = Vec::new();
    for l in lines {
        let value = l.params.get(param).and_then(|v| v.as_f64()).ok_or_else(|| {
            HarnessError::Format {
                path: "outcomes".into(),
                message: format!("cell `{}` has no numeric parameter `{param}`", l.cell),
            }
        })?;
        match pooled.iter_mut().find(|(v, _)| *v == value) {
            Some((_, c)) => c.add(l.status),
            None => {
                let mut c = OutcomeCounts::default();
                c.add(l.status);
                pooled.push((value, c));
            }
        }
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let phi: Vec<PhiRow> = pooled
        .iter()
        .map(|(value, c)| PhiRow {
            value: *value,
            runs: c.total(),
            extinct: c.extinct,
            exploded: c.exploded,
            completed: c.completed,
            failed: c.failed,
            phi: order_parameter(c).ok(),
        })
        .collect();
    let (xs, ps): (Vec<f64>, Vec<f64>) =
        phi.iter().filter_map(|r| r.phi.map(|p| (r.value, p))).unzip();
    Ok(Analysis {
        param: param.to_string(),
        critical_point: estimate_critical_point(&xs, &ps),
        phi,
        summary,
    })
}

const PHI_HEADER: &[&str] = &["value", "runs", "extinct", "exploded", "completed", "failed", "phi"];
const SUMMARY_HEADER: &[&str] = &[
    "cell",
    "runs",
    "extinct",
    "exploded",
    "completed",
    "failed",
    "phi",
    "mean_final_population",
    "mean_best_fitness",
    "mean_final_generation",
];

pub(crate) fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    write_csv(path, SUMMARY_HEADER, rows)
}

/// Reads `<dir>/outcomes.jsonl` and writes `phi.csv`, `summary.csv` and
/// `critical_point.txt` next to it.
pub fn analyze_dir(dir: &Path, param: &str) -> Result<Analysis, HarnessError> {
    let lines = read_outcomes(&dir.join("outcomes.jsonl"))?;
    let analysis = analyze_outcomes(&lines, param)?;
    write_csv(&dir.join("phi.csv"), PHI_HEADER, &analysis.phi)?;
    write_summary(&dir.join("summary.csv"), &analysis.summary)?;
    let cp = dir.join("critical_point.txt");
    let text = match &analysis.critical_point {
        Ok(x) => format!("{param}\t{x}\n"),
        Err(e) => format!("{param}\terror: {e}\n"),
    };
    std::fs::write(&cp, text).map_err(|source| HarnessError::Io { path: cp, source })?;
    Ok(analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(extinct: usize, exploded: usize, completed: usize) -> OutcomeCounts {
        OutcomeCounts { extinct, exploded, completed, failed: 0 }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(order_parameter(&counts(48, 0, 0)), Ok(-1.0));
        assert!((order_parameter(&counts(22, 26, 0)).unwrap() - 4.0 / 48.0).abs() < 1e-15);
        assert_eq!(order_parameter(&counts(7, 7, 3)), Ok(0.0));
        assert_eq!(order_parameter(&counts(0, 0, 0)), Err(AnalysisError::EmptyCell));
        let only_failed = OutcomeCounts { failed: 3, ..Default::default() };
        assert_eq!(order_parameter(&only_failed), Err(AnalysisError::EmptyCell));
        let with_failed = OutcomeCounts { failed: 5, ..counts(1, 3, 0) };
        assert_eq!(order_parameter(&with_failed), Ok(0.5));
    }

    #[test]
    fn critical_point_examples() {
        let n = estimate_critical_point(&[13.0, 15.0], &[-0.625, 0.097]).unwrap();
        assert!((n - (13.0 + 2.0 * 0.625 / 0.722)).abs() < 1e-12);
        assert_eq!(estimate_critical_point(&[4.0, 10.0], &[-0.3, 0.3]), Ok(7.0));
        assert_eq!(estimate_critical_point(&[10.0, 4.0], &[0.3, -0.3]), Ok(7.0));
        assert_eq!(
            estimate_critical_point(&[1.0, 2.0, 3.0], &[-1.0, -0.5, -0.1]),
            Err(AnalysisError::NoTransition)
        );
        match estimate_critical_point(&[1.0, 2.0, 3.0, 4.0], &[-1.0, 0.5, -0.5, 0.5]) {
            Err(AnalysisError::MultipleTransitions(c)) => {
                assert_eq!(c, vec![(1.0, 2.0), (2.0, 3.0), (3.0, 4.0)])
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(estimate_critical_point(&[1.0, 2.0, 3.0], &[-1.0, 0.0, 1.0]), Ok(2.0));
    }

    proptest! {
        #[test]
        fn phi_bounded_and_extremal(e in 0usize..60, x in 0usize..60, c in 0usize..60) {
            prop_assume!(e + x + c > 0);
            let phi = order_parameter(&counts(e, x, c)).unwrap();
            prop_assert!((-1.0..=1.0).contains(&phi));
            prop_assert_eq!(phi == -1.0, e > 0 && x == 0 && c == 0);
            prop_assert_eq!(phi == 1.0, x > 0 && e == 0 && c == 0);
        }

        #[test]
        fn single_crossing_is_bracketed(mut phis in proptest::collection::vec(0.01..1.0f64, 2..10), k in 1usize..9) {
            let k = k.min(phis.len() - 1);
            for p in phis.iter_mut().take(k) { *p = -*p; }
            let xs: Vec<f64> = (0..phis.len()).map(|i| 9.0 + 2.0 * i as f64).collect();
            let n = estimate_critical_point(&xs, &phis).unwrap();
            prop_assert!(n > xs[k - 1] && n < xs[k]);
        }
    }
}
