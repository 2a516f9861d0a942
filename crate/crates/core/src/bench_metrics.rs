//! Success rates, outcome tallies and error-binned success curves.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{OutcomeKind, TrialRecord};
use crate::pose_metrics::ErrorMetric;
use crate::runner::ExperimentCondition;

/// Share of sampled candidates that succeed at identity, percent.
pub fn s_gen(n_succ: usize, n_total: usize) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::UndefinedRate("no candidates were sampled".into()));
    }
    if n_succ > n_total {
        return Err(Error::Parameter(format!("{n_succ} successes out of {n_total}")));
    }
    Ok(percent(n_succ, n_total))
}

/// Share of library grasps that still succeed, percent.
pub fn s_est(outcomes: &[OutcomeKind]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::UndefinedRate("grasp library has no successful grasps".into()));
    }
    let n = outcomes.iter().filter(|o| **o == OutcomeKind::Success).count();
    Ok(percent(n, outcomes.len()))
}

pub fn s_est_records(records: &[TrialRecord]) -> Result<f64> {
    let kinds: Vec<OutcomeKind> = records.iter().map(|r| r.outcome.outcome).collect();
    s_est(&kinds)
}

fn percent(n: usize, total: usize) -> f64 {
    n as f64 * 100.0 / total as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OutcomeTally {
    pub success: usize,
    pub slipped: usize,
    pub no_contact: usize,
    pub collision: usize,
    pub total: usize,
}

impl OutcomeTally {
    pub fn add(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::Success => self.success += 1,
            OutcomeKind::Slipped => self.slipped += 1,
            OutcomeKind::NoContact => self.no_contact += 1,
            OutcomeKind::Collision => self.collision += 1,
        }
        self.total += 1;
    }

    pub fn merge(mut self, other: OutcomeTally) -> OutcomeTally {
        self.success += other.success;
        self.slipped += other.slipped;
        self.no_contact += other.no_contact;
        self.collision += other.collision;
        self.total += other.total;
        self
    }

    pub fn from_kinds<'a>(kinds: impl IntoIterator<Item = &'a OutcomeKind>) -> OutcomeTally {
        let mut t = OutcomeTally::default();
        for k in kinds {
            t.add(*k);
        }
        t
    }

    pub fn count(&self, kind: OutcomeKind) -> usize {
        match kind {
            OutcomeKind::Success => self.success,
            OutcomeKind::Slipped => self.slipped,
            OutcomeKind::NoContact => self.no_contact,
            OutcomeKind::Collision => self.collision,
        }
    }

    /// Fraction of `kind` in [0, 1]; zero for an empty tally.
    pub fn fraction(&self, kind: OutcomeKind) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(kind) as f64 / self.total as f64
        }
    }
}

pub fn tally(records: &[TrialRecord]) -> OutcomeTally {
    OutcomeTally::from_kinds(records.iter().map(|r| &r.outcome.outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessCurve {
    pub metric_name: String,
    pub bin_edges: Vec<f64>,
    /// Percent per bin; `None` for empty bins.
    pub rates: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

/// Bins are half-open `[lo, hi)` except the last, which includes `hi`.
/// Records outside the edges are not counted.
pub fn success_curve(records: &[TrialRecord], metric: ErrorMetric, bin_edges: &[f64]) -> Result<SuccessCurve> {
    let points: Vec<(f64, bool)> = records
        .iter()
        .map(|r| (metric.get(&r.errors), r.outcome.is_success()))
        .collect();
    curve_from_points(metric.name(), &points, bin_edges)
}

pub fn curve_from_points(name: &str, points: &[(f64, bool)], bin_edges: &[f64]) -> Result<SuccessCurve> {
    if points.is_empty() {
        return Err(Error::UndefinedRate("success curve over no records".into()));
    }
    if bin_edges.len() < 2 {
        return Err(Error::Parameter("need at least two bin edges".into()));
    }
    if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("bin edges must be finite and strictly increasing".into()));
    }
    let bins = bin_edges.len() - 1;
    let mut counts = vec![0usize; bins];
    let mut wins = vec![0usize; bins];
    for &(v, ok) in points {
        if let Some(b) = bin_index(bin_edges, v) {
            counts[b] += 1;
            wins[b] += ok as usize;
        }
    }
    let rates = counts
        .iter()
        .zip(&wins)
        .map(|(&c, &w)| (c > 0).then(|| percent(w, c)))
        .collect();
    Ok(SuccessCurve {
        metric_name: name.to_string(),
        bin_edges: bin_edges.to_vec(),
        rates,
        counts,
    })
}

fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[last]) {
        return None;
    }
    // first edge strictly above v, minus one; v == top edge falls in the last bin
    let upper = edges.partition_point(|&e| e <= v);
    Some(upper.saturating_sub(1).min(last - 1))
}

/// Ten uniform bins from 0 to the 95th percentile of `values`.
pub fn default_bin_edges(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let p95 = if v.is_empty() {
        0.0
    } else {
        v[((v.len() - 1) as f64 * 0.95).round() as usize]
    };
    let top = if p95 > 0.0 { p95 } else { 1.0 };
    (0..=10).map(|i| top * i as f64 / 10.0).collect()
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side has no variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter("spearman inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Parameter("spearman needs at least two points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// One summary row per object, gripper and condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub object_id: String,
    pub gripper: String,
    pub condition: ExperimentCondition,
    pub n_total: usize,
    pub n_gt: usize,
    pub s_gen: f64,
    /// Empty when the library has no successful grasps.
    pub s_est: Option<f64>,
    pub trials: usize,
    pub success_frac: f64,
    pub slipped_frac: f64,
    pub no_contact_frac: f64,
    pub collision_frac: f64,
}

impl PairSummary {
    pub fn new(
        object_id: &str,
        gripper: &str,
        condition: ExperimentCondition,
        n_total: usize,
        n_gt: usize,
        outcomes: &OutcomeTally,
    ) -> Result<Self> {
        let s_est = (outcomes.total > 0).then(|| percent(outcomes.success, outcomes.total));
        Ok(Self {
            object_id: object_id.to_string(),
            gripper: gripper.to_string(),
            condition,
            n_total,
            n_gt,
            s_gen: s_gen(n_gt, n_total)?,
            s_est,
            trials: outcomes.total,
            success_frac: outcomes.fraction(OutcomeKind::Success),
            slipped_frac: outcomes.fraction(OutcomeKind::Slipped),
            no_contact_frac: outcomes.fraction(OutcomeKind::NoContact),
            collision_frac: outcomes.fraction(OutcomeKind::Collision),
        })
    }
}

/// Cross-pair aggregates over pairs with a nonempty library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub pairs: usize,
    pub pairs_without_library: usize,
    /// Unweighted mean of per-pair S_est.
    pub mean_s_est: Option<f64>,
    /// S_est over all trials pooled.
    pub pooled_s_est: Option<f64>,
    pub mean_s_gen: Option<f64>,
}

pub fn aggregate(rows: &[PairSummary]) -> Aggregate {
    let with: Vec<&PairSummary> = rows.iter().filter(|r| r.n_gt > 0 && r.s_est.is_some()).collect();
    let mean = |f: &dyn Fn(&PairSummary) -> f64| {
        (!with.is_empty()).then(|| with.iter().map(|r| f(r)).sum::<f64>() / with.len() as f64)
    };
    let trials: usize = with.iter().map(|r| r.trials).sum();
    let wins: f64 = with.iter().map(|r| r.success_frac * r.trials as f64).sum();
    Aggregate {
        pairs: with.len(),
        pairs_without_library: rows.len() - with.len(),
        mean_s_est: mean(&|r| r.s_est.unwrap_or(0.0)),
        pooled_s_est: (trials > 0).then(|| wins.round() * 100.0 / trials as f64),
        mean_s_gen: (!rows.is_empty())
            .then(|| rows.iter().map(|r| r.s_gen).sum::<f64>() / rows.len() as f64),
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv output>", io),
        other => Error::Content(format!("csv: {other:?}")),
    }
}

pub fn write_summary_csv(rows: &[PairSummary], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

#[derive(Serialize)]
struct CurveRow<'a> {
    metric: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    rate: Option<f64>,
    count: usize,
}

pub fn write_curves_csv(curves: &[SuccessCurve], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in curves {
        for (b, (rate, count)) in c.rates.iter().zip(&c.counts).enumerate() {
            w.serialize(CurveRow {
                metric: &c.metric_name,
                bin_lo: c.bin_edges[b],
                bin_hi: c.bin_edges[b + 1],
                rate: *rate,
                count: *count,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::GraspOutcome;
    use crate::pose_metrics::PoseErrorVector;
    use crate::se3::RigidTransform;
    use proptest::prelude::*;

    pub(crate) fn record(kind: OutcomeKind, translation: f64) -> TrialRecord {
        TrialRecord {
            object_id: "o".into(),
            gripper: "g".into(),
            grasp_index: 0,
            condition: ExperimentCondition::GtGraspGtRefPose,
            pose_id: String::new(),
            pose_gt: RigidTransform::identity(),
            pose_est: RigidTransform::identity(),
            errors: PoseErrorVector {
                translation,
                ..Default::default()
            },
            outcome: GraspOutcome {
                outcome: kind,
                contact_points: Vec::new(),
                closing_travel_mm: [0.0; 2],
                failure_detail: String::new(),
            },
        }
    }

    #[test]
    fn generation_rate() {
        assert_eq!(s_gen(0, 5000).unwrap(), 0.0);
        assert_eq!(s_gen(5000, 5000).unwrap(), 100.0);
        assert!((s_gen(1234, 5000).unwrap() - 24.68).abs() < 1e-12);
        assert!(matches!(s_gen(0, 0), Err(Error::UndefinedRate(_))));
        assert!(s_gen(3, 2).is_err());
    }

    #[test]
    fn estimated_rate() {
        let mut v = vec![OutcomeKind::Success; 899];
        v.extend(vec![OutcomeKind::Collision; 101]);
        assert!((s_est(&v).unwrap() - 89.9).abs() < 1e-12);
        assert_eq!(s_est(&[OutcomeKind::Success; 7]).unwrap(), 100.0);
        assert!(matches!(s_est(&[]), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn tallies() {
        assert_eq!(tally(&[]), OutcomeTally::default());
        let recs: Vec<_> = [OutcomeKind::Success; 3]
            .into_iter()
            .chain([OutcomeKind::Collision])
            .map(|k| record(k, 0.0))
            .collect();
        let t = tally(&recs);
        assert_eq!(
            (t.success, t.slipped, t.no_contact, t.collision, t.total),
            (3, 0, 0, 1, 4)
        );
        assert_eq!(percent(t.success, t.total), s_est_records(&recs).unwrap());
    }

    #[test]
    fn step_curve() {
        let recs: Vec<_> = (0..40)
            .map(|i| {
                let tr = i as f64 * 0.5;
                record(if tr < 10.0 { OutcomeKind::Success } else { OutcomeKind::NoContact }, tr)
            })
            .collect();
        let c = success_curve(&recs, ErrorMetric::Translation, &[0.0, 10.0, 20.0]).unwrap();
        assert_eq!(c.rates, vec![Some(100.0), Some(0.0)]);
        assert_eq!(c.counts, vec![20, 20]);
        let zero = vec![record(OutcomeKind::Success, 0.0); 5];
        let one = success_curve(&zero, ErrorMetric::Translation, &[0.0, 1.0]).unwrap();
        assert_eq!(one.rates, vec![Some(100.0)]);
        assert!(success_curve(&recs, ErrorMetric::Add, &[0.0, 5.0, 5.0]).is_err());
        let sparse = success_curve(&recs, ErrorMetric::Translation, &[0.0, 10.0, 30.0, 40.0]).unwrap();
        assert_eq!(sparse.rates[2], None);
        assert_eq!(sparse.counts[2], 0);
    }

    #[test]
    fn spearman_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 5]).unwrap(), 0.0);
        // ties get average ranks: y ranks (1.5, 1.5, 3, 4, 5)
        let r = spearman(&x, &[1.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let expected = {
            let (a, b) = ([1.0, 2.0, 3.0, 4.0, 5.0], [1.5, 1.5, 3.0, 4.0, 5.0]);
            let m = 3.0;
            let sxy: f64 = a.iter().zip(&b).map(|(p, q)| (p - m) * (q - m)).sum();
            let sxx: f64 = a.iter().map(|p| (p - m).powi(2)).sum();
            let syy: f64 = b.iter().map(|q| (q - m).powi(2)).sum();
            sxy / (sxx * syy).sqrt()
        };
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn summary_csv_has_expected_columns() {
        let t = OutcomeTally::from_kinds(&[OutcomeKind::Success, OutcomeKind::Slipped]);
        let row = PairSummary::new("cube", "WSG 50", ExperimentCondition::GtGraspReconRefPose, 10, 4, &t).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "object_id,gripper,condition,n_total,n_gt,s_gen,s_est,trials,success_frac,slipped_frac,no_contact_frac,collision_frac"
        );
        assert_eq!(lines.next().unwrap(), "cube,WSG 50,gt-recon,10,4,40.0,50.0,2,0.5,0.5,0.0,0.0");
    }

    fn kinds() -> impl Strategy<Value = Vec<OutcomeKind>> {
        prop::collection::vec(prop::sample::select(OutcomeKind::ALL.to_vec()), 1..60)
    }

    proptest! {
        #[test]
        fn rates_are_scale_free(v in kinds(), k in 2usize..5) {
            let dup: Vec<_> = v.iter().cycle().take(v.len() * k).copied().collect();
            prop_assert!((s_est(&v).unwrap() - s_est(&dup).unwrap()).abs() < 1e-9);
            let n = v.iter().filter(|o| **o == OutcomeKind::Success).count();
            prop_assert!((s_gen(n, v.len()).unwrap() - s_gen(n * k, v.len() * k).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn tally_ignores_order(v in kinds(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut w = v.clone();
            w.shuffle(&mut crate::seed::rng(seed));
            let (a, b) = (OutcomeTally::from_kinds(&v), OutcomeTally::from_kinds(&w));
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.success + a.slipped + a.no_contact + a.collision, a.total);
        }

        #[test]
        fn single_bin_curve_equals_s_est(
            pts in prop::collection::vec((0.0f64..50.0, any::<bool>()), 1..80)
        ) {
            let recs: Vec<_> = pts
                .iter()
                .map(|&(t, ok)| record(if ok { OutcomeKind::Success } else { OutcomeKind::Slipped }, t))
                .collect();
            let top = pts.iter().map(|p| p.0).fold(0.0, f64::max) + 1e-9;
            let c = success_curve(&recs, ErrorMetric::Translation, &[0.0, top]).unwrap();
            prop_assert_eq!(c.rates[0].unwrap(), s_est_records(&recs).unwrap());
        }

        #[test]
        fn binned_rates_match_recount(
            pts in prop::collection::vec((0.0f64..30.0, any::<bool>()), 1..80),
            edges in prop::collection::btree_set(0u32..30, 2..6)
        ) {
            let edges: Vec<f64> = edges.into_iter().map(f64::from).collect();
            let recs: Vec<_> = pts
                .iter()
                .map(|&(t, ok)| record(if ok { OutcomeKind::Success } else { OutcomeKind::NoContact }, t))
                .collect();
            let c = success_curve(&recs, ErrorMetric::Translation, &edges).unwrap();
            for b in 0..edges.len() - 1 {
                let last = b == edges.len() - 2;
                let inside: Vec<_> = pts
                    .iter()
                    .filter(|p| p.0 >= edges[b] && (p.0 < edges[b + 1] || (last && p.0 == edges[b + 1])))
                    .collect();
                prop_assert_eq!(c.counts[b], inside.len());
                if !inside.is_empty() {
                    let wins = inside.iter().filter(|p| p.1).count();
                    prop_assert_eq!(c.rates[b].unwrap(), wins as f64 * 100.0 / inside.len() as f64);
                }
            }
        }
    }
}
