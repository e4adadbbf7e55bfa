//! Raw, bootstrap, and posterior ICE summaries with 95% intervals.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::PosteriorDraws;
use crate::model::{Approach, CountyObservation, ModelSpec};
use crate::seeds;

/// Sign classification of an ICE value: concentration of privilege (> 0) or
/// deprivation (< 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IceSign {
    Privileged,
    Deprived,
    Neutral,
}

impl IceSign {
    pub fn of(value: f64) -> Self {
        if value > 0.0 {
            IceSign::Privileged
        } else if value < 0.0 {
            IceSign::Deprived
        } else {
            IceSign::Neutral
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            IceSign::Privileged => "privileged",
            IceSign::Deprived => "deprived",
            IceSign::Neutral => "neutral",
        }
    }
}

/// Per-county ICE point estimate with its 95% interval and the group-wise
/// proportion estimates behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountyIce {
    pub unit_id: String,
    #[serde(default)]
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Point estimate of the high-income White proportion.
    pub p_group1: f64,
    /// Point estimate of the low-income Black proportion.
    pub p_group2: f64,
}

impl CountyIce {
    pub fn sign(&self) -> IceSign {
        IceSign::of(self.estimate)
    }
}

/// Point estimate and 95% interval for one quantity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-county and statewide ICE summary for one estimation method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IceSummary {
    pub method: String,
    pub counties: Vec<CountyIce>,
    pub statewide: IntervalEstimate,
}

impl IceSummary {
    /// Fill county names from observations, matched by unit id.
    pub fn attach_names(&mut self, observations: &[CountyObservation]) {
        let names: HashMap<&str, &str> = observations
            .iter()
            .map(|o| (o.unit_id.as_str(), o.name.as_str()))
            .collect();
        for county in &mut self.counties {
            if let Some(name) = names.get(county.unit_id.as_str()) {
                county.name = (*name).to_string();
            }
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let display = path.as_ref().display().to_string();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(&display, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&display, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: display,
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Write the per-county table as `fips,estimate,lower,upper,sign`.
    pub fn write_counties_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let display = path.as_ref().display().to_string();
        let err = |e: csv::Error| Error::Parse {
            path: display.clone(),
            line: 0,
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(err)?;
        w.write_record(["fips", "estimate", "lower", "upper", "sign"])
            .map_err(err)?;
        for c in &self.counties {
            w.write_record([
                c.unit_id.as_str(),
                &c.estimate.to_string(),
                &c.lower.to_string(),
                &c.upper.to_string(),
                c.sign().as_str(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&display, e))?;
        Ok(())
    }
}

/// Human-readable method tag for a model spec.
pub fn method_label(spec: &ModelSpec) -> String {
    match spec.approach {
        Approach::Local => format!("local(q={})", spec.clusters),
        other => other.as_str().to_string(),
    }
}

/// Interpolated percentile (R type 7): with sorted values `x_1..x_n` and
/// `h = (n - 1) q`, returns `x_{floor(h)+1} + (h - floor(h)) (x_{floor(h)+2}
/// - x_{floor(h)+1})`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval_from(values: &[f64], point: f64) -> IntervalEstimate {
    IntervalEstimate {
        estimate: point,
        lower: percentile(values, 0.025),
        upper: percentile(values, 0.975),
    }
}

/// Raw ICE for one county: `y1/n - y2/n`, always inside [-1, 1] for a valid
/// observation.
pub fn raw_ice(obs: &CountyObservation) -> f64 {
    let n = obs.n_total as f64;
    obs.y_group1 as f64 / n - obs.y_group2 as f64 / n
}

/// Method-of-moments ICE with a percentile-bootstrap interval.
///
/// Each replicate resamples every county's `n` residents with replacement
/// from the within-county empirical trinomial (high-income White, low-income
/// Black, neither), preserving the county denominators. The point estimate
/// is the method-of-moments value on the original data; intervals are the
/// (2.5, 97.5) replicate percentiles. The statewide value is the unweighted
/// county mean, taken per replicate.
pub fn bootstrap_ice(
    data: &[CountyObservation],
    replicates: usize,
    rng: &mut ChaCha8Rng,
) -> Result<IceSummary> {
    if replicates == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap replicate count B must be >= 1".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    for obs in data {
        obs.validate()?;
    }
    let n_counties = data.len();
    let points: Vec<f64> = data.iter().map(raw_ice).collect();
    let statewide_point = points.iter().sum::<f64>() / n_counties as f64;

    // Replicates are independent; shard a seed so parallel execution cannot
    // reorder the stream.
    let base: u64 = rng.gen();
    let resampled: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rep_rng = seeds::stream(base, r as u64);
                data.iter()
                    .map(|obs| resample_county_ice(obs, &mut rep_rng))
                    .collect::<Vec<f64>>()
            })
            .collect()
    };

    let mut counties = Vec::with_capacity(n_counties);
    let mut column = vec![0.0; replicates];
    for (i, obs) in data.iter().enumerate() {
        for (r, rep) in resampled.iter().enumerate() {
            column[r] = rep[i];
        }
        let interval = interval_from(&column, points[i]);
        let n = obs.n_total as f64;
        counties.push(CountyIce {
            unit_id: obs.unit_id.clone(),
            name: obs.name.clone(),
            estimate: interval.estimate,
            lower: interval.lower,
            upper: interval.upper,
            p_group1: obs.y_group1 as f64 / n,
            p_group2: obs.y_group2 as f64 / n,
        });
    }
    let statewide_reps: Vec<f64> = resampled
        .iter()
        .map(|rep| rep.iter().sum::<f64>() / n_counties as f64)
        .collect();
    Ok(IceSummary {
        method: "bootstrap".into(),
        counties,
        statewide: interval_from(&statewide_reps, statewide_point),
    })
}

/// One trinomial resample of a county, returning its replicate ICE.
fn resample_county_ice<R: Rng>(obs: &CountyObservation, rng: &mut R) -> f64 {
    let n = obs.n_total;
    let p1 = obs.y_group1 as f64 / n as f64;
    let k1 = Binomial::new(n, p1).expect("valid proportion").sample(rng);
    let remaining = n - k1;
    let k2 = if remaining == 0 || obs.y_group2 == 0 {
        0
    } else {
        let ratio = (obs.y_group2 as f64 / n as f64) / (1.0 - p1);
        Binomial::new(remaining, ratio.clamp(0.0, 1.0))
            .expect("valid proportion")
            .sample(rng)
    };
    k1 as f64 / n as f64 - k2 as f64 / n as f64
}

/// Posterior ICE from two groups' aligned draws: per draw and county,
/// `ICE_i = p1_i - p2_i`; per-county summaries are the posterior median and
/// (2.5, 97.5) percentiles, and the statewide series takes the county mean
/// within each draw before summarizing across draws.
pub fn posterior_ice(draws1: &PosteriorDraws, draws2: &PosteriorDraws) -> Result<IceSummary> {
    if draws1.retained != draws2.retained {
        return Err(Error::DrawMismatch(format!(
            "retained draws {} vs {}",
            draws1.retained, draws2.retained
        )));
    }
    if draws1.n_units != draws2.n_units {
        return Err(Error::DrawMismatch(format!(
            "unit counts {} vs {}",
            draws1.n_units, draws2.n_units
        )));
    }
    let (s, n) = (draws1.retained, draws1.n_units);
    let mut counties = Vec::with_capacity(n);
    let mut column = vec![0.0; s];
    let mut group = vec![0.0; s];
    for i in 0..n {
        for d in 0..s {
            column[d] = draws1.p_row(d)[i] - draws2.p_row(d)[i];
        }
        let median = percentile(&column, 0.5);
        let interval = interval_from(&column, median);
        for d in 0..s {
            group[d] = draws1.p_row(d)[i];
        }
        let p1 = percentile(&group, 0.5);
        for d in 0..s {
            group[d] = draws2.p_row(d)[i];
        }
        let p2 = percentile(&group, 0.5);
        counties.push(CountyIce {
            unit_id: draws1.unit_ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
            name: String::new(),
            estimate: interval.estimate,
            lower: interval.lower,
            upper: interval.upper,
            p_group1: p1,
            p_group2: p2,
        });
    }
    let statewide: Vec<f64> = (0..s)
        .map(|d| {
            let p1 = draws1.p_row(d);
            let p2 = draws2.p_row(d);
            (0..n).map(|i| p1[i] - p2[i]).sum::<f64>() / n as f64
        })
        .collect();
    let median = percentile(&statewide, 0.5);
    Ok(IceSummary {
        method: method_label(&draws1.spec),
        counties,
        statewide: interval_from(&statewide, median),
    })
}

/// Direction of a proportion's movement between two periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Movement {
    Increased,
    Decreased,
    Unchanged,
}

impl Movement {
    fn of(from: f64, to: f64) -> Self {
        if to > from {
            Movement::Increased
        } else if to < from {
            Movement::Decreased
        } else {
            Movement::Unchanged
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Movement::Increased => "increased",
            Movement::Decreased => "decreased",
            Movement::Unchanged => "unchanged",
        }
    }
}

/// Sign transition of a county's ICE between two periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    #[serde(rename = "negative_to_positive")]
    NegativeToPositive,
    #[serde(rename = "positive_to_negative")]
    PositiveToNegative,
    #[serde(rename = "unchanged")]
    Unchanged,
}

impl Transition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Transition::NegativeToPositive => "negative_to_positive",
            Transition::PositiveToNegative => "positive_to_negative",
            Transition::Unchanged => "unchanged",
        }
    }
}

/// One county's sign transition and group-movement classification.
#[derive(Debug, Clone, Serialize)]
pub struct SignChange {
    pub unit_id: String,
    pub name: String,
    pub transition: Transition,
    pub ice_t1: f64,
    pub ice_t2: f64,
    pub p_group1_movement: Movement,
    pub p_group2_movement: Movement,
    /// Which group's estimated proportion is larger in the second period.
    pub larger_group_t2: &'static str,
}

/// Per-county sign transitions between two summaries over the same county
/// set, classified from the point-estimate signs; the group-movement labels
/// come from the group-wise proportion estimates.
pub fn sign_change_report(t1: &IceSummary, t2: &IceSummary) -> Result<Vec<SignChange>> {
    if t1.counties.len() != t2.counties.len() {
        return Err(Error::CountyMismatch(format!(
            "{} counties vs {}",
            t1.counties.len(),
            t2.counties.len()
        )));
    }
    let later: HashMap<&str, &CountyIce> = t2
        .counties
        .iter()
        .map(|c| (c.unit_id.as_str(), c))
        .collect();
    let mut report = Vec::with_capacity(t1.counties.len());
    for first in &t1.counties {
        let second = later
            .get(first.unit_id.as_str())
            .ok_or_else(|| Error::CountyMismatch(format!("county `{}` missing", first.unit_id)))?;
        let transition = match (first.sign(), second.sign()) {
            (IceSign::Deprived, IceSign::Privileged) => Transition::NegativeToPositive,
            (IceSign::Privileged, IceSign::Deprived) => Transition::PositiveToNegative,
            _ => Transition::Unchanged,
        };
        let name = if second.name.is_empty() {
            first.name.clone()
        } else {
            second.name.clone()
        };
        report.push(SignChange {
            unit_id: first.unit_id.clone(),
            name,
            transition,
            ice_t1: first.estimate,
            ice_t2: second.estimate,
            p_group1_movement: Movement::of(first.p_group1, second.p_group1),
            p_group2_movement: Movement::of(first.p_group2, second.p_group2),
            larger_group_t2: if second.p_group1 > second.p_group2 {
                "high_income_white"
            } else if second.p_group2 > second.p_group1 {
                "low_income_black"
            } else {
                "equal"
            },
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn obs(id: &str, y1: u64, y2: u64, n: u64) -> CountyObservation {
        CountyObservation::new(id, "", y1, y2, n).unwrap()
    }

    #[test]
    fn raw_ice_examples() {
        assert_abs_diff_eq!(raw_ice(&obs("a", 30, 30, 100)), 0.0);
        assert_abs_diff_eq!(raw_ice(&obs("a", 80, 0, 80)), 1.0);
        assert_abs_diff_eq!(raw_ice(&obs("a", 0, 90, 90)), -1.0);
    }

    proptest! {
        #[test]
        fn raw_ice_stays_inside_unit_interval(
            n in 1u64..5000,
            y1_frac in 0.0f64..1.0,
            y2_frac in 0.0f64..1.0,
        ) {
            let y1 = (n as f64 * y1_frac) as u64;
            let y2 = ((n - y1) as f64 * y2_frac) as u64;
            let o = obs("f", y1, y2, n);
            let ice = raw_ice(&o);
            prop_assert!((-1.0..=1.0).contains(&ice));
        }
    }

    #[test]
    fn percentile_interpolation_on_one_to_thousand() {
        let values: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        // h = 999 * q; linear interpolation between adjacent order statistics.
        assert_abs_diff_eq!(percentile(&values, 0.025), 1.0 + 999.0 * 0.025, epsilon = 1e-9);
        assert_abs_diff_eq!(percentile(&values, 0.975), 1.0 + 999.0 * 0.975, epsilon = 1e-9);
        assert_abs_diff_eq!(percentile(&values, 0.0), 1.0);
        assert_abs_diff_eq!(percentile(&values, 1.0), 1000.0);
    }

    #[test]
    fn bootstrap_degenerate_county_has_point_interval() {
        let data = vec![obs("x", 80, 0, 80)];
        let mut rng = crate::seeds::rng(1);
        let s = bootstrap_ice(&data, 500, &mut rng).unwrap();
        assert_abs_diff_eq!(s.counties[0].estimate, 1.0);
        assert_abs_diff_eq!(s.counties[0].lower, 1.0);
        assert_abs_diff_eq!(s.counties[0].upper, 1.0);
        assert_abs_diff_eq!(s.statewide.estimate, 1.0);
    }

    #[test]
    fn bootstrap_statewide_point_is_exact_county_mean() {
        let data = vec![obs("a", 10, 40, 100), obs("b", 25, 5, 50), obs("c", 0, 0, 7)];
        let mut rng = crate::seeds::rng(2);
        let s = bootstrap_ice(&data, 200, &mut rng).unwrap();
        let mean = data.iter().map(raw_ice).sum::<f64>() / 3.0;
        assert_eq!(s.statewide.estimate, mean);
        assert!(s.counties.iter().all(|c| c.lower <= c.estimate && c.estimate <= c.upper));
    }

    #[test]
    fn bootstrap_identical_counties_agree_up_to_noise() {
        let data = vec![obs("a", 120, 300, 1000), obs("b", 120, 300, 1000)];
        let mut rng = crate::seeds::rng(3);
        let s = bootstrap_ice(&data, 4000, &mut rng).unwrap();
        let (a, b) = (&s.counties[0], &s.counties[1]);
        assert_eq!(a.estimate, b.estimate);
        assert!((a.lower - b.lower).abs() < 0.01);
        assert!((a.upper - b.upper).abs() < 0.01);
    }

    #[test]
    fn bootstrap_rejects_zero_replicates() {
        let mut rng = crate::seeds::rng(4);
        assert!(bootstrap_ice(&[obs("a", 1, 1, 3)], 0, &mut rng).is_err());
    }

    fn draws_from_p(p_rows: &[Vec<f64>]) -> PosteriorDraws {
        let retained = p_rows.len();
        let n_units = p_rows[0].len();
        PosteriorDraws {
            spec: ModelSpec::default(),
            seed: 0,
            unit_ids: (0..n_units).map(|i| format!("u{i}")).collect(),
            n_units,
            retained,
            q: 1,
            beta: vec![0.0; retained],
            v: vec![0.0; retained * n_units],
            u: None,
            z: None,
            sigma2_v: vec![1.0; retained],
            sigma2_u: None,
            rho: None,
            p: p_rows.iter().flatten().copied().collect(),
            loglik: vec![0.0; retained * n_units],
            acceptance: Vec::new(),
        }
    }

    #[test]
    fn posterior_ice_identical_groups_is_zero() {
        let p = vec![vec![0.3, 0.6], vec![0.4, 0.5], vec![0.2, 0.7]];
        let d1 = draws_from_p(&p);
        let d2 = draws_from_p(&p);
        let s = posterior_ice(&d1, &d2).unwrap();
        for c in &s.counties {
            assert_eq!((c.estimate, c.lower, c.upper), (0.0, 0.0, 0.0));
        }
        assert_eq!(s.statewide.estimate, 0.0);
    }

    #[test]
    fn posterior_ice_two_draw_arithmetic() {
        let d1 = draws_from_p(&[vec![0.6], vec![0.8]]);
        let d2 = draws_from_p(&[vec![0.1], vec![0.1]]);
        let s = posterior_ice(&d1, &d2).unwrap();
        assert_abs_diff_eq!(s.counties[0].estimate, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn posterior_ice_invariant_to_common_shift() {
        let mut rng = crate::seeds::rng(6);
        let p1: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.gen_range(0.2..0.5)).collect())
            .collect();
        let p2: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.gen_range(0.2..0.5)).collect())
            .collect();
        let delta = 0.13;
        let shift = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|p| p + delta).collect())
                .collect()
        };
        let base = posterior_ice(&draws_from_p(&p1), &draws_from_p(&p2)).unwrap();
        let moved = posterior_ice(&draws_from_p(&shift(&p1)), &draws_from_p(&shift(&p2))).unwrap();
        for (a, b) in base.counties.iter().zip(&moved.counties) {
            assert_abs_diff_eq!(a.estimate, b.estimate, epsilon = 1e-12);
            assert_abs_diff_eq!(a.lower, b.lower, epsilon = 1e-12);
            assert_abs_diff_eq!(a.upper, b.upper, epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_ice_rejects_mismatched_draws() {
        let d1 = draws_from_p(&[vec![0.5], vec![0.5]]);
        let d2 = draws_from_p(&[vec![0.5]]);
        assert!(posterior_ice(&d1, &d2).is_err());
    }

    fn summary_with(estimates: &[(&str, f64, f64, f64)]) -> IceSummary {
        IceSummary {
            method: "test".into(),
            counties: estimates
                .iter()
                .map(|(id, e, p1, p2)| CountyIce {
                    unit_id: id.to_string(),
                    name: format!("{id} county"),
                    estimate: *e,
                    lower: e - 0.1,
                    upper: e + 0.1,
                    p_group1: *p1,
                    p_group2: *p2,
                })
                .collect(),
            statewide: IntervalEstimate {
                estimate: 0.0,
                lower: -0.1,
                upper: 0.1,
            },
        }
    }

    #[test]
    fn sign_changes_classified_per_county() {
        let t1 = summary_with(&[("a", -0.1, 0.2, 0.3), ("b", 0.2, 0.4, 0.2)]);
        let same = sign_change_report(&t1, &t1).unwrap();
        assert!(same.iter().all(|c| c.transition == Transition::Unchanged));

        let t2 = summary_with(&[("a", 0.1, 0.35, 0.25), ("b", -0.05, 0.3, 0.35)]);
        let report = sign_change_report(&t1, &t2).unwrap();
        assert_eq!(report[0].transition, Transition::NegativeToPositive);
        assert_eq!(report[0].p_group1_movement, Movement::Increased);
        assert_eq!(report[0].p_group2_movement, Movement::Decreased);
        assert_eq!(report[0].larger_group_t2, "high_income_white");
        assert_eq!(report[1].transition, Transition::PositiveToNegative);
        assert_eq!(report[1].larger_group_t2, "low_income_black");

        let missing = summary_with(&[("a", 0.1, 0.3, 0.2), ("zz", 0.0, 0.1, 0.1)]);
        assert!(sign_change_report(&t1, &missing).is_err());
    }

    #[test]
    fn summary_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let s = summary_with(&[("13155", -0.02, 0.1, 0.12)]);
        s.write_json(&path).unwrap();
        let back = IceSummary::read_json(&path).unwrap();
        assert_eq!(back.counties[0].unit_id, "13155");
        assert_abs_diff_eq!(back.counties[0].estimate, -0.02);
    }
}
