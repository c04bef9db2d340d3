//! Plug-in discrimination between two candidate processes from one path.
//!
//! Each candidate predicts an almost-sure limit for a variation statistic of
//! the observed path. The candidate whose limit the statistic lands closest to
//! (on a log scale) is selected. No error probabilities are attached: the
//! limits only say the two predictions separate as the grid refines.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::kernels::{gamma_exponent, ProcessSpec};
use crate::sampler::{check_partition_schedule, refinement_schedule, Grid, PathSample, Sampler};
use crate::variation::{
    estimate_hurst_v2, kurchenko_statistic, scaled_dyadic_sum_calibrated, trifbm_calibration,
    v_k_constant, weighted_qv, StatisticResult,
};

/// Smallest dyadic level accepted by [`discriminate_trifbm`].
pub const MIN_TRIFBM_LEVEL: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub spec: ProcessSpec,
    pub label: String,
}

impl Hypothesis {
    pub fn new(spec: ProcessSpec, label: impl Into<String>) -> Result<Self> {
        spec.validate()?;
        Ok(Hypothesis {
            spec,
            label: label.into(),
        })
    }

    /// Hypothesis labelled by the process display form, e.g. `bifbm(H=0.6, K=0.5)`.
    pub fn from_spec(spec: ProcessSpec) -> Result<Self> {
        let label = spec.to_string();
        Hypothesis::new(spec, label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationResult {
    pub labels: [String; 2],
    pub discrepancies: [f64; 2],
    pub selected: String,
    pub selected_index: usize,
    /// `|d₁ − d₂| / max(d₁, d₂)`, 0 on a tie.
    pub margin: f64,
    /// The statistic evaluated under each hypothesis, with that hypothesis's limit as reference.
    pub statistics: [StatisticResult; 2],
    /// Advisory notes, e.g. an unmet partition-norm condition.
    pub notes: Vec<String>,
}

/// `|log v − log ref|`; infinite when either side is not positive.
pub fn log_discrepancy(value: f64, reference: f64) -> f64 {
    if value > 0.0 && reference > 0.0 {
        (value.ln() - reference.ln()).abs()
    } else {
        f64::INFINITY
    }
}

/// Argmin of the two discrepancies. Discrepancies equal up to roundoff are a
/// tie, broken towards the lexicographically smaller label with margin 0.
pub fn select(labels: [&str; 2], discrepancies: [f64; 2]) -> (usize, f64) {
    let [d1, d2] = discrepancies;
    let hi = d1.max(d2);
    let tie = d1 == d2 || (hi.is_finite() && (d1 - d2).abs() <= 1e-12 * hi);
    if tie || d1.is_nan() || d2.is_nan() {
        let index = match labels[0].cmp(labels[1]) {
            Ordering::Greater => 1,
            _ => 0,
        };
        return (index, 0.0);
    }
    let index = if d1 < d2 { 0 } else { 1 };
    let margin = if hi.is_infinite() {
        1.0
    } else {
        (d1 - d2).abs() / hi
    };
    (index, margin)
}

fn assemble(
    h1: &Hypothesis,
    h2: &Hypothesis,
    statistics: [StatisticResult; 2],
    discrepancies: [f64; 2],
    notes: Vec<String>,
) -> DiscriminationResult {
    let (selected_index, margin) = select([&h1.label, &h2.label], discrepancies);
    let labels = [h1.label.clone(), h2.label.clone()];
    DiscriminationResult {
        selected: labels[selected_index].clone(),
        labels,
        discrepancies,
        selected_index,
        margin,
        statistics,
        notes,
    }
}

/// Bifractional pair: weighted quadratic variation with exponent `2H_iK_i − 1`
/// against the limit `2^{1−K_i} T`.
pub fn discriminate_bifbm(
    path: &PathSample,
    h1: &Hypothesis,
    h2: &Hypothesis,
) -> Result<DiscriminationResult> {
    let (hk1, hk2) = match (h1.spec, h2.spec) {
        (ProcessSpec::BifBm { hurst: a, k: b }, ProcessSpec::BifBm { hurst: c, k: d }) => {
            ((a, b), (c, d))
        }
        _ => {
            return Err(Error::param(
                "bifbm discrimination needs two bifbm hypotheses",
            ))
        }
    };
    if hk1.1 == hk2.1 {
        return Err(Error::HypothesesIndistinguishable(format!(
            "both hypotheses have K = {}; the weighted limits 2^(1-K)T coincide",
            hk1.1
        )));
    }
    let mut notes = Vec::new();
    let g1 = gamma_exponent(hk1.0, hk1.1)?;
    let g2 = gamma_exponent(hk2.0, hk2.1)?;
    let gamma = if g1 != g2 {
        let msg = format!(
            "gamma exponents differ ({g1} vs {g2}); checking the partition with the larger"
        );
        log::warn!("{msg}");
        notes.push(msg);
        g1.max(g2)
    } else {
        g1
    };
    let (first, norms) = refinement_schedule(path.grid());
    if !check_partition_schedule(first, &norms, gamma)? {
        let msg = format!(
            "partition norm {} does not meet the (log n)^-{gamma} proxy",
            path.grid().norm()
        );
        log::warn!("{msg}");
        notes.push(msg);
    }

    let horizon = path.grid().horizon();
    let evaluate = |(hurst, k): (f64, f64)| -> Result<(StatisticResult, f64)> {
        let reference = 2f64.powf(1.0 - k) * horizon;
        let stat = weighted_qv(path, 2.0 * hurst * k - 1.0)?.with_reference(Some(reference));
        let d = log_discrepancy(stat.value, reference);
        Ok((stat, d))
    };
    let (s1, d1) = evaluate(hk1)?;
    let (s2, d2) = evaluate(hk2)?;
    Ok(assemble(h1, h2, [s1, s2], [d1, d2], notes))
}

/// Trifractional pair: `2^{α_i n} Σ (ΔX)^2` at each hypothesis's calibrated
/// critical exponent against its calibrated limit.
pub fn discriminate_trifbm(
    path: &PathSample,
    h1: &Hypothesis,
    h2: &Hypothesis,
) -> Result<DiscriminationResult> {
    let (p1, p2) = match (h1.spec, h2.spec) {
        (ProcessSpec::TrifBm { hurst: a, k: b }, ProcessSpec::TrifBm { hurst: c, k: d }) => {
            ((a, b), (c, d))
        }
        _ => {
            return Err(Error::param(
                "trifbm discrimination needs two trifbm hypotheses",
            ))
        }
    };
    for (h, k) in [p1, p2] {
        if h * k > 0.5 {
            return Err(Error::param(format!(
                "trifbm discrimination needs H*K <= 1/2 (got H*K = {})",
                h * k
            )));
        }
    }
    if (p1.0 * p1.1 - p2.0 * p2.1).abs() <= 1e-12 {
        return Err(Error::HypothesesIndistinguishable(format!(
            "both hypotheses have H*K = {}",
            p1.0 * p1.1
        )));
    }
    let grid = path.grid();
    let level = grid.dyadic_level().filter(|&l| l >= MIN_TRIFBM_LEVEL).ok_or_else(|| {
        Error::domain(format!(
            "trifbm discrimination needs a dyadic grid of level >= {MIN_TRIFBM_LEVEL} (got {} intervals)",
            grid.intervals()
        ))
    })?;
    if grid.horizon() != 1.0 {
        return Err(Error::domain(format!(
            "trifbm discrimination works on [0, 1] (got T = {})",
            grid.horizon()
        )));
    }
    let evaluate = |(hurst, k): (f64, f64)| -> Result<(StatisticResult, f64)> {
        let cal = trifbm_calibration(hurst, k)?;
        let stat = scaled_dyadic_sum_calibrated(path, cal.critical_alpha, Some(&cal))?
            .with_reference(Some(cal.limit));
        let d = log_discrepancy(stat.value, cal.limit);
        Ok((stat, d))
    };
    let (s1, d1) = evaluate(p1)?;
    let (s2, d2) = evaluate(p2)?;
    let mut result = assemble(h1, h2, [s1, s2], [d1, d2], Vec::new());
    for s in &mut result.statistics {
        s.meta.insert("level".into(), f64::from(level));
    }
    Ok(result)
}

/// Fractional pair: second-order statistic on the half-integer grid against `V_2(0, H_i)`.
///
/// The estimator-space rule (closest `Ĥ`) is evaluated alongside; it must pick
/// the same hypothesis because `V_2(0, ·)` is strictly decreasing, and any
/// disagreement is recorded in the notes.
pub fn discriminate_fbm(path: &PathSample, h1: f64, h2: f64) -> Result<DiscriminationResult> {
    let hyp1 = Hypothesis::from_spec(ProcessSpec::fbm(h1))?;
    let hyp2 = Hypothesis::from_spec(ProcessSpec::fbm(h2))?;
    discriminate_fbm_hypotheses(path, &hyp1, &hyp2)
}

pub fn discriminate_fbm_hypotheses(
    path: &PathSample,
    h1: &Hypothesis,
    h2: &Hypothesis,
) -> Result<DiscriminationResult> {
    let (a, b) = match (h1.spec, h2.spec) {
        (ProcessSpec::Fbm { hurst: a }, ProcessSpec::Fbm { hurst: b }) => (a, b),
        _ => return Err(Error::param("fbm discrimination needs two fbm hypotheses")),
    };
    if a == b {
        return Err(Error::HypothesesIndistinguishable(format!(
            "both hypotheses have H = {a}"
        )));
    }
    let n = half_integer_n(path.grid())?;
    let base = kurchenko_statistic(path, n)?;
    let evaluate = |hurst: f64| -> Result<(StatisticResult, f64)> {
        let reference = v_k_constant(2, 0.0, hurst)?;
        let stat = base
            .clone()
            .with_reference(Some(reference))
            .with_meta("hypothesis_hurst", hurst);
        let d = log_discrepancy(stat.value, reference);
        Ok((stat, d))
    };
    let (s1, d1) = evaluate(a)?;
    let (s2, d2) = evaluate(b)?;
    let mut result = assemble(h1, h2, [s1, s2], [d1, d2], Vec::new());

    if result.margin > 0.0 {
        if let Some(index) = estimator_choice(base.value, a, b) {
            if index != result.selected_index {
                let msg = format!(
                    "estimator-space rule picks {} but statistic-space rule picks {}",
                    result.labels[index], result.selected
                );
                log::warn!("{msg}");
                result.notes.push(msg);
            }
        }
    }
    Ok(result)
}

/// Index of the hypothesis nearest to `Ĥ = estimate_hurst_v2(statistic)`,
/// or `None` when the statistic is outside the invertible range or equidistant.
pub fn estimator_choice(statistic: f64, h1: f64, h2: f64) -> Option<usize> {
    let h = estimate_hurst_v2(statistic).ok()?;
    let (e1, e2) = ((h - h1).abs(), (h - h2).abs());
    match e1.partial_cmp(&e2)? {
        Ordering::Less => Some(0),
        Ordering::Greater => Some(1),
        Ordering::Equal => None,
    }
}

fn half_integer_n(grid: &Grid) -> Result<usize> {
    let n = grid.horizon().round();
    if n >= 1.0 && (grid.horizon() - n).abs() <= 1e-12 * n && grid.intervals() == 2 * n as usize {
        Ok(n as usize)
    } else {
        Err(Error::GridMismatch(format!(
            "fbm discrimination needs the half-integer grid of [0, n]; got {} intervals on [0, {}]",
            grid.intervals(),
            grid.horizon()
        )))
    }
}

/// Runs the discriminator matching the family of the hypotheses.
pub fn discriminate(
    path: &PathSample,
    h1: &Hypothesis,
    h2: &Hypothesis,
) -> Result<DiscriminationResult> {
    match h1.spec {
        ProcessSpec::BifBm { .. } => discriminate_bifbm(path, h1, h2),
        ProcessSpec::TrifBm { .. } => discriminate_trifbm(path, h1, h2),
        ProcessSpec::Fbm { .. } => discriminate_fbm_hypotheses(path, h1, h2),
        ProcessSpec::NthFbm { .. } => Err(Error::param("no discriminator for n-th order fbm")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub seed: u64,
    pub correct: bool,
    pub result: DiscriminationResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudy {
    pub truth: String,
    pub rate: f64,
    pub records: Vec<PathRecord>,
}

impl PowerStudy {
    pub fn correct(&self) -> usize {
        self.records.iter().filter(|r| r.correct).count()
    }

    /// Binomial standard error of the rate.
    pub fn standard_error(&self) -> f64 {
        let n = self.records.len() as f64;
        (self.rate * (1.0 - self.rate) / n).sqrt()
    }

    pub fn median_margin(&self) -> f64 {
        let mut m: Vec<f64> = self.records.iter().map(|r| r.result.margin).collect();
        m.sort_by(f64::total_cmp);
        let n = m.len();
        if n % 2 == 1 {
            m[n / 2]
        } else {
            0.5 * (m[n / 2 - 1] + m[n / 2])
        }
    }
}

/// Samples `paths` paths of `truth` (seeds `base_seed + i`) on `grid` and
/// reports how often the matching discriminator selects the truth.
pub fn power_study(
    truth: &ProcessSpec,
    h1: &Hypothesis,
    h2: &Hypothesis,
    paths: usize,
    base_seed: u64,
    grid: &Grid,
) -> Result<PowerStudy> {
    if paths == 0 {
        return Err(Error::domain("power study needs at least one path"));
    }
    let truth_label = if *truth == h1.spec {
        h1.label.clone()
    } else if *truth == h2.spec {
        h2.label.clone()
    } else {
        return Err(Error::domain(format!(
            "truth {truth} is neither hypothesis"
        )));
    };
    let sampler = Sampler::new(*truth, grid.clone())?;
    let mut records = Vec::with_capacity(paths);
    for i in 0..paths as u64 {
        let seed = base_seed.wrapping_add(i);
        let path = sampler.sample(seed);
        let result = discriminate(&path, h1, h2)?;
        records.push(PathRecord {
            seed,
            correct: result.selected == truth_label,
            result,
        });
    }
    let rate = records.iter().filter(|r| r.correct).count() as f64 / paths as f64;
    Ok(PowerStudy {
        truth: truth_label,
        rate,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::uniform_grid;
    use proptest::prelude::*;

    fn hyp(spec: ProcessSpec) -> Hypothesis {
        Hypothesis::from_spec(spec).unwrap()
    }

    /// Path whose squared increments equal their expectations exactly.
    fn expected_surrogate(spec: ProcessSpec, grid: Grid) -> PathSample {
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for w in grid.points().windows(2) {
            acc += spec.increment_variance(w[0], w[1]).sqrt();
            values.push(acc);
        }
        PathSample::new(grid, values, spec, 0).unwrap()
    }

    #[test]
    fn select_prefers_smaller_discrepancy() {
        assert_eq!(select(["a", "b"], [0.1, 0.3]), (0, (0.3 - 0.1) / 0.3));
        assert_eq!(select(["a", "b"], [0.5, 0.3]).0, 1);
        assert_eq!(select(["b", "a"], [0.2, 0.2]), (1, 0.0));
        assert_eq!(select(["a", "b"], [f64::INFINITY, f64::INFINITY]), (0, 0.0));
        assert_eq!(select(["a", "b"], [0.2, f64::INFINITY]), (0, 1.0));
        assert_eq!(select(["a", "b"], [0.0, 0.0]), (0, 0.0));
    }

    #[test]
    fn bifbm_requires_distinct_k() {
        let grid = uniform_grid(1.0, 64).unwrap();
        let path = expected_surrogate(ProcessSpec::bifbm(0.6, 0.5), grid);
        let err = discriminate_bifbm(
            &path,
            &hyp(ProcessSpec::bifbm(0.6, 0.5)),
            &hyp(ProcessSpec::bifbm(0.4, 0.5)),
        );
        assert!(matches!(err, Err(Error::HypothesesIndistinguishable(_))));
        let err = discriminate_bifbm(
            &path,
            &hyp(ProcessSpec::bifbm(0.6, 0.5)),
            &hyp(ProcessSpec::trifbm(0.4, 0.5)),
        );
        assert!(matches!(err, Err(Error::ParameterOutOfRange(_))));
    }

    #[test]
    fn bifbm_surrogate_selects_truth() {
        let grid = uniform_grid(1.0, 4096).unwrap();
        let truth = ProcessSpec::bifbm(0.6, 0.5);
        let path = expected_surrogate(truth, grid);
        let r = discriminate_bifbm(&path, &hyp(truth), &hyp(ProcessSpec::bifbm(0.6, 0.9))).unwrap();
        assert_eq!(r.selected, truth.to_string());
        assert!(r.margin > 0.0);
        assert!(r.discrepancies[0] < 0.01, "{r:?}");
        // gamma(0.6, 0.9) = 1/(2 - 1.08) > 1 = gamma(0.6, 0.5)
        assert!(r.notes.iter().any(|n| n.contains("gamma exponents differ")));
    }

    #[test]
    fn trifbm_preconditions() {
        let grid = Grid::dyadic(1.0, 8).unwrap();
        let path = expected_surrogate(ProcessSpec::trifbm(0.5, 0.6), grid);
        let err = discriminate_trifbm(
            &path,
            &hyp(ProcessSpec::trifbm(0.5, 0.6)),
            &hyp(ProcessSpec::trifbm(0.6, 0.5)),
        );
        assert!(matches!(err, Err(Error::HypothesesIndistinguishable(_))));
        let err = discriminate_trifbm(
            &path,
            &hyp(ProcessSpec::trifbm(0.6, 0.9)),
            &hyp(ProcessSpec::trifbm(0.4, 0.5)),
        );
        assert!(matches!(err, Err(Error::ParameterOutOfRange(_))));
        let coarse =
            expected_surrogate(ProcessSpec::trifbm(0.5, 0.8), Grid::dyadic(1.0, 6).unwrap());
        let err = discriminate_trifbm(
            &coarse,
            &hyp(ProcessSpec::trifbm(0.5, 0.8)),
            &hyp(ProcessSpec::trifbm(0.4, 0.5)),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn trifbm_surrogate_selects_truth() {
        let truth = ProcessSpec::trifbm(0.5, 0.8);
        let path = expected_surrogate(truth, Grid::dyadic(1.0, 12).unwrap());
        let r =
            discriminate_trifbm(&path, &hyp(truth), &hyp(ProcessSpec::trifbm(0.4, 0.5))).unwrap();
        assert_eq!(r.selected_index, 0);
        assert!(r.margin > 0.5, "{r:?}");
    }

    #[test]
    fn fbm_requires_distinct_hurst_and_half_integer_grid() {
        let path = expected_surrogate(ProcessSpec::fbm(0.3), Grid::half_integer(16).unwrap());
        assert!(matches!(
            discriminate_fbm(&path, 0.3, 0.3),
            Err(Error::HypothesesIndistinguishable(_))
        ));
        let other = expected_surrogate(ProcessSpec::fbm(0.3), uniform_grid(1.0, 32).unwrap());
        assert!(matches!(
            discriminate_fbm(&other, 0.3, 0.7),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn fbm_midway_statistic_ties_to_smaller_label() {
        let (v1, v2) = (
            v_k_constant(2, 0.0, 0.3).unwrap(),
            v_k_constant(2, 0.0, 0.7).unwrap(),
        );
        let target = (v1 * v2).sqrt();
        let n = 4;
        let grid = Grid::half_integer(n).unwrap();
        // Zero at integers, −c/2 at half-integers: every second difference is c.
        let c = target.sqrt();
        let values: Vec<f64> = (0..=2 * n)
            .map(|i| if i % 2 == 0 { 0.0 } else { -c / 2.0 })
            .collect();
        let path = PathSample::new(grid, values, ProcessSpec::fbm(0.3), 0).unwrap();
        let r = discriminate_fbm(&path, 0.7, 0.3).unwrap();
        assert_eq!(r.selected, "fbm(H=0.3)");
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn power_study_rejects_bad_input() {
        let grid = Grid::half_integer(16).unwrap();
        let h1 = hyp(ProcessSpec::fbm(0.3));
        let h2 = hyp(ProcessSpec::fbm(0.7));
        assert!(matches!(
            power_study(&ProcessSpec::fbm(0.3), &h1, &h2, 0, 1, &grid),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            power_study(&ProcessSpec::fbm(0.5), &h1, &h2, 3, 1, &grid),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn power_study_records_are_ordered_and_deterministic() {
        let grid = Grid::half_integer(64).unwrap();
        let h1 = hyp(ProcessSpec::fbm(0.3));
        let h2 = hyp(ProcessSpec::fbm(0.7));
        let a = power_study(&ProcessSpec::fbm(0.3), &h1, &h2, 8, 40, &grid).unwrap();
        let b = power_study(&ProcessSpec::fbm(0.3), &h1, &h2, 8, 40, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.records.iter().map(|r| r.seed).collect::<Vec<_>>(),
            (40..48).collect::<Vec<_>>()
        );
        assert_eq!(a.correct() as f64 / 8.0, a.rate);
    }

    #[test]
    fn fbm_rules_agree_on_sampled_paths() {
        let grid = Grid::half_integer(1024).unwrap();
        let h1 = hyp(ProcessSpec::fbm(0.3));
        let h2 = hyp(ProcessSpec::fbm(0.7));
        for truth in [0.3, 0.7] {
            let study = power_study(&ProcessSpec::fbm(truth), &h1, &h2, 20, 900, &grid).unwrap();
            for r in &study.records {
                assert!(
                    r.result.notes.is_empty(),
                    "seed {}: {:?}",
                    r.seed,
                    r.result.notes
                );
            }
        }
    }

    #[test]
    fn statistic_rule_wins_between_midpoints() {
        // log-midpoint of V_2 is ~0.919 (H ~ 0.530); 0.95 sits between the two midpoints.
        let n = 4;
        let c = 0.95f64.sqrt();
        let values: Vec<f64> = (0..=2 * n)
            .map(|i| if i % 2 == 0 { 0.0 } else { -c / 2.0 })
            .collect();
        let path = PathSample::new(
            Grid::half_integer(n).unwrap(),
            values,
            ProcessSpec::fbm(0.3),
            0,
        )
        .unwrap();
        let r = discriminate_fbm(&path, 0.3, 0.7).unwrap();
        assert_eq!(r.selected, "fbm(H=0.3)");
        assert_eq!(estimator_choice(r.statistics[0].value, 0.3, 0.7), Some(1));
        assert_eq!(r.notes.len(), 1);
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0, c in 1e-3f64..1e3) {
            let (i, _) = select(["x", "y"], [d1, d2]);
            let (j, _) = select(["x", "y"], [c * d1, c * d2]);
            prop_assert_eq!(i, j);
        }
    }
}
