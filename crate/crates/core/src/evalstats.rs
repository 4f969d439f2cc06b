//! Matching-study statistics: confusion matrix, chi-squared against chance,
//! KS normality screening and Kruskal–Wallis over adjective ratings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::texdata::Archetype;

pub const TRIAL_COLUMNS: [&str; 7] = ["participant", "round", "presented", "selected", "flat_bumpy", "cold_hot", "soft_stiff"];
pub const RATING_NAMES: [&str; 3] = ["flat_bumpy", "cold_hot", "soft_stiff"];
/// Stephens' 5% point for the modified KS statistic with estimated mean and variance.
pub const KS_EST_CRITICAL_05: f64 = 0.895;
/// Classical 5% point of `sqrt(n)·D` for a fully specified distribution.
pub const KS_CLASSICAL_CRITICAL_05: f64 = 1.358;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("trial file header must be {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("row {row}, column {column}: {message}")]
    Schema { row: usize, column: &'static str, message: String },
    #[error("no trials left after excluding round {0}")]
    EmptyAfterExclusion(u32),
    #[error("confusion row {0} is empty; expected counts would be zero")]
    EmptyRow(String),
    #[error("need at least {needed} values, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("need at least two groups, each nonempty")]
    BadGroups,
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("read error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: String,
    pub round: u32,
    pub presented: String,
    pub selected: String,
    /// flat–bumpy, cold–hot, soft–stiff, each in [0, 100].
    pub ratings: [f64; 3],
}

pub fn default_labels() -> Vec<String> {
    Archetype::ALL.iter().map(|a| a.name().to_string()).collect()
}

/// Parses trials, naming the row (1-based, header is row 1) and column of
/// the first schema violation.
pub fn parse_trials(input: impl Read, labels: &[String]) -> Result<Vec<TrialRecord>, StatsError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| StatsError::Io(e.to_string()))?.clone();
    if headers.iter().ne(TRIAL_COLUMNS.iter().copied()) {
        return Err(StatsError::Header { expected: TRIAL_COLUMNS.join(","), found: headers.iter().collect::<Vec<_>>().join(",") });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| StatsError::Schema { row, column: "participant", message: e.to_string() })?;
        let err = |column: &'static str, message: String| StatsError::Schema { row, column, message };
        let participant = record[0].to_string();
        if participant.is_empty() {
            return Err(err("participant", "empty participant id".into()));
        }
        let round = record[1].parse::<u32>().map_err(|_| err("round", format!("'{}' is not a round number", &record[1])))?;
        let label = |col: usize, column: &'static str| {
            let v = &record[col];
            if labels.iter().any(|l| l == v) {
                Ok(v.to_string())
            } else {
                Err(err(column, format!("unknown texture '{v}'")))
            }
        };
        let presented = label(2, "presented")?;
        let selected = label(3, "selected")?;
        let mut ratings = [0.0; 3];
        for (k, column) in RATING_NAMES.iter().enumerate() {
            let raw = &record[4 + k];
            let v: f64 = raw.parse().map_err(|_| err(column, format!("'{raw}' is not a number")))?;
            if !(0.0..=100.0).contains(&v) {
                return Err(err(column, format!("rating {v} outside [0, 100]")));
            }
            ratings[k] = v;
        }
        out.push(TrialRecord { participant, round, presented, selected, ratings });
    }
    Ok(out)
}

pub fn trials_csv(trials: &[TrialRecord]) -> String {
    let mut out = TRIAL_COLUMNS.join(",");
    out.push('\n');
    for t in trials {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", t.participant, t.round, t.presented, t.selected, t.ratings[0], t.ratings[1], t.ratings[2]);
    }
    out
}

/// Synthetic study in the shape of the matching experiment: four rounds with
/// the first treated as training, every texture shown once per round.
/// Later rounds hit fixed per-texture hit rates exactly; confusions go to the
/// textures the wrong answers were most often mistaken for.
pub fn synthetic_trials(participants: usize, seed: u64) -> Vec<TrialRecord> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as NormalDist};

    // (texture, hit rate, confusers, rating means flat_bumpy / cold_hot / soft_stiff)
    let table: [(Archetype, f64, &[Archetype], [f64; 3]); 6] = [
        (Archetype::RoughMetal, 0.9, &[Archetype::SmoothMetal, Archetype::Cardboard], [70.0, 15.0, 90.0]),
        (Archetype::SmoothMetal, 0.9, &[Archetype::RoughMetal, Archetype::SmoothFoam], [10.0, 10.0, 95.0]),
        (Archetype::RoughFoam, 0.9, &[Archetype::SmoothFoam, Archetype::Fabric], [75.0, 60.0, 10.0]),
        (Archetype::SmoothFoam, 0.622, &[Archetype::SmoothMetal, Archetype::Cardboard], [25.0, 55.0, 25.0]),
        (Archetype::Cardboard, 0.45, &[Archetype::Fabric, Archetype::Fabric, Archetype::SmoothFoam], [35.0, 50.0, 70.0]),
        (Archetype::Fabric, 0.45, &[Archetype::Cardboard, Archetype::Cardboard, Archetype::SmoothFoam], [40.0, 55.0, 55.0]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = NormalDist::new(0.0, 12.0).expect("valid normal");
    let rate = |rng: &mut ChaCha8Rng, mean: f64| (mean + noise.sample(rng)).round().clamp(0.0, 100.0);
    let scored = participants * 3;
    let mut selections: Vec<Vec<Archetype>> = Vec::new();
    for (texture, hit, confusers, _) in &table {
        let hits = (hit * scored as f64).round() as usize;
        let mut row: Vec<Archetype> = std::iter::repeat_n(*texture, hits)
            .chain((0..scored - hits).map(|k| confusers[k % confusers.len()]))
            .collect();
        row.shuffle(&mut rng);
        selections.push(row);
    }
    let mut trials = Vec::with_capacity(participants * 4 * table.len());
    for p in 0..participants {
        for round in 1..=4u32 {
            let mut order: Vec<usize> = (0..table.len()).collect();
            order.shuffle(&mut rng);
            for i in order {
                let (texture, _, _, means) = &table[i];
                let selected = if round == 1 {
                    Archetype::ALL[rng.random_range(0..Archetype::ALL.len())]
                } else {
                    selections[i][p * 3 + (round as usize - 2)]
                };
                let ratings = [rate(&mut rng, means[0]), rate(&mut rng, means[1]), rate(&mut rng, means[2])];
                trials.push(TrialRecord {
                    participant: format!("P{:02}", p + 1),
                    round,
                    presented: texture.name().to_string(),
                    selected: selected.name().to_string(),
                    ratings,
                });
            }
        }
    }
    trials
}

/// Rows are presented textures, columns selected textures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert!(counts.len() == labels.len() && counts.iter().all(|r| r.len() == labels.len()));
        Self { labels, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Row-normalised proportions; empty rows stay zero.
    pub fn proportions(&self) -> Vec<Vec<f64>> {
        (0..self.labels.len())
            .map(|i| {
                let n = self.row_total(i);
                self.counts[i].iter().map(|c| if n == 0 { 0.0 } else { *c as f64 / n as f64 }).collect()
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("presented,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }
}

pub fn build_confusion(trials: &[TrialRecord], labels: &[String], exclude_round: Option<u32>) -> Result<ConfusionMatrix, StatsError> {
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    let mut used = 0;
    for t in trials.iter().filter(|t| Some(t.round) != exclude_round) {
        counts[index[t.presented.as_str()]][index[t.selected.as_str()]] += 1;
        used += 1;
    }
    if used == 0 {
        return Err(StatsError::EmptyAfterExclusion(exclude_round.unwrap_or(0)));
    }
    Ok(ConfusionMatrix::from_counts(labels.to_vec(), counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub n: u64,
    /// `(k - 1)^2`, the contingency-table reading.
    pub dof_independence: u64,
    pub p_independence: f64,
    /// `k - 1` per row, summed over rows.
    pub dof_goodness_of_fit: u64,
    pub p_goodness_of_fit: f64,
}

/// Pearson statistic against uniform selection within each presented row.
pub fn chi_squared_vs_chance(m: &ConfusionMatrix) -> Result<ChiSquaredResult, StatsError> {
    let k = m.labels.len();
    let mut statistic = 0.0;
    for (i, row) in m.counts.iter().enumerate() {
        let total = m.row_total(i);
        if total == 0 {
            return Err(StatsError::EmptyRow(m.labels[i].clone()));
        }
        let expected = total as f64 / k as f64;
        statistic += row.iter().map(|o| (*o as f64 - expected).powi(2) / expected).sum::<f64>();
    }
    let dof_independence = ((k - 1) * (k - 1)) as u64;
    let dof_goodness_of_fit = (k * (k - 1)) as u64;
    Ok(ChiSquaredResult {
        statistic,
        n: m.total(),
        dof_independence,
        p_independence: chi2_sf(statistic, dof_independence as f64),
        dof_goodness_of_fit,
        p_goodness_of_fit: chi2_sf(statistic, dof_goodness_of_fit as f64),
    })
}

fn chi2_sf(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").sf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Mid-ranks (1-based) with the tie-correction sum `Σ (t³ - t)`.
fn rank_with_ties(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Tie-corrected H. All values identical gives H = 0.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis, StatsError> {
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return Err(StatsError::BadGroups);
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let (ranks, ties) = rank_with_ties(&all);
    let dof = groups.len() - 1;
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, dof, p_value: 1.0 });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(KruskalWallis { h, dof, p_value: chi2_sf(h, dof as f64) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsNormality {
    pub d: f64,
    pub n: usize,
    /// `D` rescaled for estimated parameters, compared with [`KS_EST_CRITICAL_05`].
    pub d_modified: f64,
    pub reject_at_05: bool,
    /// Verdict from the classical critical value, which ignores that the
    /// mean and variance were estimated from the sample.
    pub reject_classical_05: bool,
}

/// One-sample KS distance to a normal with the sample's mean and standard
/// deviation.
pub fn ks_normality(sample: &[f64]) -> Result<KsNormality, StatsError> {
    let n = sample.len();
    if n < 5 {
        return Err(StatsError::TooFewSamples { needed: 5, found: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let normal = Normal::new(mean, var.sqrt()).expect("valid normal");
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    let d_modified = d * (root - 0.01 + 0.85 / root);
    Ok(KsNormality {
        d,
        n,
        d_modified,
        reject_at_05: d_modified > KS_EST_CRITICAL_05,
        reject_classical_05: d * root > KS_CLASSICAL_CRITICAL_05,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: String,
    pub kruskal_wallis: KruskalWallis,
    /// Per presented texture, in label order; `None` when the group is too
    /// small or constant.
    pub normality: Vec<Option<KsNormality>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub confusion: ConfusionMatrix,
    pub chi_squared: ChiSquaredResult,
    pub dimensions: Vec<DimensionReport>,
}

/// Ratings are grouped by presented texture; groups without trials are skipped.
pub fn evaluate(trials: &[TrialRecord], labels: &[String], exclude_round: Option<u32>) -> Result<StatsReport, StatsError> {
    let confusion = build_confusion(trials, labels, exclude_round)?;
    let chi_squared = chi_squared_vs_chance(&confusion)?;
    let kept: Vec<&TrialRecord> = trials.iter().filter(|t| Some(t.round) != exclude_round).collect();
    let mut dimensions = Vec::new();
    for (k, name) in RATING_NAMES.iter().enumerate() {
        let groups: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| kept.iter().filter(|t| &t.presented == l).map(|t| t.ratings[k]).collect())
            .collect();
        let nonempty: Vec<Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).cloned().collect();
        dimensions.push(DimensionReport {
            dimension: name.to_string(),
            kruskal_wallis: kruskal_wallis(&nonempty)?,
            normality: groups.iter().map(|g| ks_normality(g).ok()).collect(),
        });
    }
    Ok(StatsReport { confusion, chi_squared, dimensions })
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let m = &self.confusion;
        let width = m.labels.iter().map(String::len).max().unwrap_or(0).max(9);
        let mut out = String::from("Confusion proportions (rows presented, columns selected)\n");
        let _ = write!(out, "{:width$}", "");
        for l in &m.labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for (l, row) in m.labels.iter().zip(m.proportions()) {
            let _ = write!(out, "{l:width$}");
            for p in row {
                let _ = write!(out, " {p:>width$.3}");
            }
            out.push('\n');
        }
        let c = &self.chi_squared;
        let _ = writeln!(out, "\nOverall accuracy {:.3} over N = {}", m.accuracy(), c.n);
        let _ = writeln!(out, "Chi-squared vs chance: {:.3}", c.statistic);
        let _ = writeln!(out, "  dof {} (contingency)  p = {:.3e}", c.dof_independence, c.p_independence);
        let _ = writeln!(out, "  dof {} (per-row fit)  p = {:.3e}", c.dof_goodness_of_fit, c.p_goodness_of_fit);
        out.push_str("\nKruskal-Wallis by presented texture\n");
        for d in &self.dimensions {
            let k = &d.kruskal_wallis;
            let non_normal = d.normality.iter().flatten().filter(|r| r.reject_at_05).count();
            let _ = writeln!(
                out,
                "  {:<11} H({}) = {:.3}  p = {:.3e}  non-normal groups: {}",
                d.dimension, k.dof, k.h, k.p_value, non_normal
            );
        }
        out
    }

    /// `statistic,dimension,value,dof,p_value` rows.
    pub fn to_csv(&self) -> String {
        let c = &self.chi_squared;
        let mut out = String::from("statistic,dimension,value,dof,p_value\n");
        let _ = writeln!(out, "chi_squared,selection,{},{},{}", c.statistic, c.dof_independence, c.p_independence);
        let _ = writeln!(out, "chi_squared,selection,{},{},{}", c.statistic, c.dof_goodness_of_fit, c.p_goodness_of_fit);
        let _ = writeln!(out, "accuracy,selection,{},,", self.confusion.accuracy());
        for d in &self.dimensions {
            let k = &d.kruskal_wallis;
            let _ = writeln!(out, "kruskal_wallis,{},{},{},{}", d.dimension, k.h, k.dof, k.p_value);
            for (label, ks) in self.confusion.labels.iter().zip(&d.normality) {
                if let Some(ks) = ks {
                    let _ = writeln!(out, "ks_normality_{label},{},{},,{}", d.dimension, ks.d, u8::from(ks.reject_at_05));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as NormalDist};

    fn labels() -> Vec<String> {
        default_labels()
    }

    fn diag(n: u64) -> ConfusionMatrix {
        let k = 6;
        ConfusionMatrix::from_counts(labels(), (0..k).map(|i| (0..k).map(|j| if i == j { n } else { 0 }).collect()).collect())
    }

    #[test]
    fn synthetic_study_hits_target_rates() {
        let trials = synthetic_trials(15, 3);
        assert_eq!(trials.len(), 360);
        let m = build_confusion(&trials, &labels(), Some(1)).unwrap();
        assert_eq!(m.total(), 270);
        let p = m.proportions();
        let want = [0.9, 0.9, 0.9, 0.622, 0.45, 0.45];
        for (i, w) in want.iter().enumerate() {
            assert!((p[i][i] - w).abs() <= 1.0 / 45.0, "{} {}", m.labels[i], p[i][i]);
        }
        assert_eq!(synthetic_trials(15, 3), trials);
    }

    #[test]
    fn perfect_diagonal_is_1350() {
        let c = chi_squared_vs_chance(&diag(45)).unwrap();
        // 6 × [(45 − 7.5)²/7.5 + 5·7.5²/7.5]
        assert!((c.statistic - 1350.0).abs() < 1e-9);
        assert_eq!((c.n, c.dof_independence, c.dof_goodness_of_fit), (270, 25, 30));
        assert!(c.p_independence < 1e-100);
    }

    #[test]
    fn uniform_is_zero() {
        let m = ConfusionMatrix::from_counts(labels(), vec![vec![5; 6]; 6]);
        assert_eq!(chi_squared_vs_chance(&m).unwrap().statistic, 0.0);
        assert!(m.proportions().iter().flatten().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn single_row_contribution() {
        let mut counts = vec![vec![5; 6]; 6];
        counts[0] = vec![30, 3, 3, 3, 3, 3];
        let c = chi_squared_vs_chance(&ConfusionMatrix::from_counts(labels(), counts)).unwrap();
        // (22.5² + 5·4.5²) / 7.5
        assert!((c.statistic - 81.0).abs() < 1e-9);
    }

    #[test]
    fn empty_row_rejected() {
        let mut counts = vec![vec![5; 6]; 6];
        counts[2] = vec![0; 6];
        assert!(matches!(chi_squared_vs_chance(&ConfusionMatrix::from_counts(labels(), counts)), Err(StatsError::EmptyRow(_))));
    }

    #[test]
    fn kruskal_wallis_hand_values() {
        let k = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        // 12/42 · (36/3 + 225/3) − 21
        assert!((k.h - 27.0 / 7.0).abs() < 1e-12);
        assert!((k.h - 3.857).abs() < 1e-3);
        assert_eq!(k.dof, 1);
        let same = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(same.h.abs() < 1e-12);
        let flat = kruskal_wallis(&[vec![4.0; 3], vec![4.0; 5]]).unwrap();
        assert_eq!(flat.h, 0.0);
        assert!(matches!(kruskal_wallis(&[vec![1.0]]), Err(StatsError::BadGroups)));
    }

    #[test]
    fn kruskal_wallis_tie_correction() {
        // Ranks: 1, 2.5, 2.5 | 4, 5, 6; ties Σ(t³ − t) = 6.
        let k = kruskal_wallis(&[vec![1.0, 2.0, 2.0], vec![3.0, 4.0, 5.0]]).unwrap();
        let raw = 12.0 / 42.0 * (6.0f64.powi(2) / 3.0 + 15.0f64.powi(2) / 3.0) - 21.0;
        assert!((k.h - raw / (1.0 - 6.0 / 210.0)).abs() < 1e-12);
    }

    #[test]
    fn kruskal_wallis_size_near_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let crit = 5.991;
        let trials = 1000;
        let mut hits = 0;
        for _ in 0..trials {
            let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..30).map(|_| rng.random::<f64>()).collect()).collect();
            if kruskal_wallis(&groups).unwrap().h > crit {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        assert!((0.025..=0.08).contains(&rate), "{rate}");
    }

    #[test]
    fn ks_size_and_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = NormalDist::new(50.0, 10.0).unwrap();
        let trials = 1000;
        let null_rate = (0..trials).filter(|_| {
            let x: Vec<f64> = (0..135).map(|_| normal.sample(&mut rng)).collect();
            ks_normality(&x).unwrap().reject_at_05
        }).count() as f64 / trials as f64;
        assert!((0.025..=0.08).contains(&null_rate), "size {null_rate}");
        let power = (0..trials).filter(|_| {
            let x: Vec<f64> = (0..135).map(|_| rng.random_range(0.0..100.0)).collect();
            ks_normality(&x).unwrap().reject_at_05
        }).count() as f64 / trials as f64;
        assert!(power > 0.6, "power {power}");
    }

    #[test]
    fn ks_uniform_sample_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..135).map(|_| rng.random_range(0.0..100.0)).collect();
        assert!(ks_normality(&x).unwrap().reject_at_05);
    }

    #[test]
    fn ks_errors() {
        assert_eq!(ks_normality(&[3.0; 10]), Err(StatsError::ZeroVariance));
        assert!(matches!(ks_normality(&[1.0, 2.0]), Err(StatsError::TooFewSamples { .. })));
    }

    #[test]
    fn schema_errors_name_row_and_column() {
        let text = "participant,round,presented,selected,flat_bumpy,cold_hot,soft_stiff\np1,1,fabric,fabric,10,20,30\np1,2,fabric,fabric,10,120,30\n";
        let err = parse_trials(text.as_bytes(), &labels()).unwrap_err();
        assert_eq!(err.to_string(), "row 3, column cold_hot: rating 120 outside [0, 100]");
        let bad = "participant,round,presented,selected,flat_bumpy,cold_hot,soft_stiff\np1,1,velvet,fabric,1,2,3\n";
        assert!(matches!(parse_trials(bad.as_bytes(), &labels()), Err(StatsError::Schema { row: 2, column: "presented", .. })));
        assert!(matches!(parse_trials("a,b\n".as_bytes(), &labels()), Err(StatsError::Header { .. })));
    }

    #[test]
    fn csv_round_trip_and_exclusion() {
        let trials: Vec<TrialRecord> = (1..=3)
            .flat_map(|round| labels().into_iter().map(move |l| TrialRecord { participant: "p1".into(), round, presented: l.clone(), selected: l, ratings: [1.0, 2.5, 99.0] }))
            .collect();
        let parsed = parse_trials(trials_csv(&trials).as_bytes(), &labels()).unwrap();
        assert_eq!(parsed, trials);
        let m = build_confusion(&parsed, &labels(), Some(1)).unwrap();
        assert_eq!(m.total(), 12);
        let only_first: Vec<TrialRecord> = trials.into_iter().filter(|t| t.round == 1).collect();
        assert_eq!(build_confusion(&only_first, &labels(), Some(1)), Err(StatsError::EmptyAfterExclusion(1)));
    }

    fn counts_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        proptest::collection::vec(proptest::collection::vec(0u64..30, 6), 6)
            .prop_map(|mut c| {
                for (i, row) in c.iter_mut().enumerate() {
                    row[i] += 1;
                }
                c
            })
    }

    proptest! {
        #[test]
        fn chi_squared_relabeling_invariant(counts in counts_strategy(), perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let a = chi_squared_vs_chance(&ConfusionMatrix::from_counts(labels(), counts.clone())).unwrap();
            let permuted: Vec<Vec<u64>> = (0..6).map(|i| (0..6).map(|j| counts[perm[i]][perm[j]]).collect()).collect();
            let b = chi_squared_vs_chance(&ConfusionMatrix::from_counts(labels(), permuted)).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic.max(1.0));
        }

        #[test]
        fn proportions_rows_sum_to_one(counts in counts_strategy()) {
            for row in ConfusionMatrix::from_counts(labels(), counts).proportions() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn kruskal_wallis_monotone_invariant(groups in proptest::collection::vec(proptest::collection::vec(0u8..=100, 1..15), 2..5)) {
            let g: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| f64::from(*v)).collect()).collect();
            let t: Vec<Vec<f64>> = g.iter().map(|g| g.iter().map(|v| (v / 10.0).exp() + 3.0 * v).collect()).collect();
            let a = kruskal_wallis(&g).unwrap().h;
            let b = kruskal_wallis(&t).unwrap().h;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
