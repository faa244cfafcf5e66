//! Paired significance testing and mean ± std comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) that gets an exact p.
pub const EXACT_MAX_N: usize = 12;
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Nonzero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W⁺, W⁻)`.
    pub w: f64,
    /// Two-sided.
    pub p: f64,
    pub method: PMethod,
}

impl Wilcoxon {
    pub fn is_degenerate(&self) -> bool {
        self.method == PMethod::Degenerate
    }
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test of `a − b`. Zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::Stats(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Stats("differences must be finite".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(Wilcoxon { n, w_plus: 0.0, w_minus: 0.0, w: 0.0, p: 1.0, method: PMethod::Degenerate });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), PMethod::Exact)
    } else {
        (normal_p(&ranks, w_plus), PMethod::Normal)
    };
    Ok(Wilcoxon { n, w_plus, w_minus, w: w_plus.min(w_minus), p, method })
}

/// Counts sign assignments by their doubled `W⁺` (ranks are multiples of ½).
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let obs = (w_plus * 2.0).round() as usize;
    let lower: u64 = counts[..=obs].iter().sum();
    let upper: u64 = counts[obs..].iter().sum();
    let total = (1u64 << ranks.len()) as f64;
    (2.0 * lower.min(upper) as f64 / total).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut ties = BTreeMap::new();
    for r in ranks {
        *ties.entry(r.to_bits()).or_insert(0usize) += 1;
    }
    let tie_term: f64 = ties.values().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Outcome of comparing an algorithm against the reference, from the
/// reference's point of view (lower values are better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Reference significantly better.
    #[serde(rename = "+")]
    Better,
    #[serde(rename = "≈")]
    Similar,
    /// Reference significantly worse.
    #[serde(rename = "-")]
    Worse,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Better => "+",
            Verdict::Similar => "≈",
            Verdict::Worse => "-",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Verdict for `other` against `reference`, paired by position.
pub fn verdict(reference: &[f64], other: &[f64]) -> Result<(Verdict, Wilcoxon)> {
    let w = wilcoxon_signed_rank(other, reference)?;
    if w.is_degenerate() || w.p >= ALPHA {
        return Ok((Verdict::Similar, w));
    }
    let mut d: Vec<f64> = other.iter().zip(reference).map(|(o, r)| o - r).collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / 2.0 };
    let v = if median > 0.0 {
        Verdict::Better
    } else if median < 0.0 {
        Verdict::Worse
    } else {
        Verdict::Similar
    };
    Ok((v, w))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample (n − 1) standard deviation.
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// One result value of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub problem: String,
    pub algorithm: String,
    /// Pairing key across algorithms.
    pub repeat: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// `None` for the reference itself or when no pairs exist.
    pub verdict: Option<Verdict>,
    pub p: Option<f64>,
    /// Lowest mean in its row.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    /// One entry per algorithm; `None` where the cell is missing.
    pub cells: Vec<Option<ComparisonCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub problem: String,
    pub algorithm: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub reference: String,
    pub algorithms: Vec<String>,
    pub rows: Vec<SummaryRow>,
    pub missing: Vec<MissingCell>,
}

/// Builds a comparison table. Rows follow `problems`, columns follow
/// `algorithms`; non-finite values are ignored. Cells with fewer than two
/// values are listed in [`Summary::missing`].
pub fn summarize(
    observations: &[Observation],
    problems: &[String],
    algorithms: &[String],
    reference: &str,
) -> Result<Summary> {
    if !algorithms.iter().any(|a| a == reference) {
        return Err(Error::Stats(format!("reference {reference:?} is not among the algorithms")));
    }
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    for o in observations.iter().filter(|o| o.value.is_finite()) {
        groups.entry((o.problem.clone(), o.algorithm.clone())).or_default().insert(o.repeat, o.value);
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let empty = BTreeMap::new();
    for problem in problems {
        let get = |alg: &str| groups.get(&(problem.clone(), alg.to_string())).unwrap_or(&empty);
        let reference_runs = get(reference);
        let mut cells = Vec::new();
        for alg in algorithms {
            let runs = get(alg);
            if runs.len() < 2 {
                missing.push(MissingCell {
                    problem: problem.clone(),
                    algorithm: alg.clone(),
                    reason: format!("{} usable runs, need at least 2", runs.len()),
                });
                cells.push(None);
                continue;
            }
            let values: Vec<f64> = runs.values().copied().collect();
            let (verdict, p) = if alg == reference {
                (None, None)
            } else {
                let keys: BTreeSet<_> = runs.keys().filter(|k| reference_runs.contains_key(k)).collect();
                if keys.is_empty() {
                    (None, None)
                } else {
                    let r: Vec<f64> = keys.iter().map(|k| reference_runs[k]).collect();
                    let o: Vec<f64> = keys.iter().map(|k| runs[k]).collect();
                    let (v, w) = verdict(&r, &o)?;
                    (Some(v), Some(w.p))
                }
            };
            cells.push(Some(ComparisonCell {
                n: values.len(),
                mean: mean(&values),
                std: sample_std(&values),
                verdict,
                p,
                best: false,
            }));
        }
        let best = cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c.mean)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        if let Some(i) = best {
            cells[i].as_mut().expect("best cell exists").best = true;
        }
        rows.push(SummaryRow { problem: problem.clone(), cells });
    }
    Ok(Summary { reference: reference.into(), algorithms: algorithms.to_vec(), rows, missing })
}

impl Summary {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["problem", "algorithm", "n", "mean", "std", "verdict", "p_value", "best"])?;
        for row in &self.rows {
            for (alg, cell) in self.algorithms.iter().zip(&row.cells) {
                let Some(c) = cell else { continue };
                w.write_record([
                    row.problem.clone(),
                    alg.clone(),
                    c.n.to_string(),
                    format!("{:.16e}", c.mean),
                    format!("{:.16e}", c.std),
                    c.verdict.map_or(String::new(), |v| v.symbol().into()),
                    c.p.map_or(String::new(), |p| format!("{p:.16e}")),
                    c.best.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Stats(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text table: `mean ± std verdict`, best marked `*`.
    pub fn to_text(&self) -> String {
        let mut table = vec![std::iter::once("problem".to_string())
            .chain(self.algorithms.iter().map(|a| {
                if *a == self.reference { format!("{a} (ref)") } else { a.clone() }
            }))
            .collect::<Vec<_>>()];
        for row in &self.rows {
            let mut line = vec![row.problem.clone()];
            for cell in &row.cells {
                line.push(match cell {
                    None => "n/a".into(),
                    Some(c) => {
                        let mut s = format!("{:.3e} ± {:.2e}", c.mean, c.std);
                        if let Some(v) = c.verdict {
                            write!(s, " {v}").unwrap();
                        }
                        if c.best {
                            s.push('*');
                        }
                        s
                    }
                });
            }
            table.push(line);
        }
        let cols = table[0].len();
        let widths: Vec<usize> =
            (0..cols).map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        if !self.missing.is_empty() {
            out.push_str("\nmissing cells:\n");
            for m in &self.missing {
                writeln!(out, "  {} / {}: {}", m.problem, m.algorithm, m.reason).unwrap();
            }
        }
        out.push_str(&format!(
            "\n+ / ≈ / -: {} significantly better / similar / worse (Wilcoxon signed-rank, alpha {ALPHA}); * lowest mean\n",
            self.reference
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    /// Two-sided p from all 2ⁿ sign assignments of the observed ranks.
    fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let obs: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
        let n = ranks.len();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= obs {
                le += 1;
            }
            if s >= obs {
                ge += 1;
            }
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn three_positive_differences() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!((w.w_plus, w.w_minus, w.w), (6.0, 0.0, 0.0));
        assert_eq!(w.p, 0.25);
        assert_eq!(w.method, PMethod::Exact);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let a = [0.3, 0.1, 0.2, 0.9, 0.5];
        let w = wilcoxon_signed_rank(&a, &a).unwrap();
        assert!(w.is_degenerate());
        assert_eq!(verdict(&a, &a).unwrap().0, Verdict::Similar);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let mut rng = crate::rng::seeded(4);
        for n in 1..=EXACT_MAX_N {
            for _ in 0..10 {
                // coarse values force ties and some zero differences
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let w = wilcoxon_signed_rank(&a, &b).unwrap();
                if !w.is_degenerate() {
                    assert_eq!(w.p, brute_force_p(&a, &b), "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn normal_approximation_is_close_at_twenty() {
        let mut rng = crate::rng::seeded(20);
        for _ in 0..3 {
            let a: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>() + 0.1).collect();
            let w = wilcoxon_signed_rank(&a, &b).unwrap();
            assert_eq!(w.method, PMethod::Normal);
            assert!((w.p - brute_force_p(&a, &b)).abs() < 0.02);
        }
    }

    #[test]
    fn summary_cells_and_verdicts() {
        let obs = |alg: &str, vals: &[f64]| -> Vec<Observation> {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| Observation { problem: "P".into(), algorithm: alg.into(), repeat: i, value: v })
                .collect()
        };
        let mut all = obs("ref", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        all.extend(obs("same", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        all.extend(obs("worse", &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]));
        all.extend(obs("flat", &[1.0, 1.0, 1.0]));
        all.extend(obs("lone", &[0.5]));
        let algs: Vec<String> = ["ref", "same", "worse", "flat", "lone"].map(String::from).to_vec();
        let s = summarize(&all, &["P".into(), "Q".into()], &algs, "ref").unwrap();
        let row = &s.rows[0].cells;
        assert_eq!(row[0].as_ref().unwrap().verdict, None);
        assert_eq!(row[1].as_ref().unwrap().verdict, Some(Verdict::Similar));
        let worse = row[2].as_ref().unwrap();
        assert_eq!(worse.verdict, Some(Verdict::Better));
        assert_eq!(worse.p, Some(2.0 / 64.0));
        let flat = row[3].as_ref().unwrap();
        assert_eq!((flat.mean, flat.std), (1.0, 0.0));
        assert!(flat.best);
        assert!(row[4].is_none());
        assert!(s.rows[1].cells.iter().all(Option::is_none));
        assert_eq!(s.missing.len(), 1 + algs.len());
        let text = s.to_text();
        assert!(text.contains("ref (ref)") && text.contains("n/a"));
        assert_eq!(s.to_csv().unwrap().lines().count(), 5);
        assert!(summarize(&all, &["P".into()], &algs, "nope").is_err());
    }

    proptest! {
        #[test]
        fn swapping_samples_flips_signs(a in prop::collection::vec(-5.0f64..5.0, 1..30), shift in -1.0f64..1.0) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.7 + shift + i as f64 * 0.01).collect();
            let ab = wilcoxon_signed_rank(&a, &b).unwrap();
            let ba = wilcoxon_signed_rank(&b, &a).unwrap();
            prop_assert_eq!(ab.w_plus, ba.w_minus);
            prop_assert_eq!(ab.p, ba.p);
        }

        #[test]
        fn scaling_differences_changes_nothing(a in prop::collection::vec(-5.0f64..5.0, 1..30), k in 0.01f64..100.0) {
            let zeros = vec![0.0; a.len()];
            let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
            let w1 = wilcoxon_signed_rank(&a, &zeros).unwrap();
            let w2 = wilcoxon_signed_rank(&scaled, &zeros).unwrap();
            prop_assert_eq!(w1.w_plus, w2.w_plus);
            prop_assert_eq!(w1.p, w2.p);
        }
    }
}
