//! Measurement protocol: input categories, survival curves, ROC curves,
//! rejection tables and per-category radius statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{fgsm, min_pgd, min_pgd_random_start, AttackResult, PgdConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::radius::{batch_radii, RadiusResult, SearchParams, Verifier};
use crate::validators::{dagostino_pearson_pvalue, threshold_validate, ThresholdPolicy, Verdict};

/// Minimum valid-to-invalid mean radius ratio reported as a clear separation.
pub const SEPARATION_BAR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "valid")]
    Valid,
    #[serde(rename = "misclassified")]
    Misclassified,
    #[serde(rename = "fgsm_0.1")]
    Fgsm01,
    #[serde(rename = "fgsm_0.05")]
    Fgsm005,
    #[serde(rename = "strong_min")]
    StrongMin,
    #[serde(rename = "random_strong")]
    RandomStrong,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Valid,
        Category::Misclassified,
        Category::Fgsm01,
        Category::Fgsm005,
        Category::StrongMin,
        Category::RandomStrong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Valid => "valid",
            Category::Misclassified => "misclassified",
            Category::Fgsm01 => "fgsm_0.1",
            Category::Fgsm005 => "fgsm_0.05",
            Category::StrongMin => "strong_min",
            Category::RandomStrong => "random_strong",
        }
    }

    pub fn is_valid(self) -> bool {
        self == Category::Valid
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// First `n` qualifying samples in dataset order.
    First,
    /// First `n` qualifying samples after a seeded shuffle.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorizeConfig {
    pub per_category: usize,
    /// Budgets for the two single-step categories, `[large, small]`.
    pub fgsm_eps: [f64; 2],
    pub pgd: PgdConfig,
    pub selection: Selection,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for CategorizeConfig {
    fn default() -> Self {
        Self {
            per_category: 100,
            fgsm_eps: crate::attacks::FGSM_EPSILONS,
            pgd: PgdConfig::default(),
            selection: Selection::First,
            seed: 0,
            jobs: 0,
        }
    }
}

/// One evaluated input and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInput {
    /// Index of the source sample in the dataset.
    pub source: usize,
    pub category: Category,
    pub input: Vec<f64>,
    pub label: usize,
    pub predicted: usize,
    pub perturbation_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Categorized {
    pub inputs: Vec<LabeledInput>,
    /// Categories that could not be filled, with the number found.
    pub shortfall: Vec<(Category, usize)>,
}

impl Categorized {
    pub fn of(&self, c: Category) -> impl Iterator<Item = &LabeledInput> {
        self.inputs.iter().filter(move |i| i.category == c)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs `attack` over `candidates` in order and keeps the first `n`
/// successes. Work is done in parallel chunks; the result is independent of
/// the thread count.
fn first_successes<F>(candidates: &[usize], n: usize, pool: &rayon::ThreadPool, attack: F) -> Result<Vec<(usize, AttackResult)>>
where
    F: Fn(usize) -> Result<AttackResult> + Sync,
{
    let mut found = Vec::new();
    for chunk in candidates.chunks(64) {
        if found.len() >= n {
            break;
        }
        let results: Vec<Result<AttackResult>> = pool.install(|| chunk.par_iter().map(|&i| attack(i)).collect());
        for (&i, r) in chunk.iter().zip(results) {
            let r = r?;
            if r.success && found.len() < n {
                found.push((i, r));
            }
        }
    }
    Ok(found)
}

/// Splits the dataset into the six input categories.
pub fn categorize(net: &Network, data: &Dataset, config: &CategorizeConfig) -> Result<Categorized> {
    data.check_labels(net.label_count())?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    if config.selection == Selection::Random {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    }
    let pool = thread_pool(config.jobs)?;
    let samples = data.samples();
    let predicted: Vec<usize> =
        pool.install(|| order.par_iter().map(|&i| net.predict(samples[i].input.data())).collect::<Result<_>>())?;
    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    for (&i, &p) in order.iter().zip(&predicted) {
        if p == samples[i].label {
            correct.push(i);
        } else {
            wrong.push((i, p));
        }
    }
    let n = config.per_category;
    let mut out = Categorized::default();
    let plain = |i: usize, category: Category, predicted: usize| LabeledInput {
        source: i,
        category,
        input: samples[i].input.data().to_vec(),
        label: samples[i].label,
        predicted,
        perturbation_linf: 0.0,
    };
    out.inputs.extend(correct.iter().take(n).map(|&i| plain(i, Category::Valid, samples[i].label)));
    out.inputs.extend(wrong.iter().take(n).map(|&(i, p)| plain(i, Category::Misclassified, p)));

    let s = |i: usize| &samples[i];
    type Attack<'a> = Box<dyn Fn(usize) -> Result<AttackResult> + Sync + 'a>;
    let attacks: [(Category, Attack); 4] = [
        (Category::Fgsm01, Box::new(|i| fgsm(net, &s(i).input, s(i).label, config.fgsm_eps[0]))),
        (Category::Fgsm005, Box::new(|i| fgsm(net, &s(i).input, s(i).label, config.fgsm_eps[1]))),
        (Category::StrongMin, Box::new(|i| min_pgd(net, &s(i).input, s(i).label, &config.pgd))),
        (
            Category::RandomStrong,
            Box::new(|i| min_pgd_random_start(net, &s(i).input, s(i).label, &config.pgd, config.seed ^ i as u64)),
        ),
    ];
    for (category, attack) in attacks {
        for (i, r) in first_successes(&correct, n, &pool, attack)? {
            out.inputs.push(LabeledInput {
                source: i,
                category,
                label: samples[i].label,
                predicted: r.adversarial_label,
                perturbation_linf: r.perturbation_linf,
                input: r.adversarial.into_data(),
            });
        }
    }
    for c in Category::ALL {
        let found = out.of(c).count();
        if found < n {
            out.shortfall.push((c, found));
        }
    }
    Ok(out)
}

/// `(t, |{r : r > t}|)` for every `t` in the grid.
pub fn survival_curve(radii: &[f64], grid: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    grid.iter().map(|&t| (t, sorted.len() - sorted.partition_point(|&r| r <= t))).collect()
}

/// Evenly spaced grid `0, step, 2·step, …` up to and including `max`.
pub fn uniform_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Inputs with radius below this are rejected.
    pub threshold: f64,
    pub false_alarm: f64,
    pub true_alarm: f64,
}

fn fraction_below(sorted: &[f64], t: f64) -> f64 {
    if sorted.is_empty() {
        0.0
    } else {
        sorted.partition_point(|&r| r < t) as f64 / sorted.len() as f64
    }
}

/// Sweeps the rejection threshold over every distinct radius plus sentinels
/// below and above all radii. Starts at `(0,0)` and ends at `(1,1)`.
pub fn roc_curve(valid: &[f64], invalid: &[f64]) -> Vec<RocPoint> {
    let mut v = valid.to_vec();
    let mut a = invalid.to_vec();
    v.sort_by(f64::total_cmp);
    a.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = v.iter().chain(&a).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let max = thresholds.last().copied().unwrap_or(0.0);
    thresholds.push(max.abs() * 2.0 + 1.0);
    let mut points = vec![RocPoint { threshold: 0.0, false_alarm: 0.0, true_alarm: 0.0 }];
    points.extend(thresholds.into_iter().map(|t| RocPoint {
        threshold: t,
        false_alarm: fraction_below(&v, t),
        true_alarm: fraction_below(&a, t),
    }));
    points.dedup_by(|b, a| a.false_alarm == b.false_alarm && a.true_alarm == b.true_alarm);
    // An empty side never reaches rate 1 on its own.
    let last = points.last().copied().filter(|p| p.threshold > 0.0);
    match last {
        Some(p) => *points.last_mut().unwrap() = RocPoint { false_alarm: 1.0, true_alarm: 1.0, ..p },
        None => points.push(RocPoint { threshold: max.abs() * 2.0 + 1.0, false_alarm: 1.0, true_alarm: 1.0 }),
    }
    points
}

/// Trapezoid area under a ROC curve.
pub fn roc_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].false_alarm - w[0].false_alarm) * (w[1].true_alarm + w[0].true_alarm) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionTable {
    pub thresholds: Vec<f64>,
    pub categories: Vec<Category>,
    /// `cells[t][c]`: percentage of category `c` with radius below threshold `t`;
    /// `None` for empty categories.
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Thresholds `0.002, 0.004, …, 0.016`.
pub fn default_rejection_thresholds() -> Vec<f64> {
    (1..=8).map(|i| i as f64 * 0.002).collect()
}

pub fn rejection_table(category_radii: &BTreeMap<Category, Vec<f64>>, thresholds: &[f64]) -> RejectionTable {
    let categories: Vec<Category> = category_radii.keys().copied().collect();
    let cells = thresholds
        .iter()
        .map(|&t| {
            category_radii
                .values()
                .map(|r| {
                    (!r.is_empty()).then(|| 100.0 * r.iter().filter(|&&v| v < t).count() as f64 / r.len() as f64)
                })
                .collect()
        })
        .collect();
    RejectionTable { thresholds: thresholds.to_vec(), categories, cells }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanReport {
    pub means: BTreeMap<Category, f64>,
    /// Normality p-value of the valid radii (`None` if the test cannot run).
    pub valid_p_value: Option<f64>,
    pub valid_p_value_error: Option<String>,
    /// `mean(valid) / mean(all non-valid radii)`.
    pub separation_ratio: Option<f64>,
    /// Whether the ratio clears [`SEPARATION_BAR`], the working threshold
    /// for "valid radii are much larger".
    pub separation_validated: bool,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn mean_report(category_radii: &BTreeMap<Category, Vec<f64>>) -> MeanReport {
    let means: BTreeMap<Category, f64> =
        category_radii.iter().filter_map(|(c, r)| mean(r).map(|m| (*c, m))).collect();
    let valid = category_radii.get(&Category::Valid).map(Vec::as_slice).unwrap_or(&[]);
    let invalid: Vec<f64> =
        category_radii.iter().filter(|(c, _)| !c.is_valid()).flat_map(|(_, r)| r.iter().copied()).collect();
    let (valid_p_value, valid_p_value_error) = match dagostino_pearson_pvalue(valid) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let separation_ratio = match (mean(valid), mean(&invalid)) {
        (Some(v), Some(i)) if i > 0.0 => Some(v / i),
        (Some(v), Some(_)) if v > 0.0 => Some(f64::MAX),
        (Some(_), Some(_)) => Some(1.0),
        _ => None,
    };
    MeanReport {
        means,
        valid_p_value,
        valid_p_value_error,
        separation_ratio,
        separation_validated: separation_ratio.is_some_and(|r| r >= SEPARATION_BAR),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub categorize: CategorizeConfig,
    pub search: SearchParams,
    pub threshold: ThresholdPolicy,
    pub survival_grid: Vec<f64>,
    pub rejection_thresholds: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let search = SearchParams::default();
        Self {
            categorize: CategorizeConfig::default(),
            survival_grid: uniform_grid(search.up, 0.002),
            search,
            threshold: ThresholdPolicy::default(),
            rejection_thresholds: default_rejection_thresholds(),
        }
    }
}

/// One line of `results.jsonl`. Wall times live in `timing.csv` so that
/// this file is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: usize,
    pub source: usize,
    pub category: Category,
    pub label: usize,
    pub predicted: usize,
    pub perturbation_linf: f64,
    pub radius: f64,
    pub probes: usize,
    pub saturated: bool,
    pub threshold_decision: Verdict,
}

/// Everything one evaluation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRun {
    pub report: EvaluationReport,
    pub records: Vec<ResultRecord>,
    /// Search wall time per record, in milliseconds.
    pub wall_times_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocSeries {
    pub invalid: Category,
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingStats {
    pub probes: usize,
    pub mean_probe_ms: f64,
    pub max_search_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub counts: BTreeMap<Category, usize>,
    pub shortfall: Vec<(Category, usize)>,
    pub radii: BTreeMap<Category, Vec<f64>>,
    pub survival: BTreeMap<Category, Vec<(f64, usize)>>,
    pub roc: Vec<RocSeries>,
    pub rejection: RejectionTable,
    pub means: MeanReport,
    pub threshold: f64,
    #[serde(skip)]
    pub timing: TimingStats,
}

impl EvaluationReport {
    pub fn radii_of(&self, c: Category) -> &[f64] {
        self.radii.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn roc_for(&self, c: Category) -> Option<&RocSeries> {
        self.roc.iter().find(|r| r.invalid == c)
    }
}

/// Assembles every report from per-category radii.
pub fn build_report(
    radii: BTreeMap<Category, Vec<f64>>,
    shortfall: Vec<(Category, usize)>,
    config: &EvaluationConfig,
    timing: TimingStats,
) -> EvaluationReport {
    let valid = radii.get(&Category::Valid).cloned().unwrap_or_default();
    let roc = radii
        .iter()
        .filter(|(c, _)| !c.is_valid())
        .map(|(c, r)| {
            let points = roc_curve(&valid, r);
            RocSeries { invalid: *c, auc: roc_auc(&points), points }
        })
        .collect();
    EvaluationReport {
        counts: radii.iter().map(|(c, r)| (*c, r.len())).collect(),
        shortfall,
        survival: radii.iter().map(|(c, r)| (*c, survival_curve(r, &config.survival_grid))).collect(),
        roc,
        rejection: rejection_table(&radii, &config.rejection_thresholds),
        means: mean_report(&radii),
        threshold: config.threshold.theta,
        timing,
        radii,
    }
}

/// Categorises the dataset, computes every radius and builds the report.
pub fn run_evaluation(net: &Network, data: &Dataset, config: &EvaluationConfig) -> Result<EvaluationRun> {
    let cats = categorize(net, data, &config.categorize)?;
    let verifier = Verifier::new(net, config.search.domain);
    let inputs: Vec<&[f64]> = cats.inputs.iter().map(|i| i.input.as_slice()).collect();
    let results: Vec<RadiusResult> =
        batch_radii(&verifier, &inputs, &config.search, config.categorize.jobs)?.into_iter().collect::<Result<_>>()?;
    let mut radii: BTreeMap<Category, Vec<f64>> = Category::ALL.iter().map(|c| (*c, Vec::new())).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut wall_times_ms = Vec::with_capacity(results.len());
    let mut total = Duration::ZERO;
    let mut max_search = Duration::ZERO;
    let mut probes = 0;
    for (id, (input, r)) in cats.inputs.iter().zip(&results).enumerate() {
        radii.get_mut(&input.category).unwrap().push(r.radius);
        total += r.wall_time;
        max_search = max_search.max(r.wall_time);
        probes += r.iterations;
        records.push(ResultRecord {
            id,
            source: input.source,
            category: input.category,
            label: input.label,
            predicted: input.predicted,
            perturbation_linf: input.perturbation_linf,
            radius: r.radius,
            probes: r.iterations,
            saturated: r.saturated,
            threshold_decision: threshold_validate(r.radius, &config.threshold).verdict,
        });
        wall_times_ms.push(r.wall_time.as_secs_f64() * 1e3);
    }
    let timing = TimingStats {
        probes,
        mean_probe_ms: if probes == 0 { 0.0 } else { total.as_secs_f64() * 1e3 / probes as f64 },
        max_search_ms: max_search.as_secs_f64() * 1e3,
    };
    Ok(EvaluationRun { report: build_report(radii, cats.shortfall, config, timing), records, wall_times_ms })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

/// Plain-text summary tables.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    s += "category         count  mean_radius\n";
    for c in Category::ALL {
        let n = report.counts.get(&c).copied().unwrap_or(0);
        s += &format!("{:<16} {:>5}  {}\n", c.name(), n, opt(report.means.means.get(&c).copied()));
    }
    s += &format!("\nvalid radii normality p-value: {}\n", opt(report.means.valid_p_value));
    s += &format!(
        "separation ratio mean(valid)/mean(non-valid): {} (bar {SEPARATION_BAR}: {})\n",
        opt(report.means.separation_ratio),
        if report.means.separation_validated { "met" } else { "not met" }
    );
    if !report.shortfall.is_empty() {
        s += "\nshortfall:";
        for (c, n) in &report.shortfall {
            s += &format!(" {c}={n}");
        }
        s += "\n";
    }
    s += "\nrejection rate (%) by threshold\nthreshold";
    for c in &report.rejection.categories {
        s += &format!(" {:>13}", c.name());
    }
    s += "\n";
    for (t, row) in report.rejection.thresholds.iter().zip(&report.rejection.cells) {
        s += &format!("{t:<9.3}");
        for cell in row {
            s += &format!(" {:>13}", cell.map_or_else(|| "-".into(), |v| format!("{v:.1}")));
        }
        s += "\n";
    }
    s += "\nROC AUC (valid vs category)\n";
    for r in &report.roc {
        s += &format!("{:<16} {:.4}\n", r.invalid.name(), r.auc);
    }
    s
}

/// Writes `results.jsonl`, `survival.csv`, `roc.csv`, `rejection.csv`,
/// `means.csv`, `report.json`, `report.txt` and `timing.csv` into `dir`.
/// Every file except `timing.csv` is deterministic.
pub fn write_report(dir: &Path, run: &EvaluationRun) -> Result<()> {
    let EvaluationRun { report, records, wall_times_ms } = run;
    fs::create_dir_all(dir)?;
    let json = |e: serde_json::Error| Error::Data(e.to_string());

    let mut f = fs::File::create(dir.join("results.jsonl"))?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).map_err(json)?)?;
    }

    let mut f = fs::File::create(dir.join("survival.csv"))?;
    writeln!(f, "category,threshold,count")?;
    for (c, curve) in &report.survival {
        for (t, n) in curve {
            writeln!(f, "{c},{t},{n}")?;
        }
    }

    let mut f = fs::File::create(dir.join("roc.csv"))?;
    writeln!(f, "invalid_category,threshold,false_alarm_rate,true_alarm_rate")?;
    for series in &report.roc {
        for p in &series.points {
            writeln!(f, "{},{},{},{}", series.invalid, p.threshold, p.false_alarm, p.true_alarm)?;
        }
    }

    let mut f = fs::File::create(dir.join("rejection.csv"))?;
    let header: Vec<&str> = report.rejection.categories.iter().map(|c| c.name()).collect();
    writeln!(f, "threshold,{}", header.join(","))?;
    for (t, row) in report.rejection.thresholds.iter().zip(&report.rejection.cells) {
        let cells: Vec<String> = row.iter().map(|c| c.map_or_else(String::new, |v| v.to_string())).collect();
        writeln!(f, "{t},{}", cells.join(","))?;
    }

    let mut f = fs::File::create(dir.join("means.csv"))?;
    writeln!(f, "category,count,mean_radius")?;
    for c in Category::ALL {
        let n = report.counts.get(&c).copied().unwrap_or(0);
        let m = report.means.means.get(&c).map_or_else(String::new, |v| v.to_string());
        writeln!(f, "{c},{n},{m}")?;
    }

    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report).map_err(json)?)?;
    fs::write(dir.join("report.txt"), render_text(report))?;

    let mut f = fs::File::create(dir.join("timing.csv"))?;
    writeln!(f, "id,probes,wall_time_ms")?;
    for (r, t) in records.iter().zip(wall_times_ms) {
        writeln!(f, "{},{},{t}", r.id, r.probes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_direct_count() {
        assert_eq!(survival_curve(&[0.1, 0.2], &[0.0, 0.15, 0.3]), vec![(0.0, 2), (0.15, 1), (0.3, 0)]);
        assert_eq!(survival_curve(&[], &[0.0, 0.1]), vec![(0.0, 0), (0.1, 0)]);
        // strict inequality at the threshold
        assert_eq!(survival_curve(&[0.1], &[0.1]), vec![(0.1, 0)]);
    }

    #[test]
    fn roc_separable() {
        let pts = roc_curve(&[0.5, 0.6, 0.7], &[0.01, 0.02]);
        assert_eq!(pts.first().map(|p| (p.false_alarm, p.true_alarm)), Some((0.0, 0.0)));
        assert_eq!(pts.last().map(|p| (p.false_alarm, p.true_alarm)), Some((1.0, 1.0)));
        assert!(pts.iter().any(|p| p.false_alarm == 0.0 && p.true_alarm == 1.0));
        assert_eq!(roc_auc(&pts), 1.0);
    }

    #[test]
    fn roc_identical_is_diagonal() {
        let r = [0.1, 0.2, 0.3, 0.4];
        let pts = roc_curve(&r, &r);
        assert!(pts.iter().all(|p| p.false_alarm == p.true_alarm));
        assert!((roc_auc(&pts) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_handles_empty_sides() {
        let pts = roc_curve(&[], &[0.1]);
        assert_eq!(pts.last().map(|p| (p.false_alarm, p.true_alarm)), Some((1.0, 1.0)));
        assert_eq!(roc_curve(&[], &[]).len(), 2);
    }

    #[test]
    fn rejection_table_zero_threshold() {
        let mut m = BTreeMap::new();
        m.insert(Category::Valid, vec![0.0, 0.01]);
        m.insert(Category::Fgsm01, vec![0.001]);
        m.insert(Category::StrongMin, vec![]);
        let t = rejection_table(&m, &[0.0, 0.005]);
        assert_eq!(t.cells[0], vec![Some(0.0), Some(0.0), None]);
        assert_eq!(t.cells[1], vec![Some(50.0), Some(100.0), None]);
    }

    #[test]
    fn default_thresholds_mirror_table_rows() {
        let t = default_rejection_thresholds();
        assert_eq!(t.len(), 8);
        assert!((t[0] - 0.002).abs() < 1e-15 && (t[7] - 0.016).abs() < 1e-15);
    }

    #[test]
    fn identical_categories_have_ratio_one() {
        let r = vec![0.01, 0.02, 0.03];
        let m: BTreeMap<Category, Vec<f64>> = Category::ALL.iter().map(|c| (*c, r.clone())).collect();
        let rep = mean_report(&m);
        assert!((rep.separation_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!(!rep.separation_validated);
        assert!(rep.valid_p_value.is_none());
    }

    #[test]
    fn fourfold_gap_is_validated() {
        let mut m = BTreeMap::new();
        m.insert(Category::Valid, vec![0.0227]);
        m.insert(Category::Misclassified, vec![0.0056]);
        let rep = mean_report(&m);
        assert!((rep.separation_ratio.unwrap() - 0.0227 / 0.0056).abs() < 1e-12);
        assert!(rep.separation_validated);
    }

    #[test]
    fn category_names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(0.256, 0.002);
        assert_eq!(g.len(), 129);
        assert!((g[128] - 0.256).abs() < 1e-12);
    }
}
