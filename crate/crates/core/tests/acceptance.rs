//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use radguard::evaluation::{run_evaluation, Category, EvaluationConfig, EvaluationRun};
use radguard::validators::{bootstrap_window, dagostino_pearson_pvalue};
use radguard::{
    approximate_radius, is_robust, search_radius, Activation, Architecture, Domain, SearchParams, WindowConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let (checked, violations) = soundness_violations(100, 10, 10_000, 1);
    let t = start.elapsed();
    check(
        violations == 0 && checked > 0 && t <= Duration::from_secs(300),
        format!("{checked} robust verdicts falsified with 10000 trials, {violations} violations, {t:.1?}"),
    )
}

fn containment() -> Outcome {
    let escapes: Vec<(Transformer, usize)> =
        Transformer::ALL.iter().enumerate().map(|(i, &t)| (t, containment_escapes(t, 1000, 10, 7 + i as u64))).collect();
    check(escapes.iter().all(|e| e.1 == 0), format!("1000 checks per transformer, escapes {escapes:?}"))
}

fn bisection() -> Outcome {
    let stub = |_: &[f64], d: f64| Ok(d <= 0.1);
    let r = search_radius(&stub, &[0.5], 0.256, 0.001).unwrap();
    check(
        (0.099..=0.1).contains(&r.radius) && r.probes.len() == 8,
        format!("radius {} after {} probes", r.radius, r.probes.len()),
    )
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (i, act) in Activation::ALL.into_iter().enumerate() {
        for seed in 0..4u64 {
            for net in [random_mlp(100 * i as u64 + seed, act), random_cnn(100 * i as u64 + seed, act)] {
                let x = random_input(&mut rng, net.input_len());
                for target in 0..net.label_count() {
                    let (w, c, _) = gradient_check(&net, &x, target, 1e-4);
                    worst = worst.max(w);
                    compared += c;
                }
            }
        }
    }
    check(worst <= 1e-4 && compared > 0, format!("worst relative error {worst:.2e} over {compared} coordinates"))
}

fn normality() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Case {
        samples: Vec<f64>,
        p_value: f64,
    }
    #[derive(serde::Deserialize)]
    struct Reference {
        cases: Vec<Case>,
    }
    let reference: Reference = serde_json::from_str(include_str!("data/normality_reference.json")).unwrap();
    let worst = reference
        .cases
        .iter()
        .map(|c| (dagostino_pearson_pvalue(&c.samples).unwrap() - c.p_value).abs())
        .fold(0.0, f64::max);
    check(
        reference.cases.len() == 10 && worst <= 1e-6,
        format!("{} reference samples, worst p-value deviation {worst:.2e}", reference.cases.len()),
    )
}

fn separation(f: &Fixture, run: &EvaluationRun, elapsed: Duration) -> Outcome {
    let acc = f.report.test_accuracy.unwrap_or(0.0);
    let ratio = run.report.means.separation_ratio.unwrap_or(0.0);
    check(
        acc >= 0.9 && ratio >= 2.0 && elapsed <= Duration::from_secs(600),
        format!("test accuracy {acc:.4}, valid/non-valid mean ratio {ratio:.2}, {elapsed:.1?} with training"),
    )
}

fn attack_ordering(run: &EvaluationRun) -> Outcome {
    let m = &run.report.means.means;
    let (s, f05, f1) = (m[&Category::StrongMin], m[&Category::Fgsm005], m[&Category::Fgsm01]);
    check(s <= f05 && f05 <= f1, format!("means strong_min {s:.5} <= fgsm_0.05 {f05:.5} <= fgsm_0.1 {f1:.5}"))
}

fn window_replay(f: &Fixture, run: &EvaluationRun) -> Outcome {
    let params = SearchParams::default();
    let calibration: Vec<f64> = f
        .calibration
        .samples()
        .iter()
        .filter(|s| f.net.predict(s.input.data()).unwrap() == s.label)
        .map(|s| approximate_radius(&f.net, s.input.data(), &params).unwrap().radius)
        .collect();
    let sigma0 = quantile(&calibration, 0.1);
    let config = WindowConfig { sigma0, ..WindowConfig::default() };
    let mut window = bootstrap_window(&calibration, config).unwrap();
    let valid = run.report.radii_of(Category::Valid);
    let adversarial: Vec<f64> = run.report.radii_of(Category::Fgsm01).iter().copied().take(50).collect();
    let false_alarms = valid.iter().filter(|&&r| !window.step_mut(r).is_accept()).count();
    let rejected = adversarial.iter().filter(|&&r| !window.step_mut(r).is_accept()).count();
    let threshold_alarms = valid.iter().filter(|&&r| r < sigma0).count();
    check(
        valid.len() == 100
            && adversarial.len() == 50
            && rejected * 100 >= 80 * adversarial.len()
            && false_alarms * 100 <= 10 * valid.len(),
        format!(
            "sigma0 = theta = {sigma0:.4}: {rejected}/{} adversarial rejected, {false_alarms}/{} valid rejected \
             (threshold alone: {threshold_alarms} valid rejected)",
            adversarial.len(),
            valid.len()
        ),
    )
}

fn roc(run: &EvaluationRun) -> Outcome {
    let shaped = run.report.roc.iter().all(|s| {
        let p = &s.points;
        let first = p.first().map(|p| (p.false_alarm, p.true_alarm));
        let last = p.last().map(|p| (p.false_alarm, p.true_alarm));
        first == Some((0.0, 0.0))
            && last == Some((1.0, 1.0))
            && p.windows(2).all(|w| w[0].false_alarm <= w[1].false_alarm && w[0].true_alarm <= w[1].true_alarm)
    });
    let auc = run.report.roc_for(Category::StrongMin).map_or(0.0, |s| s.auc);
    check(
        shaped && auc >= 0.95,
        format!("{} curves monotone and anchored: {shaped}, valid vs strong_min AUC {auc:.4}", run.report.roc.len()),
    )
}

fn cnn_performance() -> Outcome {
    let arch: Architecture = "6c3p1,mp2,16c3p1,mp2,128,10".parse().unwrap();
    let net = arch.build(&[1, 28, 28], Activation::Relu, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_input(&mut rng, net.input_len());
    is_robust(&net, &x, 0.001, Domain::Zonotope).unwrap();
    let start = Instant::now();
    let v = is_robust(&net, &x, 0.01, Domain::Zonotope).unwrap();
    let t = start.elapsed();
    check(t <= Duration::from_secs(1), format!("zonotope is_robust at 0.01 on a 28x28 CNN: {:?} in {t:.3?}", v.outcome))
}

fn main() {
    let mut outcomes: Vec<(&str, Outcome)> = vec![
        ("verifier soundness", soundness()),
        ("transformer containment", containment()),
        ("binary search contract", bisection()),
        ("gradient correctness", gradients()),
        ("normality reference", normality()),
    ];

    let start = Instant::now();
    let f = fixture();
    let run = run_evaluation(&f.net, &f.test, &EvaluationConfig::default()).unwrap();
    let elapsed = start.elapsed();
    outcomes.push(("radius separation", separation(&f, &run, elapsed)));
    outcomes.push(("attack ordering", attack_ordering(&run)));
    outcomes.push(("sliding window replay", window_replay(&f, &run)));
    outcomes.push(("roc sanity", roc(&run)));
    outcomes.push(("cnn performance", cnn_performance()));

    for (i, (name, o)) in outcomes.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.1.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
