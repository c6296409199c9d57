//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Run with `cargo test -p xaibench --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use xaibench::attrib::{
    counterfactual, integrated_gradients, pattern_from_covariance, shapley_exact, ValueFunction,
};
use xaibench::config::ExperimentConfig;
use xaibench::datagen::{oracle, sample};
use xaibench::evalmetrics::{global_attribution, run_benchmark, suppressor_mass, Verdict};
use xaibench::faithfulness::{ablation_drop, deletion_curve_in_order, Replacement};
use xaibench::models::{decision_score, fit_lda};
use xaibench::scalar::{cosine, normal_cdf};
use xaibench::{Background64, BenchmarkConfig64, GeneratorSpec64, LinearModel64, Matrix64, Method};

const BUNDLED_CONFIG: &str = include_str!("../../../configs/paper_example_a.json");

const N: usize = 100_000;
const WEIGHT_TOL: f64 = 1e-5;
const LDA_COSINE: f64 = 0.999;
const MASS_MIN: f64 = 0.1;
const GRADIENT_MASS: f64 = 0.503;
const GRADIENT_MASS_TOL: f64 = 0.005;
const PATTERN_MAX: f64 = 0.01;
const PATTERN_ANALYTIC_TOL: f64 = 1e-10;
const CORR_MAX: f64 = 0.01;
const CLOSED_FORM_TOL: f64 = 0.01;
const AXIOM_TOL: f64 = 1e-10;
const NULL_MASS_MAX: f64 = 0.02;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn reference() -> GeneratorSpec64 {
    GeneratorSpec64::reference_a(0.8)
}

fn bayes_weights() -> Outcome {
    let (s1_sq, s2_sq, c) = (0.8f64, 0.5f64, 0.8f64);
    let w = oracle(&reference()).map_err(|e| e.to_string())?.bayes_weights;

    // independent Σ⁻¹a with a = (1, 0), normalized
    let off = c * s1_sq.sqrt() * s2_sq.sqrt();
    let det = s1_sq * s2_sq - off * off;
    let raw = [s2_sq / det, -off / det];
    let norm = raw[0].hypot(raw[1]);
    let indep = [raw[0] / norm, raw[1] / norm];
    for k in 0..2 {
        ensure(
            (w[k] - indep[k]).abs() <= WEIGHT_TOL,
            format!("w[{k}] = {} vs Σ⁻¹a {}", w[k], indep[k]),
        )?;
    }

    let data = sample(&reference(), N, 0).map_err(|e| e.to_string())?;
    let lda = fit_lda(&data).map_err(|e| e.to_string())?;
    let cos = cosine(lda.weights(), &w);
    ensure(cos >= LDA_COSINE, format!("LDA cosine {cos:.6} < {LDA_COSINE}"))?;
    Ok(format!(
        "w = ({:.6}, {:.6}), Σ⁻¹a gap {:.1e}, LDA cosine {cos:.6}",
        w[0],
        w[1],
        (w[0] - indep[0]).abs().max((w[1] - indep[1]).abs())
    ))
}

fn suppressor_attribution() -> Outcome {
    let spec = reference();
    let data = sample(&spec, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&spec).map_err(|e| e.to_string())?.model();
    let cfg = BenchmarkConfig64::default();
    let mut parts = Vec::new();
    for method in Method::ALL {
        let attr =
            global_attribution(method, &model, &spec, &data, &cfg).map_err(|e| format!("{method}: {e}"))?;
        let mass = suppressor_mass(&attr, data.mask()).map_err(|e| e.to_string())?;
        match method {
            Method::Pattern => ensure(
                mass <= PATTERN_MAX,
                format!("pattern mass {mass:.4} > {PATTERN_MAX}"),
            )?,
            Method::Gradient => ensure(
                (mass - GRADIENT_MASS).abs() <= GRADIENT_MASS_TOL,
                format!("gradient mass {mass:.4} not within {GRADIENT_MASS_TOL} of {GRADIENT_MASS}"),
            )?,
            _ => ensure(mass >= MASS_MIN, format!("{method} mass {mass:.4} < {MASS_MIN}"))?,
        }
        parts.push(format!("{}={mass:.3}", method.name()));
    }
    let analytic = pattern_from_covariance(&model, &spec.feature_covariance()).map_err(|e| e.to_string())?;
    ensure(
        analytic.scores[1].abs() <= PATTERN_ANALYTIC_TOL,
        format!("analytic pattern suppressor score {:e}", analytic.scores[1]),
    )?;
    Ok(format!(
        "{}; analytic pattern x2 = {:.1e}",
        parts.join(" "),
        analytic.scores[1]
    ))
}

fn example_b_invariance() -> Outcome {
    let spec = GeneratorSpec64::example_b(1.0).map_err(|e| e.to_string())?;
    let data = sample(&spec, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&spec).map_err(|e| e.to_string())?.model();
    let acc = xaibench::models::accuracy(&model, &data).map_err(|e| e.to_string())?;
    ensure(acc == 1.0, format!("accuracy {acc}"))?;

    let f: Vec<f64> = data
        .features()
        .iter_rows()
        .map(|r| decision_score(&model, r).unwrap())
        .collect();
    let x2 = data.features().column(1);
    let corr = pearson(&f, &x2);
    ensure(
        corr.abs() <= CORR_MAX,
        format!("|corr(f, x2)| = {:.4}", corr.abs()),
    )?;

    let x = data.features().row(0).to_vec();
    let cf = counterfactual(&model, &x, 0.0).map_err(|e| e.to_string())?;
    let (d1, d2) = (cf.delta[0].abs(), cf.delta[1].abs());
    ensure(
        d2 > 0.0 && (d1 - d2).abs() <= 1e-12 * d1.max(1.0),
        format!("|δ| = ({d1}, {d2})"),
    )?;
    Ok(format!(
        "accuracy {acc}, corr(f, x2) = {corr:.5}, |δ1| = |δ2| = {d2:.4}"
    ))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn full_accuracy() -> f64 {
    normal_cdf(1.863_4)
}

fn only_x1() -> f64 {
    normal_cdf(1.0 / 0.8f64.sqrt())
}

fn faithfulness_paradox() -> Outcome {
    let expected = full_accuracy() - only_x1();
    let spec = reference();
    let data = sample(&spec, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&spec).map_err(|e| e.to_string())?.model();
    let drop = ablation_drop(&model, &data, 1, Replacement::Mean).map_err(|e| e.to_string())?;
    ensure(
        (drop - expected).abs() <= CLOSED_FORM_TOL,
        format!("c = 0.8 drop {drop:.4} vs {expected:.4}"),
    )?;

    let null = GeneratorSpec64::reference_a(0.0);
    let data = sample(&null, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&null).map_err(|e| e.to_string())?.model();
    let null_drop = ablation_drop(&model, &data, 1, Replacement::Mean).map_err(|e| e.to_string())?;
    ensure(
        null_drop.abs() <= CLOSED_FORM_TOL,
        format!("c = 0 drop {null_drop:.4}"),
    )?;
    Ok(format!(
        "drop {drop:.4} (closed form {expected:.4}), c = 0 drop {null_drop:.4}"
    ))
}

fn deletion_curves() -> Outcome {
    let spec = reference();
    let data = sample(&spec, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&spec).map_err(|e| e.to_string())?.model();
    let cases = [
        ("gradient", vec![1, 0], [full_accuracy(), only_x1(), 0.5]),
        ("pattern", vec![0, 1], [full_accuracy(), 0.5, 0.5]),
    ];
    let mut parts = Vec::new();
    for (name, order, expected) in cases {
        let curve =
            deletion_curve_in_order(&model, &data, order, Replacement::Mean).map_err(|e| e.to_string())?;
        for (a, e) in curve.accuracies.iter().zip(expected) {
            ensure(
                (a - e).abs() <= CLOSED_FORM_TOL,
                format!("{name} curve {:?} vs {expected:?}", curve.accuracies),
            )?;
        }
        let shown: Vec<String> = curve.accuracies.iter().map(|a| format!("{a:.4}")).collect();
        parts.push(format!("{name} ({})", shown.join(", ")));
    }
    Ok(parts.join(", "))
}

fn pfi_closed_form() -> Outcome {
    let expected = full_accuracy() - normal_cdf(1.0 / (0.8f64.sqrt() * (1.0f64 + 0.64).sqrt()));
    let spec = reference();
    let data = sample(&spec, N, 0).map_err(|e| e.to_string())?;
    let model = oracle(&spec).map_err(|e| e.to_string())?.model();
    let pfi = xaibench::attrib::permutation_importance(&model, &data, 5, 1).map_err(|e| e.to_string())?;
    ensure(
        (pfi.scores[1] - expected).abs() <= CLOSED_FORM_TOL,
        format!("suppressor PFI {:.4} vs {expected:.4}", pfi.scores[1]),
    )?;
    Ok(format!(
        "suppressor PFI {:.4} (closed form {expected:.4})",
        pfi.scores[1]
    ))
}

fn axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut normal = move |scale: f64| -> f64 { scale * rng.sample::<f64, _>(StandardNormal) };
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let d = 2 + k % 9;
        let mut w: Vec<f64> = (0..d).map(|_| normal(1.0)).collect();
        let dummy = k % d;
        w[dummy] = 0.0;
        // features 0 and 1 are symmetric unless one is the dummy
        if dummy > 1 {
            w[1] = w[0];
        }
        let model = LinearModel64::new(w.clone(), normal(1.0)).unwrap();
        let mut x: Vec<f64> = (0..d).map(|_| normal(2.0)).collect();
        x[1] = x[0];
        let mut rows = Vec::new();
        for _ in 0..6 {
            let r: Vec<f64> = (0..d).map(|_| normal(1.5)).collect();
            let mut s = r.clone();
            s.swap(0, 1);
            rows.push(r);
            rows.push(s);
        }
        let refs = Matrix64::from_rows(rows).unwrap();
        let bg = Background64::empirical(refs.clone()).unwrap();
        let mean = xaibench::linalg::column_means(&refs);
        let f = |z: &[f64]| decision_score(&model, z).unwrap();
        let phi = shapley_exact(&model, &x, ValueFunction::Marginal(&bg)).map_err(|e| e.to_string())?;

        let v_empty = refs.iter_rows().map(f).sum::<f64>() / refs.rows() as f64;
        let gaps = [
            (phi.scores.iter().sum::<f64>() - (f(&x) - v_empty)).abs(),
            phi.scores[dummy].abs(),
            if dummy > 1 {
                (phi.scores[0] - phi.scores[1]).abs()
            } else {
                0.0
            },
            (0..d)
                .map(|i| (phi.scores[i] - w[i] * (x[i] - mean[i])).abs())
                .fold(0.0, f64::max),
        ];
        let ig = integrated_gradients(&model, &x, &mean, 1 + k).map_err(|e| e.to_string())?;
        let ig_gap = (ig.scores.iter().sum::<f64>() - (f(&x) - f(&mean))).abs();

        let cf = counterfactual(&model, &x, 0.0).map_err(|e| e.to_string())?;
        let dist = cf.delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        for _ in 0..200 {
            let p: Vec<f64> = x.iter().map(|&v| v + normal(3.0)).collect();
            let step = f(&p) / wsq;
            let q: Vec<f64> = p.iter().zip(&w).map(|(a, wi)| a - step * wi).collect();
            let other = q.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            ensure(
                dist <= other + 1e-9,
                format!("model {k}: counterfactual not minimal"),
            )?;
        }
        for g in gaps.iter().chain([&ig_gap]) {
            worst = worst.max(*g);
        }
        ensure(
            gaps.iter().all(|g| *g <= AXIOM_TOL) && ig_gap <= AXIOM_TOL,
            format!("model {k} (d = {d}): gaps {gaps:?}, IG {ig_gap:e}"),
        )?;
    }
    Ok(format!("100 models, d in 2..=10, largest deviation {worst:.1e}"))
}

fn null_case() -> Outcome {
    let spec = GeneratorSpec64::reference_a(0.0);
    let seeds: Vec<u64> = (0..20).collect();
    let report = run_benchmark(&[spec], &Method::ALL, N, &seeds, &BenchmarkConfig64::default())
        .map_err(|e| e.to_string())?;
    ensure(
        report.failures.is_empty(),
        format!("{} failed cells", report.failures.len()),
    )?;
    let mut worst = (0.0, Method::Gradient);
    for m in &report.specs[0].methods {
        let mass = m
            .suppressor_mass
            .ok_or_else(|| format!("{}: no mass", m.method))?
            .mean;
        ensure(mass <= NULL_MASS_MAX, format!("{} mass {mass:.4}", m.method))?;
        if mass >= worst.0 {
            worst = (mass, m.method);
        }
    }
    Ok(format!(
        "largest mean suppressor mass {:.4} ({})",
        worst.0,
        worst.1.name()
    ))
}

fn end_to_end() -> Outcome {
    let run = || -> Result<(String, String, xaibench::EvalReport64), String> {
        let cfg = ExperimentConfig::<f64>::from_json_str(BUNDLED_CONFIG).map_err(|e| e.to_string())?;
        let report = run_benchmark(&cfg.specs, &cfg.methods, cfg.n, &cfg.seed_list(), &cfg.benchmark)
            .map_err(|e| e.to_string())?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        Ok((json, report.to_markdown(), report))
    };
    let (json_a, md_a, report) = run()?;
    let (json_b, md_b, _) = run()?;
    ensure(json_a == json_b, "report JSON differs between reruns")?;
    ensure(md_a == md_b, "report markdown differs between reruns")?;
    ensure(
        report.failures.is_empty(),
        format!("{} failed cells", report.failures.len()),
    )?;
    for m in &report.specs[0].methods {
        let expected = if m.method == Method::Pattern {
            Verdict::RejectsSuppressors
        } else {
            Verdict::AttributesToSuppressors
        };
        ensure(
            m.verdict == expected,
            format!("{}: verdict {:?}", m.method, m.verdict),
        )?;
        ensure(
            md_a.contains(&format!("| {} |", m.method.display_name())),
            format!("markdown lacks a row for {}", m.method),
        )?;
    }
    ensure(
        md_a.contains("Faithfulness (Pixel Flipping)"),
        "markdown lacks the faithfulness row",
    )?;
    Ok(format!(
        "{} methods, verdicts match, reruns byte-identical ({} bytes markdown)",
        report.specs[0].methods.len(),
        md_a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bayes-optimal weights and LDA recovery", bayes_weights),
        (
            "suppressor attribution by every method except PATTERN",
            suppressor_attribution,
        ),
        (
            "example B invariance and counterfactual delta",
            example_b_invariance,
        ),
        (
            "faithfulness paradox: suppressor ablation drop",
            faithfulness_paradox,
        ),
        ("deletion-curve closed forms", deletion_curves),
        ("permutation importance closed form", pfi_closed_form),
        ("axioms on 100 random linear models", axioms),
        ("null case c = 0, 20 seeds", null_case),
        ("end-to-end bundled config", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {}. {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
