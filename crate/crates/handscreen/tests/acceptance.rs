//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p handscreen --test acceptance`.

mod support;

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use handscreen::artifact::{decode_model, encode_model, header_len, ArtifactError, ArtifactMeta};
use handscreen::screening::Verdict;
use handscreen::service::{router, AppState};
use handscreen_core::head::DropoutSpec;
use handscreen_core::metrics::{auc_rank_oracle, auc_trapezoid, classification_metrics, confusion_matrix, roc_curve, ConfusionMatrix};
use handscreen_core::rng::seeded;
use handscreen_core::trainer::{accuracy, fit, fit_presplit, split_dataset, FitOutcome, SplitSpec, TrainConfig};
use handscreen_core::{evaluate, make_mock_backbone, Backbone, EvalReport, HeadParams, Label, LabeledExample, NORMALIZATION_ID};
use http_body_util::BodyExt;
use rand::Rng;
use support::fixtures::{constant_model, page_png};
use support::oracles::{brute_force_confusion, check_gradients, dropout_expectation_error, random_instance, REL_FLOOR};
use support::synthetic;
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn architecture() -> Outcome {
    let count = HeadParams::zeros().param_count();
    ensure(count.per_layer == [1_024_800, 320_400, 80_200, 201], || format!("per layer {:?}", count.per_layer))?;
    ensure(count.total == 1_425_601, || format!("total {}", count.total))?;
    Ok(format!("per layer {:?}, total {}", count.per_layer, count.total))
}

fn gradients() -> Outcome {
    let mut worst = 0f64;
    let mut checked = 0;
    for seed in 0..10u64 {
        let (params, x, label) = random_instance(100 + seed);
        let dropout = if seed % 2 == 0 { DropoutSpec::inference() } else { DropoutSpec::train(0.5).unwrap() };
        let r = check_gradients(params, &x, label, dropout, seed, 1000, REL_FLOOR);
        ensure(r.max_relative_error < 1e-6, || format!("instance {seed}: rel err {:e} at {:?}", r.max_relative_error, r.worst))?;
        worst = worst.max(r.max_relative_error);
        checked += r.checked;
    }
    Ok(format!("10 instances, {checked} coordinates, max rel err {worst:.2e}"))
}

fn random_scores(rng: &mut impl Rng) -> (Vec<f64>, Vec<Label>) {
    let n = rng.random_range(2..=50);
    let levels: Option<u32> = if rng.random::<bool>() { Some(rng.random_range(1..=4)) } else { None };
    let mut labels: Vec<Label> = (0..n).map(|_| Label::from(rng.random::<bool>())).collect();
    labels[0] = Label::Positive;
    labels[1] = Label::Negative;
    let scores = (0..n)
        .map(|_| match levels {
            Some(k) => rng.random_range(0..k) as f64 / k as f64,
            None => rng.random::<f64>(),
        })
        .collect();
    (scores, labels)
}

fn auc_oracle() -> Outcome {
    let mut rng = seeded(2024);
    let mut max_diff = 0f64;
    for i in 0..1000 {
        let (scores, labels) = random_scores(&mut rng);
        let trapezoid = auc_trapezoid(&roc_curve(&scores, &labels).map_err(|e| e.to_string())?);
        let oracle = auc_rank_oracle(&scores, &labels).map_err(|e| e.to_string())?;
        let diff = (trapezoid - oracle).abs();
        ensure(diff <= 1e-12, || format!("instance {i}: trapezoid {trapezoid} vs rank {oracle}"))?;
        max_diff = max_diff.max(diff);
    }
    Ok(format!("1000 instances (about half tie-heavy), max diff {max_diff:.1e}"))
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn metric_formulas() -> Outcome {
    let mut rng = seeded(77);
    for i in 0..1000 {
        let (scores, labels) = random_scores(&mut rng);
        let threshold = rng.random::<f64>();
        let cm = confusion_matrix(&scores, &labels, threshold).map_err(|e| e.to_string())?;
        let brute = brute_force_confusion(&scores, &labels, threshold);
        ensure(cm == brute, || format!("instance {i}: {cm:?} vs {brute:?}"))?;
        let m = classification_metrics(&cm).map_err(|e| e.to_string())?;
        let (tp, fp, fn_, tn) = (brute.true_positives, brute.false_positives, brute.false_negatives, brute.true_negatives);
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let f = match (p, r) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        ensure(close(m.precision, p) && close(m.recall, r) && close(m.f_score, f), || format!("instance {i}: {m:?}"))?;
        ensure((m.accuracy - (tp + tn) as f64 / scores.len() as f64).abs() <= 1e-12, || format!("instance {i}: accuracy"))?;
    }
    // counts with precision exactly 0.94 and recall exactly 0.89
    let cm = ConfusionMatrix { true_positives: 8366, false_positives: 534, false_negatives: 1034, true_negatives: 0 };
    let (p, r, f) = (cm.precision().unwrap(), cm.recall().unwrap(), cm.f_score().unwrap());
    ensure((p - 0.94).abs() < 1e-12 && (r - 0.89).abs() < 1e-12, || format!("P={p} R={r}"))?;
    ensure((f - 0.914).abs() < 5e-4 && format!("{f:.2}") == "0.91", || format!("F={f}"))?;
    Ok(format!("1000 brute-force instances agree; P=0.94 R=0.89 gives F={f:.4}"))
}

fn dropout_expectation() -> Outcome {
    let (params, x, _) = random_instance(5);
    let err = dropout_expectation_error(&params, &x, 0.5, 10_000);
    ensure(err < 0.02, || format!("relative error {err:.4}"))?;
    Ok(format!("10000 draws at rate 0.5, relative error {:.2}%", err * 100.0))
}

struct PaperRun {
    outcome: FitOutcome,
    report: EvalReport,
    validation: Vec<LabeledExample>,
}

fn paper_shaped_run() -> Result<PaperRun, String> {
    let backbone = make_mock_backbone(2021);
    let positives = synthetic::prevalence_positives(497);
    let data = synthetic::dataset(&backbone, 497, positives, 17);
    let spec = SplitSpec::new(447, 50, 21);
    let cfg = TrainConfig { epochs: 25, seed: 22, ..TrainConfig::default() };
    let outcome = fit(&data, &spec, &cfg).map_err(|e| e.to_string())?;
    let (_, validation) = split_dataset(&data, &spec).map_err(|e| e.to_string())?;
    let report = evaluate(&outcome.params, &validation, cfg.threshold).map_err(|e| e.to_string())?;
    Ok(PaperRun { outcome, report, validation })
}

fn end_to_end(run: &PaperRun) -> Outcome {
    let history = &run.outcome.history;
    let auc = run.report.auc.ok_or("validation set has one class")?;
    ensure(history.epochs.len() == 25, || format!("history length {}", history.epochs.len()))?;
    ensure(auc >= 0.95, || format!("AUC {auc:.4}"))?;
    ensure(run.report.accuracy >= 0.90, || format!("accuracy {:.4}", run.report.accuracy))?;
    let max = history.epochs.iter().map(|e| e.val_accuracy).fold(f64::MIN, f64::max);
    let reeval = accuracy(&run.outcome.params, &run.validation, 0.5).map_err(|e| e.to_string())?;
    ensure(reeval == max, || format!("checkpoint accuracy {reeval} but history max {max}"))?;
    let positives = run.validation.iter().filter(|e| e.label.is_positive()).count();
    Ok(format!(
        "497 examples (55 positive), 447/50 split ({positives} positive in validation), 25 epochs: AUC {auc:.4}, accuracy {:.2}, best epoch {}",
        run.report.accuracy,
        history.best_epoch.unwrap() + 1
    ))
}

fn checkpoint_selection() -> Outcome {
    let (train, validation, cfg) = synthetic::overfitting_run();
    let out = fit_presplit(&train, &validation, &cfg).map_err(|e| e.to_string())?;
    let h = &out.history;
    let best = h.best_epoch.ok_or("no best epoch")?;
    let peak = h.epochs[best].val_accuracy;
    let last = h.epochs.last().unwrap().val_accuracy;
    ensure(best + 1 < h.epochs.len() && last < peak, || format!("no peak before the end: {h:?}"))?;
    let reeval = accuracy(&out.params, &validation, cfg.threshold).map_err(|e| e.to_string())?;
    ensure(reeval == peak, || format!("returned params score {reeval}, peak {peak}"))?;
    // stopping right after the peak must give the same parameters
    let truncated = fit_presplit(&train, &validation, &TrainConfig { epochs: best + 1, ..cfg.clone() }).map_err(|e| e.to_string())?;
    ensure(truncated.params == out.params, || "returned params differ from the peak-epoch params".into())?;
    Ok(format!("peak {peak:.3} at epoch {} of {}, final {last:.3}; peak-epoch parameters returned", best + 1, h.epochs.len()))
}

fn serialization() -> Outcome {
    let meta = ArtifactMeta { backbone_digest: [9; 32], normalization_id: NORMALIZATION_ID.into(), dropout_rate: 0.5, threshold: 0.5 };
    let params = HeadParams::init(8);
    let bytes = encode_model(&params, &meta);
    ensure(bytes.len() == header_len(NORMALIZATION_ID) + 1_425_601 * 8, || format!("size {}", bytes.len()))?;
    let (back, back_meta) = decode_model(&bytes).map_err(|e| e.to_string())?;
    let exact = params.tensors().iter().zip(back.tensors()).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    ensure(exact && back_meta == meta, || "round trip not bit-exact".into())?;

    let mut magic = bytes.clone();
    magic[..4].copy_from_slice(b"XXXX");
    let cut = header_len(NORMALIZATION_ID) + 4096 + 5;
    let mut table = bytes.clone();
    let at = header_len(NORMALIZATION_ID) - 8;
    table[at..at + 4].copy_from_slice(&2u32.to_le_bytes());
    let mut version = bytes.clone();
    version[5] = 9;
    let errors = (decode_model(&magic), decode_model(&bytes[..cut]), decode_model(&table), decode_model(&version));
    match errors {
        (
            Err(ArtifactError::Format(m)),
            Err(ArtifactError::Format(t)),
            Err(ArtifactError::Shape { .. }),
            Err(ArtifactError::Version(9)),
        ) if m.offset == 0 && t.offset == cut as u64 => {}
        other => return Err(format!("unexpected outcomes {other:?}")),
    }
    Ok(format!("{} bytes round-trip bit-exactly; bad magic, truncation, bad table, bad version each rejected distinctly", bytes.len()))
}

fn determinism(first: &PaperRun) -> Outcome {
    let second = paper_shaped_run()?;
    ensure(first.outcome.history == second.outcome.history, || "histories differ".into())?;
    ensure(first.outcome.params == second.outcome.params, || "parameters differ".into())?;
    ensure(first.report == second.report, || "reports differ".into())?;
    // image-level extraction with augmentation is reproducible as well
    let backbone = make_mock_backbone(3);
    let cfg = handscreen::extract::ExtractConfig { augment: 3, seed: 5, ..Default::default() };
    for seed in 0..4 {
        let png = page_png(Label::from(seed % 2 == 0), seed);
        let a = handscreen::extract::embed_image(&png, Label::Negative, &backbone, &cfg).map_err(|e| e.to_string())?;
        let b = handscreen::extract::embed_image(&png, Label::Negative, &backbone, &cfg).map_err(|e| e.to_string())?;
        ensure(a == b, || "augmented extraction differs between runs".into())?;
    }
    Ok("two seeded runs: identical histories, parameters, reports and extracted embeddings".into())
}

async fn post_screen(state: &Arc<AppState>, body: Vec<u8>) -> (StatusCode, serde_json::Value) {
    let req = Request::post("/screen").header("content-type", "image/png").body(Body::from(body)).unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or_default())
}

fn service_contract() -> Outcome {
    let backbone = make_mock_backbone(1);
    let mut model = constant_model(0.5, 0.5, backbone.digest());
    model.params = HeadParams::init(33);
    let state = Arc::new(AppState::new(Arc::new(backbone), Some(model), None, true));
    let images: Vec<Vec<u8>> = (0..16).map(|i| page_png(Label::from(i % 4 == 0), i)).collect();
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
    runtime.block_on(async {
        let (status, body) = post_screen(&state, images[0].clone()).await;
        ensure(status == StatusCode::OK, || format!("valid PNG got {status}"))?;
        let p = body["probability"].as_f64().ok_or("no probability")?;
        ensure(p > 0.0 && p < 1.0, || format!("probability {p}"))?;
        let expected = match Verdict::at(p, 0.5) {
            Verdict::Positive => "positive",
            Verdict::Negative => "negative",
        };
        ensure(body["label"] == expected, || format!("label {} for p={p}", body["label"]))?;

        let (status, _) = post_screen(&state, b"\x89PNG\r\n\x1a\ncorrupt".to_vec()).await;
        ensure(status == StatusCode::BAD_REQUEST, || format!("corrupt bytes got {status}"))?;

        let mut sequential = Vec::new();
        for img in &images {
            sequential.push(post_screen(&state, img.clone()).await);
        }
        let tasks: Vec<_> = images
            .iter()
            .map(|img| {
                let (state, img) = (state.clone(), img.clone());
                tokio::spawn(async move { post_screen(&state, img).await })
            })
            .collect();
        for (task, (seq_status, seq_body)) in tasks.into_iter().zip(&sequential) {
            let (status, body) = task.await.map_err(|e| e.to_string())?;
            ensure(status == *seq_status && body["probability"] == seq_body["probability"] && body["label"] == seq_body["label"], || {
                format!("concurrent {body} vs sequential {seq_body}")
            })?;
        }
        Ok("200 with threshold-consistent label, 400 on corrupt bytes, 16 concurrent == sequential".to_string())
    })
}

fn report(number: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
        Err(e) => (false, e),
    };
    println!("criterion {number:>2} {}: {name} ({elapsed:.1?}) {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, "architecture fidelity", secs(1), architecture);
    ok &= report(2, "gradient correctness", secs(60), gradients);
    ok &= report(3, "AUC oracle equivalence", secs(10), auc_oracle);
    ok &= report(4, "metric formula fidelity", secs(5), metric_formulas);
    ok &= report(5, "dropout expectation", secs(30), dropout_expectation);
    let mut paper_run = None;
    ok &= report(6, "paper-shaped end-to-end run", secs(120), || {
        let run = paper_shaped_run()?;
        let detail = end_to_end(&run);
        paper_run = Some(run);
        detail
    });
    ok &= report(7, "checkpoint selection", secs(60), checkpoint_selection);
    ok &= report(8, "serialization", secs(5), serialization);
    ok &= report(9, "determinism", secs(240), || match &paper_run {
        Some(run) => determinism(run),
        None => determinism(&paper_shaped_run()?),
    });
    ok &= report(10, "service contract", secs(30), service_contract);
    if !ok {
        std::process::exit(1);
    }
}
