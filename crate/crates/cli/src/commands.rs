use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use ulcerbench_core::gradcheck::{self, GradcheckConfig, RELATIVE_TOLERANCE};
use ulcerbench_core::io::{
    format_detections, read_detections, read_ground_truth, read_manifest, read_mask, read_probmap, read_rgb_png,
    read_scores, write_mask, write_rgb_png, DetectionTable, ManifestRecord,
};
use ulcerbench_core::losses::loss_breakdown;
use ulcerbench_core::metrics::{ApInterpolation, MaskPair};
use ulcerbench_core::postprocess::{binarize, detect, Connectivity};
use ulcerbench_core::preprocess::{augment, pipeline_signature, AugmentConfig};
use ulcerbench_core::report::{config_digest, to_canonical_json};
use ulcerbench_core::scoring::evaluate_tables;
use ulcerbench_core::stats::welch_t_test;
use ulcerbench_core::{ProbMap, SmoothEps};
use ulcerbench_service::{Service, ServiceConfig};

use crate::config::RunConfig;
use crate::{ApMode, AugmentArgs, Cli, Command, CompareArgs, DetectArgs, EvalArgs, GradcheckArgs, LossArgs, ServeArgs};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    apply_overrides(&mut cfg, &cli.command)?;
    cfg.validate().context("invalid configuration")?;
    match cli.command {
        Command::Detect(a) => run_detect(&cfg, a),
        Command::Eval(a) => run_eval(&cfg, a),
        Command::Loss(a) => run_loss(&cfg, a),
        Command::Gradcheck(a) => run_gradcheck(&cfg, a),
        Command::Compare(a) => run_compare(a),
        Command::Augment(a) => run_augment(&cfg, a),
        Command::Serve(a) => run_serve(&cfg, a),
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) -> Result<()> {
    match cmd {
        Command::Detect(a) => {
            let t = &a.thresholds;
            if let Some(v) = t.pixel_threshold {
                cfg.detect.pixel_threshold = v;
            }
            if let Some(v) = t.min_mean_confidence {
                cfg.detect.min_mean_confidence = v;
            }
            if let Some(v) = t.min_area {
                cfg.detect.min_area = v;
            }
            if let Some(v) = &t.connectivity {
                cfg.detect.connectivity = Connectivity::try_from(v.parse::<u8>()?)?;
            }
        }
        Command::Eval(a) => {
            if let Some(v) = a.iou_threshold {
                cfg.matching.iou_threshold = v;
            }
            if let Some(m) = a.ap_interpolation {
                cfg.matching.ap_interpolation = match m {
                    ApMode::AllPoint => ApInterpolation::AllPoint,
                    ApMode::ElevenPoint => ApInterpolation::ElevenPoint,
                };
            }
            if let Some(v) = a.pixel_threshold {
                cfg.detect.pixel_threshold = v;
            }
        }
        Command::Loss(a) => {
            let w = &mut cfg.loss.weights;
            for (slot, v) in [
                (&mut w.alpha_sg, a.alpha_sg),
                (&mut w.beta_sg, a.beta_sg),
                (&mut w.gamma_sg, a.gamma_sg),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            if let Some(v) = a.focal_alpha {
                cfg.loss.focal.focal_alpha = v;
            }
            if let Some(v) = a.focal_gamma {
                cfg.loss.focal.focal_gamma = v;
            }
            if let Some(v) = a.eps {
                cfg.loss.eps = SmoothEps::new(v)?;
            }
        }
        Command::Augment(a) => {
            if let Some(s) = a.seed {
                cfg.augment.seed = s;
            }
            if a.identity {
                cfg.augment = AugmentConfig {
                    seed: cfg.augment.seed,
                    ..AugmentConfig::identity()
                };
            }
        }
        Command::Serve(a) => {
            if let Some(p) = a.port {
                cfg.service.port = p;
            }
            if let Some(h) = a.host {
                cfg.service.host = h;
            }
            if let Some(b) = a.max_bytes {
                cfg.service.max_body_bytes = b;
            }
        }
        Command::Gradcheck(_) | Command::Compare(_) => {}
    }
    Ok(())
}

/// Report envelope shared by every subcommand that writes one.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    result: T,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

fn report<'a, T: Serialize, C: Serialize>(
    command: &'a str,
    settings: &C,
    timestamps: bool,
    result: T,
    warnings: Vec<String>,
) -> Report<'a, T> {
    Report {
        command,
        config_digest: config_digest(settings),
        generated_at_unix: timestamps.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
        result,
        warnings,
    }
}

/// Writes `text` to `out` through a sibling temporary file, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => atomic_write(path, |tmp| Ok(fs::write(tmp, text)?)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn atomic_write(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("output path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = write(&tmp).and_then(|()| Ok(fs::rename(&tmp, path)?));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn pool(jobs: u32) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build()?)
}

/// Runs `f` over the records in parallel and reports the first failure in
/// manifest order, so errors do not depend on scheduling.
fn per_record<T: Send>(
    jobs: u32,
    records: &[ManifestRecord],
    f: impl Fn(&ManifestRecord) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = pool(jobs)?.install(|| records.par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn load_map(rec: &ManifestRecord) -> Result<ProbMap> {
    let map = read_probmap(&rec.map_path)
        .with_context(|| format!("image `{}`: reading {}", rec.image_id, rec.map_path.display()))?;
    let expected = (rec.height as usize, rec.width as usize);
    if map.dims() != expected {
        bail!(
            "image `{}`: map is {}x{} but the manifest declares {}x{}",
            rec.image_id,
            map.height(),
            map.width(),
            expected.0,
            expected.1
        );
    }
    Ok(map)
}

fn run_detect(cfg: &RunConfig, a: DetectArgs) -> Result<ExitCode> {
    let manifest = read_manifest(&a.maps).with_context(|| format!("reading manifest {}", a.maps.display()))?;
    let found = per_record(a.jobs, &manifest.records, |rec| {
        Ok(detect(&load_map(rec)?, &cfg.detect))
    })?;
    let mut table = DetectionTable::new();
    for (rec, dets) in manifest.records.iter().zip(found) {
        table.extend_image(rec.image_id.clone(), dets);
    }
    log::info!("{} detection(s) over {} image(s)", table.len(), manifest.records.len());
    emit(a.out.as_deref(), &format_detections(&table))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvalSettings<'a> {
    matching: &'a ulcerbench_core::metrics::MatchConfig,
    pixel_threshold: Option<f64>,
}

fn run_eval(cfg: &RunConfig, a: EvalArgs) -> Result<ExitCode> {
    let dets = read_detections(&a.pred).with_context(|| format!("reading detections {}", a.pred.display()))?;
    let (gt, mut warnings) =
        read_ground_truth(&a.gt).with_context(|| format!("reading ground truth {}", a.gt.display()))?;
    let masks = match &a.masks {
        Some(path) => {
            let manifest = read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
            gt.check_bounds(&manifest)
                .context("ground truth does not fit the manifest")?;
            let with_masks: Vec<&ManifestRecord> = manifest.records.iter().filter(|r| r.mask_path.is_some()).collect();
            let skipped = manifest.records.len() - with_masks.len();
            if skipped > 0 {
                warnings.push(format!(
                    "{skipped} manifest image(s) without a mask skipped for pixel metrics"
                ));
            }
            let owned: Vec<ManifestRecord> = with_masks.into_iter().cloned().collect();
            let pairs = per_record(a.jobs, &owned, |rec| {
                let pred = binarize(&load_map(rec)?, cfg.detect.pixel_threshold);
                let mask_path = rec.mask_path.as_ref().expect("filtered");
                let gt_mask = read_mask(mask_path)
                    .with_context(|| format!("image `{}`: reading {}", rec.image_id, mask_path.display()))?;
                if gt_mask.dims() != pred.dims() {
                    bail!("image `{}`: mask and map sizes differ", rec.image_id);
                }
                Ok(MaskPair { pred, gt: gt_mask })
            })?;
            Some(
                owned
                    .into_iter()
                    .map(|r| r.image_id)
                    .zip(pairs)
                    .collect::<BTreeMap<_, _>>(),
            )
        }
        None => None,
    };
    let scored = evaluate_tables(&dets, &gt, masks, &cfg.matching)?;
    warnings.extend(scored.warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let settings = EvalSettings {
        matching: &cfg.matching,
        pixel_threshold: a.masks.is_some().then_some(cfg.detect.pixel_threshold),
    };
    let has_warnings = !warnings.is_empty();
    let text = to_canonical_json(&report("eval", &settings, a.timestamps, scored.report, warnings));
    emit(a.out.as_deref(), &text)?;
    Ok(if a.strict && has_warnings {
        eprintln!("error: evaluation produced warnings and --strict is set");
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_loss(cfg: &RunConfig, a: LossArgs) -> Result<ExitCode> {
    let map = read_probmap(&a.map).with_context(|| format!("reading {}", a.map.display()))?;
    let mask = read_mask(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let breakdown = loss_breakdown(&map, &mask, &cfg.loss)?;
    emit(
        a.out.as_deref(),
        &to_canonical_json(&report("loss", &cfg.loss, a.timestamps, breakdown, Vec::new())),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn run_gradcheck(cfg: &RunConfig, a: GradcheckArgs) -> Result<ExitCode> {
    let gc = GradcheckConfig {
        trials: a.trials,
        seed: a.seed,
        size: a.size,
        step: a.step,
        ..GradcheckConfig::default()
    };
    let result = gradcheck::run(&gc, &cfg.loss)?;
    eprintln!(
        "max relative gradient error: {:e} (tolerance {RELATIVE_TOLERANCE:e}) {}",
        result.max_relative_error,
        if result.passed { "PASS" } else { "FAIL" }
    );
    let passed = result.passed;
    emit(
        a.out.as_deref(),
        &to_canonical_json(&report("gradcheck", &cfg.loss, a.timestamps, result, Vec::new())),
    )?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct Comparison {
    label_a: String,
    label_b: String,
    n_a: usize,
    n_b: usize,
    test: ulcerbench_core::stats::TTestResult,
}

fn run_compare(a: CompareArgs) -> Result<ExitCode> {
    let sa = read_scores(&a.a).with_context(|| format!("reading {}", a.a.display()))?;
    let sb = read_scores(&a.b).with_context(|| format!("reading {}", a.b.display()))?;
    let result = Comparison {
        label_a: sa.label().to_owned(),
        label_b: sb.label().to_owned(),
        n_a: sa.scores().len(),
        n_b: sb.scores().len(),
        test: welch_t_test(&sa, &sb),
    };
    let settings = serde_json::json!({ "test": "welch-two-tailed" });
    emit(
        a.out.as_deref(),
        &to_canonical_json(&report("compare", &settings, a.timestamps, result, Vec::new())),
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AugmentSummary {
    pipeline_signature: String,
    seed: u64,
    height: usize,
    width: usize,
}

fn run_augment(cfg: &RunConfig, a: AugmentArgs) -> Result<ExitCode> {
    if a.out_image == a.out_mask {
        bail!("--out-image and --out-mask must differ");
    }
    let img = read_rgb_png(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let mask = read_mask(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let seed = cfg.augment.seed;
    let (out_img, out_mask) = augment(&img, &mask, &cfg.augment, seed)?;
    atomic_write(&a.out_image, |tmp| Ok(write_rgb_png(&out_img, tmp)?))?;
    atomic_write(&a.out_mask, |tmp| Ok(write_mask(&out_mask, tmp)?))?;
    let summary = AugmentSummary {
        pipeline_signature: pipeline_signature(&cfg.augment, seed),
        seed,
        height: out_img.height(),
        width: out_img.width(),
    };
    print!("{}", to_canonical_json(&summary));
    Ok(ExitCode::SUCCESS)
}

fn run_serve(cfg: &RunConfig, a: ServeArgs) -> Result<ExitCode> {
    let service_cfg = ServiceConfig {
        gt_path: a.gt.clone(),
        data_dir: a.data_dir.clone(),
        max_body_bytes: cfg.service.max_body_bytes,
        match_config: cfg.matching,
        rescore_all: a.rescore,
    };
    let service = Service::open(&service_cfg).context("starting the scoring service")?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let addr = std::net::SocketAddr::new(cfg.service.host, cfg.service.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        ulcerbench_service::serve(service, listener, shutdown).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
