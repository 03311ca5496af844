//! Campaign orchestration: output directory layout, streaming iteration
//! records, resume, and artifact assembly.
//!
//! Run directory contents: `manifest.json`, `iterations.jsonl`, `ranks.csv`,
//! `envelope.json`, one SVG per test quantity, `report.json`, `report.txt`.

use crate::config::{ExperimentConfig, Mode};
use crate::manifest::{config_hash, Manifest};
use crate::plot::{plot_file_name, render_plot};
use crate::report::{build_report, Report};
use sbc_core::rng::roles;
use sbc_core::sbc::{Campaign, IterationResult, RankEnsemble, RunControls};
use sbc_core::uniformity::{simultaneous_band, Envelope};
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

fn fail(msg: impl std::fmt::Display, code: i32) -> i32 {
    eprintln!("error: {msg}");
    code
}

/// Parse iteration records, skipping unparseable lines (a truncated tail
/// after an interrupt is expected).
fn read_iterations(path: &Path) -> Vec<IterationResult> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect()
}

fn write_iterations_sorted(path: &Path, iterations: &[IterationResult]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in iterations {
        out.push_str(&serde_json::to_string(r).expect("iteration serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// The envelope seed is tied to the campaign seed so reruns are
/// reproducible byte for byte.
fn envelope_seed(campaign_seed: u64) -> u64 {
    campaign_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(roles::ENVELOPE)
}

fn load_or_calibrate_envelope(
    dir: &Path,
    n: usize,
    s: usize,
    coverage: f64,
    seed: u64,
) -> Envelope {
    let path = dir.join("envelope.json");
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(env) = Envelope::from_json(&text) {
            if env.n == n && env.s == s && env.coverage == coverage {
                return env;
            }
        }
    }
    simultaneous_band(n, s, coverage, envelope_seed(seed)).expect("valid band settings")
}

pub struct RunArgs {
    pub config_path: std::path::PathBuf,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub resume: bool,
    pub limit_iterations: Option<usize>,
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    let mut config = match ExperimentConfig::load(&args.config_path) {
        Ok(c) => c,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Err(e) = config.validate() {
        return fail(e, EXIT_CONFIG);
    }

    let dir = config.output_dir.clone();
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(format!("output_dir: {e}"), EXIT_CONFIG);
    }

    let model = config.model.build();
    let backend = match config.build_backend(model.as_ref()) {
        Ok(b) => b,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let sbc_config = match config.sbc_config(model.as_ref()) {
        Ok(c) => c,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let y_obs = match config.load_data() {
        Ok(d) => d,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let quantities: Vec<String> =
        sbc_config.test_quantities.iter().map(|q| q.key().to_string()).collect();

    // resume: reuse iteration records only under an identical config hash
    let hash = config_hash(&config);
    let jsonl_path = dir.join("iterations.jsonl");
    let precomputed = if args.resume {
        match Manifest::read(&dir) {
            Ok(m) if m.config_hash == hash => {
                let records = read_iterations(&jsonl_path);
                println!("resuming: {} iteration records found", records.len());
                records
            }
            Ok(m) => {
                return fail(
                    format!(
                        "cannot resume: config hash {} does not match the run directory's {}",
                        hash, m.config_hash
                    ),
                    EXIT_CONFIG,
                )
            }
            Err(e) => return fail(format!("cannot resume: {e}"), EXIT_CONFIG),
        }
    } else {
        let manifest = Manifest::new(&config, quantities.clone());
        if let Err(e) = manifest.write(&dir) {
            return fail(format!("cannot write manifest: {e}"), EXIT_CONFIG);
        }
        let _ = std::fs::remove_file(&jsonl_path);
        Vec::new()
    };
    let manifest = match Manifest::read(&dir) {
        Ok(m) => m,
        Err(e) => return fail(format!("cannot read manifest: {e}"), EXIT_CONFIG),
    };

    let sink = Mutex::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&jsonl_path)
            .expect("iterations.jsonl opens"),
    );
    let done_before = precomputed.len();
    let observer = |r: &IterationResult| {
        let line = serde_json::to_string(r).expect("iteration serializes");
        let mut sink = sink.lock().expect("sink lock");
        let _ = writeln!(sink, "{line}");
        let _ = sink.flush();
        println!(
            "iter {:>5} status={:<20} rhat_max={} ess_min={} divergences={} ({} ms)",
            r.iter,
            format!("{:?}", r.status).to_lowercase(),
            r.rhat_max.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.ess_min.map_or("n/a".into(), |v| format!("{v:.0}")),
            r.divergences,
            r.elapsed_ms
        );
    };

    let campaign = Campaign::new(model.as_ref(), backend.as_ref(), &sbc_config);
    let controls = RunControls {
        workers: config.workers,
        precomputed,
        limit: args.limit_iterations,
        observer: Some(&observer),
    };
    let started = std::time::Instant::now();
    let ensemble = match config.mode {
        Mode::Prior => campaign.run_prior(&controls),
        Mode::Posterior => {
            campaign.run_posterior(y_obs.as_ref().expect("posterior mode has data"), &controls)
        }
    };
    let ensemble = match ensemble {
        Ok(e) => e,
        Err(e) => return fail(format!("campaign failed: {e}"), EXIT_FAIL),
    };
    println!(
        "computed {} iterations in {:.1} s (wall)",
        ensemble.iterations.len() - done_before,
        started.elapsed().as_secs_f64()
    );

    drop(sink);
    match finalize(&dir, &manifest, &ensemble, config.plots) {
        Ok(report) => {
            print!("{}", report.to_text());
            if report.status != "complete" {
                EXIT_PASS
            } else if report.all_pass() {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => fail(format!("cannot write artifacts: {e}"), EXIT_FAIL),
    }
}

/// Rewrite the streamed records in iteration order and assemble the
/// derived artifacts.
fn finalize(
    dir: &Path,
    manifest: &Manifest,
    ensemble: &RankEnsemble,
    plots: bool,
) -> std::io::Result<Report> {
    write_iterations_sorted(&dir.join("iterations.jsonl"), &ensemble.iterations)?;
    std::fs::write(dir.join("ranks.csv"), ensemble.to_ranks_csv())?;

    let (ok, flagged, _) = ensemble.status_counts();
    let usable = ok + flagged;
    let complete = ensemble.iterations.len() == manifest.iterations;
    if usable == 0 {
        let envelope = simultaneous_band(1, ensemble.s, manifest.coverage, 0).expect("band");
        let report = build_report(manifest, ensemble, &envelope);
        report.write(dir)?;
        return Ok(report);
    }
    let envelope =
        load_or_calibrate_envelope(dir, usable, ensemble.s, manifest.coverage, manifest.seed);
    std::fs::write(dir.join("envelope.json"), envelope.to_json())?;
    if plots && complete {
        for quantity in &ensemble.quantities {
            let svg = render_plot(ensemble, &envelope, quantity)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            std::fs::write(dir.join(plot_file_name(quantity)), svg)?;
        }
    }
    let report = build_report(manifest, ensemble, &envelope);
    report.write(dir)?;
    Ok(report)
}

fn load_run_dir(dir: &Path) -> Result<(Manifest, RankEnsemble), String> {
    let manifest =
        Manifest::read(dir).map_err(|e| format!("{}: not a run directory: {e}", dir.display()))?;
    let mut iterations = read_iterations(&dir.join("iterations.jsonl"));
    iterations.retain(|r| r.iter < manifest.iterations);
    let ensemble =
        RankEnsemble::from_iterations(manifest.ranks_s, manifest.quantities.clone(), iterations);
    Ok((manifest, ensemble))
}

pub fn cmd_report(dir: &Path) -> i32 {
    let (manifest, ensemble) = match load_run_dir(dir) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let (ok, flagged, _) = ensemble.status_counts();
    let usable = ok + flagged;
    let envelope = if usable > 0 {
        load_or_calibrate_envelope(dir, usable, ensemble.s, manifest.coverage, manifest.seed)
    } else {
        simultaneous_band(1, ensemble.s, manifest.coverage, 0).expect("band")
    };
    let report = build_report(&manifest, &ensemble, &envelope);
    if let Err(e) = report.write(dir) {
        return fail(format!("cannot write report: {e}"), EXIT_FAIL);
    }
    print!("{}", report.to_text());
    if report.status != "complete" || report.all_pass() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

pub fn cmd_plot(dir: &Path) -> i32 {
    let (manifest, ensemble) = match load_run_dir(dir) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let (ok, flagged, _) = ensemble.status_counts();
    if ok + flagged == 0 {
        return fail("no usable iterations to plot", EXIT_CONFIG);
    }
    let envelope =
        load_or_calibrate_envelope(dir, ok + flagged, ensemble.s, manifest.coverage, manifest.seed);
    for quantity in &ensemble.quantities {
        match render_plot(&ensemble, &envelope, quantity) {
            Ok(svg) => {
                let path = dir.join(plot_file_name(quantity));
                if let Err(e) = std::fs::write(&path, svg) {
                    return fail(format!("cannot write {}: {e}", path.display()), EXIT_FAIL);
                }
                println!("wrote {}", path.display());
            }
            Err(e) => return fail(e, EXIT_FAIL),
        }
    }
    EXIT_PASS
}

pub fn cmd_calibrate_band(
    n: usize,
    s: usize,
    coverage: f64,
    seed: u64,
    out: Option<&Path>,
) -> i32 {
    match simultaneous_band(n, s, coverage, seed) {
        Ok(env) => {
            let json = env.to_json();
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, json) {
                        return fail(format!("cannot write {}: {e}", path.display()), EXIT_FAIL);
                    }
                    println!("wrote {} (gamma = {:.6})", path.display(), env.gamma);
                }
                None => println!("{json}"),
            }
            EXIT_PASS
        }
        Err(e) => fail(e, EXIT_CONFIG),
    }
}
