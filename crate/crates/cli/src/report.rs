//! Pass/fail reporting: per-quantity band verdicts with direction
//! interpretation, uniformity statistics, iteration bookkeeping, and
//! wall-clock totals.

use crate::manifest::Manifest;
use sbc_core::sbc::RankEnsemble;
use sbc_core::uniformity::{
    band_check, cook_chi2, pit_ecdf_diff, ranks_to_interior_pit, simultaneous_band, Envelope,
    Excursion, ExcursionDirection,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcursionReport {
    pub start_u: f64,
    pub end_u: f64,
    pub direction: String,
    pub max_magnitude: f64,
    pub interpretation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantityReport {
    pub quantity: String,
    pub pass: bool,
    pub chi2_statistic: f64,
    pub chi2_p_value: f64,
    pub excursions: Vec<ExcursionReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandReport {
    pub n: usize,
    pub gamma: f64,
    pub quantities: Vec<QuantityReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusCounts {
    pub ok: usize,
    pub diagnostics_flagged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallClock {
    pub total_iteration_seconds: f64,
    pub mean_iteration_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub status: String,
    pub verdict: String,
    pub mode: String,
    pub model: String,
    pub iterations_configured: usize,
    pub iterations_done: usize,
    pub counts: StatusCounts,
    #[serde(rename = "S")]
    pub s: usize,
    pub coverage: f64,
    /// Flagged iterations included (the default ensemble).
    pub primary: Option<BandReport>,
    /// The same test with flagged iterations excluded, for comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary_excluding_flagged: Option<BandReport>,
    pub wall_clock: WallClock,
}

fn interpret(e: &Excursion) -> String {
    match (e.direction, e.is_left_region()) {
        (ExcursionDirection::Below, true) => {
            "left-region downward excursion: inference tends to overestimate this quantity \
             (missing posterior mass at small values)"
        }
        (ExcursionDirection::Above, true) => {
            "left-region upward excursion: inference tends to underestimate this quantity \
             (excess posterior mass at small values)"
        }
        (ExcursionDirection::Below, false) => {
            "right-region downward excursion: the approximated posterior's right tail tends \
             to be thin"
        }
        (ExcursionDirection::Above, false) => {
            "right-region upward excursion: the approximated posterior's right tail tends \
             to be heavy"
        }
    }
    .to_string()
}

fn band_report(
    ensemble: &RankEnsemble,
    envelope: &Envelope,
    include_flagged: bool,
) -> BandReport {
    let mut quantities = Vec::new();
    for q in &ensemble.quantities {
        let ranks = ensemble.ranks_for(q, include_flagged);
        let curve = pit_ecdf_diff(&ranks, ensemble.s).expect("ranks are in range");
        let verdict = band_check(&curve, envelope).expect("matching grids");
        let (chi2_statistic, chi2_p_value) =
            cook_chi2(&ranks_to_interior_pit(&ranks, ensemble.s)).expect("interior PIT");
        quantities.push(QuantityReport {
            quantity: q.clone(),
            pass: verdict.pass,
            chi2_statistic,
            chi2_p_value,
            excursions: verdict
                .excursions
                .iter()
                .map(|e| ExcursionReport {
                    start_u: e.start_u,
                    end_u: e.end_u,
                    direction: match e.direction {
                        ExcursionDirection::Below => "below".into(),
                        ExcursionDirection::Above => "above".into(),
                    },
                    max_magnitude: e.max_magnitude,
                    interpretation: interpret(e),
                })
                .collect(),
        });
    }
    BandReport { n: envelope.n, gamma: envelope.gamma, quantities }
}

/// Build the report for an ensemble. `envelope` must match the ensemble's
/// primary realized N; the secondary section is recalibrated on the fly when
/// flagged iterations exist.
pub fn build_report(manifest: &Manifest, ensemble: &RankEnsemble, envelope: &Envelope) -> Report {
    let (ok, flagged, failed) = ensemble.status_counts();
    let done = ensemble.iterations.len();
    let complete = done == manifest.iterations;
    let primary = if ok + flagged > 0 { Some(band_report(ensemble, envelope, true)) } else { None };
    let secondary = if flagged > 0 && ok > 0 {
        let env = simultaneous_band(ok, ensemble.s, manifest.coverage, manifest.seed)
            .expect("valid coverage");
        Some(band_report(ensemble, &env, false))
    } else {
        None
    };
    let verdict = if !complete {
        "INCOMPLETE".to_string()
    } else {
        match &primary {
            None => "FAIL (no usable iterations)".to_string(),
            Some(band) => {
                let total = band.quantities.len();
                let passing = band.quantities.iter().filter(|q| q.pass).count();
                if passing == total {
                    format!("PASS ({passing}/{total} quantities)")
                } else {
                    format!("FAIL ({passing}/{total} quantities)")
                }
            }
        }
    };
    let total_ms: u64 = ensemble.iterations.iter().map(|r| r.elapsed_ms).sum();
    Report {
        status: if complete { "complete".into() } else { "incomplete".into() },
        verdict,
        mode: manifest.mode.clone(),
        model: manifest.model.clone(),
        iterations_configured: manifest.iterations,
        iterations_done: done,
        counts: StatusCounts { ok, diagnostics_flagged: flagged, failed },
        s: ensemble.s,
        coverage: manifest.coverage,
        primary,
        secondary_excluding_flagged: secondary,
        wall_clock: WallClock {
            total_iteration_seconds: total_ms as f64 / 1000.0,
            mean_iteration_seconds: if done > 0 {
                total_ms as f64 / 1000.0 / done as f64
            } else {
                0.0
            },
        },
    }
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.status == "complete"
            && self
                .primary
                .as_ref()
                .is_some_and(|b| b.quantities.iter().all(|q| q.pass))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "calibration report - {} ({} mode)", self.model, self.mode);
        let _ = writeln!(out, "status: {}", self.status);
        let _ = writeln!(
            out,
            "iterations: {}/{} (ok {}, diagnostics-flagged {}, failed {})",
            self.iterations_done,
            self.iterations_configured,
            self.counts.ok,
            self.counts.diagnostics_flagged,
            self.counts.failed
        );
        if let Some(band) = &self.primary {
            let _ = writeln!(
                out,
                "band: {:.0}% simultaneous, N={}, S={}, gamma={:.5}",
                self.coverage * 100.0,
                band.n,
                self.s,
                band.gamma
            );
            for q in &band.quantities {
                if q.pass {
                    let _ = writeln!(out, "  {:<16} PASS", q.quantity);
                } else {
                    let worst = q
                        .excursions
                        .iter()
                        .max_by(|a, b| a.max_magnitude.total_cmp(&b.max_magnitude))
                        .expect("failing quantity has an excursion");
                    let _ = writeln!(
                        out,
                        "  {:<16} FAIL  {} (max {:.4})",
                        q.quantity, worst.interpretation, worst.max_magnitude
                    );
                }
            }
        }
        if let Some(band) = &self.secondary_excluding_flagged {
            let passing = band.quantities.iter().filter(|q| q.pass).count();
            let _ = writeln!(
                out,
                "excluding flagged iterations (N={}): {}/{} quantities pass",
                band.n,
                passing,
                band.quantities.len()
            );
        }
        let _ = writeln!(out, "verdict: {}", self.verdict);
        let _ = writeln!(
            out,
            "wall clock: {:.1} s of iteration time ({:.2} s/iteration)",
            self.wall_clock.total_iteration_seconds, self.wall_clock.mean_iteration_seconds
        );
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(self).expect("report serializes"),
        )?;
        std::fs::write(dir.join("report.txt"), self.to_text())
    }
}
