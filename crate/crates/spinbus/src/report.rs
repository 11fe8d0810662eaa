//! Artifact rendering and atomic output.
//!
//! CSV columns are documented per renderer; floats are printed with 17
//! significant digits so reruns diff bit-for-bit. Files are written to a
//! temporary sibling and renamed into place.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::eigen::SectorSpectra;
use crate::experiments::{
    DisorderScanResult, LambdaScanResult, MixedNodeReport, PositionScanResult, ThetaScanResult,
};
use crate::observables::{FidelityTrace, OptimumKind, TransferOptimum};
use crate::Result;

/// Full-precision float formatting (17 significant digits round-trips f64).
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `t,f_b` rows.
pub fn render_trace_csv(trace: &FidelityTrace) -> String {
    let mut out = String::from("t,f_b\n");
    for (t, f) in trace.times.iter().zip(&trace.fidelities) {
        out.push_str(&fmt_f64(*t));
        out.push(',');
        out.push_str(&fmt_f64(*f));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct OptimumRecord<'a> {
    t_opt: f64,
    f_opt: f64,
    kind: OptimumKind,
    window: [f64; 2],
    model_fingerprint: &'a str,
}

/// Optimum as a JSON record; `None` renders an explicit no-maximum marker.
pub fn render_optimum_json(opt: Option<&TransferOptimum>, fingerprint: &str) -> Result<String> {
    let json = match opt {
        Some(o) => serde_json::to_string_pretty(&OptimumRecord {
            t_opt: o.t_opt,
            f_opt: o.f_opt,
            kind: o.kind,
            window: [o.window.lo, o.window.hi],
            model_fingerprint: fingerprint,
        })?,
        None => serde_json::to_string_pretty(&serde_json::json!({
            "no_maximum": true,
            "model_fingerprint": fingerprint,
        }))?,
    };
    Ok(json + "\n")
}

/// `sector_sz,index,energy` rows over all Sz sectors, ascending.
pub fn render_spectrum_csv(spectra: &SectorSpectra) -> String {
    let mut out = String::from("sector_sz,index,energy\n");
    for (twice_sz, index, energy) in spectra.energy_table() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(twice_sz as f64 / 2.0),
            index,
            fmt_f64(energy)
        ));
    }
    out
}

/// `lambda,t_opt,f_opt,infidelity,fingerprint` rows.
pub fn render_lambda_csv(result: &LambdaScanResult) -> String {
    let mut out = String::from("lambda,t_opt,f_opt,infidelity,fingerprint\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.lambda),
            fmt_opt(r.t_opt),
            fmt_opt(r.f_opt),
            fmt_opt(r.infidelity),
            r.fingerprint
        ));
    }
    out
}

/// `theta,phi,t0_first_order,f_first_order,t0_prime,f_prime,degenerate,fingerprint`.
pub fn render_theta_csv(result: &ThetaScanResult) -> String {
    let mut out =
        String::from("theta,phi,t0_first_order,f_first_order,t0_prime,f_prime,degenerate,fingerprint\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.theta),
            fmt_f64(r.phi),
            fmt_opt(r.t0_first_order),
            fmt_opt(r.f_first_order),
            fmt_opt(r.t0_prime),
            fmt_opt(r.f_prime),
            r.degenerate,
            r.fingerprint
        ));
    }
    out
}

/// `i,j,j_star,j_star_scaled,t0,t0_scaled,sign_class,fingerprint` rows
/// (the effective-coupling table).
pub fn render_position_csv(result: &PositionScanResult, attach_a: usize) -> String {
    let mut out = String::from("i,j,j_star,j_star_scaled,t0,t0_scaled,sign_class,fingerprint\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:?},{}\n",
            attach_a,
            r.j,
            fmt_f64(r.j_star),
            fmt_f64(r.j_star_scaled),
            fmt_opt(r.t0),
            fmt_opt(r.t0_scaled),
            r.sign_class,
            r.fingerprint
        ));
    }
    out
}

/// `sigma_j,calibrated,mean_infidelity,std_error,n_members,n_excluded,fingerprint`.
pub fn render_disorder_csv(result: &DisorderScanResult) -> String {
    let mut out =
        String::from("sigma_j,calibrated,mean_infidelity,std_error,n_members,n_excluded,fingerprint\n");
    for s in &result.summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(s.sigma_j),
            s.calibrated,
            fmt_f64(s.mean_infidelity),
            fmt_f64(s.std_error),
            s.n_members,
            s.n_excluded,
            s.fingerprint
        ));
    }
    out
}

/// Pretty JSON plus trailing newline for any serializable summary.
pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn render_mixed_node_json(report: &MixedNodeReport) -> Result<String> {
    render_json(report)
}

/// SHA-256 hex digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(2 * digest.len());
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Run manifest. Deliberately deterministic: re-running the same
/// invocation must reproduce it bit-for-bit, so wall time is reported on
/// the console instead.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub package: String,
    pub version: String,
    pub threads: usize,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Write `bytes` to `dir/name` atomically (temp file + rename).
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp_path, bytes)?;
    std::fs::rename(&tmp_path, &final_path)?;
    Ok(final_path)
}
