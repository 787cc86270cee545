use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::diagnostics::entropy_tolerance;
use crate::error::{Error, Result};
use crate::grid::{mass, read_snapshot};

use super::run::CSV_HEADER;

pub const MASS_DRIFT_TOL: f64 = 1e-10;
pub const MARGIN_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub rows: usize,
    pub snapshots: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn manifest_entries(text: &str) -> (BTreeMap<String, String>, Vec<(f64, String)>) {
    let mut map = BTreeMap::new();
    let mut snaps = Vec::new();
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let (k, v) = (k.trim(), v.trim());
        if k == "snapshot" {
            if let Some((t, name)) = v.split_once(' ') {
                if let Ok(t) = t.parse() {
                    snaps.push((t, name.trim().to_string()));
                }
            }
        } else {
            map.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
    }
    (map, snaps)
}

/// Re-checks the invariants of a run directory written by `run`.
pub fn audit_run(dir: &Path) -> Result<AuditReport> {
    let csv_path = dir.join("diagnostics.csv");
    let csv = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let origin = csv_path.display().to_string();
    let mut lines = csv.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse { location: format!("{origin}:1"), message: "unexpected header".into() });
    }
    let mut rows: Vec<[f64; 8]> = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { location: format!("{origin}:{}", k + 2), message: "malformed number".into() })?;
        if cells.len() != 8 {
            return Err(Error::Parse {
                location: format!("{origin}:{}", k + 2),
                message: format!("expected 8 columns, got {}", cells.len()),
            });
        }
        rows.push(cells.try_into().expect("length checked"));
    }
    if rows.is_empty() {
        return Err(Error::Parse { location: origin, message: "no data rows".into() });
    }
    let mpath = dir.join("manifest.txt");
    let mtext = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let (manifest, snaps) = manifest_entries(&mtext);
    let kappa_max = manifest
        .get("diagnostics.kappas")
        .map(|v| v.split_whitespace().filter_map(|t| t.parse::<f64>().ok()).fold(0.0, |a: f64, k| a.max(k.abs())))
        .unwrap_or(0.0);

    let mut report = AuditReport { rows: rows.len(), ..Default::default() };
    let v = &mut report.violations;
    let m0 = rows[0][1];
    for (k, r) in rows.iter().enumerate() {
        let [t, m, linf, tv, u, ent, lm, tm] = *r;
        if k > 0 && !(t > rows[k - 1][0]) {
            v.push(format!("time monotonicity violated at row {}: t = {t}", k + 1));
        }
        let drift = if m0 > 0.0 { (m - m0).abs() / m0 } else { m.abs() };
        if !(drift < MASS_DRIFT_TOL) {
            v.push(format!("mass conservation violated at t = {t}: relative drift {drift:e}"));
        }
        if !(linf >= 0.0 && tv >= 0.0 && u >= 0.0) {
            v.push(format!("non-negativity of linf, tv or u_rho violated at t = {t}"));
        }
        if !lm.is_nan() && lm < MARGIN_TOL {
            v.push(format!("L-infinity bound violated at t = {t}: margin {lm:e}"));
        }
        if !tm.is_nan() && tm < MARGIN_TOL {
            v.push(format!("total variation bound violated at t = {t}: margin {tm:e}"));
        }
        if !ent.is_nan() && ent > entropy_tolerance(kappa_max) {
            v.push(format!("discrete entropy inequality violated at t = {t}: residual {ent:e}"));
        }
    }
    for (t, name) in &snaps {
        let path = dir.join(name);
        let snap = match read_snapshot(&path) {
            Ok(s) => s,
            Err(e) => {
                v.push(format!("snapshot {name} unreadable: {e}"));
                continue;
            }
        };
        report.snapshots += 1;
        if snap.time != *t {
            v.push(format!("snapshot {name} has time {} but is indexed at {t}", snap.time));
        }
        let min = snap.min();
        if min < 0.0 {
            v.push(format!("positivity violated in {name}: minimum {min:e}"));
        }
        if let Some(r) = rows.iter().find(|r| r[0] == *t) {
            let sm = mass(&snap);
            if (sm - r[1]).abs() > 1e-12 * r[1].abs() {
                v.push(format!("snapshot {name} mass {sm:e} disagrees with diagnostics {:e}", r[1]));
            }
        } else {
            v.push(format!("snapshot {name} at t = {t} has no diagnostics row"));
        }
    }
    Ok(report)
}
