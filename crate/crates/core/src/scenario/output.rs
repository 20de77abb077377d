//! Deterministic CSV and JSON emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::observables::{ObservableRecord, PhotonDistribution};

use super::{run_scenario, RunDiagnostics, ScenarioConfig, ScenarioOutput, Trajectory};

const BASE_COLUMNS: &str = "t,P_e,n_mean,mandel_Q,negativity,purity_qubit,purity_field";
const POSTSELECT_COLUMNS: &str = ",P_g,n_mean_ps,mandel_Q_ps,F_ph,M_av,M_opt";

pub fn scalar_header(postselect: bool) -> String {
    if postselect {
        format!("{BASE_COLUMNS}{POSTSELECT_COLUMNS}")
    } else {
        BASE_COLUMNS.to_string()
    }
}

pub fn dist_file_name(tag: &str, t: f64) -> String {
    format!("dist_{tag}_t{t}.csv")
}

pub fn postselected_dist_file_name(tag: &str, t: f64) -> String {
    format!("dist_ps_{tag}_t{t}.csv")
}

fn distribution_csv(d: &PhotonDistribution) -> String {
    let mut s = String::from("n,P_n\n");
    for (n, p) in d.probabilities.iter().enumerate() {
        let _ = writeln!(s, "{n},{p}");
    }
    s
}

fn scalar_row(out: &mut String, r: &ObservableRecord, postselect: bool) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{}",
        r.t, r.p_e, r.n_mean, r.mandel_q, r.negativity, r.purity_qubit, r.purity_field
    );
    if postselect {
        match &r.postselected {
            Some(p) => {
                let _ = write!(out, ",{},{},{},{},{},{}", p.p_g, p.n_mean_ps, p.mandel_q_ps, p.f_ph, p.m_av, p.m_opt);
            }
            None => out.push_str(",,,,,,"),
        }
    }
    out.push('\n');
}

fn scalars_csv(traj: &Trajectory, postselect: bool) -> String {
    let mut s = scalar_header(postselect);
    s.push('\n');
    for r in &traj.records {
        scalar_row(&mut s, r, postselect);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationInfo {
    pub q1: usize,
    pub q2: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub solvers: Vec<String>,
    pub truncation: TruncationInfo,
    pub tail_mass: f64,
    pub converged: bool,
    pub runs: BTreeMap<String, RunDiagnostics>,
    /// Seconds per run and in total; the only nondeterministic field.
    pub wall_time: BTreeMap<String, f64>,
}

impl Provenance {
    pub fn new(out: &ScenarioOutput, total_seconds: f64) -> Self {
        let mut wall_time: BTreeMap<String, f64> =
            out.trajectories.iter().map(|t| (t.run.tag(), t.diagnostics.wall_seconds)).collect();
        wall_time.insert("total".into(), total_seconds);
        Provenance {
            version: env!("CARGO_PKG_VERSION"),
            config_hash: out.config_hash.clone(),
            config: out.config.clone(),
            solvers: out.trajectories.iter().map(|t| t.run.tag()).collect(),
            truncation: TruncationInfo { q1: out.trunc.q1(), q2: out.trunc.q2(), dim: out.trunc.dim() },
            tail_mass: out.tail_mass,
            converged: out.converged,
            runs: out.trajectories.iter().map(|t| (t.run.tag(), t.diagnostics.clone())).collect(),
            wall_time,
        }
    }
}

/// Tracks files written so a failed run leaves nothing behind.
struct Written {
    paths: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
}

impl Written {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.paths.push(path);
        Ok(())
    }

    fn rollback(self) {
        for p in &self.paths {
            let _ = fs::remove_file(p);
        }
        if let Some(dir) = self.created_dir {
            let _ = fs::remove_dir(dir);
        }
    }
}

fn write_all(out: &ScenarioOutput, dir: &Path, total_seconds: f64, w: &mut Written) -> Result<()> {
    let postselect = out.config.postselect;
    for traj in &out.trajectories {
        let tag = traj.run.tag();
        w.write(dir.join(format!("scalars_{tag}.csv")), &scalars_csv(traj, postselect))?;
        for d in &traj.distributions {
            w.write(dir.join(dist_file_name(&tag, d.t)), &distribution_csv(d))?;
        }
        for d in &traj.postselected_distributions {
            w.write(dir.join(postselected_dist_file_name(&tag, d.t)), &distribution_csv(d))?;
        }
    }
    let prov = Provenance::new(out, total_seconds);
    let json = serde_json::to_string_pretty(&prov).map_err(|e| Error::Validation(e.to_string()))?;
    w.write(dir.join("provenance.json"), &(json + "\n"))
}

/// Writes every output file; on failure, files written so far are removed.
pub fn write_outputs(out: &ScenarioOutput, dir: &Path, total_seconds: f64) -> Result<Vec<PathBuf>> {
    let created_dir = if dir.exists() {
        None
    } else {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Some(dir.to_path_buf())
    };
    let mut w = Written { paths: Vec::new(), created_dir };
    match write_all(out, dir, total_seconds, &mut w) {
        Ok(()) => Ok(w.paths),
        Err(e) => {
            w.rollback();
            Err(e)
        }
    }
}

/// Runs the scenario and writes its outputs into `dir`.
pub fn simulate(cfg: &ScenarioConfig, dir: &Path, exec: Exec) -> Result<(ScenarioOutput, Vec<PathBuf>)> {
    let started = Instant::now();
    let out = run_scenario(cfg, exec)?;
    let files = write_outputs(&out, dir, started.elapsed().as_secs_f64())?;
    Ok((out, files))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_config;

    const DOC: &str = "snapshots = [1.0]\npostselect = true\n[model]\nOmega0 = 1.4\ng = 0.2\n[rates]\nkappa0 = 1e-2\ngamma0 = 1e-2\ngamma_phi = 1e-2\n[initial]\nkind = \"coherent\"\nalpha = 0.8\n[grid]\nt_max = 2.0\nn_samples = 5\n[trunc]\nQ1 = 8\ntail_tol = 1e-4\n";

    fn strip_wall_time(json: &str) -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
        v.as_object_mut().unwrap().remove("wall_time");
        v
    }

    #[test]
    fn headers_are_exact() {
        assert_eq!(scalar_header(false), "t,P_e,n_mean,mandel_Q,negativity,purity_qubit,purity_field");
        assert_eq!(
            scalar_header(true),
            "t,P_e,n_mean,mandel_Q,negativity,purity_qubit,purity_field,P_g,n_mean_ps,mandel_Q_ps,F_ph,M_av,M_opt"
        );
        assert_eq!(dist_file_name("gksl", 1000.0), "dist_gksl_t1000.csv");
        assert_eq!(postselected_dist_file_name("gksl", 2.5), "dist_ps_gksl_t2.5.csv");
    }

    #[test]
    fn outputs_are_complete_and_deterministic() {
        let cfg = parse_config(DOC).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (_, files) = simulate(&cfg, a.path(), Exec::Parallel).unwrap();
        simulate(&cfg, b.path(), Exec::Sequential).unwrap();
        // 3 scalar files, 3 + 3 post-selected snapshot files, provenance
        assert_eq!(files.len(), 10);
        assert!(a.path().join("dist_ps_gksl_t1.csv").exists());
        for f in &files {
            let name = f.file_name().unwrap();
            let x = fs::read_to_string(a.path().join(name)).unwrap();
            let y = fs::read_to_string(b.path().join(name)).unwrap();
            if name == "provenance.json" {
                assert_eq!(strip_wall_time(&x), strip_wall_time(&y));
            } else {
                assert_eq!(x, y, "{name:?}");
            }
        }
        let csv = fs::read_to_string(a.path().join("scalars_gksl.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], scalar_header(true));
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 13));
        let dist = fs::read_to_string(a.path().join("dist_dme_dressed_white_t1.csv")).unwrap();
        assert!(dist.starts_with("n,P_n\n0,"));
        assert_eq!(dist.lines().count(), 10);
        let prov: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join("provenance.json")).unwrap()).unwrap();
        assert_eq!(prov["config_hash"], cfg.hash());
        assert_eq!(prov["truncation"]["q1"], 8);
        assert!(prov["wall_time"]["total"].as_f64().unwrap() >= 0.0);
        assert_eq!(prov["solvers"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let cfg = parse_config(DOC).unwrap();
        let out = run_scenario(&cfg, Exec::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        fs::create_dir_all(&target).unwrap();
        // a directory squatting on the provenance path makes the last write fail
        fs::create_dir(target.join("provenance.json")).unwrap();
        assert!(matches!(write_outputs(&out, &target, 0.0), Err(Error::Io { .. })));
        let left: Vec<_> = fs::read_dir(&target).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(left, vec![std::ffi::OsString::from("provenance.json")]);
    }
}
