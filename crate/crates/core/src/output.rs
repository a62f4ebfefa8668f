//! VTK snapshots, per-step statistics and run logs.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::driver::{BenchReport, RunLog, State};
use crate::mesh::{DofMap, DofMode, Mesh};

/// Legacy ASCII VTK unstructured grid with point data `v` and, if present,
/// `w`. EMI points are duplicated per subdomain so each dof is one point.
pub fn vtk_string(mesh: &Mesh, dofs: &DofMap, state: &State, gating: &[usize]) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "t = {:e}", state.t);
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", dofs.len());
    for d in 0..dofs.len() {
        let p = mesh.vertex(dofs.vertex_of(d));
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let k = mesh.dim() + 1;
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {} {}", ne, ne * (k + 1));
    for e in 0..ne {
        let nodes: Vec<usize> = match dofs.mode() {
            DofMode::Monodomain => mesh.element(e).to_vec(),
            DofMode::Emi => dofs.element_dofs(mesh, e)[..k].to_vec(),
        };
        let _ = write!(s, "{k}");
        for n in nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    let cell_type = if k == 2 { 3 } else { 5 };
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "POINT_DATA {}", dofs.len());
    s.push_str("SCALARS v double 1\nLOOKUP_TABLE default\n");
    for x in &state.u {
        let _ = writeln!(s, "{x:e}");
    }
    if !state.w.is_empty() {
        let mut w = vec![0.0; dofs.len()];
        for (g, &d) in gating.iter().enumerate() {
            w[d] = state.w[g];
        }
        s.push_str("SCALARS w double 1\nLOOKUP_TABLE default\n");
        for x in w {
            let _ = writeln!(s, "{x:e}");
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, dofs: &DofMap, state: &State, gating: &[usize]) -> io::Result<()> {
    fs::write(path, vtk_string(mesh, dofs, state, gating))
}

/// `step,t,sweeps,dofs_sweep_1..K,wall_ms`, missing sweeps padded with 0.
pub fn stats_csv(log: &RunLog) -> String {
    let k = log.steps.iter().map(|s| s.sweeps.len()).max().unwrap_or(0);
    let mut s = String::from("step,t,sweeps");
    for i in 1..=k {
        let _ = write!(s, ",dofs_sweep_{i}");
    }
    s.push_str(",wall_ms\n");
    for st in &log.steps {
        let _ = write!(s, "{},{:e},{}", st.step, st.t, st.sweeps.len());
        for i in 0..k {
            let _ = write!(s, ",{}", st.sweeps.get(i).map_or(0, |x| x.active_dofs));
        }
        let _ = writeln!(s, ",{:.3}", st.wall_ms);
    }
    s
}

/// One JSON object per step; each carries the config hash.
pub fn run_jsonl(log: &RunLog) -> String {
    let mut s = String::new();
    for st in &log.steps {
        let mut v = serde_json::to_value(st).expect("step record serializes");
        v["config_hash"] = serde_json::Value::String(log.config_hash.clone());
        v["dofs"] = serde_json::Value::from(log.dofs);
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn write_run_files(dir: &Path, log: &RunLog) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("stats.csv"), stats_csv(log))?;
    fs::write(dir.join("run.jsonl"), run_jsonl(log))
}

pub fn write_bench(dir: &Path, report: &BenchReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("bench.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(report).expect("report serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{StepRecord, SweepRecord};
    use crate::mesh::EmiLayout;

    fn sweep(n: usize) -> SweepRecord {
        SweepRecord {
            active_dofs: n,
            cg_iterations: 3,
            unconverged_solves: 0,
            correction: 0.0,
            max_correction: 0.0,
            rho: 0.05,
            tol_drop: 0.0,
            wall_ms: 1.0,
        }
    }

    fn log() -> RunLog {
        RunLog {
            config_hash: "abc".into(),
            dofs: 9,
            steps: vec![
                StepRecord { step: 1, t: 0.1, sweeps: vec![sweep(9), sweep(4), sweep(2)], converged: true, wall_ms: 2.0 },
                StepRecord { step: 2, t: 0.2, sweeps: vec![sweep(9)], converged: true, wall_ms: 1.0 },
            ],
            total_wall_ms: 3.0,
        }
    }

    #[test]
    fn csv_is_padded() {
        let csv = stats_csv(&log());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,t,sweeps,dofs_sweep_1,dofs_sweep_2,dofs_sweep_3,wall_ms");
        assert!(lines[2].starts_with("2,2e-1,1,9,0,0,"));
    }

    #[test]
    fn jsonl_has_one_object_per_step() {
        let text = run_jsonl(&log());
        let objs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[0]["sweeps"].as_array().unwrap().len(), 3);
        assert_eq!(objs[1]["config_hash"], "abc");
    }

    #[test]
    fn vtk_layout() {
        let mesh = Mesh::cartesian(&[2, 2], &[1.0, 1.0]).unwrap();
        let dofs = DofMap::new(&mesh, DofMode::Monodomain);
        let st = State { t: 0.0, u: vec![0.5; 9], w: vec![] };
        let text = vtk_string(&mesh, &dofs, &st, &[]);
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("SCALARS v double"));
        assert!(!text.contains("SCALARS w"));

        let mesh = Mesh::emi(&EmiLayout::grid(1, 1, [2.0, 2.0], 0.0, 1.0, 1.0)).unwrap();
        let dofs = DofMap::new(&mesh, DofMode::Emi);
        assert!(dofs.len() > mesh.num_vertices());
        let st = State { t: 0.0, u: vec![0.0; dofs.len()], w: vec![0.1; 2] };
        let text = vtk_string(&mesh, &dofs, &st, &[0, 1]);
        assert!(text.contains(&format!("POINTS {} double", dofs.len())));
        assert!(text.contains("SCALARS w double"));
    }
}
