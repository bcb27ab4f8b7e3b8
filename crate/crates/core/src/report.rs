//! Run artifacts: JSON summary, per-field CSV and loss-history CSV.
//!
//! Field files have a header `node,x,y[,z],value` and one row per node of
//! the component's space. The loss file has `iteration,loss,residual`,
//! then `data` in soft mode, then one column per model parameter.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::Mesh;
use crate::physics::Model;
use crate::residual::Assembler;
use crate::training::TrainReport;

pub const REPORT_VERSION: u32 = 1;

/// JSON summary of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    pub case: String,
    pub mode: String,
    pub seed: u64,
    pub iterations: usize,
    pub best_iteration: usize,
    pub best_loss: f64,
    pub wall_time_s: f64,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// Named error metrics against the reference.
    pub metrics: Vec<(String, f64)>,
    /// `(metric, value, threshold, passed)` for the case's targets.
    pub checks: Vec<(String, f64, f64, bool)>,
    pub identifiability_warning: Option<String>,
}

pub fn field_csv(mesh: &Mesh, asm: &Assembler, state: &[f64], component: usize) -> String {
    let dim = mesh.dim();
    let mut out = String::from(if dim == 3 { "node,x,y,z,value\n" } else { "node,x,y,value\n" });
    let values = asm.component(state, component);
    for (&node, v) in asm.dofs().component_nodes(component).iter().zip(values) {
        let x = mesh.nodes()[node];
        let _ = write!(out, "{node}");
        for xj in &x[..dim] {
            let _ = write!(out, ",{xj:?}");
        }
        let _ = writeln!(out, ",{v:?}");
    }
    out
}

/// Writes `<prefix><component>.csv` for every component and returns the
/// paths.
pub fn write_fields(dir: &Path, prefix: &str, mesh: &Mesh, asm: &Assembler, state: &[f64]) -> Result<Vec<PathBuf>> {
    let names = asm.model().component_names(mesh.dim());
    let mut paths = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let path = dir.join(format!("{prefix}{name}.csv"));
        std::fs::write(&path, field_csv(mesh, asm, state, c))?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn loss_csv(report: &TrainReport, model: Model) -> String {
    let soft = !report.data_history.is_empty();
    let mut out = String::from("iteration,loss,residual");
    if soft {
        out.push_str(",data");
    }
    for name in model.param_names() {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, loss) in report.loss_history.iter().enumerate() {
        let _ = write!(out, "{i},{loss:?},{:?}", report.residual_history[i]);
        if soft {
            let _ = write!(out, ",{:?}", report.data_history[i]);
        }
        for p in &report.param_history[i] {
            let _ = write!(out, ",{p:?}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::unit_square;
    use crate::problem::{ParamSpec, ProblemSpec};
    use crate::training::{Assimilation, TrainConfig, Trainer};

    #[test]
    fn csv_layouts() {
        let spec = ProblemSpec::new(unit_square(1, 1).unwrap(), Model::Poisson, vec![ParamSpec::known(1.0)]);
        let asm = spec.assembler().unwrap();
        let csv = field_csv(&spec.mesh, &asm, &[0.5, 1.0, 1.5, 2.0], 0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "node,x,y,value");
        assert_eq!(lines[2], "1,1.0,0.0,1.0");
        assert_eq!(lines.len(), 5);

        let mut cfg = TrainConfig::new(2);
        cfg.hidden = vec![4];
        cfg.cheb_order = 2;
        let mut unknown = spec.clone();
        unknown.params = vec![ParamSpec::unknown(1.0)];
        unknown.essential.push(crate::mesh::EssentialBc::on_tag("left", 0, crate::mesh::Profile::constant(0.0)));
        unknown.observations.push(crate::mesh::Observation {
            component: 0,
            node: 3,
            value: 0.1,
        });
        let report = Trainer::new(&unknown, Assimilation::Soft { lambda: 1.0 }, cfg)
            .unwrap()
            .train()
            .unwrap();
        let csv = loss_csv(&report, Model::Poisson);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,loss,residual,data,f");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
