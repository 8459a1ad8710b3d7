//! CSV, VTK and JSON writers for experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::experiment::{rel_diff, Analysis, Problem};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Per-node values of an interior field (Dirichlet DOFs filled with `fill`).
fn full_field(problem: &Problem, interior: &[f64], fill: Option<f64>) -> Vec<f64> {
    match fill {
        Some(f) => problem.system.fine.scatter(interior, f),
        None => problem.scatter(interior),
    }
}

// Euclidean norm over the components of each node
fn magnitude(v: &[f64], k: usize) -> Vec<f64> {
    v.chunks(k).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

/// `fields.csv` and `extras.csv`, rows ordered by x. The first `export`
/// ensemble members are appended as `sample_j` columns.
pub fn write_bar(dir: &Path, problem: &Problem, a: &Analysis, export: usize) -> Result<Vec<String>, CliError> {
    let mesh = problem.hierarchy.fine();
    let mut order: Vec<usize> = (0..mesh.num_nodes()).collect();
    order.sort_by(|&i, &j| mesh.node(i)[0].total_cmp(&mesh.node(j)[0]));

    let mean = full_field(problem, a.post.mean(), None);
    let std = full_field(problem, &a.std, Some(0.0));
    let coarse = full_field(problem, &a.solutions.prolonged, None);
    let fine = full_field(problem, &a.solutions.fine, None);
    let error = full_field(problem, &a.solutions.error, Some(0.0));
    let samples: Vec<Vec<f64>> = match &a.ensemble {
        Some(e) => (0..export.min(e.len()))
            .map(|j| full_field(problem, e.data.column(j).as_slice(), None))
            .collect(),
        None => Vec::new(),
    };

    let mut out = String::from("x,mean,std,coarse,fine,error");
    for j in 0..samples.len() {
        write!(out, ",sample_{j}").unwrap();
    }
    out.push('\n');
    for &v in &order {
        write!(out, "{},{},{},{},{},{}", num(mesh.node(v)[0]), num(mean[v]), num(std[v]), num(coarse[v]), num(fine[v]), num(error[v]))
            .unwrap();
        for s in &samples {
            write!(out, ",{}", num(s[v])).unwrap();
        }
        out.push('\n');
    }
    fs::write(dir.join("fields.csv"), out)?;
    let mut written = vec!["fields.csv".to_string()];

    let recovered = a.recovered.as_ref().map(|r| full_field(problem, r, Some(0.0)));
    let rescaled = a.rescaled.as_ref().map(|r| full_field(problem, &r.std, Some(0.0)));
    let prior_std = full_field(problem, &a.prior_std, Some(0.0));
    let mut extra = String::from("x,prior_std,recovered_error,std_rescaled\n");
    for &v in &order {
        let opt = |f: &Option<Vec<f64>>| f.as_ref().map(|f| num(f[v])).unwrap_or_default();
        writeln!(extra, "{},{},{},{}", num(mesh.node(v)[0]), num(prior_std[v]), opt(&recovered), opt(&rescaled)).unwrap();
    }
    fs::write(dir.join("extras.csv"), extra)?;
    written.push("extras.csv".to_string());
    Ok(written)
}

/// Legacy ASCII VTK with per-node magnitudes of each field.
pub fn write_plate(dir: &Path, name: &str, problem: &Problem, a: &Analysis) -> Result<Vec<String>, CliError> {
    let mesh = problem.hierarchy.fine();
    let k = problem.dofs_per_node();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    writeln!(out, "{name}").unwrap();
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.num_nodes()).unwrap();
    for p in mesh.nodes() {
        writeln!(out, "{} {} 0", num(p[0]), num(p[1])).unwrap();
    }
    let npe = mesh.nodes_per_element();
    writeln!(out, "CELLS {} {}", mesh.num_elements(), mesh.num_elements() * (npe + 1)).unwrap();
    for el in mesh.elements() {
        let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{npe} {}", ids.join(" ")).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_elements()).unwrap();
    let cell_type = if npe == 3 { "5" } else { "3" };
    for _ in 0..mesh.num_elements() {
        writeln!(out, "{cell_type}").unwrap();
    }
    writeln!(out, "POINT_DATA {}", mesh.num_nodes()).unwrap();

    let mut fields: Vec<(&str, Vec<f64>)> = vec![
        ("mean", magnitude(&full_field(problem, a.post.mean(), None), k)),
        ("std", magnitude(&full_field(problem, &a.std, Some(0.0)), k)),
    ];
    if let Some(r) = &a.rescaled {
        fields.push(("std_rescaled", magnitude(&full_field(problem, &r.std, Some(0.0)), k)));
    }
    fields.push(("error", magnitude(&full_field(problem, &a.solutions.error, Some(0.0)), k)));
    fields.push(("coarse", magnitude(&full_field(problem, &a.solutions.prolonged, None), k)));
    fields.push(("fine", magnitude(&full_field(problem, &a.solutions.fine, None), k)));
    if let Some(r) = &a.recovered {
        fields.push(("recovered_error", magnitude(&full_field(problem, r, Some(0.0)), k)));
    }
    for (name, values) in &fields {
        writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            writeln!(out, "{}", num(*v)).unwrap();
        }
    }
    if k == 2 {
        let mean = full_field(problem, a.post.mean(), None);
        out.push_str("VECTORS mean_displacement double\n");
        for c in mean.chunks(2) {
            writeln!(out, "{} {} 0", num(c[0]), num(c[1])).unwrap();
        }
    }
    fs::write(dir.join("fields.vtk"), out)?;
    Ok(vec!["fields.vtk".to_string()])
}

pub fn write_samples(dir: &Path, a: &Analysis) -> Result<Option<String>, CliError> {
    match &a.ensemble {
        Some(e) => {
            let file = fs::File::create(dir.join("samples.csv"))?;
            e.write_csv(std::io::BufWriter::new(file))?;
            Ok(Some("samples.csv".to_string()))
        }
        None => Ok(None),
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Named diagnostics shared by `run` and `verify`.
pub fn diagnostics(problem: &Problem, a: &Analysis, galerkin: (f64, f64)) -> Value {
    let sys = &problem.system;
    let mean_vs_coarse = rel_diff(a.post.mean(), &a.solutions.prolonged);
    let recovery = a.recovered.as_ref().map(|r| rel_diff(r, &a.solutions.error));
    let ensemble = a.ensemble.as_ref().map(|e| {
        let n = e.len() as f64;
        let m = e.mean();
        let dev = m
            .iter()
            .zip(a.post.mean())
            .zip(&a.std)
            .map(|((x, y), s)| if *s > 0.0 { (x - y).abs() * n.sqrt() / s } else { 0.0 })
            .fold(0.0, f64::max);
        json!({
            "samples": e.len(),
            "seed": e.seed,
            "provenance": e.provenance.as_str(),
            "max_standardized_mean_deviation": dev,
        })
    });
    json!({
        "galerkin_kc_deviation": galerkin.0,
        "galerkin_g_deviation": galerkin.1,
        "kc_symmetry_defect": sys.kc.symmetry_defect() / sys.kc.max_abs(),
        "mean_vs_coarse_relative": mean_vs_coarse,
        "error_recovery_relative": recovery,
        "error_norm": a.solutions.error.iter().map(|x| x * x).sum::<f64>().sqrt(),
        "error_max": max_abs(&a.solutions.error),
        "posterior_std_max": max_abs(&a.std),
        "prior_std_max": max_abs(&a.prior_std),
        "dense_posterior_max": a.dense_posterior_max,
        "dense_prior_max": a.dense_prior_max,
        "posterior_to_prior_max_ratio": a.dense_posterior_max.zip(a.dense_prior_max).map(|(p, q)| p / q),
        "psd_min_eigenvalue": a.rescaled.as_ref().map(|r| r.min_eigenvalue),
        "psd_max_eigenvalue": a.rescaled.as_ref().map(|r| r.max_eigenvalue),
        "rescaling_reconstruction": a.rescaled.as_ref().and_then(|r| r.reconstruction),
        "rescaling_recovery_consistency": a.rescaled.as_ref().map(|r| r.recovery_consistency),
        "rescaled_std_max": a.rescaled.as_ref().map(|r| max_abs(&r.std)),
        "ensemble": ensemble,
    })
}

pub fn report(cfg: &LoadedConfig, problem: &Problem, a: &Analysis, diagnostics: Value, files: &[String]) -> Value {
    let sys = &problem.system;
    let timings: serde_json::Map<String, Value> =
        a.timings.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "name": cfg.config.name,
        "problem": problem.kind,
        "prior": a.prior,
        "sizes": {
            "fine_nodes": problem.hierarchy.fine().num_nodes(),
            "coarse_nodes": problem.hierarchy.coarse().num_nodes(),
            "fine_interior_dofs": sys.n_interior(),
            "coarse_interior_dofs": sys.m_interior(),
        },
        "diagnostics": diagnostics,
        "files": files,
        "timings_seconds": timings,
    })
}
