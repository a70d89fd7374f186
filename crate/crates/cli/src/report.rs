use jumpsas_core::discas::checks::CheckResult;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::experiments::{quantile, AnalyzeOutcome, CrossoverRow, DivergenceRow, Generated, KernelRow};
use crate::output::{num, Report, Table};

fn plot_table() -> Table {
    Table::new(Some("plot"), &["series", "x", "y", "lo", "hi"])
}

fn plot_row(series: &str, x: usize, y: f64, lo: f64, hi: f64) -> Vec<String> {
    vec![series.into(), x.to_string(), num(y), num(lo), num(hi)]
}

pub(crate) fn divergence(cfg: &ExperimentConfig, rows: &[DivergenceRow]) -> Report {
    let mut t = Table::new(None, &["n_g", "estimate"]);
    let mut plot = plot_table();
    for r in rows {
        t.push(vec![r.n_g.to_string(), num(r.estimate)]);
        plot.push(plot_row("estimate", r.n_g, r.estimate, r.estimate, r.estimate));
    }
    let mut summary = Vec::new();
    if let (Some(a), Some(b)) = (rows.first(), rows.last()) {
        summary.push(format!("n_g {}..{}: estimate {} .. {}", a.n_g, b.n_g, a.estimate, b.estimate));
    }
    let mut tables = vec![t];
    if cfg.plot_data {
        tables.push(plot);
    }
    Report {
        tables,
        json: None,
        summary,
    }
}

pub(crate) fn crossover(cfg: &ExperimentConfig, rows: &[CrossoverRow]) -> Report {
    let mut t = Table::new(
        None,
        &["N", "mean_importance_x1", "mean_importance_x2", "median_difference", "replicates", "excluded"],
    );
    let mut plot = plot_table();
    let mut summary = Vec::new();
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            num(r.mean_x1()),
            num(r.mean_x2()),
            num(r.median_diff()),
            r.x1.len().to_string(),
            r.excluded.to_string(),
        ]);
        for (name, v) in [("importance_x1", r.x1.clone()), ("importance_x2", r.x2.clone()), ("difference", r.diffs())] {
            plot.push(plot_row(name, r.n, quantile(&v, 0.5), quantile(&v, 0.25), quantile(&v, 0.75)));
        }
        summary.push(format!(
            "N={:<4} importance x1 {:.4}  x2 {:.4}  median(x1-x2) {:+.4}  excluded {}",
            r.n,
            r.mean_x1(),
            r.mean_x2(),
            r.median_diff(),
            r.excluded
        ));
    }
    let mut tables = vec![t];
    if cfg.plot_data {
        tables.push(plot);
    }
    Report {
        tables,
        json: None,
        summary,
    }
}

pub(crate) fn kernels(cfg: &ExperimentConfig, rows: &[KernelRow]) -> Report {
    let mut t = Table::new(
        None,
        &["function", "P", "N", "kernel", "mean_error", "std_error", "replicates", "excluded"],
    );
    let mut plot = plot_table();
    let mut summary = Vec::new();
    for r in rows {
        let (m, se) = (r.mean_error(), r.std_error());
        t.push(vec![
            r.function.clone(),
            r.dim.to_string(),
            r.n.to_string(),
            r.kernel.name().into(),
            num(m),
            num(se),
            r.errors.len().to_string(),
            r.excluded.to_string(),
        ]);
        plot.push(plot_row(&format!("{}/{}/P={}", r.function, r.kernel, r.dim), r.n, m, m - se, m + se));
        summary.push(format!(
            "{} P={} N={} {:<8} error {:.4} ± {:.4}",
            r.function, r.dim, r.n, r.kernel, m, se
        ));
    }
    let mut tables = vec![t];
    if cfg.plot_data {
        tables.push(plot);
    }
    Report {
        tables,
        json: None,
        summary,
    }
}

pub(crate) fn analyze(cfg: &ExperimentConfig, a: &AnalyzeOutcome) -> Report {
    let p = a.data.dim();
    let names = a.data.column_names();
    let vecs = a.report.matrix.eigenvectors();
    let eig = a.report.eigenvalues();

    let k = p.min(2);
    let mut proj_header: Vec<String> = vec!["index".into()];
    proj_header.extend((1..=k).map(|j| format!("z{j}")));
    proj_header.push("y".into());
    let mut proj = Table {
        suffix: Some("projection".into()),
        header: proj_header,
        rows: Vec::new(),
    };
    for (i, (x, y)) in a.data.inputs().iter().zip(a.data.responses()).enumerate() {
        let mut row = vec![i.to_string()];
        for j in 0..k {
            row.push(num(x.iter().enumerate().map(|(r, xr)| xr * vecs[(r, j)]).sum()));
        }
        row.push(num(*y));
        proj.rows.push(row);
    }

    let mut load_header: Vec<String> = vec!["variable".into(), "importance".into()];
    load_header.extend((1..=p).map(|j| format!("v{j}")));
    let mut loadings = Table {
        suffix: Some("loadings".into()),
        header: load_header,
        rows: Vec::new(),
    };
    for (r, name) in names.iter().take(p).enumerate() {
        let mut row = vec![name.clone(), num(a.report.importances[r])];
        row.extend((0..p).map(|j| num(vecs[(r, j)])));
        loadings.rows.push(row);
    }
    let mut eig_row = vec!["eigenvalue".to_string(), String::new()];
    eig_row.extend(eig.iter().map(|&l| num(l)));
    loadings.rows.push(eig_row);

    let mut tables = vec![proj, loadings];
    let mut summary = vec![
        format!("n={} P={} kernel={}", a.data.len(), p, a.kernel),
        format!("eigenvalues: {}", eig.iter().map(|l| format!("{l:.4e}")).collect::<Vec<_>>().join(" ")),
        format!("selected dimension: {}", a.report.selected_dim),
    ];
    let bakeoff_json = match &a.bakeoff {
        Some(b) => {
            let mut t = Table::new(Some("bakeoff"), &["method", "fold", "mse"]);
            for m in &b.methods {
                for (f, e) in m.fold_mse.iter().enumerate() {
                    t.push(vec![m.method.label().into(), f.to_string(), num(*e)]);
                }
            }
            for m in &b.methods {
                t.push(vec![m.method.label().into(), "mean".into(), num(m.mean_mse)]);
                summary.push(format!("{:<5} cv mse {:.6e}", m.method.label(), m.mean_mse));
            }
            tables.push(t);
            json!({
                "status": a.status,
                "paper_mode": cfg.paper_mode,
                "full_data_dim": b.full_data_dim,
                "methods": b.methods.iter().map(|m| json!({"method": m.method, "mean_mse": m.mean_mse})).collect::<Vec<_>>(),
            })
        }
        None => {
            summary.push(format!("bake-off {}", a.status));
            json!({ "status": a.status, "paper_mode": cfg.paper_mode })
        }
    };
    Report {
        tables,
        json: Some(json!({
            "data": { "n": a.data.len(), "dim": p, "columns": names },
            "kernel": a.kernel,
            "subspace": a.report,
            "bakeoff": bakeoff_json,
        })),
        summary,
    }
}

pub(crate) fn theory(checks: &[CheckResult]) -> Report {
    let mut t = Table::new(None, &["check", "statistic", "lower", "upper", "passed"]);
    let mut summary = Vec::new();
    for c in checks {
        t.push(vec![
            c.name.clone(),
            num(c.statistic),
            c.lower.map(num).unwrap_or_default(),
            num(c.upper),
            c.passed.to_string(),
        ]);
        summary.push(format!(
            "{} {:<40} {:.4e}  ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.detail
        ));
    }
    let all = checks.iter().all(|c| c.passed);
    Report {
        tables: vec![t],
        json: Some(json!({ "all_passed": all, "checks": checks })),
        summary,
    }
}

pub(crate) fn generated(g: &Generated) -> Report {
    let d = &g.data;
    let mut header: Vec<String> = (1..=d.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    let mut t = Table {
        suffix: None,
        header,
        rows: Vec::new(),
    };
    for (x, y) in d.inputs().iter().zip(d.responses()) {
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(num(*y));
        t.rows.push(row);
    }
    let u: Value = g.function.ridge_direction().map(|u| json!(u)).unwrap_or(Value::Null);
    Report {
        tables: vec![t],
        json: Some(json!({
            "function": g.function.name(),
            "dim": d.dim(),
            "n": d.len(),
            "direction": u,
        })),
        summary: vec![format!("{} rows of {} in P={}", d.len(), g.function.name(), d.dim())],
    }
}
