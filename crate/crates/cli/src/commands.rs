use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hypolab::classify::{classify, ClassificationReport, Verdict};
use hypolab::io::{fmt_f64, stable_json, Table};
use hypolab::levi::{estimate_decay, fundamental_solution_variable, RemainderEstimate};
use hypolab::spectral::{
    apriori_bound_check, fit_asymptotics, green_difference_check, stieltjes_green, sublevel_moments,
    sublevel_moments_mc, tauberian_compare, variable_diagonal, CheckVerdict,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Result of one command: what to print and how to exit.
pub struct Outcome {
    pub summary: String,
    pub exit_code: u8,
}

struct OutDir {
    root: PathBuf,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Write {
            path: root.display().to_string(),
            source,
        })?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.display().to_string(),
                source,
            })?;
        }
        std::fs::write(&path, text).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &stable_json(value)?)
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Yes => "YES",
        Verdict::No => "NO",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn classification_table(r: &ClassificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "symbol               {}", r.symbol);
    if let Some(split) = r.split {
        let _ = writeln!(s, "split                {},{}", split.good, split.bad);
    }
    let _ = writeln!(s, "hypoelliptic         {}", verdict_word(r.hypoelliptic.verdict));
    if let Some(w) = &r.hypoelliptic.witness {
        let _ = writeln!(s, "  witness            {}", serde_json::to_string(w).unwrap_or_default());
    }
    if let Some(p) = &r.partially_hypoelliptic {
        let _ = writeln!(s, "partially hypoell.   {}", verdict_word(p.verdict));
        if let Some(w) = &p.witness {
            let _ = writeln!(s, "  witness            {}", serde_json::to_string(w).unwrap_or_default());
        }
    }
    let _ = writeln!(s, "lineality dimension  {}", r.lineality.basis.len());
    if let Some(e) = &r.exponents {
        let _ = writeln!(s, "exponents            rho={:.4} b={:.4} sigma={:.4} c={:.4}", e.rho, e.b, e.sigma, e.c);
    }
    if let Some(k) = r.iteration_index {
        let _ = writeln!(s, "iteration index      {k}");
    }
    let _ = writeln!(s, "sign at infinity     {}", r.sign_at_infinity.sign);
    s
}

pub fn cmd_classify(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let p = cfg.parsed_symbol()?;
    let report = classify(&p, &cfg.tolerances.classify)?;
    let table = classification_table(&report);
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        dir.json("classification.json", &report)?;
        dir.write("classification.txt", &table)?;
        dir.json("provenance.json", &cfg.provenance())?;
    }
    Ok(Outcome {
        exit_code: if report.has_inconclusive() { 2 } else { 0 },
        summary: table,
    })
}

fn levi_summary(est: &RemainderEstimate) -> Table {
    let mut t = Table::new(&[
        "lambda",
        "alpha_norm",
        "annulus_sup",
        "diag_ratio",
        "frozen_green",
        "residual_l2",
        "max_terms",
        "converged",
    ]);
    for i in 0..est.lambdas.len() {
        let s = &est.series[i];
        let mut row: Vec<String> = [
            est.lambdas[i],
            est.alpha_norms[i],
            est.annulus_sup[i],
            est.diag_ratio[i],
            est.frozen_green[i],
            est.residual_l2[i],
        ]
        .iter()
        .map(|x| fmt_f64(*x))
        .collect();
        row.push(s.iter().map(|s| s.terms).max().unwrap_or(0).to_string());
        row.push(s.iter().all(|s| s.converged).to_string());
        t.push(row);
    }
    t
}

fn levi_histories(est: &RemainderEstimate) -> Table {
    let mut t = Table::new(&["lambda", "slice", "iteration", "norm"]);
    for (l, slices) in est.lambdas.iter().zip(&est.series) {
        for (k, s) in slices.iter().enumerate() {
            for (it, n) in s.norm_history.iter().enumerate() {
                t.push(vec![fmt_f64(*l), k.to_string(), it.to_string(), fmt_f64(*n)]);
            }
        }
    }
    t
}

fn levi_fits(est: &RemainderEstimate) -> Table {
    let mut t = Table::new(&["fit", "parameter", "value"]);
    let mut put = |f: &str, p: &str, v: f64| t.push(vec![f.into(), p.into(), fmt_f64(v)]);
    if let Some(f) = &est.c_fit {
        put("remainder", "c", f.c);
        put("remainder", "log_c", f.log_c);
        put("remainder", "residual", f.residual);
    }
    if let Some(f) = &est.stretched {
        put("annulus", "a", f.a);
        put("annulus", "kappa", f.kappa);
        put("annulus", "b", f.b);
        put("annulus", "residual", f.residual);
    }
    put("type", "b", est.b_type);
    if let Some(f) = &est.diag_fit {
        put("diagonal", "c", f.c);
        put("diagonal", "log_c", f.log_c);
        put("diagonal", "residual", f.residual);
    }
    t
}

pub fn cmd_levi(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let op = cfg.variable_operator()?.expect("resolved config has an operator");
    let spec = cfg.grid_spec(op.split)?;
    let x = cfg.point.clone().expect("resolved config has a point");
    let est = estimate_decay(&op, &x, &cfg.lambdas, &spec, &cfg.tolerances.levi)?;
    let dir = OutDir::create(out)?;
    dir.write("summary.csv", &levi_summary(&est).to_csv())?;
    dir.write("norm_history.csv", &levi_histories(&est).to_csv())?;
    dir.write("fits.csv", &levi_fits(&est).to_csv())?;
    dir.json("decay.json", &est)?;
    if cfg.dump_kernels {
        let rows = cfg
            .lambdas
            .par_iter()
            .map(|&l| {
                let sol = fundamental_solution_variable(&op, l, &x, &spec, &cfg.tolerances.levi.levi)?;
                Ok(sol.g.physical_row(sol.row))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (i, g) in rows.iter().enumerate() {
            match g.to_csv() {
                Ok(csv) => dir.write(&format!("kernels/g_{i:03}.csv"), &csv)?,
                Err(_) => g.save(&out.join("kernels").join(format!("g_{i:03}")))?,
            }
        }
    }
    dir.json("provenance.json", &cfg.provenance())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "lambdas        {}", est.lambdas.len());
    if let Some(f) = &est.c_fit {
        let _ = writeln!(summary, "remainder c    {:.4} (residual {:.3})", f.c, f.residual);
    } else if est.exact_zero {
        let _ = writeln!(summary, "remainder      identically zero");
    }
    if let Some(f) = &est.stretched {
        let _ = writeln!(summary, "annulus b      {:.4} (type b {:.4})", f.b, est.b_type);
    }
    for n in &est.notes {
        let _ = writeln!(summary, "note           {n}");
    }
    let _ = writeln!(summary, "decay          {}", if est.pass { "PASS" } else { "FAIL" });
    Ok(Outcome { summary, exit_code: 0 })
}

#[derive(Serialize)]
struct FitEntry {
    alpha: Vec<u32>,
    fit: Option<hypolab::spectral::AsymptoticFit>,
    error: Option<String>,
}

#[derive(Serialize)]
struct GreenEntry {
    lambda: f64,
    value: Option<f64>,
    error: Option<String>,
}

pub fn cmd_spectral(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let dir = OutDir::create(out)?;
    let mut summary = String::new();
    if cfg.symbol.is_some() {
        let m = cfg.parsed_symbol()?;
        let diag = sublevel_moments(&m, &cfg.lambdas, &cfg.spectral.alphas, &cfg.tolerances.moments)?;
        dir.write("diagonal.csv", &diag.to_table().to_csv())?;
        let fits: Vec<FitEntry> = (0..diag.alphas.len())
            .map(|k| match fit_asymptotics(&diag, k) {
                Ok(f) => FitEntry {
                    alpha: diag.alphas[k].clone(),
                    fit: Some(f),
                    error: None,
                },
                Err(e) => FitEntry {
                    alpha: diag.alphas[k].clone(),
                    fit: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        for f in &fits {
            match &f.fit {
                Some(fit) => {
                    let _ = writeln!(summary, "alpha {:?}: C={:.6} a={:.4} t={}", f.alpha, fit.c, fit.a, fit.t);
                }
                None => {
                    let _ = writeln!(summary, "alpha {:?}: {}", f.alpha, f.error.as_deref().unwrap_or(""));
                }
            }
        }
        dir.json("fits.json", &fits)?;
        let apriori = apriori_bound_check(&diag, 0, cfg.spectral.iteration_order)?;
        let _ = writeln!(summary, "a priori       {}", if apriori.pass { "PASS" } else { "FAIL" });
        dir.json("apriori.json", &apriori)?;
        let green: Vec<GreenEntry> = cfg
            .spectral
            .green_lambdas
            .iter()
            .map(|&l| match stieltjes_green(&diag, 0, l) {
                Ok(v) => GreenEntry {
                    lambda: l,
                    value: Some(v),
                    error: None,
                },
                Err(e) => GreenEntry {
                    lambda: l,
                    value: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        if !green.is_empty() {
            dir.json("green.json", &green)?;
        }
        if cfg.spectral.mc_samples > 0 {
            let mc = sublevel_moments_mc(
                &m,
                &cfg.lambdas,
                &cfg.spectral.alphas,
                cfg.spectral.mc_half_width,
                cfg.spectral.mc_samples,
                cfg.seed,
            )?;
            dir.write("diagonal_mc.csv", &mc.to_table().to_csv())?;
        }
    } else {
        let op = cfg.variable_operator()?.expect("resolved config has an operator");
        let spec = cfg.grid_spec(op.split)?;
        let x = cfg.point.clone().expect("resolved config has a point");
        let (variable, frozen) = variable_diagonal(&op, &x, &cfg.lambdas, &spec)?;
        dir.write("diagonal_variable.csv", &variable.to_table().to_csv())?;
        dir.write("diagonal_frozen.csv", &frozen.to_table().to_csv())?;
        let taub = tauberian_compare(&frozen, &variable, 0)?;
        dir.json("tauberian.json", &taub)?;
        let _ = writeln!(
            summary,
            "tauberian      {} (K={:.4}, growth {:.3}, residual {:.3})",
            if taub.verdict == CheckVerdict::Pass { "PASS" } else { "FAIL" },
            taub.correction,
            taub.log_growth,
            taub.residual
        );
        if !cfg.spectral.green_lambdas.is_empty() {
            let g = green_difference_check(&frozen, &variable, 0, &cfg.spectral.green_lambdas)?;
            dir.json("green_difference.json", &g)?;
        }
    }
    dir.json("provenance.json", &cfg.provenance())?;
    Ok(Outcome { summary, exit_code: 0 })
}
