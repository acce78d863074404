use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rbflux::bench::{time_fom, time_online};
use rbflux::flux::{conservation_defect, ConservationReport, FluxReconstruction};
use rbflux::ipdg::convergence_study;
use rbflux::rb::{greedy, FullOrderContext, GreedyOptions, ReducedModel, Termination};
use rbflux::vtk;
use serde_json::json;

use crate::config::RunConfig;

/// Full double precision for CSV columns.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    write(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_text(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn mu_header(p: usize) -> String {
    (1..=p).map(|i| format!("mu_{i}")).collect::<Vec<_>>().join(",")
}

fn mu_columns(mu: &[f64]) -> String {
    mu.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn write_report(path: &Path, hash: &str, report: &ConservationReport) -> Result<()> {
    write_text(path, |w| {
        writeln!(w, "# config_hash={hash}")?;
        report.write_csv(w)
    })
}

fn load_model(path: &Path) -> Result<ReducedModel> {
    ReducedModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

pub fn fom_solve(config: &RunConfig, mu: &[f64], out: Option<PathBuf>) -> Result<()> {
    let hash = config.hash();
    let out = out.unwrap_or_else(|| config.output_dir.clone());
    let problem = config.build_problem()?;
    problem.check_parameter(mu)?;
    let ctx = FullOrderContext::new(problem)?;
    let u = ctx.solve(mu)?;
    let t = ctx.reconstruct(&u, mu)?;
    let report = conservation_defect(&t, &ctx.problem().source());
    let title = format!("config_hash={hash}");
    write_text(&out.join("solution.vtk"), |w| vtk::write_dg(w, &u, "u", &title))?;
    write_text(&out.join("flux.vtk"), |w| vtk::write_flux(w, &t, "flux", &title))?;
    write_report(&out.join("conservation.csv"), &hash, &report)?;
    let summary = json!({
        "config_hash": hash,
        "mu": mu,
        "cells_per_side": ctx.problem().mesh().cells_per_side(),
        "dofs": ctx.system().dim(),
        "v_norm": ctx.v_norm(&u),
        "flux_max_abs_defect": report.max_abs_defect,
        "flux_relative_defect": report.relative_max(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

pub fn convergence(config: &RunConfig, levels: &[usize], out: Option<PathBuf>) -> Result<()> {
    if levels.is_empty() {
        bail!("no convergence levels given");
    }
    let rows = convergence_study(levels, config.problem.nu())?;
    let mut text = format!("# config_hash={}\ncells_per_side,l2_error,v_error,l2_rate,v_rate\n", config.hash());
    for r in &rows {
        let rate = |x: Option<f64>| x.map(num).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.cells_per_side,
            num(r.l2_error),
            num(r.v_error),
            rate(r.l2_rate),
            rate(r.v_rate)
        ));
    }
    match out {
        Some(path) => write_text(&path, |w| w.write_all(text.as_bytes()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn trajectory_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("trajectory.csv")
}

pub fn train(config: &RunConfig, out: &Path, trajectory: Option<PathBuf>) -> Result<()> {
    let hash = config.hash();
    let problem = config.build_problem()?;
    let train = config.training_points(&problem);
    let ctx = FullOrderContext::new(problem)?;
    let options = GreedyOptions {
        tolerance: config.tolerance,
        max_basis: config.max_basis,
        estimator_constant: config.estimator_constant,
    };
    let (mut model, termination) = greedy(&ctx, &train, &options)?;
    model.config_hash = Some(hash.clone());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model
        .save(out)
        .with_context(|| format!("cannot write model {}", out.display()))?;
    let p = ctx.problem().parameter_box().dim();
    let trajectory = trajectory.unwrap_or_else(|| trajectory_path(out));
    write_text(&trajectory, |w| {
        writeln!(w, "# config_hash={hash}")?;
        writeln!(w, "iteration,{},max_estimate,n,m", mu_header(p))?;
        for s in &model.trajectory {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.iteration,
                mu_columns(&s.mu),
                num(s.max_estimate),
                s.n,
                s.m
            )?;
        }
        Ok(())
    })?;
    let status = match termination {
        Termination::Converged => "converged",
        Termination::MaxBasis => "max_basis",
    };
    println!(
        "{}",
        json!({
            "config_hash": hash,
            "termination": status,
            "n": model.n(),
            "m": model.m(),
            "final_max_estimate": model.trajectory.last().map(|s| s.max_estimate),
            "model": out,
            "trajectory": trajectory,
        })
    );
    Ok(())
}

pub fn rom_solve(model_path: &Path, mu: &[f64], lift: bool, out: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let hash = model.config_hash.clone().unwrap_or_default();
    let (c, eta) = model.solve_and_estimate(mu)?;
    let (d, flux) = model.reduced_flux(mu, &c)?;
    let mut summary = json!({
        "config_hash": hash,
        "mu": mu,
        "n": model.n(),
        "m": model.m(),
        "coefficients": c,
        "estimate": eta,
        "flux_coefficients": d,
    });
    if lift {
        let u = model.lift_solution(&c)?;
        let report = conservation_defect(&flux, &model.problem().source());
        let title = format!("config_hash={hash}");
        write_text(&out.join("reduced_solution.vtk"), |w| vtk::write_dg(w, &u, "u_n", &title))?;
        write_text(&out.join("reduced_flux.vtk"), |w| vtk::write_flux(w, &flux, "t_n", &title))?;
        summary["flux_relative_defect"] = json!(report.relative_max());
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

pub fn audit(model_path: &Path, params: AuditParams, out: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let hash = model.config_hash.clone().unwrap_or_default();
    let problem = model.problem();
    let params = match params {
        AuditParams::Single(mu) => vec![mu],
        AuditParams::Random { count, seed } => {
            if count == 0 {
                bail!("--random needs a positive count");
            }
            problem.parameter_box().sample_uniform(count, seed)
        }
    };
    let recon = FluxReconstruction::new(problem)?;
    let source = problem.source();
    let p = problem.parameter_box().dim();
    let mut summary = format!(
        "# config_hash={hash}\nindex,{},naive_max_abs_defect,naive_relative_defect,conservative_max_abs_defect,conservative_relative_defect\n",
        mu_header(p)
    );
    let mut worst_conservative: f64 = 0.0;
    let mut worst_naive: f64 = 0.0;
    for (i, mu) in params.iter().enumerate() {
        let c = model.rom_solve(mu)?;
        let un = model.lift_solution(&c)?;
        let naive = conservation_defect(&recon.reconstruct(&un, mu, problem)?, &source);
        let (_, flux) = model.reduced_flux(mu, &c)?;
        let conservative = conservation_defect(&flux, &source);
        write_report(&out.join(format!("naive_{i}.csv")), &hash, &naive)?;
        write_report(&out.join(format!("conservative_{i}.csv")), &hash, &conservative)?;
        summary.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            mu_columns(mu),
            num(naive.max_abs_defect),
            num(naive.relative_max()),
            num(conservative.max_abs_defect),
            num(conservative.relative_max())
        ));
        worst_naive = worst_naive.max(naive.relative_max());
        worst_conservative = worst_conservative.max(conservative.relative_max());
    }
    let summary_path = out.join("audit.csv");
    write_text(&summary_path, |w| w.write_all(summary.as_bytes()))?;
    println!(
        "{}",
        json!({
            "config_hash": hash,
            "parameters": params.len(),
            "max_naive_relative_defect": worst_naive,
            "max_conservative_relative_defect": worst_conservative,
            "summary": summary_path,
        })
    );
    Ok(())
}

pub enum AuditParams {
    Single(Vec<f64>),
    Random { count: usize, seed: u64 },
}

pub fn bench(
    config: &RunConfig,
    sizes: &[usize],
    n_fixed: usize,
    repeats: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    if sizes.is_empty() || n_fixed == 0 || repeats == 0 {
        bail!("bench needs grid sizes, a positive --n-fixed and a positive repeat count");
    }
    let hash = config.hash();
    let mut text = format!(
        "# config_hash={hash}\ncells_per_side,dofs,n,m,fom_seconds,online_seconds\n"
    );
    for &size in sizes {
        let mut sized = config.clone();
        sized.problem = config.problem.with_cells_per_side(size);
        sized.validate()?;
        let problem = sized.build_problem()?;
        let train = sized.training_points(&problem);
        let test = sized.test_points(&problem, &train);
        let ctx = FullOrderContext::new(problem)?;
        let options = GreedyOptions {
            tolerance: config.tolerance,
            max_basis: Some(n_fixed),
            estimator_constant: config.estimator_constant,
        };
        let (model, _) = greedy(&ctx, &train, &options)?;
        let fom_params = &test[..test.len().min(3)];
        let fom = time_fom(&ctx, fom_params, repeats)?;
        let online = time_online(&model, &test, repeats, 20)?;
        text.push_str(&format!(
            "{size},{},{},{},{},{}\n",
            ctx.system().dim(),
            model.n(),
            model.m(),
            num(fom),
            num(online)
        ));
    }
    match out {
        Some(path) => write_text(&path, |w| w.write_all(text.as_bytes()))?,
        None => print!("{text}"),
    }
    Ok(())
}
