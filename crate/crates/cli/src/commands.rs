use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use lowrank_csd::angular::build_pn_basis;
use lowrank_csd::dlra::{bug_step, orthonormalize, thin_svd, LowRankFactors, TruncationPolicy};
use lowrank_csd::grid::{amplification, build_fourier, build_grid, build_stencils, uniform_grid, BoundaryMode, Grid2D};
use lowrank_csd::oracle::{beam_problem, linesource_is_slow, linesource_setup, lung_setup, run_oracle, FullState, LungParams};
use lowrank_csd::physics::{parse_density_csv, parse_pgm, BeamModel, CrossSectionModel, EnergyFunction};
use lowrank_csd::solver::{
    component_names, initial_state, run, MarchState, Problem, RankMode, RunFailure, RunReport, SolverConfig,
    StreamingFlow,
};
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ModeName, OracleMode, RunConfig, ThetaMode};
use crate::error::CliError;
use crate::output::{field_csv, matrix_csv, write_factors, write_report, ArtifactDir};

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn rank_mode(cfg: &RunConfig, m: usize) -> RankMode {
    let s = &cfg.solver;
    match s.mode {
        ModeName::Fixed => RankMode::Fixed { rank: s.rank },
        ModeName::Adaptive => {
            let r_max = s.r_max.min(m);
            let policy = match s.theta_mode {
                ThetaMode::Relative => TruncationPolicy::relative(s.theta, s.r_min, r_max),
                ThetaMode::Absolute => TruncationPolicy::absolute(s.theta, s.r_min, r_max),
            };
            RankMode::Adaptive {
                policy,
                r_init: s.r_init.clamp(s.r_min, r_max),
            }
        }
    }
}

pub fn solver_config(cfg: &RunConfig, m: usize) -> Result<SolverConfig, CliError> {
    let s = &cfg.solver;
    let mut c = SolverConfig::new(s.levels, rank_mode(cfg, m));
    c.cfl_safety = s.cfl_safety;
    c.t_end = s.t_end;
    c.max_steps = s.max_steps;
    c.record_every = s.record_every;
    c.enforce_stability = s.enforce_stability;
    c.validate(m).map_err(config_err)?;
    Ok(c)
}

pub fn cross_sections(cfg: &RunConfig, default_cut: f64) -> Result<CrossSectionModel, CliError> {
    let p = &cfg.physics;
    let stopping = match &p.stopping_table {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {path}: {e}")))?;
            EnergyFunction::from_csv(&text, path).map_err(config_err)?
        }
        None => EnergyFunction::Constant(p.stopping),
    };
    CrossSectionModel::new(
        stopping,
        EnergyFunction::Constant(p.scatter),
        EnergyFunction::Constant(p.anisotropy),
        p.e_max,
        p.e_cut.unwrap_or(default_cut * p.e_max),
    )
    .map_err(config_err)
}

fn beam(cfg: &RunConfig) -> Result<BeamModel, CliError> {
    let b = &cfg.beam;
    BeamModel {
        amplitude: b.amplitude,
        x_mean: b.x_mean,
        y_mean: b.y_mean,
        omega_mean: b.omega_mean,
        inv_var_x: b.inv_var_x,
        inv_var_y: b.inv_var_y,
        inv_var_omega: b.inv_var_omega,
        inv_var_e: b.inv_var_e,
        e_max: cfg.physics.e_max,
        axis: b.axis,
    }
    .validated()
    .map_err(config_err)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    if n > 0.0 {
        (d / n).sqrt()
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Writes the last valid state of a failed march and returns the runtime error.
fn snapshot<S: MarchState>(out: &Path, failure: &RunFailure<S>, problem: &Problem, levels: usize) -> CliError {
    let root = out.join("snapshot");
    let result = (|| -> Result<PathBuf, CliError> {
        let mut dir = ArtifactDir::create(&root)?;
        let names = component_names(levels);
        let state = &failure.last_good;
        dir.write("flux.csv", &field_csv("scalar_flux", &problem.grid, &state.scalar_flux(&problem.quadrature)))?;
        dir.write("ranks.csv", &crate::output::ranks_csv(&names, &failure.records))?;
        dir.write("norms.csv", &crate::output::norms_csv(&names, &failure.records))?;
        if let Ok(factors) = state.factors() {
            for (name, f) in names[1..].iter().zip(&factors) {
                write_factors(&mut dir, &format!("factors/{name}"), name, f, &problem.grid, problem.degree())?;
            }
        }
        let info = json!({"error": failure.error.to_string(), "step": failure.step, "t": failure.t});
        dir.write("error.json", &format!("{:#}\n", info))?;
        dir.finish()?;
        Ok(root.clone())
    })();
    CliError::Runtime {
        message: failure.to_string(),
        snapshot: result.ok(),
    }
}

fn print_summary(report: &RunReport, out: &Path) {
    let ranks = report.records.last().map(|r| r.ranks.clone()).unwrap_or_default();
    println!(
        "{}: {} steps to t = {:.6}, final ranks {:?}, {:.1} s, output in {}",
        report.tag,
        report.steps,
        report.t_final,
        ranks,
        report.wall_seconds,
        out.display()
    );
    if report.stability_violations > 0 {
        println!("{}: total norm grew in {} steps", report.tag, report.stability_violations);
    }
}

/// Marches the problem with the solver and, if requested, the dense oracle,
/// and writes every artifact plus the manifest.
fn march_and_write(
    cfg: &RunConfig,
    problem: &Problem,
    psi0: DMatrix<f64>,
    out: &Path,
    label: &str,
) -> Result<(), CliError> {
    let m = problem.m();
    let config = solver_config(cfg, m)?;
    let report = run(problem, &config, initial_state(problem, &config, psi0.clone()))
        .map_err(|f| snapshot(out, &f, problem, config.levels))?;
    let oracle = match cfg.output.oracle {
        OracleMode::None => None,
        OracleMode::Split => Some(
            run_oracle(problem, &config, FullState::new(psi0, m, config.levels))
                .map_err(|f| snapshot(out, &f, problem, config.levels))?,
        ),
        OracleMode::Unsplit => {
            if problem.beam.is_some() {
                return Err(CliError::Config("the unsplit oracle needs a problem without inflow".into()));
            }
            let mut flat = config.clone();
            flat.levels = 0;
            let initial = FullState::new(psi0, m, 0).unsplit(&problem.quadrature);
            Some(run_oracle(problem, &flat, initial).map_err(|f| snapshot(out, &f, problem, 0))?)
        }
    };
    let mut dir = ArtifactDir::create(out)?;
    // the output directory is left out so that reruns elsewhere are byte-identical
    let mut written = cfg.clone();
    written.output.dir = ".".into();
    dir.write("config.toml", &written.to_toml())?;
    let comparison = oracle.as_ref().map(|o| {
        json!({
            "oracle": cfg.output.oracle,
            "relative_l2_flux": rel_l2(&report.scalar_flux, &o.scalar_flux),
            "relative_l2_dose": rel_l2(report.dose.values(), o.dose.values()),
        })
    });
    let extra = json!({"run": label, "oracle_comparison": comparison});
    write_report(&mut dir, "", &report, problem.degree(), cfg.output.vtk, extra)?;
    print_summary(&report, out);
    if let Some(o) = &oracle {
        write_report(&mut dir, "oracle", o, problem.degree(), cfg.output.vtk, json!({"run": label}))?;
        print_summary(o, &out.join("oracle"));
        println!(
            "relative L2 difference of the scalar flux to the oracle: {:e}",
            rel_l2(&report.scalar_flux, &o.scalar_flux)
        );
    }
    dir.finish()?;
    Ok(())
}

pub fn linesource(cfg: &RunConfig) -> Result<(), CliError> {
    let (n, degree, order) = (cfg.grid.cells, cfg.angular.degree, cfg.angular.quad_order);
    if linesource_is_slow(n, degree, order) && !cfg.output.allow_slow {
        return Err(CliError::Config(format!(
            "{n} x {n} cells with degree {degree} and quadrature order {order} is flagged as slow; \
             set output.allow_slow or pass --allow-slow"
        )));
    }
    let mut setup = linesource_setup(n, degree, order).map_err(config_err)?;
    setup.problem.cross_sections = cross_sections(cfg, 0.0)?;
    march_and_write(cfg, &setup.problem, setup.psi0, Path::new(&cfg.output.dir), "linesource")
}

pub fn ct_plan(cfg: &RunConfig) -> Result<(), CliError> {
    let path = cfg
        .input
        .image
        .as_deref()
        .ok_or_else(|| CliError::Config("missing required key `input.image` (or --image)".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read image {path}: {e}")))?;
    let beam = beam(cfg)?;
    let mut params = LungParams::reference(1, cfg.angular.degree).map_err(config_err)?;
    params.quad_order = cfg.angular.quad_order;
    params.cone_half_angle = cfg.angular.cone_half_angle_deg.to_radians();
    params.cross_sections = cross_sections(cfg, 1e-3)?;
    params.beam = beam;
    params.origin = (cfg.grid.origin[0], cfg.grid.origin[1]);
    params.air_fill = cfg.input.air_fill_threshold.map(|t| (t, cfg.input.air_fill_density));
    let problem = if path.to_ascii_lowercase().ends_with(".csv") {
        let (nx, ny, rho) = parse_density_csv(&text, path).map_err(config_err)?;
        params.cell_size = if cfg.grid.cell_size > 0.0 { cfg.grid.cell_size } else { 14.5 / nx as f64 };
        beam_problem(nx, ny, &rho, &params).map_err(config_err)?
    } else {
        let image = parse_pgm(&text, path).map_err(config_err)?;
        params.cell_size = if cfg.grid.cell_size > 0.0 { cfg.grid.cell_size } else { 14.5 / image.width as f64 };
        lung_setup(&image, &params).map_err(config_err)?
    };
    if problem.grid.floored_cells() > 0 {
        println!("{} cells raised to the density floor", problem.grid.floored_cells());
    }
    let psi0 = DMatrix::zeros(problem.n_x(), problem.quadrature.n_q());
    march_and_write(cfg, &problem, psi0, Path::new(&cfg.output.dir), "ct-plan")
}

pub struct StabilityOptions {
    pub nu: f64,
    pub samples: usize,
    pub cells: usize,
    pub degree: usize,
    pub rank: usize,
    pub steps: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn stability_check(o: &StabilityOptions) -> Result<(), CliError> {
    if !(o.nu > 0.0 && o.nu.is_finite()) || o.samples < 2 || o.steps == 0 {
        return Err(CliError::Config("need nu > 0, at least 2 samples and 1 step".into()));
    }
    let thetas: Vec<f64> = (0..o.samples).map(|k| TAU * k as f64 / o.samples as f64).collect();
    let moduli: Vec<f64> = thetas.iter().map(|&t| amplification(o.nu, t)).collect();
    let max_mod = moduli.iter().cloned().fold(0.0, f64::max);

    let grid = uniform_grid(o.cells, 0.0, 1.0, 1.0, BoundaryMode::Periodic).map_err(config_err)?;
    let stencils = build_stencils(&grid);
    let fourier = build_fourier(&grid).map_err(config_err)?;
    let mut residual: f64 = 0.0;
    for (t, d) in [
        (&stencils.t1x, &fourier.d1x),
        (&stencils.t1y, &fourier.d1y),
        (&stencils.t2x, &fourier.d2x),
        (&stencils.t2y, &fourier.d2y),
    ] {
        let td = t.to_dense().map(|v| Complex::new(v, 0.0));
        let ed = DMatrix::from_fn(fourier.modes.nrows(), fourier.modes.ncols(), |r, c| fourier.modes[(r, c)] * d[c]);
        residual = residual.max((&td * &fourier.modes - ed).norm() / td.norm());
    }

    let basis = build_pn_basis(o.degree).map_err(config_err)?;
    if o.rank == 0 || o.rank > basis.m() {
        return Err(CliError::Config(format!("rank {} outside [1, {}]", o.rank, basis.m())));
    }
    let flow = StreamingFlow::new(&stencils, &basis);
    let dt = o.nu * grid.dx() / basis.lambda_max();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut random = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let x = orthonormalize(&random(grid.n_cells(), o.rank)).q;
    let w = orthonormalize(&random(basis.m(), o.rank)).q;
    let mut f = LowRankFactors::new(x, random(o.rank, o.rank), w).map_err(CliError::runtime)?;
    let mut norms = vec![f.norm()];
    for _ in 0..o.steps {
        f = bug_step(&f, &flow, dt).map_err(CliError::runtime)?;
        norms.push(f.norm());
    }
    let growth = norms.windows(2).map(|w| w[1] / w[0] - 1.0).fold(f64::NEG_INFINITY, f64::max);

    let stable = max_mod <= 1.0 + 1e-12;
    println!("nu = {}: max amplification modulus {:e} ({})", o.nu, max_mod, if stable { "stable" } else { "unstable" });
    println!("Fourier residual max ||TE - ED|| / ||T|| = {residual:e}");
    println!("streaming norm history over {} steps: max relative growth per step {growth:e}", o.steps);
    if let Some(out) = &o.output {
        let mut dir = ArtifactDir::create(out)?;
        let mut amp = String::from("theta,modulus\n");
        for (t, m) in thetas.iter().zip(&moduli) {
            amp.push_str(&format!("{t:e},{m:e}\n"));
        }
        dir.write("amplification.csv", &amp)?;
        let mut nh = String::from("step,norm\n");
        for (k, n) in norms.iter().enumerate() {
            nh.push_str(&format!("{k},{n:e}\n"));
        }
        dir.write("norms.csv", &nh)?;
        let summary = json!({
            "nu": o.nu,
            "max_amplification": max_mod,
            "stable": stable,
            "fourier_residual": residual,
            "max_norm_growth": growth,
            "cells": o.cells,
            "degree": o.degree,
            "rank": o.rank,
            "seed": o.seed,
        });
        dir.write("report.json", &format!("{:#}\n", summary))?;
        dir.finish()?;
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {name}: {e}")))?;
    let (r, c, v) = parse_density_csv(&text, &name).map_err(config_err)?;
    Ok(DMatrix::from_row_slice(r, c, &v))
}

pub fn compare(a: &Path, b: &Path) -> Result<(), CliError> {
    let (ma, mb) = (read_matrix(a)?, read_matrix(b)?);
    if ma.shape() != mb.shape() {
        return Err(CliError::Config(format!(
            "field shapes differ: {:?} in {} vs {:?} in {}",
            ma.shape(),
            a.display(),
            mb.shape(),
            b.display()
        )));
    }
    let diff = &ma - &mb;
    let va: Vec<f64> = ma.iter().copied().collect();
    let vb: Vec<f64> = mb.iter().copied().collect();
    println!("metric,value");
    println!("l2,{:e}", diff.norm());
    println!("relative_l2,{:e}", rel_l2(&va, &vb));
    println!("max_abs,{:e}", diff.amax());
    Ok(())
}

pub fn export_modes(run_dir: &Path, component: &str, count: usize, output: Option<&Path>) -> Result<(), CliError> {
    let fdir = run_dir.join("factors").join(component);
    let meta_path = fdir.join("meta.json");
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(&meta_path).map_err(|e| config_err(format!("cannot read {}: {e}", meta_path.display())))?,
    )
    .map_err(|e| config_err(format!("{}: {e}", meta_path.display())))?;
    let g = &meta["grid"];
    let get = |v: &serde_json::Value, what: &str| v.as_f64().ok_or_else(|| config_err(format!("meta.json lacks {what}")));
    let (nx, ny) = (get(&g["nx"], "grid.nx")? as usize, get(&g["ny"], "grid.ny")? as usize);
    let (dx, dy) = (get(&g["dx"], "grid.dx")?, get(&g["dy"], "grid.dy")?);
    let origin = (get(&g["origin"][0], "grid.origin")?, get(&g["origin"][1], "grid.origin")?);
    let grid: Grid2D =
        build_grid(nx, ny, dx, dy, origin, &vec![1.0; nx * ny], BoundaryMode::DirichletGhost, 0.0).map_err(config_err)?;
    let x = read_matrix(&fdir.join("X.csv"))?;
    let s = read_matrix(&fdir.join("S.csv"))?;
    let w = read_matrix(&fdir.join("W.csv"))?;
    if x.nrows() != grid.n_cells() || x.ncols() != s.nrows() || w.ncols() != s.ncols() {
        return Err(CliError::Config(format!("factor shapes in {} are inconsistent", fdir.display())));
    }
    let svd = thin_svd(&s).map_err(CliError::runtime)?;
    let k = count.min(svd.sigma.len());
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join("modes").join(component));
    let mut dir = ArtifactDir::create(&out)?;
    let spatial = &x * svd.u.columns(0, k);
    let directional = &w * svd.v.columns(0, k);
    for mode in 0..k {
        let values: Vec<f64> = spatial.column(mode).iter().copied().collect();
        dir.write(format!("mode_{}_spatial.csv", mode + 1), &field_csv(&format!("{component}_mode_{}", mode + 1), &grid, &values))?;
    }
    dir.write("directional_modes.csv", &matrix_csv(&directional.transpose()))?;
    let mut sv = String::from("mode,sigma\n");
    for (i, v) in svd.sigma.iter().enumerate() {
        sv.push_str(&format!("{},{v:e}\n", i + 1));
    }
    dir.write("singular_values.csv", &sv)?;
    dir.finish()?;
    println!("{k} modes of {component} written to {}", out.display());
    if k > 0 {
        println!("leading singular value {:e}", svd.sigma[0]);
    }
    Ok(())
}
