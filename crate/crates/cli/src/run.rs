//! Executes a parsed experiment and writes its artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};

use serp_core::adapt::{adaptive_solve_with, choose_interface, solve_and_estimate, Solved};
use serp_core::fem::write_vtk;
use serp_core::format::format_e;
use serp_core::mesh::{triangulate_max_diameter, write_mesh};
use serp_core::reference::{compute_reference, error_against, load_reference, save_reference, ReferenceConfig};
use serp_core::{InterfaceConfig, Report, Solution};

use crate::config::{ExperimentConfig, RunKind};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the configured output directory.
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Rows where the estimate fell below the error.
    pub violations: Vec<String>,
}

struct Table {
    name: &'static str,
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    fn new(name: &'static str, header: &'static str, quiet: bool) -> Self {
        if !quiet {
            println!("{header}");
        }
        Self {
            name,
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, fields: &[String], quiet: bool) {
        let row = fields.join(",");
        if !quiet {
            println!("{row}");
        }
        self.rows.push(row);
    }

    fn write(&self, dir: &Path, outcome: &mut RunOutcome) -> Result<()> {
        let path = dir.join(self.name);
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(f, "{}", self.header)?;
        for r in &self.rows {
            writeln!(f, "{r}")?;
        }
        f.flush()?;
        outcome.files.push(path);
        Ok(())
    }
}

fn e8(x: f64) -> String {
    format_e(x, 8)
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    out: PathBuf,
    quiet: bool,
    reference: Option<Solution>,
    outcome: RunOutcome,
}

/// Scaled `(error, eta, eta_gamma, effectivity)` of a report.
struct Columns {
    error: f64,
    eta: f64,
    eta_gamma: f64,
    eff: f64,
}

impl Runner<'_> {
    fn solve(&self, x_gamma: Option<f64>, h: f64) -> Result<Solved<f64>> {
        let g = &self.config.geometry;
        let iface = x_gamma.map(|x| InterfaceConfig::new(g, x)).transpose()?;
        let mesh = triangulate_max_diameter(&g.fe_polygon(iface.as_ref()), h)
            .with_context(|| format!("meshing for x_gamma = {x_gamma:?}, h = {h}"))?;
        let mut s = solve_and_estimate(g, x_gamma, Arc::new(mesh), self.config.degree, self.config.solver)?;
        self.attach_error(&mut s)?;
        Ok(s)
    }

    fn attach_error(&self, s: &mut Solved<f64>) -> serp_core::Result<()> {
        if let Some(r) = &self.reference {
            let e = error_against(&s.coupled, r)?;
            s.report = s.report.clone().with_error(e);
        }
        Ok(())
    }

    /// Scales a report and records a reliability violation if there is one.
    fn columns(&mut self, r: &Report, label: &str) -> Columns {
        let scale = |v: f64| self.config.scale.apply(r, v);
        let (error, eff) = match r.error {
            Some(e) => {
                let trusted = r.relative(e) >= self.config.trust_floor;
                if trusted && r.eta < (1.0 - self.config.reliability_slack) * e {
                    let msg = format!("{label}: eta = {:e} below error = {:e}", r.eta, e);
                    log::error!("reliability violated at {msg}");
                    self.outcome.violations.push(msg);
                }
                (scale(e), r.effectivity().unwrap_or(f64::NAN))
            }
            None => (f64::NAN, f64::NAN),
        };
        Columns {
            error,
            eta: scale(r.eta),
            eta_gamma: scale(r.eta_gamma),
            eff,
        }
    }

    fn write_solution(&mut self, stem: &str, s: &Solved<f64>) -> Result<()> {
        let mesh = s.coupled.mesh();
        let mesh_path = self.out.join(format!("{stem}.mesh"));
        let mut f = BufWriter::new(File::create(&mesh_path)?);
        write_mesh(mesh.as_ref(), &mut f)?;
        f.flush()?;
        let vtk_path = self.out.join(format!("{stem}.vtk"));
        let mut f = BufWriter::new(File::create(&vtk_path)?);
        let r = &s.report;
        write_vtk(
            mesh.as_ref(),
            &[("u", s.coupled.field.vertex_values())],
            &[
                ("eta", &r.eta_elements),
                ("eta_d", &r.eta_d_elements),
                ("eta_local", &r.eta_local_elements),
            ],
            &mut f,
        )?;
        f.flush()?;
        self.outcome.files.extend([mesh_path, vtk_path]);
        Ok(())
    }

    fn reference_run(&mut self, h: f64, grading: Option<f64>) -> Result<()> {
        let cfg = ReferenceConfig {
            h,
            degree: self.config.degree,
            grading,
        };
        let r = compute_reference(&self.config.geometry, &cfg, self.config.solver)?;
        let (m, f) = (self.out.join("reference.mesh"), self.out.join("reference.field"));
        save_reference(&r, &m, &f)?;
        if !self.quiet {
            println!(
                "reference: {} triangles, {} DoF, h_max {}",
                r.mesh().n_triangles(),
                r.n_dofs(),
                e8(r.mesh().h_max())
            );
        }
        self.outcome.files.extend([m, f]);
        Ok(())
    }

    fn sweep_interface(&mut self, h: f64, xs: &[f64]) -> Result<()> {
        let mut t = Table::new(
            "sweep_interface.csv",
            "x_gamma,h_max,dof,error,eta,eta_gamma,eff_index",
            self.quiet,
        );
        for &x in xs {
            let s = self.solve(Some(x), h)?;
            let c = self.columns(&s.report, &format!("x_gamma = {x}"));
            t.push(
                &[
                    e8(x),
                    e8(s.report.h_max),
                    s.report.n_dof.to_string(),
                    e8(c.error),
                    e8(c.eta),
                    e8(c.eta_gamma),
                    e8(c.eff),
                ],
                self.quiet,
            );
        }
        t.write(&self.out, &mut self.outcome)
    }

    fn sweep_mesh(&mut self, x: Option<f64>, hs: &[f64]) -> Result<()> {
        let mut t = Table::new("sweep_mesh.csv", "h_max,dof,error,eta,eta_gamma,eff_index", self.quiet);
        for &h in hs {
            let s = self.solve(x, h)?;
            let c = self.columns(&s.report, &format!("h = {h}"));
            t.push(
                &[
                    e8(s.report.h_max),
                    s.report.n_dof.to_string(),
                    e8(c.error),
                    e8(c.eta),
                    e8(c.eta_gamma),
                    e8(c.eff),
                ],
                self.quiet,
            );
        }
        t.write(&self.out, &mut self.outcome)
    }

    fn adaptive(&mut self, config: &serp_core::Config, fixed: Option<Option<f64>>) -> Result<()> {
        let g = &self.config.geometry;
        let x_gamma = match fixed {
            Some(x) => x,
            None => {
                let choice = choose_interface(g, config)?;
                let mut t = Table::new("interface.csv", "x_gamma,eta_gamma", true);
                for (x, eg) in &choice.trace {
                    t.push(&[e8(*x), e8(*eg)], true);
                }
                t.write(&self.out, &mut self.outcome)?;
                if !self.quiet {
                    match choice.x_gamma {
                        Some(x) => println!("# interface at x_gamma = {x:.4} after {} steps", choice.trace.len()),
                        None => println!("# no interface position met tol_gamma; solving the full 2D model"),
                    }
                }
                choice.x_gamma
            }
        };
        let mut t = Table::new(
            "adaptive.csv",
            "iter,x_gamma,dof,error,eta,eta_gamma,eff_index",
            self.quiet,
        );
        let quiet = self.quiet;
        let mut rows = Vec::new();
        let run = adaptive_solve_with(g, x_gamma, config, |iter, s| {
            self.attach_error(s)?;
            rows.push((iter, s.report.clone()));
            Ok(())
        })?;
        for (iter, r) in rows {
            let c = self.columns(&r, &format!("iteration {iter}"));
            t.push(
                &[
                    iter.to_string(),
                    e8(x_gamma.unwrap_or(0.0)),
                    r.n_dof.to_string(),
                    e8(c.error),
                    e8(c.eta),
                    e8(c.eta_gamma),
                    e8(c.eff),
                ],
                quiet,
            );
        }
        t.write(&self.out, &mut self.outcome)?;
        self.write_solution("adaptive_final", &run.final_solution)?;
        if !run.converged {
            log::warn!("adaptive run stopped at max_iters before reaching tol");
        }
        Ok(())
    }

    fn single(&mut self, x: Option<f64>, h: f64) -> Result<()> {
        let s = self.solve(x, h)?;
        let mut t = Table::new(
            "single.csv",
            "x_gamma,h_max,dof,error,eta,eta_gamma,eff_index",
            self.quiet,
        );
        let c = self.columns(&s.report, "single");
        t.push(
            &[
                e8(x.unwrap_or(0.0)),
                e8(s.report.h_max),
                s.report.n_dof.to_string(),
                e8(c.error),
                e8(c.eta),
                e8(c.eta_gamma),
                e8(c.eff),
            ],
            self.quiet,
        );
        t.write(&self.out, &mut self.outcome)?;
        self.write_solution("single", &s)
    }
}

/// Runs the experiment. Reliability violations do not abort the run; they
/// are collected in the outcome.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    let out = options.out.clone().unwrap_or_else(|| config.output.clone());
    std::fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
    let reference = match &config.reference {
        Some(prefix) => {
            let r: Solution = load_reference(&prefix.with_extension("mesh"), &prefix.with_extension("field"))
                .with_context(|| format!("loading reference {}", prefix.display()))?;
            let (a, b) = (&r.geometry, &config.geometry);
            let same = [a.l - b.l, a.r - b.r, a.w - b.w, a.l_out - b.l_out, a.u_av - b.u_av]
                .iter()
                .all(|d| d.abs() <= 1e-12 * (1.0 + b.l));
            anyhow::ensure!(same, "reference {} was computed for another channel", prefix.display());
            Some(r)
        }
        None => None,
    };
    let mut runner = Runner {
        config,
        out,
        quiet: options.quiet,
        reference,
        outcome: RunOutcome::default(),
    };
    match &config.kind {
        RunKind::Reference { h, grading } => runner.reference_run(*h, *grading)?,
        RunKind::SweepInterface { h, x_gamma } => runner.sweep_interface(*h, x_gamma)?,
        RunKind::SweepMesh { x_gamma, h } => runner.sweep_mesh(*x_gamma, h)?,
        RunKind::Adaptive { config: c, x_gamma } => runner.adaptive(c, *x_gamma)?,
        RunKind::Single { x_gamma, h } => runner.single(*x_gamma, *h)?,
    }
    Ok(runner.outcome)
}
