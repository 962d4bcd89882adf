//! Stage execution for `dilate-forge run`.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use dilate_core::dilation::{
    apply_cutoff, diagnose_spec, dilate, DiagnoseOptions, DilationOptions, DilationPath,
};
use dilate_core::generators::{
    evolve_state_master, presets, propagate_channel, PropagationOptions, StatePath, TimeGrid,
};
use dilate_core::linalg::unitarity_residual;
use dilate_core::transforms::{
    perturbative_pipeline, rescale_time, PerturbOptions, PerturbationSpec, RescaleOptions,
};
use dilate_core::verify::figures::{fig2_experiment, Fig2Options};
use dilate_core::verify::fixtures::fig3_dataset;
use dilate_core::verify::{compare_paths, evolve_dilated, EvolveOptions, SampledPath};

use crate::config::{Stage, Validated};
use crate::error::CliError;
use crate::output::{Manifest, OutputDir, StageTiming, Table};

#[derive(Serialize)]
struct DilationSidecar {
    system_dim: usize,
    ancilla_dim: usize,
    rank: usize,
    basis: &'static str,
    ancilla_state: &'static str,
    convention: String,
    first_defined_index: usize,
    first_defined_time: f64,
    divergent_at_start: bool,
    crossings: usize,
    max_unitarity_residual: f64,
    max_anti_hermitian_residual: f64,
    max_hamiltonian_norm: f64,
    completion_constant: f64,
    cutoff: Option<CutoffSidecar>,
    perturbation: Option<PerturbationSidecar>,
}

#[derive(Serialize)]
struct CutoffSidecar {
    c: f64,
    mode: dilate_core::dilation::CutoffMode,
    clamped_points: usize,
    window: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct PerturbationSidecar {
    delta: f64,
    compatibility_residual: f64,
    max_null_weight: f64,
}

#[derive(Serialize)]
struct StatesSidecar {
    dim: usize,
    start_index: usize,
    start_time: f64,
    reunitarizations: usize,
}

#[derive(Serialize)]
struct RescaleSidecar {
    h0: f64,
    anchor_index: usize,
    final_tau: f64,
    max_unitary_residual: f64,
}

#[derive(Serialize)]
struct Fig2Sidecar<'a> {
    gamma: f64,
    rate_scale: f64,
    cutoffs: &'a [f64],
    max_deviation: &'a [f64],
    monotone: bool,
    fits: &'a [dilate_core::verify::figures::ShortTimeFit],
}

#[derive(Serialize)]
struct Fig3Sidecar {
    gamma: f64,
    omega0: f64,
    g_peak_time: f64,
    g_peak_value: f64,
}

struct Runner<'a> {
    v: &'a Validated,
    out: OutputDir,
    warnings: Vec<String>,
    timings: Vec<StageTiming>,
    path: Option<DilationPath>,
    simulated: Option<(usize, StatePath)>,
}

/// Run every stage and write the manifest, also when a stage fails.
pub fn run(v: &Validated, out_dir: &Path) -> Result<Manifest, CliError> {
    let out = OutputDir::create(out_dir, &v.config.output.formats)?;
    let mut runner = Runner {
        v,
        out,
        warnings: Vec::new(),
        timings: Vec::new(),
        path: None,
        simulated: None,
    };
    let mut failure = None;
    for &stage in &v.stages {
        let started = Instant::now();
        let result = runner.stage(stage);
        runner.timings.push(StageTiming {
            stage: stage.name(),
            seconds: started.elapsed().as_secs_f64(),
        });
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: v.hash.clone(),
        stages: v.stages.iter().map(|s| s.name()).collect(),
        implied_stages: v.implied.iter().map(|s| s.name()).collect(),
        timings: runner.timings.clone(),
        warnings: runner.warnings.clone(),
        outputs: runner.out.written().to_vec(),
        exit_code: failure.as_ref().map_or(0, CliError::exit_code),
        error: failure.as_ref().map(ToString::to_string),
    };
    runner.out.json("manifest", &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

impl Runner<'_> {
    fn stage(&mut self, stage: Stage) -> Result<(), CliError> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::Diagnose => self.diagnose(),
            Stage::Dilate => self.dilate(),
            Stage::Simulate => self.simulate(),
            Stage::Compare => self.compare(),
            Stage::Rescale => self.rescale(),
            Stage::Figures => self.figures(),
        }
    }

    fn full_spec(&self) -> Result<dilate_core::generators::LindbladSpec, CliError> {
        match &self.v.perturbation {
            Some((l1, delta)) => self
                .v
                .spec
                .plus(&l1.scaled(*delta))
                .map_err(|e| CliError::from_core("compare", e)),
            None => Ok(self.v.spec.clone()),
        }
    }

    fn diagnose(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "diagnose";
        if self.v.grid.t_start != 0.0 {
            return Err(CliError::Validation(
                "stage 'diagnose' needs a grid starting at t = 0".into(),
            ));
        }
        let report = diagnose_spec(&self.full_spec()?, &self.v.grid, DiagnoseOptions::default())
            .map_err(|e| CliError::from_core(STAGE, e))?;
        if report.flagged_for_review {
            self.warnings.push(
                "diagnose: eigenvalue and generator tests disagree; flagged for review".into(),
            );
        }
        for drop in &report.rank_drop_times {
            self.warnings.push(format!(
                "diagnose: Kraus rank drop of track {} at t = {}",
                drop.track, drop.t
            ));
        }
        self.out.json("diagnosis", &report)
    }

    fn dilate(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "dilate";
        let v = self.v;
        let (dilation, perturbation, mut path) = match &v.perturbation {
            Some((l1, delta)) => {
                let p = PerturbationSpec::new(v.spec.clone(), l1.clone(), *delta)
                    .map_err(|e| CliError::from_core(STAGE, e))?;
                let r = perturbative_pipeline(
                    &p,
                    &v.grid,
                    &DilationOptions::default(),
                    PerturbOptions::default(),
                )
                .map_err(|e| CliError::from_core(STAGE, e))?;
                let side = PerturbationSidecar {
                    delta: *delta,
                    compatibility_residual: r.dilation.compatibility_residual,
                    max_null_weight: r.kraus1.max_null_weight,
                };
                let path = r.combined_path();
                (r.base, Some(side), path)
            }
            None => {
                let family = propagate_channel(&v.spec, &v.grid, PropagationOptions::default())
                    .map_err(|e| CliError::from_core(STAGE, e))?;
                let d = dilate(&family, &DilationOptions::default())
                    .map_err(|e| CliError::from_core(STAGE, e))?;
                let path = d.path.clone();
                (d, None, path)
            }
        };
        for crossing in &dilation.track.crossings {
            self.warnings.push(format!(
                "dilate: eigenvalue crossing of tracks {:?} at t = {}",
                crossing.tracks, crossing.t
            ));
        }
        let cutoff = match &v.cutoff {
            Some(policy) => {
                let r = apply_cutoff(&path, policy).map_err(|e| CliError::from_core(STAGE, e))?;
                if let Some((a, b)) = r.window {
                    self.warnings.push(format!(
                        "dilate: cutoff C = {} clamps H on [{a}, {b}]",
                        policy.c
                    ));
                }
                let side = CutoffSidecar {
                    c: policy.c,
                    mode: policy.mode,
                    clamped_points: r.clamped.len(),
                    window: r.window,
                };
                path = r.path;
                Some(side)
            }
            None => None,
        };

        let fd = path.first_defined;
        let n = path.total_dim();
        let mut h = Table::for_matrices("h", n);
        let mut u = Table::for_matrices("u", n);
        for (k, t) in path.grid.times().into_iter().enumerate() {
            if k >= fd {
                h.push_matrix(t, &path.hamiltonians[k]);
            }
            u.push_matrix(t, &path.unitaries[k]);
        }
        self.out.table("hamiltonian", &h)?;
        self.out.table("unitary", &u)?;

        let convention = match &v.config.system.preset {
            Some(name) => presets::catalog()
                .into_iter()
                .find(|p| p.name == name)
                .map(|p| p.convention.to_string()),
            None => None,
        }
        .unwrap_or_else(|| "custom Lindbladian as given".into());
        let dt = path.grid.dt();
        let sidecar = DilationSidecar {
            system_dim: path.system_dim,
            ancilla_dim: path.ancilla_dim,
            rank: dilation.track.rank(),
            basis: "system ⊗ ancilla, basis index i·R + k",
            ancilla_state: "|0⟩⟨0|",
            convention,
            first_defined_index: fd,
            first_defined_time: path.grid.time(fd),
            divergent_at_start: dilation.divergent_at_start,
            crossings: dilation.track.crossings.len(),
            max_unitarity_residual: path
                .unitaries
                .iter()
                .map(unitarity_residual)
                .fold(0.0, f64::max),
            max_anti_hermitian_residual: path.anti_hermitian_residual[fd..]
                .iter()
                .copied()
                .fold(0.0, f64::max),
            max_hamiltonian_norm: path.max_hamiltonian_norm(),
            completion_constant: dilation
                .completion_steps
                .iter()
                .skip(fd)
                .copied()
                .fold(0.0, f64::max)
                / dt,
            cutoff,
            perturbation,
        };
        self.out.json("dilation", &sidecar)?;
        self.path = Some(path);
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "simulate";
        let path = self.path.as_ref().expect("dilate runs before simulate");
        let p = &self.v.config.pipeline;
        let start = match p.simulate_from {
            Some(t) => path.grid.index_at_or_after(t).unwrap_or(path.grid.n_steps),
            None => path.first_defined,
        };
        if start < path.first_defined {
            return Err(CliError::Validation(format!(
                "stage 'simulate': H diverges before t = {}; set pipeline.simulate_from later or add a cutoff",
                path.grid.time(path.first_defined)
            )));
        }
        if start >= path.grid.n_steps {
            return Err(CliError::Validation(
                "stage 'simulate': the simulation window is empty".into(),
            ));
        }
        let tail = path
            .grid
            .tail_from(start)
            .map_err(|e| CliError::from_core(STAGE, e))?;
        let opts = EvolveOptions {
            initial_unitary: Some(path.unitaries[start].clone()),
            substeps: p.substeps,
            ..Default::default()
        };
        let sim = evolve_dilated(&SampledPath::new(path), &self.v.initial_state, &tail, &opts)
            .map_err(|e| CliError::from_core(STAGE, e))?;
        if sim.reunitarizations > 0 {
            self.warnings.push(format!(
                "simulate: {} re-unitarization events",
                sim.reunitarizations
            ));
        }
        let d = self.v.initial_state.dim();
        let mut table = Table::for_matrices("rho", d);
        for (k, s) in sim.reduced.states.iter().enumerate() {
            table.push_matrix(tail.time(k), s);
        }
        self.out.table("reduced_states", &table)?;
        let side = StatesSidecar {
            dim: d,
            start_index: start,
            start_time: tail.t_start,
            reunitarizations: sim.reunitarizations,
        };
        self.out.json("reduced_states", &side)?;
        self.simulated = Some((start, sim.reduced));
        Ok(())
    }

    fn compare(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "compare";
        let (_, sim) = self
            .simulated
            .as_ref()
            .expect("simulate runs before compare");
        let p = &self.v.config.pipeline;
        let oracle = evolve_state_master(&self.full_spec()?, &self.v.initial_state, &sim.grid)
            .map_err(|e| CliError::from_core(STAGE, e))?;
        let from = p.compare_from.unwrap_or(sim.grid.t_start);
        let report = compare_paths(sim, &oracle, from, p.tolerance)
            .map_err(|e| CliError::from_core(STAGE, e))?;
        self.out.json("comparison", &report)?;
        let mut table = Table::new(vec!["t".into(), "trace_distance".into()]);
        for (t, d) in report.times.iter().zip(&report.distances) {
            table.push(vec![*t, *d]);
        }
        self.out.table("comparison", &table)?;
        if !report.passed {
            return Err(CliError::Tolerance {
                stage: STAGE,
                message: format!(
                    "max trace distance {:e} at t = {} exceeds tolerance {:e}",
                    report.max_distance, report.argmax_t, report.tolerance
                ),
            });
        }
        Ok(())
    }

    fn rescale(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "rescale";
        let path = self.path.as_ref().expect("dilate runs before rescale");
        let b = &self.v.config.pipeline.rescale;
        let opts = RescaleOptions {
            h0: b.h0,
            factor_tol: b.factor_tol,
            anchor_time: b.anchor_time,
        };
        let m = rescale_time(path, opts).map_err(|e| CliError::from_core(STAGE, e))?;
        let mut table = Table::new(vec!["t".into(), "h".into(), "tau".into()]);
        for (k, t) in m.grid.times().into_iter().enumerate() {
            table.push(vec![t, m.h[k], m.tau[k]]);
        }
        self.out.table("rescale", &table)?;
        let side = RescaleSidecar {
            h0: m.h0,
            anchor_index: m.anchor_index,
            final_tau: m.final_tau(),
            max_unitary_residual: m.max_unitary_residual,
        };
        self.out.json("rescale", &side)
    }

    fn figures(&mut self) -> Result<(), CliError> {
        const STAGE: &str = "figures";
        let f = &self.v.config.pipeline.figures;
        let cutoffs: Vec<f64> = f.cutoffs.iter().map(|c| c * f.gamma).collect();
        let fig2 = fig2_experiment(f.gamma, &cutoffs, &Fig2Options::default())
            .map_err(|e| CliError::from_core(STAGE, e))?;
        let mut table = Table::new(vec![
            "cutoff".into(),
            "t".into(),
            "survival".into(),
            "exact".into(),
        ]);
        for curve in std::iter::once(&fig2.exact).chain(&fig2.curves) {
            let c = curve.cutoff.unwrap_or(f64::INFINITY);
            for k in 0..curve.times.len() {
                table.push(vec![c, curve.times[k], curve.survival[k], curve.exact[k]]);
            }
        }
        self.out.table("fig2", &table)?;
        if !fig2.monotone {
            self.warnings.push(
                "figures: deviation from the exact curve does not shrink monotonically with C"
                    .into(),
            );
        }
        for fit in fig2.fits.iter().filter(|fit| !fit.quadratic_ok) {
            self.warnings.push(format!(
                "figures: short-time decay for C = {} is not quadratic",
                fit.cutoff
            ));
        }
        let side = Fig2Sidecar {
            gamma: fig2.gamma,
            rate_scale: fig2.rate_scale,
            cutoffs: &fig2.cutoffs,
            max_deviation: &fig2.max_deviation,
            monotone: fig2.monotone,
            fits: &fig2.fits,
        };
        self.out.json("fig2", &side)?;

        let grid = TimeGrid::new(0.0, 5.0 / f.gamma, f.fig3_steps)
            .map_err(|e| CliError::from_core(STAGE, e))?;
        let fig3 =
            fig3_dataset(f.gamma, f.omega0, &grid).map_err(|e| CliError::from_core(STAGE, e))?;
        let mut table = Table::new(vec!["t".into(), "h0_re".into(), "f_re".into(), "g".into()]);
        for k in 0..fig3.times.len() {
            table.push(vec![fig3.times[k], fig3.h0_re[k], fig3.f_re[k], fig3.g[k]]);
        }
        self.out.table("fig3", &table)?;
        let (g_peak_time, g_peak_value) = fig3.g_peak();
        self.out.json(
            "fig3",
            &Fig3Sidecar {
                gamma: f.gamma,
                omega0: f.omega0,
                g_peak_time,
                g_peak_value,
            },
        )
    }
}
