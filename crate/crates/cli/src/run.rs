use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ehrenfest_core::io::{write_evolution_csv, write_scaling_csv, write_scaling_json, write_snapshot};
use ehrenfest_core::propagators::SplitOperator;
use ehrenfest_core::quantum::uniform_lattice;
use ehrenfest_core::{
    coherent_fit, dilation_record, evolve_split_operator, hamiltonian_value, hbar_sweep, husimi, integrate_flow,
    moments, sample_positions, separatrix, step_count, DilatedPacket, EnvelopeSpec,
    Error, EvolutionRecord, Polynomial, SweepDiagnostic, SweepExperiment, Wavefunction,
};
use serde_json::json;

use crate::config::{Diagnostic, ExperimentConfig};
use crate::manifest::{RunManifest, Status};
use crate::validate::{check, Mode, Plan};
use crate::CliError;

/// Husimi lattice nodes per axis.
const HUSIMI_NODES: usize = 64;
/// Husimi lattice half-width in units of the larger of the state's spread and `√ℏ`.
const HUSIMI_HALF_WIDTH: f64 = 4.0;
/// Tube radius in units of `√ℏ`.
const TUBE_RADIUS: f64 = 5.0;
const SEPARATRIX_SAMPLES: usize = 401;

struct Output<'a> {
    dir: &'a Path,
    manifest: &'a mut RunManifest,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let path = self.path(name);
        let io = |e| CliError::io(path.display().to_string(), e);
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(w, "{header}").map_err(io)?;
        for row in rows {
            writeln!(w, "{row}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path.display().to_string(), e))?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }

    fn core(&mut self, name: &str, write: impl FnOnce(&Path) -> ehrenfest_core::Result<()>) -> Result<(), CliError> {
        write(&self.path(name))?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))
}

/// Runs `body`, then writes the manifest with the outcome.
fn with_manifest(
    command: &str,
    config: &ExperimentConfig,
    body: impl FnOnce(&mut Output) -> Result<(), CliError>,
) -> Result<RunManifest, CliError> {
    let dir = config.output_dir.as_path();
    prepare_dir(dir)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(command, config);
    let result = body(&mut Output { dir, manifest: &mut manifest });
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            manifest.write(dir)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = Status::Failed;
            manifest.error = Some(e.to_string());
            manifest.exit_code = Some(e.exit_code());
            if let Err(write_err) = manifest.write(dir) {
                log::error!("could not record the failure: {write_err}");
            }
            Err(e)
        }
    }
}

/// Executes one scenario at a single `ℏ` and writes the requested diagnostics.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    check(config, Mode::Run)?;
    let plan = Plan::new(config, config.hbar.values()[0])?;
    with_manifest("run", config, |out| execute(config, &plan, out))
}

fn execute(config: &ExperimentConfig, plan: &Plan, out: &mut Output) -> Result<(), CliError> {
    let setup = plan.setup;
    let hbar = setup.hbar;
    let dt = setup.dt.min(plan.t_final);
    let (n, h) = step_count(plan.t_final, dt);
    let stride = config.snapshot_stride;
    let wants = |d: Diagnostic| config.diagnostics.contains(&d);

    let packet = DilatedPacket::new(plan.start.q, plan.start.p, EnvelopeSpec::StandardGaussian, hbar)?;
    let step_time = |k: usize| if k == n { plan.t_final } else { k as f64 * h };
    let record = match &plan.potential {
        None => {
            let times: Vec<f64> = (0..=n).map(step_time).collect();
            dilation_record(&packet, &times, stride, setup.grid)?
        }
        Some(potential) => evolve_split_operator(&setup.coherent_state(plan.start)?, potential, h, n, stride)?,
    };
    let classical = integrate_flow(&plan.system, plan.start, plan.t_final, dt)?.points;

    out.core("evolution.csv", |p| write_evolution_csv(p, &record, usize::MAX))?;
    out.manifest.summary("steps", n);
    out.manifest.summary("t_final", plan.t_final);
    out.manifest.summary("final_norm", record.norms.last().copied());

    if config.write_snapshots {
        for snap in &record.snapshots {
            out.core(&format!("snap_{}.csv", snap.step), |p| write_snapshot(p, &snap.state))?;
        }
    }

    if wants(Diagnostic::Moments) {
        let rows = record
            .snapshots
            .iter()
            .map(|s| Ok((s.time, moments(&s.state)?)))
            .collect::<ehrenfest_core::Result<Vec<_>>>()?;
        out.csv(
            "moments.csv",
            "t,mean_q,mean_p,delta_q,delta_p,product",
            rows.iter()
                .map(|(t, m)| format!("{t},{},{},{},{},{}", m.mean_q, m.mean_p, m.delta_q, m.delta_p, m.product)),
        )?;
        out.manifest.summary("moments", rows.last().map(|r| r.1));
    }

    if wants(Diagnostic::Husimi) {
        for snap in &record.snapshots {
            let psi = snap.state.clone().normalized();
            let m = moments(&psi)?;
            let lattice = |centre: f64, spread: f64| {
                let half = HUSIMI_HALF_WIDTH * spread.max(hbar.sqrt());
                let spacing = 2.0 * half / (HUSIMI_NODES - 1) as f64;
                let mut nodes = uniform_lattice(centre - half, centre + half, spacing);
                nodes.truncate(HUSIMI_NODES);
                nodes
            };
            let field = husimi(&psi, &lattice(m.mean_q, m.delta_q), &lattice(m.mean_p, m.delta_p))?;
            let rows = (0..field.q.len())
                .flat_map(|iq| (0..field.p.len()).map(move |ip| (iq, ip)))
                .map(|(iq, ip)| format!("{},{},{}", field.q[iq], field.p[ip], field.value(iq, ip)))
                .collect::<Vec<_>>();
            out.csv(&format!("husimi_{}.csv", snap.step), "q,p,value", rows)?;
        }
    }

    if wants(Diagnostic::CoherentFit) {
        let mut rows = Vec::with_capacity(record.snapshots.len());
        let mut last = None;
        for snap in &record.snapshots {
            let (fit, status) = match coherent_fit(&snap.state, classical[snap.step]) {
                Ok(fit) => (fit, "converged"),
                Err(Error::OptimizerStalled { best, .. }) => (*best, "stalled"),
                Err(e) => return Err(e.into()),
            };
            rows.push(format!(
                "{},{},{},{},{},{},{},{status}",
                snap.time, fit.center.q, fit.center.p, fit.width.re, fit.width.im, fit.overlap, fit.residual
            ));
            last = Some(json!({ "t": snap.time, "residual": fit.residual, "overlap": fit.overlap, "status": status }));
        }
        out.csv("coherent_fit.csv", "t,q,p,re_w,im_w,overlap,residual,status", rows)?;
        out.manifest.summary("coherent_fit", last);
    }

    if wants(Diagnostic::Egorov) {
        let symbol = Polynomial::new(vec![0.0, 1.0]);
        let series: Vec<(f64, f64)> = record
            .snapshots
            .iter()
            .map(|s| {
                let psi = s.state.clone().normalized();
                let quantum = ehrenfest_core::diagnostics::position_expectation(&psi, &symbol);
                (s.time, (quantum - symbol.eval(classical[s.step].q)).abs())
            })
            .collect();
        out.csv("egorov.csv", "t,error", series.iter().map(|(t, e)| format!("{t},{e}")))?;
        let max = series.iter().map(|s| s.1).fold(0.0, f64::max);
        out.manifest.summary("egorov", json!({ "symbol": "q", "max_error": max, "final_error": series.last().map(|s| s.1) }));
    }

    if wants(Diagnostic::TubeMass) {
        let energy = hamiltonian_value(&plan.system, plan.start);
        let curve = separatrix(&plan.system, energy, SEPARATRIX_SAMPLES)?;
        let radius = TUBE_RADIUS * hbar.sqrt();
        let masses = record
            .snapshots
            .iter()
            .map(|s| Ok((s.time, ehrenfest_core::diagnostics::tube_mass(&s.state, &curve, radius)?)))
            .collect::<ehrenfest_core::Result<Vec<_>>>()?;
        out.csv(
            "tube_mass.csv",
            "t,radius,total,upper,lower",
            masses.iter().map(|(t, m)| format!("{t},{},{},{},{}", m.radius, m.total, m.upper, m.lower)),
        )?;
        out.manifest.summary("tube_mass", json!({ "energy": energy, "final": masses.last().map(|m| m.1) }));
    }

    if wants(Diagnostic::Revivals) {
        let (times, values) = revival_series(plan, &record, &packet, h)?;
        let (a, b) = plan.revival_window;
        let summary = ehrenfest_core::diagnostics::revival_in_series(&times, &values, a, b)?;
        let value = serde_json::to_value(summary).expect("summary serializes");
        out.json("revivals.json", &value)?;
        out.manifest.summary("revivals", value);
    }

    if wants(Diagnostic::MeasurementSamples) {
        let samples = sample_positions(record.final_state(), config.seed, config.sample_count);
        out.csv("samples.csv", "x", samples.iter().map(|x| format!("{x}")))?;
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        out.manifest.summary("measurement_samples", json!({ "count": samples.len(), "seed": config.seed, "mean": mean }));
    }
    Ok(())
}

/// `|⟨ψ⁰, ψᵗ⟩|` over the record plus one step past the end, so that a return
/// at exactly `t_final` has a right neighbour and can register as a peak.
fn revival_series(
    plan: &Plan,
    record: &EvolutionRecord,
    packet: &DilatedPacket,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut times = record.times.clone();
    let mut values = record.autocorrelation_modulus();
    let grid = plan.setup.grid;
    let next: ehrenfest_core::Result<(Wavefunction, Wavefunction)> = match &plan.potential {
        None => packet.sample(grid).and_then(|psi0| Ok((psi0, packet.evolve(plan.t_final + h).sample(grid)?))),
        Some(potential) => {
            let psi0 = plan.setup.coherent_state(plan.start)?;
            let mut amplitudes = record.final_state().amplitudes().to_vec();
            SplitOperator::new(&grid, plan.setup.hbar, potential, h).step(&mut amplitudes);
            Wavefunction::new(grid, plan.setup.hbar, amplitudes).map(|next| (psi0, next))
        }
    };
    match next {
        Ok((psi0, next)) => {
            times.push(plan.t_final + h);
            values.push(psi0.inner_product(&next)?.norm() / psi0.norm_sqr());
        }
        Err(e) => log::warn!("no autocorrelation sample past t_final: {e}"),
    }
    Ok((times, values))
}

fn sweep_diagnostic(d: Diagnostic) -> SweepDiagnostic {
    match d {
        Diagnostic::CoherentFit => SweepDiagnostic::CoherentFitResidual,
        Diagnostic::Egorov => SweepDiagnostic::EgorovError(Polynomial::new(vec![0.0, 1.0])),
        Diagnostic::Moments => SweepDiagnostic::DeltaQ,
        other => unreachable!("{} is rejected by validation", other.name()),
    }
}

/// Runs every requested diagnostic over the `ℏ` list and fits its power law.
pub fn sweep(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    check(config, Mode::Sweep)?;
    let hbars = config.hbar.values();
    let plan = Plan::new(config, hbars[0])?;
    let experiment = SweepExperiment { system: plan.system.clone(), start: plan.start, time: config.time_spec().schedule()? };
    with_manifest("sweep", config, |out| {
        for &d in &config.diagnostics {
            let report = hbar_sweep(&experiment, &hbars, &sweep_diagnostic(d))?;
            let stem = format!("scaling_{}", d.name().replace('-', "_"));
            out.core(&format!("{stem}.csv"), |p| write_scaling_csv(p, &report))?;
            out.core(&format!("{stem}.json"), |p| write_scaling_json(p, &report))?;
            out.manifest.summary(d.name(), json!({ "exponent": report.exponent, "residual": report.residual }));
        }
        Ok(())
    })
}
