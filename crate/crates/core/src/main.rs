//! Batch CLI: runs scenario files or named benchmark presets, writing the
//! force-displacement history, per-step records, VTK snapshots, and an
//! end-of-run summary into a run directory.
//!
//! Exit codes: 0 success, 1 benchmark expectations missed, 2 configuration
//! error, 3 file error, 4 solver abort. A solver abort keeps the partial
//! outputs and records the reason in `summary.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use esfrac::bench::{self, CurveMetrics};
use esfrac::io::{write_deformed_vtk, write_vtk, CsvWriter, RecordWriter, RunSummary};
use esfrac::scenario::{
    self, finest_element_size, parse_scenario, scenario_from_table, scenario_to_table, Scenario,
    Tier,
};
use esfrac::solver::{run_simulation, RunOutcome, Simulation, StopReason};

#[derive(Parser)]
#[command(name = "esfrac", version, about = "Finite-strain phase-field fracture on edge-smoothed triangles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its outputs to the run directory
    Run {
        /// Scenario TOML file (may reference a preset)
        scenario: PathBuf,
        /// Zero wall-clock fields so reruns are byte-identical
        #[arg(long)]
        deterministic: bool,
        /// Run directory (default: the scenario's output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write VTK snapshots every N accepted steps (0 disables)
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run a benchmark preset and check it against stored expectations
    Bench {
        /// Preset name: double_edge_notch, central_crack_slab, holed_panel,
        /// interface_strip
        preset: String,
        /// Parameter scale: desk (minutes) or full (published resolution)
        #[arg(long, default_value = "desk")]
        tier: String,
        /// Override a scenario key, e.g. --set loading.target=40
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Zero wall-clock fields so reruns are byte-identical
        #[arg(long)]
        deterministic: bool,
        /// Run directory (default: out/bench_<preset>_<tier>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write VTK snapshots every N accepted steps (0 disables)
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Print the contents of a mesh exchange file
    MeshInfo {
        /// Mesh file in the plain-text exchange format
        mesh: PathBuf,
    },
}

const EXIT_BENCH_MISS: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_FILE: i32 = 3;
const EXIT_SOLVER: i32 = 4;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    fn file(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_FILE, message: message.into() }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, deterministic, out, snapshot_every } => {
            cmd_run(&scenario, deterministic, out, snapshot_every)
        }
        Command::Bench { preset, tier, set, deterministic, out, snapshot_every } => {
            cmd_bench(&preset, &tier, &set, deterministic, out, snapshot_every)
        }
        Command::MeshInfo { mesh } => cmd_mesh_info(&mesh),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn cmd_run(
    path: &Path,
    deterministic: bool,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::file(format!("{}: {e}", path.display())))?;
    let mut scenario = parse_scenario(&text).map_err(|e| CliError::config(e.to_string()))?;
    apply_output_flags(&mut scenario, out, snapshot_every);
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let (outcome, _) = execute(&scenario, base_dir, deterministic)?;
    Ok(match outcome {
        ExecOutcome::Finished(..) => 0,
        ExecOutcome::Aborted => EXIT_SOLVER,
    })
}

fn cmd_bench(
    preset: &str,
    tier: &str,
    set: &[String],
    deterministic: bool,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
) -> Result<i32, CliError> {
    let tier: Tier = tier.parse().map_err(CliError::config)?;
    let tier_name = if tier == Tier::Desk { "desk" } else { "full" };
    let base = Scenario::preset_tier(preset, tier).map_err(|e| CliError::config(e.to_string()))?;

    let mut table = scenario_to_table(&base);
    for pair in set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set needs KEY=VALUE, got '{pair}'")))?;
        scenario::set_path(&mut table, key, value)
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let mut scenario = scenario_from_table(table).map_err(|e| CliError::config(e.to_string()))?;

    let default_dir = PathBuf::from(format!("out/bench_{preset}_{tier_name}"));
    apply_output_flags(&mut scenario, Some(out.unwrap_or(default_dir)), snapshot_every);

    let (outcome, run_dir) = execute(&scenario, Path::new("."), deterministic)?;
    let (records, stop) = match &outcome {
        ExecOutcome::Finished(run) => (&run.records, run.stop),
        ExecOutcome::Aborted => return Ok(EXIT_SOLVER),
    };

    let expectations =
        bench::builtin_expectations(preset, tier).map_err(|e| CliError::config(e.to_string()))?;
    let metrics = CurveMetrics::from_records(records, stop)
        .ok_or_else(|| CliError::config("run produced no accepted steps"))?;
    let results = bench::evaluate(&expectations, &metrics);

    let mut report = String::new();
    report.push_str(&format!("benchmark {preset} ({tier_name} tier)\n"));
    report.push_str(&format!("provenance: {}\n\n", expectations.provenance.trim()));
    for r in &results {
        report.push_str(&format!("{r}\n"));
    }
    print!("\n{report}");
    std::fs::write(run_dir.join("report.txt"), &report)
        .map_err(|e| CliError::file(format!("report.txt: {e}")))?;

    Ok(if bench::all_pass(&results) { 0 } else { EXIT_BENCH_MISS })
}

fn apply_output_flags(
    scenario: &mut Scenario,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
) {
    if let Some(dir) = out {
        scenario.output.dir = dir.display().to_string();
    }
    if let Some(n) = snapshot_every {
        scenario.output.snapshot_every = n;
    }
}

enum ExecOutcome {
    Finished(RunOutcome),
    /// The solver gave up; the error is already on stderr and in `summary.json`.
    Aborted,
}

/// Runs a resolved scenario: creates the run directory, streams CSV/records/
/// snapshots, and writes `summary.json` whether the run finishes or aborts.
fn execute(
    scenario: &Scenario,
    base_dir: &Path,
    deterministic: bool,
) -> Result<(ExecOutcome, PathBuf), CliError> {
    let run_dir = PathBuf::from(&scenario.output.dir);
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::file(format!("{}: {e}", run_dir.display())))?;

    let resolved = toml::to_string_pretty(scenario)
        .map_err(|e| CliError::config(format!("serializing resolved scenario: {e}")))?;
    std::fs::write(run_dir.join("scenario.resolved.toml"), resolved)
        .map_err(|e| CliError::file(format!("scenario.resolved.toml: {e}")))?;

    let mut sim: Simulation = scenario
        .build(base_dir)
        .map_err(|e| CliError::config(e.to_string()))?;

    println!(
        "scenario {}: {} elements, {} nodes",
        scenario.name,
        sim.mesh.elements.len(),
        sim.mesh.nodes.len()
    );
    if let (Some(h0), Some(hf)) = (scenario.initial_spacing(), scenario.target_fine_size()) {
        println!("spacing {h0} mm, fine-size target {hf:.6} mm at level cap {}", scenario.adaptivity.max_level);
    }

    let mut csv = CsvWriter::create(&run_dir.join("history.csv"))
        .map_err(|e| CliError::file(e.to_string()))?;
    let mut records = RecordWriter::create(&run_dir.join("records.jsonl"), deterministic)
        .map_err(|e| CliError::file(e.to_string()))?;

    let snapshot_every = scenario.output.snapshot_every;
    let mut io_error: Option<String> = None;
    let clock = Instant::now();

    let outcome = {
        let io_error = &mut io_error;
        let run_dir = run_dir.clone();
        run_simulation(&mut sim, |record, mesh, state| {
            let mut push = || -> Result<(), esfrac::io::IoError> {
                csv.append(record)?;
                records.append(record)?;
                if snapshot_every > 0 && record.step % snapshot_every == 0 {
                    let title = format!("step {}", record.step);
                    let stem = format!("snap_{:06}", record.step);
                    write_vtk(&run_dir.join(format!("{stem}.vtk")), mesh, &state.u, &state.phi, &title)?;
                    write_deformed_vtk(
                        &run_dir.join(format!("{stem}_deformed.vtk")),
                        mesh,
                        &state.u,
                        &state.phi,
                        &title,
                    )?;
                }
                Ok(())
            };
            if let (Err(e), None) = (push(), io_error.as_ref()) {
                *io_error = Some(e.to_string());
            }
            println!(
                "step {:4}  u = {:9.4} mm  F = {:10.5} N/mm  {} elements  {} sweeps",
                record.step,
                record.displacement_mm,
                record.force_n_per_mm,
                record.elements,
                record.staggered_iters
            );
        })
    };

    if let Some(e) = io_error {
        return Err(CliError::file(e));
    }

    let wall_ms_total = if deterministic { 0 } else { clock.elapsed().as_millis() as u64 };
    let fine_achieved = Some(finest_element_size(&sim.mesh));

    let exec = match outcome {
        Ok(run) => {
            if snapshot_every > 0 {
                let title = "final state".to_string();
                let state = &run.state;
                write_vtk(&run_dir.join("final.vtk"), &sim.mesh, &state.u, &state.phi, &title)
                    .map_err(|e| CliError::file(e.to_string()))?;
                write_deformed_vtk(
                    &run_dir.join("final_deformed.vtk"),
                    &sim.mesh,
                    &state.u,
                    &state.phi,
                    &title,
                )
                .map_err(|e| CliError::file(e.to_string()))?;
            }
            let last = run.records.last();
            let summary = RunSummary {
                scenario: scenario.name.clone(),
                stop: match run.stop {
                    StopReason::TargetReached => "target_reached".to_string(),
                    StopReason::FullFracture => "full_fracture".to_string(),
                },
                error: None,
                steps: run.records.len(),
                peak_force_n_per_mm: sim.report_scale * run.peak_force,
                failure_displacement_mm: match run.stop {
                    StopReason::FullFracture => last.map(|r| r.displacement_mm),
                    StopReason::TargetReached => None,
                },
                final_displacement_mm: last.map(|r| r.displacement_mm).unwrap_or(0.0),
                final_elements: sim.mesh.elements.len(),
                fine_size_target: scenario.target_fine_size(),
                fine_size_achieved: fine_achieved,
                wall_ms_total,
            };
            summary.write(&run_dir.join("summary.json")).map_err(|e| CliError::file(e.to_string()))?;
            println!(
                "stop: {} at u = {:.4} mm | peak force {:.5} N/mm | {} elements | fine size {:.6} mm | wall {:.1} s",
                summary.stop,
                summary.final_displacement_mm,
                summary.peak_force_n_per_mm,
                summary.final_elements,
                fine_achieved.unwrap_or(f64::NAN),
                clock.elapsed().as_secs_f64()
            );
            ExecOutcome::Finished(run)
        }
        Err(e) => {
            let summary = RunSummary {
                scenario: scenario.name.clone(),
                stop: "error".to_string(),
                error: Some(e.to_string()),
                steps: 0,
                peak_force_n_per_mm: 0.0,
                failure_displacement_mm: None,
                final_displacement_mm: sim.loading.load,
                final_elements: sim.mesh.elements.len(),
                fine_size_target: scenario.target_fine_size(),
                fine_size_achieved: fine_achieved,
                wall_ms_total,
            };
            summary.write(&run_dir.join("summary.json")).map_err(|e| CliError::file(e.to_string()))?;
            eprintln!("run aborted: {e} (partial outputs kept in {})", run_dir.display());
            ExecOutcome::Aborted
        }
    };
    Ok((exec, run_dir))
}

fn cmd_mesh_info(path: &Path) -> Result<i32, CliError> {
    let mesh = esfrac::io::read_mesh(path).map_err(|e| CliError::file(e.to_string()))?;
    let boundary_edges = mesh.edges.iter().filter(|e| e.is_boundary).count();
    println!("mesh {}", path.display());
    println!(
        "  {} nodes, {} elements, {} edges ({} boundary)",
        mesh.nodes.len(),
        mesh.elements.len(),
        mesh.edges.len(),
        boundary_edges
    );
    println!("  area {:.6}, min angle {:.2} deg", mesh.total_area(), mesh.min_angle_deg());
    println!("  finest element size {:.6}", finest_element_size(&mesh));
    let levels: Vec<String> = mesh
        .level_histogram()
        .into_iter()
        .map(|(level, count)| format!("{level}: {count}"))
        .collect();
    println!("  levels: {{{}}}", levels.join(", "));
    let groups = mesh.boundary_groups();
    if groups.is_empty() {
        println!("  no boundary groups");
    } else {
        for (name, count) in groups {
            println!("  group {name}: {count} nodes");
        }
    }
    let tagged = mesh.elements.iter().filter(|e| e.region_tag != 0).count();
    if tagged > 0 {
        println!("  {tagged} elements in tagged regions");
    }
    Ok(0)
}
