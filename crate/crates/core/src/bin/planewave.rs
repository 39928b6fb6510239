#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use planewave::dynamics::{Event, Model};
use planewave::io::{
    csv_headers, ingest_pmu_csv, parse_case, serialize_case, ColumnMap, Emitter, Formats, Plot,
    PlotSeries,
};
use planewave::modal::{
    damping_ratio, eigen_migration, prony_fit, select_order_detailed, Detrend, PronyMode,
    TimeSeries,
};
use planewave::network::{solve_power_flow, DEFAULT_PF_MAX_ITERATIONS, DEFAULT_PF_TOLERANCE};
use planewave::scenarios::{
    calibrate_momentum_constant, compare_models, load_benchmark, measure_rocof,
    momentum_share_sweep, rocof_vs_inertia, sensitivity_sweep, CaseDefinition, FaultProtocol,
    Parameter, SweepOptions, BENCHMARKS,
};
use planewave::{Error, ErrorClass, Result};

const H_GRID: [f64; 7] = [6.0, 4.0, 3.0, 2.15, 1.0, 0.5, 0.1];

#[derive(Parser)]
#[command(
    name = "planewave",
    version,
    about = "Plane-wave power-network dynamics"
)]
struct Cli {
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "PLANEWAVE_OUT",
        default_value = "planewave-out"
    )]
    out: PathBuf,

    /// Comma-separated output formats: csv, summary, svg.
    #[arg(long, global = true, default_value = "csv,summary,svg")]
    formats: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Planewave,
    Classical,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Planewave => Model::PlaneWave,
            ModelArg::Classical => Model::Classical,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a case with its events.
    Simulate {
        /// Case file or benchmark name (wscc9, ne39).
        case: String,
        #[arg(long, value_enum, default_value = "planewave")]
        model: ModelArg,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Parameter sweeps.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Nodal momentum budgets at the operating point.
    Momentum {
        case: String,
        /// Momentum constant; defaults to the case value or the reference calibration.
        #[arg(long, conflicts_with = "calibrate")]
        kappa: Option<f64>,
        /// Calibrate the constant on this case to the given system share.
        #[arg(long)]
        calibrate: Option<f64>,
        /// Inertia constant used for calibration, seconds.
        #[arg(long, default_value_t = 6.0)]
        h_ref: f64,
    },
    /// Prony analysis of one CSV column.
    Prony {
        csv: PathBuf,
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long, conflicts_with = "auto_order")]
        order: Option<usize>,
        #[arg(long)]
        auto_order: bool,
        #[arg(long, default_value_t = 0.999)]
        energy: f64,
    },
    /// Eigenvalue migration between two measurement locations.
    Migrate {
        csv_send: PathBuf,
        csv_recv: PathBuf,
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 0.999)]
        energy: f64,
    },
    /// Plane-wave against classical model on the case disturbance.
    Compare {
        case: String,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args, Clone)]
struct SignalArgs {
    /// Timestamp column; defaults to the first column.
    #[arg(long)]
    time_column: Option<String>,
    /// Signal column; defaults to the second column.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Inertia constants, seconds.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    /// Load-step size in MW replacing the case disturbance size.
    #[arg(long)]
    dp: Option<f64>,
}

#[derive(Subcommand)]
enum SweepKind {
    /// ROCOF against inertia for both models.
    Rocof {
        case: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Electromagnetic momentum share against inertia.
    Share {
        case: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// One parameter varied under a cleared branch fault.
    Sensitivity {
        case: String,
        /// d_omega, d_v_proxy, p_headroom, m_omega, t_v, x_scale, r_scale.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Generator index (case order) to vary; all when omitted.
        #[arg(long)]
        target: Option<usize>,
        /// Faulted branch id; defaults to the most loaded branch.
        #[arg(long)]
        fault_branch: Option<usize>,
        /// Fault duration, seconds.
        #[arg(long, default_value_t = 0.0083)]
        clear: f64,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
}

fn load_case(spec: &str) -> Result<(CaseDefinition, Vec<u8>)> {
    if BENCHMARKS.contains(&spec) {
        let c = load_benchmark(spec)?;
        let bytes = serialize_case(&c)?.into_bytes();
        return Ok((c, bytes));
    }
    let path = Path::new(spec);
    if !path.exists() && !spec.contains('.') && !spec.contains('/') {
        return Err(Error::UnknownBenchmark {
            name: spec.to_string(),
            available: BENCHMARKS.join(", "),
        });
    }
    let c = parse_case(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok((c, bytes))
}

fn inputs_digest(parts: &[&[u8]], args: &[String]) -> Vec<u8> {
    let mut v = Vec::new();
    for p in parts {
        v.extend_from_slice(p);
        v.push(0);
    }
    for a in args {
        v.extend_from_slice(a.as_bytes());
        v.push(0);
    }
    v
}

fn disturbance(case: &CaseDefinition, dp_mw: Option<f64>) -> Result<Event> {
    let ev = case
        .default_disturbance()
        .cloned()
        .ok_or_else(|| Error::Argument(format!("case '{}' has no load_step event", case.name)))?;
    Ok(match (ev, dp_mw) {
        (Event::LoadStep { time, bus, dq, .. }, Some(mw)) => Event::LoadStep {
            time,
            bus,
            dp: mw / case.network.base_mva,
            dq,
        },
        (ev, _) => ev,
    })
}

fn default_fault_branch(case: &CaseDefinition) -> Result<usize> {
    let pf = solve_power_flow(
        &case.network,
        DEFAULT_PF_TOLERANCE,
        DEFAULT_PF_MAX_ITERATIONS,
    )?;
    let u = pf.phasors();
    let net = &case.network;
    net.branches
        .iter()
        .map(|br| {
            let (sf, _) = br.end_powers(
                u[net.bus_index(br.from).unwrap()],
                u[net.bus_index(br.to).unwrap()],
            );
            (br.id, sf.norm())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(id, _)| id)
        .ok_or_else(|| Error::Argument("case has no branches".into()))
}

fn frequency_plot(title: &str, traj: &planewave::dynamics::Trajectory, ufls: Option<f64>) -> Plot {
    let f0 = traj.omega_s / (2.0 * std::f64::consts::PI);
    let mut p = Plot::new(title, "time (s)", "frequency (Hz)");
    for (i, bus) in traj.node_buses.iter().enumerate() {
        let y = traj.omega[i]
            .iter()
            .map(|w| f0 + w / (2.0 * std::f64::consts::PI))
            .collect();
        p.series.push(PlotSeries::line(
            format!("bus {bus}"),
            traj.times.clone(),
            y,
        ));
    }
    p.hline = ufls.map(|f| (f, "UFLS".to_string()));
    p
}

fn modes_table(em: &mut Emitter, name: &str, modes: &[PronyMode]) -> Result<()> {
    let header: Vec<String> = [
        "sigma_1_per_s",
        "omega_rad_per_s",
        "frequency_hz",
        "amplitude",
        "phase_rad",
        "energy_fraction",
        "damping_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let col = |f: &dyn Fn(&PronyMode) -> f64| modes.iter().map(f).collect::<Vec<f64>>();
    let cols = [
        col(&|m| m.sigma),
        col(&|m| m.omega),
        col(&|m| m.frequency_hz()),
        col(&|m| m.amplitude),
        col(&|m| m.phase),
        col(&|m| m.energy),
        col(&|m| damping_ratio(m).unwrap_or(f64::NAN)),
    ];
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    em.csv(name, &header, &refs)?;
    Ok(())
}

fn read_signal(path: &Path, sig: &SignalArgs) -> Result<(TimeSeries, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let headers = csv_headers(&text)?;
    let time = sig.time_column.clone().or_else(|| headers.first().cloned());
    let column = sig.column.clone().or_else(|| headers.get(1).cloned());
    let (Some(time), Some(column)) = (time, column) else {
        return Err(Error::Ingestion(
            "CSV needs a time column and a signal column".into(),
        ));
    };
    let data = ingest_pmu_csv(path, &ColumnMap::new(time).column(column.clone(), column))?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    Ok((
        data.series.into_iter().next().expect("one mapped column"),
        bytes,
    ))
}

fn fit_modes(series: &TimeSeries, order: Option<usize>, energy: f64) -> Result<Vec<PronyMode>> {
    let order = match order {
        Some(o) => o,
        None => {
            let sel = select_order_detailed(series, energy, Detrend::Mean)?;
            if !sel.dominant_mode {
                eprintln!(
                    "warning: no dominant mode (top pair holds {:.1} % of the energy)",
                    100.0 * sel.top_pair_energy
                );
            }
            sel.order
        }
    };
    info!("Prony order {order}");
    prony_fit(series, order)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    case: &'a str,
    model: &'a str,
    dt: f64,
    horizon: f64,
    kappa: f64,
    events: &'a [(f64, String)],
    peak_frequency_deviation_hz: f64,
    final_frequency_deviation_hz: Vec<f64>,
    min_bus_voltage_pu: f64,
    rocof: Option<planewave::scenarios::RocofMeasurement>,
}

fn run(cli: Cli) -> Result<()> {
    let formats = Formats::parse(&cli.formats)?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    match cli.command {
        Command::Simulate {
            case,
            model,
            dt,
            horizon,
        } => {
            let (mut c, bytes) = load_case(&case)?;
            if let Some(dt) = dt {
                c.options.dt = dt;
            }
            let horizon = horizon.unwrap_or(c.options.horizon);
            let kappa = c.kappa()?;
            let model: Model = model.into();
            let traj = c.simulate(model, c.setup(kappa), &c.events, horizon)?;
            let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
            em.trajectory(model.name(), &traj)?;
            let two_pi = 2.0 * std::f64::consts::PI;
            let rocof = c
                .default_disturbance()
                .and_then(|e| measure_rocof(&traj, e.time(), c.options.rocof_window).ok());
            let summary = SimulationSummary {
                case: &c.name,
                model: model.name(),
                dt: c.options.dt,
                horizon,
                kappa,
                events: &traj.events,
                peak_frequency_deviation_hz: traj
                    .omega
                    .iter()
                    .flatten()
                    .fold(0.0f64, |m, w| m.max(w.abs()))
                    / two_pi,
                final_frequency_deviation_hz: traj
                    .omega
                    .iter()
                    .map(|s| s.last().unwrap() / two_pi)
                    .collect(),
                min_bus_voltage_pu: traj
                    .bus_v
                    .iter()
                    .flatten()
                    .fold(f64::INFINITY, |m, v| m.min(*v)),
                rocof,
            };
            em.summary("summary.json", &summary)?;
            em.svg(
                "frequency.svg",
                &frequency_plot(
                    &format!("{} ({})", c.name, model.name()),
                    &traj,
                    c.options.ufls_hz,
                ),
            )?;
            let bundle = em.finish()?;
            println!(
                "{} samples written to {} (digest {})",
                traj.len(),
                bundle.dir.display(),
                bundle.digest
            );
        }
        Command::Sweep { kind } => match kind {
            SweepKind::Rocof { case, grid } => {
                let (c, bytes) = load_case(&case)?;
                let ev = disturbance(&c, grid.dp)?;
                let h = grid.h.unwrap_or_else(|| H_GRID.to_vec());
                let kappa = c.kappa()?;
                let pw = rocof_vs_inertia(&c, Model::PlaneWave, &ev, &h, kappa)?;
                let cl = rocof_vs_inertia(&c, Model::Classical, &ev, &h, kappa)?;
                let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
                let header = [
                    "h_s",
                    "rocof_planewave_hz_per_s",
                    "rocof_classical_hz_per_s",
                ]
                .map(String::from);
                em.csv("rocof.csv", &header, &[&h, &pw.rocof_hz, &cl.rocof_hz])?;
                em.summary("rocof.json", &(&pw, &cl))?;
                let plot = Plot::new(
                    format!("ROCOF against inertia, {}", c.name),
                    "H (s)",
                    "ROCOF (Hz/s)",
                )
                .with_series(PlotSeries::line(
                    "plane wave",
                    h.clone(),
                    pw.rocof_hz.clone(),
                ))
                .with_series(PlotSeries::line(
                    "classical",
                    h.clone(),
                    cl.rocof_hz.clone(),
                ));
                em.svg("rocof.svg", &plot)?;
                em.finish()?;
                println!("H (s)   plane wave   classical   (Hz/s)");
                for k in 0..h.len() {
                    println!(
                        "{:6.2}  {:10.5}  {:10.5}",
                        h[k], pw.rocof_hz[k], cl.rocof_hz[k]
                    );
                }
                println!(
                    "plane-wave fit c1/(H + c2): c1 = {:.5}, c2 = {:.5}, R2 = {:.6}",
                    pw.c1, pw.c2, pw.r_squared
                );
            }
            SweepKind::Share { case, grid } => {
                let (c, bytes) = load_case(&case)?;
                let ev = disturbance(&c, grid.dp)?;
                let h = grid.h.unwrap_or_else(|| H_GRID.to_vec());
                let kappa = c.kappa()?;
                let curve = momentum_share_sweep(&c, &h, &ev, kappa)?;
                let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
                let header = [
                    "h_s",
                    "share_analytic_1",
                    "share_empirical_1",
                    "rocof_hz_per_s",
                ]
                .map(String::from);
                em.csv(
                    "share.csv",
                    &header,
                    &[&h, &curve.analytic, &curve.empirical, &curve.rocof_hz],
                )?;
                em.summary("share.json", &curve)?;
                let plot = Plot::new(
                    format!("Electromagnetic momentum share, {}", c.name),
                    "H (s)",
                    "share",
                )
                .with_series(PlotSeries::line(
                    "analytic",
                    h.clone(),
                    curve.analytic.clone(),
                ))
                .with_series(PlotSeries::points(
                    "from ROCOF",
                    h.clone(),
                    curve.empirical.clone(),
                ));
                em.svg("share.svg", &plot)?;
                em.finish()?;
                println!("H (s)   analytic   from ROCOF");
                for k in 0..h.len() {
                    println!(
                        "{:6.2}  {:8.4}  {:8.4}",
                        h[k], curve.analytic[k], curve.empirical[k]
                    );
                }
                println!(
                    "fit a/(bH + a): a = {:.4}, b = {:.4}",
                    curve.fit_a, curve.fit_b
                );
            }
            SweepKind::Sensitivity {
                case,
                param,
                values,
                target,
                fault_branch,
                clear,
                horizon,
            } => {
                let (c, bytes) = load_case(&case)?;
                let parameter = Parameter::parse(&param)
                    .ok_or_else(|| Error::Argument(format!("unknown parameter '{param}'")))?;
                let branch = match fault_branch {
                    Some(b) => b,
                    None => default_fault_branch(&c)?,
                };
                if c.network.branch_index(branch).is_none() {
                    return Err(Error::Argument(format!("branch {branch} does not exist")));
                }
                let fault = FaultProtocol {
                    branch,
                    position: 0.5,
                    time: 1.0,
                    duration: clear,
                    horizon,
                };
                let report = sensitivity_sweep(
                    &c,
                    parameter,
                    &values,
                    &SweepOptions {
                        fault,
                        target,
                        kappa: c.kappa()?,
                    },
                )?;
                let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
                let pick = |f: &dyn Fn(&planewave::scenarios::RunMetrics) -> Option<f64>| {
                    report
                        .rows
                        .iter()
                        .map(|r| r.metrics.as_ref().and_then(f).unwrap_or(f64::NAN))
                        .collect::<Vec<f64>>()
                };
                let cols = [
                    values.clone(),
                    pick(&|m| Some(m.peak_df_hz)),
                    pick(&|m| Some(m.peak_dv_pu)),
                    pick(&|m| Some(m.settling_time)),
                    pick(&|m| m.zeta),
                    report
                        .rows
                        .iter()
                        .map(|r| r.unstable_at.unwrap_or(f64::NAN))
                        .collect(),
                ];
                let header = [
                    "value",
                    "peak_df_hz",
                    "peak_dv_pu",
                    "settling_time_s",
                    "zeta_1",
                    "unstable_at_s",
                ]
                .map(String::from);
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                em.csv("sensitivity.csv", &header, &refs)?;
                em.summary("sensitivity.json", &report)?;
                em.finish()?;
                println!(
                    "{} on branch {} fault, {} s clearing",
                    parameter.name(),
                    branch,
                    clear
                );
                for r in &report.rows {
                    match &r.metrics {
                        Some(m) => println!(
                            "{:8.3}  df {:.5} Hz  dV {:.5} pu  settle {:.3} s  zeta {}",
                            r.value,
                            m.peak_df_hz,
                            m.peak_dv_pu,
                            m.settling_time,
                            m.zeta.map_or("-".into(), |z| format!("{z:.4}"))
                        ),
                        None => println!(
                            "{:8.3}  {}",
                            r.value,
                            r.error.as_deref().unwrap_or("failed")
                        ),
                    }
                }
            }
        },
        Command::Momentum {
            case,
            kappa,
            calibrate,
            h_ref,
        } => {
            let (c, bytes) = load_case(&case)?;
            let kappa = match (kappa, calibrate) {
                (Some(k), _) => k,
                (None, Some(target)) => calibrate_momentum_constant(&c, h_ref, target)?,
                (None, None) => c.kappa()?,
            };
            let (sys, x0) = c.build(c.setup(kappa))?;
            let budgets = sys.budgets(&x0)?;
            let buses: Vec<f64> = sys.generators().iter().map(|g| g.bus as f64).collect();
            let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
            let col = |f: &dyn Fn(&planewave::electromagnetics::MomentumBudget) -> f64| {
                budgets.iter().map(f).collect::<Vec<f64>>()
            };
            let cols = [
                buses,
                col(&|b| b.generator_momentum),
                col(&|b| b.line_momentum),
                col(&|b| b.total),
                col(&|b| b.em_share),
            ];
            let header = [
                "bus",
                "generator_momentum_s",
                "line_momentum_s",
                "total_momentum_s",
                "em_share_1",
            ]
            .map(String::from);
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            em.csv("momentum.csv", &header, &refs)?;
            let share = planewave::electromagnetics::system_share(&budgets);
            em.summary(
                "momentum.json",
                &serde_json::json!({ "kappa": kappa, "system_share": share, "nodes": budgets }),
            )?;
            em.finish()?;
            println!("kappa = {kappa:.6e} s per pu-m");
            println!("bus   M_g (s)    M_l (s)    share");
            for (g, b) in sys.generators().iter().zip(&budgets) {
                println!(
                    "{:3}  {:9.4}  {:9.4}  {:7.4}",
                    g.bus, b.generator_momentum, b.line_momentum, b.em_share
                );
            }
            println!("system share {:.4}", share);
        }
        Command::Prony {
            csv,
            signal,
            order,
            auto_order,
            energy,
        } => {
            let order = if auto_order { None } else { order };
            if order.is_none() && !auto_order {
                return Err(Error::Argument("give --order or --auto-order".into()));
            }
            let (series, bytes) = read_signal(&csv, &signal)?;
            let modes = fit_modes(&series, order, energy)?;
            let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
            modes_table(&mut em, "modes.csv", &modes)?;
            em.summary("modes.json", &modes)?;
            let plot = Plot::new("Prony modes", "sigma (1/s)", "omega (rad/s)").with_series(
                PlotSeries::points(
                    series.label.clone(),
                    modes.iter().map(|m| m.sigma).collect(),
                    modes.iter().map(|m| m.omega).collect(),
                ),
            );
            em.svg("modes.svg", &plot)?;
            em.finish()?;
            println!("sigma (1/s)   f (Hz)    zeta      energy");
            for m in &modes {
                println!(
                    "{:10.5}  {:8.4}  {:8.5}  {:8.4}",
                    m.sigma,
                    m.frequency_hz(),
                    damping_ratio(m).unwrap_or(f64::NAN),
                    m.energy
                );
            }
        }
        Command::Migrate {
            csv_send,
            csv_recv,
            signal,
            order,
            energy,
        } => {
            let (s, b1) = read_signal(&csv_send, &signal)?;
            let (r, b2) = read_signal(&csv_recv, &signal)?;
            let send = fit_modes(&s, order, energy)?;
            let recv = fit_modes(&r, order, energy)?;
            let report = eigen_migration(&send, &recv)?;
            let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&b1, &b2], &args))?;
            modes_table(&mut em, "modes_send.csv", &send)?;
            modes_table(&mut em, "modes_recv.csv", &recv)?;
            em.summary("migration.json", &report)?;
            em.svg("migration.svg", &Plot::mode_scatter(&report))?;
            em.finish()?;
            for p in &report.pairs {
                println!(
                    "{:8.4} Hz -> {:8.4} Hz   d_sigma {:+.5}  d_omega {:+.5}{}",
                    p.send.frequency_hz(),
                    p.recv.frequency_hz(),
                    p.d_sigma,
                    p.d_omega,
                    if p.reduced_inertia_signature {
                        "  reduced-inertia signature"
                    } else {
                        ""
                    }
                );
            }
            println!("signature: {}", report.signature);
        }
        Command::Compare { case, grid } => {
            let (c, bytes) = load_case(&case)?;
            let ev = disturbance(&c, grid.dp)?;
            let h = grid.h.unwrap_or_else(|| H_GRID.to_vec());
            let cmp = compare_models(&c, &ev, &h, c.kappa()?)?;
            let mut em = Emitter::create(&cli.out, formats, &inputs_digest(&[&bytes], &args))?;
            let header = [
                "h_s",
                "rocof_planewave_hz_per_s",
                "rocof_classical_hz_per_s",
                "divergence_hz_per_s",
            ]
            .map(String::from);
            em.csv(
                "compare.csv",
                &header,
                &[
                    &h,
                    &cmp.planewave.rocof_hz,
                    &cmp.classical.rocof_hz,
                    &cmp.divergence,
                ],
            )?;
            em.summary("compare.json", &cmp)?;
            let plot = Plot::new(
                format!("Model divergence, {}", c.name),
                "H (s)",
                "ROCOF (Hz/s)",
            )
            .with_series(PlotSeries::line(
                "plane wave",
                h.clone(),
                cmp.planewave.rocof_hz.clone(),
            ))
            .with_series(PlotSeries::line(
                "classical",
                h.clone(),
                cmp.classical.rocof_hz.clone(),
            ));
            em.svg("compare.svg", &plot)?;
            em.finish()?;
            println!("H (s)   |classical - plane wave| (Hz/s)");
            for (hk, d) in h.iter().zip(&cmp.divergence) {
                println!("{hk:6.2}  {d:.5}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Io => 4,
            })
        }
    }
}
