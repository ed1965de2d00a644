//! Command-line front end. Every subcommand writes fixed file names into
//! `--out-dir`; each primary output carries the hash of the resolved
//! configuration, and wall-clock data goes to `run.meta.json` only.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::calibration::{closed_loop, conventional_calibrate, LoopOptions};
use crate::device::{
    fit_exchange_model, fit_noise_model, ConditionalFrequencies, DephasingTimes, DeviceModel, FitOptions,
};
use crate::dynamics::{propagate, ControlSchedule, NoiseRealization, NoiseSpec};
use crate::gates::{cphase_infidelity, ideal_params, GateCompiler, GateParams};
use crate::gst::dataset::{simulate_dataset, GstDataset};
use crate::gst::estimate::{bootstrap, mle_estimate, model_violation, percentile_intervals, MleOptions};
use crate::gst::model::{target_ptm, GateSet, SpamModel};
use crate::gst::report::{label_intervals, metric_vector, EstimateReport, GateSetJson};
use crate::gst::{Design, GateLabel};
use crate::metrics::{bell_states, gate_set_metrics, GateMetrics};
use crate::pulse::{adiabatic_error, barrier_waveform, cphase_amplitude, cphase_amplitude_analytic, WindowSpec};
use crate::qptm::PauliTransferMatrix;
use crate::vqe::{curve_minimum, dissociation_curve, write_curve_csv, CoefficientTable, ReadoutModel, VqeConfig};
use crate::{Error, Result};

#[derive(Debug, Parser, Serialize)]
#[command(name = "spinqubit", version, about = "Two-spin-qubit simulation, GST and calibration workflows")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Device profile (defaults to the shipped reference device).
    #[arg(long, global = true)]
    pub device: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Print failures as a JSON object on stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub error_json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Fit exchange and noise parameters to measured curves (CSV) and write device.json.
    FitDevice(FitDeviceArgs),
    /// Barrier waveform for the CPHASE pulse plus amplitude and adiabaticity report.
    DesignPulse(DesignPulseArgs),
    /// Monte-Carlo channel of one gate or of a schedule CSV.
    SimulateGate(SimulateGateArgs),
    /// List the GST circuits.
    GstDesign(GstDesignArgs),
    /// Sample a GST dataset from a gate set.
    GstSimulate(GstSimulateArgs),
    /// Maximum-likelihood gate set estimate with metrics.
    GstEstimate(GstEstimateArgs),
    /// Conventional calibration followed by the GST feedback loop.
    CalibrateLoop(CalibrateLoopArgs),
    /// H2 dissociation curve.
    VqeRun(VqeRunArgs),
    /// Bell-state reconstruction from an estimate.
    BellReconstruct(BellReconstructArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitDeviceArgs {
    /// Columns: v_B_volt, then the four conditional frequencies in Hz.
    #[arg(long)]
    pub frequencies: PathBuf,
    /// Columns: v_B_volt, then the four conditional T2* values in seconds.
    #[arg(long)]
    pub t2: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum WindowKind {
    Cosine,
    Tukey,
}

#[derive(Debug, Args, Serialize)]
pub struct DesignPulseArgs {
    #[arg(long, default_value_t = 100e-9)]
    pub tp: f64,
    #[arg(long, default_value_t = 10e-12)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = WindowKind::Cosine)]
    pub window: WindowKind,
    #[arg(long, default_value_t = 0.5)]
    pub tukey_r: f64,
    /// Barrier amplitude; defaults to the root-solved CPHASE value (cosine only).
    #[arg(long)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateGateArgs {
    #[arg(long, default_value = "CZ")]
    pub gate: String,
    /// Gate parameters (calibration.json); defaults to the ideal parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Simulate this schedule instead; `--gate` then names the target.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Noise trials; 0 gives the noiseless channel.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GstDesignArgs {
    #[arg(long, default_value_t = 16)]
    pub max_l: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GstSimulateArgs {
    /// Gate set JSON, or an estimate report whose gate set is used.
    #[arg(long)]
    pub gate_set: Option<PathBuf>,
    /// Compile the gate set from the device instead of using the target.
    #[arg(long)]
    pub from_device: bool,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// SPAM model JSON applied to compiled or target gate sets.
    #[arg(long)]
    pub spam: Option<PathBuf>,
    /// ZI rotation (degrees) injected after X1.
    #[arg(long, default_value_t = 0.0)]
    pub zi_error_deg: f64,
    /// Depolarizing strength p: every gate's Pauli components shrink by 1 - p.
    #[arg(long, default_value_t = 0.0)]
    pub depolarizing: f64,
    #[arg(long, default_value_t = 16)]
    pub max_l: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GstEstimateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub max_l: usize,
    /// Nonparametric bootstrap resamples for metric intervals.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateLoopArgs {
    /// Starting parameters; defaults to conventional calibration from nominal.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 16)]
    pub max_l: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VqeRunArgs {
    /// Coefficient table; defaults to the pinned STO-3G table.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    #[arg(long)]
    pub noiseless: bool,
    /// Readout model JSON; defaults to the reference readout.
    #[arg(long)]
    pub readout: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 24)]
    pub n_theta: usize,
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BellReconstructArgs {
    /// Estimate report or gate set JSON.
    #[arg(long)]
    pub estimate: PathBuf,
}

/// Keys of the JSON config file. `command_args` maps subcommand flag names
/// (without dashes) to values and is applied before command-line flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: Option<PathBuf>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub command_args: BTreeMap<String, Value>,
}

impl RunConfig {
    fn tokens(&self) -> Vec<OsString> {
        let mut t: Vec<OsString> = Vec::new();
        let mut push = |k: &str, v: String| {
            t.push(format!("--{k}").into());
            t.push(v.into());
        };
        if let Some(d) = &self.device {
            push("device", d.display().to_string());
        }
        if let Some(s) = self.seed {
            push("seed", s.to_string());
        }
        if let Some(s) = self.shots {
            push("shots", s.to_string());
        }
        if let Some(o) = &self.out_dir {
            push("out-dir", o.display().to_string());
        }
        for (k, v) in &self.command_args {
            let flag = format!("--{}", k.replace('_', "-"));
            match v {
                Value::Bool(true) => t.push(flag.into()),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => {
                    t.push(flag.into());
                    t.push(s.into());
                }
                other => {
                    t.push(flag.into());
                    t.push(other.to_string().into());
                }
            }
        }
        t
    }
}

const SUBCOMMANDS: [&str; 9] = [
    "fit-device",
    "design-pulse",
    "simulate-gate",
    "gst-design",
    "gst-simulate",
    "gst-estimate",
    "calibrate-loop",
    "vqe-run",
    "bell-reconstruct",
];

/// Splices config-file values in right after the subcommand name so that
/// any flag given on the command line overrides them.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos.and_then(|p| args.get(p + 1)) {
        Some(p) => PathBuf::from(p),
        None => return Ok(args),
    };
    let cfg: RunConfig = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
    let sub = match args.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == s)) {
        Some(s) => s,
        None => return Ok(args),
    };
    let mut out: Vec<OsString> = vec![args[0].clone(), args[sub].clone()];
    out.extend(cfg.tokens());
    out.extend(args[1..sub].iter().cloned());
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}

/// Hex SHA-256 of the resolved configuration.
pub fn config_hash(cli: &Cli) -> String {
    let text = serde_json::to_string(cli).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

struct Ctx {
    hash: String,
    seed: u64,
    shots: u64,
    out: PathBuf,
    device: DeviceModel,
    written: Vec<String>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    /// JSON object with `config_hash` and `seed` prepended.
    fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let mut v = serde_json::to_value(body)?;
        if let Value::Object(m) = &mut v {
            m.insert("config_hash".into(), json!(self.hash));
            m.insert("seed".into(), json!(self.seed));
        } else {
            v = json!({"config_hash": self.hash, "seed": self.seed, "data": v});
        }
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, &v)?;
        writeln!(w)?;
        Ok(())
    }

    /// Text output with a leading `# config_hash=` comment line.
    fn write_text(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let (hash, seed) = (self.hash.clone(), self.seed);
        let mut w = self.writer(name)?;
        writeln!(w, "# config_hash={hash} seed={seed}")?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn read_params(path: Option<&PathBuf>, device: &DeviceModel) -> Result<GateParams> {
    match path {
        Some(p) => {
            let v: Value = read_json(p)?;
            // calibration.json wraps the parameters; a bare object also works
            let inner = v.get("params").cloned().unwrap_or(v);
            let params: GateParams = serde_json::from_value(inner)?;
            params.validate()?;
            Ok(params)
        }
        None => ideal_params(device),
    }
}

fn read_gate_set(path: &Path) -> Result<GateSet> {
    let v: Value = read_json(path)?;
    let inner = v.get("gate_set").cloned().unwrap_or(v);
    serde_json::from_value::<GateSetJson>(inner)?.to_gate_set()
}

/// Rows of `v_B, a, b, c, d`; `#` lines and one header line are skipped.
fn read_curve_csv(path: &Path) -> Result<Vec<(f64, [f64; 4])>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err()) {
                continue;
            }
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?} in {}", path.display()))))
            .collect::<Result<_>>()?;
        if v.len() != 5 {
            return Err(Error::Parse(format!("expected 5 columns in {}, got {}", path.display(), v.len())));
        }
        rows.push((v[0], [v[1], v[2], v[3], v[4]]));
    }
    Ok(rows)
}

fn fit_device(ctx: &mut Ctx, a: &FitDeviceArgs) -> Result<Value> {
    let data: Vec<(f64, ConditionalFrequencies)> =
        read_curve_csv(&a.frequencies)?.into_iter().map(|(v, f)| (v, ConditionalFrequencies::from_array(f))).collect();
    let opts = FitOptions { bootstrap_resamples: a.bootstrap, seed: ctx.seed, ..FitOptions::default() };
    let ex = fit_exchange_model(&data, &opts)?;
    let mut model = ctx.device.clone();
    let f = &ex.model;
    (model.f_q1, model.f_q2, model.j_res, model.alpha) = (f.f_q1, f.f_q2, f.j_res, f.alpha);
    (model.beta1, model.beta2, model.gamma) = (f.beta1, f.beta2, f.gamma);
    let noise = match &a.t2 {
        Some(p) => {
            let t2: Vec<(f64, DephasingTimes)> =
                read_curve_csv(p)?.into_iter().map(|(v, t)| (v, DephasingTimes::from_array(t))).collect();
            let n = fit_noise_model(&model, &t2, None, &opts)?;
            (model.delta_vb, model.delta_fq1, model.delta_fq2) = (n.delta_vb, n.delta_fq1, n.delta_fq2);
            Some(n)
        }
        None => None,
    };
    model.validate()?;
    ctx.write_json("device.json", &model)?;
    ctx.write_json("fit_report.json", &json!({"exchange": ex, "noise": noise}))?;
    Ok(json!({"residual_rms_hz": ex.residual_rms, "j_res_hz": model.j_res, "alpha_per_volt": model.alpha}))
}

fn design_pulse(ctx: &mut Ctx, a: &DesignPulseArgs) -> Result<Value> {
    let spec = match a.window {
        WindowKind::Cosine => WindowSpec::cosine(a.tp),
        WindowKind::Tukey => WindowSpec::tukey(a.tukey_r, a.tp),
    };
    let m = &ctx.device.clone();
    let analytic = cphase_amplitude_analytic(m, &spec)?;
    let (amp, exact) = match (a.amplitude, a.window) {
        (Some(x), _) => (x, None),
        (None, WindowKind::Cosine) => {
            let c = cphase_amplitude(m, &spec, a.dt)?;
            (c.exact, Some(c.exact))
        }
        (None, WindowKind::Tukey) => (analytic, None),
    };
    let wf = barrier_waveform(m, amp, &spec, a.dt)?;
    let j: Vec<f64> = wf.samples.iter().map(|v| crate::device::exchange(m, *v)).collect();
    let delta_ez = (m.f_q1 - m.f_q2).abs();
    let esd = adiabatic_error(&j, a.dt, delta_ez)?;
    let s = wf.schedule();
    let u = propagate(&s, m, &NoiseRealization::none(s.len()))?;
    let infidelity = cphase_infidelity(&u);
    ctx.write_text("waveform.csv", |w| wf.write_csv(m, w))?;
    ctx.write_text("schedule.csv", |w| s.write_csv(w))?;
    let report = json!({
        "t_p_s": a.tp,
        "dt_s": a.dt,
        "window": spec.window,
        "amplitude": amp,
        "amplitude_analytic": analytic,
        "amplitude_exact": exact,
        "a_times_j_res_mhz": amp * m.j_res / 1e6,
        "a_times_j_res_analytic_mhz": analytic * m.j_res / 1e6,
        "adiabatic_error": esd,
        "noiseless_cphase_infidelity": infidelity,
    });
    ctx.write_json("pulse_report.json", &report)?;
    Ok(report)
}

fn simulate_gate(ctx: &mut Ctx, a: &SimulateGateArgs) -> Result<Value> {
    let label: GateLabel = a.gate.parse()?;
    let spec = if a.trials == 0 { NoiseSpec::zero() } else { NoiseSpec::from_model(&ctx.device, ctx.seed) };
    let ptm = match &a.schedule {
        Some(p) => {
            let s = ControlSchedule::read_csv(BufReader::new(File::open(p)?))?;
            if a.trials == 0 {
                crate::qptm::ptm_from_unitary_unchecked(&propagate(&s, &ctx.device, &NoiseRealization::none(s.len()))?)
            } else {
                crate::dynamics::monte_carlo_channel(&s, &ctx.device, &spec, a.trials)?
            }
        }
        None => {
            let c = GateCompiler::new(ctx.device.clone(), read_params(a.params.as_ref(), &ctx.device)?)?;
            c.channel(label, &spec, a.trials)?
        }
    };
    let metrics = GateMetrics::compute(label, &ptm)?;
    let out = json!({"gate": label, "trials": a.trials, "ptm": ptm.to_json(), "metrics": metrics});
    ctx.write_json("ptm.json", &out)?;
    Ok(json!({"gate": label, "infidelity": 1.0 - metrics.f_gate}))
}

fn gst_design(ctx: &mut Ctx, a: &GstDesignArgs) -> Result<Value> {
    let d = Design::standard(a.max_l)?;
    let circuits = d.circuits();
    ctx.write_text("circuits.txt", |w| {
        for c in &circuits {
            writeln!(w, "{c}")?;
        }
        Ok(())
    })?;
    Ok(json!({"circuits": circuits.len(), "blocks": d.blocks.len()}))
}

fn depolarize(gs: &GateSet, p: f64) -> Result<GateSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("depolarizing strength {p} outside [0, 1]")));
    }
    let dep = crate::gst::model::to_m16(PauliTransferMatrix::depolarizing(2, 1.0 - p).entries());
    let mut out = gs.clone();
    for g in &mut out.gates {
        *g = dep * *g;
    }
    Ok(out)
}

fn gst_simulate(ctx: &mut Ctx, a: &GstSimulateArgs) -> Result<Value> {
    let spam = match &a.spam {
        Some(p) => {
            let s: SpamModel = read_json(p)?;
            s.validate()?;
            s
        }
        None => SpamModel::perfect(),
    };
    let mut truth = match (&a.gate_set, a.from_device) {
        (Some(p), _) => read_gate_set(p)?,
        (None, true) => {
            let c = GateCompiler::new(ctx.device.clone(), read_params(a.params.as_ref(), &ctx.device)?)?;
            c.gate_set(&NoiseSpec::from_model(&ctx.device, ctx.seed), a.trials, &spam)?
        }
        (None, false) => GateSet::from_ptms(&GateLabel::GATES.map(target_ptm), &spam),
    };
    if a.zi_error_deg != 0.0 {
        truth = crate::gst::estimate::with_x1_zi_error(&truth, a.zi_error_deg.to_radians());
    }
    if a.depolarizing != 0.0 {
        truth = depolarize(&truth, a.depolarizing)?;
    }
    let design = Design::standard(a.max_l)?;
    let ds = simulate_dataset(&truth, &design, ctx.shots, ctx.seed)?;
    ctx.write_text("dataset.jsonl", |w| ds.write_jsonl(w))?;
    ctx.write_json("truth.json", &GateSetJson::from_gate_set(&truth))?;
    Ok(json!({"circuits": ds.entries.len(), "shots": ctx.shots}))
}

fn gst_estimate(ctx: &mut Ctx, a: &GstEstimateArgs) -> Result<Value> {
    let ds = GstDataset::read_jsonl(BufReader::new(File::open(&a.dataset)?))?;
    let design = Design::standard(a.max_l)?;
    let target = GateSet::target();
    let opts = MleOptions::default();
    let est = mle_estimate(&ds, &design, &target, &opts)?;
    let counts = ds.aligned_counts(&design)?;
    let mv = model_violation(&counts, &design, &est.gate_set);
    let metrics = gate_set_metrics(&est.gate_set)?;
    let mut report = EstimateReport::new(ctx.hash.clone(), ctx.seed, &est, mv, metrics);
    if a.bootstrap > 0 {
        let samples = bootstrap(&ds, &design, &target, &est, a.bootstrap, ctx.seed, &opts, metric_vector)?;
        report.intervals = label_intervals(&percentile_intervals(&samples, a.confidence));
    }
    ctx.write_json("estimate.json", &report)?;
    let fids: BTreeMap<String, f64> = report.metrics.iter().map(|m| (m.gate.to_string(), m.f_gate)).collect();
    if !est.converged {
        return Err(Error::NonConvergence { what: "GST likelihood maximization", iterations: est.iterations, residual: est.grad_norm });
    }
    Ok(json!({"fidelities": fids, "n_sigma": report.model_violation.n_sigma}))
}

fn calibrate_loop(ctx: &mut Ctx, a: &CalibrateLoopArgs) -> Result<Value> {
    let start = match &a.params {
        Some(p) => read_params(Some(p), &ctx.device)?,
        None => {
            let conv = conventional_calibrate(&ctx.device, &GateParams::nominal(&ctx.device)?)?;
            ctx.write_json("conventional.json", &conv)?;
            conv.params
        }
    };
    let opts = LoopOptions {
        shots: ctx.shots,
        max_iterations: a.max_iters,
        gain: a.gain,
        trials: a.trials,
        seed: ctx.seed,
        design_max_l: a.max_l,
        ..LoopOptions::default()
    };
    let trace = closed_loop(&ctx.device, &start, &opts)?;
    let csv = trace.to_csv();
    ctx.write_text("trace.csv", |w| Ok(w.write_all(csv.as_bytes())?))?;
    ctx.write_json("calibration.json", &json!({"params": trace.final_params}))?;
    ctx.write_json("loop.json", &trace)?;
    let fids: Vec<f64> = trace.iterations.iter().map(|i| i.cphase_fidelity).collect();
    if trace.diverged {
        return Err(Error::Divergence(format!("CPHASE fidelity fell twice in a row: {fids:?}")));
    }
    Ok(json!({"cphase_fidelity": fids, "converged": trace.converged}))
}

fn vqe_run(ctx: &mut Ctx, a: &VqeRunArgs) -> Result<Value> {
    let table = match &a.coefficients {
        Some(p) => CoefficientTable::load(p)?,
        None => CoefficientTable::reference()?,
    };
    let mut cfg = if a.noiseless {
        VqeConfig::noiseless()
    } else {
        let readout = match &a.readout {
            Some(p) => read_json(p)?,
            None => ReadoutModel::reference(),
        };
        let c = GateCompiler::new(ctx.device.clone(), ideal_params(&ctx.device)?)?;
        let gs = c.gate_set(&NoiseSpec::from_model(&ctx.device, ctx.seed), a.trials, &SpamModel::perfect())?;
        VqeConfig::noisy(gs, readout, ctx.shots, ctx.seed)
    };
    cfg.n_theta = a.n_theta;
    cfg.normalize_large_r = a.normalize;
    let curve = dissociation_curve(&table, &cfg)?;
    ctx.write_text("results.csv", |w| write_curve_csv(&curve, w))?;
    let max_dev = curve.iter().map(|p| (p.e_vqe_hartree - p.e_exact_hartree).abs()).fold(0.0, f64::max);
    let min = curve_minimum(&curve).expect("non-empty curve");
    let eq = table.nearest(0.7414).r_angstrom;
    let eq_err = curve.iter().find(|p| p.r_angstrom == eq).map(|p| p.e_vqe_hartree - p.e_exact_hartree);
    let summary = json!({
        "max_deviation_hartree": max_dev,
        "minimum_r_angstrom": min.r_angstrom,
        "minimum_energy_hartree": min.e_vqe_hartree,
        "equilibrium_r_angstrom": eq,
        "equilibrium_error_hartree": eq_err,
    });
    ctx.write_json("vqe_summary.json", &summary)?;
    Ok(summary)
}

fn bell_reconstruct(ctx: &mut Ctx, a: &BellReconstructArgs) -> Result<Value> {
    let gs = read_gate_set(&a.estimate)?;
    let states = bell_states(&gs)?;
    ctx.write_json("bell.json", &json!({"states": states}))?;
    Ok(states.iter().map(|s| (s.name.to_string(), json!(s.fidelity))).collect::<serde_json::Map<_, _>>().into())
}

fn execute(cli: &Cli) -> Result<Value> {
    let device = match &cli.device {
        Some(p) => DeviceModel::load(p)?,
        None => DeviceModel::reference(),
    };
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut ctx = Ctx { hash: config_hash(cli), seed: cli.seed, shots: cli.shots, out: cli.out_dir.clone(), device, written: Vec::new() };
    let t0 = Instant::now();
    let result = match &cli.command {
        Command::FitDevice(a) => fit_device(&mut ctx, a),
        Command::DesignPulse(a) => design_pulse(&mut ctx, a),
        Command::SimulateGate(a) => simulate_gate(&mut ctx, a),
        Command::GstDesign(a) => gst_design(&mut ctx, a),
        Command::GstSimulate(a) => gst_simulate(&mut ctx, a),
        Command::GstEstimate(a) => gst_estimate(&mut ctx, a),
        Command::CalibrateLoop(a) => calibrate_loop(&mut ctx, a),
        Command::VqeRun(a) => vqe_run(&mut ctx, a),
        Command::BellReconstruct(a) => bell_reconstruct(&mut ctx, a),
    };
    let meta = json!({
        "config_hash": ctx.hash,
        "version": env!("CARGO_PKG_VERSION"),
        "elapsed_s": t0.elapsed().as_secs_f64(),
        "outputs": ctx.written,
        "ok": result.is_ok(),
    });
    std::fs::write(ctx.path("run.meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    result.map(|summary| json!({"config_hash": ctx.hash, "outputs": ctx.written, "summary": summary}))
}

/// Exit status for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn report_error(kind: &str, message: &str, code: i32, as_json: bool) {
    if as_json {
        println!("{}", json!({"error": {"kind": kind, "message": message, "exit_code": code}}));
    } else {
        eprintln!("error: {message}");
    }
}

fn error_kind(e: &Error) -> &'static str {
    if e.is_numerical() {
        "numerical"
    } else {
        "validation"
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let wants_json = raw.iter().any(|a| a == "--error-json");
    let merged = match merge_config(raw) {
        Ok(m) => m,
        Err(e) => {
            report_error("validation", &format!("config: {e}"), 2, wants_json);
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(merged) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if wants_json {
                report_error("validation", e.to_string().trim(), 2, true);
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    match execute(&cli) {
        Ok(v) => {
            println!("{v}");
            0
        }
        Err(e) => {
            let code = exit_code(&e);
            report_error(error_kind(&e), &e.to_string(), code, cli.error_json);
            code
        }
    }
}
