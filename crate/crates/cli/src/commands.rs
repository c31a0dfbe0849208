//! Subcommand implementations. Each writes its manifest first, then its
//! artifacts, and reports convergence problems as warnings.

use std::fs;
use std::path::{Path, PathBuf};

use photonsub::conditional::{best_cat, model_state, optimize_mode_function};
use photonsub::datasynth::{
    calibrate_vacuum, discrete_mode, homodyne_noise_trace, read_dataset, sample_quadratures, sample_vacuum, stream,
    synthesize_segments, welch_psd, write_dataset, write_segments, Complement, QuadratureDataset,
};
use photonsub::fock::{wigner_from_fock, DensityMatrix, DensityMatrixJson, CONVENTION};
use photonsub::gaussian_model::{output_kernels, CorrelationKernel, OpoModel};
use photonsub::spectrum_fit::{fit_spectrum, log_frequencies, SpectrumData};
use photonsub::tomography::{build_povm, reconstruct, ReconstructionResult};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use crate::config::{ComplementKind, RunConfig};
use crate::manifest::{derive_seed, git_sha256, InputRecord, Manifest};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or missing inputs (exit 2).
    Config(String),
    /// Numerical failure (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<photonsub::Error> for CliError {
    fn from(e: photonsub::Error) -> Self {
        use photonsub::Error as E;
        match e {
            E::Config(_) | E::InvalidParameter { .. } | E::GainDomain(_) | E::AboveThreshold(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numeric(format!("json: {e}"))
    }
}

pub type CliResult = Result<Vec<String>, CliError>;

/// Shared state of one invocation.
pub struct Context {
    pub command: &'static str,
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub repeat: usize,
}

impl Context {
    fn start(&self, extra_inputs: &[PathBuf]) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)?;
        let mut inputs = Vec::new();
        for p in self.config_path.iter().chain(extra_inputs) {
            inputs.push(InputRecord::from_file(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?);
        }
        let manifest = Manifest::new(self.command, &self.config, inputs);
        self.write("manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, content: &str) -> Result<(), CliError> {
        fs::write(self.path(name), content)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn model(&self) -> Result<OpoModel, CliError> {
        Ok(self.config.opo.model()?)
    }
}

fn indexed(stem: &str, i: usize, repeat: usize) -> String {
    if repeat > 1 {
        format!("{stem}_{i:03}")
    } else {
        stem.to_string()
    }
}

fn model_hash(model: &OpoModel) -> String {
    git_sha256(serde_json::to_string(model).unwrap_or_default().as_bytes())
}

pub fn simulate(ctx: &Context) -> CliResult {
    ctx.start(&[])?;
    let cfg = &ctx.config;
    let model = ctx.model()?;
    let st = model_state(&model, &cfg.mode.params(), cfg.simulate.n_max)?;
    let rho = st.fock();
    let grid = wigner_from_fock(rho, cfg.simulate.grid());
    let (alpha, fidelity) = best_cat(rho);
    ctx.write_json("fock.json", &rho.to_json())?;
    ctx.write("wigner.csv", &grid.to_csv())?;
    let (a, b) = st.polynomial();
    ctx.write_json(
        "metrics.json",
        &json!({
            "convention": CONVENTION,
            "gain": model.gain(),
            "pump_parameter": model.pump_parameter,
            "signal_efficiency": model.total_signal_efficiency(),
            "dark_fraction": st.dark_fraction(),
            "n_max": rho.n_max(),
            "wigner_origin": st.wigner_at_origin(),
            "wigner_origin_fock": rho.wigner_at_origin(),
            "best_cat_alpha": alpha,
            "best_cat_fidelity": fidelity,
            "odd_mass": rho.odd_mass(),
            "even_mass": rho.even_mass(),
            "populations": rho.populations(),
            "fock_trace_deficit": 1.0 - rho.trace(),
            "trigger_photon_number": st.trigger_photon_number(),
            "signal_covariance": [[st.signal_covariance()[(0, 0)], st.signal_covariance()[(0, 1)]],
                                  [st.signal_covariance()[(1, 0)], st.signal_covariance()[(1, 1)]]],
            "polynomial_a": a,
            "polynomial_b": [[b[(0, 0)], b[(0, 1)]], [b[(1, 0)], b[(1, 1)]]],
        }),
    )?;
    let mut warnings = Vec::new();
    if grid.truncation_warning() {
        warnings.push(format!("Fock basis truncates the state: trace deficit {:.2e}", grid.trace_deficit));
    }
    Ok(warnings)
}

/// Kernel for out-of-mode noise, averaged over the scanned phase.
fn complement(model: &OpoModel, eta: f64, kind: ComplementKind) -> Result<Complement, CliError> {
    Ok(match kind {
        ComplementKind::Vacuum => Complement::Vacuum,
        ComplementKind::Stationary => {
            let (anti, squeezed) = output_kernels(model)?;
            let kernel = CorrelationKernel::rotated(&anti, &squeezed, std::f64::consts::FRAC_PI_4);
            Complement::Stationary { kernel, eta }
        }
    })
}

pub fn synth_data(ctx: &Context) -> CliResult {
    ctx.start(&[])?;
    let cfg = &ctx.config;
    let d = &cfg.data;
    let gain_e = d.electronic_gain;
    if gain_e != 1.0 && d.calibration_records == 0 {
        return Err(CliError::Config(
            "[data] electronic_gain != 1 needs a calibration run (calibration_records > 0)".into(),
        ));
    }
    let model = ctx.model()?.without_detector();
    let params = cfg.mode.params();
    let st = model_state(&model, &params, d.n_max)?;
    let hash = model_hash(&model);
    let mut files = Vec::new();
    let mut first: Option<QuadratureDataset> = None;
    for i in 0..ctx.repeat {
        let seed = derive_seed(cfg.seed, &format!("heralded/{i}"));
        let mut ds = sample_quadratures(&st, d.records, &d.phase_plan, d.eta_det, seed)?;
        ds.metadata.model_hash = Some(hash.clone());
        ds.metadata.mode = Some(params);
        if gain_e != 1.0 {
            ds.xs.iter_mut().for_each(|x| *x *= gain_e);
            ds.metadata.kind = "heralded-uncalibrated".into();
        }
        let name = format!("{}.csv", indexed("dataset", i, ctx.repeat));
        write_dataset(&ctx.path(&name), &ds)?;
        files.push(name);
        if first.is_none() {
            first = Some(ds);
        }
    }
    if d.calibration_records > 0 {
        let vac = sample_vacuum(d.calibration_records, &d.phase_plan, gain_e, derive_seed(cfg.seed, "vacuum"))?;
        write_dataset(&ctx.path("vacuum.csv"), &vac)?;
        files.push("vacuum.csv".into());
    }
    if d.segments > 0 {
        let mut ds = first.expect("at least one dataset");
        let n = d.segments.min(ds.len());
        ds.thetas.truncate(n);
        ds.xs.truncate(n);
        ds.times_s.truncate(n);
        let u = discrete_mode(&params.mode()?);
        let eta = model.signal_efficiency() * d.eta_det;
        let segs = synthesize_segments(&ds, &u, &complement(&model, eta, d.complement)?, derive_seed(cfg.seed, "segments"));
        write_segments(&ctx.path("segments.bin"), &segs)?;
        files.push("segments.bin".into());
        let mode_csv: String = std::iter::once("k,u\n".to_string())
            .chain(u.iter().enumerate().map(|(k, v)| format!("{k},{v}\n")))
            .collect();
        ctx.write("mode.csv", &mode_csv)?;
        files.push("mode.csv".into());
    }
    let s = &cfg.spectrum;
    if s.points > 0 {
        let freqs = log_frequencies(s.f_min_hz, s.f_max_hz, s.points);
        let mut spec = SpectrumData::model(&freqs, model.cavity_hwhm_hz, model.pump_parameter, s.eta_t);
        let mut rng = stream(derive_seed(cfg.seed, "spectrum"), 0);
        for v in spec.squeezed_db.iter_mut().chain(spec.antisqueezed_db.iter_mut()) {
            *v += s.noise_db * rng.sample::<f64, _>(StandardNormal);
        }
        ctx.write("spectrum.csv", &spec.to_csv())?;
        files.push("spectrum.csv".into());
    }
    if s.trace_duration_s > 0.0 {
        let seed = derive_seed(cfg.seed, "trace");
        let sq = homodyne_noise_trace(&model, std::f64::consts::FRAC_PI_2, s.trace_duration_s, s.sample_rate_hz, s.eta_t, &mut stream(seed, 0))?;
        let anti = homodyne_noise_trace(&model, 0.0, s.trace_duration_s, s.sample_rate_hz, s.eta_t, &mut stream(seed, 1))?;
        let mut text = String::with_capacity(sq.len() * 48);
        text.push_str("time_s,squeezed,antisqueezed\n");
        for (k, (a, b)) in sq.iter().zip(&anti).enumerate() {
            text.push_str(&format!("{:e},{a:e},{b:e}\n", k as f64 / s.sample_rate_hz));
        }
        ctx.write("noise_trace.csv", &text)?;
        files.push("noise_trace.csv".into());
    }
    ctx.write_json(
        "metrics.json",
        &json!({
            "convention": CONVENTION,
            "records": d.records,
            "repeat": ctx.repeat,
            "files": files,
            "model_hash": hash,
            "state_wigner_origin": st.wigner_at_origin(),
            "eta_det": d.eta_det,
        }),
    )?;
    Ok(Vec::new())
}

/// Dataset files named by a reconstruct argument.
fn dataset_paths(input: &Path, repeat: usize) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = if input.is_dir() {
        (0..repeat)
            .map(|i| input.join(format!("{}.csv", indexed("dataset", i, repeat))))
            .collect()
    } else if repeat == 1 {
        vec![input.to_path_buf()]
    } else {
        return Err(CliError::Config(format!(
            "--repeat {repeat} expects the synth-data output directory, got file {}",
            input.display()
        )));
    };
    for p in &paths {
        if !p.is_file() {
            return Err(CliError::Config(format!("dataset {} not found", p.display())));
        }
    }
    Ok(paths)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn calibration_path(ctx: &Context, dataset: &Path) -> PathBuf {
    match &ctx.config.tomography.calibration {
        Some(p) => PathBuf::from(p),
        None => dataset.parent().unwrap_or(Path::new(".")).join("vacuum.csv"),
    }
}

#[derive(Serialize)]
struct RunSummary {
    dataset: String,
    records: usize,
    vacuum_scale: f64,
    wigner_origin: f64,
    iterations: usize,
    converged: bool,
    final_log_likelihood: f64,
    diagnostics: photonsub::tomography::Diagnostics,
    populations: Vec<f64>,
}

pub fn reconstruct_cmd(ctx: &Context, input: &Path) -> CliResult {
    let paths = dataset_paths(input, ctx.repeat)?;
    // calibration requirements are resolved before the manifest so that the
    // calibration file is hashed with the other inputs
    let mut datasets = Vec::new();
    let mut inputs = Vec::new();
    let mut calib_scale: Option<(PathBuf, f64)> = None;
    for p in &paths {
        let ds = read_dataset(p)?;
        inputs.push(p.clone());
        if sidecar(p).is_file() {
            inputs.push(sidecar(p));
        }
        let ds = if ds.metadata.kind.ends_with("uncalibrated") {
            let cal = calibration_path(ctx, p);
            let scale = match &calib_scale {
                Some((c, s)) if *c == cal => *s,
                _ => {
                    if !cal.is_file() {
                        return Err(CliError::Config(format!(
                            "dataset {} is uncalibrated and the calibration file {} is missing",
                            p.display(),
                            cal.display()
                        )));
                    }
                    let s = calibrate_vacuum(&read_dataset(&cal)?)?;
                    inputs.push(cal.clone());
                    calib_scale = Some((cal, s));
                    s
                }
            };
            ds.with_vacuum_scale(scale)
        } else {
            ds
        };
        datasets.push(ds);
    }
    ctx.start(&inputs)?;
    let t = &ctx.config.tomography;
    let povm = build_povm(t.n_max, t.eta)?;
    let mut results: Vec<ReconstructionResult> = Vec::new();
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for (i, (ds, p)) in datasets.iter().zip(&paths).enumerate() {
        let res = reconstruct(ds, &povm, &t.options())?;
        ctx.write(&format!("{}.csv", indexed("likelihood", i, ctx.repeat)), &res.trace_csv())?;
        if !res.converged {
            warnings.push(format!("{}: no convergence after {} iterations", p.display(), res.iterations));
        }
        runs.push(RunSummary {
            dataset: p.display().to_string(),
            records: ds.len(),
            vacuum_scale: ds.vacuum_scale,
            wigner_origin: res.rho.wigner_at_origin(),
            iterations: res.iterations,
            converged: res.converged,
            final_log_likelihood: *res.likelihood_trace.last().unwrap_or(&f64::NAN),
            diagnostics: res.diagnostics.clone(),
            populations: res.rho.populations(),
        });
        results.push(res);
    }
    let states: Vec<DensityMatrix> = results.iter().map(|r| r.rho.clone()).collect();
    let mean_rho = DensityMatrix::average(&states)?;
    let ws: Vec<f64> = runs.iter().map(|r| r.wigner_origin).collect();
    let n = ws.len() as f64;
    let mean = ws.iter().sum::<f64>() / n;
    let sd = if ws.len() > 1 {
        (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    ctx.write_json("rho.json", &mean_rho.to_json())?;
    ctx.write("wigner.csv", &wigner_from_fock(&mean_rho, ctx.config.simulate.grid()).to_csv())?;
    ctx.write_json(
        "metrics.json",
        &json!({
            "convention": CONVENTION,
            "n_max": t.n_max,
            "povm_eta": t.eta,
            "runs": runs,
            "mean_wigner_origin": mean,
            "sd_wigner_origin": if sd.is_finite() { json!(sd) } else { json!(null) },
            "se_wigner_origin": if sd.is_finite() { json!(sd / n.sqrt()) } else { json!(null) },
            "averaged_state_wigner_origin": mean_rho.wigner_at_origin(),
            "averaged_populations": mean_rho.populations(),
        }),
    )?;
    Ok(warnings)
}

/// Spectrum from a CSV of dB values, or Welch-averaged from a noise trace.
fn read_spectrum(ctx: &Context, path: &Path) -> Result<SpectrumData, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or_default().trim();
    if header != "time_s,squeezed,antisqueezed" {
        return Ok(SpectrumData::from_csv(&text)?);
    }
    let (mut t, mut sq, mut anti) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Numeric(format!("{} line {}: {e}", path.display(), i + 2)))?;
        if v.len() != 3 {
            return Err(CliError::Numeric(format!("{} line {}: expected 3 columns", path.display(), i + 2)));
        }
        t.push(v[0]);
        sq.push(v[1]);
        anti.push(v[2]);
    }
    if t.len() < 2 {
        return Err(CliError::Numeric("noise trace needs at least two samples".into()));
    }
    let fs_hz = 1.0 / (t[1] - t[0]);
    let s = &ctx.config.spectrum;
    let (freqs, psd_sq) = welch_psd(&sq, fs_hz, s.welch_segment)?;
    let (_, psd_anti) = welch_psd(&anti, fs_hz, s.welch_segment)?;
    let (mut f, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..freqs.len() {
        if freqs[i] >= s.f_min_hz && freqs[i] <= s.f_max_hz {
            f.push(freqs[i]);
            // per-sample normalisation: vacuum reads 1/2
            a.push(10.0 * (psd_sq[i] / 0.5).log10());
            b.push(10.0 * (psd_anti[i] / 0.5).log10());
        }
    }
    Ok(SpectrumData::new(f, a, b)?)
}

pub fn fit_spectrum_cmd(ctx: &Context, input: &Path) -> CliResult {
    if !input.is_file() {
        return Err(CliError::Config(format!("spectrum file {} not found", input.display())));
    }
    ctx.start(&[input.to_path_buf()])?;
    let data = read_spectrum(ctx, input)?;
    let hwhm = ctx.config.opo.cavity_hwhm_hz;
    let fit = fit_spectrum(&data, hwhm)?;
    let model = SpectrumData::model(&data.freq_hz, hwhm, fit.pump, fit.eta_t);
    let mut csv = String::from("frequency_hz,squeezed_db,antisqueezed_db,fit_squeezed_db,fit_antisqueezed_db\n");
    for i in 0..data.len() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            data.freq_hz[i], data.squeezed_db[i], data.antisqueezed_db[i], model.squeezed_db[i], model.antisqueezed_db[i]
        ));
    }
    ctx.write("fitted_spectrum.csv", &csv)?;
    let finite = |v: f64| if v.is_finite() { json!(v) } else { json!(null) };
    ctx.write_json(
        "fit.json",
        &json!({
            "cavity_hwhm_hz": hwhm,
            "points": data.len(),
            "gain": fit.gain,
            "gain_std": finite(fit.gain_std()),
            "pump_parameter": fit.pump,
            "eta_t": fit.eta_t,
            "eta_t_std": finite(fit.eta_std()),
            "covariance_pump_eta": fit.covariance.iter().map(|r| r.iter().map(|v| finite(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "rms_residual_db": fit.rms_residual_db,
            "iterations": fit.iterations,
            "degenerate": fit.degenerate,
        }),
    )?;
    let mut warnings = Vec::new();
    if fit.degenerate {
        warnings.push("spectrum does not constrain both parameters (degenerate fit)".into());
    }
    Ok(warnings)
}

pub fn optimize_mode_cmd(ctx: &Context) -> CliResult {
    ctx.start(&[])?;
    let model = ctx.model()?;
    let o = &ctx.config.optimize;
    let opt = optimize_mode_function(&model, o.objective, o.options())?;
    let mut csv = String::from("iteration,gamma_hz,kappa_hz,value\n");
    for (i, (g, k, v)) in opt.trace.iter().enumerate() {
        csv.push_str(&format!("{i},{g},{k},{v}\n"));
    }
    ctx.write("optimizer_trace.csv", &csv)?;
    ctx.write_json(
        "optimum.json",
        &json!({
            "objective": o.objective,
            "gamma_hz": opt.gamma_hz,
            "kappa_hz": opt.kappa_hz,
            "value": opt.value,
            "evaluations": opt.evaluations,
            "converged": opt.converged,
        }),
    )?;
    Ok(if opt.converged {
        Vec::new()
    } else {
        vec![format!("optimizer stopped after {} evaluations without converging", opt.evaluations)]
    })
}

pub fn wigner_cmd(ctx: &Context, input: &Path) -> CliResult {
    if !input.is_file() {
        return Err(CliError::Config(format!("density matrix {} not found", input.display())));
    }
    ctx.start(&[input.to_path_buf()])?;
    let j: DensityMatrixJson = serde_json::from_str(&fs::read_to_string(input)?)?;
    let rho = DensityMatrix::from_json(&j)?;
    let grid = wigner_from_fock(&rho, ctx.config.simulate.grid());
    ctx.write("wigner.csv", &grid.to_csv())?;
    ctx.write_json(
        "metrics.json",
        &json!({
            "convention": CONVENTION,
            "n_max": rho.n_max(),
            "wigner_origin": rho.wigner_at_origin(),
            "trace_deficit": grid.trace_deficit,
            "grid_min": grid.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min),
        }),
    )?;
    Ok(if grid.truncation_warning() {
        vec![format!("trace deficit {:.2e}: basis truncates the state", grid.trace_deficit)]
    } else {
        Vec::new()
    })
}
