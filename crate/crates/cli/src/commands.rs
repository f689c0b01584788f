use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tightwin::formats::{
    check_csv, write_spectrum_csv, write_summary_csv, write_trace_csv, write_window_csv, Metrics, SummaryRow,
    WindowFile,
};
use tightwin::gabor::{is_tight, verify_reconstruction, DEFAULT_TIGHT_TOL};
use tightwin::solver::{init_from_slepian, solve, sweep, SolverConfig, SolverStatus, SolverTrace};
use tightwin::spectral::{build_q, concentration_ratio, sidelobe_energy, slepian, spectrum, DEFAULT_OVERSAMPLING};
use tightwin::{GaborParams, Window};

use crate::error::{CliError, CliResult};
use crate::manifest::{Parameters, RunManifest};
use crate::proportion::Proportion;
use crate::{Cli, Command};

/// Largest acceptable round-trip error in `verify`.
const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub lambda: f64,
    pub deviation: f64,
    pub is_tight: bool,
    /// Absent when the window is not tight and no round trip was attempted.
    pub max_error: Option<f64>,
    #[serde(rename = "L")]
    pub signal_len: usize,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn config(&self) -> CliResult<SolverConfig> {
        let cfg = SolverConfig {
            delta: self.cli.delta,
            max_iter: self.cli.imax,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Slepian { k, p, a, m } => cmd_slepian(&ctx, *k, *p, *a, *m),
        Command::Design { k, a, m, p, init } => cmd_design(&ctx, *k, *a, *m, *p, init),
        Command::Sweep { k, a, m, pmax } => cmd_sweep(&ctx, *k, *a, *m, *pmax),
        Command::Analyze { window, p, num_points } => cmd_analyze(&ctx, window, *p, *num_points),
        Command::Verify { window, l, trials } => cmd_verify(&ctx, window, *l, *trials),
        Command::SchemaCheck { files } => cmd_schema_check(&ctx, files),
    }
}

/// Smallest multiple of `a` that is at least `max(4K, M)`.
fn default_signal_len(k: usize, a: usize, m: usize) -> usize {
    (4 * k).max(m).div_ceil(a) * a
}

fn lattice(k: usize, a: usize, m: Option<usize>) -> CliResult<GaborParams> {
    if k == 0 || a == 0 {
        return Err(CliError::Usage("K and a must be positive".into()));
    }
    let m = m.unwrap_or(k);
    Ok(GaborParams::new(default_signal_len(k, a, m), k, a, m)?)
}

/// `dir/stem<suffix>.<ext>` next to `out`.
fn companion(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write(path: &Path, bytes: &[u8], manifest: &mut RunManifest) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    manifest.record(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> CliResult<()> {
    fs::write(path, to_json(manifest)).map_err(|e| CliError::io(path, e))
}

fn read_window_file(path: &Path) -> CliResult<WindowFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    WindowFile::from_json(&text).map_err(|e| CliError::io(path, e))
}

fn metrics(w: &Window, p: f64) -> CliResult<Metrics> {
    let q = build_q(p, w.len())?;
    let t = is_tight(w, DEFAULT_TIGHT_TOL);
    Ok(Metrics {
        p,
        concentration: concentration_ratio(w.coeffs(), &q)?,
        sidelobe_energy: sidelobe_energy(w.coeffs(), &q)?,
        is_tight: t.tight,
        lambda: t.lambda,
    })
}

fn window_set(
    out: &Path,
    w: &Window,
    p: f64,
    lambda: Option<f64>,
    manifest: &mut RunManifest,
) -> CliResult<()> {
    let file = WindowFile::from_window(w, Some(p), lambda);
    write(out, format!("{}\n", file.to_json()).as_bytes(), manifest)?;
    let mut csv = Vec::new();
    write_window_csv(&mut csv, w.coeffs())?;
    write(&companion(out, "", "csv"), &csv, manifest)
}

fn trace_csv(trace: &SolverTrace) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace)?;
    Ok(buf)
}

fn status_error(status: SolverStatus, grad: f64) -> CliError {
    CliError::Solver(format!("status {status}, final gradient norm {grad:e}"))
}

fn cmd_slepian(ctx: &Ctx, k: usize, p: Proportion, a: Option<usize>, m: Option<usize>) -> CliResult<()> {
    let pv = p.check_design().map_err(CliError::Usage)?;
    if k < 2 {
        return Err(CliError::Usage(format!("K = {k} must be at least 2")));
    }
    let a = match a {
        Some(a) => a,
        None if k >= 4 && k % 4 == 0 => k / 4,
        None => return Err(CliError::Usage(format!("give --a explicitly; K = {k} is not a multiple of 4"))),
    };
    let params = lattice(k, a, m)?;
    let w = slepian(pv, &params)?;

    let out = ctx.cli.out.clone().unwrap_or_else(|| PathBuf::from("slepian.json"));
    let mut manifest = RunManifest::new(
        "slepian",
        Parameters {
            k: Some(k),
            a: Some(a),
            m: Some(params.channels()),
            p: Some(p.to_string()),
            p_value: Some(pv),
            ..Default::default()
        },
    );
    window_set(&out, &w, pv, None, &mut manifest)?;
    write_manifest(&companion(&out, "_manifest", "json"), &manifest)?;
    ctx.note(format!("wrote {}", out.display()));
    Ok(())
}

fn initial_window(init: &str, p: f64, params: &GaborParams) -> CliResult<Window> {
    if init == "slepian" {
        return Ok(init_from_slepian(p, params)?);
    }
    let path = init
        .strip_prefix("file:")
        .ok_or_else(|| CliError::Usage(format!("--init must be `slepian` or `file:<path>`, got {init:?}")))?;
    let file = read_window_file(Path::new(path))?;
    if (file.k, file.a, file.m) != (params.window_len(), params.hop(), params.channels()) {
        return Err(CliError::Usage(format!(
            "{path} has K = {}, a = {}, M = {}, which differs from the requested lattice",
            file.k, file.a, file.m
        )));
    }
    let w = file.to_window(params.signal_len())?;
    let t = is_tight(&w, DEFAULT_TIGHT_TOL);
    if !t.tight {
        return Err(CliError::Usage(format!(
            "{path} is not tight (relative deviation {:e})",
            t.deviation
        )));
    }
    // a tight window only needs rescaling to the unit frame constant
    Ok(w.scaled((params.unit_frame_constant() / t.lambda).sqrt()))
}

fn cmd_design(ctx: &Ctx, k: usize, a: usize, m: Option<usize>, p: Proportion, init: &str) -> CliResult<()> {
    let pv = p.check_design().map_err(CliError::Usage)?;
    let params = lattice(k, a, m)?;
    let cfg = ctx.config()?;
    let w0 = initial_window(init, pv, &params)?;
    ctx.note(format!("designing K = {k}, a = {a}, M = {}, p = {p}", params.channels()));
    let sol = solve(&w0, pv, &cfg)?;

    let out = ctx.cli.out.clone().unwrap_or_else(|| PathBuf::from("design.json"));
    let mut manifest = RunManifest::new(
        "design",
        Parameters {
            k: Some(k),
            a: Some(a),
            m: Some(params.channels()),
            p: Some(p.to_string()),
            p_value: Some(pv),
            delta: Some(cfg.delta),
            imax: Some(cfg.max_iter),
            init: Some(init.to_string()),
            ..Default::default()
        },
    );
    window_set(&out, &sol.window, pv, Some(params.unit_frame_constant()), &mut manifest)?;
    write(&companion(&out, "_trace", "csv"), &trace_csv(&sol.trace)?, &mut manifest)?;
    write(
        &companion(&out, "_metrics", "json"),
        &to_json(&metrics(&sol.window, pv)?),
        &mut manifest,
    )?;
    write_manifest(&companion(&out, "_manifest", "json"), &manifest)?;

    for w in &sol.trace.warnings {
        ctx.note(format!("warning: {w}"));
    }
    ctx.note(format!(
        "{} after {} iterations, gradient norm {:e}",
        sol.trace.status,
        sol.trace.iterations,
        sol.trace.final_grad_norm()
    ));
    if sol.trace.status != SolverStatus::Converged {
        return Err(status_error(sol.trace.status, sol.trace.final_grad_norm()));
    }
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, k: usize, a: usize, m: Option<usize>, pmax: u64) -> CliResult<()> {
    if pmax == 0 || pmax >= k as u64 {
        return Err(CliError::Usage(format!("--pmax must lie in 1..{k}")));
    }
    let params = lattice(k, a, m)?;
    let cfg = ctx.config()?;
    let ps: Vec<f64> = (1..=pmax).map(|n| n as f64 / k as f64).collect();
    ctx.note(format!("sweeping p = 1/{k} .. {pmax}/{k}"));
    let entries = sweep(&ps, &params, &cfg)?;

    let dir = ctx.cli.outdir.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let mut manifest = RunManifest::new(
        "sweep",
        Parameters {
            k: Some(k),
            a: Some(a),
            m: Some(params.channels()),
            p_max_numerator: Some(pmax),
            delta: Some(cfg.delta),
            imax: Some(cfg.max_iter),
            init: Some("slepian".into()),
            ..Default::default()
        },
    );
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (n, e) in (1..=pmax).zip(&entries) {
        let tag = format!("_p{n}_{k}");
        window_set(
            &dir.join(format!("window{tag}.json")),
            &e.window,
            e.p,
            Some(params.unit_frame_constant()),
            &mut manifest,
        )?;
        write(&dir.join(format!("trace{tag}.csv")), &trace_csv(&e.trace)?, &mut manifest)?;
        let mt = metrics(&e.window, e.p)?;
        write(&dir.join(format!("metrics{tag}.json")), &to_json(&mt), &mut manifest)?;
        ctx.note(format!(
            "p = {n}/{k}: {} in {} iterations, sidelobe energy {:e}",
            e.trace.status, e.trace.iterations, mt.sidelobe_energy
        ));
        if e.trace.status != SolverStatus::Converged {
            failed.push(format!("{n}/{k} ({})", e.trace.status));
        }
        rows.push(SummaryRow {
            p_numerator: n,
            iterations: e.trace.iterations,
            status: e.trace.status.to_string(),
            concentration: mt.concentration,
            sidelobe_energy: mt.sidelobe_energy,
        });
    }
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &rows)?;
    write(&dir.join("summary.csv"), &summary, &mut manifest)?;
    write_manifest(&dir.join("manifest.json"), &manifest)?;
    if !failed.is_empty() {
        return Err(CliError::Solver(format!("not converged for p = {}", failed.join(", "))));
    }
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, path: &Path, p: Option<Proportion>, num_points: Option<usize>) -> CliResult<()> {
    let file = read_window_file(path)?;
    let (p_text, pv) = match (p, file.p) {
        (Some(p), _) => (p.to_string(), p.value()),
        (None, Some(v)) => (format!("{v}"), v),
        (None, None) => return Err(CliError::Usage(format!("{} stores no p; pass --p", path.display()))),
    };
    if !(pv > 0.0 && pv <= 1.0) {
        return Err(CliError::Usage(format!("p = {p_text} must lie in (0, 1]")));
    }
    let n = num_points.unwrap_or(DEFAULT_OVERSAMPLING * file.k);
    if n < file.k {
        return Err(CliError::Usage(format!("--num-points {n} is below K = {}", file.k)));
    }
    let w = file.to_window(default_signal_len(file.k, file.a, file.m))?;

    let out = ctx.cli.out.clone().unwrap_or_else(|| PathBuf::from("spectrum.csv"));
    let mut manifest = RunManifest::new(
        "analyze",
        Parameters {
            k: Some(file.k),
            a: Some(file.a),
            m: Some(file.m),
            p: Some(p_text),
            p_value: Some(pv),
            num_points: Some(n),
            ..Default::default()
        },
    );
    let mut csv = Vec::new();
    write_spectrum_csv(&mut csv, &spectrum(w.coeffs(), n)?)?;
    write(&out, &csv, &mut manifest)?;
    let mt = metrics(&w, pv)?;
    write(&companion(&out, "_metrics", "json"), &to_json(&mt), &mut manifest)?;
    write_manifest(&companion(&out, "_manifest", "json"), &manifest)?;
    ctx.note(format!(
        "concentration {}, sidelobe energy {:e}, tight: {}",
        mt.concentration, mt.sidelobe_energy, mt.is_tight
    ));
    Ok(())
}

fn cmd_verify(ctx: &Ctx, path: &Path, l: Option<usize>, trials: usize) -> CliResult<()> {
    let file = read_window_file(path)?;
    let signal_len = l.unwrap_or_else(|| default_signal_len(file.k, file.a, file.m));
    let params = file.params(signal_len)?;
    let w = file.to_window(signal_len)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let t = is_tight(&w, DEFAULT_TIGHT_TOL);
    let max_error = if t.tight {
        Some(verify_reconstruction(&w, &params, trials, ctx.cli.seed)?)
    } else {
        None
    };
    let passed = max_error.is_some_and(|e| e < RECONSTRUCTION_TOL);
    let report = VerifyReport {
        lambda: t.lambda,
        deviation: t.deviation,
        is_tight: t.tight,
        max_error,
        signal_len,
        trials,
        seed: ctx.cli.seed,
        passed,
    };

    println!(
        "tight: {} (lambda {}, max relative block deviation {:e})",
        t.tight, t.lambda, t.deviation
    );
    match max_error {
        Some(e) => println!("max relative reconstruction error over {trials} signals: {e:e}"),
        None => println!("reconstruction skipped: window is not tight"),
    }
    if let Some(out) = &ctx.cli.out {
        let mut manifest = RunManifest::new(
            "verify",
            Parameters {
                k: Some(file.k),
                a: Some(file.a),
                m: Some(file.m),
                l: Some(signal_len),
                trials: Some(trials),
                seed: Some(ctx.cli.seed),
                ..Default::default()
            },
        );
        write(out, &to_json(&report), &mut manifest)?;
        write_manifest(&companion(out, "_manifest", "json"), &manifest)?;
    }
    if !passed {
        return Err(CliError::Verification(match max_error {
            Some(e) => format!("reconstruction error {e:e} exceeds {RECONSTRUCTION_TOL:e}"),
            None => format!("block energies deviate by {:e} (relative)", t.deviation),
        }));
    }
    Ok(())
}

/// Names the JSON layout `text` conforms to.
fn json_kind(text: &str) -> Result<&'static str, String> {
    if let Ok(w) = serde_json::from_str::<WindowFile>(text) {
        return w.validate().map(|_| "window").map_err(|e| e.to_string());
    }
    if let Ok(m) = serde_json::from_str::<Metrics>(text) {
        return m.validate().map(|_| "metrics").map_err(|e| e.to_string());
    }
    if let Ok(m) = serde_json::from_str::<RunManifest>(text) {
        return m.validate().map(|_| "manifest").map_err(|e| e.to_string());
    }
    if serde_json::from_str::<VerifyReport>(text).is_ok() {
        return Ok("verify report");
    }
    Err("not a window, metrics, manifest or verify report".into())
}

fn cmd_schema_check(ctx: &Ctx, files: &[PathBuf]) -> CliResult<()> {
    let mut bad = Vec::new();
    for path in files {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let verdict = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => json_kind(&text).map(|k| k.to_string()),
            Some("csv") => check_csv(&text)
                .map(|(kind, rows)| format!("{kind:?} CSV, {rows} rows").to_lowercase())
                .map_err(|e| e.to_string()),
            _ => Err("expected a .json or .csv file".into()),
        };
        match verdict {
            Ok(kind) => {
                if !ctx.cli.quiet {
                    println!("{}: ok ({kind})", path.display());
                }
            }
            Err(e) => {
                println!("{}: INVALID ({e})", path.display());
                bad.push(path.display().to_string());
            }
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Verification(format!("invalid files: {}", bad.join(", "))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_names() {
        assert_eq!(companion(Path::new("out/w.json"), "_trace", "csv"), PathBuf::from("out/w_trace.csv"));
        assert_eq!(companion(Path::new("w.json"), "", "csv"), PathBuf::from("w.csv"));
    }

    #[test]
    fn signal_length_defaults() {
        assert_eq!(default_signal_len(512, 128, 512), 2048);
        assert_eq!(default_signal_len(12, 3, 64), 66);
    }
}
