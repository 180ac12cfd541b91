use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use needlet::frames::{
    dual_windows, needlet_analyze_family, needlet_synthesize, reference_window, spline_family,
    GridPolicy, NeedletCoefficients, ReferenceKind, SpectralWindow, WindowFamily,
};
use needlet::grid::{build_grid, SphereMap};
use needlet::io::{
    parse_alm, parse_manifest, parse_mask_spec, parse_sphere_map, parse_spectrum, parse_window,
    write_alm, write_criterion_report, write_manifest, write_mise_matrix, write_sphere_map,
    write_window, CriterionRow, FamilyManifest, ManifestEntry, MaskSpec,
};
use needlet::mise::{
    mask_error_curve, mise_optimal_window, mise_samples, mise_value, q_matrix_axisym, q_matrix_mc,
    simulate_realization, MaskErrorMethod, MiseProblem, PowerSpectrum, WeightFunction,
};
use needlet::sht::{analyze, synthesize, HarmonicCoefficients};
use needlet::slepian::{
    concentration, lp_concentration, slepian_window, uncertainty_product, ConcentrationProblem,
    LpNorm, Smoothing,
};
use serde_json::{json, Value};

use crate::args::*;
use crate::CliError;

type Res<T> = Result<T, CliError>;

/// Files and scalar results of one run.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    results: serde_json::Map<String, Value>,
}

impl Output {
    pub fn new(dir: &Path) -> Res<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), files: Vec::new(), results: Default::default() })
    }

    fn write(&mut self, name: &str, text: &str) -> Res<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }

    /// `manifest.json` with the resolved configuration.
    pub fn finish(mut self, cli: &Cli, argv: &[String]) -> Res<()> {
        let manifest = json!({
            "tool": "needlet",
            "version": env!("CARGO_PKG_VERSION"),
            "argv": argv,
            "config": cli,
            "outputs": self.files,
            "results": self.results,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.files = Vec::new();
        self.write("manifest.json", &text)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn relative_to(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn file_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn band(v: &[usize]) -> (usize, usize) {
    (v[0], v[1])
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

// ------------------------------------------------------------- loaders

fn load_window(path: &Path) -> Res<SpectralWindow> {
    Ok(parse_window(&read_text(path)?)?.window)
}

struct LoadedFamily {
    family: WindowFamily,
    ids: Vec<(i32, String)>,
}

fn load_family(path: &Path) -> Res<LoadedFamily> {
    let manifest = parse_manifest(&read_text(path)?)?;
    let mut scales = Vec::new();
    let mut ids = Vec::new();
    for e in &manifest.scales {
        let p = relative_to(path, &e.path);
        scales.push((e.label, load_window(&p)?));
        ids.push((e.label, file_id(&p)));
    }
    Ok(LoadedFamily { family: WindowFamily::new(scales)?, ids })
}

fn load_windows(inputs: &WindowInputs) -> Res<Vec<(String, SpectralWindow)>> {
    let mut out = Vec::new();
    if let Some(f) = &inputs.family {
        let fam = load_family(f)?;
        for ((_, id), s) in fam.ids.into_iter().zip(fam.family.scales()) {
            out.push((id, s.window.clone()));
        }
    }
    for p in &inputs.windows {
        out.push((file_id(p), load_window(p)?));
    }
    if out.is_empty() {
        return Err(CliError::Usage("no windows given; use --windows or --family".into()));
    }
    Ok(out)
}

/// Multipoles of a map file (analysed to `lmax`) or a multipole file.
fn load_field(path: &Path, lmax: Option<usize>) -> Res<HarmonicCoefficients> {
    let text = read_text(path)?;
    if text.trim_start().starts_with("# grid") {
        let map = parse_sphere_map(&text)?;
        let bl = map.grid().band_limit();
        let l = lmax.map_or(bl, |x| x.min(bl));
        Ok(analyze(&map, l)?)
    } else {
        Ok(parse_alm(&text)?)
    }
}

fn load_mask(path: &Path, lmax: usize) -> Res<WeightFunction> {
    let spec = parse_mask_spec(&read_text(path)?)?;
    match &spec {
        MaskSpec::Axisym { apod_deg, .. } => {
            let segments = spec.segments().expect("axisymmetric spec");
            Ok(WeightFunction::zonal(segments, apod_deg.to_radians(), lmax)?)
        }
        MaskSpec::Map { map } => {
            let p = relative_to(path, map);
            let m = parse_sphere_map(&read_text(&p)?)?;
            Ok(WeightFunction::from_map(&m, lmax)?)
        }
    }
}

fn load_spectrum(path: &Path) -> Res<PowerSpectrum> {
    Ok(parse_spectrum(&read_text(path)?)?)
}

fn load_problem(mask: &MaskArgs, lmin: usize, lmax: usize) -> Res<MiseProblem> {
    let w = load_mask(&mask.mask, mask.mask_lmax)?;
    let c = load_spectrum(&mask.spectrum)?;
    Ok(MiseProblem::new(lmin, lmax, c, w)?)
}

fn check_angles(theta0: &[f64]) -> Res<Vec<f64>> {
    theta0
        .iter()
        .map(|t| {
            if t.is_finite() && *t > 0.0 && *t < 180.0 {
                Ok(t.to_radians())
            } else {
                Err(CliError::Usage(format!("--theta0 {t} must lie in (0, 180) degrees")))
            }
        })
        .collect()
}

// ------------------------------------------------------------- reports

fn criteria_rows(id: &str, w: &SpectralWindow, theta0_deg: &[f64]) -> Res<Vec<CriterionRow>> {
    let mut rows = Vec::new();
    let row = |criterion: &str, t: Option<f64>, p: Option<f64>, value: f64| CriterionRow {
        window_id: id.to_string(),
        criterion: criterion.to_string(),
        theta0_deg: t,
        p,
        value,
    };
    for (&deg, rad) in theta0_deg.iter().zip(check_angles(theta0_deg)?) {
        rows.push(row("concentration", Some(deg), None, concentration(w, rad)?));
        for norm in [LpNorm::L1, LpNorm::L2, LpNorm::Infinity] {
            rows.push(row("lp", Some(deg), Some(norm.p()), lp_concentration(w, rad, norm)?));
        }
    }
    let u = uncertainty_product(w).unwrap_or(f64::NAN);
    rows.push(row("heisenberg", None, None, u));
    Ok(rows)
}

fn window_name(label: i32) -> String {
    format!("window_j{label}.csv")
}

// -------------------------------------------------------------- design

pub fn design(kind: &DesignKind, seed: u64, out: &mut Output) -> Res<()> {
    match kind {
        DesignKind::Spline(a) => {
            let family = spline_family(a.base, a.order, a.jmax)?.sqrt()?;
            let mut manifest = FamilyManifest { scales: Vec::new() };
            let mut rows = Vec::new();
            for s in family.scales() {
                let name = window_name(s.label);
                out.write(&name, &write_window(&s.window, "sqrt_spline"))?;
                manifest.scales.push(ManifestEntry { label: s.label, path: name.clone() });
                rows.extend(criteria_rows(&file_id(Path::new(&name)), &s.window, &a.report.theta0)?);
            }
            out.write("family.json", &(write_manifest(&manifest) + "\n"))?;
            out.write("criteria.csv", &write_criterion_report(&rows))?;
            out.result("scales", family.len());
            out.result("lmax", family.lmax());
        }
        DesignKind::Slepian(a) => {
            let (lmin, lmax) = band(&a.band);
            let thetas = check_angles(&a.theta0)?;
            let smoothing = match a.smoothing.as_str() {
                "auto" => Smoothing::Auto,
                "none" => Smoothing::None,
                s => match s.parse::<f64>() {
                    Ok(v) if v.is_finite() && v >= 0.0 => Smoothing::Fixed(v),
                    _ => {
                        return Err(CliError::Usage(format!(
                            "--smoothing must be auto, none or a nonnegative number, got '{s}'"
                        )))
                    }
                },
            };
            let problem = ConcentrationProblem::new(lmin, lmax, thetas[0])?.with_smoothing(smoothing);
            let d = slepian_window(&problem)?;
            out.write("window_slepian.csv", &write_window(&d.window, "slepian"))?;
            let rows = criteria_rows("window_slepian", &d.window, &a.theta0)?;
            out.write("criteria.csv", &write_criterion_report(&rows))?;
            out.result("smoothing", d.smoothing);
            out.result("concentration", d.concentration);
        }
        DesignKind::Mise(a) => {
            let (lmin, lmax) = band(&a.band);
            let problem = load_problem(&a.mask, lmin, lmax)?;
            let q = match a.n_mc {
                Some(n) => q_matrix_mc(&problem, n, seed)?,
                None => q_matrix_axisym(&problem)?,
            };
            let w = mise_optimal_window(&q, &problem.spectrum)?;
            let r = mise_value(&q, &problem.spectrum, &w)?;
            out.write("window_mise.csv", &write_window(&w, "mise"))?;
            let (qt, se) = write_mise_matrix(&q);
            out.write("q.csv", &qt)?;
            if let Some(se) = se {
                out.write("q_se.csv", &se)?;
            }
            let row = CriterionRow {
                window_id: "window_mise".into(),
                criterion: "mise".into(),
                theta0_deg: None,
                p: None,
                value: r,
            };
            out.write("criteria.csv", &write_criterion_report(&[row]))?;
            out.result("mise", r);
        }
        DesignKind::Reference(a) => {
            let need = |what: &str| CliError::Usage(format!("--kind {:?} needs --{what}", a.kind));
            let j_u32 = || -> Res<u32> {
                let j = a.j.ok_or_else(|| need("j"))?;
                u32::try_from(j).map_err(|_| CliError::Usage(format!("--j {j} must be >= 0")))
            };
            let (kind, tag) = match a.kind {
                ReferenceName::Exponential => (ReferenceKind::Exponential { j: j_u32()? }, "exponential"),
                ReferenceName::Bspline3 => (ReferenceKind::BSpline3 { j: j_u32()? }, "bspline3"),
                ReferenceName::MexicanHat => (
                    ReferenceKind::MexicanHat {
                        r: a.r.ok_or_else(|| need("R"))?,
                        lmax: a.lmax.ok_or_else(|| need("lmax"))?,
                    },
                    "mexican_hat",
                ),
                ReferenceName::SqrtSpline => (
                    ReferenceKind::SqrtSpline {
                        base: a.base.ok_or_else(|| need("B"))?,
                        order: a.order.ok_or_else(|| need("order"))?,
                        j: a.j.ok_or_else(|| need("j"))?,
                    },
                    "sqrt_spline",
                ),
            };
            let w = reference_window(kind)?;
            let name = format!("window_{tag}");
            out.write(&format!("{name}.csv"), &write_window(&w, tag))?;
            let rows = criteria_rows(&name, &w, &a.report.theta0)?;
            out.write("criteria.csv", &write_criterion_report(&rows))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------- analysis pipeline

pub fn analyze_cmd(a: &AnalyzeArgs, out: &mut Output) -> Res<()> {
    let fam = load_family(&a.family)?;
    let alm = load_field(&a.input, Some(fam.family.lmax()))?;
    let policy = if a.per_scale_grid { GridPolicy::PerScale } else { GridPolicy::Shared };
    let coeffs = needlet_analyze_family(&alm, &fam.family, policy)?;
    let mut manifest = FamilyManifest { scales: Vec::new() };
    for c in &coeffs {
        let name = format!("beta_{}.csv", c.scale);
        let map = SphereMap::new(c.grid().clone(), c.values().to_vec())?;
        out.write(&name, &write_sphere_map(&map))?;
        manifest.scales.push(ManifestEntry { label: c.scale, path: name });
    }
    out.write("coefficients.json", &(write_manifest(&manifest) + "\n"))?;
    if a.check {
        let duals = dual_windows(&fam.family)?;
        let rec = needlet_synthesize(&coeffs, &duals)?;
        let err = rec.max_abs_diff(&alm.resized(rec.lmax()));
        println!("max_reconstruction_error={}", fmt(err));
        out.result("max_reconstruction_error", err);
    }
    Ok(())
}

pub fn synthesize_cmd(a: &SynthesizeArgs, out: &mut Output) -> Res<()> {
    let fam = load_family(&a.family)?;
    let manifest = parse_manifest(&read_text(&a.coefficients)?)?;
    let mut coeffs = Vec::new();
    for e in &manifest.scales {
        let map = parse_sphere_map(&read_text(&relative_to(&a.coefficients, &e.path))?)?;
        let grid = map.grid().clone();
        coeffs.push(NeedletCoefficients::new(e.label, grid, map.into_values())?);
    }
    if coeffs.is_empty() {
        return Err(CliError::Usage("coefficient manifest lists no scales".into()));
    }
    let duals = dual_windows(&fam.family)?;
    let rec = needlet_synthesize(&coeffs, &duals)?;
    out.write("reconstruction_alm.csv", &write_alm(&rec))?;
    let map = synthesize(&rec, &Arc::new(build_grid(rec.lmax())));
    out.write("reconstruction_map.csv", &write_sphere_map(&map))?;
    if let Some(r) = &a.reference {
        let reference = load_field(r, Some(rec.lmax()))?;
        let err = rec.max_abs_diff(&reference.resized(rec.lmax()));
        println!("max_reconstruction_error={}", fmt(err));
        out.result("max_reconstruction_error", err);
    }
    Ok(())
}

pub fn simulate_cmd(a: &SimulateArgs, seed: u64, out: &mut Output) -> Res<()> {
    let spectrum = load_spectrum(&a.spectrum)?;
    let grid = Arc::new(build_grid(spectrum.lmax()));
    for i in 0..a.n {
        let alm = simulate_realization(&spectrum, seed, i as u64);
        let text = match a.format {
            FieldFormat::Alm => write_alm(&alm),
            FieldFormat::Map => write_sphere_map(&synthesize(&alm, &grid)),
        };
        out.write(&format!("realization_{i:04}.csv"), &text)?;
    }
    out.result("realizations", a.n);
    Ok(())
}

// ----------------------------------------------------------- evaluation

fn alpha_grid(v: &[f64]) -> Res<Vec<f64>> {
    let (a0, a1, step) = (v[0], v[1], v[2]);
    if !(a0.is_finite() && a1.is_finite() && step.is_finite() && a0 >= 0.0 && a1 >= a0 && step > 0.0) {
        return Err(CliError::Usage("--alpha-grid needs 0 <= A0 <= A1 and STEP > 0".into()));
    }
    let n = ((a1 - a0) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(CliError::Usage("--alpha-grid has too many points".into()));
    }
    Ok((0..n).map(|i| a0 + i as f64 * step).collect())
}

fn parse_p(s: &str) -> Res<LpNorm> {
    let p = match s {
        "inf" | "Inf" | "infinity" => f64::INFINITY,
        _ => s.parse::<f64>().map_err(|_| CliError::Usage(format!("--p '{s}' is not a number")))?,
    };
    Ok(LpNorm::from_p(p)?)
}

pub fn evaluate(kind: &EvaluateKind, seed: u64, out: &mut Output) -> Res<()> {
    match kind {
        EvaluateKind::Concentration(a) => {
            let thetas = check_angles(&a.theta0)?;
            let mut rows = Vec::new();
            for (id, w) in load_windows(&a.inputs)? {
                for (&deg, &rad) in a.theta0.iter().zip(&thetas) {
                    rows.push(CriterionRow {
                        window_id: id.clone(),
                        criterion: "concentration".into(),
                        theta0_deg: Some(deg),
                        p: None,
                        value: concentration(&w, rad)?,
                    });
                }
            }
            out.write("concentration.csv", &write_criterion_report(&rows))?;
        }
        EvaluateKind::Lp(a) => {
            let thetas = check_angles(&a.theta0)?;
            let norms = a.p.iter().map(|s| parse_p(s)).collect::<Res<Vec<_>>>()?;
            let mut rows = Vec::new();
            for (id, w) in load_windows(&a.inputs)? {
                for (&deg, &rad) in a.theta0.iter().zip(&thetas) {
                    for &norm in &norms {
                        rows.push(CriterionRow {
                            window_id: id.clone(),
                            criterion: "lp".into(),
                            theta0_deg: Some(deg),
                            p: Some(norm.p()),
                            value: lp_concentration(&w, rad, norm)?,
                        });
                    }
                }
            }
            out.write("lp.csv", &write_criterion_report(&rows))?;
        }
        EvaluateKind::Heisenberg(a) => {
            let mut rows = Vec::new();
            for (id, w) in load_windows(&a.inputs)? {
                let value = uncertainty_product(&w).unwrap_or_else(|e| {
                    eprintln!("needlet: {id}: {e}; reporting NaN");
                    f64::NAN
                });
                rows.push(CriterionRow {
                    window_id: id,
                    criterion: "heisenberg".into(),
                    theta0_deg: None,
                    p: None,
                    value,
                });
            }
            out.write("heisenberg.csv", &write_criterion_report(&rows))?;
        }
        EvaluateKind::MaskError(a) => {
            let alphas = alpha_grid(&a.alpha_grid)?;
            let method = match a.method {
                MethodName::Empirical => MaskErrorMethod::Empirical,
                MethodName::Gaussian => MaskErrorMethod::Gaussian,
            };
            let mut text = String::from("window_id,alpha,value\n");
            for (id, w) in load_windows(&a.inputs)? {
                let problem = load_problem(&a.mask, w.lmin(), w.lmax())?;
                let curve = mask_error_curve(&problem, &w, &alphas, a.n_mc, seed, method)?;
                for (al, v) in alphas.iter().zip(&curve) {
                    let _ = writeln!(text, "{id},{},{}", fmt(*al), fmt(*v));
                }
            }
            out.write("mask_error.csv", &text)?;
        }
        EvaluateKind::Mise(a) => {
            if a.n_mc == 0 {
                return Err(CliError::Usage("--n-mc must be positive".into()));
            }
            let mut text = String::from("window_id,realization,value\n");
            for (id, w) in load_windows(&a.inputs)? {
                let problem = load_problem(&a.mask, w.lmin(), w.lmax())?;
                let samples = mise_samples(&problem, &w, a.n_mc, seed)?;
                for (i, v) in samples.iter().enumerate() {
                    let _ = writeln!(text, "{id},{i},{}", fmt(*v));
                }
            }
            out.write("mise.csv", &text)?;
        }
    }
    Ok(())
}
