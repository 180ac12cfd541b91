//! Text file formats exchanged with the command-line tool.
//!
//! Every parser takes the whole file as `&str` and reports the 1-based
//! line of the first problem. Writers emit 17 significant digits so that
//! values survive a round trip bit for bit.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::frames::SpectralWindow;
use crate::grid::{build_grid, RingGrid, SphereMap};
use crate::linalg::SymmetricMatrix;
use crate::mise::{MiseMatrix, PowerSpectrum, ZoneSegment};
use crate::sht::HarmonicCoefficients;
use crate::{Error, Result};

/// Upper bound on degrees accepted from files.
pub const MAX_FILE_DEGREE: usize = 4096;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// First `#` line as `key=value` pairs, with its line number.
fn header(text: &str) -> Result<(usize, Vec<(&str, &str)>)> {
    let (n, line) = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(n, "missing '#' header line"))?;
    let pairs = body
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect();
    Ok((n, pairs))
}

fn key<'a>(pairs: &[(&str, &'a str)], name: &str, line: usize) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse(line, format!("header lacks '{name}='")))
}

fn opt_key<'a>(pairs: &[(&str, &'a str)], name: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(line, format!("{what}: '{s}' is not a nonnegative integer")))
}

fn parse_degree(s: &str, line: usize, what: &str) -> Result<usize> {
    let v = parse_usize(s, line, what)?;
    if v > MAX_FILE_DEGREE {
        return Err(Error::parse(line, format!("{what} = {v} exceeds {MAX_FILE_DEGREE}")));
    }
    Ok(v)
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    let v = s
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("{what}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} is not finite")));
    }
    Ok(v)
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != n {
        return Err(Error::parse(lineno, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

fn expect_count(seen: usize, want: usize, text: &str) -> Result<()> {
    if seen != want {
        return Err(Error::parse(
            text.lines().count().max(1),
            format!("expected {want} rows, found {seen}"),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- maps

fn grid_shape(grid: &RingGrid) -> (usize, usize) {
    (grid.rings().len(), grid.rings()[0].n_phi)
}

/// `# grid lmax=<n>` followed by `ring_index, phi_index, theta, phi, value`.
/// Grids other than the minimal one of `lmax` also carry `rings=` and `nphi=`.
pub fn write_sphere_map(map: &SphereMap) -> String {
    let grid = map.grid();
    let (rings, nphi) = grid_shape(grid);
    let lmax = grid.band_limit();
    let mut out = format!("# grid lmax={lmax}");
    if (rings, nphi) != (lmax + 1, 2 * lmax + 1) {
        let _ = write!(out, " rings={rings} nphi={nphi}");
    }
    out.push('\n');
    let values = map.values();
    for (r, ring) in grid.rings().iter().enumerate() {
        let o = grid.ring_offset(r);
        for j in 0..ring.n_phi {
            let _ = writeln!(
                out,
                "{r}, {j}, {}, {}, {}",
                fmt(ring.theta),
                fmt(ring.phi(j)),
                fmt(values[o + j])
            );
        }
    }
    out
}

pub fn parse_sphere_map(text: &str) -> Result<SphereMap> {
    let (hl, pairs) = header(text)?;
    if !text.trim_start().starts_with("# grid") {
        return Err(Error::parse(hl, "expected '# grid lmax=<n>' header"));
    }
    let lmax = parse_degree(key(&pairs, "lmax", hl)?, hl, "lmax")?;
    let rings = match opt_key(&pairs, "rings") {
        Some(v) => parse_degree(v, hl, "rings")?,
        None => lmax + 1,
    };
    let nphi = match opt_key(&pairs, "nphi") {
        Some(v) => parse_degree(v, hl, "nphi")?,
        None => 2 * lmax + 1,
    };
    if rings == 0 || nphi == 0 {
        return Err(Error::parse(hl, "grid needs at least one ring and one longitude"));
    }
    if rings.saturating_mul(nphi) > 1 << 24 {
        return Err(Error::parse(hl, "grid too large"));
    }
    let grid = if (rings, nphi) == (lmax + 1, 2 * lmax + 1) {
        build_grid(lmax)
    } else {
        RingGrid::new(rings, nphi).map_err(|e| Error::parse(hl, e.to_string()))?
    };
    if grid.band_limit() != lmax {
        return Err(Error::parse(hl, format!("rings={rings} nphi={nphi} do not give lmax={lmax}")));
    }
    let n = grid.n_points();
    let mut values = Vec::with_capacity(n.min(1 << 16));
    for (lineno, line) in data_lines(text) {
        let k = values.len();
        if k >= n {
            return Err(Error::parse(lineno, format!("more than {n} rows for lmax={lmax}")));
        }
        let f = fields(line, 5, lineno)?;
        let r = parse_usize(f[0], lineno, "ring_index")?;
        let j = parse_usize(f[1], lineno, "phi_index")?;
        let (er, ej) = grid.locate(k);
        if (r, j) != (er, ej) {
            return Err(Error::parse(lineno, format!("expected point ({er}, {ej}), found ({r}, {j})")));
        }
        let (theta, phi) = grid.point(k);
        let t = parse_f64(f[2], lineno, "theta")?;
        let p = parse_f64(f[3], lineno, "phi")?;
        if (t - theta).abs() > 1e-9 || (p - phi).abs() > 1e-9 {
            return Err(Error::parse(lineno, "coordinates do not match the grid"));
        }
        values.push(parse_f64(f[4], lineno, "value")?);
    }
    expect_count(values.len(), n, text)?;
    SphereMap::new(Arc::new(grid), values)
}

// ------------------------------------------------------------ multipoles

/// `# lmax=<n> real=<0|1>` followed by `l, m, re, im` for `m >= 0`.
pub fn write_alm(alm: &HarmonicCoefficients) -> String {
    let mut out = format!("# lmax={} real={}\n", alm.lmax(), u8::from(alm.is_real()));
    for l in 0..=alm.lmax() {
        for (m, v) in alm.degree(l).iter().enumerate() {
            let _ = writeln!(out, "{l}, {m}, {}, {}", fmt(v.re), fmt(v.im));
        }
    }
    out
}

pub fn parse_alm(text: &str) -> Result<HarmonicCoefficients> {
    let (hl, pairs) = header(text)?;
    let lmax = parse_degree(key(&pairs, "lmax", hl)?, hl, "lmax")?;
    let real = match key(&pairs, "real", hl)? {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(hl, format!("real must be 0 or 1, found '{other}'"))),
    };
    let n = (lmax + 1) * (lmax + 2) / 2;
    let mut data = Vec::with_capacity(n.min(1 << 16));
    let (mut el, mut em) = (0usize, 0usize);
    for (lineno, line) in data_lines(text) {
        if data.len() >= n {
            return Err(Error::parse(lineno, format!("more than {n} rows for lmax={lmax}")));
        }
        let f = fields(line, 4, lineno)?;
        let l = parse_usize(f[0], lineno, "l")?;
        let m = parse_usize(f[1], lineno, "m")?;
        if (l, m) != (el, em) {
            return Err(Error::parse(lineno, format!("expected (l, m) = ({el}, {em}), found ({l}, {m})")));
        }
        let re = parse_f64(f[2], lineno, "re")?;
        let im = parse_f64(f[3], lineno, "im")?;
        if real && m == 0 && im != 0.0 {
            return Err(Error::parse(lineno, "real field needs a real a_l0"));
        }
        data.push(Complex64::new(re, im));
        if em == el {
            el += 1;
            em = 0;
        } else {
            em += 1;
        }
    }
    expect_count(data.len(), n, text)?;
    HarmonicCoefficients::from_packed(lmax, real, data)
}

// --------------------------------------------------------------- windows

/// Window file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFile {
    pub kind: String,
    pub window: SpectralWindow,
}

/// `# lmin=<a> lmax=<b> kind=<tag>` followed by `l, b`.
pub fn write_window(window: &SpectralWindow, kind: &str) -> String {
    let tag: String = kind.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = format!("# lmin={} lmax={} kind={}\n", window.lmin(), window.lmax(), tag);
    for (i, b) in window.coeffs().iter().enumerate() {
        let _ = writeln!(out, "{}, {}", window.lmin() + i, fmt(*b));
    }
    out
}

pub fn parse_window(text: &str) -> Result<WindowFile> {
    let (hl, pairs) = header(text)?;
    let lmin = parse_degree(key(&pairs, "lmin", hl)?, hl, "lmin")?;
    let lmax = parse_degree(key(&pairs, "lmax", hl)?, hl, "lmax")?;
    let kind = key(&pairs, "kind", hl)?.to_string();
    if lmin > lmax {
        return Err(Error::parse(hl, format!("lmin={lmin} exceeds lmax={lmax}")));
    }
    let mut coeffs = Vec::with_capacity(lmax - lmin + 1);
    for (lineno, line) in data_lines(text) {
        let f = fields(line, 2, lineno)?;
        let l = parse_usize(f[0], lineno, "l")?;
        let want = lmin + coeffs.len();
        if l != want || l > lmax {
            return Err(Error::parse(lineno, format!("expected l = {want}, found {l}")));
        }
        coeffs.push(parse_f64(f[1], lineno, "b")?);
    }
    expect_count(coeffs.len(), lmax - lmin + 1, text)?;
    Ok(WindowFile {
        kind,
        window: SpectralWindow::new(lmin, coeffs)?,
    })
}

// -------------------------------------------------------------- spectra

/// `l, C` rows from `l = 0`.
pub fn write_spectrum(spectrum: &PowerSpectrum) -> String {
    let mut out = String::from("# l, C\n");
    for (l, c) in spectrum.values().iter().enumerate() {
        let _ = writeln!(out, "{l}, {}", fmt(*c));
    }
    out
}

/// Reads `l, C` rows; `#` lines and a literal `l,C` header are skipped.
pub fn parse_spectrum(text: &str) -> Result<PowerSpectrum> {
    let mut values = Vec::new();
    for (lineno, line) in data_lines(text) {
        let f = fields(line, 2, lineno)?;
        if values.is_empty() && f[0].eq_ignore_ascii_case("l") {
            continue;
        }
        let l = parse_usize(f[0], lineno, "l")?;
        if l != values.len() {
            return Err(Error::parse(lineno, format!("expected l = {}, found {l}", values.len())));
        }
        if l > MAX_FILE_DEGREE {
            return Err(Error::parse(lineno, format!("l exceeds {MAX_FILE_DEGREE}")));
        }
        let c = parse_f64(f[1], lineno, "C")?;
        if c < 0.0 {
            return Err(Error::parse(lineno, "negative C_l"));
        }
        values.push(c);
    }
    if values.is_empty() {
        return Err(Error::parse(1, "spectrum has no rows"));
    }
    PowerSpectrum::new(values)
}

// ---------------------------------------------------------------- masks

/// Mask description: zonal segments in degrees, or a map file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MaskSpec {
    Axisym {
        /// `(theta_start, theta_end, value)` in degrees.
        axisym: Vec<(f64, f64, f64)>,
        #[serde(default = "default_apod")]
        apod_deg: f64,
    },
    Map {
        map: String,
    },
}

fn default_apod() -> f64 {
    2.0
}

impl MaskSpec {
    /// Zonal segments in radians; `None` for a map mask.
    pub fn segments(&self) -> Option<Vec<ZoneSegment>> {
        match self {
            MaskSpec::Axisym { axisym, .. } => Some(
                axisym
                    .iter()
                    .map(|(a, b, v)| ZoneSegment {
                        theta_start: a.to_radians(),
                        theta_end: b.to_radians(),
                        value: *v,
                    })
                    .collect(),
            ),
            MaskSpec::Map { .. } => None,
        }
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(e.line().max(1), e.to_string())
}

pub fn parse_mask_spec(text: &str) -> Result<MaskSpec> {
    let spec: MaskSpec = serde_json::from_str(text).map_err(json_error)?;
    if let MaskSpec::Axisym { axisym, apod_deg } = &spec {
        if !(apod_deg.is_finite() && *apod_deg >= 0.0) {
            return Err(Error::parse(1, "apod_deg must be finite and nonnegative"));
        }
        for (a, b, v) in axisym {
            if ![a, b, v].iter().all(|x| x.is_finite()) {
                return Err(Error::parse(1, "mask zones must be finite"));
            }
        }
    }
    Ok(spec)
}

pub fn write_mask_spec(spec: &MaskSpec) -> String {
    serde_json::to_string_pretty(spec).expect("mask spec serializes")
}

// ------------------------------------------------------------- manifests

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub label: i32,
    pub path: String,
}

/// Ordered list of window files with their scale labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyManifest {
    pub scales: Vec<ManifestEntry>,
}

pub fn parse_manifest(text: &str) -> Result<FamilyManifest> {
    let m: FamilyManifest = serde_json::from_str(text).map_err(json_error)?;
    let mut labels: Vec<i32> = m.scales.iter().map(|e| e.label).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::parse(1, "duplicate scale label"));
    }
    Ok(m)
}

pub fn write_manifest(m: &FamilyManifest) -> String {
    serde_json::to_string_pretty(m).expect("manifest serializes")
}

// ------------------------------------------------------------- Q dumps

/// `# lmin=<a> lmax=<b>` followed by `l, lp, value` for `l <= lp`.
pub fn write_band_matrix(lmin: usize, m: &SymmetricMatrix) -> String {
    let n = m.order();
    let mut out = format!("# lmin={lmin} lmax={}\n", lmin + n - 1);
    for i in 0..n {
        for j in i..n {
            let _ = writeln!(out, "{}, {}, {}", lmin + i, lmin + j, fmt(m.get(i, j)));
        }
    }
    out
}

pub fn parse_band_matrix(text: &str) -> Result<(usize, SymmetricMatrix)> {
    let (hl, pairs) = header(text)?;
    let lmin = parse_degree(key(&pairs, "lmin", hl)?, hl, "lmin")?;
    let lmax = parse_degree(key(&pairs, "lmax", hl)?, hl, "lmax")?;
    if lmin > lmax || lmax - lmin >= 4096 {
        return Err(Error::parse(hl, "band must be non-empty and at most 4096 wide"));
    }
    let n = lmax - lmin + 1;
    let mut m = SymmetricMatrix::zeros(n);
    let (mut i, mut j, mut seen) = (0usize, 0usize, 0usize);
    for (lineno, line) in data_lines(text) {
        if i >= n {
            return Err(Error::parse(lineno, "too many rows"));
        }
        let f = fields(line, 3, lineno)?;
        let l = parse_usize(f[0], lineno, "l")?;
        let lp = parse_usize(f[1], lineno, "lp")?;
        if (l, lp) != (lmin + i, lmin + j) {
            return Err(Error::parse(
                lineno,
                format!("expected ({}, {}), found ({l}, {lp})", lmin + i, lmin + j),
            ));
        }
        m.set(i, j, parse_f64(f[2], lineno, "value")?);
        seen += 1;
        j += 1;
        if j == n {
            i += 1;
            j = i;
        }
    }
    expect_count(seen, n * (n + 1) / 2, text)?;
    Ok((lmin, m))
}

/// Q dump and, for Monte-Carlo estimates, its standard-error companion.
pub fn write_mise_matrix(q: &MiseMatrix) -> (String, Option<String>) {
    (
        write_band_matrix(q.lmin, &q.q),
        q.std_err.as_ref().map(|s| write_band_matrix(q.lmin, s)),
    )
}

pub fn parse_mise_matrix(q_text: &str, se_text: Option<&str>) -> Result<MiseMatrix> {
    let (lmin, q) = parse_band_matrix(q_text)?;
    let std_err = match se_text {
        Some(t) => {
            let (l2, s) = parse_band_matrix(t)?;
            if l2 != lmin || s.order() != q.order() {
                return Err(Error::parse(1, "standard-error band differs from Q"));
            }
            Some(s)
        }
        None => None,
    };
    Ok(MiseMatrix { lmin, q, std_err })
}

// ------------------------------------------------------- criterion rows

/// One row of a criterion report.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub window_id: String,
    pub criterion: String,
    /// Cap opening in degrees, when the criterion has one.
    pub theta0_deg: Option<f64>,
    /// Norm exponent (`inf` for the sup norm), when relevant.
    pub p: Option<f64>,
    pub value: f64,
}

const REPORT_HEADER: &str = "window_id,criterion,theta0_deg,p,value";

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn clean_id(s: &str) -> String {
    s.chars().map(|c| if c == ',' || c.is_whitespace() { '_' } else { c }).collect()
}

pub fn write_criterion_report(rows: &[CriterionRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            clean_id(&r.window_id),
            clean_id(&r.criterion),
            opt(r.theta0_deg),
            opt(r.p),
            fmt(r.value)
        );
    }
    out
}

pub fn parse_criterion_report(text: &str) -> Result<Vec<CriterionRow>> {
    let mut rows = Vec::new();
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, l)) if l.replace(' ', "") == REPORT_HEADER => {}
        Some((n, _)) => return Err(Error::parse(n, format!("expected header '{REPORT_HEADER}'"))),
        None => return Err(Error::parse(1, "empty report")),
    }
    let opt_num = |s: &str, n: usize, what: &str| -> Result<Option<f64>> {
        match s {
            "" => Ok(None),
            "inf" => Ok(Some(f64::INFINITY)),
            _ => parse_f64(s, n, what).map(Some),
        }
    };
    for (n, line) in lines {
        let f = fields(line, 5, n)?;
        if f[0].is_empty() || f[1].is_empty() {
            return Err(Error::parse(n, "window_id and criterion are required"));
        }
        rows.push(CriterionRow {
            window_id: f[0].to_string(),
            criterion: f[1].to_string(),
            theta0_deg: opt_num(f[2], n, "theta0_deg")?,
            p: opt_num(f[3], n, "p")?,
            value: parse_f64(f[4], n, "value")?,
        });
    }
    Ok(rows)
}
