//! File formats: CSV tables at 12 significant digits, JSON reports, the
//! `FOCKVEC1` binary vector and a coordinate-list matrix dump.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use bosegas_core::decay::{DecayCertificate, DecayFit, DecayProfile, TailReport};
use bosegas_core::grid::Boundary;
use bosegas_core::hamiltonian::KernelSet;
use bosegas_core::hartree::HartreeSolution;
use bosegas_core::lemmas::LemmaReport;
use bosegas_core::potentials::PairPotential;
use bosegas_core::sparse::CsrMatrix;

use crate::error::{LabError, Result};

pub const FOCKVEC_MAGIC: &[u8; 8] = b"FOCKVEC1";

/// Twelve significant digits, scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| LabError::Parse { path: path.to_path_buf(), source })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory csv");
    for row in rows {
        writer.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

pub fn potential_json(v: &PairPotential) -> Value {
    let coefficients: Vec<Value> =
        v.coefficient_table().iter().map(|(&mode, &value)| json!({ "mode": mode, "value": value })).collect();
    json!({
        "class": v.class().name(),
        "period": v.period(),
        "lambda": v.lambda(),
        "kappa": v.kappa(),
        "coefficients": coefficients,
        "value_at_origin": v.at_origin(),
    })
}

/// `x, V_ext, phi, v * phi^2` per grid node.
pub fn grid_csv(sol: &HartreeSolution, v_ext: &[f64]) -> String {
    let header = ["x", "v_ext", "phi", "mean_field"].map(String::from);
    let rows: Vec<Vec<String>> = (0..sol.grid.len())
        .map(|i| vec![fmt12(sol.grid.x(i)), fmt12(v_ext[i]), fmt12(sol.phi[i]), fmt12(sol.mean_field[i])])
        .collect();
    csv_string(&header, &rows)
}

pub fn hartree_json(sol: &HartreeSolution, modes: usize) -> Value {
    let boundary = match sol.grid.boundary() {
        Boundary::Periodic => "periodic",
        Boundary::HardWall => "hard_wall",
    };
    let spectrum: Vec<f64> = sol.gap_spectrum().iter().take(modes).copied().collect();
    json!({
        "grid": { "n": sol.grid.len(), "length": sol.grid.length(), "boundary": boundary },
        "e_h": sol.e_h,
        "mu": sol.mu,
        "tau": sol.tau,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "homogeneous": sol.homogeneous,
        "mode_energies": spectrum,
        "phi": sol.phi,
    })
}

pub fn kernels_json(k: &KernelSet) -> Value {
    let m = k.modes();
    let rows = |a: &bosegas_core::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m).map(|i| (0..m).map(|j| a[(i, j)]).collect()).collect()
    };
    let k3_nonzero = (0..m * m * m).filter(|&x| k.k3(x / (m * m), (x / m) % m, x % m) != 0.0).count();
    json!({
        "path": format!("{:?}", k.path).to_lowercase(),
        "energies": k.energies,
        "momenta": k.momenta,
        "k1": rows(&k.k1),
        "k2": rows(&k.k2),
        "k3_nonzero": k3_nonzero,
        "k4_entries": k.k4_entries().len(),
        "w_mean_defect": k.w_mean_defect,
    })
}

/// `FOCKVEC1`, then `u32` mode count, `u32` cutoff, `u64` length and the
/// amplitudes, all little-endian.
pub fn write_fock_vector(path: &Path, modes: usize, cutoff: usize, amplitudes: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(24 + 8 * amplitudes.len());
    bytes.extend_from_slice(FOCKVEC_MAGIC);
    bytes.extend_from_slice(&(modes as u32).to_le_bytes());
    bytes.extend_from_slice(&(cutoff as u32).to_le_bytes());
    bytes.extend_from_slice(&(amplitudes.len() as u64).to_le_bytes());
    for a in amplitudes {
        bytes.extend_from_slice(&a.to_le_bytes());
    }
    write_file(path, &bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredVector {
    pub modes: usize,
    pub cutoff: usize,
    pub amplitudes: Vec<f64>,
}

pub fn read_fock_vector(path: &Path) -> Result<StoredVector> {
    let bad = |message: &str| LabError::Format { path: path.to_path_buf(), message: message.into() };
    let mut file = fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| LabError::io(path, e))?;
    if bytes.len() < 24 || &bytes[..8] != FOCKVEC_MAGIC {
        return Err(bad("not a FOCKVEC1 file"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + 8 * len {
        return Err(bad("length field does not match the file size"));
    }
    let amplitudes = bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Vec<_>>();
    Ok(StoredVector { modes: u32_at(8), cutoff: u32_at(12), amplitudes })
}

/// `row,col,value` per stored entry.
pub fn write_coo(path: &Path, matrix: &CsrMatrix) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| LabError::io(path, e);
    writeln!(out, "# {} {} {}", matrix.nrows(), matrix.ncols(), matrix.nnz()).map_err(io)?;
    writeln!(out, "row,col,value").map_err(io)?;
    for (r, c, v) in matrix.triplets() {
        writeln!(out, "{r},{c},{v:.17e}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// `l, P, f, F_L...`; window columns are blank where the window leaves the valid range.
pub fn decay_csv(profile: &DecayProfile, windows: &[usize]) -> String {
    let mut header = vec!["ell".to_string(), "P".into(), "f".into()];
    header.extend(windows.iter().map(|l| format!("F_{l}")));
    let rows: Vec<Vec<String>> = (0..profile.p().len())
        .map(|ell| {
            let mut row = vec![ell.to_string(), fmt12(profile.p()[ell]), fmt12(profile.f(ell as i64))];
            row.extend(windows.iter().map(|&l| profile.window(ell as i64, l).map(fmt12).unwrap_or_default()));
            row
        })
        .collect();
    csv_string(&header, &rows)
}

pub fn fit_json(fit: &DecayFit, range: [usize; 2], parity: &str) -> Value {
    json!({
        "range": range,
        "parity": parity,
        "C": fit.c,
        "epsilon": fit.epsilon,
        "r_squared": fit.r_squared,
        "points": fit.points,
        "decays": fit.decays(),
    })
}

pub fn certificate_json(c: &DecayCertificate, source: &str) -> Value {
    json!({
        "source": source,
        "L": c.half_width,
        "sigma": c.sigma,
        "mu": c.mu,
        "ell0": c.envelope.ell0 * c.half_width,
        "ell0_interior": c.envelope.ell0_interior,
        "j_range": [c.j_range.0, c.j_range.1],
        "ell_range": [c.ell_range.0, c.ell_range.1],
        "C": c.c,
        "epsilon": c.epsilon,
        "decreasing_checks": c.envelope.decreasing_checks,
        "growth_checks": c.envelope.growth_checks,
        "verified": true,
    })
}

pub fn no_certificate_json(source: &str, reason: &str) -> Value {
    json!({ "source": source, "verified": false, "reason": reason })
}

pub fn tail_json(t: &TailReport) -> Value {
    json!({
        "cut": t.cut,
        "empty": t.empty,
        "tail_weight": t.tail_weight,
        "rayleigh_tail": t.rayleigh_tail,
        "k0_tail": t.k0_tail,
        "k0_bound": t.k0_bound,
        "couplings": { "K0": t.couplings[0], "K1": t.couplings[1], "K2": t.couplings[2], "K3": t.couplings[3], "K4": t.couplings[4] },
        "identity_defect": t.identity_defect,
    })
}

pub fn lemma_json(r: &LemmaReport) -> Value {
    let p = &r.parameters;
    let extras: serde_json::Map<String, Value> = r.extras.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "lemma": r.lemma.name(),
        "samples": r.samples,
        "seed": r.seed,
        "violations": r.violations,
        "worst_margin": r.worst_margin,
        "empirical_constant": r.empirical_constant,
        "fit_constant": r.fit_constant,
        "passed": r.passed(),
        "parameters": {
            "N": p.n_particles, "m": p.modes, "M": p.cutoff,
            "delta": p.delta, "epsilon": p.epsilon, "kappa": p.kappa,
        },
        "extras": extras,
        "failure": r.failure.as_ref().map(|f| json!({ "index": f.index, "ell": f.ell, "margin": f.margin })),
    })
}

/// Log plot of `P(l)` with the certified envelope and the fitted line.
pub fn decay_svg(profile: &DecayProfile, certificate: Option<&DecayCertificate>, fit: Option<&DecayFit>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let p = profile.p();
    let floor = 1e-16f64;
    let positive: Vec<f64> = p.iter().copied().filter(|&x| x > floor).collect();
    let y_min = positive.iter().copied().fold(1.0, f64::min).log10().floor();
    let y_max = 0.0f64;
    let span = (y_max - y_min).max(1.0);
    let x_max = (p.len().max(2) - 1) as f64;
    let sx = |l: f64| PAD + (W - 2.0 * PAD) * l / x_max;
    let sy = |y: f64| PAD + (H - 2.0 * PAD) * (y_max - y.max(floor).log10().max(y_min)) / span;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD
    );
    for decade in (y_min as i64)..=0 {
        let y = sy(10f64.powi(decade as i32));
        svg += &format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"10\" text-anchor=\"end\">1e{decade}</text>\n",
            x = PAD - 4.0
        );
    }
    for (ell, &value) in p.iter().enumerate() {
        if value > floor {
            svg += &format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{}\"/>\n",
                sx(ell as f64),
                sy(value),
                if ell <= profile.valid_max() { "steelblue" } else { "gray" }
            );
        }
    }
    let line = |color: &str, points: Vec<(f64, f64)>| -> String {
        let path: Vec<String> = points.iter().map(|(l, y)| format!("{:.1},{:.1}", sx(*l), sy(*y))).collect();
        format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"4 3\" points=\"{}\"/>\n", path.join(" "))
    };
    if let Some(c) = certificate {
        let (lo, hi) = (c.ell_range.0 as f64, c.ell_range.1 as f64);
        svg += &line("firebrick", vec![(lo, c.c * (-c.epsilon * lo).exp()), (hi, c.c * (-c.epsilon * hi).exp())]);
    }
    if let Some(f) = fit {
        svg += &line("seagreen", vec![(0.0, f.c), (x_max, f.c * (-f.epsilon * x_max).exp())]);
    }
    svg += "</svg>\n";
    svg
}
