//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the report always reaches stdout.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::Value;

use bosegas_core::decay::{certify, exponential_certificate, g_sequence, CertifyOptions, DecayProfile, ProfileSource};
use bosegas_core::fock::{build_basis, DEFAULT_BUDGET};
use bosegas_core::grid::Grid1D;
use bosegas_core::hamiltonian::{assemble_blocks, assemble_bogoliubov, compute_kernels};
use bosegas_core::hartree::{solve_hartree, spectral_gap, HartreeOptions, HartreeProblem};
use bosegas_core::lemmas::{check_k0_gap, check_k1_bound, check_k2_bound, check_k3_bound, check_k4_bound};
use bosegas_core::potentials::{make_bounded_potential, residual_supnorm, yukawa_split, RadialFunction, RadialGrid};
use bosegas_core::solver::{bogoliubov_oracle, dense_ground_state, lanczos_ground_state, LanczosOptions};
use bosegas_lab::config::{ParitySpec, VariantSpec};
use bosegas_lab::io::read_json;
use bosegas_lab::pipeline::transform_samples;
use bosegas_lab::{Run, RunConfig, RunOptions};

type Outcome = Result<(bool, String), String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn shipped() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/toy_torus.json");
    RunConfig::load(&path).expect("shipped config loads")
}

fn shipped_in(dir: &Path) -> RunConfig {
    let mut config = shipped();
    config.output_dir = dir.to_path_buf();
    config
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn homogeneous_gap() -> Outcome {
    let grid = Grid1D::periodic(64, 2.0 * PI).map_err(err)?;
    let v = make_bounded_potential((-2..=2).map(|k| (k, 8.0)), &grid).map_err(err)?;
    let problem = HartreeProblem::new(grid.clone(), vec![0.0; 64], v).map_err(err)?;
    let sol = solve_hartree(&problem, &HartreeOptions::default()).map_err(err)?;
    let (tau, _) = spectral_gap(&grid, &sol.h, &sol.phi, 6).map_err(err)?;
    let flat = 1.0 / (2.0 * PI).sqrt();
    let phi_err = sol.phi.iter().map(|p| (p - flat).abs()).fold(0.0, f64::max);
    let tau_err = (tau - 1.0).abs();
    Ok((
        tau_err <= 1e-10 && phi_err <= 1e-10,
        format!("|tau - 1| = {tau_err:.2e}, max |phi - 1/sqrt(2 pi)| = {phi_err:.2e}"),
    ))
}

fn oracle_vs_dense() -> Outcome {
    let grid = Grid1D::periodic(64, 2.0 * PI).map_err(err)?;
    let v = make_bounded_potential((-2..=2).map(|k| (k, 8.0)), &grid).map_err(err)?;
    let sol = solve_hartree(&HartreeProblem::homogeneous(grid, v.clone()).map_err(err)?, &HartreeOptions::default())
        .map_err(err)?;
    let kernels = compute_kernels(&sol, &v, &sol.modes(2).map_err(err)?).map_err(err)?;
    let basis = build_basis(2, 40, DEFAULT_BUDGET).map_err(err)?;
    let blocks = assemble_blocks(&kernels, &basis).map_err(err)?;
    let gs = dense_ground_state(&assemble_bogoliubov(&blocks)).map_err(err)?;
    let oracle = bogoliubov_oracle(&kernels, 40).map_err(err)?;
    let dense = DecayProfile::from_ground_state(&basis, &gs, ProfileSource::Bogoliubov).map_err(err)?;
    let p_err = (0..=20).map(|l| (dense.p()[l] - oracle.distribution[l]).abs()).fold(0.0, f64::max);
    let e_err = (gs.energy - oracle.energy).abs();
    Ok((p_err <= 1e-8 && e_err <= 1e-8, format!("|dE| = {e_err:.2e}, max_l<=20 |dP| = {p_err:.2e}")))
}

fn desk_decay(dir: &Path) -> Outcome {
    let config = shipped_in(dir);
    let shape = config.many_body.n_particles == 50
        && config.many_body.m == 6
        && config.many_body.cutoff == 14
        && config.many_body.variant == VariantSpec::Full
        && config.analyses.decay.fit_range == [2, 8]
        && config.analyses.decay.parity == ParitySpec::Even
        && config.analyses.decay.stability;
    let mut run = Run::new(config, RunOptions { force: true, ..Default::default() }).map_err(err)?;
    run.run_all().map_err(err)?;
    let fit = read_json(&dir.join("decay_fit.json")).map_err(err)?;
    let summary = read_json(&dir.join("decay_summary.json")).map_err(err)?;
    let epsilon = fit["epsilon"].as_f64().unwrap_or(f64::NAN);
    let r2 = fit["r_squared"].as_f64().unwrap_or(f64::NAN);
    let change = summary["stability"]["relative_change"]
        .as_array()
        .map(|a| a.iter().take(9).filter_map(Value::as_f64).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    Ok((
        shape && epsilon > 0.0 && r2 >= 0.95 && change < 0.01,
        format!("epsilon = {epsilon:.4}, R^2 = {r2:.5}, max_l<=8 |dP|/P (M 14 -> 16) = {change:.2e}"),
    ))
}

fn oracle_certificate(dir: &Path) -> Outcome {
    let mut run = Run::new(shipped_in(dir), RunOptions::default()).map_err(err)?;
    let profile = run.oracle_profile().map_err(err)?.ok_or("shipped config is not homogeneous")?;
    let cert = certify(&profile, &CertifyOptions::default()).map_err(err)?;
    let g = g_sequence(&profile, cert.half_width);
    let (first, last) = cert.j_range;
    let envelope = exponential_certificate(&g[first..=last], first, cert.sigma).map_err(err)?;
    let ok = cert.half_width <= 10 && cert.sigma >= 2.05 && cert.holds_for(&profile) && envelope == cert.envelope;
    Ok((
        ok,
        format!(
            "L = {}, sigma = {:.3}, decreasing side {} checks, growth side {} checks (ell0 = {}{}), 0 violations",
            cert.half_width,
            cert.sigma,
            envelope.decreasing_checks,
            envelope.growth_checks,
            envelope.ell0,
            if envelope.ell0_interior { "" } else { ", at the range end" }
        ),
    ))
}

fn lemma_suite(dir: &Path) -> Outcome {
    let mut run = Run::new(shipped_in(dir), RunOptions::default()).map_err(err)?;
    let n = run.config.many_body.n_particles;
    let v = run.potential().map_err(err)?.clone();
    let sol = run.solution().map_err(err)?.clone();
    let (basis, blocks) = run.blocks().map_err(err)?;
    let k1 = check_k1_bound(blocks, basis, &sol, &v, 1000, 0).map_err(err)?;
    let k2 = check_k2_bound(blocks, basis, &v, 1000, 0).map_err(err)?;
    let gap = check_k0_gap(blocks, basis, sol.tau).map_err(err)?;
    let drift = |c500: Option<f64>, c2000: Option<f64>| match (c500, c2000) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && b > 0.0 => (b - a).abs() / b,
        _ => f64::INFINITY,
    };
    let k3 = [500, 2000].map(|s| check_k3_bound(blocks, basis, n, 0.25, s, 0));
    let k4 = [500, 2000].map(|s| check_k4_bound(blocks, basis, n, 0.25, s, 0));
    let [k3a, k3b] = k3;
    let [k4a, k4b] = k4;
    let (k3a, k3b, k4a, k4b) = (k3a.map_err(err)?, k3b.map_err(err)?, k4a.map_err(err)?, k4b.map_err(err)?);
    let d3 = drift(k3a.empirical_constant, k3b.empirical_constant);
    let d4 = drift(k4a.empirical_constant, k4b.empirical_constant);
    let violations = k1.violations + k2.violations + gap.violations;
    Ok((
        violations == 0 && d3 <= 0.10 && d4 <= 0.10,
        format!(
            "K1/K2/gap violations {}/{}/{}; C3 = {:.4} (drift {:.3}%), C4 = {:.4} (drift {:.3}%)",
            k1.violations,
            k2.violations,
            gap.violations,
            k3b.empirical_constant.unwrap_or(f64::NAN),
            100.0 * d3,
            k4b.empirical_constant.unwrap_or(f64::NAN),
            100.0 * d4
        ),
    ))
}

fn coulomb_splitting() -> Outcome {
    let kappas = [1.0, 0.5, 0.25, 0.125];
    let lambda = 1.0;
    let radial = RadialGrid::logarithmic(1e-7, 12.0, 4000).map_err(err)?;
    let phi = RadialFunction::gaussian(1.0, &radial).map_err(err)?;
    let mut min_transform = f64::INFINITY;
    let mut worst_reconstruction = 0.0f64;
    let mut residuals = Vec::new();
    for kappa in kappas {
        let split = yukawa_split(lambda, kappa).map_err(err)?;
        for k in transform_samples(kappa) {
            min_transform = min_transform.min(split.yukawa.transform_3d(k).unwrap_or(f64::NAN));
        }
        worst_reconstruction = worst_reconstruction.max(split.reconstruction_error(radial.radii()));
        residuals.push(residual_supnorm(lambda, kappa, &phi).map_err(err)?);
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    Ok((
        min_transform >= 0.0 && decreasing && worst_reconstruction <= 1e-12,
        format!(
            "min vhat_kappa = {min_transform:.2e}, residuals {:?}, reconstruction {worst_reconstruction:.2e}",
            residuals.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
        ),
    ))
}

fn structural(dir: &Path) -> Outcome {
    let mut run = Run::new(shipped_in(dir), RunOptions::default()).map_err(err)?;
    let momenta = run.kernels().map_err(err)?.momenta.clone().ok_or("no momenta on the torus")?;
    let (basis, blocks) = run.blocks().map_err(err)?;
    let (basis, blocks) = (basis.clone(), blocks.clone());
    let signatures = blocks.verify_signatures().is_ok();
    let quadratic = assemble_bogoliubov(&blocks);
    let gs0 = lanczos_ground_state(&quadratic, &LanczosOptions::default()).map_err(err)?;
    let odd0 = DecayProfile::from_ground_state(&basis, &gs0, ProfileSource::Bogoliubov).map_err(err)?.max_odd();
    let h = run.hamiltonian().map_err(err)?;
    let asymmetry = h.max_asymmetry().max(quadratic.max_asymmetry());
    let commutator = h.commutator_with_diagonal(&basis.momentum_diagonal(&momenta));
    let odd = run.profile().map_err(err)?.max_odd();
    Ok((
        asymmetry <= 1e-12 && signatures && commutator <= 1e-10 && odd0 <= 1e-14 && odd > 1e-14,
        format!(
            "asymmetry {asymmetry:.1e}, signatures {}, [H, P] = {commutator:.1e}, max P(odd): H0 {odd0:.1e}, H {odd:.1e}",
            if signatures { "exact" } else { "BROKEN" }
        ),
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(PathBuf::from(entry.file_name()), std::fs::read(&path).unwrap_or_default());
        }
    }
    out
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let mut run = Run::new(shipped_in(second), RunOptions { force: true, ..Default::default() }).map_err(err)?;
    run.run_all().map_err(err)?;
    let (a, b) = (csv_files(first), csv_files(second));
    let differing: Vec<String> =
        a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).map(|k| k.display().to_string()).collect();
    Ok((
        !a.is_empty() && differing.is_empty(),
        if differing.is_empty() {
            format!("{} CSV files byte-identical across fresh runs", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let first = scratch.path().join("run_a");
    let second = scratch.path().join("run_b");
    let aux = scratch.path().join("aux");

    let criteria: Vec<Criterion> = vec![
        ("homogeneous gap", Duration::from_secs(1), Box::new(homogeneous_gap)),
        ("oracle vs dense", Duration::from_secs(10), Box::new(oracle_vs_dense)),
        ("desk-scale decay", Duration::from_secs(300), Box::new(|| desk_decay(&first))),
        ("oracle certificate", Duration::from_secs(10), Box::new(|| oracle_certificate(&aux))),
        ("lemma suite", Duration::from_secs(120), Box::new(|| lemma_suite(&aux))),
        ("coulomb splitting", Duration::from_secs(5), Box::new(coulomb_splitting)),
        ("structural invariants", Duration::from_secs(60), Box::new(|| structural(&aux))),
        ("determinism", Duration::from_secs(300), Box::new(|| determinism(&first, &second))),
    ];

    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {}. {name}: {detail} ({:.2}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
