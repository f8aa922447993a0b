//! Acceptance criteria of the reconstruction pipeline. Each criterion runs at
//! its stated tolerance and prints one PASS/FAIL line. Failures are reported
//! but only fail the process when `RDMC_ACCEPTANCE_STRICT` is set.
//!
//! cargo test --release --test acceptance

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdmc::coherence::{
    coherence, minimize_coherence, surrogate_objective, CoherenceConfig, SectorBasis,
};
use rdmc::completion::{
    complete_matrix, default_grid, find_fsample_matrix, info_bound, n_for_fraction, objective,
    sample_uniform, synthetic_low_rank, CompletionConfig,
};
use rdmc::linalg::haar_orthogonal;
use rdmc::measurement::{
    build_map, enumerate_quartets, exact_pauli_expectations, shot_variance, simulate_shots,
    stream_rng, synthetic_shot_reduction, CalibrationConfig,
};
use rdmc::pipeline::{gen_toy, noisy_plan, run_noisy, RunConfig, MODEL_SCALE};
use rdmc::rdm::{hf_2rdm, select_rank, spectrum, SpectralDecomposition, SpinSector, SystemMeta};
use rdmc::toy::{
    exact_rdms, ground_state, pauli_expectation, random_sector_state, ToyFamily, ToyHamiltonian,
};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn hubbard(u: f64) -> ToyFamily {
    ToyFamily::HubbardChain {
        hopping: 1.0,
        u,
        periodic: false,
    }
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let (d, r) = (50, 5);
    let f = 1.5 * info_bound(r, d);
    let cfg = CompletionConfig {
        r,
        ..CompletionConfig::default()
    };
    let mut errors = Vec::new();
    for seed in 0..10 {
        let m = synthetic_low_rank(d, r, 100 + seed);
        let s = sample_uniform(d, n_for_fraction(d, f), seed).map_err(|e| e.to_string())?;
        let out = complete_matrix(&m, &s, r, None, &cfg).map_err(|e| e.to_string())?;
        errors.push((&out.completed - &m).norm() / m.norm());
    }
    let ok = errors.iter().filter(|&&e| e < 1e-4).count();
    let secs = start.elapsed().as_secs_f64();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    Ok((
        ok >= 9 && secs < 60.0,
        format!("{ok}/10 seeds below 1e-4 (worst {worst:.1e}) in {secs:.1} s"),
    ))
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn gradient_checks() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let (d, r) = (9, 3);
    for point in 0..5 {
        let s = sample_uniform(d, 25, point).map_err(|e| e.to_string())?;
        let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        let observed = &a + a.transpose();
        let x: Vec<f64> = (0..r * d).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut g = vec![0.0; x.len()];
        objective(&x, r, &s, &observed, &mut g);
        let mut scratch = vec![0.0; x.len()];
        let fd: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fp = objective(&xp, r, &s, &observed, &mut scratch);
                let fm = objective(&xm, r, &s, &observed, &mut scratch);
                (fp - fm) / (2.0 * h)
            })
            .collect();
        worst = worst.max(relative_gap(&fd, &g));
    }
    let completion_worst = worst;

    let n = 4;
    for point in 0..5 {
        let bases: Vec<SectorBasis> = SpinSector::ALL
            .iter()
            .map(|&sector| {
                let dim = sector.dim(n);
                let q = haar_orthogonal(dim, &mut rng);
                SectorBasis {
                    sector,
                    u: q.columns(0, 2).into_owned(),
                }
            })
            .collect();
        let c = if point == 0 {
            haar_orthogonal(n, &mut rng)
        } else {
            DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5)
        };
        let (_, g) = surrogate_objective(&bases, &c, 4.0);
        let mut fd = Vec::new();
        let mut an = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut cp = c.clone();
                let mut cm = c.clone();
                cp[(i, j)] += h;
                cm[(i, j)] -= h;
                let fp = surrogate_objective(&bases, &cp, 4.0).0;
                let fm = surrogate_objective(&bases, &cm, 4.0).0;
                fd.push((fp - fm) / (2.0 * h));
                an.push(g[(i, j)]);
            }
        }
        worst = worst.max(relative_gap(&fd, &an));
    }
    Ok((
        worst < 1e-6,
        format!("completion {completion_worst:.1e}, coherence surrogate {worst:.1e} relative"),
    ))
}

fn pauli_map_oracle() -> Outcome {
    let mut worst_exp = 0.0_f64;
    let mut worst_inv = 0.0_f64;
    let mut n_quartets = 0;
    for (n, na, nb) in [(3, 1, 1), (3, 2, 1), (4, 2, 2), (4, 3, 1)] {
        let meta = SystemMeta::new(n, na, nb).map_err(|e| e.to_string())?;
        let psi = random_sector_state(meta, 3).map_err(|e| e.to_string())?;
        let (d, p) = exact_rdms(&psi, meta).map_err(|e| e.to_string())?;
        for q in enumerate_quartets(meta) {
            let map = build_map(&q, n).map_err(|e| e.to_string())?;
            let v = exact_pauli_expectations(&p, &d, &map).map_err(|e| e.to_string())?;
            for (s, string) in map.strings.iter().enumerate() {
                worst_exp = worst_exp.max((v[s] - pauli_expectation(&psi, string)).abs());
            }
            let k = map.t.ncols();
            worst_inv = worst_inv.max((&map.t_inv * &map.t - DMatrix::identity(k, k)).amax());
            n_quartets += 1;
        }
    }
    Ok((
        worst_exp < 1e-10 && worst_inv < 1e-12,
        format!("{n_quartets} quartets, expectation deviation {worst_exp:.1e}, T_inv T defect {worst_inv:.1e}"),
    ))
}

fn shot_noise_statistics() -> Outcome {
    let draws = 100_000;
    let mut worst = 0.0_f64;
    for (i, q) in [0.0, 0.5, -0.5].into_iter().enumerate() {
        for m in [10u64, 100] {
            let mut rng = stream_rng(2024, (i as u64) << 8 | m);
            let x: Vec<f64> = (0..draws).map(|_| simulate_shots(q, m, &mut rng)).collect();
            let mean = x.iter().sum::<f64>() / draws as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            worst = worst.max((var / shot_variance(q, m) - 1.0).abs());
        }
    }
    Ok((
        worst < 0.05,
        format!("largest relative variance deviation {:.2}%", 100.0 * worst),
    ))
}

fn coherence_bounds() -> Outcome {
    let (d, r) = (8, 2);
    // columns of a Sylvester-Hadamard matrix: every entry has modulus 1/sqrt(d)
    let flat = DMatrix::from_fn(d, r, |i, j| {
        let sign = if (i & (j + 1)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        sign / (d as f64).sqrt()
    });
    let axis = DMatrix::from_fn(d, r, |i, j| if i == j { 1.0 } else { 0.0 });
    let mu_flat = coherence(&SpectralDecomposition::from_parts(flat, DVector::zeros(r))).mu;
    let mu_axis = coherence(&SpectralDecomposition::from_parts(axis, DVector::zeros(r))).mu;
    let exact = (mu_flat - 1.0).abs() < 1e-12 && (mu_axis - d as f64 / r as f64).abs() < 1e-12;

    let mut never_worse = true;
    let mut gains = Vec::new();
    for (k, u) in [0.5, 2.0, 4.0].into_iter().enumerate() {
        let meta = SystemMeta::new(4, 2, 1 + k % 2).map_err(|e| e.to_string())?;
        let h = ToyHamiltonian::new(hubbard(u), meta).map_err(|e| e.to_string())?;
        let (_, psi) = ground_state(&h).map_err(|e| e.to_string())?;
        let (_, p) = exact_rdms(&psi, meta).map_err(|e| e.to_string())?;
        let bases: Vec<SectorBasis> = SpinSector::ALL
            .iter()
            .filter(|&&s| p.sector(s).frobenius() > 0.0)
            .map(|&s| {
                let r = select_rank(p.sector(s), 0.01, 0.5).expect("rank");
                SectorBasis::new(s, &spectrum(p.sector(s)).truncate(r))
            })
            .collect();
        let cfg = CoherenceConfig {
            n_starts: 3,
            seed: k as u64,
            ..CoherenceConfig::default()
        };
        let res = minimize_coherence(&bases, 4, &cfg).map_err(|e| e.to_string())?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (before, after) = (mean(&res.mu_before), mean(&res.mu_after));
        never_worse &= after <= before + 1e-12;
        gains.push(format!("{before:.3}->{after:.3}"));
    }
    Ok((
        exact && never_worse,
        format!(
            "flat mu {mu_flat}, axis mu {mu_axis} (d/r = {}), minimized mean mu {}",
            d / r,
            gains.join(", ")
        ),
    ))
}

fn sampling_curve_shape() -> Outcome {
    let start = Instant::now();
    let meta = SystemMeta::new(6, 2, 2).map_err(|e| e.to_string())?;
    let h = ToyHamiltonian::new(hubbard(0.5), meta).map_err(|e| e.to_string())?;
    let (_, psi) = ground_state(&h).map_err(|e| e.to_string())?;
    let (_, p) = exact_rdms(&psi, meta).map_err(|e| e.to_string())?;
    let sector = SpinSector::AlphaBeta;
    let block = p.sector(sector);
    let r = select_rank(block, 0.01, 0.5).map_err(|e| e.to_string())?;
    let d = block.dim();
    let dec = spectrum(block);
    let tail = dec.tail_norm(r) / dec.frobenius();
    let ib = info_bound(r, d);
    let grid = default_grid(r, d);
    let cfg = CompletionConfig {
        r,
        ..CompletionConfig::default()
    };
    let search = find_fsample_matrix(
        block.matrix(),
        Some(meta.trace_target(sector)),
        &cfg,
        &grid,
        true,
    )
    .map_err(|e| e.to_string())?;
    let err: Vec<f64> = search.curve.iter().map(|g| g.mean_error).collect();
    let k_ib = (0..grid.len())
        .min_by(|&a, &b| {
            let da = (grid[a].ln() - ib.ln()).abs();
            let db = (grid[b].ln() - ib.ln()).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0);
    let peaks: Vec<usize> = (1..err.len().saturating_sub(1))
        .filter(|&k| err[k] > err[k - 1] && err[k] > err[k + 1])
        .collect();
    let near = peaks.iter().any(|&k| k.abs_diff(k_ib) <= 2);
    let saturation = err.last().copied().unwrap_or(f64::NAN);
    let rel = (saturation - tail).abs() / tail;
    let secs = start.elapsed().as_secs_f64();
    let peak_f: Vec<String> = peaks.iter().map(|&k| format!("{:.3}", grid[k])).collect();
    Ok((
        near && rel < 0.1 && secs < 300.0,
        format!(
            "abab d {d} r {r}: info bound {ib:.3}, local maxima at f = [{}], f=1 error {saturation:.3e} vs tail {tail:.3e} ({:.1}%), {secs:.0} s",
            peak_f.join(", "),
            100.0 * rel
        ),
    ))
}

fn switching_cost_plan() -> Outcome {
    let meta = SystemMeta::new(6, 2, 2).map_err(|e| e.to_string())?;
    let (model, _) = gen_toy(hubbard(0.5), meta, MODEL_SCALE).map_err(|e| e.to_string())?;
    let free = RunConfig::default();
    let (_, plan0) = noisy_plan(&model, &free).map_err(|e| e.to_string())?;
    let c = 1e4 * plan0.m as f64;
    let costly = RunConfig {
        switch_cost: c,
        ..RunConfig::default()
    };
    let (_, plan1) = noisy_plan(&model, &costly).map_err(|e| e.to_string())?;
    Ok((
        plan0.f_sample >= 0.9 && plan1.f_sample < plan0.f_sample,
        format!(
            "c = 0: f {:.2} at m {}; c = {c:.2e}: f {:.2} at m {}",
            plan0.f_sample, plan0.m, plan1.f_sample, plan1.m
        ),
    ))
}

fn noise_filtering_scaling() -> Outcome {
    let start = Instant::now();
    let d = 32;
    let cal = CalibrationConfig {
        refine_steps: 6,
        ..CalibrationConfig::default()
    };
    let mut points = Vec::new();
    let mut shown = Vec::new();
    for ratio in [2usize, 4, 8, 16] {
        let r = d / ratio;
        let target = synthetic_low_rank(d, r, 7 + ratio as u64);
        let cfg = CompletionConfig {
            r,
            ..CompletionConfig::default()
        };
        let red =
            synthetic_shot_reduction(&target, r, 0.01, &cal, &cfg).map_err(|e| e.to_string())?;
        points.push(((ratio as f64).ln(), red.inverse_f_m.ln()));
        shown.push(format!("{ratio}:{:.2}", red.inverse_f_m));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        (0.7..=1.3).contains(&slope) && secs < 600.0,
        format!(
            "1/f_m by d/r [{}], slope {slope:.3}, {secs:.0} s",
            shown.join(", ")
        ),
    ))
}

fn normalized_energy() -> Outcome {
    let meta = SystemMeta::new(4, 2, 2).map_err(|e| e.to_string())?;
    let (model, target) = gen_toy(hubbard(4.0), meta, MODEL_SCALE).map_err(|e| e.to_string())?;
    let rep = run_noisy(&model, &target, &RunConfig::default()).map_err(|e| e.to_string())?;
    let per_trial = |name: &str| -> Result<Vec<f64>, String> {
        rep.stage(name)
            .and_then(|s| s.e2_error_per_trial.clone())
            .ok_or(format!("stage {name} has no energy errors"))
    };
    let pre = per_trial("completed")?;
    let post = per_trial("normalize-trace")?;
    let improved = pre.iter().zip(&post).filter(|(a, b)| b < a).count();
    let final_err = rep.e2_error.ok_or("no final energy error")?;
    let mean_pre = pre.iter().sum::<f64>() / pre.len() as f64;
    let shots = rep.shots.as_ref().ok_or("no shot report")?;
    Ok((
        improved * 10 >= 9 * pre.len() && final_err < 1.6e-3,
        format!(
            "improved in {improved}/{} realizations, mean |dE2| {:.2} -> {:.2} mHa (threshold 1.6), m {} on {} strings{}",
            pre.len(),
            1e3 * mean_pre,
            1e3 * final_err,
            shots.m,
            shots.n_settings,
            if shots.uses_standard { ", standard plan" } else { "" }
        ),
    ))
}

fn hf_rank_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut all = true;
    let mut seen = Vec::new();
    for _ in 0..10 {
        let n = rng.random_range(3..=6);
        let na = rng.random_range(1..=n);
        let nb = rng.random_range(1..=n);
        let idempotent = |k: usize, rng: &mut ChaCha8Rng| {
            let q = haar_orthogonal(n, rng);
            let c = q.columns(0, k);
            c * c.transpose()
        };
        let da = idempotent(na, &mut rng);
        let db = idempotent(nb, &mut rng);
        let p = hf_2rdm(&da, &db).map_err(|e| e.to_string())?;
        let counts: Vec<usize> = SpinSector::ALL
            .iter()
            .map(|&s| {
                spectrum(p.sector(s))
                    .singular_values()
                    .iter()
                    .filter(|&&v| v > 1e-10)
                    .count()
            })
            .collect();
        let expected = [na * (na - 1) / 2, nb * nb.saturating_sub(1) / 2, na * nb];
        all &= counts == expected;
        seen.push(format!("n{n}({na},{nb}):{counts:?}"));
    }
    Ok((all, seen.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact recovery", exact_recovery),
        ("gradient checks", gradient_checks),
        ("pauli map oracle", pauli_map_oracle),
        ("shot noise statistics", shot_noise_statistics),
        ("coherence bounds", coherence_bounds),
        ("sampling curve shape", sampling_curve_shape),
        ("switching cost plan", switching_cost_plan),
        ("noise filtering scaling", noise_filtering_scaling),
        ("normalized energy", normalized_energy),
        ("hartree-fock ranks", hf_rank_identities),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 || std::env::var_os("RDMC_ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
