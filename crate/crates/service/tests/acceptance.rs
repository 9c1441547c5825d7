//! Acceptance suite. Prints one PASS/FAIL line per primary criterion and exits non-zero if any
//! criterion fails. Every expected value is computed here, independently of the library code
//! under test.

use std::io::Write;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use qfr_core::cases::{
    analyze_case, generate_phantom, run_pipeline, save_case, PhantomSpec, PipelineOptions,
};
use qfr_core::geometry::{diameter_profile, extract_centerline, DiameterProfile, LumenMask};
use qfr_core::hemodynamics::{
    compute_qfr, compute_qfr_viscous, discretize, split_flow, FlowEstimate, Geometry1D, Segment,
};
use qfr_core::rfc::compute_rfc;
use qfr_core::stats::{
    agreement_stats, calibrate_kappa, roc_analysis, treat_all_net_benefit, CalibrationCase,
    PairedObservation,
};
use qfr_core::stenting::{simulate_stent, CaseSnapshot, StentPlan};
use qfr_core::{Options, Params};
use qfr_service::{router, AppState};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const MU: f64 = 3.5e-3;
const Z95: f64 = 1.959963984540054;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn hyp_flow(q: f64) -> FlowEstimate<f64> {
    FlowEstimate::new(1.0, q, 1.0)
}

// ---------------------------------------------------------------------------------------------

fn zero_flow_identity() -> Outcome {
    let mut spec = PhantomSpec::new(60.0, 3.0, 0.0, 4, 17).with_lesion(30.0, 8.0, 0.6);
    spec.noise_sd = 0.0;
    let case = generate_phantom(&spec).map_err(|e| e.to_string())?;
    let options = PipelineOptions {
        forced_rest_flow: Some(0.0),
        ..Options::default()
    };
    let t = Instant::now();
    let report = run_pipeline(&case, &Params::default(), &options).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    check(
        report.qfr.qfr == 1.0 && elapsed < Duration::from_secs(1),
        format!(
            "QFR = {} (exact 1.0 required), runtime {:.1} ms (< 1000)",
            report.qfr.qfr,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn poiseuille_oracle() -> Outcome {
    let q = 1.0e-6;
    let params = Params::default();
    let poiseuille = |r: f64, l: f64| 8.0 * MU * q * l / (std::f64::consts::PI * r.powi(4));

    // Uniform cylinder through the profile → segments path, full model.
    let profile = DiameterProfile::from_samples(1.0, vec![3.0; 51]).with_reference(3.0);
    let geometry = discretize(&profile).map_err(|e| e.to_string())?;
    let uniform = compute_qfr(&geometry, &hyp_flow(q), &params).dp_total;
    let uniform_expected = poiseuille(1.5e-3, 0.05);

    // 40 mm at r = 1.5 mm around a 10 mm mid-segment at r = 0.75 mm, local losses off.
    let mut segments = Vec::new();
    for i in 0..50 {
        let r = if (20..30).contains(&i) {
            0.75e-3
        } else {
            1.5e-3
        };
        segments.push(Segment::new(r, 1.0e-3));
    }
    let piecewise_geom = Geometry1D {
        segments,
        branch_nodes: Vec::new(),
    };
    let piecewise = compute_qfr_viscous(&piecewise_geom, &hyp_flow(q), &params).dp_total;
    let piecewise_expected = poiseuille(1.5e-3, 0.04) + poiseuille(0.75e-3, 0.01);

    let (e1, e2) = (
        rel(uniform, uniform_expected),
        rel(piecewise, piecewise_expected),
    );
    check(
        e1 < 0.005 && e2 < 0.005,
        format!(
            "uniform {uniform:.2} Pa vs {uniform_expected:.2} (rel {e1:.1e}); piecewise {piecewise:.2} Pa vs {piecewise_expected:.2} (rel {e2:.1e}); tol 0.5%"
        ),
    )
}

fn rfc_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst: f64 = 0.0;
    let mut identity_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(2..200);
        let d_ref = rng.random_range(1.0..5.0);
        let mut samples: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..6.0)).collect();
        let same = rng.random_range(0..n);
        samples[same] = d_ref;
        let profile = DiameterProfile::from_samples(1.0, samples.clone()).with_reference(d_ref);
        let rfc = compute_rfc(&profile).map_err(|e| e.to_string())?;
        for (d, v) in samples.iter().zip(&rfc.values) {
            let ratio = d / d_ref;
            worst = worst.max(rel(*v, ratio * ratio * ratio * ratio));
        }
        identity_ok &= rfc.values[same] == 1.0;
    }
    check(
        worst <= 1e-12 && identity_ok,
        format!("max relative error {worst:.2e} over 10^3 profiles (tol 1e-12); d = d_ref gives 1: {identity_ok}"),
    )
}

/// Straight strips plus brute-force nearest-background diameters on random tubes.
fn geometry_oracle() -> Outcome {
    let spacing = 0.25;
    let mut strip_worst: f64 = 0.0;
    for width in [5usize, 7, 9, 15] {
        let height = width + 10;
        let top = 5;
        let mask = LumenMask::from_fn(120, height, spacing, |r, _| r >= top && r < top + width)
            .map_err(|e| e.to_string())?;
        let cl = extract_centerline(&mask, None).map_err(|e| e.to_string())?;
        let profile: DiameterProfile<f64> =
            diameter_profile(&mask, &cl, 1.0).map_err(|e| e.to_string())?;
        for d in &profile.samples {
            strip_worst = strip_worst.max((d - width as f64 * spacing).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut brute_worst: f64 = 0.0;
    let mut masks = 0;
    while masks < 200 {
        let w = rng.random_range(32..=128usize);
        let h = rng.random_range(32..=128usize);
        let amp = rng.random_range(0.0..(h as f64 / 5.0));
        let period = rng.random_range(20.0..120.0);
        let phase = rng.random_range(0.0..6.3);
        let half = rng.random_range(1.5..(h as f64 / 8.0).max(2.0));
        let wobble = rng.random_range(0.0..half * 0.6);
        let spacing = rng.random_range(0.1..0.5);
        let noise: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.01)).collect();
        let mask = LumenMask::from_fn(w, h, spacing, |r, c| {
            let centre =
                h as f64 / 2.0 + amp * (c as f64 * std::f64::consts::TAU / period + phase).sin();
            let hw = half + wobble * (c as f64 * 0.21).cos();
            ((r as f64 - centre).abs() <= hw) ^ noise[r * w + c]
        })
        .map_err(|e| e.to_string())?;
        let Ok(cl) = extract_centerline(&mask, None) else {
            continue;
        };
        let profile: DiameterProfile<f64> =
            diameter_profile(&mask, &cl, 0.5).map_err(|e| e.to_string())?;
        masks += 1;

        let background: Vec<(f64, f64)> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| !mask.get(r, c))
            .map(|(r, c)| (r as f64, c as f64))
            .collect();
        let edt: Vec<f64> = cl
            .points
            .iter()
            .map(|p| {
                background
                    .iter()
                    .map(|(r, c)| ((r - p.row as f64).powi(2) + (c - p.col as f64).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for (k, d) in profile.samples.iter().enumerate() {
            let x = k as f64 * 0.5;
            let mut i = 0;
            while i + 2 < cl.arclength.len() && cl.arclength[i + 1] <= x {
                i += 1;
            }
            let (a0, a1) = (cl.arclength[i], cl.arclength[i + 1]);
            let t = ((x - a0) / (a1 - a0)).clamp(0.0, 1.0);
            let e = edt[i] * (1.0 - t) + edt[i + 1] * t;
            brute_worst = brute_worst.max((d - (2.0 * e - 1.0) * cl.spacing).abs());
        }
    }
    check(
        strip_worst <= spacing / 2.0 && brute_worst <= 1e-9,
        format!(
            "strips 5/7/9/15 px: max |d − w| = {strip_worst:.3} mm (tol {}); brute force on {masks} masks ≤ 128²: max dev {brute_worst:.1e} mm (tol 1e-9)",
            spacing / 2.0
        ),
    )
}

fn flow_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (i, v) in [20.0, 60.0, 120.0, 250.0].into_iter().enumerate() {
        let spec = PhantomSpec::new(80.0, 3.2, v, 80, 100 + i as u64).with_lesion(40.0, 10.0, 0.45);
        let case = generate_phantom(&spec).map_err(|e| e.to_string())?;
        let report = run_pipeline(&case, &Params::default(), &Options::default())
            .map_err(|e| e.to_string())?;
        let got = report.transit.as_ref().ok_or("no transit")?.v_rest * 1e3;
        let err = rel(got, v);
        worst = worst.max(err);
        lines.push(format!("{v}→{got:.2}"));
    }
    check(
        worst < 0.02,
        format!(
            "v_rest mm/s {}; max rel error {:.3}% (tol 2%)",
            lines.join(", "),
            worst * 100.0
        ),
    )
}

fn murray_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..8);
        let radii: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let q = rng.random_range(1e-8..1e-5);
        let split = split_flow(q, &radii).map_err(|e| e.to_string())?;
        let total: f64 = split.iter().sum();
        worst = worst.max(rel(total, q));
    }
    let pair = split_flow(9.0, &[2.0, 1.0]).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-12 && pair == [8.0, 1.0],
        format!("max relative imbalance {worst:.1e} over 10^3 sets (tol 1e-12); radii (2,1) of Q = 9 → {pair:?}"),
    )
}

fn random_geometry(rng: &mut ChaCha8Rng) -> Geometry1D<f64> {
    let n = rng.random_range(5..40);
    let mut d = 3.0;
    let segments = (0..n)
        .map(|_| {
            d = (d + rng.random_range(-0.6..0.6f64)).clamp(1.0, 4.0);
            Segment::new(d / 2.0 * 1e-3, 1e-3)
        })
        .collect();
    Geometry1D {
        segments,
        branch_nodes: Vec::new(),
    }
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let params = Params::default();
    let (mut narrow_trials, mut narrow_bad, mut narrow_worst) = (0, 0, 0.0f64);
    for _ in 0..2000 {
        let geom = random_geometry(&mut rng);
        let flow = hyp_flow(rng.random_range(0.5e-6..4e-6));
        let base = compute_qfr(&geom, &flow, &params).qfr;
        for i in 0..geom.segments.len() {
            let mut narrowed = geom.clone();
            let s = narrowed.segments[i];
            narrowed.segments[i] = Segment::new(s.radius * rng.random_range(0.5..0.999), s.length);
            let q = compute_qfr(&narrowed, &flow, &params).qfr;
            narrow_trials += 1;
            if q > base + 1e-12 {
                narrow_bad += 1;
                narrow_worst = narrow_worst.max(q - base);
            }
        }
    }

    let (mut stent_trials, mut stent_bad, mut stent_worst) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(30..80);
        let mut d = 3.0;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                d = (d + rng.random_range(-0.5..0.5f64)).clamp(1.0, 4.0);
                d
            })
            .collect();
        let profile = DiameterProfile::from_samples(1.0, samples.clone()).with_reference(3.0);
        let flow = hyp_flow(rng.random_range(0.5e-6..4e-6));
        let case =
            CaseSnapshot::new(profile, flow, params, Vec::new()).map_err(|e| e.to_string())?;
        let x_prox = rng.random_range(0.0..(n as f64 - 10.0));
        let x_dist = rng.random_range(x_prox + 5.0..n as f64 - 1.0);
        let plan = StentPlan::new(x_prox, x_dist, 4.5);
        let Ok(result) = simulate_stent(&case, &plan) else {
            continue;
        };
        let enlarges_only = result
            .post_profile
            .samples
            .iter()
            .zip(&samples)
            .all(|(a, b)| a >= b);
        if !enlarges_only {
            continue;
        }
        stent_trials += 1;
        if result.qfr_post < result.qfr_pre - 1e-12 {
            stent_bad += 1;
            stent_worst = stent_worst.max(result.qfr_pre - result.qfr_post);
        }
    }
    check(
        narrow_bad == 0 && stent_bad == 0,
        format!(
            "narrowing: {narrow_bad}/{narrow_trials} raised QFR (worst +{narrow_worst:.1e}); enlarging stents: {stent_bad}/{stent_trials} lowered QFR (worst −{stent_worst:.1e})"
        ),
    )
}

fn focal_vs_diffuse() -> Outcome {
    let mut deltas = Vec::new();
    for (width, seed) in [(8.0, 31u64), (30.0, 32)] {
        let spec = PhantomSpec::new(80.0, 3.0, 120.0, 20, seed).with_lesion(40.0, width, 0.5);
        let case = generate_phantom(&spec).map_err(|e| e.to_string())?;
        let analysis = analyze_case(&case, &Params::default(), &Options::default())
            .map_err(|e| e.to_string())?;
        let d_ref = analysis.report.profile.d_ref.ok_or("no d_ref")?;
        let half = width / 2.0 + 3.0;
        let plan = StentPlan::new(40.0 - half, 40.0 + half, d_ref);
        let r = simulate_stent(&analysis.snapshot, &plan).map_err(|e| e.to_string())?;
        deltas.push((width, analysis.report.rfc.nadir_value, r.delta_qfr));
    }
    let (focal, diffuse) = (deltas[0], deltas[1]);
    check(
        focal.2 > diffuse.2,
        format!(
            "ΔQFR focal (8 mm, nadir RFC {:.3}) = {:+.4}, diffuse (30 mm, nadir RFC {:.3}) = {:+.4}; required focal > diffuse",
            focal.1, focal.2, diffuse.1, diffuse.2
        ),
    )
}

// ---- statistics ----------------------------------------------------------------------------

fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<PairedObservation<f64>> {
    (0..n)
        .map(|_| {
            let ffr = (rng.random_range(0.5..1.0f64) * 100.0).round() / 100.0;
            let qfr =
                ((ffr + rng.random_range(-0.12..0.12f64)).clamp(0.3, 1.0) * 100.0).round() / 100.0;
            PairedObservation::new(qfr, ffr)
        })
        .collect()
}

struct BruteAgreement {
    r: f64,
    r_ci: (f64, f64),
    mae: f64,
    rmse: f64,
    bias: f64,
    loa: (f64, f64),
    slope: f64,
    intercept: f64,
}

fn brute_agreement(p: &[PairedObservation<f64>]) -> BruteAgreement {
    let n = p.len() as f64;
    let mx = p.iter().map(|o| o.ffr).sum::<f64>() / n;
    let my = p.iter().map(|o| o.qfr).sum::<f64>() / n;
    let cov: f64 = p.iter().map(|o| (o.ffr - mx) * (o.qfr - my)).sum();
    let vx: f64 = p.iter().map(|o| (o.ffr - mx).powi(2)).sum();
    let vy: f64 = p.iter().map(|o| (o.qfr - my).powi(2)).sum();
    let r = cov / (vx * vy).sqrt();
    let z = r.atanh();
    let se = 1.0 / (n - 3.0).sqrt();
    let diffs: Vec<f64> = p.iter().map(|o| o.qfr - o.ffr).collect();
    let bias = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let slope = cov / vx;
    BruteAgreement {
        r,
        r_ci: ((z - Z95 * se).tanh(), (z + Z95 * se).tanh()),
        mae: diffs.iter().map(|d| d.abs()).sum::<f64>() / n,
        rmse: (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt(),
        bias,
        loa: (bias - 1.96 * sd, bias + 1.96 * sd),
        slope,
        intercept: my - slope * mx,
    }
}

fn psi(x: f64, y: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

fn wilson(k: usize, n: usize) -> Option<(f64, f64, f64)> {
    if n == 0 {
        return None;
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let centre = (p + Z95 * Z95 / (2.0 * n)) / (1.0 + Z95 * Z95 / n);
    let half = Z95 / (1.0 + Z95 * Z95 / n) * (p * (1.0 - p) / n + Z95 * Z95 / (4.0 * n * n)).sqrt();
    Some((p, (centre - half).max(0.0), (centre + half).min(1.0)))
}

/// Returns every ROC quantity in a fixed order for comparison.
fn brute_roc(p: &[PairedObservation<f64>]) -> Vec<f64> {
    let pos: Vec<f64> = p
        .iter()
        .filter(|o| o.ffr <= 0.80)
        .map(|o| 1.0 - o.qfr)
        .collect();
    let neg: Vec<f64> = p
        .iter()
        .filter(|o| o.ffr > 0.80)
        .map(|o| 1.0 - o.qfr)
        .collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let auc = pos
        .iter()
        .map(|x| neg.iter().map(|y| psi(*x, *y)).sum::<f64>())
        .sum::<f64>()
        / (m * n);
    let v10: Vec<f64> = pos
        .iter()
        .map(|x| neg.iter().map(|y| psi(*x, *y)).sum::<f64>() / n)
        .collect();
    let v01: Vec<f64> = neg
        .iter()
        .map(|y| pos.iter().map(|x| psi(*x, *y)).sum::<f64>() / m)
        .collect();
    let var_of = |v: &[f64]| {
        if v.len() < 2 {
            0.0
        } else {
            v.iter().map(|a| (a - auc).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
        }
    };
    let se = (var_of(&v10) / m + var_of(&v01) / n).sqrt();

    let counts = |cut: f64| {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for o in p {
            match (o.qfr <= cut, o.ffr <= 0.80) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        (tp, fp, tn, fn_)
    };
    let (tp, fp, tn, fn_) = counts(0.80);
    let mut out = vec![
        auc,
        se,
        (auc - Z95 * se).max(0.0),
        (auc + Z95 * se).min(1.0),
    ];
    out.extend([tp as f64, fp as f64, tn as f64, fn_ as f64]);
    for (k, d) in [(tp, tp + fn_), (tn, tn + fp), (tp, tp + fp), (tn, tn + fn_)] {
        match wilson(k, d) {
            Some((e, lo, hi)) => out.extend([e, lo, hi]),
            None => out.extend([f64::NAN; 3]),
        }
    }
    out.push((tp + tn) as f64 / p.len() as f64);

    let mut best: Option<(f64, f64)> = None;
    let mut cuts: Vec<f64> = p.iter().map(|o| o.qfr).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for cut in cuts {
        let (tp, fp, tn, fn_) = counts(cut);
        let j = tp as f64 / (tp + fn_) as f64 + tn as f64 / (tn + fp) as f64 - 1.0;
        best = match best {
            None => Some((cut, j)),
            Some((bc, bj)) => {
                if j > bj + 1e-12
                    || ((j - bj).abs() <= 1e-12 && (cut - 0.8).abs() < (bc - 0.8).abs())
                {
                    Some((cut, j))
                } else {
                    Some((bc, bj))
                }
            }
        };
    }
    let (cut, j) = best.unwrap();
    out.extend([cut, j]);
    out
}

fn library_roc(p: &[PairedObservation<f64>]) -> Result<Vec<f64>, String> {
    let r = roc_analysis(p, 0.80).map_err(|e| e.to_string())?;
    let c = r.counts;
    let mut out = vec![r.auroc, r.auroc_se, r.auroc_ci.0, r.auroc_ci.1];
    out.extend([c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64]);
    for prop in [r.sensitivity, r.specificity, r.ppv, r.npv] {
        match prop {
            Some(x) => out.extend([x.estimate, x.ci.0, x.ci.1]),
            None => out.extend([f64::NAN; 3]),
        }
    }
    out.push(r.accuracy);
    out.extend([r.youden_optimal_threshold, r.youden_j]);
    Ok(out)
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.is_nan() && y.is_nan() {
                0.0
            } else {
                (x - y).abs()
            }
        })
        .fold(
            0.0,
            |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) },
        )
}

fn statistics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let (mut agree_worst, mut roc_worst, mut datasets) = (0.0f64, 0.0f64, 0);
    while datasets < 1000 {
        let n = rng.random_range(4..=20);
        let pairs = random_pairs(&mut rng, n);
        let positives = pairs.iter().filter(|p| p.ffr <= 0.80).count();
        let Ok(a) = agreement_stats(&pairs) else {
            continue;
        };
        if positives == 0 || positives == n {
            continue;
        }
        datasets += 1;
        let b = brute_agreement(&pairs);
        let (ci_lo, ci_hi) = a.r_ci.ok_or("missing r_ci")?;
        agree_worst = agree_worst.max(max_dev(
            &[
                a.r,
                ci_lo,
                ci_hi,
                a.mae,
                a.rmse,
                a.bias,
                a.loa.0,
                a.loa.1,
                a.slope,
                a.intercept,
            ],
            &[
                b.r,
                b.r_ci.0,
                b.r_ci.1,
                b.mae,
                b.rmse,
                b.bias,
                b.loa.0,
                b.loa.1,
                b.slope,
                b.intercept,
            ],
        ));
        roc_worst = roc_worst.max(max_dev(&library_roc(&pairs)?, &brute_roc(&pairs)));
    }

    let mut pair_worst = 0.0f64;
    let mut counted = 0;
    while counted < 500 {
        let n = rng.random_range(2..=50);
        let pairs = random_pairs(&mut rng, n);
        let pos: Vec<f64> = pairs
            .iter()
            .filter(|p| p.ffr <= 0.80)
            .map(|p| 1.0 - p.qfr)
            .collect();
        let neg: Vec<f64> = pairs
            .iter()
            .filter(|p| p.ffr > 0.80)
            .map(|p| 1.0 - p.qfr)
            .collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        counted += 1;
        let mut concordant = 0.0;
        for x in &pos {
            for y in &neg {
                concordant += psi(*x, *y);
            }
        }
        let expected = concordant / (pos.len() * neg.len()) as f64;
        let got = roc_analysis(&pairs, 0.80).map_err(|e| e.to_string())?.auroc;
        pair_worst = pair_worst.max((got - expected).abs());
    }

    let nb: f64 = treat_all_net_benefit(0.42, 0.5);
    check(
        agree_worst <= 1e-9 && roc_worst <= 1e-9 && pair_worst <= 1e-12 && (nb + 0.16).abs() < 1e-12,
        format!(
            "agreement max dev {agree_worst:.1e}, ROC max dev {roc_worst:.1e} over {datasets} datasets n ≤ 20 (tol 1e-9); AUROC vs pair counting (n ≤ 50) {pair_worst:.1e}; treat-all NB(0.42, 0.5) = {nb:.12}"
        ),
    )
}

fn kappa_inversion() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for kappa_star in [1.2, 2.0, 3.5] {
        let forward = Params {
            kappa: kappa_star,
            ..Params::default()
        };
        let mut cases = Vec::new();
        for (i, (depth, width, v)) in [
            (0.3, 8.0, 80.0),
            (0.4, 12.0, 120.0),
            (0.45, 20.0, 100.0),
            (0.5, 6.0, 150.0),
        ]
        .into_iter()
        .enumerate()
        {
            let spec =
                PhantomSpec::new(70.0, 3.0, v, 20, 200 + i as u64).with_lesion(35.0, width, depth);
            let case = generate_phantom(&spec).map_err(|e| e.to_string())?;
            let ffr = run_pipeline(&case, &forward, &Options::default())
                .map_err(|e| e.to_string())?
                .qfr
                .qfr;
            let analysis = analyze_case(&case, &Params::default(), &Options::default())
                .map_err(|e| e.to_string())?;
            cases.push(CalibrationCase {
                geometry: analysis.snapshot.geometry,
                flow: analysis.snapshot.flow,
                params: Params::default(),
                ffr,
            });
        }
        let fit = calibrate_kappa(&cases, (0.5, 5.0)).map_err(|e| e.to_string())?;
        let err = rel(fit.kappa, kappa_star);
        ok &= err < 0.01;
        lines.push(format!(
            "{kappa_star}→{:.4} ({:.3}%)",
            fit.kappa,
            err * 100.0
        ));
    }
    check(ok, format!("recovered κ: {} (tol 1%)", lines.join(", ")))
}

fn performance() -> Outcome {
    let mut spec = PhantomSpec::new(511.0 * 0.2, 3.0, 100.0, 60, 77).with_lesion(50.0, 10.0, 0.5);
    spec.height_px = Some(512);
    let case = generate_phantom(&spec).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let analysis =
        analyze_case(&case, &Params::default(), &Options::default()).map_err(|e| e.to_string())?;
    let pipeline = t.elapsed();

    let mut qfr_worst = Duration::ZERO;
    for _ in 0..20 {
        let t = Instant::now();
        std::hint::black_box(compute_qfr(
            &analysis.snapshot.geometry,
            &analysis.snapshot.flow,
            &analysis.snapshot.params,
        ));
        qfr_worst = qfr_worst.max(t.elapsed());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_case(&case, dir.path()).map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let simulate = runtime.block_on(async {
        let app = router(AppState::default());
        let open = Request::post("/cases")
            .header("content-type", "application/json")
            .body(Body::from(json!({ "path": dir.path() }).to_string()))
            .unwrap();
        let res = app.clone().oneshot(open).await.map_err(|e| e.to_string())?;
        if res.status() != StatusCode::OK {
            return Err(format!("open failed: {}", res.status()));
        }
        let body: Value =
            serde_json::from_slice(&res.into_body().collect().await.unwrap().to_bytes())
                .map_err(|e| e.to_string())?;
        let s = body["session"].as_str().ok_or("no session")?.to_string();
        let mut worst = Duration::ZERO;
        for _ in 0..5 {
            let req = Request::post(format!("/cases/{s}/simulate"))
                .header("content-type", "application/json")
                .body(Body::from(
                    json!({"x_prox": 40.0, "x_dist": 60.0, "d_max": 3.0}).to_string(),
                ))
                .unwrap();
            let t = Instant::now();
            let res = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            let status = res.status();
            let _ = res.into_body().collect().await.map_err(|e| e.to_string())?;
            worst = worst.max(t.elapsed());
            if status != StatusCode::OK {
                return Err(format!("simulate failed: {status}"));
            }
        }
        Ok::<_, String>(worst)
    })?;

    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    check(
        pipeline < Duration::from_secs(2) && qfr_worst < Duration::from_millis(50) && simulate < Duration::from_millis(500),
        format!(
            "512×512×60 pipeline {:.1} ms (< 2000); compute_qfr worst {:.3} ms (< 50); simulate round trip worst {:.1} ms (< 500)",
            ms(pipeline),
            ms(qfr_worst),
            ms(simulate)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("Zero-flow identity", zero_flow_identity),
        ("Poiseuille oracle", poiseuille_oracle),
        ("RFC exactness", rfc_exactness),
        ("Geometry oracle", geometry_oracle),
        ("Flow recovery", flow_recovery),
        ("Murray conservation", murray_conservation),
        ("Monotonicity suite", monotonicity),
        ("Focal-vs-diffuse ordering", focal_vs_diffuse),
        ("Statistics oracle", statistics_oracle),
        ("Kappa inversion", kappa_inversion),
        ("Performance budget", performance),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "[{tag}] {name}: {detail}").unwrap();
    }
    writeln!(
        out,
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    )
    .unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
