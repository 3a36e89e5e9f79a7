#![allow(dead_code)]

use std::path::PathBuf;

use frameguide::bench::{load_scenarios, RunConfig, ScenarioRuntime, ScenarioSpec};
use frameguide::diffusion::{NoiseSchedule, ScheduleParams};
use frameguide::guidance::{GuidanceMode, GuidanceSpec};
use frameguide::sampler::{SamplerKind, Trajectory};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn shipped_scenarios() -> Vec<ScenarioSpec> {
    load_scenarios(crate_dir().join("scenarios/canonical.toml")).expect("shipped scenarios load")
}

pub fn canonical_spec() -> ScenarioSpec {
    shipped_scenarios()
        .into_iter()
        .find(|s| s.id == "canonical_1d")
        .expect("canonical_1d is shipped")
}

pub fn schedule(steps: usize) -> NoiseSchedule {
    ScheduleParams::for_steps(steps).build().unwrap()
}

pub fn canonical_runtime() -> ScenarioRuntime {
    ScenarioRuntime::new(&canonical_spec(), &schedule(50)).unwrap()
}

/// Config with the reference knobs (T=50, tau=5, omega=12, alpha_max=1, DDIM eta=0).
pub fn reference_config(seeds: std::ops::Range<u64>, modes: &[GuidanceMode]) -> RunConfig {
    RunConfig {
        seeds: seeds.collect(),
        modes: modes.to_vec(),
        ..RunConfig::default()
    }
}

pub fn run(rt: &ScenarioRuntime, spec: &GuidanceSpec, mode: GuidanceMode, seed: u64) -> Trajectory {
    frameguide::bench::run_scenario_mode(spec, SamplerKind::default(), 0, rt, mode, seed).unwrap()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1).
pub fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_err(xs: &[f64]) -> f64 {
    (var(xs) / xs.len() as f64).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// Independent reference: alpha_bar from the linear beta ramp by direct product.
pub fn reference_alpha_bar(steps: usize, beta_start: f64, beta_end: f64, t: usize) -> f64 {
    let mut ab = 1.0;
    for s in 1..=t {
        let beta = beta_start + (beta_end - beta_start) * (s - 1) as f64 / (steps - 1) as f64;
        ab *= 1.0 - beta;
    }
    ab
}

/// Log-density of a noisy frame under N(sqrt(ab) mu, ab s2 + 1 - ab), coordinatewise.
pub fn gaussian_logpdf(z: &[f64], mu: &[f64], s2: &[f64], ab: f64) -> f64 {
    z.iter()
        .zip(mu)
        .zip(s2)
        .map(|((&z, &m), &s)| {
            let v = ab * s + 1.0 - ab;
            let d = z - ab.sqrt() * m;
            -0.5 * (d * d / v + (2.0 * std::f64::consts::PI * v).ln())
        })
        .sum()
}

/// Per-frame mixture log-density, summed over frames.
pub fn mixture_logpdf(z: &[f64], dim: usize, comps: &[(f64, Vec<f64>, Vec<f64>)], ab: f64) -> f64 {
    z.chunks(dim)
        .map(|frame| {
            let ls: Vec<f64> = comps
                .iter()
                .map(|(w, mu, s2)| w.ln() + gaussian_logpdf(frame, mu, s2, ab))
                .collect();
            let m = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// Central-difference gradient of `f` at `z`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    let mut zp = z.to_vec();
    (0..z.len())
        .map(|i| {
            let orig = zp[i];
            zp[i] = orig + h;
            let up = f(&zp);
            zp[i] = orig - h;
            let down = f(&zp);
            zp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}
