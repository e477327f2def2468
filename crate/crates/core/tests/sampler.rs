mod common;

use common::{rotated_prior, sample_moments};
use genextend::denoisers::{Denoiser, GaussianDenoiser};
use genextend::diffusion::{make_schedule, sample, sample_with, GenerationRequest, NoiseLevel, SamplerConfig, Solver};
use genextend::error::{Error, Result};
use genextend::mask::{postprocess, MaskSpec};
use genextend::rng::rng_from_seed;
use genextend::Latent;
use rayon::prelude::*;

fn unconditional_samples(model: &GaussianDenoiser, runs: usize, solver: Solver) -> Vec<Vec<f64>> {
    let sched = make_schedule(24).unwrap();
    let cfg = SamplerConfig { solver };
    (0..runs as u64)
        .into_par_iter()
        .map(|seed| {
            let req = GenerationRequest::unconditional(model.dim(), 1, 40.0, seed);
            sample_with(model, &req, &sched, &cfg).unwrap().frame(0).to_vec()
        })
        .collect()
}

#[test]
fn unconditional_samples_match_prior() {
    let model = rotated_prior(11);
    let samples = unconditional_samples(&model, 5000, Solver::DpmSolver2M);
    let (m, c) = sample_moments(&samples);
    let mean_err = (&m - model.mean()).norm() / model.mean().norm();
    let cov_err = (&c - model.covariance()).norm() / model.covariance().norm();
    println!("mean rel err {mean_err:.4}, cov rel err {cov_err:.4}");
    assert!(mean_err <= 0.05);
    assert!(cov_err <= 0.10);
}

#[test]
fn ddim_is_selectable_and_keeps_the_mean() {
    let model = rotated_prior(12);
    let samples = unconditional_samples(&model, 1000, Solver::Ddim);
    let (m, _) = sample_moments(&samples);
    assert!((&m - model.mean()).norm() / model.mean().norm() <= 0.05);
}

#[test]
fn same_seed_same_output() {
    let model = rotated_prior(3);
    let sched = make_schedule(24).unwrap();
    let mut rng = rng_from_seed(5);
    let head = Latent::gaussian(4, 6, 40.0, &mut rng);
    let tail = Latent::gaussian(4, 5, 40.0, &mut rng);
    let req = GenerationRequest::morph(head, tail, 20, 5.0, 42).unwrap();
    let a = sample(&model, &req, &sched).unwrap();
    let b = sample(&model, &req, &sched).unwrap();
    assert_eq!(a, b);
    let other = GenerationRequest { seed: 43, ..req };
    assert_ne!(a, sample(&model, &other, &sched).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let model = rotated_prior(3);
    let sched = make_schedule(24).unwrap();
    let mut rng = rng_from_seed(6);
    let head = Latent::gaussian(4, 6, 40.0, &mut rng);
    let req = GenerationRequest::extend_forward(head, 30, 5.0, 7).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = single.install(|| sample(&model, &req, &sched).unwrap());
    let b = sample(&model, &req, &sched).unwrap();
    assert_eq!(a, b);
}

#[test]
fn guided_morph_conditional_mean_and_pinned_prompts() {
    let model = rotated_prior(21);
    let sched = make_schedule(24).unwrap();
    let mut rng = rng_from_seed(9);
    let head = Latent::gaussian(4, 3, 40.0, &mut rng);
    let tail = Latent::gaussian(4, 3, 40.0, &mut rng);
    let spec = MaskSpec::morph(3, 3, 10).unwrap();
    let runs = 5000u64;
    let outs: Vec<Latent> = (0..runs)
        .into_par_iter()
        .map(|seed| {
            let req = GenerationRequest::morph(head.clone(), tail.clone(), 10, 1.0, seed).unwrap();
            let raw = sample(&model, &req, &sched).unwrap();
            postprocess(&raw, Some(&head), Some(&tail), &spec).unwrap()
        })
        .collect();
    for o in &outs {
        assert_eq!(o.slice_frames(0..3).unwrap(), head);
        assert_eq!(o.slice_frames(7..10).unwrap(), tail);
    }
    // Frames are independent under the per-frame prior, so the conditional
    // mean of every generated frame given the pinned frames is the prior mean.
    for f in 3..7 {
        let mut m = vec![0.0; 4];
        for o in &outs {
            for (a, b) in m.iter_mut().zip(o.frame(f)) {
                *a += b / runs as f64;
            }
        }
        let err = (nalgebra::DVector::from_vec(m) - model.mean()).norm() / model.mean().norm();
        assert!(err <= 0.05, "frame {f}: {err}");
    }
}

#[test]
fn zero_guidance_matches_prior() {
    let model = rotated_prior(31);
    let sched = make_schedule(24).unwrap();
    let mut rng = rng_from_seed(2);
    let head = Latent::gaussian(4, 2, 40.0, &mut rng).scaled(10.0);
    let samples: Vec<Vec<f64>> = (0..5000u64)
        .into_par_iter()
        .map(|seed| {
            let req = GenerationRequest::extend_forward(head.clone(), 3, 0.0, seed).unwrap();
            sample(&model, &req, &sched).unwrap().frame(2).to_vec()
        })
        .collect();
    let (m, c) = sample_moments(&samples);
    assert!((&m - model.mean()).norm() / model.mean().norm() <= 0.05);
    assert!((&c - model.covariance()).norm() / model.covariance().norm() <= 0.10);
}

struct Exploding;

impl Denoiser for Exploding {
    fn predict_v(&self, z_t: &Latent, level: NoiseLevel, _: Option<u32>) -> Result<Latent> {
        let mut v = z_t.clone();
        if level.alpha > 0.5 {
            v.data_mut()[0] = f64::NAN;
        }
        Ok(v)
    }
}

struct WrongShape;

impl Denoiser for WrongShape {
    fn predict_v(&self, z_t: &Latent, _: NoiseLevel, _: Option<u32>) -> Result<Latent> {
        Ok(Latent::zeros(z_t.n_channels() + 1, z_t.n_frames(), z_t.frame_rate()))
    }
}

#[test]
fn divergence_and_shape_errors() {
    let sched = make_schedule(24).unwrap();
    let req = GenerationRequest::unconditional(2, 4, 40.0, 0);
    match sample(&Exploding, &req, &sched) {
        Err(Error::SamplerDivergence { step }) => assert!(step < 24),
        other => panic!("expected divergence, got {other:?}"),
    }
    assert!(matches!(sample(&WrongShape, &req, &sched), Err(Error::Shape(_))));
}
