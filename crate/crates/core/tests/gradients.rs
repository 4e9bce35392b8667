use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagan_core::network::{
    AudioDiscriminatorKind, ModelConfig, TaGan, DISCRIMINATOR_GROUPS, GENERATOR_GROUPS, GROUP_DISC_AUDIO,
    GROUP_DISC_CLS, GROUP_ENCODER, GROUP_GEN_AUDIO, GROUP_GEN_CLS,
};
use tagan_core::training::{objective_gradient_check, Batch, GraphOptions, Objective, PreparedWindow};

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-3;

fn model(kind: AudioDiscriminatorKind, seed: u64) -> TaGan<f64> {
    let cfg = ModelConfig {
        input_dim: 5,
        hidden: 8,
        noise_dim: 3,
        disc_hidden: 6,
        future_dim: 4,
        adversarial: true,
        audio_discriminator: kind,
    };
    let mut m = TaGan::new(cfg, seed);
    // The future head starts at zero; give it values so every path carries gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let head = m.params.find("gen_audio.head.w").unwrap();
    m.params.value_mut(head).data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    m
}

fn batch(seed: u64, steps: usize, size: usize) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows: Vec<PreparedWindow> = (0..size)
        .map(|_| PreparedWindow {
            steps,
            inputs: (0..steps * 5).map(|_| rng.random_range(0.0..1.0)).collect(),
            future: (0..steps * 4).map(|_| rng.random_range(0.0..1.0)).collect(),
            labels: (0..steps).map(|_| rng.random_bool(0.5) as u8 as f64).collect(),
        })
        .collect();
    let noise: Vec<Vec<f64>> = (0..size).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&PreparedWindow> = windows.iter().collect();
    Batch::assemble(&refs, &noise, 4).unwrap()
}

fn options() -> GraphOptions {
    GraphOptions {
        lambda_cls: 30.0,
        lambda_audio: 25.0,
        detach_condition: false,
    }
}

fn check(kind: AudioDiscriminatorKind, groups: &[&str], objective: Objective) {
    for seed in [1u64, 2, 3] {
        let m = model(kind, seed);
        let b = batch(seed + 10, 6, 2);
        let r = objective_gradient_check(&m, &b, options(), groups, objective, 25, STEP, seed).unwrap();
        assert_eq!(r.probes.len(), 25);
        assert!(r.max_rel_error < TOL, "{groups:?} seed {seed}: {:?}", r.probes.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)));
    }
}

#[test]
fn encoder_gradients() {
    check(AudioDiscriminatorKind::Temporal, &[GROUP_ENCODER], Objective::Generator);
}

#[test]
fn classification_generator_gradients() {
    check(AudioDiscriminatorKind::Temporal, &[GROUP_GEN_CLS], Objective::Generator);
}

#[test]
fn audio_generator_gradients() {
    check(AudioDiscriminatorKind::Temporal, &[GROUP_GEN_AUDIO], Objective::Generator);
}

#[test]
fn static_discriminator_gradients() {
    check(AudioDiscriminatorKind::Temporal, &[GROUP_DISC_CLS], Objective::Discriminator);
}

#[test]
fn temporal_discriminator_gradients() {
    check(AudioDiscriminatorKind::Temporal, &[GROUP_DISC_AUDIO], Objective::Discriminator);
}

#[test]
fn full_objectives() {
    check(AudioDiscriminatorKind::Temporal, &GENERATOR_GROUPS, Objective::Generator);
    check(AudioDiscriminatorKind::Temporal, &DISCRIMINATOR_GROUPS, Objective::Discriminator);
    check(AudioDiscriminatorKind::StaticDuplicate, &GENERATOR_GROUPS, Objective::Generator);
    check(AudioDiscriminatorKind::StaticDuplicate, &DISCRIMINATOR_GROUPS, Objective::Discriminator);
}

#[test]
fn detached_condition_only_drops_the_discriminator_path() {
    let m = model(AudioDiscriminatorKind::Temporal, 4);
    let b = batch(5, 6, 2);
    let mut detached = options();
    detached.detach_condition = true;
    // The generators never see a detached input, so their gradients agree.
    let r = objective_gradient_check(&m, &b, detached, &[GROUP_GEN_CLS, GROUP_GEN_AUDIO], Objective::Generator, 25, STEP, 9)
        .unwrap();
    assert!(r.max_rel_error < TOL);
    let r = objective_gradient_check(&m, &b, detached, &[GROUP_ENCODER], Objective::Generator, 25, STEP, 9).unwrap();
    assert!(r.max_rel_error > TOL);
}
