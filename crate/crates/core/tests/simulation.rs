use std::fs::File;
use std::io::{BufReader, BufWriter};

use jumpvol::levy_sim::{
  sample_stable_increment, sample_tempered_increment, simulate_path, JumpLaw, ModelSpec, PathSample, TemperedSampler,
};
use jumpvol::rng;
use jumpvol::stable_analytics::{Normalization, StableLaw};
use proptest::prelude::*;

#[test]
fn path_csv_round_trips_through_a_file() {
  let law = JumpLaw::stable(1.2).unwrap().with_normalization(Normalization::UnitLevyDensity);
  let model = ModelSpec::new(-0.3, 0.7, 2.0, law).unwrap();
  let path = simulate_path(&model, 333, 17).unwrap();
  let dir = tempfile::tempdir().unwrap();
  let file = dir.path().join("p.csv");
  path.write_csv(BufWriter::new(File::create(&file).unwrap())).unwrap();
  let back = PathSample::read_csv(BufReader::new(File::open(&file).unwrap())).unwrap();
  assert_eq!(back.observations(), path.observations());
  assert_eq!(back.n(), 333);
}

#[test]
fn normalizations_differ_only_in_jump_scale() {
  // Same stream, same standard draws: increments scale by (cf ratio)^{1/α}.
  let a = 1.5;
  let unit = StableLaw::unit_levy(a).unwrap();
  let tail = StableLaw::tail_normalized(a).unwrap();
  let ratio = (unit.cf_scale() / tail.cf_scale()).powf(1.0 / a);
  let mut r1 = rng::stream(1, 2, 3);
  let mut r2 = rng::stream(1, 2, 3);
  for _ in 0..100 {
    let x = sample_stable_increment(&unit, 0.01, &mut r1).unwrap();
    let y = sample_stable_increment(&tail, 0.01, &mut r2).unwrap();
    assert!((x - ratio * y).abs() <= 1e-12 * x.abs().max(1e-300));
  }
}

#[test]
fn tempered_sampler_reports_its_components() {
  let s = TemperedSampler::new(0.5, 1.0, 0.01).unwrap();
  assert!(s.intensity() > 0.0);
  // 2∫_0^c z^{1-α} dz bounds the small-jump variance from above
  let bound = 2.0 * 0.01f64.powf(1.5) / 1.5;
  assert!(s.small_jump_variance() < bound && s.small_jump_variance() > 0.95 * bound);
  let mut r = rng::stream(0, 0, 0);
  assert_eq!(sample_tempered_increment(0.5, 0.0, 0.01, &mut r).unwrap(), 0.0);
  assert!(sample_tempered_increment(0.5, -1.0, 0.01, &mut r).is_err());
}

#[test]
fn tempered_paths_have_finite_second_moment() {
  let law = JumpLaw::tempered(0.9, 0.01).unwrap().with_normalization(Normalization::UnitLevyDensity);
  let model = ModelSpec::new(0.0, 0.0, 1.0, law).unwrap();
  let mut sum = 0.0;
  let reps = 2000;
  for s in 0..reps {
    let p = simulate_path(&model, 10, s).unwrap();
    sum += p.observations()[10].powi(2);
  }
  // E[L_1²] = 2Γ(2-α) for the unit Lévy density e^{-|z|}|z|^{-1-α}
  let target = 2.0 * statrs::function::gamma::gamma(1.1);
  let mean = sum / reps as f64;
  assert!((mean - target).abs() < 0.1 * target, "{mean} vs {target}");
}

#[test]
fn model_validation() {
  let law = JumpLaw::stable(1.0).unwrap();
  assert!(ModelSpec::new(0.0, -1.0, 1.0, law).is_err());
  assert!(ModelSpec::new(f64::NAN, 1.0, 1.0, law).is_err());
  assert!(ModelSpec::new(0.0, 1.0, f64::INFINITY, law).is_err());
  assert!(JumpLaw::stable(0.0).is_err());
  assert!(JumpLaw::tempered(1.0, 0.0).is_err());
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(32))]

  #[test]
  fn simulation_is_a_pure_function(seed in any::<u64>(), n in 2usize..200, alpha in 0.2f64..1.95, tempered in any::<bool>()) {
    let law = if tempered { JumpLaw::tempered(alpha, 0.05).unwrap() } else { JumpLaw::stable(alpha).unwrap() };
    let model = ModelSpec::new(0.1, 1.0, 1.0, law).unwrap();
    let a = simulate_path(&model, n, seed).unwrap();
    let b = simulate_path(&model, n, seed).unwrap();
    prop_assert_eq!(&a, &b);
    prop_assert_eq!(a.observations().len(), n + 1);
    prop_assert_eq!(a.observations()[0], 0.0);
    prop_assert_eq!(a.seed, Some(seed));
  }

  #[test]
  fn coarsening_preserves_endpoints(n in 1usize..100, seed in any::<u64>()) {
    let model = ModelSpec::new(0.0, 1.0, 0.5, JumpLaw::stable(1.7).unwrap()).unwrap();
    let fine = simulate_path(&model, 2 * n.max(1), seed).unwrap();
    let coarse = fine.coarsen(2).unwrap();
    prop_assert_eq!(coarse.n() * 2, fine.n());
    prop_assert_eq!(coarse.observations().last(), fine.observations().last());
    prop_assert!((coarse.delta() - 2.0 * fine.delta()).abs() < 1e-15);
  }
}
