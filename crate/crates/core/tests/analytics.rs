use std::f64::consts::PI;

use jumpvol::kernels::{c_tilde, kernel_moment, Kernel, KernelSpec};
use jumpvol::stable_analytics::{
  c_alpha, d_zeta_asymptotic, d_zeta_mc, d_zeta_quadrature, stable_density, StableLaw,
};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

#[test]
fn tail_constant_has_two_closed_forms() {
  for &a in &[0.1, 0.5, 0.9, 1.2, 1.5, 1.9] {
    let reflected = gamma(1.0 + a) * (PI * a / 2.0).sin() / (2.0 * PI);
    assert!((c_alpha(a).unwrap() - reflected).abs() < 1e-12, "alpha={a}");
  }
  assert!((c_alpha(1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
  assert!(c_alpha(2.0).is_err());
}

#[test]
fn cauchy_density_in_both_normalizations() {
  // tail-normalized: CF e^{-|t|/2}, Cauchy with scale 1/2
  let tail = StableLaw::tail_normalized(1.0).unwrap();
  let unit = StableLaw::unit_levy(1.0).unwrap();
  for &z in &[0.0, 0.3, 1.0, 7.0, 150.0] {
    let exact_tail = 0.5 / (PI * (0.25 + z * z));
    let exact_unit = PI / (PI * (PI * PI + z * z));
    assert!((stable_density(z, &tail).unwrap() - exact_tail).abs() < 1e-10 * exact_tail.max(1e-3));
    assert!((stable_density(z, &unit).unwrap() - exact_unit).abs() < 1e-10 * exact_unit.max(1e-3));
  }
}

#[test]
fn d_zeta_is_even_in_monte_carlo() {
  let law = StableLaw::tail_normalized(1.2).unwrap();
  let a = d_zeta_mc(0.05, &law, 200_000, 4).unwrap();
  let b = d_zeta_mc(-0.05, &law, 200_000, 4).unwrap();
  assert!((a.mean - b.mean).abs() <= 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
}

#[test]
fn d_zeta_approaches_its_leading_term() {
  let law = StableLaw::tail_normalized(0.8).unwrap();
  let mut last = f64::INFINITY;
  for &z in &[0.1, 0.01, 0.001] {
    let q = d_zeta_quadrature(z, &law).unwrap();
    let lead = d_zeta_asymptotic(z, 0.8, &Kernel::Phi).unwrap();
    let rel = ((q - lead) / lead).abs();
    assert!(rel < last, "zeta={z}: {rel}");
    last = rel;
  }
  assert!(last < 0.02);
}

#[test]
fn kernel_moment_matches_riemann_oracle() {
  let cells = 1_000_000;
  let h = 2.0 / cells as f64;
  let riemann: f64 = 2.0 * h * (0..cells).map(|i| jumpvol::kernels::phi((i as f64 + 0.5) * h)).sum::<f64>();
  let q = kernel_moment(&Kernel::Phi, 1.0).unwrap();
  assert!((q - riemann).abs() < 1e-6, "{q} vs {riemann}");
}

#[test]
fn composite_spec_resolves_to_a_cancelling_kernel() {
  let spec: KernelSpec = "composite:M=3".parse().unwrap();
  let k = spec.resolve(1.3).unwrap();
  assert_eq!(k, Kernel::composite(c_tilde(1.3, 3.0).unwrap(), 3.0).unwrap());
  assert!(kernel_moment(&k, 1.3).unwrap().abs() < 1e-9);
  assert_eq!(k.support_radius(), 3.0);
  assert!("composite:K=3".parse::<KernelSpec>().is_err());
}

proptest! {
  #![proptest_config(ProptestConfig::with_cases(24))]

  #[test]
  fn density_is_even_positive_and_unimodal(alpha in 0.3f64..1.95, z in 0.01f64..50.0) {
    let law = StableLaw::tail_normalized(alpha).unwrap();
    let f = stable_density(z, &law).unwrap();
    prop_assert!(f > 0.0);
    prop_assert!((f - stable_density(-z, &law).unwrap()).abs() <= 1e-12 * f.max(1e-12));
    prop_assert!(stable_density(z * 1.5, &law).unwrap() < f);
  }

  #[test]
  fn cancelling_coefficient_is_negative(alpha in 0.05f64..1.95, m in 1.6f64..10.0) {
    let ct = c_tilde(alpha, m).unwrap();
    prop_assert!(ct < 0.0 && ct.is_finite());
  }
}
