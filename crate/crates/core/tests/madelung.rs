//! The real residuals against the complex lattice equations, numerically.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multiscale_core::pipeline::{madelung, LatticeSample, ModelKind};

/// `i f_t + (f₊ − 2f + f₋)/(2h²) − rhs(f)` at the centre site.
fn complex_residual(kind: ModelKind, s: &LatticeSample) -> Complex64 {
    let f: Vec<Complex64> = (0..3)
        .map(|k| Complex64::from_polar(s.nu[k].sqrt(), s.phi[k]))
        .collect();
    let ft = f[1] * Complex64::new(s.dt_nu / (2.0 * s.nu[1]), s.dt_phi);
    let lap = (f[2] - 2.0 * f[1] + f[0]) / (2.0 * s.h * s.h);
    let rhs = match kind {
        ModelKind::Dnls => s.sigma * f[1].norm_sqr() * f[1],
        ModelKind::Al => 0.5 * s.sigma * f[1].norm_sqr() * (f[2] + f[0]),
    };
    Complex64::i() * ft + lap - rhs
}

fn sample(rng: &mut impl Rng) -> LatticeSample {
    LatticeSample {
        nu: [0; 3].map(|_| rng.gen_range(0.2..2.0)),
        phi: [0; 3].map(|_| rng.gen_range(-3.0..3.0)),
        dt_nu: rng.gen_range(-2.0..2.0),
        dt_phi: rng.gen_range(-2.0..2.0),
        h: rng.gen_range(0.1..0.9),
        sigma: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn residuals_match_the_complex_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kind in [ModelKind::Dnls, ModelKind::Al] {
        let spec = madelung(kind);
        for _ in 0..200 {
            let s = sample(&mut rng);
            let e =
                complex_residual(kind, &s) * Complex64::from_polar(1.0 / s.nu[1].sqrt(), -s.phi[1]);
            let r_nu = spec.r_nu.eval_f64(&s);
            let r_phi = spec.r_phi.eval_f64(&s);
            assert!(
                close(e.im, r_nu / (2.0 * s.nu[1])),
                "{kind}: {} vs {}",
                e.im,
                r_nu
            );
            assert!(close(e.re, -r_phi), "{kind}: {} vs {}", e.re, r_phi);
        }
    }
}

#[test]
fn plane_wave_background_is_exact() {
    // f = e^{−iσt} solves both lattices: ν ≡ 1, ϕ_t = −σ, no phase gradient.
    for kind in [ModelKind::Dnls, ModelKind::Al] {
        let spec = madelung(kind);
        for sigma in [1.0, -1.0] {
            let s = LatticeSample {
                nu: [1.0; 3],
                phi: [0.3; 3],
                dt_nu: 0.0,
                dt_phi: -sigma,
                h: 0.37,
                sigma,
            };
            assert!(spec.r_nu.eval_f64(&s).abs() < 1e-12);
            assert!(spec.r_phi.eval_f64(&s).abs() < 1e-12);
        }
    }
}
