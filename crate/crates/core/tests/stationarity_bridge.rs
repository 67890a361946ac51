use incopt::instances::{generate_rms, generate_rpr};
use incopt::problem::{local_model, AbsAffine, FiniteSum};
use incopt::rng::SeedStream;
use incopt::stationarity::{default_tau_hat, moreau_grad_norm};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimal norm of `(1/m) Σ s_i ∇c_i(y)` with `s_i = sign(c_i(y))` off the
/// kinks and `s_i ∈ [-1, 1]` on components with `|c_i(y)| <= kink`, by
/// projected gradient on the free signs.
fn min_norm_subgradient<P: FiniteSum<f64>>(p: &P, y: &[f64], kink: f64) -> f64 {
    let m = p.num_components();
    let n = y.len();
    let mut fixed = vec![0.0; n];
    let mut free: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let model = local_model(p, i, y).unwrap();
        let c = dot(&model.a, y) + model.b;
        if c.abs() <= kink {
            free.push(model.a.iter().map(|v| v / m as f64).collect());
        } else {
            for (f, a) in fixed.iter_mut().zip(&model.a) {
                *f += c.signum() * a / m as f64;
            }
        }
    }
    let eval = |s: &[f64]| -> Vec<f64> {
        let mut v = fixed.clone();
        for (si, col) in s.iter().zip(&free) {
            for (vj, cj) in v.iter_mut().zip(col) {
                *vj += si * cj;
            }
        }
        v
    };
    if free.is_empty() {
        return dot(&fixed, &fixed).sqrt();
    }
    let lip: f64 = free.iter().map(|c| dot(c, c)).sum::<f64>().max(1e-300);
    let mut s = vec![0.0; free.len()];
    for _ in 0..20_000 {
        let v = eval(&s);
        for (si, col) in s.iter_mut().zip(&free) {
            *si = (*si - dot(col, &v) / lip).clamp(-1.0, 1.0);
        }
    }
    let v = eval(&s);
    dot(&v, &v).sqrt()
}

fn check_bridge<P: FiniteSum<f64>>(p: &P, tau_hat: f64, seeds: std::ops::Range<u64>) {
    let tol = 1e-10;
    for seed in seeds {
        let x: Vec<f64> = SeedStream::new(seed, 8).gaussian_vec(p.dim());
        let est = moreau_grad_norm(p, &x, tau_hat, tol).unwrap();
        let min_norm = min_norm_subgradient(p, &est.proximal_point, 1e-6);
        assert!(
            min_norm <= est.grad_norm + tol * tau_hat,
            "seed {seed}: min-norm subgradient {min_norm:e} exceeds {:e}",
            est.grad_norm
        );
    }
}

#[test]
fn bridge_on_convex_affine_family() {
    let mut rng = SeedStream::new(4, 1);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| rng.gaussian_vec(5)).collect();
    let offsets: Vec<f64> = rng.gaussian_vec(20);
    let p = AbsAffine::new(rows, offsets).unwrap();
    check_bridge(&p, 2.0, 0..10);
}

#[test]
fn bridge_on_phase_retrieval() {
    let p = generate_rpr::<f64>(4, 30, 0.3, 6).unwrap();
    check_bridge(&p, default_tau_hat(p.tau()), 0..10);
}

#[test]
fn envelope_lies_below_the_function() {
    let rpr = generate_rpr::<f64>(6, 40, 0.3, 1).unwrap();
    let rms = generate_rms::<f64>(4, 2, 30, 0.3, 1).unwrap();
    for seed in 0..10 {
        let x: Vec<f64> = SeedStream::new(seed, 4).gaussian_vec(6);
        let th = default_tau_hat(rpr.tau());
        let e = moreau_grad_norm(&rpr, &x, th, 1e-9).unwrap();
        assert!(e.envelope_value <= rpr.full_value(&x));
        let d: f64 = x.iter().zip(&e.proximal_point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert_eq!(e.grad_norm, th * d);

        let u: Vec<f64> = SeedStream::new(seed, 4).gaussian_vec(8);
        let th = default_tau_hat(rms.tau());
        let e = moreau_grad_norm(&rms, &u, th, 1e-9).unwrap();
        assert!(e.envelope_value <= rms.full_value(&u));
    }
}

#[test]
fn measure_vanishes_at_the_ground_truth() {
    let p = generate_rpr::<f64>(6, 60, 0.0, 2).unwrap();
    let e = moreau_grad_norm(&p, &p.signal, default_tau_hat(p.tau()), 1e-10).unwrap();
    assert!(e.grad_norm <= 1e-8, "{:e}", e.grad_norm);
}
