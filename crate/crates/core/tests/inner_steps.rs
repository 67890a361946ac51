//! Per-update invariants of the incremental methods, checked one component
//! at a time along real trajectories.

use incopt::instances::{generate_bd, generate_rms, generate_rpr, Instance, InstanceSpec};
use incopt::problem::{local_model, FiniteSum};
use incopt::rng::SeedStream;
use incopt::solvers::{ipp_inner, prox_scalar_affine, InnerStats};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `min_{s ∈ S} ||s a + v||` with `S = {sign(t)}` away from the kink and
/// `[-1, 1]` within `kink` of it.
fn min_norm_residual(a: &[f64], t: f64, v: &[f64], kink: f64) -> f64 {
    let s = if t.abs() > kink {
        t.signum()
    } else {
        let q = dot(a, a);
        if q == 0.0 {
            0.0
        } else {
            (-dot(a, v) / q).clamp(-1.0, 1.0)
        }
    };
    let r: Vec<f64> = a.iter().zip(v).map(|(ai, vi)| s * ai + vi).collect();
    norm(&r)
}

fn instances() -> Vec<Instance<f64>> {
    [
        InstanceSpec::Rpr { n: 12, m: Some(120), p: 0.3, seed: 4 },
        InstanceSpec::Rms { n: 6, r: 2, m: Some(60), p: 0.3, seed: 4 },
        InstanceSpec::Bd { n1: 5, n2: 4, m: Some(72), p: 0.3, seed: 4 },
    ]
    .iter()
    .map(|s| s.generate().unwrap())
    .collect()
}

#[test]
fn prox_linear_steps_satisfy_fixed_point_relation() {
    for p in instances() {
        let m = p.num_components();
        let mu = 0.5 / (m as f64 * p.tau());
        let mut x: Vec<f64> = SeedStream::new(1, 2).gaussian_vec(p.dim());
        let mut worst: f64 = 0.0;
        for _epoch in 0..3 {
            for i in 0..m {
                let model = local_model(&p, i, &x).unwrap();
                let next = prox_scalar_affine(&model.a, model.b, &x, mu);
                let ax = dot(&model.a, &next);
                let t = ax + model.b;
                let v: Vec<f64> = diff(&next, &x).iter().map(|d| d / mu).collect();
                let kink = 1e-12 * (1.0 + ax.abs() + model.b.abs());
                let res = min_norm_residual(&model.a, t, &v, kink);
                worst = worst.max(res);
                // step-length bound with the realized slope; the difference of
                // two iterates carries rounding of order ε||x||
                let slack = 4.0 * f64::EPSILON * norm(&x);
                assert!(norm(&diff(&next, &x)) <= mu * norm(&model.a) * (1.0 + 1e-12) + slack);
                // subproblem descent against staying at the center
                let obj = t.abs() + 0.5 / mu * dot(&diff(&next, &x), &diff(&next, &x));
                assert!(obj <= model.eval(&x) * (1.0 + 1e-12) + 1e-12);
                x = next;
            }
        }
        assert!(worst <= 1e-8, "{}: worst IPL residual {worst:e}", p.kind());
    }
}

#[test]
fn proximal_point_steps_meet_inner_tolerance() {
    let tol = 1e-7;
    for p in instances() {
        let m = p.num_components();
        let mu = 0.9 / p.tau();
        let mut stats = InnerStats::default();
        let mut x: Vec<f64> = SeedStream::new(3, 2).gaussian_vec(p.dim());
        for i in 0..m {
            let (next, reported) = ipp_inner(&p, i, &x, mu, tol, &mut stats).unwrap();
            let mut grad = vec![0.0; p.dim()];
            let model = local_model(&p, i, &next).unwrap();
            grad.copy_from_slice(&model.a);
            let ax = dot(&grad, &next);
            let c = ax + model.b;
            let v: Vec<f64> = diff(&next, &x).iter().map(|d| d / mu).collect();
            let kink = (0.5 * tol * mu * norm(&grad)).max(16.0 * f64::EPSILON * (ax.abs() + model.b.abs()));
            let res = min_norm_residual(&grad, c, &v, kink);
            assert!(res <= tol, "{} component {i}: residual {res:e}", p.kind());
            assert!((res - reported).abs() <= 1e-3 * tol + 1e-15, "{res:e} vs reported {reported:e}");
            // ||x+ - x|| = μ ||g(x+)|| up to the residual
            let step = norm(&diff(&next, &x));
            let slack = 4.0 * f64::EPSILON * norm(&x);
            assert!(step <= mu * (norm(&grad) + tol) * (1.0 + 1e-12) + slack, "{step} > {}", mu * norm(&grad));
            // subproblem descent
            let obj = p.value(i, &next) + 0.5 / mu * step * step;
            assert!(obj <= p.value(i, &x) * (1.0 + 1e-12) + 1e-12);
            x = next;
        }
    }
}

#[test]
fn subgradient_steps_have_length_mu_times_slope() {
    let p = generate_rpr::<f64>(10, 80, 0.3, 2).unwrap();
    let mu = 1e-3;
    let mut x: Vec<f64> = SeedStream::new(5, 2).gaussian_vec(10);
    let mut g = vec![0.0; 10];
    for i in 0..80 {
        p.subgradient(i, &x, &mut g);
        let next = incopt::solvers::igd_epoch(&p, &x, mu, &[i]).unwrap();
        let step = norm(&diff(&next, &x));
        assert!((step - mu * norm(&g)).abs() <= 4.0 * f64::EPSILON * (norm(&x) + step));
        x = next;
    }
}

#[test]
fn epoch_travel_is_bounded_by_m_mu_l() {
    use incopt::problem::estimate_lipschitz;
    use incopt::solvers::{igd_epoch, ipl_epoch};
    let p = generate_rms::<f64>(5, 2, 40, 0.3, 3).unwrap();
    let bd = generate_bd::<f64>(4, 4, 40, 0.3, 3).unwrap();
    let order: Vec<usize> = (0..40).collect();
    for mu in [1e-4, 1e-5, 1e-6] {
        let x: Vec<f64> = SeedStream::new(2, 2).gaussian_vec(10);
        let l = estimate_lipschitz(&p, &x, 1.0, 50, 1).unwrap();
        for next in [igd_epoch(&p, &x, mu, &order).unwrap(), ipl_epoch(&p, &x, mu, &order).unwrap()] {
            assert!(norm(&diff(&next, &x)) <= 40.0 * mu * l);
        }
        let x: Vec<f64> = SeedStream::new(2, 2).gaussian_vec(8);
        let l = estimate_lipschitz(&bd, &x, 1.0, 50, 1).unwrap();
        let next = ipl_epoch(&bd, &x, mu, &order).unwrap();
        assert!(norm(&diff(&next, &x)) <= 40.0 * mu * l);
    }
}
