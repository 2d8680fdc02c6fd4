// Independent numerical oracles shared by unit, integration and acceptance tests.
// Nothing here calls the closed-form routines they are used to check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use spd_power::{dist_power, PowerParam, SymMatrix};

pub fn random_orthogonal(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0))
        .qr()
        .q()
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi)`.
pub fn random_spd(rng: &mut impl Rng, m: usize, lo: f64, hi: f64) -> SymMatrix {
    let q = random_orthogonal(rng, m);
    let diag: Vec<f64> = (0..m).map(|_| rng.random_range(lo..hi)).collect();
    SymMatrix::from_diag(&diag).congruence(&q)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn num_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Quasi-Newton (BFGS) minimiser with central-difference gradients.
/// `f` may return `+inf` outside its domain; the line search backs off.
pub fn minimize_bfgs(f: &dyn Fn(&[f64]) -> f64, x0: &[f64]) -> Vec<f64> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    assert!(fx.is_finite(), "oracle start point outside the domain");
    let mut g = num_grad(f, &x);
    let mut h = DMatrix::<f64>::identity(n, n);
    for _ in 0..2000 {
        if dot(&g, &g).sqrt() < 1e-11 {
            break;
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        if dot(&g, &d) >= 0.0 {
            h = DMatrix::identity(n, n);
            d = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&g, &d);
        let mut step = 1.0;
        let (xn, fxn) = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fxn = f(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * step * slope {
                break (xn, fxn);
            }
            step *= 0.5;
            if step < 1e-20 {
                return x;
            }
        };
        let gn = num_grad(f, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let sv = nalgebra::DVector::from_column_slice(&s);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &sv * yv.transpose();
            let right = &i - rho * &yv * sv.transpose();
            h = &left * &h * &right + rho * &sv * sv.transpose();
        }
        x = xn;
        fx = fxn;
        g = gn;
    }
    x
}

/// Minimiser of `sum_i d_alpha(S_i, X)^2` over `vech(X)`, found numerically.
pub fn brute_force_frechet(samples: &[SymMatrix], alpha: f64) -> SymMatrix {
    let m = samples[0].dim();
    let p = PowerParam::new(alpha).unwrap();
    let objective = |v: &[f64]| -> f64 {
        let x = match SymMatrix::from_vech(m, v.to_vec()) {
            Ok(x) => x,
            Err(_) => return f64::INFINITY,
        };
        let mut total = 0.0;
        for s in samples {
            match dist_power(s, &x, p) {
                Ok(d) => total += d * d,
                Err(_) => return f64::INFINITY,
            }
        }
        total
    };
    // start from the arithmetic mean, which is positive definite
    let mut start = vec![0.0; samples[0].vech().len()];
    for s in samples {
        for (acc, v) in start.iter_mut().zip(s.vech()) {
            *acc += v / samples.len() as f64;
        }
    }
    let v = minimize_bfgs(&objective, &start);
    SymMatrix::from_vech(m, v).unwrap()
}

/// Minimum of `||a - b R||_F` over 2x2 orthogonal `R`, by dense scan of
/// rotations and reflections followed by golden-section refinement.
pub fn brute_force_procrustes_2x2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let rot = |t: f64, reflect: bool| -> DMatrix<f64> {
        let (s, c) = t.sin_cos();
        if reflect {
            DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
        } else {
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
    };
    let cost = |t: f64, reflect: bool| (a - b * rot(t, reflect)).norm();
    let tau = std::f64::consts::TAU;
    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        let n = 3600;
        let mut best_k = 0;
        let mut best_c = f64::INFINITY;
        for k in 0..n {
            let c = cost(tau * k as f64 / n as f64, reflect);
            if c < best_c {
                best_c = c;
                best_k = k;
            }
        }
        let (mut lo, mut hi) = (
            tau * (best_k as f64 - 1.0) / n as f64,
            tau * (best_k as f64 + 1.0) / n as f64,
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if cost(x1, reflect) < cost(x2, reflect) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        best = best.min(cost(0.5 * (lo + hi), reflect)).min(best_c);
    }
    best
}

/// `log |det d vech(T(S)) / d vech(S)|` by central differences, for any map `T`.
pub fn numeric_log_abs_jacobian(
    s: &SymMatrix,
    map: &dyn Fn(&SymMatrix) -> Vec<f64>,
    h: f64,
) -> f64 {
    let v = s.vech().to_vec();
    let p = v.len();
    let mut jac = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[k] += h;
        vm[k] -= h;
        let fp = map(&SymMatrix::from_vech(s.dim(), vp).unwrap());
        let fm = map(&SymMatrix::from_vech(s.dim(), vm).unwrap());
        for r in 0..p {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac.determinant().abs().ln()
}
