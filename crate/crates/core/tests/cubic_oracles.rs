use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snewton_core::cubic::{
    l2_penalty_eval, l3_penalty_eval, prox_cubic, solve_multi_anchor, solve_single_anchor, AnchorSet, CubeSums,
    CubicModel, InnerOptions, NormMode,
};
use snewton_core::{Matrix, Vector};

fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize, rank: usize, scale: f64) -> Matrix {
    let b = Matrix::from_fn(d, rank, |_, _| rng.random::<f64>() - 0.5);
    let h = &b * b.transpose() * scale;
    (&h + h.transpose()) * 0.5
}

#[test]
fn prox_first_order_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let d = rng.random_range(1..6);
        let v = uniform_vec(&mut rng, d, -5.0, 5.0);
        let w = uniform_vec(&mut rng, d, -5.0, 5.0);
        let sigma = log_uniform(&mut rng, 1e-3, 1e3);
        let x = prox_cubic(&v, &w, sigma);
        let u = &x - &w;
        let residual = (&u * (3.0 * sigma * u.norm()) + (&x - &v)).norm();
        assert!(residual <= 1e-10, "residual {residual}");
    }
}

#[test]
fn prox_matches_golden_section_along_ray() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..500 {
        let d = rng.random_range(1..5);
        let v = uniform_vec(&mut rng, d, -3.0, 3.0);
        let w = uniform_vec(&mut rng, d, -3.0, 3.0);
        let sigma = log_uniform(&mut rng, 1e-2, 1e2);
        let dir = &v - &w;
        let r = dir.norm();
        let obj = |t: f64| sigma * (t * r).powi(3) + 0.5 * ((1.0 - t) * r).powi(2);
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let e = a + phi * (b - a);
            if obj(c) < obj(e) {
                b = e;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        let x = prox_cubic(&v, &w, sigma);
        let ours = sigma * (&x - &w).norm().powi(3) + 0.5 * (&x - &v).norm_squared();
        assert!((ours - obj(t)).abs() <= 1e-8 * (1.0 + obj(t)));
        assert!(ours <= obj(t) + 1e-14 * (1.0 + obj(t)));
        assert!((&x - (&w + &dir * t)).norm() <= 1e-6 * (1.0 + r));
    }
}

#[test]
fn single_anchor_stationarity_on_random_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-9;
    for _ in 0..1000 {
        let d = rng.random_range(1..=20);
        let rank = rng.random_range(0..=d);
        let scale = log_uniform(&mut rng, 1e-2, 1e2);
        let h = random_psd(&mut rng, d, rank, scale);
        let g = uniform_vec(&mut rng, d, -2.0, 2.0);
        let w = uniform_vec(&mut rng, d, -1.0, 1.0);
        let m = log_uniform(&mut rng, 1e-3, 1e3);
        let x = solve_single_anchor(&g, &h, &w, m, tol).unwrap();
        let gt = &g + &h * &w;
        let y = &x - &w;
        let residual = (&gt + &h * &y + &y * (0.5 * m * y.norm())).norm();
        assert!(residual <= tol * (1.0 + gt.norm()), "d={d} rank={rank} m={m}: {residual}");
    }
}

/// Plain objective `g^T x + 1/2 x^T H x + (M/6n) sum ||x - w_i||^3`.
struct Instance {
    g: Vec<f64>,
    h: Vec<Vec<f64>>,
    anchors: Vec<Vec<f64>>,
    m: f64,
}

impl Instance {
    fn l2(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut val = 0.0;
        for i in 0..d {
            val += self.g[i] * x[i];
            for j in 0..d {
                val += 0.5 * x[i] * self.h[i][j] * x[j];
            }
        }
        let n = self.anchors.len() as f64;
        for w in &self.anchors {
            let r: f64 = x.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            val += self.m / (6.0 * n) * r * r * r;
        }
        val
    }

    /// The aggregated l3 expression, written coordinate by coordinate.
    fn l3(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let n = self.anchors.len() as f64;
        let mut val = 0.0;
        for i in 0..d {
            val += self.g[i] * x[i];
            for j in 0..d {
                val += 0.5 * x[i] * self.h[i][j] * x[j];
            }
        }
        for j in 0..d {
            let a: f64 = self.anchors.iter().map(|w| w[j]).sum::<f64>() / n;
            let b: f64 = self.anchors.iter().map(|w| w[j] * w[j]).sum::<f64>() / n;
            let c: f64 = self.anchors.iter().map(|w| w[j].abs().powi(3)).sum::<f64>() / n;
            val += self.m / 6.0 * (x[j].abs().powi(3) - 3.0 * x[j] * x[j] * a + 3.0 * x[j] * b - c);
        }
        val
    }
}

/// Dense grid over a box followed by coordinate pattern search.
fn grid_polish(f: impl Fn(&[f64]) -> f64, d: usize, half_width: f64, points: usize) -> (Vec<f64>, f64) {
    let step = 2.0 * half_width / (points - 1) as f64;
    let mut best = vec![0.0; d];
    let mut best_val = f64::INFINITY;
    let total = points.pow(d as u32);
    let mut x = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for xj in x.iter_mut() {
            *xj = -half_width + step * (rem % points) as f64;
            rem /= points;
        }
        let v = f(&x);
        if v < best_val {
            best_val = v;
            best.clone_from(&x);
        }
    }
    let mut h = step;
    while h > 1e-10 {
        let mut improved = false;
        for j in 0..d {
            for sgn in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[j] += sgn * h;
                let v = f(&trial);
                if v < best_val {
                    best_val = v;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, best_val)
}

fn random_instance(rng: &mut ChaCha8Rng, d: usize, n: usize, anchor_lo: f64, anchor_hi: f64) -> Instance {
    let h = random_psd(rng, d, d, 2.0) + Matrix::identity(d, d) * 0.1;
    Instance {
        g: (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
        h: (0..d).map(|i| (0..d).map(|j| h[(i, j)]).collect()).collect(),
        anchors: (0..n)
            .map(|_| (0..d).map(|_| anchor_lo + (anchor_hi - anchor_lo) * rng.random::<f64>()).collect())
            .collect(),
        m: log_uniform(rng, 0.3, 10.0),
    }
}

fn to_model_parts(inst: &Instance) -> (Vector, Matrix, Vec<Vector>) {
    let d = inst.g.len();
    (
        Vector::from_vec(inst.g.clone()),
        Matrix::from_fn(d, d, |i, j| inst.h[i][j]),
        inst.anchors.iter().map(|w| Vector::from_vec(w.clone())).collect(),
    )
}

#[test]
fn multi_anchor_l2_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let d = 1 + case % 3;
        let n = 1 + (case / 3) % 5;
        let inst = random_instance(&mut rng, d, n, -1.0, 1.0);
        let (g, h, anchors) = to_model_parts(&inst);
        let model = CubicModel::new(g, h, AnchorSet::Explicit(&anchors), inst.m).unwrap();
        let sol = solve_multi_anchor(&model, NormMode::L2, InnerOptions::default()).unwrap();
        let ours = inst.l2(sol.x.as_slice());
        let points = [0, 161, 41, 17][d];
        let (_, oracle) = grid_polish(|x| inst.l2(x), d, 4.0, points);
        assert!(sol.x.amax() < 4.0);
        assert!((ours - oracle).abs() <= 1e-6, "case {case}: {ours} vs {oracle}");
        let best_anchor = anchors
            .iter()
            .map(|w| model.objective(w, NormMode::L2).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(ours <= best_anchor + 1e-12);
    }
}

#[test]
fn multi_anchor_l3_matches_grid_oracle_in_convex_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..60 {
        let d = 1 + case % 3;
        let n = 1 + (case / 3) % 5;
        let inst = random_instance(&mut rng, d, n, -1.0, 0.0);
        let (g, h, anchors) = to_model_parts(&inst);
        let sums = CubeSums::from_anchors(&anchors);
        assert!(sums.penalty_is_convex());
        let model = CubicModel::new(g, h, AnchorSet::Sums(&sums), inst.m).unwrap();
        let sol = solve_multi_anchor(&model, NormMode::L3, InnerOptions::default()).unwrap();
        let ours = inst.l3(sol.x.as_slice());
        assert!((model.objective(&sol.x, NormMode::L3).unwrap() - ours).abs() <= 1e-12 * (1.0 + ours.abs()));
        let points = [0, 161, 41, 17][d];
        let (_, oracle) = grid_polish(|x| inst.l3(x), d, 4.0, points);
        assert!((ours - oracle).abs() <= 1e-6, "case {case}: {ours} vs {oracle}");
    }
}

#[test]
fn collapses_to_single_anchor() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tol = 1e-9;
    for _ in 0..50 {
        let d = rng.random_range(1..6);
        let h = random_psd(&mut rng, d, d, 1.0);
        let g = uniform_vec(&mut rng, d, -1.0, 1.0);
        let w = uniform_vec(&mut rng, d, -1.0, 1.0);
        let m = log_uniform(&mut rng, 0.1, 10.0);
        let anchors = vec![w.clone(); 3];
        let model = CubicModel::new(g.clone(), h.clone(), AnchorSet::Explicit(&anchors), m).unwrap();
        let multi = solve_multi_anchor(&model, NormMode::L2, InnerOptions { tol, max_iter: 100_000 }).unwrap();
        let single = solve_single_anchor(&g, &h, &w, m, tol).unwrap();
        assert!((multi.x - single).norm() <= 10.0 * tol * (1.0 + g.norm()));
    }
}

/// Where `x_j >= w_ij >= 0` the aggregated expression equals the direct
/// average of cubed l3 distances.
#[test]
fn l3_identity_on_ordered_nonnegative_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let d = rng.random_range(1..6);
        let n = rng.random_range(1..6);
        let anchors: Vec<Vector> = (0..n)
            .map(|_| Vector::from_fn(d, |_, _| rng.random::<f64>()))
            .collect();
        let x = Vector::from_fn(d, |_, _| 1.0 + rng.random::<f64>());
        let m = 6.0;
        let (agg, grad) = l3_penalty_eval(&x, &CubeSums::from_anchors(&anchors), m);
        let direct: f64 = anchors
            .iter()
            .map(|w| (&x - w).iter().map(|u| u.abs().powi(3)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        assert!((agg - direct).abs() <= 1e-12 * (1.0 + direct));
        let direct_grad = anchors
            .iter()
            .fold(Vector::zeros(d), |acc, w| acc + (&x - w).map(|u| 3.0 * u.abs() * u))
            / n as f64;
        assert!((grad - direct_grad).norm() <= 1e-12 * (1.0 + direct));
    }
}

/// Outside that regime the aggregated expression is a different function,
/// including for anchors and points that are all nonpositive.
#[test]
fn l3_identity_fails_off_the_ordered_regime() {
    let anchors = vec![Vector::from_vec(vec![-0.5])];
    let x = Vector::from_vec(vec![-1.0]);
    let (agg, _) = l3_penalty_eval(&x, &CubeSums::from_anchors(&anchors), 6.0);
    // |(-1) - (-0.5)|^3 = 0.125, but 1 - 3(-0.5) + 3(-1)(0.25) - 0.125 = 1.625
    assert!((agg - 1.625).abs() < 1e-15);

    let anchors = vec![Vector::from_vec(vec![1.0, -0.5]), Vector::from_vec(vec![0.5, 0.25])];
    let x = Vector::from_vec(vec![0.0, 0.0]);
    let (agg, _) = l3_penalty_eval(&x, &CubeSums::from_anchors(&anchors), 6.0);
    let direct: f64 = anchors
        .iter()
        .map(|w| w.iter().map(|u| u.abs().powi(3)).sum::<f64>())
        .sum::<f64>()
        / 2.0;
    assert!((agg - direct).abs() > 0.1);
}

#[test]
fn penalty_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let anchors: Vec<Vector> = (0..4).map(|_| uniform_vec(&mut rng, 3, -1.0, 1.0)).collect();
    let sums = CubeSums::from_anchors(&anchors);
    for _ in 0..20 {
        let x = uniform_vec(&mut rng, 3, -2.0, 2.0);
        let (_, g2) = l2_penalty_eval(&x, &anchors, 2.5);
        let (_, g3) = l3_penalty_eval(&x, &sums, 2.5);
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            let fd2 = (l2_penalty_eval(&xp, &anchors, 2.5).0 - l2_penalty_eval(&xm, &anchors, 2.5).0) / 2e-6;
            let fd3 = (l3_penalty_eval(&xp, &sums, 2.5).0 - l3_penalty_eval(&xm, &sums, 2.5).0) / 2e-6;
            assert!((fd2 - g2[j]).abs() <= 1e-6);
            assert!((fd3 - g3[j]).abs() <= 1e-6);
        }
    }
}
