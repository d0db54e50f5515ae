use dads_core::{BoxSet, ScalarFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Straightforward re-implementations, written without looking at shared helpers.

fn quad(curv: &[f64], center: &[f64], offset: f64, x: &[f64]) -> f64 {
    let mut s = offset;
    for k in 0..x.len() {
        s += curv[k] * (x[k] - center[k]) * (x[k] - center[k]);
    }
    s
}

fn pl(bp: &[f64], vals: &[f64], z: f64) -> f64 {
    if z <= bp[0] {
        return vals[0];
    }
    for j in 1..bp.len() {
        if z <= bp[j] {
            let t = (z - bp[j - 1]) / (bp[j] - bp[j - 1]);
            return vals[j - 1] + t * (vals[j] - vals[j - 1]);
        }
    }
    *vals.last().unwrap()
}

fn poly(c: &[f64], z: f64) -> f64 {
    c.iter().enumerate().map(|(k, ck)| ck * z.powi(k as i32)).sum()
}

fn affine(w: &[f64], off: f64, x: &[f64]) -> f64 {
    off + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

#[test]
fn every_kind_matches_pointwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let q = ScalarFunction::Quadratic {
        curvature: vec![1.5, -0.5, 2.0],
        center: vec![0.3, -1.0, 2.0],
        offset: 0.7,
    };
    let p = ScalarFunction::piecewise_linear(&[(-1.0, 2.0), (0.0, -1.0), (0.5, 0.5), (3.0, 0.25)]);
    let c = ScalarFunction::Polynomial {
        coefficients: vec![1.0, -2.0, 0.5, 0.25, -0.1],
    };
    let a = ScalarFunction::affine(vec![0.5, -1.0, 2.0], -0.3);
    for _ in 0..1000 {
        let x3: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let z = rng.gen_range(-4.0..4.0);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
        assert!(close(q.eval(&x3), quad(&[1.5, -0.5, 2.0], &[0.3, -1.0, 2.0], 0.7, &x3)));
        assert!(close(
            p.eval(&[z]),
            pl(&[-1.0, 0.0, 0.5, 3.0], &[2.0, -1.0, 0.5, 0.25], z)
        ));
        assert!(close(c.eval(&[z]), poly(&[1.0, -2.0, 0.5, 0.25, -0.1], z)));
        assert!(close(a.eval(&x3), affine(&[0.5, -1.0, 2.0], -0.3, &x3)));
    }
}

#[test]
fn lipschitz_bounds_hold_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let dom = BoxSet::new(vec![-2.0], vec![3.0]).unwrap();
    let fs = [
        ScalarFunction::quadratic_1d(-1.5, 0.5, 0.0),
        ScalarFunction::piecewise_linear(&[(-1.0, 2.0), (0.0, -1.0), (2.0, 0.5)]),
        ScalarFunction::Polynomial {
            coefficients: vec![0.0, 1.0, -1.0, 0.3],
        },
        ScalarFunction::affine(vec![-0.7], 1.0),
    ];
    for f in &fs {
        let lip = f.lipschitz_on(&dom);
        for _ in 0..500 {
            let (a, b) = (rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..3.0));
            assert!(
                (f.eval(&[a]) - f.eval(&[b])).abs() <= lip * (a - b).abs() + 1e-12,
                "{f:?}"
            );
        }
        if let Some(m) = f.abs_max_on(&dom) {
            for k in 0..=1000 {
                let z = -2.0 + 5.0 * k as f64 / 1000.0;
                assert!(f.eval(&[z]).abs() <= m + 1e-12);
            }
        }
    }
}
