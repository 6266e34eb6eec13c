use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgrasp_core::nn::{Mlp, Tensor2};

/// Scalar loss `sum(c ⊙ f(x))` for a fixed random projection `c`.
fn loss(net: &Mlp, x: &Tensor2, c: &Tensor2) -> f64 {
    let (y, _) = net.forward(x).unwrap();
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor2 {
    Tensor2::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..12 {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..=10)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..=64));
        }
        let mut net = Mlp::new(&sizes, 1.0, &mut rng).unwrap();
        let rows = rng.random_range(1..=4);
        let x = random(rows, sizes[0], &mut rng);
        let c = random(rows, *sizes.last().unwrap(), &mut rng);
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, _) = net.backward(&cache, &c).unwrap();
        let h = 1e-5;
        // Check a fixed stride of parameters to bound runtime on large nets.
        let stride = (net.num_params() / 300).max(1);
        for i in (0..net.num_params()).step_by(stride) {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let lp = loss(&net, &x, &c);
            net.params_mut()[i] = orig - h;
            let lm = loss(&net, &x, &c);
            net.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let abs = (fd - grads[i]).abs();
            assert!(
                abs <= 1e-8 || rel_err(fd, grads[i]) <= 1e-5,
                "case {case} sizes {sizes:?} param {i}: fd {fd} vs {}",
                grads[i]
            );
        }
    }
}

#[test]
fn input_gradient_matches_jacobian_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = Mlp::new(&[6, 20, 20, 1], 1.0, &mut rng).unwrap();
    let x = random(1, 6, &mut rng);
    let one = Tensor2::new(1, 1, vec![1.0]).unwrap();
    let (_, cache) = net.forward(&x).unwrap();
    let (_, gx) = net.backward(&cache, &one).unwrap();
    let h = 1e-5;
    for k in 0..6 {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.data_mut()[k] += h;
        xm.data_mut()[k] -= h;
        let fd = (loss(&net, &xp, &one) - loss(&net, &xm, &one)) / (2.0 * h);
        assert!((fd - gx.data()[k]).abs() <= 1e-8 || rel_err(fd, gx.data()[k]) <= 1e-5);
    }
}

#[test]
fn jacobian_vector_products_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = Mlp::new(&[5, 32, 4], 1.0, &mut rng).unwrap();
    let x = random(1, 5, &mut rng);
    let v = random(1, 5, &mut rng);
    let h = 1e-5;
    let mut xp = x.clone();
    let mut xm = x.clone();
    for k in 0..5 {
        xp.data_mut()[k] += h * v.data()[k];
        xm.data_mut()[k] -= h * v.data()[k];
    }
    let yp = net.predict(xp.data()).unwrap();
    let ym = net.predict(xm.data()).unwrap();
    let (_, cache) = net.forward(&x).unwrap();
    for out in 0..4 {
        let mut e = Tensor2::zeros(1, 4);
        e.data_mut()[out] = 1.0;
        let (_, gx) = net.backward(&cache, &e).unwrap();
        let jvp: f64 = gx.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        let fd = (yp[out] - ym[out]) / (2.0 * h);
        assert!((fd - jvp).abs() <= 1e-8 || rel_err(fd, jvp) <= 1e-5, "{fd} vs {jvp}");
    }
}
