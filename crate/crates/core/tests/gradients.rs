use genv2v_core::harness::checks::gradient_check_error;
use genv2v_core::neural::{huber_loss, Matrix, Mlp};
use genv2v_core::rng::stream;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = stream(seed, &[]);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

#[test]
fn default_architecture_matches_finite_differences() {
    let net = Mlp::new(&[74, 128, 64, 64], 3).unwrap();
    let x = random_matrix(3, 74, 4);
    let t = random_matrix(3, 64, 5);
    let err = gradient_check_error(&net, &x, &t).unwrap();
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn small_networks_match_finite_differences() {
    for seed in 0..10 {
        let net = Mlp::new(&[5, 9, 7, 3], seed).unwrap();
        let x = random_matrix(6, 5, 100 + seed);
        let t = random_matrix(6, 3, 200 + seed);
        let err = gradient_check_error(&net, &x, &t).unwrap();
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let net = Mlp::new(&[4, 6, 2], 1).unwrap();
    let x = random_matrix(5, 4, 2);
    let g = net.backward(&x, &Matrix::zeros(5, 2)).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let net = Mlp::new(&[4, 6, 3], 7).unwrap();
    let x = random_matrix(5, 4, 8);
    let dy = random_matrix(5, 3, 9);
    let batch = net.backward(&x, &dy).unwrap();
    let mut mean = vec![0.0; net.num_params()];
    for i in 0..5 {
        let xi = Matrix::from_rows(&[x.row(i)]).unwrap();
        let gi = Matrix::from_rows(&[dy.row(i)]).unwrap();
        for (m, g) in mean.iter_mut().zip(net.backward(&xi, &gi).unwrap()) {
            *m += g / 5.0;
        }
    }
    for (a, b) in batch.iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn huber_gradient_matches_finite_differences() {
    let pred = [0.3, -2.0, 4.0, 1.0];
    let target = [0.0, 0.5, 1.0, 1.0];
    let (_, grad) = huber_loss(&pred, &target, 1.0).unwrap();
    for i in 0..pred.len() {
        let h = 1e-6;
        let mut up = pred;
        up[i] += h;
        let mut down = pred;
        down[i] -= h;
        let numeric = (huber_loss(&up, &target, 1.0).unwrap().0 - huber_loss(&down, &target, 1.0).unwrap().0) / (2.0 * h);
        // the loss is a mean, the returned gradient is per element
        assert!((numeric * pred.len() as f64 - grad[i]).abs() < 1e-6, "element {i}");
    }
}
