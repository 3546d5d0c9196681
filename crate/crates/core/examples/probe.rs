use specmap_core::graph::{build_knn_affinity, PointCloud};
use specmap_core::mat::Mat;
use specmap_core::nn::*;
use specmap_core::rng::Rng;
use specmap_core::solver::{f2_value, Pencil, Scheme};

fn main() {
    // 10 clusters of random prototype images, smaller scale
    let n = 400usize;
    let dim = 784usize;
    let mut rng = Rng::new(424242);
    let protos: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..dim).map(|_| rng.next_f64() * 0.8).collect())
        .collect();
    let x = Mat::from_fn(n, dim, |i, j| {
        (protos[i % 10][j] + 0.1 * rng.normal()).clamp(0.0, 1.0)
    });
    let pc = PointCloud::new(x.clone(), None).unwrap();
    let w = build_knn_affinity(&pc, 16).unwrap();
    let p = Pencil::new(w).unwrap();
    for lr in [1e-4f64, 1e-5] {
        for scheme in [Scheme::Neighbor, Scheme::Full] {
            let params = MlpParams::new(&[dim, 256, 256, 6], 5).unwrap();
            let mut tr = FreeNetTrainer::new(params, scheme, lr, true);
            if scheme == Scheme::Neighbor { tr.init_caches(&p, &x).unwrap(); }
            print!("{scheme:?} lr={lr}: f2 = {:.4e}", f2_value(&p, &tr.output(&x).unwrap(), true));
            for epoch in 0..3usize {
                for b in epoch_batches(n, 2, epoch, 7) {
                    tr.step(&p, &x, &b).unwrap();
                }
                print!(" -> {:.4e}", f2_value(&p, &tr.output(&x).unwrap(), true));
            }
            println!();
        }
    }
}
