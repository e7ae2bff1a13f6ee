use rand::Rng;
use tsr_core::anchors::{kmeans_anchors, kmeans_anchors_best, kmeans_anchors_traced};
use tsr_core::rng::seeded;

fn dataset(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let s = rng.random_range(4.0f64..300.0);
            let aspect = rng.random_range(0.5f64..2.0);
            (s * aspect.sqrt(), s / aspect.sqrt())
        })
        .collect()
}

#[test]
fn inertia_never_increases() {
    for d in 0..20 {
        let pts = dataset(d, 150);
        for k in [2, 5, 9, 12] {
            let (_, hist) = kmeans_anchors_traced(&pts, k, d * 7 + k as u64, 300).unwrap();
            assert!(
                hist.windows(2).all(|w| w[1] <= w[0]),
                "dataset {d}, k {k}: {hist:?}"
            );
        }
    }
}

#[test]
fn mean_best_iou_grows_with_k() {
    let pts = dataset(123, 300);
    let seeds = [0, 1, 2, 3, 4];
    let scores: Vec<f64> = (1..=12)
        .map(|k| {
            kmeans_anchors_best(&pts, k, &seeds, 300)
                .unwrap()
                .mean_best_iou
        })
        .collect();
    assert!(scores.windows(2).all(|w| w[1] >= w[0]), "{scores:?}");
}

#[test]
fn deterministic_and_order_invariant() {
    let pts = dataset(9, 120);
    let a = kmeans_anchors(&pts, 9, 42, 300).unwrap();
    assert_eq!(a, kmeans_anchors(&pts, 9, 42, 300).unwrap());
    let mut shuffled = pts.clone();
    shuffled.rotate_left(37);
    shuffled.swap(3, 90);
    assert_eq!(a, kmeans_anchors(&shuffled, 9, 42, 300).unwrap());
    assert!(a.anchors.iter().all(|&(w, h)| w > 0.0 && h > 0.0));
    assert!((0.0..=1.0).contains(&a.mean_best_iou));
}
