// debug binary: compare numeric vs analytic per layer
use convdec_core::dataset::WindowSample;
use convdec_core::mlp::{init_model, MlpModel};
use convdec_core::seed;
use convdec_core::real::Real;
use rand::Rng;

fn toy_batch(model: &MlpModel<f64>, n: usize, batch_seed: u64) -> Vec<WindowSample<f64>> {
    let mut rng = seed::stream(batch_seed, "toy-batch", 0);
    (0..n)
        .map(|_| WindowSample {
            features: (0..model.input_width()).map(|_| f64::standard_normal(&mut rng)).collect(),
            label: rng.gen_range(0..model.class_count() as u32),
        })
        .collect()
}

fn main() {
    for (dims, seed_v) in [(vec![4usize,8,4], 1u64), (vec![3,5,6,4], 2), (vec![6,4,3], 3)] {
        let mut model = init_model::<f64>(&dims, seed_v).unwrap();
        model.dropout_rate = 0.0;
        let batch = toy_batch(&model, 5, seed_v);
        let mut rng = seed::stream(0, "dropout", 0);
        let (_, grads) = model.loss_and_grad(&batch, &mut rng).unwrap();
        let eps = 1e-5;
        let loss_at = |m: &MlpModel<f64>| -> f64 {
            let mut r = seed::stream(0, "dropout", 0);
            m.loss_and_grad(&batch, &mut r).unwrap().0
        };
        for layer in 0..model.weights().len() {
            let mut worst = 0.0f64;
            for i in 0..grads.biases[layer].len() {
                let mut plus = model.clone();
                plus.biases_mut()[layer][i] += eps;
                let mut minus = model.clone();
                minus.biases_mut()[layer][i] -= eps;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
                let analytic = grads.biases[layer][i];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                let rel = (numeric - analytic).abs() / denom;
                if rel > worst { worst = rel; }
                if rel > 1e-4 {
                    println!("dims {dims:?} b{layer}[{i}]: numeric {numeric} analytic {analytic} ratio {}", numeric/analytic);
                }
            }
            println!("dims {dims:?} layer {layer} bias worst rel {worst:.3e}");
        }
    }
}
