//! Reverse-mode gradients of the batch NLL against central finite
//! differences, one line per parameter tensor of a small VBIN.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbin::model::{FeatureScaling, Model, ModelKind, SocialBatch};
use vbin::simulator::{generate_dataset, SimConfig};
use vbin::training::{batch_loss, nll_gradients};

fn main() -> vbin::Result<()> {
    let cfg = SimConfig {
        duration_frames: 300,
        ..SimConfig::default()
    };
    let data = generate_dataset(&cfg, 1, 4)?;
    let picked: Vec<_> = data.samples.iter().filter(|s| s.label.is_lane_change()).take(2).cloned().collect();
    let mut model = Model::new(ModelKind::Vbin, 8, 1)?;
    model.set_scaling(FeatureScaling::fit(&picked));
    let batch = SocialBatch::from_samples(&picked);

    let (loss, grads) = nll_gradients(&model, &batch)?;
    println!("batch NLL {:.6}", loss);
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in 0..model.params().len() {
        let n = model.params().get(k).len();
        let picks: Vec<usize> = (0..n.min(16)).map(|_| rng.gen_range(0..n)).collect();
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for &i in &picks {
            let mut m = model.clone();
            m.params_mut().get_mut(k).data_mut()[i] += h;
            let up = batch_loss(&m, &batch)?;
            m.params_mut().get_mut(k).data_mut()[i] -= 2.0 * h;
            let fd = (up - batch_loss(&m, &batch)?) / (2.0 * h);
            let an = grads[k].data()[i];
            diff += (an - fd).powi(2);
            norm = norm.max(an.abs()).max(fd.abs());
        }
        let rel = diff.sqrt() / norm.max(1e-12);
        println!("{:18} {:>7} params  rel err {:.2e}", model.params().name(k), n, rel);
    }
    Ok(())
}
