//! Batched forward pass against the per-sample unit composition
//! (encode, PIU per slot, NIU, decode), and sequence sharing across targets.

use vbin::model::{Model, SocialBatch};
use vbin::simulator::{generate_dataset, SimConfig};

fn main() -> vbin::Result<()> {
    let cfg = SimConfig {
        duration_frames: 300,
        ..SimConfig::default()
    };
    let data = generate_dataset(&cfg, 1, 2)?;
    let samples = &data.samples[..64.min(data.samples.len())];
    let model = Model::vbin(3)?;

    let batch = SocialBatch::from_samples(samples);
    println!(
        "{} targets reference {} distinct maneuver sequences",
        batch.len(),
        batch.sequences.len()
    );
    let before = model.encoded_sequences();
    let batched = model.forward_batch(&batch)?;
    println!("encoder ran on {} sequences", model.encoded_sequences() - before);

    let mut worst = 0.0f64;
    for (s, p) in samples.iter().zip(&batched) {
        let h = model.encode(&s.target)?;
        let mut pairs = Vec::new();
        for nb in &s.neighbors {
            let hj = model.encode(&nb.features)?;
            pairs.push(model.piu(&h, &hj, &model.scale_connection(&nb.connection))?);
        }
        let social = model.niu(&pairs)?;
        let q = model.decode(&social, &h)?;
        for k in 0..3 {
            worst = worst.max((p[k] - q[k]).abs());
        }
    }
    println!("max |batched - per-sample| = {:.3e}", worst);
    let p = batched[0];
    println!("first target: LK {:.3}  LCL {:.3}  LCR {:.3}", p[0], p[1], p[2]);
    Ok(())
}
