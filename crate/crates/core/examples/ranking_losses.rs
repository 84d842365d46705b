//! Soft labels and the three training losses on one hand-made sample.

use grounding::geometry::RegressionTarget;
use grounding::losses::{kld_loss, smooth_l1_reg_loss, soft_labels, softmax_single_label_loss, total_loss, LossConfig, SampleOutputs};
use grounding::tensor::Graph;

fn main() -> Result<(), grounding::losses::LossError> {
    let ious = [0.82, 0.64, 0.31, 0.05];
    let raw = vec![2.0, 1.5, 1.0, -1.0];
    let labels = soft_labels(&ious, 0.5)?;
    println!("ious        {ious:?}");
    println!("soft labels {:?}", labels.values.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());

    let mut g = Graph::new();
    let z = g.constant_vector(raw.clone())?;
    let probs = g.softmax(z)?;
    println!("softmax     {:?}", g.value(probs).iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());

    let kld = kld_loss(&mut g, &labels, probs)?;
    let single = softmax_single_label_loss(&mut g, probs, &ious)?;
    println!("kld loss {:.5}   single-label loss {:.5}", g.scalar(kld), g.scalar(single));

    let offsets: Vec<_> = [[0.1, -0.2, 0.05, 0.0], [0.4, 0.1, -0.3, 0.2], [0.0; 4], [1.5, 0.0, 0.0, 0.0]]
        .iter()
        .map(|o| g.constant_vector(o.to_vec()))
        .collect::<Result<_, _>>()?;
    let targets = [RegressionTarget::default(); 4];
    let reg = smooth_l1_reg_loss(&mut g, &offsets, &targets)?;
    println!("smooth-L1 regression loss over all proposals {:.5}", g.scalar(reg));

    for (name, cfg) in [
        ("kld + reg", LossConfig::default()),
        ("kld + reg (overlapping only)", LossConfig { reg_mask_by_iou: true, ..LossConfig::default() }),
        ("degenerate sample", LossConfig::default()),
    ] {
        let sample_ious = if name == "degenerate sample" { [0.3, 0.2, 0.1, 0.0] } else { ious };
        let out = SampleOutputs { scores: probs, offsets: offsets.clone() };
        let terms = total_loss(&mut g, &out, &sample_ious, &targets, &cfg)?;
        println!(
            "{name:<30} total {:.5}  rank {:.5}  reg {:.5}  degenerate {}",
            g.scalar(terms.total),
            terms.rank,
            terms.reg.unwrap_or(0.0),
            terms.degenerate
        );
    }
    Ok(())
}
