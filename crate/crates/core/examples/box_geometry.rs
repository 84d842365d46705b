//! IoU, the 5-d spatial feature and regression offsets for a few boxes.

use grounding::geometry::{decode_regression, encode_regression, iou, spatial_feature, BBox, ImageSize};

fn main() -> Result<(), grounding::geometry::GeometryError> {
    let img = ImageSize::new(100.0, 100.0)?;
    let gt = BBox::new(20.0, 30.0, 60.0, 70.0)?;
    let proposals = [
        BBox::new(20.0, 30.0, 60.0, 70.0)?,
        BBox::new(25.0, 35.0, 70.0, 75.0)?,
        BBox::new(20.0, 30.0, 60.0, 50.0)?,
        BBox::new(70.0, 0.0, 95.0, 20.0)?,
    ];
    println!("ground truth {:?}", gt.to_array());
    for p in &proposals {
        let t = encode_regression(p, &gt)?;
        let back = decode_regression(p, &t, img)?;
        println!(
            "{:?}  iou {:.3}  spatial {:?}  offsets {:?}  decoded iou {:.6}",
            p.to_array(),
            iou(p, &gt),
            spatial_feature(p, img).0.map(|v| (v * 1000.0).round() / 1000.0),
            t.to_array().map(|v| (v * 1000.0).round() / 1000.0),
            iou(&back, &gt)
        );
    }
    Ok(())
}
