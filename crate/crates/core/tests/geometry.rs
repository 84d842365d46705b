mod common;

use grounding::geometry::{
    decode_regression, decode_unclipped, encode_regression, iou, spatial_feature, BBox, ImageSize, RegressionTarget,
};
use proptest::prelude::*;

fn bx(a: f64, b: f64, c: f64, d: f64) -> BBox {
    BBox::new(a, b, c, d).unwrap()
}

#[test]
fn random_pairs() {
    common::geometry_suite(10_000, 41).assert_ok();
}

#[test]
fn reference_values() {
    assert_eq!(iou(&bx(0.0, 0.0, 10.0, 10.0), &bx(5.0, 5.0, 15.0, 15.0)), 25.0 / 175.0);
    let f = spatial_feature(&bx(10.0, 20.0, 30.0, 60.0), ImageSize::new(100.0, 100.0).unwrap());
    let want = [0.1, 0.2, 0.3, 0.6, 0.08];
    for (a, b) in f.0.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    let t = encode_regression(&bx(0.0, 0.0, 10.0, 10.0), &bx(0.0, 0.0, 20.0, 20.0)).unwrap();
    let want = [0.5, 0.5, 2f64.ln(), 2f64.ln()];
    for (a, b) in t.to_array().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(BBox::new(5.0, 0.0, 1.0, 1.0).is_err());
    assert!(BBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
    assert!(ImageSize::new(0.0, 10.0).is_err());
    assert!(encode_regression(&bx(1.0, 1.0, 1.0, 5.0), &bx(0.0, 0.0, 1.0, 1.0)).is_err());
    let p = bx(0.0, 0.0, 10.0, 10.0);
    assert!(decode_unclipped(&p, &RegressionTarget::from_array([f64::NAN, 0.0, 0.0, 0.0])).is_err());
    assert!(decode_unclipped(&p, &RegressionTarget::from_array([0.0, 0.0, 1e6, 0.0])).is_err());
}

#[test]
fn decoded_boxes_are_clipped_to_the_image() {
    let img = ImageSize::new(50.0, 50.0).unwrap();
    let p = bx(30.0, 30.0, 48.0, 48.0);
    let b = decode_regression(&p, &RegressionTarget::from_array([1.0, 1.0, 0.5, 0.5]), img).unwrap();
    assert!(b.is_inside(img));
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0.0..100.0f64, 0.0..100.0f64, 0.0..50.0f64, 0.0..50.0f64).prop_map(|(x, y, w, h)| bx(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn containment_gives_area_ratio(a in arb_box()) {
        prop_assume!(a.area() > 1e-6);
        let outer = bx(a.x_tl() - 1.0, a.y_tl() - 1.0, a.x_br() + 1.0, a.y_br() + 1.0);
        prop_assert!((iou(&a, &outer) - a.area() / outer.area()).abs() < 1e-12);
    }

    #[test]
    fn offsets_round_trip(p in arb_box(), t in arb_box()) {
        prop_assume!(p.width() > 0.1 && p.height() > 0.1 && t.width() >= 1.0 && t.height() >= 1.0);
        let back = decode_unclipped(&p, &encode_regression(&p, &t).unwrap()).unwrap();
        for (x, y) in back.to_array().iter().zip(t.to_array()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}
