mod common;

use common::gradient_suite;

const CASES: usize = 100;

#[test]
fn elementwise_and_linear_kernels() {
    gradient_suite(
        &["matmul", "add_bias", "add", "sub", "mul", "scale", "add_scalar", "concat", "sum", "mean", "gather_row"],
        CASES,
        11,
    )
    .assert_ok();
}

#[test]
fn nonlinear_kernels() {
    gradient_suite(
        &["relu", "sigmoid", "tanh", "log", "softmax", "l2_normalize", "smooth_l1"],
        CASES,
        12,
    )
    .assert_ok();
}

#[test]
fn encoder_and_heads() {
    gradient_suite(&["lstm_step", "fuse", "score_all", "regress_all"], CASES, 13).assert_ok();
}

#[test]
fn losses_and_full_model() {
    gradient_suite(
        &["kld_loss", "softmax_single_label_loss", "smooth_l1_reg_loss", "full_model"],
        CASES,
        14,
    )
    .assert_ok();
}
