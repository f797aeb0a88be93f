//! Reference evaluators that bypass the interaction table.
//!
//! These are literal `O(N^2)` double sums over all ordered site pairs
//! (excluding self and antipodal pairs), with the kernel and prefactor
//! recomputed from scratch. They exist to cross-check the table-driven
//! evaluators and incremental updates on small grids.

use std::f64::consts::PI;

use crate::grid::geodesic_angle;
use crate::kernel::DeltaKernel;
use crate::lawn::{Lawn, TwoLawnConfig};

fn double_sum(
    first: &Lawn,
    theta: f64,
    kernel: &DeltaKernel,
    second: impl Fn(usize) -> f64,
) -> f64 {
    let grid = first.grid();
    let n = grid.len();
    let h = (4.0 * PI / n as f64).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        if first.site(i) == 0 {
            continue;
        }
        for j in 0..n {
            if j == i || j == grid.antipode(i) {
                continue;
            }
            let x = (geodesic_angle(grid.point(i), grid.point(j)) - theta) / h;
            total += second(j) * kernel.phi(x);
        }
    }
    4.0 / (theta.sin() * (n * n) as f64 * h) * total
}

pub fn brute_force_one(lawn: &Lawn, theta: f64, kernel: &DeltaKernel) -> f64 {
    double_sum(lawn, theta, kernel, |j| f64::from(lawn.site(j)))
}

pub fn brute_force_two(config: &TwoLawnConfig, theta: f64, kernel: &DeltaKernel) -> f64 {
    let l2 = config.lawn2();
    double_sum(config.lawn1(), theta, kernel, |j| f64::from(1 - l2.site(j)))
}
