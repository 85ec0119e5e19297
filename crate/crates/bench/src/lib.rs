//! Fixtures shared by the benchmarks.

use jetconvex_core::verify::{sample_jet, ReferenceConvexFunction};
use jetconvex_core::{build_pipeline, ExtensionConfig, ExtensionModel, JetDataset, Tolerances};

/// A quadratic jet on a regular grid in `[-1, 1]^dim` with `per_axis` points per axis.
pub fn grid_jet(dim: usize, per_axis: usize) -> JetDataset {
    let reference = ReferenceConvexFunction::diagonal_quadratic((1..=dim).map(|k| k as f64).collect());
    let mut points = vec![Vec::new()];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (0..per_axis).map(move |i| {
                    let mut q = p.clone();
                    q.push(-1.0 + 2.0 * i as f64 / (per_axis - 1) as f64);
                    q
                })
            })
            .collect();
    }
    sample_jet(&reference, &points).expect("grid points are distinct")
}

pub fn model(dataset: &JetDataset, enrichment: usize) -> ExtensionModel {
    let config = ExtensionConfig {
        enrichment,
        ..Default::default()
    };
    build_pipeline(dataset, &Tolerances::default(), 32, None, None, config)
        .expect("bench fixture builds")
        .0
}
