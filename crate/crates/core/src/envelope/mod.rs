//! The extension itself: the minimal extension `m`, the smoothed upper
//! function `g`, and the convex envelope of `g` restricted to a candidate set.

mod domain;
mod eval;
mod oracle1d;

pub use domain::DomainBox;
pub use eval::{AffineMinorant, EnvelopeResult, EvalStatus, SupportPoint};
pub use oracle1d::{envelope_1d_oracle, lower_hull, uniform_grid, Hull1D};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{JetError, Result};
use crate::jet::{JetDataset, SlackMatrix};
use crate::linalg::{dist, dot};
use crate::lp::DEFAULT_LP_TOL;
use crate::modulus::ModulusModel;

/// Relative slack within which indices count as maximisers of `m`.
const ARGMAX_TOL: f64 = 1e-12;

/// `m(x) = max_j f_j + <G_j, x - y_j>` with every index within
/// `1e-12 * data_scale` of the maximum.
pub fn minimal_extension(dataset: &JetDataset, x: &[f64]) -> (f64, Vec<usize>) {
    let values: Vec<f64> = dataset.points().iter().map(|p| p.tangent(x)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = best - ARGMAX_TOL * dataset.data_scale();
    let argmax = values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v >= cut)
        .map(|(i, _)| i)
        .collect();
    (best, argmax)
}

#[inline]
fn minimal_value(dataset: &JetDataset, x: &[f64]) -> f64 {
    dataset
        .points()
        .iter()
        .map(|p| p.tangent(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Height of `m` above the tangent plane at data point `i`.
pub fn psi(dataset: &JetDataset, i: usize, x: &[f64]) -> Result<f64> {
    let p = dataset.point(i)?;
    Ok(minimal_value(dataset, x) - p.tangent(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// LP over the fixed candidate set: a globally convex function.
    #[default]
    Shared,
    /// Per-query column generation on top of the shared candidates.
    Refined,
}

impl std::str::FromStr for EvalMode {
    type Err = JetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(Self::Shared),
            "refined" => Ok(Self::Refined),
            other => Err(JetError::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    pub mode: EvalMode,
    pub lp_tol: f64,
    /// Quasi-random interior candidates added on top of data points and
    /// box corners.
    pub enrichment: usize,
    pub seed: u64,
    /// Column-generation budget per query in refined mode.
    pub max_columns: usize,
    /// Iteration cap for the box-constrained pricing subproblems.
    pub pricing_iters: usize,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::Shared,
            lp_tol: DEFAULT_LP_TOL,
            enrichment: 0,
            seed: 0,
            max_columns: 64,
            pricing_iters: 200,
        }
    }
}

/// Value of `g` at a point with the index of the active bump and the
/// corresponding subgradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GValue {
    pub value: f64,
    pub active: usize,
    pub subgradient: Vec<f64>,
}

/// A jet together with its modulus and the shared candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionModel {
    dataset: JetDataset,
    modulus: ModulusModel,
    candidates: Vec<Vec<f64>>,
    g_values: Vec<f64>,
    domain_box: DomainBox,
    config: ExtensionConfig,
    /// True when d > 10 and the box corners were replaced by samples, so
    /// parts of the box may fall outside the candidate hull.
    corners_sampled: bool,
}

/// Assemble an evaluable model.
///
/// The candidate set holds every data point, the box corners (or `2d+2`
/// random box points when `d > 10`), and `config.enrichment` shifted Halton
/// points inside the box.
pub fn build_extension(
    dataset: &JetDataset,
    _slack: &SlackMatrix,
    modulus: &ModulusModel,
    domain_box: DomainBox,
    config: ExtensionConfig,
) -> Result<ExtensionModel> {
    if domain_box.dim() != dataset.dim() {
        return Err(JetError::QueryDimension {
            expected: dataset.dim(),
            found: domain_box.dim(),
        });
    }
    let tol = ARGMAX_TOL * dataset.data_scale();
    for (index, p) in dataset.points().iter().enumerate() {
        if !domain_box.contains(&p.x, tol) {
            return Err(JetError::BoxExcludesPoint { index });
        }
    }
    let d = dataset.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut candidates: Vec<Vec<f64>> = dataset.points().iter().map(|p| p.x.clone()).collect();
    let corners_sampled = d > 10;
    if corners_sampled {
        for _ in 0..2 * d + 2 {
            candidates.push(domain_box.sample(&mut rng));
        }
    } else {
        candidates.extend(domain_box.corners());
    }
    candidates.extend(domain_box.halton(config.enrichment, &mut rng));

    let mut model = ExtensionModel {
        dataset: dataset.clone(),
        modulus: modulus.clone(),
        candidates,
        g_values: Vec::new(),
        domain_box,
        config,
        corners_sampled,
    };
    model.g_values = model.candidates.iter().map(|s| model.g_value(s).0).collect();
    Ok(model)
}

impl ExtensionModel {
    pub fn dataset(&self) -> &JetDataset {
        &self.dataset
    }

    pub fn modulus(&self) -> &ModulusModel {
        &self.modulus
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    pub fn domain_box(&self) -> &DomainBox {
        &self.domain_box
    }

    pub fn config(&self) -> &ExtensionConfig {
        &self.config
    }

    pub fn corners_sampled(&self) -> bool {
        self.corners_sampled
    }

    /// Constant-gradient branch: the extension is the affine function of the
    /// first data point.
    pub fn is_degenerate(&self) -> bool {
        self.modulus.degenerate || self.dataset.len() == 1
    }

    pub fn data_scale(&self) -> f64 {
        self.dataset.data_scale()
    }

    /// Recompute the slack matrix of the underlying jet.
    pub fn slack(&self) -> SlackMatrix {
        crate::jet::compute_slack(&self.dataset)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dataset.dim() {
            Ok(())
        } else {
            Err(JetError::QueryDimension {
                expected: self.dataset.dim(),
                found: x.len(),
            })
        }
    }

    pub fn minimal_extension(&self, x: &[f64]) -> f64 {
        minimal_value(&self.dataset, x)
    }

    fn affine(&self, x: &[f64]) -> f64 {
        self.dataset.points()[0].tangent(x)
    }

    /// `g` value and active bump index.
    #[inline]
    pub(crate) fn g_value(&self, x: &[f64]) -> (f64, usize) {
        if self.is_degenerate() {
            return (self.affine(x), 0);
        }
        let mut best = f64::INFINITY;
        let mut active = 0;
        for (i, p) in self.dataset.points().iter().enumerate() {
            let r = dist(x, &p.x);
            let v = p.tangent(x) + 2.0 * self.modulus.phi_hat_unchecked(r);
            if v < best {
                best = v;
                active = i;
            }
        }
        (best, active)
    }

    fn bump_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let p = &self.dataset.points()[i];
        let r = dist(x, &p.x);
        if r == 0.0 || self.is_degenerate() {
            return p.g.clone();
        }
        let w = 2.0 * self.modulus.omega_hat_unchecked(r) / r;
        p.g.iter()
            .zip(x.iter().zip(&p.x))
            .map(|(g, (x, y))| g + w * (x - y))
            .collect()
    }

    /// `g(x) = min_i f_i + <G_i, x - y_i> + 2 phi(|x - y_i|)`.
    pub fn g_eval(&self, x: &[f64]) -> Result<GValue> {
        self.check_dim(x)?;
        let (value, active) = self.g_value(x);
        Ok(GValue {
            value,
            active,
            subgradient: self.bump_gradient(active, x),
        })
    }

    /// Reduced cost `g(z) - <p,z> - q` against an affine minorant.
    pub(crate) fn reduced_cost(&self, z: &[f64], dual: &AffineMinorant) -> f64 {
        self.g_value(z).0 - dot(&dual.p, z) - dual.q
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::jet::{compute_slack, Tolerances};
    use crate::modulus::{build_modulus, GapProfile};

    pub fn model(ds: &JetDataset, nodes: usize, dbox: Option<DomainBox>, config: ExtensionConfig) -> ExtensionModel {
        let slack = compute_slack(ds);
        let prof = GapProfile::from_slack(&slack, ds.data_scale(), &Tolerances::default());
        let modulus = build_modulus(&prof, nodes, None).unwrap();
        let dbox = dbox.unwrap_or_else(|| DomainBox::around(ds));
        build_extension(ds, &slack, &modulus, dbox, config).unwrap()
    }

    pub fn parabola_box() -> DomainBox {
        DomainBox::new(vec![-3.0], vec![3.0]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::jet::fixtures::*;
    use crate::jet::JetPoint;

    #[test]
    fn minimal_extension_parabola() {
        let ds = parabola();
        assert_eq!(minimal_extension(&ds, &[2.0]).0, 3.0);
        let (v, arg) = minimal_extension(&ds, &[0.0]);
        assert_eq!(v, 0.0);
        assert_eq!(arg, vec![1]);
        for p in ds.points() {
            assert_eq!(minimal_extension(&ds, &p.x).0, p.f);
        }
    }

    #[test]
    fn minimal_extension_single_point() {
        let ds = JetDataset::new(vec![JetPoint::new(vec![0.0, 0.0], 3.0, vec![1.0, -2.0])], 2).unwrap();
        assert_eq!(minimal_extension(&ds, &[2.0, 1.0]).0, 3.0 + 2.0 - 2.0);
    }

    #[test]
    fn psi_parabola() {
        let ds = parabola();
        assert_eq!(psi(&ds, 1, &[0.5]).unwrap(), 0.0);
        assert_eq!(psi(&ds, 2, &[-1.0]).unwrap(), 4.0);
        for i in 0..3 {
            assert_eq!(psi(&ds, i, &ds.points()[i].x).unwrap(), 0.0);
        }
        assert!(matches!(psi(&ds, 3, &[0.0]), Err(JetError::IndexOutOfRange { .. })));
    }

    #[test]
    fn g_parabola_two_line_modulus() {
        let m = model(&parabola(), 0, Some(parabola_box()), ExtensionConfig::default());
        let g = m.g_eval(&[0.5]).unwrap();
        assert_eq!(g.value, 0.25);
        let g0 = m.g_eval(&[0.0]).unwrap();
        assert_eq!(g0.value, 0.0);
        assert_eq!(g0.subgradient, vec![0.0]);
        for p in m.dataset().points() {
            assert_eq!(m.g_eval(&p.x).unwrap().value, p.f);
        }
    }

    #[test]
    fn g_degenerate_is_affine() {
        let ds = constant_gradient();
        let m = model(&ds, 8, None, ExtensionConfig::default());
        assert!(m.is_degenerate());
        let x = [0.7, -0.2];
        let g = m.g_eval(&x).unwrap();
        assert!((g.value - ds.points()[0].tangent(&x)).abs() < 1e-15);
        assert_eq!(g.subgradient, ds.points()[0].g);
    }

    #[test]
    fn candidate_rule() {
        let m = model(&parabola(), 0, Some(parabola_box()), ExtensionConfig::default());
        assert_eq!(m.candidates(), &[vec![-1.0], vec![0.0], vec![1.0], vec![-3.0], vec![3.0]]);
        assert_eq!(m.g_values().len(), 5);
        for (s, g) in m.candidates().iter().zip(m.g_values()) {
            assert_eq!(m.g_eval(s).unwrap().value, *g);
        }
    }

    #[test]
    fn enrichment_is_seeded() {
        let config = ExtensionConfig {
            enrichment: 8,
            seed: 7,
            ..Default::default()
        };
        let a = model(&parabola(), 0, Some(parabola_box()), config.clone());
        let b = model(&parabola(), 0, Some(parabola_box()), config);
        assert_eq!(a.candidates().len(), 3 + 2 + 8);
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_is_degenerate() {
        assert!(model(&single(), 8, Some(parabola_box()), ExtensionConfig::default()).is_degenerate());
    }

    #[test]
    fn box_must_contain_data() {
        let ds = parabola();
        let slack = crate::jet::compute_slack(&ds);
        let modulus = crate::modulus::build_modulus(
            &crate::modulus::GapProfile::from_slack(&slack, 1.0, &Default::default()),
            0,
            None,
        )
        .unwrap();
        let tight = DomainBox::new(vec![-0.5], vec![3.0]).unwrap();
        assert_eq!(
            build_extension(&ds, &slack, &modulus, tight, ExtensionConfig::default()),
            Err(JetError::BoxExcludesPoint { index: 0 })
        );
    }
}
