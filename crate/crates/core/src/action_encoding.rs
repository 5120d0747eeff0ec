//! Featurisation of continuous discount depths.
//!
//! The main encoder is a bank of Gaussian radial basis functions. Nearby depths
//! produce nearby feature vectors, which lets a linear reward model pool what it
//! learns about one depth with its neighbours. The continuous and Euclidean
//! encoders exist as baselines for comparing encoders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discount "% off" as a fraction: `0.2` means 20% off.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DiscountDepth(f64);

impl DiscountDepth {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("discount depth {value} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DiscountDepth {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DiscountDepth> for f64 {
    fn from(d: DiscountDepth) -> f64 {
        d.0
    }
}

/// Builds a depth list from raw fractions, rejecting anything outside `[0, 1]`.
pub fn depths(values: &[f64]) -> Result<Vec<DiscountDepth>> {
    values.iter().map(|&v| DiscountDepth::new(v)).collect()
}

/// How the per-centre width enters the Gaussian exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WidthMode {
    /// `exp(-(a - mu)^2 / (2 alpha))`: the width is a variance.
    Denominator,
    /// `exp(-alpha (a - mu)^2 / 2)`: the width is a precision.
    #[default]
    Precision,
}

/// Centres and widths of the radial basis bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRbfConfig", into = "RawRbfConfig")]
pub struct RbfConfig {
    centers: Vec<f64>,
    widths: Vec<f64>,
    width_mode: WidthMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRbfConfig {
    centers: Vec<f64>,
    /// Either one shared width or one per centre.
    widths: Vec<f64>,
    #[serde(default)]
    width_mode: WidthMode,
}

impl TryFrom<RawRbfConfig> for RbfConfig {
    type Error = Error;
    fn try_from(raw: RawRbfConfig) -> Result<Self> {
        if raw.widths.len() == 1 {
            RbfConfig::shared(raw.centers, raw.widths[0], raw.width_mode)
        } else {
            RbfConfig::new(raw.centers, raw.widths, raw.width_mode)
        }
    }
}

impl From<RbfConfig> for RawRbfConfig {
    fn from(cfg: RbfConfig) -> Self {
        RawRbfConfig {
            centers: cfg.centers,
            widths: cfg.widths,
            width_mode: cfg.width_mode,
        }
    }
}

impl Default for RbfConfig {
    /// Three centres at 0.25, 0.5 and 0.75 with a shared precision of 20.
    fn default() -> Self {
        Self::shared(vec![0.25, 0.5, 0.75], 20.0, WidthMode::Precision)
            .expect("default RBF config is valid")
    }
}

impl RbfConfig {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>, width_mode: WidthMode) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidConfig("RBF config needs at least one centre".into()));
        }
        if centers.len() != widths.len() {
            return Err(Error::InvalidConfig(format!(
                "{} centres but {} widths",
                centers.len(),
                widths.len()
            )));
        }
        if centers.iter().any(|c| !c.is_finite() || !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidConfig("RBF centres must lie in [0, 1]".into()));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("RBF centres must be strictly increasing".into()));
        }
        if widths.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidConfig("RBF widths must be positive".into()));
        }
        Ok(Self {
            centers,
            widths,
            width_mode,
        })
    }

    /// One width shared by every centre.
    pub fn shared(centers: Vec<f64>, width: f64, width_mode: WidthMode) -> Result<Self> {
        let widths = vec![width; centers.len()];
        Self::new(centers, widths, width_mode)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn width_mode(&self) -> WidthMode {
        self.width_mode
    }

    /// Output dimension of [`encode_rbf`].
    pub fn dim(&self) -> usize {
        self.centers.len()
    }
}

/// Feature vector for a single action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEncoding(pub Vec<f64>);

impl ActionEncoding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[inline]
fn rbf_component(a: f64, center: f64, width: f64, mode: WidthMode) -> f64 {
    let sq = (a - center) * (a - center);
    match mode {
        WidthMode::Denominator => (-sq / (2.0 * width)).exp(),
        WidthMode::Precision => (-width * sq / 2.0).exp(),
    }
}

/// Gaussian RBF encoding of a depth. Component `z` is 1 exactly at centre `z`.
pub fn encode_rbf(a: DiscountDepth, cfg: &RbfConfig) -> ActionEncoding {
    let a = a.value();
    ActionEncoding(
        cfg.centers
            .iter()
            .zip(&cfg.widths)
            .map(|(&mu, &w)| rbf_component(a, mu, w, cfg.width_mode))
            .collect(),
    )
}

/// Raw depth as a one-dimensional feature.
pub fn encode_continuous(a: DiscountDepth) -> ActionEncoding {
    ActionEncoding(vec![a.value()])
}

/// Distance to a reference depth as a one-dimensional feature.
pub fn encode_euclidean(a: DiscountDepth, reference: DiscountDepth) -> ActionEncoding {
    ActionEncoding(vec![(a.value() - reference.value()).abs()])
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv)).min(1.0)
}

/// How many times each grid depth has effectively been played, counting every
/// play of a nearby depth fractionally by the cosine similarity of the two RBF encodings.
pub fn effective_counts(
    played: &[DiscountDepth],
    grid: &[DiscountDepth],
    cfg: &RbfConfig,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Empty("effective-count grid".into()));
    }
    let played_enc: Vec<ActionEncoding> = played.iter().map(|&a| encode_rbf(a, cfg)).collect();
    Ok(grid
        .iter()
        .map(|&g| {
            let ge = encode_rbf(g, cfg);
            played_enc.iter().map(|pe| cosine(&ge.0, &pe.0)).sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: f64) -> DiscountDepth {
        DiscountDepth::new(v).unwrap()
    }

    #[test]
    fn depth_domain() {
        assert!(DiscountDepth::new(-0.01).is_err());
        assert!(DiscountDepth::new(1.01).is_err());
        assert!(DiscountDepth::new(f64::NAN).is_err());
        assert_eq!(d(0.0).value(), 0.0);
        assert_eq!(d(1.0).value(), 1.0);
    }

    #[test]
    fn rbf_is_one_at_centre() {
        let cfg = RbfConfig::default();
        let e = encode_rbf(d(0.25), &cfg);
        assert_eq!(e.0[0], 1.0);
        assert!(e.0[1] < 1.0 && e.0[2] < 1.0);
    }

    #[test]
    fn rbf_symmetric_about_centre() {
        let cfg = RbfConfig::default();
        let lo = encode_rbf(d(0.5 - 0.13), &cfg);
        let hi = encode_rbf(d(0.5 + 0.13), &cfg);
        assert!((lo.0[1] - hi.0[1]).abs() < 1e-15);
    }

    #[test]
    fn rbf_denominator_mode_value() {
        let cfg = RbfConfig::shared(vec![0.5], 0.02, WidthMode::Denominator).unwrap();
        let e = encode_rbf(d(0.6), &cfg);
        // exp(-0.01 / 0.04)
        assert!((e.0[0] - (-0.25f64).exp()).abs() < 1e-12);
        assert!((e.0[0] - 0.7788).abs() < 1e-4);
    }

    #[test]
    fn rbf_precision_mode_value() {
        let cfg = RbfConfig::shared(vec![0.5], 20.0, WidthMode::Precision).unwrap();
        let e = encode_rbf(d(0.6), &cfg);
        assert!((e.0[0] - (-0.1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn per_centre_widths() {
        let cfg =
            RbfConfig::new(vec![0.2, 0.8], vec![10.0, 40.0], WidthMode::Precision).unwrap();
        let e = encode_rbf(d(0.5), &cfg);
        assert!((e.0[0] - (-10.0 * 0.09 / 2.0f64).exp()).abs() < 1e-12);
        assert!((e.0[1] - (-40.0 * 0.09 / 2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(RbfConfig::shared(vec![], 1.0, WidthMode::Precision).is_err());
        assert!(RbfConfig::shared(vec![0.5, 0.5], 1.0, WidthMode::Precision).is_err());
        assert!(RbfConfig::shared(vec![0.6, 0.5], 1.0, WidthMode::Precision).is_err());
        assert!(RbfConfig::shared(vec![0.5], 0.0, WidthMode::Precision).is_err());
        assert!(RbfConfig::new(vec![0.2, 0.5], vec![1.0], WidthMode::Precision).is_err());
    }

    #[test]
    fn config_serde_shared_width() {
        let cfg: RbfConfig = serde_json::from_str(
            r#"{"centers":[0.25,0.5,0.75],"widths":[20.0],"width_mode":"precision"}"#,
        )
        .unwrap();
        assert_eq!(cfg, RbfConfig::default());
        let bad = serde_json::from_str::<RbfConfig>(r#"{"centers":[0.5,0.25],"widths":[1.0]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn continuous_and_euclidean() {
        assert_eq!(encode_continuous(d(0.0)).0, vec![0.0]);
        assert_eq!(encode_continuous(d(0.4)).0, vec![0.4]);
        assert_eq!(encode_continuous(d(1.0)).0, vec![1.0]);
        assert_eq!(encode_euclidean(d(0.5), d(0.5)).0, vec![0.0]);
        assert!((encode_euclidean(d(0.8), d(0.5)).0[0] - 0.3).abs() < 1e-12);
        assert!((encode_euclidean(d(0.2), d(0.5)).0[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn effective_counts_self_similarity() {
        let cfg = RbfConfig::default();
        let played = vec![d(0.4); 1000];
        let c = effective_counts(&played, &[d(0.4)], &cfg).unwrap();
        assert!((c[0] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn effective_counts_empty_played() {
        let cfg = RbfConfig::default();
        let grid = depths(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(effective_counts(&[], &grid, &cfg).unwrap(), vec![0.0; 3]);
        assert!(effective_counts(&[], &[], &cfg).is_err());
    }

    #[test]
    fn effective_counts_pooled_profile() {
        let cfg = RbfConfig::default();
        let mut played = Vec::new();
        for a in [0.4, 0.6, 0.8] {
            played.extend(std::iter::repeat(d(a)).take(1000));
        }
        let grid: Vec<_> = (0..=100).map(|i| d(i as f64 / 100.0)).collect();
        let counts = effective_counts(&played, &grid, &cfg).unwrap();
        assert!(counts.iter().all(|&c| c > 0.0));
        // every grid point is credited with some share of all 3000 plays
        assert!(counts.iter().all(|&c| c <= 3000.0 + 1e-9));
        let at = |x: f64| counts[(x * 100.0).round() as usize];
        assert!(at(0.6) > at(0.0));
        assert!(at(0.6) > at(0.2));
    }

    proptest! {
        #[test]
        fn rbf_bounded_and_monotone_in_distance(a in 0.0f64..=1.0, b in 0.0f64..=1.0, alpha in 0.5f64..200.0) {
            let cfg = RbfConfig::shared(vec![0.25, 0.5, 0.75], alpha, WidthMode::Precision).unwrap();
            let ea = encode_rbf(d(a), &cfg);
            let eb = encode_rbf(d(b), &cfg);
            for (z, mu) in cfg.centers().iter().enumerate() {
                prop_assert!(ea.0[z] > 0.0 && ea.0[z] <= 1.0);
                let (da, db) = ((a - mu).abs(), (b - mu).abs());
                if da + 1e-9 < db && eb.0[z] > 1e-300 {
                    prop_assert!(ea.0[z] > eb.0[z]);
                }
            }
        }

        #[test]
        fn effective_counts_additive(xs in proptest::collection::vec(0.0f64..=1.0, 0..20),
                                     ys in proptest::collection::vec(0.0f64..=1.0, 0..20)) {
            let cfg = RbfConfig::default();
            let grid = depths(&[0.0, 0.3, 0.55, 1.0]).unwrap();
            let xs = depths(&xs).unwrap();
            let ys = depths(&ys).unwrap();
            let mut both = xs.clone();
            both.extend_from_slice(&ys);
            let cx = effective_counts(&xs, &grid, &cfg).unwrap();
            let cy = effective_counts(&ys, &grid, &cfg).unwrap();
            let cb = effective_counts(&both, &grid, &cfg).unwrap();
            for i in 0..grid.len() {
                prop_assert!((cx[i] + cy[i] - cb[i]).abs() < 1e-9);
            }
        }
    }
}
