//! Reproducible benchmark scenarios with known ground truth.
//!
//! A scenario describes both samples as a background distribution plus a
//! list of anomaly components. Every component draws from its own ChaCha8
//! stream, numbered `(role << 32) | component` under the scenario seed, where
//! component 0 is the background and component `i + 1` is anomaly `i`.
//! Adding or editing one component therefore never changes another's points.
//!
//! Scenario files are TOML:
//!
//! ```toml
//! format = "eagleeye-scenario/1"
//! name = "example"
//! dimension = 2
//! seed = 7
//!
//! [reference.background]
//! kind = "uniform-box"
//! count = 1000
//! low = [0.0, 0.0]
//! high = [1.0, 1.0]
//!
//! [test.background]
//! kind = "standard-gaussian"
//! count = 1000
//!
//! [[test.anomaly]]
//! kind = "gaussian"
//! count = 50
//! center = [0.5, 0.5]
//! scale = [0.01, 0.02]
//! ```
//!
//! Other anomaly kinds are `torus` (`count`, `center`, `major_radius`,
//! `minor_radius`, `pad_scale`) and `spherical-deletion` (`center`,
//! `radius`, `removal_probability`).

mod truth;

pub use truth::{evaluate_against_truth, AnomalyTruth, ClusterTruth, TruthEvaluation};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Role};

pub const SCENARIO_FORMAT: &str = "eagleeye-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub format: String,
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    pub reference: SampleSpec,
    pub test: SampleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub background: Background,
    #[serde(default, rename = "anomaly")]
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Background {
    UniformBox {
        count: usize,
        low: Vec<f64>,
        high: Vec<f64>,
    },
    StandardGaussian {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Anomaly {
    /// Axis-aligned Gaussian; `scale` holds per-axis standard deviations.
    Gaussian {
        count: usize,
        center: Vec<f64>,
        scale: Vec<f64>,
    },
    /// Uniform on a solid torus in the first three coordinates (axis along
    /// the third), Gaussian with standard deviation `pad_scale` in the rest.
    Torus {
        count: usize,
        center: Vec<f64>,
        major_radius: f64,
        minor_radius: f64,
        pad_scale: f64,
    },
    /// Each point inside the sphere is redrawn from the background with
    /// probability `removal_probability`.
    SphericalDeletion {
        center: Vec<f64>,
        radius: f64,
        removal_probability: f64,
    },
}

impl Anomaly {
    /// Points this component adds to the sample.
    pub fn count(&self) -> usize {
        match self {
            Anomaly::Gaussian { count, .. } | Anomaly::Torus { count, .. } => *count,
            Anomaly::SphericalDeletion { .. } => 0,
        }
    }
}

impl Background {
    pub fn count(&self) -> usize {
        match self {
            Background::UniformBox { count, .. } | Background::StandardGaussian { count } => *count,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, dim: usize, out: &mut Vec<f64>) {
        match self {
            Background::UniformBox { low, high, .. } => {
                out.extend((0..dim).map(|j| rng.random_range(low[j]..high[j])))
            }
            Background::StandardGaussian { .. } => {
                out.extend((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
            }
        }
    }
}

/// Ground-truth origin of every point in one generated sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `None` for background, `Some(i)` for anomaly component `i`.
    pub labels: Vec<Option<usize>>,
    /// Number of anomaly components in the sample spec.
    pub n_anomalies: usize,
}

impl GroundTruth {
    /// Planted points per anomaly component.
    pub fn planted(&self) -> Vec<usize> {
        let mut n = vec![0; self.n_anomalies];
        for a in self.labels.iter().flatten() {
            n[*a] += 1;
        }
        n
    }
}

/// Both generated samples with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub reference: Dataset,
    pub test: Dataset,
    pub reference_truth: GroundTruth,
    pub test_truth: GroundTruth,
}

impl Scenario {
    pub fn sample(&self, role: Role) -> (&Dataset, &GroundTruth) {
        match role {
            Role::Reference => (&self.reference, &self.reference_truth),
            Role::Test => (&self.test, &self.test_truth),
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::Spec(e.message().to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario specs always serialise")
    }

    pub fn sample_spec(&self, role: Role) -> &SampleSpec {
        match role {
            Role::Reference => &self.reference,
            Role::Test => &self.test,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.format != SCENARIO_FORMAT {
            return Err(spec_err(format!(
                "unsupported format {:?}, expected {SCENARIO_FORMAT:?}",
                self.format
            )));
        }
        let d = self.dimension;
        if d == 0 {
            return Err(spec_err("dimension must be positive"));
        }
        for role in [Role::Reference, Role::Test] {
            let s = self.sample_spec(role);
            if let Background::UniformBox { low, high, .. } = &s.background {
                check_len(role, "background low", low, d)?;
                check_len(role, "background high", high, d)?;
                if low.iter().zip(high).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
                    return Err(spec_err(format!("{role} background: need low < high on every axis")));
                }
            }
            for (i, a) in s.anomalies.iter().enumerate() {
                let what = format!("anomaly {i}");
                match a {
                    Anomaly::Gaussian { center, scale, .. } => {
                        check_len(role, &what, center, d)?;
                        check_len(role, &what, scale, d)?;
                        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                            return Err(spec_err(format!("{role} {what}: scales must be positive")));
                        }
                    }
                    Anomaly::Torus {
                        center,
                        major_radius,
                        minor_radius,
                        pad_scale,
                        ..
                    } => {
                        if d < 3 {
                            return Err(spec_err(format!(
                                "{role} {what}: a torus needs at least 3 dimensions, got {d}"
                            )));
                        }
                        check_len(role, &what, center, d)?;
                        for (name, v) in [
                            ("major_radius", major_radius),
                            ("minor_radius", minor_radius),
                            ("pad_scale", pad_scale),
                        ] {
                            if !(*v > 0.0 && v.is_finite()) {
                                return Err(spec_err(format!("{role} {what}: {name} must be positive")));
                            }
                        }
                    }
                    Anomaly::SphericalDeletion {
                        center,
                        radius,
                        removal_probability,
                    } => {
                        check_len(role, &what, center, d)?;
                        if !(*radius > 0.0 && radius.is_finite()) {
                            return Err(spec_err(format!("{role} {what}: radius must be positive")));
                        }
                        if !(0.0..=1.0).contains(removal_probability) {
                            return Err(spec_err(format!(
                                "{role} {what}: removal_probability must lie in [0, 1]"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

fn check_len(role: Role, what: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(spec_err(format!(
            "{role} {what}: expected {d} coordinates, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(spec_err(format!("{role} {what}: coordinates must be finite")));
    }
    Ok(())
}

fn stream_rng(seed: u64, role: Role, component: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let role_bit = match role {
        Role::Reference => 0u64,
        Role::Test => 1,
    };
    rng.set_stream((role_bit << 32) | component as u64);
    rng
}

/// Generates one sample of the scenario.
pub fn generate_sample(spec: &ScenarioSpec, role: Role) -> Result<(Dataset, GroundTruth)> {
    spec.check()?;
    let d = spec.dimension;
    let s = spec.sample_spec(role);
    let total = s.background.count() + s.anomalies.iter().map(Anomaly::count).sum::<usize>();
    if total == 0 {
        return Err(Error::EmptyDataset { role });
    }
    let mut coords = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);

    let mut rng = stream_rng(spec.seed, role, 0);
    for _ in 0..s.background.count() {
        s.background.sample(&mut rng, d, &mut coords);
        labels.push(None);
    }
    for (i, a) in s.anomalies.iter().enumerate() {
        let mut rng = stream_rng(spec.seed, role, i + 1);
        match a {
            Anomaly::Gaussian {
                count,
                center,
                scale,
            } => {
                for _ in 0..*count {
                    coords.extend((0..d).map(|j| {
                        center[j] + scale[j] * rng.sample::<f64, _>(StandardNormal)
                    }));
                    labels.push(Some(i));
                }
            }
            Anomaly::Torus {
                count,
                center,
                major_radius,
                minor_radius,
                pad_scale,
            } => {
                for _ in 0..*count {
                    let [x, y, z] = solid_torus_point(&mut rng, *major_radius, *minor_radius);
                    coords.extend([center[0] + x, center[1] + y, center[2] + z]);
                    coords.extend((3..d).map(|j| {
                        center[j] + pad_scale * rng.sample::<f64, _>(StandardNormal)
                    }));
                    labels.push(Some(i));
                }
            }
            Anomaly::SphericalDeletion { .. } => {}
        }
    }
    // Deletions act on everything generated so far, in component order.
    for (i, a) in s.anomalies.iter().enumerate() {
        let Anomaly::SphericalDeletion {
            center,
            radius,
            removal_probability,
        } = a
        else {
            continue;
        };
        let mut rng = stream_rng(spec.seed, role, i + 1);
        let r2 = radius * radius;
        let mut fresh = Vec::with_capacity(d);
        for id in 0..labels.len() {
            let p = &coords[id * d..(id + 1) * d];
            let inside = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() <= r2;
            if inside && rng.random::<f64>() < *removal_probability {
                fresh.clear();
                s.background.sample(&mut rng, d, &mut fresh);
                coords[id * d..(id + 1) * d].copy_from_slice(&fresh);
                labels[id] = None;
            }
        }
    }
    Ok((
        Dataset::new(role, d, coords)?,
        GroundTruth {
            labels,
            n_anomalies: s.anomalies.len(),
        },
    ))
}

/// Generates both samples.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    let (reference, reference_truth) = generate_sample(spec, Role::Reference)?;
    let (test, test_truth) = generate_sample(spec, Role::Test)?;
    Ok(Scenario {
        reference,
        test,
        reference_truth,
        test_truth,
    })
}

/// Uniform point in a solid torus centred at the origin, by rejection from
/// its bounding box (acceptance rate `π r / (4 (R + r))` or better).
fn solid_torus_point(rng: &mut ChaCha8Rng, major: f64, minor: f64) -> [f64; 3] {
    let outer = major + minor;
    loop {
        let x = rng.random_range(-outer..outer);
        let y = rng.random_range(-outer..outer);
        let z = rng.random_range(-minor..minor);
        let ring = (x * x + y * y).sqrt() - major;
        if ring * ring + z * z <= minor * minor {
            return [x, y, z];
        }
    }
}

/// Names of the scenarios bundled with the crate.
pub const PRESETS: [&str; 3] = ["gauss7x3", "sphere-deletion", "torus10d"];

/// Bundled scenario source text by name.
pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "gauss7x3" => Some(include_str!("../../presets/gauss7x3.scenario")),
        "sphere-deletion" => Some(include_str!("../../presets/sphere-deletion.scenario")),
        "torus10d" => Some(include_str!("../../presets/torus10d.scenario")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<ScenarioSpec> {
    let src = preset_source(name).ok_or_else(|| spec_err(format!("no preset named {name:?}")))?;
    ScenarioSpec::from_toml(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(anomalies: &str) -> String {
        format!(
            r#"
format = "eagleeye-scenario/1"
dimension = 3
seed = 5
[reference.background]
kind = "uniform-box"
count = 200
low = [0.0, 0.0, 0.0]
high = [1.0, 1.0, 1.0]
[test.background]
kind = "uniform-box"
count = 200
low = [0.0, 0.0, 0.0]
high = [1.0, 1.0, 1.0]
{anomalies}
"#
        )
    }

    #[test]
    fn presets_parse_with_expected_counts() {
        let g = preset("gauss7x3").unwrap();
        let counts: Vec<usize> = g.test.anomalies.iter().map(Anomaly::count).collect();
        assert_eq!(counts, [50, 100, 200, 300, 500, 700, 900]);
        assert_eq!(g.test.background.count(), 47_250);
        let counts: Vec<usize> = g.reference.anomalies.iter().map(Anomaly::count).collect();
        assert_eq!(counts, [100, 300, 700]);
        assert_eq!(g.reference.background.count(), 48_900);
        for name in PRESETS {
            preset(name).unwrap();
        }
    }

    #[test]
    fn gauss_centres_are_well_separated() {
        let g = preset("gauss7x3").unwrap();
        let mut centres = Vec::new();
        let mut widest: f64 = 0.0;
        for s in [&g.reference, &g.test] {
            for a in &s.anomalies {
                if let Anomaly::Gaussian { center, scale, .. } = a {
                    centres.push(center.clone());
                    widest = scale.iter().fold(widest, |m, &v| m.max(v));
                }
            }
        }
        for i in 0..centres.len() {
            for j in 0..i {
                let d: f64 = centres[i]
                    .iter()
                    .zip(&centres[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 10.0 * widest, "{i} {j} {d}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_streams_are_independent() {
        let base = ScenarioSpec::from_toml(&tiny("")).unwrap();
        let with = ScenarioSpec::from_toml(&tiny(
            "[[test.anomaly]]\nkind = \"gaussian\"\ncount = 30\ncenter = [0.5, 0.5, 0.5]\nscale = [0.01, 0.01, 0.01]",
        ))
        .unwrap();
        let a = generate(&base).unwrap();
        assert_eq!(a, generate(&base).unwrap());
        let b = generate(&with).unwrap();
        assert_eq!(a.reference, b.reference);
        assert_eq!(&b.test.coords()[..600], a.test.coords());
        assert_eq!(b.test.len(), 230);
        assert_eq!(b.test_truth.planted(), vec![30]);
        assert!(a.test_truth.labels.iter().all(Option::is_none));
    }

    #[test]
    fn torus_points_lie_inside() {
        let spec = preset("torus10d").unwrap();
        let (ds, truth) = generate_sample(&spec, Role::Test).unwrap();
        assert_eq!(ds.len(), 10_400);
        for (id, label) in truth.labels.iter().enumerate() {
            let Some(a) = label else { continue };
            let cx = if *a == 0 { 1.0 } else { -1.0 };
            let p = ds.point(id);
            let ring = ((p[0] - cx).powi(2) + p[1].powi(2)).sqrt() - 0.3;
            assert!(ring * ring + p[2] * p[2] <= 0.05f64.powi(2) + 1e-12);
        }
    }

    #[test]
    fn torus_needs_three_dimensions() {
        let text = r#"
format = "eagleeye-scenario/1"
dimension = 2
[reference.background]
kind = "standard-gaussian"
count = 10
[test.background]
kind = "standard-gaussian"
count = 10
[[test.anomaly]]
kind = "torus"
count = 5
center = [0.0, 0.0]
major_radius = 0.3
minor_radius = 0.05
pad_scale = 0.3
"#;
        assert!(matches!(ScenarioSpec::from_toml(text), Err(Error::Spec(_))));
    }

    #[test]
    fn deletion_conserves_count_and_empties_sphere() {
        let spec = ScenarioSpec::from_toml(&tiny(
            "[[test.anomaly]]\nkind = \"spherical-deletion\"\ncenter = [0.5, 0.5, 0.5]\nradius = 0.3\nremoval_probability = 1.0",
        ))
        .unwrap();
        let s = generate(&spec).unwrap();
        assert_eq!(s.test.len(), 200);
        let inside = |ds: &Dataset| {
            ds.points()
                .filter(|p| p.iter().map(|x| (x - 0.5) * (x - 0.5)).sum::<f64>() <= 0.09)
                .count()
        };
        // Redrawn points may land back inside, but far fewer than before.
        assert!(inside(&s.test) * 4 < inside(&s.reference));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = tiny("[[test.anomaly]]\nkind = \"spherical-deletion\"\ncenter = [0.5, 0.5, 0.5]\nradius = 0.3\nremoval_probability = 1.5");
        assert!(ScenarioSpec::from_toml(&bad).is_err());
        let bad = tiny("[[test.anomaly]]\nkind = \"gaussian\"\ncount = 3\ncenter = [0.5, 0.5]\nscale = [0.1, 0.1]");
        assert!(ScenarioSpec::from_toml(&bad).is_err());
        assert!(ScenarioSpec::from_toml(&tiny("").replace("/1", "/9")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let g = preset("gauss7x3").unwrap();
        assert_eq!(ScenarioSpec::from_toml(&g.to_toml()).unwrap(), g);
    }
}
