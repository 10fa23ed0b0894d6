//! Image and data encoders producing query and database statevectors.
//!
//! Data-register layout for images: the color qubits are the low qubits and
//! the pixel-position qubits sit above them, so basis index
//! `color + (pixel << n_color_qubits)` is `|color>|pixel>`.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{log2_exact, Statevector};

const ANGLE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageData {
    n_levels: u32,
    intensities: Vec<u32>,
}

impl ImageData {
    pub fn new(intensities: Vec<u32>, n_levels: u32) -> Result<Self> {
        log2_exact(intensities.len())
            .map_err(|_| Error::InvalidImage(format!("{} pixels is not a power of two", intensities.len())))?;
        if n_levels < 2 || !n_levels.is_power_of_two() {
            return Err(Error::InvalidImage(format!(
                "{n_levels} color levels is not a power of two >= 2"
            )));
        }
        if let Some(g) = intensities.iter().find(|&&g| g >= n_levels) {
            return Err(Error::InvalidImage(format!(
                "intensity {g} exceeds {} levels",
                n_levels
            )));
        }
        Ok(Self {
            n_levels,
            intensities,
        })
    }

    /// Binary image whose pixel `j` is bit `j` of `bits`.
    pub fn binary_from_bits(bits: u64, n_pixels: usize) -> Result<Self> {
        Self::new(
            (0..n_pixels).map(|j| ((bits >> j) & 1) as u32).collect(),
            2,
        )
    }

    pub fn n_pixels(&self) -> usize {
        self.intensities.len()
    }

    pub fn n_levels(&self) -> u32 {
        self.n_levels
    }

    pub fn intensities(&self) -> &[u32] {
        &self.intensities
    }

    pub fn pixel_qubits(&self) -> usize {
        self.n_pixels().trailing_zeros() as usize
    }

    pub fn color_qubits(&self) -> usize {
        self.n_levels.trailing_zeros() as usize
    }

    pub fn is_binary(&self) -> bool {
        self.n_levels == 2
    }

    /// Number of differing pixels.
    pub fn hamming_distance(&self, other: &ImageData) -> Result<u32> {
        if self.n_pixels() != other.n_pixels() {
            return Err(Error::DimensionMismatch {
                expected: self.n_pixels(),
                actual: other.n_pixels(),
            });
        }
        Ok(self
            .intensities
            .iter()
            .zip(&other.intensities)
            .filter(|(a, b)| a != b)
            .count() as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Database {
    images: Vec<ImageData>,
    labels: Vec<String>,
}

impl Database {
    /// Images are labelled by position when `labels` is `None`.
    pub fn new(images: Vec<ImageData>, labels: Option<Vec<String>>) -> Result<Self> {
        log2_exact(images.len())?;
        let first = &images[0];
        for img in &images[1..] {
            if img.n_pixels() != first.n_pixels() || img.n_levels() != first.n_levels() {
                return Err(Error::InvalidImage(
                    "database images must share pixel count and color levels".into(),
                ));
            }
        }
        let labels = match labels {
            Some(l) if l.len() != images.len() => {
                return Err(Error::DimensionMismatch {
                    expected: images.len(),
                    actual: l.len(),
                })
            }
            Some(l) => l,
            None => (0..images.len()).map(|k| k.to_string()).collect(),
        };
        Ok(Self { images, labels })
    }

    pub fn images(&self) -> &[ImageData] {
        &self.images
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn index_qubits(&self) -> usize {
        self.images.len().trailing_zeros() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    Frqi,
    Neqr,
    /// Normalized intensity vector on the pixel register alone.
    IdealAmplitude,
}

impl EncodingScheme {
    pub fn data_qubits(self, image: &ImageData) -> usize {
        match self {
            EncodingScheme::Frqi => 1 + image.pixel_qubits(),
            EncodingScheme::Neqr => image.color_qubits() + image.pixel_qubits(),
            EncodingScheme::IdealAmplitude => image.pixel_qubits(),
        }
    }

    pub fn encode(self, image: &ImageData) -> Result<Statevector> {
        match self {
            EncodingScheme::Frqi => frqi_state(image, &AngleMap::Linear),
            EncodingScheme::Neqr => neqr_state(image),
            EncodingScheme::IdealAmplitude => {
                let v: Vec<f64> = image.intensities().iter().map(|&g| g as f64).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::InvalidImage(
                        "all-black image has no amplitude encoding".into(),
                    ));
                }
                inject_amplitudes(&v.iter().map(|x| x / norm).collect::<Vec<_>>())
            }
        }
    }
}

impl std::str::FromStr for EncodingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frqi" => Ok(Self::Frqi),
            "neqr" => Ok(Self::Neqr),
            "ideal" | "ideal_amplitude" | "amplitude" => Ok(Self::IdealAmplitude),
            other => Err(Error::InvalidArgument(format!("unknown encoding scheme {other:?}"))),
        }
    }
}

/// Intensity to FRQI angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AngleMap {
    /// `theta = g / (levels - 1) * pi / 2`.
    Linear,
    /// Explicit angle per intensity level.
    Table(Vec<f64>),
}

impl AngleMap {
    pub fn angle(&self, intensity: u32, n_levels: u32) -> Result<f64> {
        match self {
            AngleMap::Linear => Ok(intensity as f64 / (n_levels - 1) as f64 * FRAC_PI_2),
            AngleMap::Table(t) => t.get(intensity as usize).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("angle table has no entry for intensity {intensity}"))
            }),
        }
    }
}

/// FRQI amplitudes for explicit per-pixel angles.
pub fn frqi_amplitudes(angles: &[f64]) -> Result<Vec<f64>> {
    log2_exact(angles.len())?;
    let scale = 1.0 / (angles.len() as f64).sqrt();
    let mut amps = vec![0.0; 2 * angles.len()];
    for (z, &theta) in angles.iter().enumerate() {
        if !(-ANGLE_SLACK..=FRAC_PI_2 + ANGLE_SLACK).contains(&theta) {
            return Err(Error::AngleOutOfRange(theta));
        }
        let (s, c) = theta.sin_cos();
        amps[2 * z] = c * scale;
        amps[2 * z + 1] = s * scale;
    }
    Ok(amps)
}

/// FRQI angles of `image` under `angle_map`.
pub fn frqi_angles(image: &ImageData, angle_map: &AngleMap) -> Result<Vec<f64>> {
    image
        .intensities()
        .iter()
        .map(|&g| angle_map.angle(g, image.n_levels()))
        .collect()
}

/// `(1/sqrt(N_P)) sum_z (cos t_z |0> + sin t_z |1>) |z>` on `1 + n_P` qubits.
pub fn frqi_state(image: &ImageData, angle_map: &AngleMap) -> Result<Statevector> {
    inject_amplitudes(&frqi_amplitudes(&frqi_angles(image, angle_map)?)?)
}

pub fn neqr_amplitudes(image: &ImageData) -> Vec<f64> {
    let levels = image.n_levels() as usize;
    let scale = 1.0 / (image.n_pixels() as f64).sqrt();
    let mut amps = vec![0.0; levels * image.n_pixels()];
    for (z, &g) in image.intensities().iter().enumerate() {
        amps[g as usize + z * levels] = scale;
    }
    amps
}

/// `(1/sqrt(N_P)) sum_z |f(z)>|z>` with `f(z)` the `n_C`-bit intensity code.
pub fn neqr_state(image: &ImageData) -> Result<Statevector> {
    inject_amplitudes(&neqr_amplitudes(image))
}

/// `(1/sqrt(N_I)) sum_k |data(k)>|k>` from explicit per-item data vectors.
pub fn superpose_indexed(data: &[Vec<f64>]) -> Result<Vec<f64>> {
    log2_exact(data.len())?;
    let dim = data[0].len();
    log2_exact(dim)?;
    let scale = 1.0 / (data.len() as f64).sqrt();
    let mut amps = Vec::with_capacity(dim * data.len());
    for d in data {
        if d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: d.len(),
            });
        }
        amps.extend(d.iter().map(|x| x * scale));
    }
    Ok(amps)
}

pub fn database_state(db: &Database, scheme: EncodingScheme) -> Result<Statevector> {
    let data = db
        .images()
        .iter()
        .map(|img| scheme.encode(img).map(|s| s.real_parts()))
        .collect::<Result<Vec<_>>>()?;
    inject_amplitudes(&superpose_indexed(&data)?)
}

/// Equal-weight superposition of basis vectors, one list of data-register
/// basis indices per item, weight `1/sqrt(N_I * N_BE)` each.
pub fn basis_encoded_state(items: &[Vec<usize>], n_data: usize) -> Result<Statevector> {
    log2_exact(items.len())?;
    let n_be = items[0].len();
    if n_be == 0 {
        return Err(Error::InvalidArgument("items must contain at least one basis index".into()));
    }
    let data_dim = 1usize << n_data;
    let weight = 1.0 / ((items.len() * n_be) as f64).sqrt();
    let mut amps = vec![0.0; data_dim * items.len()];
    for (k, item) in items.iter().enumerate() {
        if item.len() != n_be {
            return Err(Error::InvalidArgument(
                "every item must carry the same number of basis vectors".into(),
            ));
        }
        let mut seen = HashSet::new();
        for &j in item {
            if j >= data_dim {
                return Err(Error::QubitOutOfRange {
                    index: j,
                    n_qubits: n_data,
                });
            }
            if !seen.insert(j) {
                return Err(Error::DuplicateBasisIndex(j));
            }
            amps[j + k * data_dim] = weight;
        }
    }
    inject_amplitudes(&amps)
}

/// Ideal encoder: the statevector carrying exactly `amplitudes`.
pub fn inject_amplitudes(amplitudes: &[f64]) -> Result<Statevector> {
    Statevector::from_real(amplitudes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnotMode {
    AllToAll,
    NearestNeighbor,
}

/// CNOT count of exact arbitrary-state preparation on `n` qubits.
///
/// All-to-all: `2^n - n - 1`. Nearest-neighbor:
/// `(10/3) 2^n + 2n^2 - 12n + (14/3 if n even else 10/3)`.
pub fn cnot_count_estimate(n: u32, mode: CnotMode) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let n_i = n as i64;
    let pow = 1i64 << n;
    Ok(match mode {
        CnotMode::AllToAll => (pow - n_i - 1) as f64,
        CnotMode::NearestNeighbor => {
            // exact in thirds
            let tail = if n % 2 == 0 { 14 } else { 10 };
            (10 * pow + 6 * n_i * n_i - 36 * n_i + tail) as f64 / 3.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Gate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hex(h: u64) -> ImageData {
        ImageData::binary_from_bits(h, 4).unwrap()
    }

    #[test]
    fn image_validation() {
        assert!(ImageData::new(vec![0, 1, 2], 4).is_err());
        assert!(ImageData::new(vec![0, 4], 4).is_err());
        assert!(ImageData::new(vec![0, 1], 3).is_err());
        let img = ImageData::new(vec![0; 64], 16).unwrap();
        assert_eq!((img.pixel_qubits(), img.color_qubits()), (6, 4));
    }

    #[test]
    fn frqi_all_black() {
        let s = frqi_state(&hex(0), &AngleMap::Linear).unwrap();
        assert_eq!(s.n_qubits(), 3);
        for z in 0..4 {
            assert_abs_diff_eq!(s.amplitude(2 * z).re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(s.amplitude(2 * z + 1).re, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frqi_2h_support() {
        let s = frqi_state(&hex(2), &AngleMap::Linear).unwrap();
        // |color>|pixel> at (0,0), (1,1), (0,2), (0,3)
        let support: Vec<usize> = (0..8).filter(|&i| s.amplitude(i).norm() > 1e-12).collect();
        assert_eq!(support, vec![0, 1 + 2, 4, 6]);
        for i in support {
            assert_abs_diff_eq!(s.amplitude(i).re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn frqi_multilevel_normalized() {
        let img = ImageData::new((0..64).map(|j| (j * 7 % 16) as u32).collect(), 16).unwrap();
        let s = frqi_state(&img, &AngleMap::Linear).unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn frqi_rejects_bad_angles() {
        let table = AngleMap::Table(vec![0.0, 2.0]);
        assert!(matches!(
            frqi_state(&hex(1), &table),
            Err(Error::AngleOutOfRange(_))
        ));
    }

    #[test]
    fn neqr_single_pixel_code() {
        let img = ImageData::new(vec![5], 16).unwrap();
        let s = neqr_state(&img).unwrap();
        assert_eq!(s.n_qubits(), 4);
        assert_abs_diff_eq!(s.amplitude(0b0101).re, 1.0);
    }

    #[test]
    fn neqr_distinct_single_pixels_orthogonal() {
        for a in 0..16 {
            for b in 0..16 {
                let sa = neqr_state(&ImageData::new(vec![a], 16).unwrap()).unwrap();
                let sb = neqr_state(&ImageData::new(vec![b], 16).unwrap()).unwrap();
                let ip = sa.inner_product(&sb).unwrap().norm();
                assert_abs_diff_eq!(ip, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn frqi_equals_neqr_on_binary_images() {
        for h in 0..16 {
            let f = frqi_state(&hex(h), &AngleMap::Linear).unwrap();
            let n = neqr_state(&hex(h)).unwrap();
            for (x, y) in f.amplitudes().iter().zip(n.amplitudes()) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn frqi_overlap_tracks_hamming_distance() {
        // brute force over all 16 x 16 pairs
        for a in 0..16u64 {
            for b in 0..16u64 {
                let sa = frqi_state(&hex(a), &AngleMap::Linear).unwrap();
                let sb = frqi_state(&hex(b), &AngleMap::Linear).unwrap();
                let brute: f64 = sa
                    .amplitudes()
                    .iter()
                    .zip(sb.amplitudes())
                    .map(|(x, y)| x.re * y.re)
                    .sum();
                let hd = (a ^ b).count_ones() as f64;
                assert_abs_diff_eq!(brute, (4.0 - hd) / 4.0, epsilon = 1e-12);
                assert_abs_diff_eq!(sa.inner_product(&sb).unwrap().re, brute, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn database_single_image() {
        let db = Database::new(vec![hex(6)], None).unwrap();
        let s = database_state(&db, EncodingScheme::Frqi).unwrap();
        let d = frqi_state(&hex(6), &AngleMap::Linear).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn toy_database_shape() {
        let db = Database::new((0..8).map(|k| hex(2 * k)).collect(), None).unwrap();
        let s = database_state(&db, EncodingScheme::Frqi).unwrap();
        assert_eq!(s.n_qubits(), 6);
        let index_reg = [3, 4, 5];
        for k in 0..8u64 {
            let p = s.projection_probability(&index_reg, k).unwrap();
            assert_abs_diff_eq!(p, 1.0 / 8.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn database_rejects_non_power_of_two() {
        assert!(matches!(
            Database::new(vec![hex(0), hex(1), hex(2)], None),
            Err(Error::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn repeated_image_database_is_product_state() {
        let img = hex(9);
        let db = Database::new(vec![img.clone(); 4], None).unwrap();
        let s = database_state(&db, EncodingScheme::Frqi).unwrap();
        let d = frqi_state(&img, &AngleMap::Linear).unwrap();
        for k in 0..4 {
            for j in 0..8 {
                assert_abs_diff_eq!(s.amplitude(j + 8 * k).re, d.amplitude(j).re * 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn basis_encoding_examples() {
        let s = basis_encoded_state(&[vec![3]], 2).unwrap();
        assert_abs_diff_eq!(s.amplitude(3).re, 1.0);
        let s = basis_encoded_state(&[vec![0, 1, 2, 3]], 2).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(s.amplitude(i).re, 0.5, epsilon = 1e-15);
        }
        let s = basis_encoded_state(&[vec![0, 3], vec![1, 2]], 2).unwrap();
        let nonzero: Vec<f64> = s.real_parts().into_iter().filter(|a| *a != 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        for a in nonzero {
            assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        }
        assert!(matches!(
            basis_encoded_state(&[vec![1, 1]], 2),
            Err(Error::DuplicateBasisIndex(1))
        ));
    }

    #[test]
    fn injection() {
        let s = inject_amplitudes(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, Statevector::zero(2));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = inject_amplitudes(&[h, h, 0.0, 0.0]).unwrap();
        let r = Statevector::zero(2).applied(&Gate::H(0)).unwrap();
        assert_abs_diff_eq!(s.inner_product(&r).unwrap().norm(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            inject_amplitudes(&[1.0, 1.0]),
            Err(Error::NotNormalized(_))
        ));
        let f = frqi_state(&hex(0), &AngleMap::Linear).unwrap();
        let v = frqi_amplitudes(&[0.0; 4]).unwrap();
        assert_eq!(inject_amplitudes(&v).unwrap(), f);
    }

    #[test]
    fn cnot_counts() {
        assert_eq!(cnot_count_estimate(6, CnotMode::AllToAll).unwrap(), 57.0);
        assert_eq!(cnot_count_estimate(1, CnotMode::AllToAll).unwrap(), 0.0);
        // 640/3 + 72 - 72 + 14/3 = 654/3
        assert_abs_diff_eq!(
            cnot_count_estimate(6, CnotMode::NearestNeighbor).unwrap(),
            218.0,
            epsilon = 1e-12
        );
        // odd n: 10/3 * 8 + 18 - 36 + 10/3 = 90/3 - 18 = 12
        assert_abs_diff_eq!(
            cnot_count_estimate(3, CnotMode::NearestNeighbor).unwrap(),
            12.0,
            epsilon = 1e-12
        );
        assert!(cnot_count_estimate(0, CnotMode::AllToAll).is_err());
    }

    proptest! {
        #[test]
        fn encoders_are_normalized(pixels in proptest::collection::vec(0u32..16, 16)) {
            let img = ImageData::new(pixels, 16).unwrap();
            let f = frqi_state(&img, &AngleMap::Linear).unwrap();
            let n = neqr_state(&img).unwrap();
            prop_assert!((f.norm_sqr() - 1.0).abs() < 1e-10);
            prop_assert!((n.norm_sqr() - 1.0).abs() < 1e-10);
            prop_assert_eq!(f.n_qubits(), 5);
            prop_assert_eq!(n.n_qubits(), 8);
        }
    }
}
