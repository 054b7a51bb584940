use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstellationKind {
    #[serde(rename = "qpsk", alias = "QPSK")]
    Qpsk,
    #[serde(rename = "8psk", alias = "psk8", alias = "8PSK")]
    Psk8,
    #[serde(rename = "16qam", alias = "qam16", alias = "16QAM")]
    Qam16,
    #[serde(rename = "64qam", alias = "qam64", alias = "64QAM")]
    Qam64,
}

impl ConstellationKind {
    pub const ALL: [ConstellationKind; 4] = [Self::Qpsk, Self::Psk8, Self::Qam16, Self::Qam64];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Self::Qpsk => 2,
            Self::Psk8 => 3,
            Self::Qam16 => 4,
            Self::Qam64 => 6,
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Qpsk => "QPSK",
            Self::Psk8 => "8PSK",
            Self::Qam16 => "16QAM",
            Self::Qam64 => "64QAM",
        };
        f.write_str(s)
    }
}

impl FromStr for ConstellationKind {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" | "qam4" => Ok(Self::Qpsk),
            "8psk" | "psk8" => Ok(Self::Psk8),
            "16qam" | "qam16" => Ok(Self::Qam16),
            "64qam" | "qam64" => Ok(Self::Qam64),
            other => Err(SignalError::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

/// Unit-energy symbol alphabet. `points[label]` is the symbol carrying the
/// `bits_per_symbol`-bit label, so the point index and the label coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Gray-coded constellation for `kind`.
///
/// * QPSK: angular Gray code, label `gray(n)` at `pi/4 + n*pi/2`
///   (00, 01, 11, 10 counter-clockwise from the first quadrant).
/// * 8PSK: angular Gray code, label `gray(n)` at `n*pi/4`, 000 at angle 0.
/// * 16/64-QAM: the upper `k/2` label bits select the in-phase level and
///   the lower `k/2` bits the quadrature level, each through a reflected
///   Gray code over levels ordered from most negative to most positive.
pub fn make_constellation(kind: ConstellationKind) -> Constellation {
    let k = kind.bits_per_symbol();
    let m = 1usize << k;
    let mut points = vec![Complex64::new(0.0, 0.0); m];
    match kind {
        ConstellationKind::Qpsk | ConstellationKind::Psk8 => {
            let offset = if kind == ConstellationKind::Qpsk { PI / 4.0 } else { 0.0 };
            for n in 0..m {
                let angle = offset + 2.0 * PI * n as f64 / m as f64;
                points[gray(n)] = Complex64::from_polar(1.0, angle);
            }
        }
        ConstellationKind::Qam16 | ConstellationKind::Qam64 => {
            let half = k / 2;
            let side = 1usize << half;
            // E|s|^2 of the unscaled odd-integer grid is 2 (side^2 - 1) / 3.
            let scale = (2.0 * (side * side - 1) as f64 / 3.0).sqrt();
            for i in 0..side {
                for q in 0..side {
                    let label = (gray(i) << half) | gray(q);
                    let re = (2 * i) as f64 - (side - 1) as f64;
                    let im = (2 * q) as f64 - (side - 1) as f64;
                    points[label] = Complex64::new(re / scale, im / scale);
                }
            }
        }
    }
    Constellation { kind, points }
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.kind.bits_per_symbol()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Label of point `index` as `bits_per_symbol` bits, MSB first.
    pub fn label_bits(&self, index: usize) -> Vec<u8> {
        let k = self.bits_per_symbol();
        (0..k).rev().map(|b| ((index >> b) & 1) as u8).collect()
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest_index(&self, s: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn slice(&self, s: Complex64) -> Complex64 {
        self.points[self.nearest_index(s)]
    }

    /// RMS magnitude over the alphabet (1 for every built-in constellation).
    pub fn rms(&self) -> f64 {
        (self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64).sqrt()
    }
}

/// Maps bits (one `0`/`1` per byte, MSB-first groups) to symbols.
pub fn map_bits(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>, SignalError> {
    let k = c.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(SignalError::LengthMismatch { len: bits.len(), multiple: k });
    }
    Ok(bits
        .chunks_exact(k)
        .map(|group| {
            let label = group.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            c.points[label]
        })
        .collect())
}

/// Hard-decision demapper: nearest point's label for every symbol.
pub fn demap_symbols(symbols: &[Complex64], c: &Constellation) -> Vec<u8> {
    symbols.iter().flat_map(|&s| c.label_bits(c.nearest_index(s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn qpsk_labels_follow_gray_convention() {
        let c = make_constellation(ConstellationKind::Qpsk);
        let r = 1.0 / 2f64.sqrt();
        assert!(close(c.points()[0b00], Complex64::new(r, r)));
        assert!(close(c.points()[0b01], Complex64::new(-r, r)));
        assert!(close(c.points()[0b11], Complex64::new(-r, -r)));
        assert!(close(c.points()[0b10], Complex64::new(r, -r)));
    }

    #[test]
    fn square_qam_levels() {
        for (kind, side, norm) in [(ConstellationKind::Qam16, 4, 10f64), (ConstellationKind::Qam64, 8, 42f64)] {
            let c = make_constellation(kind);
            let mut levels: Vec<f64> = c.points().iter().map(|p| p.re * norm.sqrt()).collect();
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            levels.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let want: Vec<f64> = (0..side).map(|i| (2 * i) as f64 - (side - 1) as f64).collect();
            assert_eq!(levels.len(), side);
            for (l, w) in levels.iter().zip(&want) {
                assert!((l - w).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unit_average_energy() {
        for kind in ConstellationKind::ALL {
            let c = make_constellation(kind);
            let e = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points().len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{kind}: {e}");
            assert_eq!(c.points().len(), 1 << kind.bits_per_symbol());
        }
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit() {
        for kind in ConstellationKind::ALL {
            let c = make_constellation(kind);
            let pts = c.points();
            let dmin = (0..pts.len())
                .flat_map(|i| (0..pts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| (pts[i] - pts[j]).norm())
                .fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j && ((pts[i] - pts[j]).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{kind}: {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn map_examples() {
        let c = make_constellation(ConstellationKind::Qpsk);
        let s = map_bits(&[0, 0], &c).unwrap();
        assert!(close(s[0], Complex64::new(1.0, 1.0) / 2f64.sqrt()));
        let c64 = make_constellation(ConstellationKind::Qam64);
        assert_eq!(map_bits(&[0; 12], &c64).unwrap().len(), 2);
        assert!(matches!(
            map_bits(&[0; 7], &c64),
            Err(SignalError::LengthMismatch { len: 7, multiple: 6 })
        ));
    }

    #[test]
    fn demap_examples() {
        let c = make_constellation(ConstellationKind::Qpsk);
        let s = Complex64::new(0.9, 0.9) / 2f64.sqrt();
        assert_eq!(demap_symbols(&[s], &c), vec![0, 0]);
        for (i, &p) in c.points().iter().enumerate() {
            assert_eq!(demap_symbols(&[p], &c), c.label_bits(i));
        }
    }

    #[test]
    fn round_trip_ten_thousand_bits() {
        for kind in ConstellationKind::ALL {
            let c = make_constellation(kind);
            let n = 10_000 - 10_000 % kind.bits_per_symbol();
            let bits = SplitMix64::new(42).bits(n);
            let sym = map_bits(&bits, &c).unwrap();
            assert_eq!(demap_symbols(&sym, &c), bits);
        }
    }

    #[test]
    fn equidistant_tie_picks_lowest_index() {
        let c = make_constellation(ConstellationKind::Qpsk);
        assert_eq!(c.nearest_index(Complex64::new(0.0, 0.0)), 0);
    }
}
