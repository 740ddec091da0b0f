use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ks::EmpiricalCdf;

/// Fixed-width histogram normalised as probability per unit width, so a
/// fitted density can be drawn over it directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Lower edge of the first bin, a multiple of `bin_width`.
    pub origin: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub density: f64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> impl Iterator<Item = Bin> + '_ {
        let norm = self.total() as f64 * self.bin_width;
        self.counts.iter().enumerate().map(move |(i, &count)| {
            let lower = self.origin + i as f64 * self.bin_width;
            Bin {
                lower,
                upper: lower + self.bin_width,
                count,
                density: count as f64 / norm,
            }
        })
    }

    /// Midpoint of the fullest bin (the first one on ties).
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best });
        self.origin + (i as f64 + 0.5) * self.bin_width
    }
}

pub fn make_histogram(samples: &[f64], bin_width: f64) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("histogram of an empty sample".into()));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::ParameterDomain {
            name: "bin_width",
            value: bin_width,
            reason: "must be a finite positive width",
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("histogram sample is not finite".into()));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let origin = (min / bin_width).floor() * bin_width;
    let n_bins = (((max - origin) / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let i = (((x - origin) / bin_width).floor().max(0.0) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_width,
        origin,
        counts,
    })
}

/// Sorted `(x_i, i/n)` pairs of the empirical CDF.
pub fn make_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(EmpiricalCdf::new(samples)?.table())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_is_one_tall_bin() {
        let h = make_histogram(&[0.37], 0.25).unwrap();
        let bins: Vec<Bin> = h.bins().collect();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].density, 4.0);
        assert!(bins[0].lower <= 0.37 && 0.37 < bins[0].upper);
    }

    #[test]
    fn uniform_grid_is_flat_and_normalised() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let h = make_histogram(&xs, 0.1).unwrap();
        let mass: f64 = h.bins().map(|b| b.density * h.bin_width).sum();
        assert!((mass - 1.0).abs() < 1e-9);
        for b in h.bins() {
            assert!((b.density - 1.0).abs() < 0.02, "{b:?}");
        }
    }

    #[test]
    fn mode_and_errors() {
        let h = make_histogram(&[1.01, 1.02, 1.03, 2.5], 0.1).unwrap();
        assert!((h.mode() - 1.05).abs() < 1e-9);
        assert!(make_histogram(&[], 0.1).is_err());
        assert!(make_histogram(&[1.0], 0.0).is_err());
        assert!(make_cdf(&[]).is_err());
    }

    #[test]
    fn cdf_table_ends_at_one() {
        let t = make_cdf(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert!(t.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(t.last().unwrap().1, 1.0);
    }
}
