//! Small sample-statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean, standard deviation, and a two-sided 95% Student-t
/// confidence half-width for the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub sd: f64,
    pub half_width: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(MeanCi {
                mean,
                sd: 0.0,
                half_width: f64::INFINITY,
                n,
            });
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Some(MeanCi {
            mean,
            sd,
            half_width: t * sd / (n as f64).sqrt(),
            n,
        })
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &MeanCi) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }
}

/// A binomial proportion with its standard error and Wald 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub se: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        let p_hat = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        let se = if trials == 0 {
            0.0
        } else {
            (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
        };
        Proportion {
            successes,
            trials,
            p_hat,
            se,
        }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.p_hat - 1.96 * self.se, self.p_hat + 1.96 * self.se)
    }

    /// Standard error under a hypothesised true value `p`.
    pub fn se_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Standardized difference of two independent proportions.
pub fn two_proportion_z(a: &Proportion, b: &Proportion) -> (f64, f64) {
    let se = (a.se * a.se + b.se * b.se).sqrt();
    let diff = a.p_hat - b.p_hat;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    (se, z)
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin-width rule used, echoed into reports.
    pub policy: String,
    pub bin_width: f64,
    pub bins: Vec<HistBin>,
}

impl Histogram {
    /// Freedman-Diaconis bins: width `2 IQR n^(-1/3)`; falls back to a
    /// single bin on degenerate samples.
    pub fn freedman_diaconis(xs: &[f64]) -> Self {
        let policy = "freedman-diaconis".to_string();
        if xs.is_empty() {
            return Histogram {
                policy,
                bin_width: 0.0,
                bins: Vec::new(),
            };
        }
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let (min, max) = (s[0], s[s.len() - 1]);
        let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
        let n = s.len() as f64;
        let mut width = 2.0 * iqr / n.cbrt();
        if !(width > 0.0) || max <= min {
            width = (max - min).max(f64::MIN_POSITIVE);
        }
        let nbins = (((max - min) / width).ceil() as usize).clamp(1, 10_000);
        let width = if max > min {
            (max - min) / nbins as f64
        } else {
            width
        };
        let mut counts = vec![0u64; nbins];
        for &x in &s {
            let k = if max > min {
                (((x - min) / width) as usize).min(nbins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| HistBin {
                lo: min + k as f64 * width,
                hi: min + (k + 1) as f64 * width,
                count,
                density: count as f64 / (n * width),
            })
            .collect();
        Histogram {
            policy,
            bin_width: width,
            bins,
        }
    }

    pub fn mode_center(&self) -> Option<f64> {
        self.bins
            .iter()
            .max_by_key(|b| b.count)
            .map(|b| 0.5 * (b.lo + b.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_t_quantile() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let m = MeanCi::from_samples(&xs).unwrap();
        assert!((m.mean - 14.5).abs() < 1e-12);
        // t_{0.975, 29} = 2.04523
        let expect = 2.045229642 * m.sd / 30f64.sqrt();
        assert!((m.half_width - expect).abs() < 1e-6);
        assert!(MeanCi::from_samples(&[]).is_none());
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
        assert!((ks_distance(&[1.0, 2.0], &[1.5, 2.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_everything() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Histogram::freedman_diaconis(&xs);
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<u64>(), 1000);
        let area: f64 = h.bins.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((area - 1.0).abs() < 1e-9);
        let one = Histogram::freedman_diaconis(&[2.0, 2.0]);
        assert_eq!(one.bins.len(), 1);
        assert_eq!(one.bins[0].count, 2);
    }

    #[test]
    fn z_of_equal_degenerate_proportions_is_zero() {
        let a = Proportion::new(0, 10);
        let (_, z) = two_proportion_z(&a, &a);
        assert_eq!(z, 0.0);
    }
}
