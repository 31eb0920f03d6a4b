//! Two-step cancer initiation under deterministic stacked-disk clone growth.
//!
//! Successful type-1 clones arrive as a Poisson process. Each grows as a
//! stack of `w` disks of radius `c_w(beta) * age`, capped at the tissue size
//! `N`. A successful type-2 cell appears at rate `u2 beta/(1+beta)` per
//! type-1 cell, and `sigma2` is the first such event. Clone volumes simply
//! add; overlap and tissue boundaries are ignored.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{beta_max, c_w_asym, gamma_metaparameter};
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, Histogram};
use crate::stream::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStepParams {
    /// Total cell count.
    pub n: f64,
    pub w: u32,
    /// Type-1 fitness advantage; sets clone growth and type-1 success odds.
    pub beta1: f64,
    /// Type-2 fitness advantage; sets type-2 success odds.
    pub beta2: f64,
    pub u1: f64,
    pub u2: f64,
}

impl TwoStepParams {
    /// Equal fitness advantages for both steps.
    pub fn new(n: f64, w: u32, beta: f64, u1: f64, u2: f64) -> Result<Self> {
        let p = TwoStepParams {
            n,
            w,
            beta1: beta,
            beta2: beta,
            u1,
            u2,
        };
        p.validate()?;
        Ok(p)
    }

    /// `N = 10^6`, `u1 = 10^-6`, `u2 = 10^-5`, `beta = 0.01`.
    pub fn reference(w: u32) -> Self {
        TwoStepParams::new(1e6, w, 0.01, 1e-6, 1e-5).expect("reference parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::Domain("w must be at least 1".into()));
        }
        if !(self.n >= self.w as f64) || !self.n.is_finite() {
            return Err(Error::Domain(format!(
                "N must be finite and >= w, got {}",
                self.n
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b <= beta_max()) {
                return Err(Error::Domain(format!(
                    "{name} must lie in (0, 1/e], got {b}"
                )));
            }
        }
        for (name, u) in [("u1", self.u1), ("u2", self.u2)] {
            if !(u > 0.0) || !u.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {u}"
                )));
            }
        }
        Ok(())
    }

    /// Planar side `L` with `N = L^2 w`, when that is an integer.
    pub fn lattice_side(&self) -> Option<u64> {
        let l = (self.n / self.w as f64).sqrt().round();
        (l * l * self.w as f64 == self.n).then_some(l as u64)
    }

    /// Arrival rate of successful type-1 clones.
    pub fn clone_rate(&self) -> f64 {
        self.n * self.u1 * self.beta1 / (1.0 + self.beta1)
    }

    /// Successful type-2 rate per type-1 cell.
    pub fn hit_rate(&self) -> f64 {
        self.u2 * self.beta2 / (1.0 + self.beta2)
    }

    pub fn growth(&self) -> Result<CloneGrowth> {
        let c = c_w_asym(self.beta1, self.w)?.c;
        Ok(CloneGrowth::new(
            std::f64::consts::PI * self.w as f64 * c * c,
            self.n,
        ))
    }
}

/// Volume law `v(a) = min(N, g a^2)` with `g = pi w c_w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneGrowth {
    pub g: f64,
    pub cap: f64,
    /// Age at which the cap is reached.
    pub cap_age: f64,
}

impl CloneGrowth {
    pub fn new(g: f64, cap: f64) -> Self {
        CloneGrowth {
            g,
            cap,
            cap_age: (cap / g).sqrt(),
        }
    }

    pub fn volume(&self, age: f64) -> f64 {
        if age <= 0.0 {
            0.0
        } else {
            (self.g * age * age).min(self.cap)
        }
    }

    /// `int_0^age v`.
    pub fn integrated(&self, age: f64) -> f64 {
        if age <= 0.0 {
            0.0
        } else if age <= self.cap_age {
            self.g * age.powi(3) / 3.0
        } else {
            self.g * self.cap_age.powi(3) / 3.0 + self.cap * (age - self.cap_age)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneRecord {
    pub arrival_time: f64,
}

impl CloneRecord {
    pub fn volume(&self, growth: &CloneGrowth, t: f64) -> f64 {
        growth.volume(t - self.arrival_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitiationSample {
    pub sigma2: f64,
    /// Volume of the initiating clone at `sigma2`.
    pub local_field: f64,
    /// Successful type-1 clones present at `sigma2`.
    pub clone_count: usize,
    pub initiating_clone_age: f64,
}

/// Arrival times plus the next pending arrival, drawn lazily.
struct Arrivals {
    clones: Vec<CloneRecord>,
    next: f64,
    rate: f64,
}

impl Arrivals {
    fn new(rate: f64, stream: &mut EventStream) -> Self {
        Arrivals {
            clones: Vec::new(),
            next: stream.exp(rate),
            rate,
        }
    }

    fn admit_next(&mut self, stream: &mut EventStream) {
        self.clones.push(CloneRecord {
            arrival_time: self.next,
        });
        self.next += stream.exp(self.rate);
    }

    fn hazard(&self, growth: &CloneGrowth, k: f64, t: f64) -> f64 {
        k * self
            .clones
            .iter()
            .map(|c| growth.integrated(t - c.arrival_time))
            .sum::<f64>()
    }

    fn intensity(&self, growth: &CloneGrowth, k: f64, t: f64) -> f64 {
        k * self.clones.iter().map(|c| c.volume(growth, t)).sum::<f64>()
    }

    /// Picks the initiating clone with probability proportional to volume.
    fn finish(
        &self,
        growth: &CloneGrowth,
        sigma2: f64,
        stream: &mut EventStream,
    ) -> InitiationSample {
        let present: Vec<(f64, f64)> = self
            .clones
            .iter()
            .filter(|c| c.arrival_time < sigma2)
            .map(|c| (c.arrival_time, c.volume(growth, sigma2)))
            .collect();
        let total: f64 = present.iter().map(|p| p.1).sum();
        let mut u = stream.uniform() * total;
        let mut pick = present[present.len() - 1];
        for &p in &present {
            if u < p.1 {
                pick = p;
                break;
            }
            u -= p.1;
        }
        InitiationSample {
            sigma2,
            local_field: pick.1,
            clone_count: present.len(),
            initiating_clone_age: sigma2 - pick.0,
        }
    }
}

/// Draws one initiation by inverting the cumulative hazard against a unit
/// exponential drawn first. The hazard is a sum of cubic and linear pieces;
/// the root in the bracketing inter-arrival segment is found by safeguarded
/// Newton. Drawing the exponential first makes `sigma2` monotone in `u2`
/// under common random numbers.
pub fn sample_initiation(
    params: &TwoStepParams,
    stream: &mut EventStream,
) -> Result<InitiationSample> {
    params.validate()?;
    let growth = params.growth()?;
    let k = params.hit_rate();
    let target = stream.exp(1.0);
    let mut arr = Arrivals::new(params.clone_rate(), stream);
    arr.admit_next(stream);
    let mut lo = arr.clones[0].arrival_time;
    loop {
        let hi = arr.next;
        if arr.hazard(&growth, k, hi) >= target {
            let sigma2 = solve_hazard(&arr, &growth, k, target, lo, hi);
            return Ok(arr.finish(&growth, sigma2, stream));
        }
        lo = hi;
        arr.admit_next(stream);
    }
}

fn solve_hazard(
    arr: &Arrivals,
    growth: &CloneGrowth,
    k: f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = arr.hazard(growth, k, t) - target;
        if f == 0.0 {
            return t;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            break;
        }
        let d = arr.intensity(growth, k, t);
        let newton = if d > 0.0 { t - f / d } else { f64::NAN };
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    t
}

/// Independent oracle: thinning against the constant intensity at the end
/// of each window, with windows doubling in length.
pub fn sample_initiation_thinning(
    params: &TwoStepParams,
    stream: &mut EventStream,
) -> Result<InitiationSample> {
    params.validate()?;
    let growth = params.growth()?;
    let k = params.hit_rate();
    let mut arr = Arrivals::new(params.clone_rate(), stream);
    let mut a = 0.0;
    let mut len = 1.0 / params.clone_rate();
    loop {
        let b = a + len;
        while arr.next < b {
            arr.admit_next(stream);
        }
        // volumes grow with age, so the intensity at b dominates [a, b]
        let bound = arr.intensity(&growth, k, b);
        if bound > 0.0 {
            let mut t = a;
            loop {
                t += stream.exp(bound);
                if t >= b {
                    break;
                }
                if stream.uniform() * bound < arr.intensity(&growth, k, t) {
                    return Ok(arr.finish(&growth, t, stream));
                }
            }
        }
        a = b;
        len *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Inversion,
    Thinning,
}

/// Draws `reps` initiations; replicate `i` uses stream `i`.
pub fn draw_samples(
    params: &TwoStepParams,
    reps: usize,
    seed: u64,
    sampler: Sampler,
) -> Result<Vec<InitiationSample>> {
    params.validate()?;
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = EventStream::new(seed, i);
            match sampler {
                Sampler::Inversion => sample_initiation(params, &mut s),
                Sampler::Thinning => sample_initiation_thinning(params, &mut s),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Stats {
    pub params: TwoStepParams,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<QuantilePoint>,
    pub histogram: Histogram,
    #[serde(skip)]
    pub samples: Vec<InitiationSample>,
}

pub const SIGMA2_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

pub fn sigma2_stats(params: &TwoStepParams, reps: usize, seed: u64) -> Result<Sigma2Stats> {
    if reps == 0 {
        return Err(Error::Domain("reps must be at least 1".into()));
    }
    summarize(
        params,
        draw_samples(params, reps, seed, Sampler::Inversion)?,
    )
}

/// Summary statistics of an existing sample set.
pub fn summarize(params: &TwoStepParams, samples: Vec<InitiationSample>) -> Result<Sigma2Stats> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples to summarize".into()));
    }
    let reps = samples.len();
    let mut xs: Vec<f64> = samples.iter().map(|s| s.sigma2).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let histogram = Histogram::freedman_diaconis(&xs);
    xs.sort_by(f64::total_cmp);
    let quantiles = SIGMA2_QUANTILES
        .iter()
        .map(|&q| QuantilePoint {
            q,
            value: quantile_sorted(&xs, q),
        })
        .collect();
    Ok(Sigma2Stats {
        params: *params,
        reps,
        mean,
        sd,
        quantiles,
        histogram,
        samples,
    })
}

pub const SAMPLES_CSV_HEADER: &str = "rep,sigma2,local_field,clone_count,age";

pub fn write_samples_csv<W: Write>(
    samples: &[InitiationSample],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{SAMPLES_CSV_HEADER}")?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{}",
            s.sigma2, s.local_field, s.clone_count, s.initiating_clone_age
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHistogram {
    pub t: f64,
    pub dt: f64,
    pub draws: usize,
    pub accepted: usize,
    pub acceptance: f64,
    /// Fewer than the requested minimum of accepted draws.
    pub partial: bool,
    /// `min(N, pi w (c_w (t + dt))^2)`.
    pub support_bound: f64,
    pub mean_local_field: f64,
    pub histogram: Histogram,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Local field sizes over draws with `sigma2` in `[t - dt, t + dt]`.
pub fn field_hist_conditional(
    params: &TwoStepParams,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
    min_accepted: usize,
) -> Result<FieldHistogram> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "need t >= 0 and dt > 0, got t={t}, dt={dt}"
        )));
    }
    let samples = draw_samples(params, reps, seed, Sampler::Inversion)?;
    let support_bound = params.growth()?.volume(t + dt);
    let mut values = Vec::new();
    for s in samples.iter().filter(|s| (s.sigma2 - t).abs() <= dt) {
        if !(s.local_field > 0.0 && s.local_field <= support_bound * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "local field {} outside (0, {support_bound}] at sigma2 {}",
                s.local_field, s.sigma2
            )));
        }
        values.push(s.local_field);
    }
    let accepted = values.len();
    let mean_local_field = if accepted > 0 {
        values.iter().sum::<f64>() / accepted as f64
    } else {
        f64::NAN
    };
    Ok(FieldHistogram {
        t,
        dt,
        draws: reps,
        accepted,
        acceptance: accepted as f64 / reps.max(1) as f64,
        partial: accepted < min_accepted,
        support_bound,
        mean_local_field,
        histogram: Histogram::freedman_diaconis(&values),
        values,
    })
}

pub const HIST_CSV_HEADER: &str = "bin_lo,bin_hi,count,density";

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HIST_CSV_HEADER}")?;
    for b in &h.bins {
        writeln!(out, "{},{},{},{}", b.lo, b.hi, b.count, b.density)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SmallGamma,
    Intermediate,
    LargeGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub small_below: f64,
    pub large_above: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            small_below: 1.0,
            large_above: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub gamma: f64,
    pub regime: Regime,
    pub thresholds: RegimeThresholds,
    pub warning: Option<String>,
}

/// `Gamma = (N u1 beta1)^3 / (c_w(beta1)^2 u2 beta2)` and its regime.
pub fn regime_label(params: &TwoStepParams, thresholds: RegimeThresholds) -> Result<RegimeReport> {
    params.validate()?;
    let gamma = if params.beta1 == params.beta2 {
        gamma_metaparameter(params.n, params.u1, params.u2, params.beta1, params.w)?
    } else {
        let c = c_w_asym(params.beta1, params.w)?.c;
        (params.n * params.u1 * params.beta1).powi(3) / (c * c * params.u2 * params.beta2)
    };
    let regime = if gamma < thresholds.small_below {
        Regime::SmallGamma
    } else if gamma > thresholds.large_above {
        Regime::LargeGamma
    } else {
        Regime::Intermediate
    };
    let warning = (regime == Regime::LargeGamma).then(|| {
        "large Gamma: unsuccessful type-1 clones are ignored, so the disk approximation is least faithful here"
            .to_string()
    });
    Ok(RegimeReport {
        gamma,
        regime,
        thresholds,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_distance;

    #[test]
    fn growth_cap_and_integral() {
        let g = CloneGrowth::new(2.0, 50.0);
        assert_eq!(g.volume(0.0), 0.0);
        assert_eq!(g.volume(3.0), 18.0);
        assert_eq!(g.volume(10.0), 50.0);
        assert!((g.integrated(3.0) - 18.0).abs() < 1e-12);
        let at_cap = 2.0 * 5f64.powi(3) / 3.0;
        assert!((g.integrated(7.0) - (at_cap + 100.0)).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        assert!(TwoStepParams::new(1e6, 3, 0.01, 1e-6, 1e-5).is_ok());
        assert!(TwoStepParams::new(1e6, 3, 0.5, 1e-6, 1e-5).is_err());
        assert!(TwoStepParams::new(1e6, 3, 0.01, 0.0, 1e-5).is_err());
        assert!(TwoStepParams::new(2.0, 3, 0.01, 1e-6, 1e-5).is_err());
        assert_eq!(TwoStepParams::reference(1).lattice_side(), Some(1000));
        assert_eq!(TwoStepParams::reference(3).lattice_side(), None);
    }

    #[test]
    fn sample_invariants() {
        for w in 1..=5 {
            let p = TwoStepParams::reference(w);
            let g = p.growth().unwrap();
            for s in draw_samples(&p, 300, 11, Sampler::Inversion).unwrap() {
                assert!(s.clone_count >= 1);
                assert!(s.local_field > 0.0);
                assert!(s.local_field <= g.volume(s.sigma2) * (1.0 + 1e-12));
                assert!(s.initiating_clone_age > 0.0 && s.initiating_clone_age <= s.sigma2);
            }
        }
    }

    #[test]
    fn inversion_hits_target_hazard() {
        let p = TwoStepParams::reference(2);
        let growth = p.growth().unwrap();
        let k = p.hit_rate();
        for i in 0..50 {
            let mut s = EventStream::new(4, i);
            let target = s.exp(1.0);
            let mut arr = Arrivals::new(p.clone_rate(), &mut s);
            arr.admit_next(&mut s);
            while arr.hazard(&growth, k, arr.next) < target {
                arr.admit_next(&mut s);
            }
            let mut s2 = EventStream::new(4, i);
            let x = sample_initiation(&p, &mut s2).unwrap();
            let h = arr.hazard(&growth, k, x.sigma2);
            assert!(
                (h - target).abs() <= 1e-9 * target.max(1.0),
                "{h} vs {target}"
            );
        }
    }

    #[test]
    fn monotone_in_u2_with_common_numbers() {
        let base = TwoStepParams::reference(3);
        for i in 0..200 {
            let mut prev = f64::INFINITY;
            for u2 in [1e-6, 1e-5, 1e-4, 1e-2] {
                let p = TwoStepParams { u2, ..base };
                let s = sample_initiation(&p, &mut EventStream::new(8, i)).unwrap();
                assert!(s.sigma2 <= prev);
                prev = s.sigma2;
            }
        }
    }

    #[test]
    fn huge_u2_initiates_right_after_first_clone() {
        let p = TwoStepParams {
            u2: 1e12,
            ..TwoStepParams::reference(1)
        };
        for i in 0..20 {
            let mut s = EventStream::new(2, i);
            let x = sample_initiation(&p, &mut s).unwrap();
            let mut s = EventStream::new(2, i);
            s.exp(1.0);
            let first = s.exp(p.clone_rate());
            assert!(x.sigma2 > first && x.sigma2 - first < 0.01);
            assert_eq!(x.clone_count, 1);
            assert!(x.local_field < 1e-4);
        }
    }

    #[test]
    fn thinning_agrees_at_small_scale() {
        let p = TwoStepParams::reference(3);
        let a: Vec<f64> = draw_samples(&p, 2000, 1, Sampler::Inversion)
            .unwrap()
            .iter()
            .map(|s| s.sigma2)
            .collect();
        let b: Vec<f64> = draw_samples(&p, 2000, 2, Sampler::Thinning)
            .unwrap()
            .iter()
            .map(|s| s.sigma2)
            .collect();
        // two-sample KS critical value at alpha = 0.001 is about 0.062 here
        assert!(ks_distance(&a, &b) < 0.062);
    }

    #[test]
    fn stats_are_deterministic_and_ordered() {
        let p = TwoStepParams::reference(2);
        let a = sigma2_stats(&p, 500, 3).unwrap();
        let b = sigma2_stats(&p, 500, 3).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.quantiles, b.quantiles);
        assert!(a.quantiles.windows(2).all(|q| q[0].value <= q[1].value));
        assert_eq!(a.histogram.bins.iter().map(|b| b.count).sum::<u64>(), 500);
        assert!(sigma2_stats(&p, 0, 3).is_err());
    }

    #[test]
    fn regime_reference_and_scaling() {
        let r = regime_label(&TwoStepParams::reference(1), RegimeThresholds::default()).unwrap();
        assert!((r.gamma - 1465.8711977588555).abs() < 1e-8);
        assert_eq!(r.regime, Regime::LargeGamma);
        assert!(r.warning.is_some());
        let p2 = TwoStepParams {
            n: 2e6,
            ..TwoStepParams::reference(1)
        };
        let r2 = regime_label(&p2, RegimeThresholds::default()).unwrap();
        assert!((r2.gamma / r.gamma - 8.0).abs() < 1e-12);
        let small = TwoStepParams {
            n: 1e4,
            ..TwoStepParams::reference(1)
        };
        assert_eq!(
            regime_label(&small, RegimeThresholds::default())
                .unwrap()
                .regime,
            Regime::SmallGamma
        );
    }

    #[test]
    fn conditional_histogram_respects_support() {
        let p = TwoStepParams::reference(2);
        let h = field_hist_conditional(&p, 700.0, 50.0, 2000, 5, 100).unwrap();
        assert!(h.accepted > 0);
        assert!(h.values.iter().all(|&v| v <= h.support_bound));
        assert!((h.acceptance - h.accepted as f64 / 2000.0).abs() < 1e-15);
        assert!(field_hist_conditional(&p, 700.0, 0.0, 10, 5, 1).is_err());
        let tiny = field_hist_conditional(&p, 700.0, 1e-3, 50, 5, 10).unwrap();
        assert!(tiny.partial);
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        let s = InitiationSample {
            sigma2: 1.0,
            local_field: 2.0,
            clone_count: 1,
            initiating_clone_age: 0.5,
        };
        write_samples_csv(&[s], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rep,sigma2,local_field,clone_count,age\n0,1,2,1,0.5\n"
        );
    }
}
