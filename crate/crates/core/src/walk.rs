//! Continuous-time simple symmetric random walks on `Z^d × Z_w` (periodic
//! layers, `d ∈ {1, 2}`), and the experiments built on them: the return-time
//! tail, the classification of dual branching events, and the local central
//! limit theorem together with its exact uniformization oracle.
//!
//! Long excursions are simulated in blocks. From planar L1 distance `D >= 2`
//! the walk cannot reach the origin within `D - 1` steps, so those steps are
//! drawn at once: the split between planar and vertical steps, the split
//! between axes, and each axis displacement are binomial, and the block
//! duration is `Gamma(D - 1, rate)`. The resulting path law at block ends is
//! exact.

use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::tau_beta;
use crate::error::{Error, Result};
use crate::lattice::{mu_w, p_wd, ratio_f64};
use crate::stats::Proportion;
use crate::stream::EventStream;

/// Jump law of the walk on `Z^d × Z_w` with periodic layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub d: u32,
    pub w: u32,
    /// Jump rate.
    pub rate: f64,
    /// Probability that a step is planar.
    pub p_planar: f64,
}

impl WalkSpec {
    /// `w = 1` is accepted only with `allow_w1` (no vertical component).
    pub fn new(d: u32, w: u32, rate: f64, allow_w1: bool) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Domain(format!(
                "walks are implemented for d in {{1, 2}}, got {d}"
            )));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!(
                "jump rate must be positive, got {rate}"
            )));
        }
        let p_planar = match w {
            0 => return Err(Error::Domain("w must be at least 1".into())),
            1 if allow_w1 => 1.0,
            1 => {
                return Err(Error::Domain(
                    "w = 1 requires the explicit planar flag".into(),
                ))
            }
            _ => ratio_f64(p_wd(d, w)?),
        };
        Ok(WalkSpec {
            d,
            w,
            rate,
            p_planar,
        })
    }
}

/// Position of a walker: planar coordinates (unused second one when `d = 1`)
/// and layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WalkPos {
    pub planar: [i64; 2],
    pub z: u32,
}

impl WalkPos {
    pub fn is_origin(&self) -> bool {
        self.planar == [0, 0] && self.z == 0
    }

    fn planar_l1(&self) -> u64 {
        self.planar[0].unsigned_abs() + self.planar[1].unsigned_abs()
    }
}

fn binomial(n: u64, p: f64, stream: &mut EventStream) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p).expect("valid binomial").sample(stream)
}

/// Net displacement of `n` fair `±1` steps.
fn pm_sum(n: u64, stream: &mut EventStream) -> i64 {
    2 * binomial(n, 0.5, stream) as i64 - n as i64
}

impl WalkSpec {
    /// Uniformly chosen neighbor of the origin.
    pub fn random_neighbor_of_origin(&self, stream: &mut EventStream) -> WalkPos {
        let mut p = WalkPos::default();
        self.single_step(&mut p, stream);
        p
    }

    #[inline]
    pub fn single_step(&self, p: &mut WalkPos, stream: &mut EventStream) {
        let u = stream.uniform();
        if u < self.p_planar {
            let k = ((u / self.p_planar) * (2 * self.d) as f64) as usize;
            let k = k.min(2 * self.d as usize - 1);
            p.planar[k / 2] += if k.is_multiple_of(2) { 1 } else { -1 };
        } else if self.w == 2 {
            p.z ^= 1;
        } else if stream.bernoulli(0.5) {
            p.z = (p.z + 1) % self.w;
        } else {
            p.z = (p.z + self.w - 1) % self.w;
        }
    }

    /// Applies `k` steps at once, exactly in law.
    pub fn block(&self, p: &mut WalkPos, k: u64, stream: &mut EventStream) {
        let n_planar = if self.p_planar >= 1.0 {
            k
        } else {
            binomial(k, self.p_planar, stream)
        };
        if self.d == 1 {
            p.planar[0] += pm_sum(n_planar, stream);
        } else {
            let n_x = binomial(n_planar, 0.5, stream);
            p.planar[0] += pm_sum(n_x, stream);
            p.planar[1] += pm_sum(n_planar - n_x, stream);
        }
        let n_vert = k - n_planar;
        if n_vert > 0 {
            if self.w == 2 {
                p.z ^= (n_vert & 1) as u32;
            } else {
                let dz = pm_sum(n_vert, stream).rem_euclid(self.w as i64) as u32;
                p.z = (p.z + dz) % self.w;
            }
        }
    }

    /// Exact sample of the position at time `t` started from the origin.
    pub fn sample_at(&self, t: f64, stream: &mut EventStream) -> WalkPos {
        let mean = self.rate * t;
        let n = if mean > 0.0 {
            Poisson::new(mean).expect("valid mean").sample(stream) as u64
        } else {
            0
        };
        let mut p = WalkPos::default();
        self.block(&mut p, n, stream);
        p
    }

    /// First time the walk started at `start` visits the origin, or `None`
    /// if that time exceeds `t_max`.
    pub fn first_hit_origin(
        &self,
        start: WalkPos,
        t_max: f64,
        stream: &mut EventStream,
    ) -> Option<f64> {
        let mut p = start;
        if p.is_origin() {
            return Some(0.0);
        }
        let mut t = 0.0;
        loop {
            let dist = p.planar_l1();
            if dist >= 2 {
                let k = dist - 1;
                t += if k == 1 {
                    stream.exp(self.rate)
                } else {
                    Gamma::new(k as f64, 1.0 / self.rate)
                        .expect("valid gamma")
                        .sample(stream)
                };
                if t > t_max {
                    return None;
                }
                self.block(&mut p, k, stream);
            } else {
                t += stream.exp(self.rate);
                if t > t_max {
                    return None;
                }
                self.single_step(&mut p, stream);
                if p.is_origin() {
                    return Some(t);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub p_hat: f64,
    pub se: f64,
    /// `p_hat * log(rate * t) / mu_w`.
    pub r_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeTail {
    pub w: u32,
    pub rate: f64,
    pub reps: usize,
    pub points: Vec<TailPoint>,
    /// Replicates were cut to fit the event budget.
    pub truncated: bool,
}

impl ReturnTimeTail {
    pub fn csv(&self) -> String {
        let mut s = String::from("t,p_hat,se,r_t\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.t, p.p_hat, p.se, p.r_t));
        }
        s
    }
}

/// Default cap on `max(t_grid) * rate * reps`.
pub const DEFAULT_EVENT_BUDGET: f64 = 1e12;

/// Empirical survival function of the first visit to the origin for the
/// walk started at a uniform neighbor of the origin.
///
/// Walks are stopped at `max(t_grid)`; a censored walk counts toward
/// `T0 > t` for every grid point, which is exact.
pub fn return_time_tail(
    w: u32,
    rate: f64,
    t_grid: &[f64],
    reps: usize,
    seed: u64,
    event_budget: f64,
) -> Result<ReturnTimeTail> {
    let spec = WalkSpec::new(2, w, rate, false)?;
    let mu = mu_w(w, false)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain(
            "t_grid must be nonempty with positive times".into(),
        ));
    }
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let mut reps_run = reps;
    let mut truncated = false;
    if t_max * rate * reps as f64 > event_budget {
        reps_run = ((event_budget / (t_max * rate)) as usize).max(1).min(reps);
        truncated = true;
    }
    let hits: Vec<Option<f64>> = (0..reps_run as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = EventStream::new(seed, i);
            let start = spec.random_neighbor_of_origin(&mut s);
            spec.first_hit_origin(start, t_max, &mut s)
        })
        .collect();
    let mut sorted: Vec<f64> = hits
        .into_iter()
        .map(|h| h.unwrap_or(f64::INFINITY))
        .collect();
    sorted.sort_by(f64::total_cmp);
    let points = t_grid
        .iter()
        .map(|&t| {
            let survivors = sorted.len() - sorted.partition_point(|&x| x <= t);
            let prop = Proportion::new(survivors as u64, reps_run as u64);
            TailPoint {
                t,
                p_hat: prop.p_hat,
                se: prop.se,
                r_t: prop.p_hat * (rate * t).ln() / mu,
            }
        })
        .collect();
    Ok(ReturnTimeTail {
        w,
        rate,
        reps: reps_run,
        points,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchClassCounts {
    pub beta: f64,
    pub w: u32,
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
    pub alpha_hat: [f64; 3],
    pub tau_beta: f64,
}

impl BranchClassCounts {
    pub fn total(&self) -> u64 {
        self.n0 + self.n1 + self.n2
    }

    pub fn proportion(&self, k: usize) -> Proportion {
        let n = [self.n0, self.n1, self.n2][k];
        Proportion::new(n, self.total())
    }

    pub const CSV_HEADER: &'static str = "beta,w,n0,n1,n2,alpha0,alpha1,alpha2,tau_beta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.beta,
            self.w,
            self.n0,
            self.n1,
            self.n2,
            self.alpha_hat[0],
            self.alpha_hat[1],
            self.alpha_hat[2],
            self.tau_beta
        )
    }
}

/// Classifies branching events of the dual by racing the meeting time `T0`
/// of parent and daughter against the daughter's first branching time
/// `S ~ Exp(beta)` and the horizon `tau(beta)`.
///
/// Parent and daughter each jump at rate `alpha`; their difference is a
/// walk with rate `2 alpha` started at a uniform neighbor of the origin.
pub fn classify_branch_events(
    beta: f64,
    w: u32,
    reps: usize,
    seed: u64,
    alpha: f64,
) -> Result<BranchClassCounts> {
    let tau = tau_beta(beta)?;
    let spec = WalkSpec::new(2, w, 2.0 * alpha, false)?;
    let classes: Vec<u8> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = EventStream::new(seed, i);
            let branch = s.exp(beta);
            let start = spec.random_neighbor_of_origin(&mut s);
            match spec.first_hit_origin(start, branch.min(tau), &mut s) {
                Some(_) => 0,
                None if branch <= tau => 1,
                None => 2,
            }
        })
        .collect();
    let mut n = [0u64; 3];
    for c in classes {
        n[c as usize] += 1;
    }
    let total = reps.max(1) as f64;
    Ok(BranchClassCounts {
        beta,
        w,
        n0: n[0],
        n1: n[1],
        n2: n[2],
        alpha_hat: [
            n[0] as f64 / total,
            n[1] as f64 / total,
            n[2] as f64 / total,
        ],
        tau_beta: tau,
    })
}

/// `lim (alpha t)^(d/2) P(Z_t = x)`.
pub fn lclt_limit(d: u32, w: u32, allow_w1: bool) -> Result<f64> {
    let spec = WalkSpec::new(d, w, 1.0, allow_w1)?;
    let d = d as f64;
    Ok((d / (2.0 * std::f64::consts::PI * spec.p_planar)).powf(d / 2.0) / w as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltEstimate {
    /// `(alpha t)^(d/2) * P_hat(Z_t = x)`.
    pub scaled: f64,
    pub scaled_se: f64,
    pub p_hat: Proportion,
    pub limit: f64,
}

/// Monte Carlo point-mass estimate at `x`, scaled as in the local CLT.
pub fn lclt_estimate(
    spec: &WalkSpec,
    t: f64,
    x: WalkPos,
    reps: usize,
    seed: u64,
) -> Result<LcltEstimate> {
    if !(t > 0.0) {
        return Err(Error::Domain("t must be positive".into()));
    }
    let chunks = 256u64;
    let per = reps as u64 / chunks;
    let extra = reps as u64 % chunks;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = per + u64::from(c < extra);
            let mut s = EventStream::new(seed, c);
            (0..n).filter(|_| spec.sample_at(t, &mut s) == x).count() as u64
        })
        .sum();
    let p_hat = Proportion::new(hits, reps as u64);
    let scale = (spec.rate * t).powf(spec.d as f64 / 2.0);
    Ok(LcltEstimate {
        scaled: scale * p_hat.p_hat,
        scaled_se: scale * p_hat.se,
        p_hat,
        limit: lclt_limit(spec.d, spec.w, spec.w == 1)?,
    })
}

/// Exact law of the walk at time `t` on the box `[-R, R]^d × Z_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub d: u32,
    pub w: u32,
    pub radius: i64,
    probs: Vec<f64>,
    /// Upper bound on probability mass not represented in `probs`.
    pub leak: f64,
}

impl ExactDistribution {
    fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    fn index(&self, p: &WalkPos) -> Option<usize> {
        let r = self.radius;
        let side = self.side();
        let mut idx = p.z as usize;
        for k in 0..self.d as usize {
            let c = p.planar[k];
            if c < -r || c > r {
                return None;
            }
            idx = idx * side + (c + r) as usize;
        }
        if self.d == 1 && p.planar[1] != 0 {
            return None;
        }
        Some(idx)
    }

    pub fn prob(&self, p: &WalkPos) -> f64 {
        if p.z >= self.w {
            return 0.0;
        }
        self.index(p).map_or(0.0, |i| self.probs[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Maximum tolerated unrepresented mass of [`lclt_exact`].
pub const EXACT_LEAK_BOUND: f64 = 1e-12;

/// Uniformization: `P(Z_t = x) = sum_n Pois(n; alpha t) K^n(0, x)`, with
/// `K^n` from iterated convolution on the truncated box.
pub fn lclt_exact(spec: &WalkSpec, t: f64, radius: i64) -> Result<ExactDistribution> {
    if !(t >= 0.0) {
        return Err(Error::Domain("t must be >= 0".into()));
    }
    let mean = spec.rate * t;
    if (radius as f64) < 6.0 * mean.sqrt() || radius < 1 {
        return Err(Error::Domain(format!(
            "truncation radius {radius} below 6 sqrt(alpha t) = {:.3}",
            6.0 * mean.sqrt()
        )));
    }
    let d = spec.d as usize;
    let w = spec.w as usize;
    let side = 2 * radius as usize + 1;
    let plane = side.pow(d as u32);
    let len = plane * w;
    let mut cur = vec![0.0f64; len];
    let origin = {
        let c = radius as usize;
        if d == 1 {
            c
        } else {
            c * side + c
        }
    };
    cur[origin] = 1.0;
    let mut acc = vec![0.0f64; len];
    let mut next = vec![0.0f64; len];

    let p_axis = spec.p_planar / (2 * d) as f64;
    let p_vert = 1.0 - spec.p_planar;
    let stride = |k: usize| if d == 2 && k == 0 { side } else { 1 };

    // Poisson weights in log space
    let ln_mean = mean.ln();
    let mut n: u64 = 0;
    let mut weight_sum = 0.0;
    let mut dropped = 0.0;
    loop {
        let ln_w = if mean == 0.0 {
            if n == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -mean + n as f64 * ln_mean - ln_factorial(n)
        };
        let wt = ln_w.exp();
        weight_sum += wt;
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += wt * c;
        }
        let tail = (1.0 - weight_sum).max(0.0);
        let saturated = n as f64 > mean + 40.0 * mean.sqrt() + 50.0;
        if (n as f64 > mean && tail < 1e-16) || saturated || mean == 0.0 {
            dropped += tail;
            break;
        }
        // one convolution step
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut lost = 0.0;
        for z in 0..w {
            for cell in 0..plane {
                let m = cur[z * plane + cell];
                if m == 0.0 {
                    continue;
                }
                // planar moves
                for k in 0..d {
                    let s = stride(k);
                    let coord = (cell / s) % side;
                    let base = z * plane;
                    if coord + 1 < side {
                        next[base + cell + s] += m * p_axis;
                    } else {
                        lost += m * p_axis;
                    }
                    if coord > 0 {
                        next[base + cell - s] += m * p_axis;
                    } else {
                        lost += m * p_axis;
                    }
                }
                if w == 2 {
                    next[(1 - z) * plane + cell] += m * p_vert;
                } else if w > 2 {
                    next[((z + 1) % w) * plane + cell] += m * p_vert / 2.0;
                    next[((z + w - 1) % w) * plane + cell] += m * p_vert / 2.0;
                }
            }
        }
        // mass lost at step n+1 matters with weight P(N >= n+1)
        dropped += lost * tail;
        std::mem::swap(&mut cur, &mut next);
        n += 1;
    }
    if dropped > EXACT_LEAK_BOUND {
        return Err(Error::Domain(format!(
            "truncation radius {radius} leaks {dropped:.3e} > {EXACT_LEAK_BOUND:e}"
        )));
    }
    Ok(ExactDistribution {
        d: spec.d,
        w: spec.w,
        radius,
        probs: acc,
        leak: dropped,
    })
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_matches_single_steps_in_law() {
        // compare mean squared displacement and layer distribution after 7 steps
        let spec = WalkSpec::new(2, 3, 1.0, false).unwrap();
        let n = 100_000;
        let (mut a2, mut b2) = (0.0, 0.0);
        let (mut az, mut bz) = ([0u64; 3], [0u64; 3]);
        let mut s = EventStream::new(4, 0);
        for _ in 0..n {
            let mut p = WalkPos::default();
            for _ in 0..7 {
                spec.single_step(&mut p, &mut s);
            }
            a2 += (p.planar[0] * p.planar[0]) as f64;
            az[p.z as usize] += 1;
            let mut q = WalkPos::default();
            spec.block(&mut q, 7, &mut s);
            b2 += (q.planar[0] * q.planar[0]) as f64;
            bz[q.z as usize] += 1;
        }
        // E[x^2] = 7 * p_planar / 2 = 7/3
        assert!((a2 / n as f64 - 7.0 / 3.0).abs() < 0.05);
        assert!((b2 / n as f64 - 7.0 / 3.0).abs() < 0.05);
        for z in 0..3 {
            assert!((az[z] as f64 - bz[z] as f64).abs() < 5.0 * (n as f64 / 3.0).sqrt());
        }
    }

    #[test]
    fn w1_needs_flag() {
        assert!(WalkSpec::new(2, 1, 1.0, false).is_err());
        assert!(WalkSpec::new(3, 3, 1.0, false).is_err());
        assert!((lclt_limit(2, 1, true).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!(
            (lclt_limit(2, 3, false).unwrap() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15
        );
    }

    #[test]
    fn exact_point_mass_at_zero_time() {
        let spec = WalkSpec::new(2, 2, 1.0, false).unwrap();
        let e = lclt_exact(&spec, 0.0, 1).unwrap();
        assert_eq!(e.prob(&WalkPos::default()), 1.0);
        assert_eq!(e.total_mass(), 1.0);
    }

    #[test]
    fn exact_mass_and_symmetry() {
        for (d, w) in [(2, 2), (2, 3), (1, 4), (2, 5)] {
            let spec = WalkSpec::new(d, w, 1.0, false).unwrap();
            let e = lclt_exact(&spec, 8.0, 20).unwrap();
            assert!(e.leak <= EXACT_LEAK_BOUND);
            assert!(
                (e.total_mass() + e.leak - 1.0).abs() < 1e-12,
                "mass {}",
                e.total_mass()
            );
            assert!(e.total_mass() >= 1.0 - 1e-12);
            let y_max = if d == 2 { 3 } else { 0 };
            for x in -3i64..=3 {
                for y in -y_max..=y_max {
                    for z in 0..w {
                        let p = e.prob(&WalkPos { planar: [x, y], z });
                        assert!((p - e.prob(&WalkPos { planar: [-x, y], z })).abs() < 1e-15);
                        assert!((p - e.prob(&WalkPos { planar: [x, -y], z })).abs() < 1e-15);
                        // layer shift: z -> w - z is a symmetry of the periodic layer walk
                        let zr = (w - z) % w;
                        assert!(
                            (p - e.prob(&WalkPos {
                                planar: [x, y],
                                z: zr
                            }))
                            .abs()
                                < 1e-15
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn exact_refuses_small_radius() {
        let spec = WalkSpec::new(2, 2, 1.0, false).unwrap();
        assert!(lclt_exact(&spec, 8.0, 16).is_err());
    }

    #[test]
    fn exact_small_time_closed_form() {
        // P(Z_t = 0) for d = 1, w = 2 at small t, summed by hand over paths
        // of length <= 2: e^{-t} (1 + t^2/2 * P(two steps return))
        // two steps return: planar out-and-back (2/3 * 1/3) or vertical twice (1/9)
        let spec = WalkSpec::new(1, 2, 1.0, false).unwrap();
        let t: f64 = 1e-3;
        let e = lclt_exact(&spec, t, 4).unwrap();
        let two_back = 2.0 * (1.0 / 3.0) * (1.0 / 3.0) + (1.0 / 3.0) * (1.0 / 3.0);
        let expect = (-t).exp() * (1.0 + t * t / 2.0 * two_back);
        assert!((e.prob(&WalkPos::default()) - expect).abs() < 1e-9);
    }

    #[test]
    fn hitting_from_neighbor_with_small_horizon() {
        let spec = WalkSpec::new(2, 3, 2.0, false).unwrap();
        let mut s = EventStream::new(1, 1);
        let start = spec.random_neighbor_of_origin(&mut s);
        assert!(!start.is_origin());
        let l1 = start.planar_l1() + u64::from(start.z != 0);
        assert_eq!(l1, 1);
        assert_eq!(spec.first_hit_origin(start, 0.0, &mut s), None);
    }

    #[test]
    fn tail_is_nonincreasing() {
        let grid = [1.0, 10.0, 100.0, 1000.0];
        let tail = return_time_tail(3, 2.0, &grid, 4000, 9, DEFAULT_EVENT_BUDGET).unwrap();
        assert!(!tail.truncated);
        for w in tail.points.windows(2) {
            assert!(w[1].p_hat <= w[0].p_hat);
        }
        let cut = return_time_tail(3, 2.0, &grid, 4000, 9, 1000.0 * 2.0 * 100.0).unwrap();
        assert!(cut.truncated);
        assert_eq!(cut.reps, 100);
    }

    #[test]
    fn classification_is_exhaustive() {
        let c = classify_branch_events(0.1, 3, 5000, 3, 1.0).unwrap();
        assert_eq!(c.total(), 5000);
        assert!((c.alpha_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(classify_branch_events(0.5, 3, 10, 3, 1.0).is_err());
        assert!(classify_branch_events(0.0, 3, 10, 3, 1.0).is_err());
    }
}
