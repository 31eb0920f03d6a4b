//! Closed-form small-`beta` asymptotics: the clone radius `c_w(beta)`, the
//! times to reach a population size or a spacetime volume, and the
//! two-step initiation metaparameter `Gamma`.
//!
//! `log` is the natural logarithm throughout. The fitness domain is
//! `0 < beta <= 1/e`, where `log(1/beta) >= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{p_same_layer, ratio_f64};

/// `1/e`, the upper end of the fitness domain.
pub fn beta_max() -> f64 {
    (-1.0f64).exp()
}

/// Validated `(beta, w)` for the asymptotic formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    beta: f64,
    w: u32,
}

impl TheoryParams {
    pub fn new(beta: f64, w: u32) -> Result<Self> {
        check_beta(beta)?;
        if w < 1 {
            return Err(Error::Domain("w must be at least 1".into()));
        }
        Ok(TheoryParams { beta, w })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn p_w(&self) -> f64 {
        ratio_f64(p_same_layer(self.w).expect("validated w"))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= beta_max() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "beta must lie in (0, 1/e], got {beta}"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// `(1/beta) log(1/beta)`, for `beta` in `(0, 1)`.
pub fn h_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!(
            "h(beta) needs beta in (0, 1), got {beta}"
        )));
    }
    Ok(-beta.ln() / beta)
}

/// `(1/beta) / sqrt(log(1/beta))`, the decision-period horizon.
pub fn tau_beta(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 / (beta * (-beta.ln()).sqrt()))
}

/// `a_w = p_w sqrt(pi w)`.
pub fn a_w(w: u32) -> Result<f64> {
    Ok(ratio_f64(p_same_layer(w)?) * (std::f64::consts::PI * w as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwAsym {
    /// `p_w sqrt(pi w beta) / sqrt(log(1/beta))`.
    pub c: f64,
    pub a_w: f64,
    /// `a_w / sqrt(h(beta))`; agrees with `c` to rounding.
    pub c_via_h: f64,
}

/// Asymptotic clone radius per unit time.
pub fn c_w_asym(beta: f64, w: u32) -> Result<CwAsym> {
    let p = TheoryParams::new(beta, w)?;
    let c = p.p_w() * (std::f64::consts::PI * w as f64 * beta).sqrt() / (-beta.ln()).sqrt();
    let a = a_w(w)?;
    let c_via_h = a / h_beta(beta)?.sqrt();
    debug_assert!((c - c_via_h).abs() <= 8.0 * f64::EPSILON * c);
    Ok(CwAsym { c, a_w: a, c_via_h })
}

fn c(beta: f64, w: u32) -> Result<f64> {
    Ok(c_w_asym(beta, w)?.c)
}

/// Time for a disk stack growing at `c_w(beta)` to reach `n` cells.
#[allow(non_snake_case)]
pub fn t_w_of_N(n: f64, beta: f64, w: u32) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::Domain(format!("N must be >= 1, got {n}")));
    }
    let p = TheoryParams::new(beta, w)?;
    Ok(h_beta(beta)?.sqrt() * n.sqrt() / (p.p_w() * std::f64::consts::PI * w as f64))
}

/// Time for a disk stack growing at `c_w(beta)` to accumulate spacetime
/// volume `v`.
#[allow(non_snake_case)]
pub fn t_w_of_V(v: f64, beta: f64, w: u32) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("V must be >= 0, got {v}")));
    }
    let p = TheoryParams::new(beta, w)?;
    let pw_pi_w = p.p_w() * std::f64::consts::PI * w as f64;
    Ok(3f64.cbrt() * pw_pi_w.powf(-2.0 / 3.0) * h_beta(beta)?.cbrt() * v.cbrt())
}

/// Volume `pi w (c_w(beta) t)^2` of the disk stack at time `t`.
pub fn disk_volume(beta: f64, w: u32, t: f64) -> Result<f64> {
    let c = c(beta, w)?;
    Ok(std::f64::consts::PI * w as f64 * (c * t).powi(2))
}

/// Growth speedup `t_1(N) / t_w(N) = p_w w`.
pub fn growth_speedup(w: u32) -> Result<f64> {
    Ok(ratio_f64(p_same_layer(w)?) * w as f64)
}

/// Initiation speedup `t_1(V) / t_w(V) = (p_w w)^(2/3)`.
pub fn initiation_speedup(w: u32) -> Result<f64> {
    Ok(growth_speedup(w)?.powf(2.0 / 3.0))
}

/// `N^3 (u1 beta)^3 c_w(beta)^-2 (u2 beta)^-1`.
pub fn gamma_metaparameter(n: f64, u1: f64, u2: f64, beta: f64, w: u32) -> Result<f64> {
    check_positive("N", n)?;
    check_positive("u1", u1)?;
    check_positive("u2", u2)?;
    let c = c(beta, w)?;
    Ok((n * u1 * beta).powi(3) / (c * c * u2 * beta))
}

/// Names accepted by [`evaluate`].
pub const FORMULAS: &[&str] = &[
    "h",
    "tau",
    "a_w",
    "c_w",
    "t_w_N",
    "t_w_V",
    "gamma",
    "growth_speedup",
    "initiation_speedup",
];

/// Extra arguments for formulas that need more than `(beta, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaArgs {
    pub n: f64,
    pub v: f64,
    pub u1: f64,
    pub u2: f64,
}

impl Default for FormulaArgs {
    fn default() -> Self {
        FormulaArgs {
            n: 1e6,
            v: 1e9,
            u1: 1e-6,
            u2: 1e-5,
        }
    }
}

/// Evaluates a named formula, used by grid printers.
pub fn evaluate(name: &str, beta: f64, w: u32, args: &FormulaArgs) -> Result<f64> {
    match name {
        "h" => h_beta(beta),
        "tau" => tau_beta(beta),
        "a_w" => a_w(w),
        "c_w" => c(beta, w),
        "t_w_N" => t_w_of_N(args.n, beta, w),
        "t_w_V" => t_w_of_V(args.v, beta, w),
        "gamma" => gamma_metaparameter(args.n, args.u1, args.u2, beta, w),
        "growth_speedup" => growth_speedup(w),
        "initiation_speedup" => initiation_speedup(w),
        other => Err(Error::Domain(format!(
            "unknown formula '{other}' (known: {})",
            FORMULAS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Frozen from a 40-digit evaluation of the closed forms.
    const H_001: f64 = 460.517_018_598_809_14;
    const TAU_001: f64 = 46.599_060_178_465_61;
    const C1_001: f64 = 0.082_594_683_661_899_25;
    const C3_001: f64 = 0.095_372_125_691_659_03;
    const GAMMA_REF_W1: f64 = 1_465.871_197_758_855_5;

    #[test]
    fn h_values() {
        assert!(rel(h_beta(0.01).unwrap(), H_001) < 1e-12);
        assert!((h_beta(0.01).unwrap() - 460.517).abs() < 1e-3);
        assert!(rel(h_beta(beta_max()).unwrap(), std::f64::consts::E) < 1e-14);
        assert!(h_beta(0.0).is_err());
        assert!(h_beta(1.0).is_err());
    }

    #[test]
    fn h_decreasing_on_domain() {
        let grid: Vec<f64> = (1..=400).map(|k| beta_max() * k as f64 / 400.0).collect();
        for p in grid.windows(2) {
            assert!(h_beta(p[1]).unwrap() < h_beta(p[0]).unwrap());
        }
    }

    #[test]
    fn tau_values() {
        assert!(rel(tau_beta(0.01).unwrap(), TAU_001) < 1e-12);
        assert!(rel(tau_beta(beta_max()).unwrap(), std::f64::consts::E) < 1e-14);
        let mut last = f64::INFINITY;
        for k in 2..12 {
            let b = 10f64.powi(-k);
            let ratio = tau_beta(b).unwrap() / h_beta(b).unwrap();
            assert!(rel(ratio, (-b.ln()).powf(-1.5)) < 1e-12);
            let bt = b * tau_beta(b).unwrap();
            assert!(bt < last);
            last = bt;
        }
        assert!(tau_beta(0.5).is_err());
    }

    #[test]
    fn c_w_values() {
        let c1 = c_w_asym(0.01, 1).unwrap();
        assert!(rel(c1.c, C1_001) < 1e-12);
        assert!(rel(c1.c, c1.c_via_h) < 1e-14);
        assert!(rel(c_w_asym(0.01, 3).unwrap().c, C3_001) < 1e-12);
        let ratio = c_w_asym(0.01, 3).unwrap().c / c1.c;
        assert!(rel(ratio, 2.0 / 3.0 * 3f64.sqrt()) < 1e-14);
        assert!((ratio - 1.1547).abs() < 1e-4);
        // w = 1 reduces to sqrt(pi beta) / sqrt(log(1/beta))
        for b in [1e-4, 1e-3, 0.05] {
            let direct = (std::f64::consts::PI * b).sqrt() / (-f64::ln(b)).sqrt();
            assert!(rel(c_w_asym(b, 1).unwrap().c, direct) < 1e-14);
        }
    }

    #[test]
    fn c_w_ordering_in_w() {
        let b = 0.01;
        let c1 = c_w_asym(b, 1).unwrap().c;
        let c2 = c_w_asym(b, 2).unwrap().c;
        assert!(rel(c2 / c1, 0.8 * 2f64.sqrt()) < 1e-14);
        assert!(c2 > c1);
        for w in 2..20 {
            assert!(c_w_asym(b, w + 1).unwrap().c > c_w_asym(b, w).unwrap().c);
        }
    }

    #[test]
    fn time_to_size() {
        let b = 0.01;
        let n = 1e6;
        let t1 = t_w_of_N(n, b, 1).unwrap();
        assert!(rel(t1, 6_830.822_015_824_437) < 1e-12);
        assert!(rel(t1 / t_w_of_N(n, b, 3).unwrap(), 2.0) < 1e-12);
        let s5 = t1 / t_w_of_N(n, b, 5).unwrap();
        assert!(rel(s5, 10.0 / 3.0) < 1e-12);
        assert!(s5 > 3.0);
        for w in 1..6 {
            let t = t_w_of_N(n, b, w).unwrap();
            let back = disk_volume(b, w, t).unwrap();
            assert!(rel(back, n) < 1e-12);
        }
        assert!(t_w_of_N(0.5, b, 1).is_err());
    }

    #[test]
    fn time_to_spacetime_volume() {
        let b = 0.01;
        let v = 1e9;
        assert!(rel(t_w_of_V(v, b, 1).unwrap(), 5_192.251_628_693_085) < 1e-12);
        let ratio = t_w_of_V(v, b, 1).unwrap() / t_w_of_V(v, b, 5).unwrap();
        assert!(rel(ratio, (10.0f64 / 3.0).powf(2.0 / 3.0)) < 1e-12);
        assert!((ratio - 2.23).abs() < 0.005);
        assert_eq!(t_w_of_V(0.0, b, 3).unwrap(), 0.0);
        // Simpson quadrature of pi w (c s)^2 over [0, t] recovers V
        for w in 1..6 {
            let t = t_w_of_V(v, b, w).unwrap();
            let f = |s: f64| disk_volume(b, w, s).unwrap();
            let m = 1000;
            let hstep = t / m as f64;
            let mut acc = f(0.0) + f(t);
            for k in 1..m {
                acc += f(k as f64 * hstep) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            assert!(rel(acc * hstep / 3.0, v) < 1e-12, "w={w}");
        }
    }

    #[test]
    fn gamma_values() {
        let g1 = gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 1).unwrap();
        assert!(rel(g1, GAMMA_REF_W1) < 1e-12);
        assert!((g1 - 1465.7).abs() / 1465.7 < 1e-3);
        for w in 2..8 {
            let gw = gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, w).unwrap();
            let p = TheoryParams::new(0.01, w).unwrap().p_w();
            assert!(rel(gw / g1, 1.0 / (p * p * w as f64)) < 1e-12);
        }
        let half = gamma_metaparameter(1e6, 1e-6, 2e-5, 0.01, 3).unwrap();
        assert!(
            rel(
                half * 2.0,
                gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 3).unwrap()
            ) < 1e-14
        );
        let dbl = gamma_metaparameter(2e6, 1e-6, 1e-5, 0.01, 3).unwrap();
        assert!(
            rel(
                dbl,
                8.0 * gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 3).unwrap()
            ) < 1e-14
        );
        assert!(gamma_metaparameter(0.0, 1e-6, 1e-5, 0.01, 1).is_err());
    }

    #[test]
    fn gamma_tracks_beta_log_beta() {
        let g = |b: f64| gamma_metaparameter(1e6, 1e-6, 1e-5, b, 2).unwrap();
        for (b1, b2) in [(1e-4, 1e-3), (1e-6, 5e-4), (2e-5, 3e-5)] {
            let want = (b2 * -f64::ln(b2)) / (b1 * -f64::ln(b1));
            assert!(rel(g(b2) / g(b1), want) < 0.01);
        }
    }

    #[test]
    fn grid_values_finite_positive() {
        let args = FormulaArgs::default();
        for name in FORMULAS {
            for k in 1..50 {
                let b = beta_max() * k as f64 / 50.0;
                for w in 1..8 {
                    let v = evaluate(name, b, w, &args).unwrap();
                    assert!(v.is_finite() && v > 0.0, "{name} at beta={b}, w={w}");
                }
            }
        }
        assert!(evaluate("nope", 0.1, 1, &args).is_err());
    }
}
