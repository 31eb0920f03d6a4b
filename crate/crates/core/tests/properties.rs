use proptest::prelude::*;

use stacked_voter::asymptotics::{
    beta_max, c_w_asym, gamma_metaparameter, h_beta, t_w_of_N, t_w_of_V,
};
use stacked_voter::coupling::coupled_run;
use stacked_voter::dual::DualState;
use stacked_voter::lattice::{p_same_layer, ratio_f64};
use stacked_voter::oncogenesis::{sample_initiation, CloneGrowth, TwoStepParams};
use stacked_voter::voter::{BvmState, StopCondition};
use stacked_voter::walk::{lclt_exact, WalkPos, WalkSpec};
use stacked_voter::{EventStream, LatticeGeometry, Site, VerticalBc};

fn bc() -> impl Strategy<Value = VerticalBc> {
    prop_oneof![Just(VerticalBc::Periodic), Just(VerticalBc::Reflecting)]
}

fn site(w: u32) -> impl Strategy<Value = Site> {
    (-50i32..50, -50i32..50, 0..w).prop_map(|(x, y, z)| Site::new(x, y, z))
}

fn sites(g: LatticeGeometry, max: usize) -> impl Strategy<Value = Vec<Site>> {
    let l = g.window().unwrap() as i32;
    prop::collection::vec(
        (0..l, 0..l, 0..g.w()).prop_map(|(x, y, z)| Site::new(x, y, z)),
        1..max,
    )
}

proptest! {
    #[test]
    fn neighbor_relation_is_symmetric((w, bc, s) in (1u32..7, bc()).prop_flat_map(|(w, bc)| (Just(w), Just(bc), site(w)))) {
        let g = LatticeGeometry::new(w, bc, None).unwrap();
        for t in g.neighbors(&s).unwrap() {
            prop_assert!(g.neighbors(&t).unwrap().contains(&s));
        }
    }

    #[test]
    fn neighbor_counts((w, bc, s) in (1u32..7, bc()).prop_flat_map(|(w, bc)| (Just(w), Just(bc), site(w)))) {
        let g = LatticeGeometry::new(w, bc, None).unwrap();
        let n = g.neighbors(&s).unwrap().len();
        let expect = match (w, bc) {
            (1, _) => 4,
            (2, _) => 5,
            (_, VerticalBc::Periodic) => 6,
            (_, VerticalBc::Reflecting) if s.z == 0 || s.z == w - 1 => 5,
            _ => 6,
        };
        prop_assert_eq!(n, expect);
    }

    #[test]
    fn torus_neighbors_stay_in_window(l in 2u32..9, w in 1u32..5, bc in bc(), x in 0i32..9, y in 0i32..9) {
        let g = LatticeGeometry::torus(l, w, bc).unwrap();
        let s = g.wrap(Site::new(x, y, 0));
        for t in g.neighbors(&s).unwrap() {
            prop_assert!(g.validate(&t).is_ok());
            prop_assert!(g.neighbors(&t).unwrap().contains(&s));
        }
    }

    #[test]
    fn bookkeeping_survives_random_runs(beta in 0.0f64..1.0, w in 1u32..5, seed in any::<u64>()) {
        let g = LatticeGeometry::periodic(w).unwrap();
        let mut st = BvmState::singleton(g, beta).unwrap();
        let mut s = EventStream::new(seed, 0);
        let mut last = 0.0;
        for _ in 0..300 {
            let before = st.size();
            let Ok(e) = st.step(&mut s) else { break };
            prop_assert!(e.time >= last);
            last = e.time;
            prop_assert!(st.size().abs_diff(before) <= 1);
        }
        prop_assert_eq!(st.check_bookkeeping(), Ok(()));
    }

    #[test]
    fn coupling_is_additive_and_monotone(
        (g, a, b) in (3u32..8, 1u32..4).prop_map(|(l, w)| LatticeGeometry::torus(l, w, VerticalBc::Periodic).unwrap())
            .prop_flat_map(|g| (Just(g), sites(g, 10), sites(g, 10))),
        beta in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let ab: Vec<Site> = a.iter().chain(&b).copied().collect();
        let mut ok = true;
        coupled_run(g, beta, &[a, b, ab], &StopCondition::time_only(3.0), seed, |_, c| {
            let (xa, xb, xab) = (c.config(0), c.config(1), c.config(2));
            ok &= (0..xa.len()).all(|i| xab[i] == (xa[i] || xb[i]));
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn dual_keeps_one_particle_per_site(
        (g, a) in (3u32..8, 1u32..4).prop_map(|(l, w)| LatticeGeometry::torus(l, w, VerticalBc::Periodic).unwrap())
            .prop_flat_map(|g| (Just(g), sites(g, 12))),
        beta in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let mut st = DualState::new(g, beta, a).unwrap();
        let mut s = EventStream::new(seed, 0);
        for k in 1..=10 {
            st.run_to(k as f64 * 0.3, &mut s);
            prop_assert_eq!(st.check_occupancy(), Ok(()));
            for p in st.particles() {
                if let Some(parent) = p.parent {
                    prop_assert!(parent < p.id);
                }
            }
        }
    }

    #[test]
    fn same_layer_fraction_from_neighbors(w in 1u32..9) {
        let g = LatticeGeometry::periodic(w).unwrap();
        let n = g.neighbors(&Site::ORIGIN).unwrap();
        let same = n.iter().filter(|t| t.z == 0).count() as f64;
        prop_assert!((same / n.len() as f64 - ratio_f64(p_same_layer(w).unwrap())).abs() < 1e-15);
    }

    #[test]
    fn formulas_finite_and_positive(beta in 1e-9f64..=0.367_879_441_171_442_3, w in 1u32..9, n in 1.0f64..1e9) {
        let c = c_w_asym(beta, w).unwrap();
        prop_assert!(c.c.is_finite() && c.c > 0.0);
        prop_assert!((c.c - c.c_via_h).abs() <= 1e-14 * c.c);
        // N = (c t)^2 pi w at t = t_w(N)
        let t = t_w_of_N(n, beta, w).unwrap();
        let back = (c.c * t).powi(2) * std::f64::consts::PI * w as f64;
        prop_assert!(((back - n) / n).abs() < 1e-12);
        // integral of (c s)^2 pi w over [0, t] equals V at t = t_w(V)
        let tv = t_w_of_V(n, beta, w).unwrap();
        let vol = c.c * c.c * std::f64::consts::PI * w as f64 * tv.powi(3) / 3.0;
        prop_assert!(((vol - n) / n).abs() < 1e-12);
        prop_assert!(gamma_metaparameter(n, 1e-6, 1e-5, beta, w).unwrap() > 0.0);
    }

    #[test]
    fn h_decreasing(a in 1e-6f64..0.36, frac in 0.001f64..1.0) {
        let b = a + frac * (beta_max() - a);
        prop_assert!(h_beta(b).unwrap() < h_beta(a).unwrap());
    }

    #[test]
    fn c_increasing_in_w_from_two(beta in 1e-6f64..0.36, w in 2u32..12) {
        prop_assert!(c_w_asym(beta, w + 1).unwrap().c > c_w_asym(beta, w).unwrap().c);
    }

    #[test]
    fn clone_volume_monotone_and_capped(g in 1e-4f64..10.0, cap in 1.0f64..1e6, a in 0.0f64..1e4, da in 0.0f64..1e3) {
        let growth = CloneGrowth::new(g, cap);
        prop_assert_eq!(growth.volume(0.0), 0.0);
        prop_assert!(growth.volume(a) <= growth.volume(a + da));
        prop_assert!(growth.volume(a + da) <= cap);
        prop_assert!(growth.integrated(a) <= growth.integrated(a + da));
    }

    #[test]
    fn initiation_sample_respects_support(w in 1u32..6, seed in any::<u64>()) {
        let p = TwoStepParams::reference(w);
        let s = sample_initiation(&p, &mut EventStream::new(seed, 0)).unwrap();
        let c = c_w_asym(p.beta1, w).unwrap().c;
        let bound = (std::f64::consts::PI * w as f64 * (c * s.sigma2).powi(2)).min(p.n);
        prop_assert!(s.local_field > 0.0 && s.local_field <= bound * (1.0 + 1e-12));
        prop_assert!(s.clone_count >= 1);
        prop_assert!(s.initiating_clone_age <= s.sigma2);
    }

    #[test]
    fn larger_u2_never_delays_initiation(w in 1u32..6, seed in any::<u64>(), factor in 1.0f64..100.0) {
        let p = TwoStepParams::reference(w);
        let q = TwoStepParams { u2: p.u2 * factor, ..p };
        let a = sample_initiation(&p, &mut EventStream::new(seed, 0)).unwrap();
        let b = sample_initiation(&q, &mut EventStream::new(seed, 0)).unwrap();
        prop_assert!(b.sigma2 <= a.sigma2 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exact_walk_law_is_symmetric(w in 2u32..5, t in 0.5f64..4.0, x in 0i64..4, y in 0i64..4, z in 0u32..4) {
        let spec = WalkSpec::new(2, w, 1.0, false).unwrap();
        let e = lclt_exact(&spec, t, 16).unwrap();
        prop_assert!((e.total_mass() - 1.0).abs() <= e.leak + 1e-12);
        let z = z % w;
        let p = e.prob(&WalkPos { planar: [x, y], z });
        for q in [[-x, y], [x, -y], [-x, -y], [y, x]] {
            let pq = e.prob(&WalkPos { planar: q, z });
            prop_assert!((pq - p).abs() < 1e-15);
        }
        // layer shift and reflection under periodic layers
        let pr = e.prob(&WalkPos { planar: [x, y], z: (w - z) % w });
        prop_assert!((pr - p).abs() < 1e-15);
    }
}
