//! The dual branching-coalescing random walk and the duality cross-check
//! against the forward voter engine.
//!
//! Each particle jumps to a uniform neighbor at rate 1 and, at rate `beta`,
//! places a daughter on a uniform neighbor. A particle landing on an
//! occupied site coalesces with its occupant and the smaller id survives.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Site, VerticalBc};
use crate::stats::{two_proportion_z, Proportion};
use crate::stream::EventStream;
use crate::voter::{run_until, BvmState, StopCondition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub site: Site,
    /// `None` for the initial particles.
    pub parent: Option<u64>,
    pub birth_time: f64,
}

#[derive(Debug, Clone)]
pub struct DualState {
    geometry: LatticeGeometry,
    beta: f64,
    particles: Vec<Particle>,
    /// Site to index in `particles`.
    occupancy: FxHashMap<Site, usize>,
    next_id: u64,
    time: f64,
    coalescences: u64,
    births: u64,
}

impl DualState {
    pub fn new(
        geometry: LatticeGeometry,
        beta: f64,
        initial: impl IntoIterator<Item = Site>,
    ) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        let mut st = DualState {
            geometry,
            beta,
            particles: Vec::new(),
            occupancy: FxHashMap::default(),
            next_id: 0,
            time: 0.0,
            coalescences: 0,
            births: 0,
        };
        for s in initial {
            geometry.validate(&s)?;
            let id = st.next_id;
            st.next_id += 1;
            st.place(Particle {
                id,
                site: s,
                parent: None,
                birth_time: 0.0,
            });
        }
        Ok(st)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn coalescences(&self) -> u64 {
        self.coalescences
    }

    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.occupancy.contains_key(s)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> + '_ {
        self.particles.iter().map(|p| &p.site)
    }

    /// Puts `p` on its site, coalescing with any occupant.
    fn place(&mut self, mut p: Particle) {
        match self.occupancy.get(&p.site).copied() {
            None => {
                self.particles.push(p);
                self.occupancy.insert(p.site, self.particles.len() - 1);
            }
            Some(j) => {
                self.coalescences += 1;
                if p.id < self.particles[j].id {
                    p.site = self.particles[j].site;
                    self.particles[j] = p;
                }
            }
        }
    }

    fn remove(&mut self, i: usize) -> Particle {
        let p = self.particles.swap_remove(i);
        self.occupancy.remove(&p.site);
        if i < self.particles.len() {
            let moved = self.particles[i].site;
            self.occupancy.insert(moved, i);
        }
        p
    }

    /// Advances to time `horizon`.
    pub fn run_to(&mut self, horizon: f64, stream: &mut EventStream) {
        let total_per = 1.0 + self.beta;
        while !self.particles.is_empty() {
            let dt = stream.exp(self.particles.len() as f64 * total_per);
            if self.time + dt > horizon {
                break;
            }
            self.time += dt;
            let i = stream.below(self.particles.len());
            let from = self.particles[i].site;
            let nbrs = self.geometry.neighbors_of(&from);
            let to = nbrs[stream.below(nbrs.len())];
            if stream.uniform() * total_per < 1.0 {
                let mut p = self.remove(i);
                p.site = to;
                self.place(p);
            } else {
                let parent = self.particles[i].id;
                let id = self.next_id;
                self.next_id += 1;
                self.births += 1;
                self.place(Particle {
                    id,
                    site: to,
                    parent: Some(parent),
                    birth_time: self.time,
                });
            }
            debug_assert_eq!(self.occupancy.len(), self.particles.len());
        }
        self.time = self.time.max(horizon);
    }

    /// Checks that the occupancy map and the particle list agree.
    pub fn check_occupancy(&self) -> std::result::Result<(), String> {
        if self.occupancy.len() != self.particles.len() {
            return Err(format!(
                "{} sites for {} particles",
                self.occupancy.len(),
                self.particles.len()
            ));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if self.occupancy.get(&p.site) != Some(&i) {
                return Err(format!("particle {} at {} not indexed", p.id, p.site));
            }
            if let Some(par) = p.parent {
                if par >= p.id {
                    return Err(format!("parent {par} does not precede {}", p.id));
                }
            }
        }
        Ok(())
    }
}

/// Runs the dual from `initial` to time `horizon`.
pub fn dual_run(
    initial: &[Site],
    horizon: f64,
    beta: f64,
    geometry: LatticeGeometry,
    stream: &mut EventStream,
) -> Result<DualState> {
    let mut st = DualState::new(geometry, beta, initial.iter().copied())?;
    st.run_to(horizon, stream);
    Ok(st)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityResult {
    /// `P(xi_t^A ∩ B ≠ ∅)`.
    pub forward: Proportion,
    /// `P(dual_t^B ∩ A ≠ ∅)`.
    pub dual: Proportion,
    pub pooled_se: f64,
    pub z: f64,
}

/// Estimates both sides of the duality relation with independent streams
/// (even stream ids forward, odd ids dual).
pub fn duality_check(
    a: &[Site],
    b: &[Site],
    t: f64,
    beta: f64,
    geometry: LatticeGeometry,
    reps: usize,
    seed: u64,
) -> Result<DualityResult> {
    if !geometry.is_finite() {
        return Err(Error::Domain(
            "duality check needs a finite torus window".into(),
        ));
    }
    if geometry.vertical_bc() == VerticalBc::Reflecting && geometry.w() > 2 {
        return Err(Error::Domain(
            "the uniform-neighbor dual requires periodic layers".into(),
        ));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("A and B must be nonempty".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain("t must be >= 0".into()));
    }
    let stop = StopCondition::time_only(t);
    let fwd: Result<Vec<bool>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = BvmState::new(geometry, beta, a.iter().copied())?;
            let mut s = EventStream::new(seed, 2 * i);
            run_until(&mut st, &stop, &mut s)?;
            Ok(b.iter().any(|x| st.is_one(x)))
        })
        .collect();
    let dual: Result<Vec<bool>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = EventStream::new(seed, 2 * i + 1);
            let st = dual_run(b, t, beta, geometry, &mut s)?;
            Ok(a.iter().any(|x| st.contains(x)))
        })
        .collect();
    let count = |v: Vec<bool>| v.into_iter().filter(|&h| h).count() as u64;
    let forward = Proportion::new(count(fwd?), reps as u64);
    let dual = Proportion::new(count(dual?), reps as u64);
    let (pooled_se, z) = two_proportion_z(&forward, &dual);
    Ok(DualityResult {
        forward,
        dual,
        pooled_se,
        z,
    })
}
