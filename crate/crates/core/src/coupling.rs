//! Graphical construction on a finite window: one stream of arrows drives
//! several initial configurations at once.
//!
//! Arrows `x -> y` come in two kinds, per ordered neighbor pair:
//! *basic* at rate `1/|N(x)|` (y copies x) and *selective* at rate
//! `beta/|N(x)|` (y becomes type 1 if x is type 1). Configurations driven by
//! the same arrows are additively coupled.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Site};
use crate::stream::EventStream;
use crate::voter::StopCondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrowKind {
    Basic,
    Selective,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrow {
    pub from: Site,
    pub to: Site,
    pub kind: ArrowKind,
    pub time: f64,
}

/// Dense type-1 indicator per tracked configuration.
#[derive(Debug, Clone)]
pub struct CoupledConfigs {
    geometry: LatticeGeometry,
    sites: Vec<Site>,
    configs: Vec<Vec<bool>>,
}

impl CoupledConfigs {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, k: usize) -> &[bool] {
        &self.configs[k]
    }

    pub fn set_of(&self, k: usize) -> BTreeSet<Site> {
        self.configs[k]
            .iter()
            .zip(&self.sites)
            .filter(|(o, _)| **o)
            .map(|(_, s)| *s)
            .collect()
    }

    pub fn size(&self, k: usize) -> usize {
        self.configs[k].iter().filter(|o| **o).count()
    }

    fn reached(&self, stop: &StopCondition) -> bool {
        let all_extinct = (0..self.len()).all(|k| self.size(k) == 0);
        if stop.extinct && all_extinct {
            return true;
        }
        if let Some(m) = stop.size {
            if (0..self.len()).any(|k| self.size(k) >= m) {
                return true;
            }
        }
        if let Some(r) = stop.plane {
            let hit = self.configs.iter().any(|c| {
                c.iter()
                    .zip(&self.sites)
                    .any(|(o, s)| *o && self.geometry.abs_x(s) >= r)
            });
            if hit {
                return true;
            }
        }
        false
    }
}

/// Drives every configuration in `initials` with one arrow stream until
/// `stop` holds. `observe` sees each arrow and the configurations after it.
pub fn coupled_run(
    geometry: LatticeGeometry,
    beta: f64,
    initials: &[Vec<Site>],
    stop: &StopCondition,
    seed: u64,
    mut observe: impl FnMut(&Arrow, &CoupledConfigs),
) -> Result<CoupledConfigs> {
    let n_sites = geometry
        .site_count()
        .ok_or_else(|| Error::Domain("shared arrow streams need a finite window".into()))?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    stop.validate(&geometry)?;
    let sites: Vec<Site> = geometry.sites().expect("finite").collect();
    let mut configs = vec![vec![false; n_sites]; initials.len()];
    for (k, init) in initials.iter().enumerate() {
        for s in init {
            geometry.validate(s)?;
            configs[k][geometry.index(s).expect("finite")] = true;
        }
    }
    let mut state = CoupledConfigs {
        geometry,
        sites,
        configs,
    };
    let horizon = stop.time.unwrap_or(f64::INFINITY);
    let rate = n_sites as f64 * (1.0 + beta);
    let mut stream = EventStream::new(seed, 0);
    let mut t = 0.0;
    while !state.reached(stop) {
        t += stream.exp(rate);
        if t > horizon {
            break;
        }
        let from = state.sites[stream.below(n_sites)];
        let nbrs = geometry.neighbors_of(&from);
        let to = nbrs[stream.below(nbrs.len())];
        let kind = if stream.uniform() * (1.0 + beta) < 1.0 {
            ArrowKind::Basic
        } else {
            ArrowKind::Selective
        };
        let (fi, ti) = (geometry.index(&from).unwrap(), geometry.index(&to).unwrap());
        for c in &mut state.configs {
            match kind {
                ArrowKind::Basic => c[ti] = c[fi],
                ArrowKind::Selective => {
                    if c[fi] {
                        c[ti] = true;
                    }
                }
            }
        }
        observe(
            &Arrow {
                from,
                to,
                kind,
                time: t,
            },
            &state,
        );
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::VerticalBc;

    #[test]
    fn identical_initials_stay_identical() {
        let g = LatticeGeometry::torus(8, 3, VerticalBc::Periodic).unwrap();
        let a = vec![Site::new(1, 1, 0), Site::new(2, 1, 0)];
        let out = coupled_run(
            g,
            0.3,
            &[a.clone(), a],
            &StopCondition::time_only(10.0),
            4,
            |_, c| {
                assert_eq!(c.config(0), c.config(1));
            },
        )
        .unwrap();
        assert_eq!(out.set_of(0), out.set_of(1));
    }

    #[test]
    fn additivity_and_monotonicity_small() {
        let g = LatticeGeometry::torus(6, 2, VerticalBc::Reflecting).unwrap();
        let a = vec![Site::new(0, 0, 0)];
        let b = vec![Site::new(3, 3, 1), Site::new(3, 4, 1)];
        let ab: Vec<Site> = a.iter().chain(&b).copied().collect();
        let mut arrows = 0;
        coupled_run(
            g,
            0.4,
            &[a, b, ab],
            &StopCondition::time_only(15.0),
            9,
            |_, c| {
                arrows += 1;
                for i in 0..c.config(0).len() {
                    assert_eq!(c.config(2)[i], c.config(0)[i] || c.config(1)[i]);
                    assert!(!c.config(0)[i] || c.config(2)[i]);
                }
            },
        )
        .unwrap();
        assert!(arrows > 100);
    }

    #[test]
    fn infinite_window_rejected() {
        let g = LatticeGeometry::periodic(3).unwrap();
        assert!(coupled_run(
            g,
            0.1,
            &[vec![]],
            &StopCondition::time_only(1.0),
            1,
            |_, _| {}
        )
        .is_err());
    }
}
