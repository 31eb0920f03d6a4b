//! Geometry of `Z² × Z_w`: sites, neighborhoods, and the structural
//! constants derived from the neighborhood shape.
//!
//! Neighbor order is fixed as `+e1, -e1, +e2, -e2`, then the vertical
//! neighbors (`+e3` before `-e3`). Seeded runs depend on this order.
//!
//! For `w = 2` the moves `+e3` and `-e3` land on the same site. That site is
//! listed once, so a dividing cell picks it with probability 1/5 and the
//! same-layer probability is 4/5.

use arrayvec::ArrayVec;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z² × Z_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
    pub z: u32,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0, z: 0 };

    pub const fn new(x: i32, y: i32, z: u32) -> Self {
        Site { x, y, z }
    }

    /// L1 distance in the plane, ignoring the layer.
    pub fn planar_l1(&self) -> u64 {
        self.x.unsigned_abs() as u64 + self.y.unsigned_abs() as u64
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// How the top and bottom layers connect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalBc {
    /// Top and bottom layers are neighbors (`Z_w`).
    Periodic,
    /// Top and bottom layers only see the adjacent interior layer.
    Reflecting,
}

impl std::str::FromStr for VerticalBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "p" => Ok(VerticalBc::Periodic),
            "reflecting" | "r" => Ok(VerticalBc::Reflecting),
            other => Err(Error::Domain(format!(
                "unknown boundary condition '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for VerticalBc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerticalBc::Periodic => f.write_str("periodic"),
            VerticalBc::Reflecting => f.write_str("reflecting"),
        }
    }
}

/// At most six neighbors in `Z² × Z_w`.
pub type Neighbors = ArrayVec<Site, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    w: u32,
    vertical_bc: VerticalBc,
    /// Side of the planar torus window; `None` is the unbounded plane.
    window: Option<u32>,
}

impl LatticeGeometry {
    pub fn new(w: u32, vertical_bc: VerticalBc, window: Option<u32>) -> Result<Self> {
        if w < 1 {
            return Err(Error::Domain("layer count w must be at least 1".into()));
        }
        if window == Some(0) {
            return Err(Error::Domain("torus window side must be at least 1".into()));
        }
        Ok(LatticeGeometry {
            w,
            vertical_bc,
            window,
        })
    }

    /// Unbounded plane with periodic layers.
    pub fn periodic(w: u32) -> Result<Self> {
        Self::new(w, VerticalBc::Periodic, None)
    }

    pub fn torus(side: u32, w: u32, vertical_bc: VerticalBc) -> Result<Self> {
        Self::new(w, vertical_bc, Some(side))
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn vertical_bc(&self) -> VerticalBc {
        self.vertical_bc
    }

    pub fn window(&self) -> Option<u32> {
        self.window
    }

    pub fn is_finite(&self) -> bool {
        self.window.is_some()
    }

    /// Number of sites in a finite window.
    pub fn site_count(&self) -> Option<usize> {
        self.window
            .map(|l| (l as usize) * (l as usize) * self.w as usize)
    }

    pub fn validate(&self, s: &Site) -> Result<()> {
        if s.z >= self.w {
            return Err(Error::Domain(format!(
                "layer index {} outside [0, {})",
                s.z, self.w
            )));
        }
        if let Some(l) = self.window {
            let l = l as i32;
            if !(0..l).contains(&s.x) || !(0..l).contains(&s.y) {
                return Err(Error::Domain(format!(
                    "site {s} outside the {l}x{l} window"
                )));
            }
        }
        Ok(())
    }

    /// Reduces planar coordinates into the window (identity on the plane).
    pub fn wrap(&self, s: Site) -> Site {
        match self.window {
            Some(l) => {
                let l = l as i32;
                Site {
                    x: s.x.rem_euclid(l),
                    y: s.y.rem_euclid(l),
                    z: s.z,
                }
            }
            None => s,
        }
    }

    /// `|x|` measured from the origin, wrapping around a torus window.
    #[inline]
    pub fn abs_x(&self, s: &Site) -> i32 {
        match self.window {
            Some(l) => {
                let x = s.x.rem_euclid(l as i32);
                x.min(l as i32 - x)
            }
            None => s.x.unsigned_abs().min(i32::MAX as u32) as i32,
        }
    }

    /// Checked neighbor list.
    pub fn neighbors(&self, s: &Site) -> Result<Neighbors> {
        self.validate(s)?;
        Ok(self.neighbors_of(s))
    }

    /// Neighbor list without validating `s`.
    #[inline]
    pub fn neighbors_of(&self, s: &Site) -> Neighbors {
        let mut out = Neighbors::new();
        let push = |t: Site, out: &mut Neighbors| {
            if t != *s && !out.contains(&t) {
                out.push(t);
            }
        };
        push(
            self.wrap(Site {
                x: s.x.wrapping_add(1),
                ..*s
            }),
            &mut out,
        );
        push(
            self.wrap(Site {
                x: s.x.wrapping_sub(1),
                ..*s
            }),
            &mut out,
        );
        push(
            self.wrap(Site {
                y: s.y.wrapping_add(1),
                ..*s
            }),
            &mut out,
        );
        push(
            self.wrap(Site {
                y: s.y.wrapping_sub(1),
                ..*s
            }),
            &mut out,
        );
        let w = self.w;
        if w > 1 {
            match self.vertical_bc {
                VerticalBc::Periodic => {
                    push(
                        Site {
                            z: (s.z + 1) % w,
                            ..*s
                        },
                        &mut out,
                    );
                    push(
                        Site {
                            z: (s.z + w - 1) % w,
                            ..*s
                        },
                        &mut out,
                    );
                }
                VerticalBc::Reflecting => {
                    if s.z + 1 < w {
                        push(Site { z: s.z + 1, ..*s }, &mut out);
                    }
                    if s.z > 0 {
                        push(Site { z: s.z - 1, ..*s }, &mut out);
                    }
                }
            }
        }
        out
    }

    /// Neighborhood size of `s`.
    #[inline]
    pub fn degree(&self, s: &Site) -> usize {
        match self.window {
            Some(l) if l <= 2 => self.neighbors_of(s).len(),
            _ => 4 + self.vertical_degree(s.z),
        }
    }

    fn vertical_degree(&self, z: u32) -> usize {
        match (self.w, self.vertical_bc) {
            (1, _) => 0,
            (2, _) => 1,
            (_, VerticalBc::Periodic) => 2,
            (w, VerticalBc::Reflecting) => {
                if z == 0 || z + 1 == w {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Enumerates every site of a finite window in dense-index order.
    pub fn sites(&self) -> Option<impl Iterator<Item = Site> + '_> {
        let l = self.window? as i32;
        let w = self.w;
        Some(
            (0..w)
                .flat_map(move |z| (0..l).flat_map(move |y| (0..l).map(move |x| Site { x, y, z }))),
        )
    }

    /// Dense index of a site in a finite window, matching [`Self::sites`].
    #[inline]
    pub fn index(&self, s: &Site) -> Option<usize> {
        let l = self.window? as usize;
        Some((s.z as usize * l + s.y as usize) * l + s.x as usize)
    }
}

/// Probability that a dividing cell replaces a cell on its own layer.
pub fn p_same_layer(w: u32) -> Result<Ratio<u32>> {
    match w {
        0 => Err(Error::Domain("w must be at least 1".into())),
        1 => Ok(Ratio::new(1, 1)),
        2 => Ok(Ratio::new(4, 5)),
        _ => Ok(Ratio::new(2, 3)),
    }
}

/// Probability that the walk on `Z^d × Z_w` steps in a `Z^d` direction.
pub fn p_wd(d: u32, w: u32) -> Result<Ratio<u32>> {
    if d < 1 {
        return Err(Error::Domain("dimension d must be at least 1".into()));
    }
    match w {
        0 | 1 => Err(Error::Domain("p_wd requires w >= 2".into())),
        2 => Ok(Ratio::new(2 * d, 2 * d + 1)),
        _ => Ok(Ratio::new(d, d + 1)),
    }
}

/// `p_w * pi * w`. There is no canonical value for `w = 1`; `allow_w1`
/// returns `pi` (taking `p_1 = 1`).
pub fn mu_w(w: u32, allow_w1: bool) -> Result<f64> {
    match w {
        0 => Err(Error::Domain("w must be at least 1".into())),
        1 if !allow_w1 => Err(Error::Domain("mu_w is defined for w >= 2".into())),
        _ => Ok(ratio_f64(p_same_layer(w)?) * std::f64::consts::PI * w as f64),
    }
}

pub fn ratio_f64(r: Ratio<u32>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
