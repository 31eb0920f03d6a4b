//! Event-driven simulation of the biased voter model.
//!
//! Type-0 cells divide at rate 1 and type-1 cells at rate `1 + beta`; the
//! daughter replaces a uniformly chosen neighbor. Only divisions across a
//! discordant edge change the configuration, so the engine keeps the set of
//! *active* sites (sites with at least one neighbor of the other type) and
//! draws events from that set by thinning:
//!
//! * pick an active site `x` uniformly and a neighbor `y` of `x` uniformly,
//!   at total proposal rate `|active| * (1 + beta)`;
//! * accept when `y` has the other type, with probability `rate(x) / (1 + beta)`.
//!
//! An ordered pair `(x, y)` then fires at rate `rate(x) / |N(x)|`, which is
//! the model's rate, and accepted events form the exact jump chain. Cost per
//! event is proportional to the neighborhood size, not the clone volume.

use std::io::Write;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Site};
use crate::stats::{MeanCi, Proportion};
use crate::stream::EventStream;

const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Cell {
    one: bool,
    /// Number of neighbors of the other type.
    disc: u8,
    /// Position in `active`, or `NO_SLOT`.
    slot: u32,
}

/// One division that changed the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub src: Site,
    pub dst: Site,
    /// Type written into `dst`.
    pub new_type: u8,
    /// Time since the previous event.
    pub waiting: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct BvmState {
    geometry: LatticeGeometry,
    beta: f64,
    cells: FxHashMap<Site, Cell>,
    active: Vec<Site>,
    occupied: usize,
    /// Discordant ordered pairs by `[source type][source degree]`.
    disc_counts: [[u64; 7]; 2],
    time: f64,
    event_count: u64,
    max_abs_x: i32,
    front_times: Option<Vec<f64>>,
    paranoid: bool,
}

impl BvmState {
    pub fn new(
        geometry: LatticeGeometry,
        beta: f64,
        initial: impl IntoIterator<Item = Site>,
    ) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "beta must be a finite value >= 0, got {beta}"
            )));
        }
        let mut st = BvmState {
            geometry,
            beta,
            cells: FxHashMap::default(),
            active: Vec::new(),
            occupied: 0,
            disc_counts: [[0; 7]; 2],
            time: 0.0,
            event_count: 0,
            max_abs_x: -1,
            front_times: None,
            paranoid: false,
        };
        for s in initial {
            geometry.validate(&s)?;
            if !st.is_one(&s) {
                st.flip(s, true);
                st.max_abs_x = st.max_abs_x.max(geometry.abs_x(&s));
            }
        }
        Ok(st)
    }

    /// Single type-1 cell at the origin.
    pub fn singleton(geometry: LatticeGeometry, beta: f64) -> Result<Self> {
        Self::new(geometry, beta, [Site::ORIGIN])
    }

    /// Rebuild and compare the bookkeeping after every event. Slow.
    pub fn set_paranoid(&mut self, on: bool) {
        self.paranoid = on;
    }

    /// Record the first time a type-1 cell reaches each `|x| = k`.
    pub fn record_front(&mut self) {
        let mut v = Vec::new();
        if self.max_abs_x >= 0 {
            v.resize(self.max_abs_x as usize + 1, 0.0);
        }
        self.front_times = Some(v);
    }

    pub fn front_times(&self) -> Option<&[f64]> {
        self.front_times.as_deref()
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn size(&self) -> usize {
        self.occupied
    }

    pub fn is_extinct(&self) -> bool {
        self.occupied == 0
    }

    /// Largest `|x|` any type-1 cell has reached so far (`-1` if none ever).
    pub fn max_abs_x(&self) -> i32 {
        self.max_abs_x
    }

    #[inline]
    pub fn is_one(&self, s: &Site) -> bool {
        self.cells.get(s).is_some_and(|c| c.one)
    }

    pub fn occupied(&self) -> impl Iterator<Item = &Site> + '_ {
        self.cells.iter().filter(|(_, c)| c.one).map(|(s, _)| s)
    }

    pub fn occupied_sorted(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.occupied().copied().collect();
        v.sort_unstable();
        v
    }

    /// Number of discordant ordered neighbor pairs.
    pub fn discordant_pairs(&self) -> u64 {
        self.disc_counts.iter().flatten().sum()
    }

    /// Total rate of configuration-changing divisions,
    /// `sum over discordant (x, y) of rate(x) / |N(x)|`.
    pub fn total_rate(&self) -> f64 {
        let mut r = 0.0;
        for (t, row) in self.disc_counts.iter().enumerate() {
            let rate = if t == 1 { 1.0 + self.beta } else { 1.0 };
            for (deg, &n) in row.iter().enumerate() {
                if n > 0 {
                    r += n as f64 * rate / deg as f64;
                }
            }
        }
        r
    }

    /// No configuration-changing event is possible.
    pub fn is_absorbed(&self) -> bool {
        self.active.is_empty()
    }

    /// Applies the next event.
    pub fn step(&mut self, stream: &mut EventStream) -> Result<Event> {
        self.step_before(stream, f64::INFINITY)?
            .ok_or(Error::Absorbed)
    }

    /// Applies the next event if it happens no later than `horizon`;
    /// otherwise advances the clock to `horizon` and returns `None`.
    pub fn step_before(&mut self, stream: &mut EventStream, horizon: f64) -> Result<Option<Event>> {
        if self.active.is_empty() {
            return Err(Error::Absorbed);
        }
        let r_max = 1.0 + self.beta;
        let proposal_rate = self.active.len() as f64 * r_max;
        let mut t = self.time;
        loop {
            t += stream.exp(proposal_rate);
            if t > horizon {
                self.time = horizon;
                return Ok(None);
            }
            let x = self.active[stream.below(self.active.len())];
            let x_one = self.cells[&x].one;
            let nbrs = self.geometry.neighbors_of(&x);
            let y = nbrs[stream.below(nbrs.len())];
            if self.is_one(&y) == x_one {
                continue;
            }
            if !x_one && self.beta > 0.0 && stream.uniform() * r_max >= 1.0 {
                continue;
            }
            self.flip(y, x_one);
            let ev = Event {
                src: x,
                dst: y,
                new_type: x_one as u8,
                waiting: t - self.time,
                time: t,
            };
            self.time = t;
            self.event_count += 1;
            if x_one {
                self.note_front(self.geometry.abs_x(&y), t);
            }
            if self.paranoid {
                self.check_bookkeeping()
                    .expect("incremental bookkeeping diverged");
            }
            return Ok(Some(ev));
        }
    }

    fn note_front(&mut self, ax: i32, t: f64) {
        if ax > self.max_abs_x {
            if let Some(ft) = self.front_times.as_mut() {
                ft.resize(ax as usize + 1, t);
            }
            self.max_abs_x = ax;
        }
    }

    /// Sets `y` to `new_one`, updating discordance of `y` and its neighbors.
    fn flip(&mut self, y: Site, new_one: bool) {
        let nbrs = self.geometry.neighbors_of(&y);
        let deg_y = nbrs.len();
        let old = self.cells.get(&y).copied().unwrap_or(Cell {
            one: false,
            disc: 0,
            slot: NO_SLOT,
        });
        debug_assert_ne!(old.one, new_one);
        self.disc_counts[old.one as usize][deg_y] -= old.disc as u64;
        let mut d_y = 0u8;
        for n in nbrs {
            let deg_n = self.geometry.degree(&n);
            let cell = self.cells.entry(n).or_insert(Cell {
                one: false,
                disc: 0,
                slot: NO_SLOT,
            });
            if cell.one == new_one {
                cell.disc -= 1;
                self.disc_counts[cell.one as usize][deg_n] -= 1;
            } else {
                cell.disc += 1;
                d_y += 1;
                self.disc_counts[cell.one as usize][deg_n] += 1;
            }
            let c = *cell;
            self.sync_active(n, c);
        }
        self.disc_counts[new_one as usize][deg_y] += d_y as u64;
        // a neighbor leaving `active` may have moved y to another slot
        let slot = self.cells.get(&y).map_or(NO_SLOT, |c| c.slot);
        let c = Cell {
            one: new_one,
            disc: d_y,
            slot,
        };
        self.cells.insert(y, c);
        self.sync_active(y, c);
        if new_one {
            self.occupied += 1;
        } else {
            self.occupied -= 1;
        }
    }

    /// Keeps `active` and the sparse map consistent with `c` for site `s`.
    fn sync_active(&mut self, s: Site, c: Cell) {
        let want = c.disc > 0;
        let has = c.slot != NO_SLOT;
        if want && !has {
            self.active.push(s);
            self.cells.get_mut(&s).unwrap().slot = (self.active.len() - 1) as u32;
        } else if !want && has {
            let slot = c.slot as usize;
            self.active.swap_remove(slot);
            if slot < self.active.len() {
                let moved = self.active[slot];
                self.cells.get_mut(&moved).unwrap().slot = slot as u32;
            }
            if c.one {
                self.cells.get_mut(&s).unwrap().slot = NO_SLOT;
            } else {
                self.cells.remove(&s);
            }
        } else if !want && !c.one {
            self.cells.remove(&s);
        }
    }

    /// Recomputes the discordance bookkeeping from the type-1 set and
    /// compares with the incrementally maintained one.
    pub fn check_bookkeeping(&self) -> std::result::Result<(), String> {
        let ones: Vec<Site> = self.occupied().copied().collect();
        if ones.len() != self.occupied {
            return Err(format!(
                "occupied count {} != {}",
                self.occupied,
                ones.len()
            ));
        }
        let mut disc: FxHashMap<Site, u8> = FxHashMap::default();
        let mut counts = [[0u64; 7]; 2];
        for s in &ones {
            for n in self.geometry.neighbors_of(s) {
                if !self.is_one(&n) {
                    *disc.entry(*s).or_default() += 1;
                    *disc.entry(n).or_default() += 1;
                    counts[1][self.geometry.degree(s)] += 1;
                    counts[0][self.geometry.degree(&n)] += 1;
                }
            }
        }
        if counts != self.disc_counts {
            return Err(format!(
                "pair counts {:?} != rebuilt {:?}",
                self.disc_counts, counts
            ));
        }
        for (s, c) in &self.cells {
            let want = disc.get(s).copied().unwrap_or(0);
            if c.disc != want {
                return Err(format!("site {s}: disc {} != rebuilt {want}", c.disc));
            }
            if !c.one && c.disc == 0 {
                return Err(format!("stale type-0 entry at {s}"));
            }
            if (c.slot != NO_SLOT) != (c.disc > 0) {
                return Err(format!("site {s}: active slot out of sync"));
            }
            if c.slot != NO_SLOT && self.active[c.slot as usize] != *s {
                return Err(format!("site {s}: slot points elsewhere"));
            }
        }
        if disc.len() != self.active.len() {
            return Err(format!(
                "active len {} != rebuilt {}",
                self.active.len(),
                disc.len()
            ));
        }
        Ok(())
    }
}

/// Which stop condition ended a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Extinct,
    SizeReached(usize),
    PlaneHit(i32),
    TimeReached(f64),
    /// No discordant pairs remain but type-1 cells exist (fixation on a window).
    Absorbed,
}

/// Any subset of conditions; the first one hit ends the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    pub extinct: bool,
    pub size: Option<usize>,
    /// Stop once a type-1 cell has `|x| >= R`.
    pub plane: Option<i32>,
    pub time: Option<f64>,
}

impl StopCondition {
    pub fn extinct() -> Self {
        StopCondition {
            extinct: true,
            ..Default::default()
        }
    }

    pub fn or_size(mut self, m: usize) -> Self {
        self.size = Some(m);
        self
    }

    pub fn or_plane(mut self, r: i32) -> Self {
        self.plane = Some(r);
        self
    }

    pub fn or_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn time_only(t: f64) -> Self {
        StopCondition {
            time: Some(t),
            ..Default::default()
        }
    }

    pub fn validate(&self, geometry: &LatticeGeometry) -> Result<()> {
        if !self.extinct && self.size.is_none() && self.plane.is_none() && self.time.is_none() {
            return Err(Error::StopCondition(
                "at least one condition is required".into(),
            ));
        }
        if let Some(t) = self.time {
            if !(t >= 0.0) {
                return Err(Error::StopCondition(format!(
                    "time horizon must be >= 0, got {t}"
                )));
            }
        }
        if !geometry.is_finite()
            && self.size.is_none()
            && self.plane.is_none()
            && self.time.is_none()
        {
            return Err(Error::StopCondition(
                "unbounded plane needs a size, plane-hit, or time condition".into(),
            ));
        }
        Ok(())
    }

    fn check(&self, st: &BvmState) -> Option<StopReason> {
        if self.extinct && st.is_extinct() {
            return Some(StopReason::Extinct);
        }
        if let Some(m) = self.size {
            if st.size() >= m {
                return Some(StopReason::SizeReached(m));
            }
        }
        if let Some(r) = self.plane {
            if st.max_abs_x() >= r {
                return Some(StopReason::PlaneHit(r));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub reason: StopReason,
    pub time: f64,
    pub size: usize,
    /// Largest `|x|` reached by a type-1 cell during the run.
    pub max_abs_x: i32,
    pub events: u64,
}

/// Runs `state` until the first condition in `stop` holds.
pub fn run_until(
    state: &mut BvmState,
    stop: &StopCondition,
    stream: &mut EventStream,
) -> Result<Outcome> {
    run_until_with(state, stop, stream, |_| {})
}

/// [`run_until`] with a per-event observer.
pub fn run_until_with(
    state: &mut BvmState,
    stop: &StopCondition,
    stream: &mut EventStream,
    mut on_event: impl FnMut(&Event),
) -> Result<Outcome> {
    stop.validate(state.geometry())?;
    let horizon = stop.time.unwrap_or(f64::INFINITY);
    let reason = loop {
        if let Some(r) = stop.check(state) {
            break r;
        }
        if state.is_absorbed() {
            if state.is_extinct() {
                break StopReason::Extinct;
            }
            break StopReason::Absorbed;
        }
        match state.step_before(stream, horizon)? {
            Some(ev) => on_event(&ev),
            None => break StopReason::TimeReached(horizon),
        }
    };
    Ok(Outcome {
        reason,
        time: state.time(),
        size: state.size(),
        max_abs_x: state.max_abs_x(),
        events: state.event_count(),
    })
}

/// Writes events as CSV with a one-line header.
pub struct EventLog<W: Write> {
    out: W,
}

impl<W: Write> EventLog<W> {
    pub const HEADER: &'static str = "time,src_x,src_y,src_z,dst_x,dst_y,dst_z,new_type";

    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(EventLog { out })
    }

    pub fn write(&mut self, e: &Event) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            e.time, e.src.x, e.src.y, e.src.z, e.dst.x, e.dst.y, e.dst.z, e.new_type
        )
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub beta: f64,
    pub target_size: usize,
    pub estimate: Proportion,
    /// `P(hit M before 0 | start at 1)` for the embedded biased walk.
    pub analytic: f64,
    /// `(p_hat - analytic) / se(analytic)`.
    pub z: f64,
}

/// Gambler's-ruin probability for the embedded chain of `|xi_t|`.
pub fn embedded_hit_probability(beta: f64, m: usize) -> f64 {
    if beta == 0.0 {
        return 1.0 / m as f64;
    }
    let q = 1.0 / (1.0 + beta);
    // (1 - q) / (1 - q^M)
    (1.0 - q) / -((m as f64) * q.ln()).exp_m1()
}

/// Fraction of clones started from one cell that reach size `m` before
/// extinction.
pub fn survival_fraction(
    beta: f64,
    geometry: LatticeGeometry,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if m < 2 || reps < 1 {
        return Err(Error::Domain("need M >= 2 and reps >= 1".into()));
    }
    let stop = StopCondition::extinct().or_size(m);
    let hits: Result<Vec<bool>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = BvmState::singleton(geometry, beta)?;
            let mut stream = EventStream::new(seed, i);
            let out = run_until(&mut st, &stop, &mut stream)?;
            Ok(matches!(out.reason, StopReason::SizeReached(_)))
        })
        .collect();
    let successes = hits?.into_iter().filter(|&h| h).count() as u64;
    let estimate = Proportion::new(successes, reps as u64);
    let analytic = embedded_hit_probability(beta, m);
    let z = (estimate.p_hat - analytic) / estimate.se_at(analytic);
    Ok(SurvivalEstimate {
        beta,
        target_size: m,
        estimate,
        analytic,
        z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedMode {
    /// `R / (first time some type-1 cell has |x| >= R)`.
    #[default]
    Hitting,
    /// Least-squares slope of front position against its first-hit time
    /// over `R/2 ..= R`. Diagnostic only.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub beta: f64,
    pub geometry: LatticeGeometry,
    pub radius: i32,
    pub mode: SpeedMode,
    /// Speeds of the surviving replicates, in attempt order.
    pub speeds: Vec<f64>,
    pub mean: f64,
    pub ci_half_width: f64,
    /// Replicates started, including extinct ones.
    pub replicates: usize,
    pub survivors: usize,
    pub extinct: usize,
    pub total_events: u64,
}

impl SpeedEstimate {
    pub fn mean_ci(&self) -> MeanCi {
        MeanCi::from_samples(&self.speeds).expect("at least one survivor")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedConfig {
    pub beta: f64,
    pub geometry: LatticeGeometry,
    pub radius: i32,
    /// Number of surviving replicates to collect.
    pub survivors: usize,
    /// Give up after this many replicates.
    pub max_attempts: usize,
    pub seed: u64,
    pub mode: SpeedMode,
}

impl SpeedConfig {
    pub fn new(
        beta: f64,
        geometry: LatticeGeometry,
        radius: i32,
        survivors: usize,
        seed: u64,
    ) -> Self {
        SpeedConfig {
            beta,
            geometry,
            radius,
            survivors,
            max_attempts: survivors.saturating_mul(20_000).max(1000),
            seed,
            mode: SpeedMode::Hitting,
        }
    }
}

struct Attempt {
    speed: Option<f64>,
    events: u64,
}

fn speed_attempt(cfg: &SpeedConfig, i: u64) -> Result<Attempt> {
    let mut st = BvmState::singleton(cfg.geometry, cfg.beta)?;
    if cfg.mode == SpeedMode::Regression {
        st.record_front();
    }
    let mut stream = EventStream::new(cfg.seed, i);
    let stop = StopCondition::extinct().or_plane(cfg.radius);
    let out = run_until(&mut st, &stop, &mut stream)?;
    let speed = match out.reason {
        StopReason::PlaneHit(r) => Some(match cfg.mode {
            SpeedMode::Hitting => r as f64 / out.time,
            SpeedMode::Regression => regression_speed(st.front_times().unwrap_or(&[]), r),
        }),
        _ => None,
    };
    Ok(Attempt {
        speed,
        events: out.events,
    })
}

fn regression_speed(times: &[f64], r: i32) -> f64 {
    let lo = (r / 2).max(1) as usize;
    let pts: Vec<(f64, f64)> = (lo..times.len().min(r as usize + 1))
        .map(|k| (times[k], k as f64))
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mk = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mk)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

/// Front propagation speed over surviving clones started from one cell.
///
/// Replicates run in parallel in batches; survivors are taken in attempt
/// order so the result does not depend on the worker count.
pub fn front_speed(cfg: &SpeedConfig) -> Result<SpeedEstimate> {
    if cfg.radius < 10 {
        return Err(Error::Domain(format!(
            "radius must be >= 10, got {}",
            cfg.radius
        )));
    }
    if let Some(l) = cfg.geometry.window() {
        if (l as i64) <= 4 * cfg.radius as i64 {
            return Err(Error::Domain(format!(
                "window side {l} must exceed 4R = {}",
                4 * cfg.radius
            )));
        }
    }
    if cfg.survivors < 1 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let batch = (rayon::current_num_threads() * 16).max(16) as u64;
    let mut speeds = Vec::new();
    let mut attempts = 0u64;
    let mut total_events = 0u64;
    'outer: while speeds.len() < cfg.survivors && (attempts as usize) < cfg.max_attempts {
        let end = (attempts + batch).min(cfg.max_attempts as u64);
        let results: Result<Vec<Attempt>> = (attempts..end)
            .into_par_iter()
            .map(|i| speed_attempt(cfg, i))
            .collect();
        for a in results? {
            attempts += 1;
            total_events += a.events;
            if let Some(s) = a.speed {
                speeds.push(s);
                if speeds.len() == cfg.survivors {
                    break 'outer;
                }
            }
        }
    }
    if speeds.is_empty() {
        return Err(Error::NoSurvivors {
            attempts: attempts as usize,
        });
    }
    let ci = MeanCi::from_samples(&speeds).expect("nonempty");
    Ok(SpeedEstimate {
        beta: cfg.beta,
        geometry: cfg.geometry,
        radius: cfg.radius,
        mode: cfg.mode,
        mean: ci.mean,
        ci_half_width: ci.half_width,
        replicates: attempts as usize,
        survivors: speeds.len(),
        extinct: attempts as usize - speeds.len(),
        speeds,
        total_events,
    })
}

/// Grows clones from one cell until one reaches `size`; returns it and the
/// number of extinct attempts before it.
pub fn grow_surviving_clone(
    geometry: LatticeGeometry,
    beta: f64,
    size: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(BvmState, usize)> {
    let stop = StopCondition::extinct().or_size(size);
    for i in 0..max_attempts as u64 {
        let mut st = BvmState::singleton(geometry, beta)?;
        let mut stream = EventStream::new(seed, i);
        let out = run_until(&mut st, &stop, &mut stream)?;
        if matches!(out.reason, StopReason::SizeReached(_)) {
            return Ok((st, i as usize));
        }
    }
    Err(Error::NoSurvivors {
        attempts: max_attempts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub z: u32,
    pub count: usize,
    /// `(min, max)` of x and y over the layer; `None` for an empty layer.
    pub x_range: Option<(i32, i32)>,
    pub y_range: Option<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSnapshot {
    pub layers: Vec<LayerShape>,
    /// `max x - min x` over the whole clone.
    pub x_extent: i32,
    pub y_extent: i32,
    /// `x_extent / y_extent`, taken as 1 when both are 0.
    pub aspect_ratio: f64,
}

impl ShapeSnapshot {
    /// Largest relative deviation of a layer count from the layer mean.
    pub fn layer_imbalance(&self) -> f64 {
        let mean =
            self.layers.iter().map(|l| l.count as f64).sum::<f64>() / self.layers.len() as f64;
        self.layers
            .iter()
            .map(|l| (l.count as f64 - mean).abs() / mean)
            .fold(0.0, f64::max)
    }
}

pub fn snapshot_shape(state: &BvmState) -> Result<ShapeSnapshot> {
    if state.is_extinct() {
        return Err(Error::Domain("empty state has no shape".into()));
    }
    let w = state.geometry().w();
    let mut layers: Vec<LayerShape> = (0..w)
        .map(|z| LayerShape {
            z,
            count: 0,
            x_range: None,
            y_range: None,
        })
        .collect();
    let widen = |r: &mut Option<(i32, i32)>, v: i32| {
        *r = Some(match *r {
            None => (v, v),
            Some((lo, hi)) => (lo.min(v), hi.max(v)),
        })
    };
    let (mut xr, mut yr) = (None, None);
    for s in state.occupied() {
        let l = &mut layers[s.z as usize];
        l.count += 1;
        widen(&mut l.x_range, s.x);
        widen(&mut l.y_range, s.y);
        widen(&mut xr, s.x);
        widen(&mut yr, s.y);
    }
    let (xr, yr) = (xr.unwrap(), yr.unwrap());
    let x_extent = xr.1 - xr.0;
    let y_extent = yr.1 - yr.0;
    let aspect_ratio = match (x_extent, y_extent) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (a, b) => a as f64 / b as f64,
    };
    Ok(ShapeSnapshot {
        layers,
        x_extent,
        y_extent,
        aspect_ratio,
    })
}
