//! Subcommand bodies. Workers compute; everything here runs on the
//! orchestrating thread and owns all file output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use stacked_voter::asymptotics::{evaluate, FormulaArgs, FORMULAS};
use stacked_voter::dual::duality_check;
use stacked_voter::oncogenesis::{
    draw_samples, field_hist_conditional, regime_label, sigma2_stats, summarize,
    write_histogram_csv, write_samples_csv, RegimeThresholds, Sampler, TwoStepParams,
};
use stacked_voter::stats::MeanCi;
use stacked_voter::voter::{
    front_speed, grow_surviving_clone, snapshot_shape, survival_fraction, SpeedConfig,
};
use stacked_voter::walk::{
    classify_branch_events, lclt_estimate, lclt_exact, return_time_tail, BranchClassCounts,
    WalkPos, WalkSpec,
};
use stacked_voter::{LatticeGeometry, Site, VerticalBc};

use crate::cli::*;
use crate::criteria::{self, Scale};

/// Output sink for one run.
pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn create(dir: PathBuf) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Outputs { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.dir.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| {
            format!("cannot write {}", p.display())
        })?))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    pub fn text(&self, name: &str, body: &str) -> anyhow::Result<()> {
        let mut f = self.file(name)?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    fn with<F>(&self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut f = self.file(name)?;
        write(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

fn geometry(g: &GeometryArgs) -> anyhow::Result<LatticeGeometry> {
    Ok(LatticeGeometry::new(g.w, g.bc.into(), g.window)?)
}

/// Runs `cmd`; returns the process exit code.
pub fn run(cmd: &Command, seed: u64, out: &Outputs) -> anyhow::Result<i32> {
    match cmd {
        Command::Survival(a) => survival(a, seed, out),
        Command::Speed(a) => speed(a, seed, out),
        Command::BoundaryCompare(a) => boundary(a, seed, out),
        Command::Duality(a) => duality(a, seed, out),
        Command::BranchClassify(a) => branch(a, seed, out),
        Command::ReturnTime(a) => return_time(a, seed, out),
        Command::Lclt(a) => lclt(a, seed, out),
        Command::Formulas(a) => formulas(a, out),
        Command::CancerInit(a) => cancer(a, seed, out),
        Command::FieldHist(a) => field_hist(a, seed, out),
        Command::ShapeSnapshot(a) => shape(a, seed, out),
        Command::Verify(a) => verify(a, seed, out),
    }?;
    Ok(if let Command::Verify(_) = cmd {
        VERIFY_STATUS.with(|s| s.get())
    } else {
        0
    })
}

thread_local! {
    static VERIFY_STATUS: std::cell::Cell<i32> = const { std::cell::Cell::new(0) };
}

fn survival(a: &SurvivalArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let est = survival_fraction(a.beta, geometry(&a.geometry)?, a.m, a.reps, seed)?;
    println!(
        "p_hat={:.6} se={:.6} analytic={:.6} z={:+.3}",
        est.estimate.p_hat, est.estimate.se, est.analytic, est.z
    );
    out.json("survival.json", &est)
}

fn speed(a: &SpeedArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let mut cfg = SpeedConfig::new(a.beta, geometry(&a.geometry)?, a.radius, a.reps, seed);
    cfg.mode = a.mode.into();
    if let Some(m) = a.max_attempts {
        cfg.max_attempts = m;
    }
    let est = front_speed(&cfg)?;
    println!(
        "speed={:.5} ± {:.5} ({} survivors, {} extinct)",
        est.mean, est.ci_half_width, est.survivors, est.extinct
    );
    let mut csv = String::from("rep,speed\n");
    for (i, s) in est.speeds.iter().enumerate() {
        csv.push_str(&format!("{i},{s}\n"));
    }
    out.text("speeds.csv", &csv)?;
    out.json("speed.json", &est)
}

#[derive(Serialize)]
struct BoundaryRow {
    bc: VerticalBc,
    mean: f64,
    ci_lo: f64,
    ci_hi: f64,
    survivors: usize,
    attempts: usize,
}

fn boundary(a: &BoundaryArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    let mut csv = String::from("bc,mean,ci_lo,ci_hi,survivors,attempts\n");
    for bc in [VerticalBc::Periodic, VerticalBc::Reflecting] {
        let g = LatticeGeometry::new(a.w, bc, None)?;
        let est = front_speed(&SpeedConfig::new(a.beta, g, a.radius, a.reps, seed))?;
        let ci: MeanCi = est.mean_ci();
        csv.push_str(&format!(
            "{bc},{},{},{},{},{}\n",
            ci.mean,
            ci.lo(),
            ci.hi(),
            est.survivors,
            est.replicates
        ));
        println!("{bc:<10} {:.5} [{:.5}, {:.5}]", ci.mean, ci.lo(), ci.hi());
        rows.push(BoundaryRow {
            bc,
            mean: ci.mean,
            ci_lo: ci.lo(),
            ci_hi: ci.hi(),
            survivors: est.survivors,
            attempts: est.replicates,
        });
    }
    let rel_diff = (rows[1].mean - rows[0].mean) / rows[0].mean;
    let overlap = rows[0].ci_lo <= rows[1].ci_hi && rows[1].ci_lo <= rows[0].ci_hi;
    println!(
        "relative difference {:+.2}%, CIs overlap: {overlap}",
        100.0 * rel_diff
    );
    out.text("boundary.csv", &csv)?;
    out.json("boundary.json", &serde_json::json!({ "rows": rows, "relative_difference": rel_diff, "ci_overlap": overlap }))
}

fn fmt_sites(s: &[Site]) -> String {
    s.iter()
        .map(|p| format!("{},{},{}", p.x, p.y, p.z))
        .collect::<Vec<_>>()
        .join(";")
}

fn duality(a: &DualityArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let g = LatticeGeometry::torus(a.side, a.w, VerticalBc::Periodic)?;
    let instances: Vec<(Vec<Site>, Vec<Site>, f64)> = match (&a.a, &a.b) {
        (Some(x), Some(y)) => vec![(x.0.clone(), y.0.clone(), a.t)],
        _ if a.side < 10 => {
            bail!("random instances sit in a 5x5 patch at 5..10 and need --L >= 10")
        }
        _ => (0..a.instances as u64)
            .map(|k| criteria::random_duality_instance(seed, k, a.w))
            .collect(),
    };
    let mut csv = String::from("instance,a,b,t,p_forward,p_dual,pooled_se,z\n");
    let mut results = Vec::new();
    for (k, (sa, sb, t)) in instances.iter().enumerate() {
        let r = duality_check(sa, sb, *t, a.beta, g, a.reps, seed.wrapping_add(k as u64))?;
        println!(
            "{k}: forward={:.5} dual={:.5} z={:+.3}",
            r.forward.p_hat, r.dual.p_hat, r.z
        );
        csv.push_str(&format!(
            "{k},\"{}\",\"{}\",{t},{},{},{},{}\n",
            fmt_sites(sa),
            fmt_sites(sb),
            r.forward.p_hat,
            r.dual.p_hat,
            r.pooled_se,
            r.z
        ));
        results.push(r);
    }
    out.text("duality.csv", &csv)?;
    out.json("duality.json", &results)
}

fn branch(a: &BranchArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let mut csv = format!("{}\n", BranchClassCounts::CSV_HEADER);
    let mut all = Vec::new();
    for (k, &b) in a.beta.iter().enumerate() {
        let c = classify_branch_events(b, a.w, a.reps, seed.wrapping_add(k as u64), a.alpha)?;
        println!("{}", c.csv_row());
        csv.push_str(&c.csv_row());
        csv.push('\n');
        all.push(c);
    }
    out.text("branch_classes.csv", &csv)?;
    out.json("branch_classes.json", &all)
}

fn return_time(a: &ReturnTimeArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let tail = return_time_tail(a.w, a.alpha, &a.t_grid, a.reps, seed, a.budget)?;
    if tail.truncated {
        eprintln!(
            "warning: event budget reached; ran {} of {} replicates",
            tail.reps, a.reps
        );
    }
    print!("{}", tail.csv());
    out.text("return_time.csv", &tail.csv())?;
    out.json("return_time.json", &tail)
}

fn lclt(a: &LcltArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let spec = WalkSpec::new(a.d, a.w, a.alpha, a.allow_w1)?;
    let x = WalkPos {
        planar: [a.x.x as i64, if a.d == 1 { 0 } else { a.x.y as i64 }],
        z: a.x.z,
    };
    let est = lclt_estimate(&spec, a.t, x, a.reps, seed)?;
    println!(
        "scaled={:.6} ± {:.6} limit={:.6}",
        est.scaled, est.scaled_se, est.limit
    );
    let exact = match a.exact_radius {
        Some(r) => {
            let e = lclt_exact(&spec, a.t, r)?;
            let p = e.prob(&x);
            let z = (est.p_hat.p_hat - p) / (p * (1.0 - p) / a.reps as f64).sqrt();
            println!("exact p={p:.8} (leak {:.2e}), z={z:+.3}", e.leak);
            Some(serde_json::json!({ "p": p, "leak": e.leak, "z": z }))
        }
        None => None,
    };
    out.json(
        "lclt.json",
        &serde_json::json!({ "estimate": est, "exact": exact }),
    )
}

/// Parses `lo:hi:log10[:per_decade]` or `lo:hi:lin:n`.
pub fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 {
        bail!("grid {spec:?} must be lo:hi:log10[:k] or lo:hi:lin:n");
    }
    let lo: f64 = parts[0]
        .parse()
        .with_context(|| format!("bad grid start {:?}", parts[0]))?;
    let hi: f64 = parts[1]
        .parse()
        .with_context(|| format!("bad grid end {:?}", parts[1]))?;
    if !(lo > 0.0 && hi >= lo) {
        bail!("grid needs 0 < lo <= hi, got {lo}..{hi}");
    }
    let count: Option<usize> = parts
        .get(3)
        .map(|s| s.parse())
        .transpose()
        .context("bad grid count")?;
    match parts[2] {
        "log10" => {
            let per = count.unwrap_or(1).max(1) as f64;
            let steps = ((hi / lo).log10() * per).round() as usize;
            Ok((0..=steps)
                .map(|k| lo * 10f64.powf(k as f64 / per))
                .collect())
        }
        "lin" => {
            let n = count.unwrap_or(2).max(2);
            Ok((0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect())
        }
        other => bail!("unknown grid scale {other:?}"),
    }
}

fn formulas(a: &FormulaCmdArgs, out: &Outputs) -> anyhow::Result<()> {
    let names: Vec<String> = if a.formula.is_empty() {
        FORMULAS.iter().map(|s| s.to_string()).collect()
    } else {
        a.formula.clone()
    };
    for n in &names {
        if !FORMULAS.contains(&n.as_str()) {
            bail!("unknown formula {n:?}; known: {}", FORMULAS.join(", "));
        }
    }
    let betas = match &a.beta_grid {
        Some(g) => parse_grid(g)?,
        None => a.beta.clone(),
    };
    let args = FormulaArgs {
        n: a.n,
        v: a.v,
        u1: a.u1,
        u2: a.u2,
    };
    let mut csv = String::from("formula,beta,w,value\n");
    for n in &names {
        for &b in &betas {
            for &w in &a.w {
                let v = evaluate(n, b, w, &args)?;
                csv.push_str(&format!("{n},{b},{w},{v}\n"));
            }
        }
    }
    print!("{csv}");
    out.text("formulas.csv", &csv)
}

fn two_step(p: &TwoStepArgs) -> anyhow::Result<(TwoStepParams, RegimeThresholds)> {
    let params = TwoStepParams {
        n: p.n,
        w: p.w,
        beta1: p.beta,
        beta2: p.beta2.unwrap_or(p.beta),
        u1: p.u1,
        u2: p.u2,
    };
    params.validate()?;
    let ordered =
        p.gamma_small.is_finite() && p.gamma_large.is_finite() && p.gamma_small <= p.gamma_large;
    if !ordered {
        bail!(
            "gamma thresholds must be finite with small <= large, got {} and {}",
            p.gamma_small,
            p.gamma_large
        );
    }
    Ok((
        params,
        RegimeThresholds {
            small_below: p.gamma_small,
            large_above: p.gamma_large,
        },
    ))
}

fn cancer(a: &CancerArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let (params, th) = two_step(&a.params)?;
    let regime = regime_label(&params, th)?;
    if let Some(w) = &regime.warning {
        eprintln!("warning: {w}");
    }
    let stats = match a.sampler {
        SamplerArg::Inversion => sigma2_stats(&params, a.reps, seed)?,
        SamplerArg::Thinning => summarize(
            &params,
            draw_samples(&params, a.reps, seed, Sampler::Thinning)?,
        )?,
    };
    println!(
        "Gamma={:.4e} ({:?}); mean sigma2={:.2} sd={:.2}",
        regime.gamma, regime.regime, stats.mean, stats.sd
    );
    out.with("samples.csv", |f| write_samples_csv(&stats.samples, f))?;
    out.with("sigma2_hist.csv", |f| {
        write_histogram_csv(&stats.histogram, f)
    })?;
    out.json(
        "sigma2_stats.json",
        &serde_json::json!({ "stats": stats, "regime": regime }),
    )
}

fn field_hist(a: &FieldHistArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let (params, _) = two_step(&a.params)?;
    let t = match a.t {
        Some(t) => t,
        None => sigma2_stats(&params, a.reps, seed)?.mean,
    };
    let dt = a.dt.unwrap_or(0.05 * t);
    let h = field_hist_conditional(&params, t, dt, a.reps, seed, a.min_accepted)?;
    if h.partial {
        eprintln!(
            "warning: only {} accepted draws (minimum {})",
            h.accepted, a.min_accepted
        );
    }
    println!(
        "t={t:.2} dt={dt:.2} accepted={} ({:.2}%) mean local field={:.2} bound={:.2}",
        h.accepted,
        100.0 * h.acceptance,
        h.mean_local_field,
        h.support_bound
    );
    out.with("field_hist.csv", |f| write_histogram_csv(&h.histogram, f))?;
    out.json("field_hist.json", &h)
}

fn shape(a: &ShapeArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    let (st, extinct) =
        grow_surviving_clone(geometry(&a.geometry)?, a.beta, a.size, seed, a.max_attempts)?;
    let snap = snapshot_shape(&st)?;
    println!(
        "size={} after {extinct} extinct attempts; aspect={:.4} layer imbalance={:.4}",
        st.size(),
        snap.aspect_ratio,
        snap.layer_imbalance()
    );
    let mut csv = String::from("x,y,z\n");
    for s in st.occupied_sorted() {
        csv.push_str(&format!("{},{},{}\n", s.x, s.y, s.z));
    }
    out.text("cells.csv", &csv)?;
    out.json("shape.json", &serde_json::json!({ "size": st.size(), "time": st.time(), "extinct_attempts": extinct, "shape": snap }))
}

fn verify(a: &VerifyArgs, seed: u64, out: &Outputs) -> anyhow::Result<()> {
    if let Some(bad) = a
        .only
        .iter()
        .find(|id| !criteria::CRITERIA.iter().any(|c| c.0 == **id))
    {
        bail!(
            "no criterion with id {bad}; ids run 1..={}",
            criteria::CRITERIA.len()
        );
    }
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let results: Vec<_> = criteria::CRITERIA
        .iter()
        .filter(|c| a.only.is_empty() || a.only.contains(&c.0))
        .map(|c| {
            let r = criteria::run_one(c.0, scale, seed);
            println!("{}", r.line());
            r
        })
        .collect();
    let mut csv = String::from("id,name,passed,seconds,detail\n");
    for r in &results {
        csv.push_str(&format!(
            "{},{},{},{:.3},\"{}\"\n",
            r.id,
            r.name,
            r.passed,
            r.seconds,
            r.detail.replace('"', "'")
        ));
    }
    out.text("verify.csv", &csv)?;
    out.json(
        "verify.json",
        &serde_json::json!({ "scale": scale, "seed": seed, "results": results }),
    )?;
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    VERIFY_STATUS.with(|s| s.set(i32::from(failed > 0)));
    Ok(())
}
