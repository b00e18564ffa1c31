//! One function per subcommand; each turns a validated config into a dataset.

use nalgebra::DVector;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use kleinsplit::dynamics::{
    check_hyperbolic_toral, check_lattice_condition, density_report, fixed_point, fixed_point_sweep, generic_point,
    norm_bound_scan, norm_bound_scan_real, torus_orbit, SweepStrategy,
};
use kleinsplit::group::{GroupContext, GroupElement};
use kleinsplit::linalg::{expm, IntMatrix, SpectrumReport, Stability};
use kleinsplit::regions::{build_splitting, GridSpec, HyperbolicSplitting, PsiPreimage, RegionLabel};
use kleinsplit::{Complex, ComplexVector, RealMatrix, RealVector};

use crate::config::{ExperimentConfig, PointSpec};
use crate::error::{CliError, CliResult};
use crate::export::{Dataset, Value};

pub const CAT2: [[i64; 2]; 2] = [[2, 1], [1, 1]];
pub const CAT3: [[i64; 3]; 3] = [[1, 1, 0], [1, 1, 1], [1, 0, 1]];

/// The matrix data every command starts from.
pub struct System {
    pub source: String,
    pub lattice: Option<IntMatrix>,
    pub lattice_spectrum: Option<SpectrumReport>,
    pub ctx: GroupContext,
    pub split: HyperbolicSplitting,
}

fn int_matrix(rows: &[Vec<i64>]) -> CliResult<IntMatrix> {
    IntMatrix::from_rows(rows).map_err(|e| CliError::config(format!("matrix b: {e}")))
}

fn real_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<RealMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(format!("{what} must be a nonempty square matrix")));
    }
    Ok(RealMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

fn preset(name: &str) -> CliResult<Vec<Vec<i64>>> {
    match name {
        "cat2" => Ok(CAT2.iter().map(|r| r.to_vec()).collect()),
        "cat3" => Ok(CAT3.iter().map(|r| r.to_vec()).collect()),
        _ => Err(CliError::config(format!("unknown preset {name:?} (expected cat2 or cat3)"))),
    }
}

impl System {
    /// Builds the group and splitting; fails on non-hyperbolic input.
    pub fn load(cfg: &ExperimentConfig) -> CliResult<Self> {
        let tol = cfg.hyperbolic_tol();
        let (source, rows) = match (&cfg.preset, &cfg.b, &cfg.m) {
            (Some(name), _, _) => (name.clone(), Some(preset(name)?)),
            (_, Some(b), _) => ("b".to_owned(), Some(b.clone())),
            _ => ("m".to_owned(), None),
        };
        if let Some(rows) = rows {
            let b = int_matrix(&rows)?;
            let spectrum = check_hyperbolic_toral(&b, tol)?;
            let ctx = GroupContext::from_lattice(b.clone())?;
            let split = build_splitting(ctx.generator(), tol)?;
            return Ok(System {
                source,
                lattice: Some(b),
                lattice_spectrum: Some(spectrum),
                ctx,
                split,
            });
        }
        let m = real_matrix(cfg.m.as_deref().unwrap_or_default(), "m")?;
        let split = build_splitting(&m, tol)?;
        Ok(System {
            source,
            lattice: None,
            lattice_spectrum: None,
            ctx: GroupContext::new(m)?,
            split,
        })
    }

    fn dim(&self) -> usize {
        self.split.dim()
    }

    fn require_lattice(&self, command: &str) -> CliResult<&IntMatrix> {
        self.lattice
            .as_ref()
            .ok_or_else(|| CliError::config(format!("{command} needs an integer matrix (preset or b)")))
    }

    fn point(&self, spec: Option<&PointSpec>, what: &str) -> CliResult<RealVector> {
        match spec {
            None | Some(PointSpec::Named(_)) => Ok(generic_point(self.dim())),
            Some(PointSpec::Coords(v)) if v.len() == self.dim() => Ok(RealVector::from_column_slice(v)),
            Some(PointSpec::Coords(v)) => Err(CliError::config(format!(
                "{what} has {} coordinates, expected {}",
                v.len(),
                self.dim()
            ))),
        }
    }

    fn complex(&self, re: Option<&Vec<f64>>, im: Option<&Vec<f64>>, what: &str) -> CliResult<Option<ComplexVector>> {
        if re.is_none() && im.is_none() {
            return Ok(None);
        }
        let n = self.dim();
        let part = |v: Option<&Vec<f64>>| -> CliResult<RealVector> {
            match v {
                None => Ok(RealVector::zeros(n)),
                Some(v) if v.len() == n => Ok(RealVector::from_column_slice(v)),
                Some(v) => Err(CliError::config(format!("{what} has {} coordinates, expected {n}", v.len()))),
            }
        };
        Ok(Some(part(re)?.zip_map(&part(im)?, Complex::new)))
    }
}

fn side_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
    }
}

pub fn split(sys: &System) -> CliResult<Dataset> {
    let mut ds = Dataset::new("split", &["index", "re", "im", "class"]);
    let spectrum = &sys.split.spectrum;
    ds.set("source", sys.source.as_str());
    ds.set("dim", sys.dim());
    ds.set("n_s", sys.split.stable_dim());
    ds.set("n_u", sys.split.unstable_dim());
    ds.set("margin", spectrum.margin);
    if let Some(lift) = sys.ctx.lift() {
        ds.set("log_power", lift.power as u64);
        ds.set("lattice", &lift.lattice);
    }
    if let Some(report) = &sys.lattice_spectrum {
        ds.set("lattice_margin", report.margin);
    }
    ds.set("generator", sys.ctx.generator());
    ds.set("stable_basis", &sys.split.stable.basis);
    ds.set("unstable_basis", &sys.split.unstable.basis);
    for (k, (lambda, class)) in spectrum.eigenvalues.iter().zip(&spectrum.classes).enumerate() {
        ds.push(vec![k.into(), lambda.re.into(), lambda.im.into(), side_name(*class).into()]);
    }
    Ok(ds)
}

pub fn classify_grid(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let axes = cfg.plane()?;
    let [lo0, hi0, lo1, hi1] = cfg.window.unwrap_or([-1.0, 1.0, -1.0, 1.0]);
    let base = sys
        .complex(cfg.base_re.as_ref(), cfg.base_im.as_ref(), "base")?
        .unwrap_or_else(|| ComplexVector::zeros(sys.dim()));
    let spec = GridSpec {
        axes,
        lo: [lo0, lo1],
        hi: [hi0, hi1],
        resolution: cfg.resolution.unwrap_or(64),
        base,
        tol: cfg.region_tol(),
    };
    let cells = sys.split.classify_grid(&spec).map_err(|e| match e {
        kleinsplit::Error::InvalidArgument(msg) => CliError::Config(msg),
        other => other.into(),
    })?;

    let mut ds = Dataset::new("classify-grid", &["i", "j", "a", "b", "label", "near_boundary"]);
    ds.set("plane", format!("{},{}", axes[0], axes[1]));
    ds.set("resolution", spec.resolution);
    ds.set("window", Value::Reals(vec![lo0, hi0, lo1, hi1]));
    ds.set("tol", spec.tol);
    for label in RegionLabel::ALL {
        ds.set(label.as_str(), cells.iter().filter(|c| c.label == label).count());
    }
    ds.set("near_boundary", cells.iter().filter(|c| c.near_boundary).count());
    for c in &cells {
        ds.push(vec![
            c.i.into(),
            c.j.into(),
            c.a.into(),
            c.b.into(),
            c.label.as_str().into(),
            c.near_boundary.into(),
        ]);
    }
    Ok(ds)
}

pub fn orbit(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let b = sys.require_lattice("orbit")?;
    let x0 = sys.point(cfg.x0.as_ref(), "x0")?;
    let n_max = usize::try_from(cfg.n_max.unwrap_or(100_000)).map_err(|_| CliError::config("n_max too large"))?;
    let epsilon = cfg.epsilon.unwrap_or(1.0 / 32.0);
    let points = torus_orbit(b, &x0, n_max)?;
    let report = density_report(&points, epsilon)?;

    let mut ds = Dataset::new("orbit", &["n", "x"]);
    ds.set("x0", &x0);
    ds.set("n_max", n_max);
    ds.set("epsilon", report.epsilon);
    ds.set("boxes_total", report.boxes_total);
    ds.set("boxes_hit", report.boxes_hit);
    ds.set("coverage", report.coverage);
    ds.set("max_gap", report.max_gap);
    for (n, x) in points.iter().enumerate() {
        ds.push(vec![n.into(), x.into()]);
    }
    Ok(ds)
}

pub fn fixed_points(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let b = sys.require_lattice("fixed-points")?;
    if let Some(shift) = &cfg.shift {
        if shift.len() != sys.dim() {
            return Err(CliError::config(format!("shift has {} entries, expected {}", shift.len(), sys.dim())));
        }
        let n = cfg.at_n.unwrap_or(1);
        if n == 0 {
            return Err(CliError::config("at_n must be nonzero"));
        }
        let shift: Vec<BigInt> = shift.iter().map(|&v| v.into()).collect();
        let record = fixed_point(b, &shift, n)?;
        let mut ds = Dataset::new("fixed-points", &["b", "n", "x", "residual"]);
        ds.set("isotropy_defect", record.isotropy_defect(b)?);
        ds.push(vec![record.b.as_slice().into(), record.n.into(), (&record.x).into(), record.residual.into()]);
        return Ok(ds);
    }

    let target = sys.point(cfg.target.as_ref(), "target")?;
    let n_max = u32::try_from(cfg.n_max.unwrap_or(25)).map_err(|_| CliError::config("n_max too large"))?;
    let strategy = match cfg.strategy.as_deref() {
        Some("exhaustive") => SweepStrategy::Exhaustive {
            radius: cfg.radius.unwrap_or(1),
        },
        _ => SweepStrategy::Rounding,
    };
    let report = fixed_point_sweep(b, &target, n_max, strategy)?;

    let mut ds = Dataset::new("fixed-points", &["b", "n", "x", "residual", "distance", "y_distance"]);
    ds.set("target", &target);
    ds.set("n_max", n_max as u64);
    ds.set("c_sup", report.c_sup);
    ds.set("c_limit", report.c_limit);
    ds.set("max_bound_ratio", report.max_bound_ratio);
    ds.set("bound_holds", report.bound_holds);
    if let Some(best) = report.best() {
        ds.set("best_distance", best.distance);
        ds.set("best_n", best.record.n);
    }
    for r in &report.records {
        ds.push(vec![
            r.record.b.as_slice().into(),
            r.record.n.into(),
            (&r.record.x).into(),
            r.record.residual.into(),
            r.distance.into(),
            r.y_distance.into(),
        ]);
    }
    Ok(ds)
}

pub fn lattice_check(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let n = sys.dim();
    let sigma = match &cfg.sigma {
        Some(rows) => real_matrix(rows, "sigma")?,
        None => RealMatrix::identity(n, n),
    };
    if sigma.nrows() != n {
        return Err(CliError::config(format!("sigma must be {n}x{n}")));
    }
    let h = cfg.h.unwrap_or(1.0);
    let spec = check_lattice_condition(sys.ctx.generator(), &sigma, h, cfg.hyperbolic_tol())?;

    let mut ds = Dataset::new("lattice-check", &["row", "entries"]);
    ds.set("h", h);
    ds.set("sigma", &sigma);
    ds.set("residual", spec.residual);
    ds.set("max_deviation", spec.max_deviation);
    ds.set("margin", spec.spectrum.margin);
    ds.set("b", &spec.b);
    for (k, row) in spec.b.rows().iter().enumerate() {
        ds.push(vec![k.into(), row.as_slice().into()]);
    }
    Ok(ds)
}

pub fn norm_scan(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let hi = i64::try_from(cfg.n_max.unwrap_or(200)).map_err(|_| CliError::config("n_max too large"))?;
    let lo = cfg.n_min.unwrap_or(1);
    if lo > hi {
        return Err(CliError::config("n_min must not exceed n_max"));
    }
    let ns: Vec<i64> = (lo..=hi).filter(|&n| n != 0).collect();
    let scan = match &sys.lattice {
        Some(b) => norm_bound_scan(b, &ns)?,
        None => norm_bound_scan_real(&expm(sys.ctx.generator(), 1.0)?, &ns)?,
    };

    let mut ds = Dataset::new("norm-scan", &["n", "value"]);
    ds.set("n_min", lo);
    ds.set("n_max", hi);
    ds.set("sup", scan.sup);
    ds.set("sup_at", scan.sup_at);
    ds.set("limit_forward", scan.limit_forward);
    ds.set("limit_backward", scan.limit_backward);
    ds.set("tail_stable", scan.tail_stable());
    if let Some(start) = scan.tail_start {
        ds.set("tail_start", start);
    }
    for (n, v) in &scan.values {
        ds.push(vec![(*n).into(), (*v).into()]);
    }
    Ok(ds)
}

/// Largest coordinate deviation between two preimages.
fn preimage_gap(a: &PsiPreimage, b: &PsiPreimage) -> f64 {
    (&a.g.b - &b.g.b)
        .norm()
        .max((a.g.t - b.g.t).abs())
        .max((&a.x - &b.x).norm())
        .max((&a.y - &b.y).norm())
}

struct PsiSample {
    z: ComplexVector,
    v: RealVector,
    w: RealVector,
    g: GroupElement,
    h: GroupElement,
}

/// `(side, roundtrip, inverse_roundtrip, equivariance)` for each applicable side.
fn psi_sample(sys: &System, s: &PsiSample, tol: f64) -> CliResult<Vec<(usize, [f64; 3])>> {
    let (split, ctx) = (&sys.split, &sys.ctx);
    let class = split.classify_chart(&s.z, 1e-6);
    let mut out = Vec::new();
    for (slot, side) in [Stability::Stable, Stability::Unstable].into_iter().enumerate() {
        let other = if slot == 0 { Stability::Unstable } else { Stability::Stable };
        let main = &split.side(side).projection * &s.v;
        let size = if slot == 0 { class.s } else { class.u };
        if split.side(side).is_empty() || size <= 1e-6 || main.norm() < 1e-3 {
            continue;
        }
        let psi = |g: &GroupElement, x: &RealVector, y: &RealVector| match side {
            Stability::Stable => split.psi_minus(ctx, g, x, y),
            Stability::Unstable => split.psi_plus(ctx, g, x, y),
        };
        let psi_inv = |z: &ComplexVector| match side {
            Stability::Stable => split.psi_minus_inv(ctx, z, tol),
            Stability::Unstable => split.psi_plus_inv(ctx, z, tol),
        };

        let pre = psi_inv(&s.z)?;
        let roundtrip = (psi(&pre.g, &pre.x, &pre.y)? - &s.z).norm();

        let (_, x) = split.flow_to_sphere(side, &main)?;
        let y = &split.side(other).projection * &s.w;
        let direct = PsiPreimage { g: s.g.clone(), x, y };
        let inverse_roundtrip = preimage_gap(&psi_inv(&psi(&direct.g, &direct.x, &direct.y)?)?, &direct);

        let inner = psi(&s.h, &pre.x, &pre.y)?;
        let lhs = psi(&ctx.compose(&s.g, &s.h)?, &pre.x, &pre.y)?;
        let equivariance = (lhs - ctx.act_affine(&s.g, &inner)?).norm() / (1.0 + inner.norm());
        out.push((slot, [roundtrip, inverse_roundtrip, equivariance]));
    }
    Ok(out)
}

pub fn psi_check(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let n = sys.dim();
    let count = cfg.samples.unwrap_or(1000);
    let tol = cfg.region_tol();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut vector = |scale: f64| DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale));
    let samples: Vec<PsiSample> = (0..count)
        .map(|_| PsiSample {
            z: vector(2.0).zip_map(&vector(2.0), Complex::new),
            v: vector(1.0),
            w: vector(1.0),
            g: GroupElement::new(vector(2.0), vector(1.0)[0]),
            h: GroupElement::new(vector(2.0), vector(1.0)[0]),
        })
        .collect();
    let results = samples
        .par_iter()
        .map(|s| psi_sample(sys, s, tol))
        .collect::<CliResult<Vec<_>>>()?;

    let mut ds = Dataset::new(
        "psi-check",
        &["sample", "side", "roundtrip", "inverse_roundtrip", "equivariance"],
    );
    let mut worst = [0.0f64; 3];
    let mut checked = [0usize; 2];
    for (sample, rows) in results.iter().enumerate() {
        for (slot, errors) in rows {
            checked[*slot] += 1;
            for (w, e) in worst.iter_mut().zip(errors) {
                *w = w.max(*e);
            }
            let mut row = vec![sample.into(), if *slot == 0 { "minus" } else { "plus" }.into()];
            row.extend(errors.iter().map(|&e| Value::from(e)));
            ds.push(row);
        }
    }
    ds.set("samples", count);
    ds.set("checked_minus", checked[0]);
    ds.set("checked_plus", checked[1]);
    ds.set("max_roundtrip", worst[0]);
    ds.set("max_inverse_roundtrip", worst[1]);
    ds.set("max_equivariance", worst[2]);
    Ok(ds)
}

pub fn witness(sys: &System, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let split = &sys.split;
    if split.stable.is_empty() || split.unstable.is_empty() {
        return Err(CliError::config("witness needs both a stable and an unstable direction"));
    }
    let n = sys.dim();
    let imaginary = |v: RealVector, shift: f64| v.map(|c| Complex::new(shift, c));
    let z1 = match sys.complex(cfg.z1_re.as_ref(), cfg.z1_im.as_ref(), "z1")? {
        Some(z) => z,
        None => imaginary(split.unstable.basis.column(0).into_owned(), 0.25),
    };
    let z2 = match sys.complex(cfg.z2_re.as_ref(), cfg.z2_im.as_ref(), "z2")? {
        Some(z) => z,
        None => imaginary(split.stable.basis.column(0).into_owned(), 0.5),
    };
    debug_assert_eq!(z1.len(), n);
    let n_max = usize::try_from(cfg.n_max.unwrap_or(20)).map_err(|_| CliError::config("n_max too large"))?;
    let table = split.divergence_witness(&sys.ctx, &z1, &z2, n_max, cfg.region_tol())?;

    let re = |z: &ComplexVector| Value::Reals(z.iter().map(|c| c.re).collect());
    let im = |z: &ComplexVector| Value::Reals(z.iter().map(|c| c.im).collect());
    let mut ds = Dataset::new(
        "witness",
        &["n", "w_re", "w_im", "g_b", "g_t", "image_re", "image_im", "dist_w", "dist_image"],
    );
    ds.set("z1_re", re(&z1));
    ds.set("z1_im", im(&z1));
    ds.set("z2_re", re(&z2));
    ds.set("z2_im", im(&z2));
    ds.set("n0", table.n0);
    for row in &table.rows {
        ds.push(vec![
            row.n.into(),
            re(&row.w),
            im(&row.w),
            (&row.g.b).into(),
            row.g.t.into(),
            re(&row.image),
            im(&row.image),
            row.dist_w.into(),
            row.dist_image.into(),
        ]);
    }
    Ok(ds)
}
