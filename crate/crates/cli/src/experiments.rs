//! The nine experiment runners. Each resolves its defaults from the
//! configuration, validates every downstream constraint up front (so bad
//! configs fail before any computation), runs the corresponding library
//! operations, and emits CSV/.dat artifacts plus pass/fail checks.

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use halfmoll::fields::{builtin_field, exponent_check, gaussian};
use halfmoll::grid::convolve_half_space;
use halfmoll::mollify::{
    admissible_window, boundary_trace_residual, commutator, commutator_convergence,
    generalized_interchange_residual, initial_trace_residual, interchange_residual, ScalarInput,
};
use halfmoll::quad::GL64;
use halfmoll::transport::{
    corpus_test_functions, gronwall_check, inverse_relabel, renormalize, solve_characteristics,
    truncation_relabel, uniqueness_experiment, weak_residual, RelabelFunction, SolverOptions,
};
use halfmoll::{
    band_integral, curved_trace_residual, solve_on_band, BandSide, BoundaryField, BoundaryGrid,
    HalfSpaceKernel, Kernel1D, RadialInflow, SampledField, ScalarDataSpec, SmoothDomain2D,
    StripGrid, TimeAxis, TubularField, TubularGrid, VelocityFieldSpec,
};

use crate::artifacts::{num, RunOutput};
use crate::config::{check, config_error, ConfigError, ExperimentConfig};

/// L¹ mass of the start-up layer left by the one-sided kernel pair on a
/// unit jump, per unit boundary length and unit scale: the full trace
/// residual of a unit front is ≈ E·η·|boundary|.
const CORNER_LAYER_CONSTANT: f64 = 0.114_367_989_951_768_18;

/// Bisection depth of the characteristic boundary-exit search; enters the
/// trace-identity budgets as the "solver tolerance" term.
const SOLVER_TOLERANCE: f64 = 1e-10;

pub fn run(experiment: &str, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let started = Instant::now();
    let mut out = RunOutput::create(out_dir)?;
    let resolved = match experiment {
        "converge-commutator" => converge_commutator(cfg, &mut out)?,
        "interchange" => interchange(cfg, &mut out)?,
        "trace-check" => trace_check(cfg, &mut out)?,
        "solve" => solve(cfg, &mut out)?,
        "renormalize" => renormalize_experiment(cfg, &mut out)?,
        "uniqueness" => uniqueness(cfg, &mut out)?,
        "gronwall" => gronwall(cfg, &mut out)?,
        "mollifier-defect" => mollifier_defect(cfg, &mut out)?,
        "curved-trace" => curved_trace(cfg, &mut out)?,
        other => return Err(ConfigError(format!("unknown experiment {other:?}")).into()),
    };
    let config_echo = serde_json::to_value(cfg)?;
    out.write_manifest(
        experiment,
        &config_echo,
        &resolved,
        cfg.seed(),
        started.elapsed().as_secs_f64(),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Shared resolution helpers.
// ---------------------------------------------------------------------------

fn resolve_field(cfg: &ExperimentConfig, default: &str) -> Result<VelocityFieldSpec, ConfigError> {
    let name = cfg.field.as_deref().unwrap_or(default);
    builtin_field(name).map_err(|e| ConfigError(format!("field {name:?}: {e}")))
}

struct GridDefaults {
    dimension: usize,
    a: f64,
    l: f64,
    h: f64,
    t_end: f64,
    dt: f64,
}

struct ResolvedGrid {
    grid: StripGrid,
    times: TimeAxis,
}

fn resolve_grid(
    cfg: &ExperimentConfig,
    d: &GridDefaults,
    field_dimension: usize,
) -> Result<ResolvedGrid, ConfigError> {
    let dimension = cfg.grid.dimension.unwrap_or(d.dimension);
    if dimension != field_dimension {
        return config_error(format!(
            "grid.dimension = {dimension} does not match the field dimension {field_dimension}"
        ));
    }
    if !(1..=3).contains(&dimension) {
        return config_error(format!("grid.dimension must be 1, 2, or 3, got {dimension}"));
    }
    let a = if dimension == 1 {
        match cfg.grid.a {
            Some(a) if a != 0.0 => {
                return config_error(format!(
                    "grid.a must be 0 in dimension 1 (the boundary is a point), got {a}"
                ))
            }
            _ => 0.0,
        }
    } else {
        check::positive("grid.a", cfg.grid.a.unwrap_or(d.a))?
    };
    let l = check::positive("grid.l", cfg.grid.l.unwrap_or(d.l))?;
    let h = check::positive("grid.h", cfg.grid.h.unwrap_or(d.h))?;
    let t_end = check::positive("grid.t_end", cfg.grid.t_end.unwrap_or(d.t_end))?;
    let dt = check::positive("grid.dt", cfg.grid.dt.unwrap_or(d.dt))?;
    if dt > t_end {
        return config_error(format!("grid.dt = {dt} exceeds grid.t_end = {t_end}"));
    }
    let grid = StripGrid::new(dimension, a, l, h)
        .map_err(|e| ConfigError(format!("grid rejected: {e}")))?;
    let times =
        TimeAxis::new(t_end, dt).map_err(|e| ConfigError(format!("time axis rejected: {e}")))?;
    Ok(ResolvedGrid { grid, times })
}

fn resolve_etas(cfg: &ExperimentConfig, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
    let etas = cfg
        .scales
        .eta
        .clone()
        .unwrap_or_else(|| default.to_vec());
    check::eta_list(&etas)?;
    Ok(etas)
}

struct ResolvedData {
    kind: String,
    spec: ScalarDataSpec,
    amplitude: f64,
    sigma: f64,
    center: Vec<f64>,
    /// Whether the boundary datum is identically zero.
    quiet_boundary: bool,
}

fn resolve_data(
    cfg: &ExperimentConfig,
    default_kind: &str,
    dimension: usize,
    depth: f64,
    t_end: f64,
) -> Result<ResolvedData, ConfigError> {
    let kind = cfg
        .data
        .kind
        .clone()
        .unwrap_or_else(|| default_kind.to_string());
    let p = cfg.data.p.unwrap_or(2.0);
    if !(p >= 1.0) || !p.is_finite() {
        return config_error(format!("data.p must satisfy 1 <= p < infinity, got {p}"));
    }
    let amplitude = cfg.data.amplitude.unwrap_or(1.0);
    if !amplitude.is_finite() {
        return config_error("data.amplitude must be finite");
    }
    let sigma = check::positive("data.sigma", cfg.data.sigma.unwrap_or(0.15))?;
    let center = match &cfg.data.center {
        Some(c) => {
            if c.len() != dimension {
                return config_error(format!(
                    "data.center has {} coordinates, grid is {dimension}-dimensional",
                    c.len()
                ));
            }
            c.clone()
        }
        None => {
            let mut c = vec![0.0; dimension];
            c[dimension - 1] = 0.5 * depth;
            c
        }
    };
    let support_radius = check::positive(
        "data.support_radius",
        cfg.data.support_radius.unwrap_or(4.0),
    )?;

    let (spec, quiet_boundary) = match kind.as_str() {
        "front" => (
            ScalarDataSpec::new(p, support_radius, |_: &[f64]| 0.0, move |_: &[f64], _| {
                amplitude
            }),
            false,
        ),
        "pulse" => {
            let g = gaussian(center.clone(), sigma);
            (
                ScalarDataSpec::new(
                    p,
                    support_radius,
                    move |x: &[f64]| amplitude * g(x),
                    |_: &[f64], _| 0.0,
                ),
                true,
            )
        }
        "zero" => (
            ScalarDataSpec::new(p, support_radius, |_: &[f64]| 0.0, |_: &[f64], _| 0.0),
            true,
        ),
        "inflow-pulse" => {
            let g = gaussian(center.clone(), sigma);
            let two_sigma_sq = 2.0 * sigma * sigma;
            let ramp_scale = 0.25 * t_end;
            (
                ScalarDataSpec::new(
                    p,
                    support_radius,
                    move |x: &[f64]| amplitude * g(x),
                    move |xp: &[f64], t: f64| {
                        let tangential: f64 = xp.iter().map(|v| v * v).sum();
                        let rise = t * t / (t * t + ramp_scale * ramp_scale);
                        amplitude * (-tangential / two_sigma_sq).exp() * rise
                    },
                ),
                false,
            )
        }
        other => {
            return config_error(format!(
                "data.kind {other:?} is not one of front, pulse, zero, inflow-pulse"
            ))
        }
    };
    let spec = spec.map_err(|e| ConfigError(format!("data rejected: {e}")))?;
    Ok(ResolvedData {
        kind,
        spec,
        amplitude,
        sigma,
        center,
        quiet_boundary,
    })
}

fn boundary_field_from_data(
    data: &ScalarDataSpec,
    grid: &StripGrid,
    times: &TimeAxis,
) -> Result<BoundaryField> {
    let bgrid = BoundaryGrid::new(grid.dimension, grid.a, grid.h, Some(*times))?;
    Ok(BoundaryField::from_fn(bgrid, |xp, t| {
        data.boundary_at(xp, t)
    })?)
}

fn grid_echo(r: &ResolvedGrid) -> serde_json::Value {
    serde_json::json!({
        "dimension": r.grid.dimension,
        "a": r.grid.a,
        "l": r.grid.l,
        "h": r.grid.h,
        "t_end": r.times.t_end,
        "dt": r.times.dt,
    })
}

fn data_echo(d: &ResolvedData) -> serde_json::Value {
    serde_json::json!({
        "kind": d.kind,
        "p": d.spec.p,
        "amplitude": d.amplitude,
        "sigma": d.sigma,
        "center": d.center,
        "support_radius": d.spec.support_radius,
    })
}

// ---------------------------------------------------------------------------
// converge-commutator
// ---------------------------------------------------------------------------

fn converge_commutator(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "rough_power(0.5)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 2,
            a: 1.0,
            l: 1.0,
            h: 1.0 / 64.0,
            t_end: 0.5,
            dt: 0.5,
        },
        b.dimension,
    )?;
    let etas = resolve_etas(cfg, &[0.2, 0.1, 0.05])?;
    check::eta_resolved(&etas, rg.grid.h)?;
    let p = cfg.scales.p.unwrap_or(2.0);
    let beta = cfg.scales.beta.unwrap_or(2.0);
    let alpha = exponent_check(p, beta)
        .map_err(|e| ConfigError(format!("exponents rejected: {e}")))?;
    let data = resolve_data(cfg, "pulse", rg.grid.dimension, rg.grid.l, rg.times.t_end)?;
    let window = admissible_window(&rg.grid, etas[0])
        .map_err(|e| ConfigError(format!("largest scale eta = {}: {e}", etas[0])))?;

    let u_init = data.spec.initial.clone();
    let u_fn = move |x: &[f64]| u_init(x);
    let input = ScalarInput::Analytic(&u_fn);
    let started = Instant::now();
    let mut report = commutator_convergence(&input, &b, p, beta, &etas, &rg.grid)?;
    let sweep_s = started.elapsed().as_secs_f64();
    let row_times: Vec<f64> = report.rows.iter().map(|r| r.wallclock_s).collect();
    for row in &mut report.rows {
        row.wallclock_s = 0.0; // timings live in the manifest
    }

    let mut csv = Vec::new();
    report.to_csv(
        &mut csv,
        "commutator decay: r_eta(u,b) = (b.grad u)*rho_eta - b.grad(u*rho_eta),\n\
         measured in L^alpha over the eta-admissible window;\n\
         bound_ratio = norm / (|u|_p |grad b|_beta)",
    )?;
    let csv = String::from_utf8(csv).expect("ASCII CSV");
    out.write_table(
        "converge_commutator",
        &csv,
        "commutator L^alpha norm per mollification scale",
    )?;

    // Seeded pointwise spot checks at the tightest scale.
    let eta_min = *etas.last().expect("validated non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut samples = String::from("# seeded commutator spot checks at the smallest scale\n");
    let d = rg.grid.dimension;
    for i in 0..d {
        samples.push_str(&format!("x{i},"));
    }
    samples.push_str("r_eta\n");
    for _ in 0..5 {
        let mut x = vec![0.0; d];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if i + 1 < d {
                rng.gen_range(-window.a..window.a)
            } else {
                rng.gen_range(0.0..window.l)
            };
        }
        let r = commutator(&input, &b, eta_min, &x, 0.0)?;
        for xi in &x {
            samples.push_str(&num(*xi));
            samples.push(',');
        }
        samples.push_str(&num(r));
        samples.push('\n');
    }
    out.write_table(
        "converge_commutator_samples",
        &samples,
        "pointwise commutator values at seeded sample points",
    )?;

    let norms: Vec<f64> = report.rows.iter().map(|r| r.norm).collect();
    let final_norm = *norms.last().expect("non-empty");
    let initial_norm = norms[0];
    if final_norm < 1e-10 {
        out.assert_check(
            "commutator vanishes",
            true,
            format!("all norms at rounding level; final {final_norm:.3e}"),
        );
    } else {
        out.assert_check(
            "norms decrease monotonically",
            report.norms_decreasing(),
            format!("norms {norms:?}"),
        );
        out.assert_check(
            "final/initial < 0.3",
            final_norm / initial_norm < 0.3,
            format!("ratio {:.4}", final_norm / initial_norm),
        );
        out.assert_check(
            "bound ratio stays within x2 of its first value",
            report.ratio_bounded_within(2.0),
            format!(
                "ratios {:?}",
                report.rows.iter().map(|r| r.bound_ratio).collect::<Vec<_>>()
            ),
        );
    }
    out.note("row_wallclock_s", serde_json::json!(row_times));
    out.note("sweep_wallclock_s", serde_json::json!(sweep_s));

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "eta": etas,
        "p": p,
        "beta": beta,
        "alpha": alpha,
        "data": data_echo(&data),
    }))
}

// ---------------------------------------------------------------------------
// interchange
// ---------------------------------------------------------------------------

fn interchange(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "rigid_rotation")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 2,
            a: 1.0,
            l: 1.0,
            h: 1.0 / 64.0,
            t_end: 0.5,
            dt: 0.5,
        },
        b.dimension,
    )?;
    let etas = resolve_etas(cfg, &[0.1])?;
    check::eta_resolved(&etas, rg.grid.h)?;
    let d = rg.grid.dimension;
    let sigma = cfg.data.sigma.unwrap_or(0.15);
    check::positive("data.sigma", sigma)?;
    let mut center_u = vec![0.0; d];
    let mut center_v = vec![0.0; d];
    center_u[d - 1] = 0.45;
    center_v[d - 1] = 0.55;
    if d >= 2 {
        center_u[0] = -0.2;
        center_v[0] = 0.25;
    }
    let gu = gaussian(center_u.clone(), sigma);
    let gv = gaussian(center_v.clone(), sigma + 0.05);
    let u_fn = move |x: &[f64]| gu(x);
    let v_fn = move |x: &[f64]| gv(x);
    let u = ScalarInput::Analytic(&u_fn);
    let v = ScalarInput::Analytic(&v_fn);

    let identity = if b.solenoidal {
        "solenoidal interchange: int r_eta(u) v dx = int r_eta(v) u dx"
    } else {
        "generalized interchange: int (r_eta(u) - (u*rho) div b) v dx = int (r_eta(v) - (v*rho) div b) u dx"
    };
    let mut csv = format!("# {identity}\n# field {}\neta,lhs,rhs,residual,relative\n", b.name);
    let mut worst_rel: f64 = 0.0;
    for &eta in &etas {
        let (lhs, rhs, resid) = if b.solenoidal {
            interchange_residual(&u, &v, &b, eta, &rg.grid, 0.0)?
        } else {
            generalized_interchange_residual(&u, &v, &b, eta, &rg.grid, 0.0)?
        };
        let scale = lhs.abs().max(rhs.abs());
        let relative = if scale > 1e-14 { resid / scale } else { 0.0 };
        worst_rel = worst_rel.max(relative);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            num(eta),
            num(lhs),
            num(rhs),
            num(resid),
            num(relative)
        ));
    }
    out.write_table(
        "interchange",
        &csv,
        "two-sided smoothing identity residuals per scale",
    )?;
    out.assert_check(
        "interchange residual <= 1e-6 scale-relative",
        worst_rel <= 1e-6,
        format!("worst relative residual {worst_rel:.3e}"),
    );

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "eta": etas,
        "identity": if b.solenoidal { "solenoidal" } else { "generalized" },
        "u_center": center_u,
        "v_center": center_v,
        "sigma": sigma,
    }))
}

// ---------------------------------------------------------------------------
// trace-check
// ---------------------------------------------------------------------------

fn trace_check(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "constant(1)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 1,
            a: 0.0,
            l: 1.0,
            h: 1.0 / 256.0,
            t_end: 1.0,
            dt: 1.0 / 256.0,
        },
        b.dimension,
    )?;
    let etas = resolve_etas(cfg, &[1.0 / 16.0, 1.0 / 32.0])?;
    check::eta_resolved(&etas, rg.grid.h)?;
    check::eta_within_horizon(&etas, rg.times.t_end)?;
    let p = cfg.scales.p.unwrap_or(1.0);
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ConfigError(format!("scales.p must satisfy 1 <= p, got {p}")).into());
    }
    let data = resolve_data(cfg, "front", rg.grid.dimension, rg.grid.l, rg.times.t_end)?;

    let h_data = data.spec.boundary.clone();
    let u0 = data.spec.initial.clone();
    let h_fn = move |xp: &[f64], t: f64| h_data(xp, t);
    let u0_fn = move |x: &[f64]| u0(x);
    let started = Instant::now();
    let u = solve_characteristics(&b, &h_fn, &u0_fn, &rg.grid, &rg.times)?;
    let solve_s = started.elapsed().as_secs_f64();
    let h_field = boundary_field_from_data(&data.spec, &rg.grid, &rg.times)?;

    let mut csv = String::from(
        "# mollified trace identities for the transport solution:\n\
         # boundary: u_eta(.,0,t)(b.nu) vs (h (b.nu)) * rho_eta, L1 over the time window\n\
         # initial:  u_eta(.,0) vs u_0 * rho_eta, Lp over the eta-margin window\n\
         # bulk columns exclude the t = 0 (resp. depth < eta) start-up layer\n\
         eta,boundary_l1,boundary_bulk,initial_lp,initial_bulk,budget\n",
    );
    let mut boundary_l1 = Vec::new();
    let mut checks = Vec::new();
    for &eta in &etas {
        let bt = boundary_trace_residual(&u, &b, &h_field, eta)?;
        let it = initial_trace_residual(&u, &u0_fn, eta, p)?;
        let budget =
            5.0 * (rg.grid.h * rg.grid.h + eta * rg.times.dt + SOLVER_TOLERANCE);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(eta),
            num(bt.l1_norm),
            num(bt.bulk_norm),
            num(it.lp_norm),
            num(it.bulk_norm),
            num(budget)
        ));
        boundary_l1.push(bt.l1_norm);
        checks.push((eta, bt.bulk_norm, it.bulk_norm, budget));
    }
    out.write_table(
        "trace_check",
        &csv,
        "boundary and initial trace residuals per scale",
    )?;

    for (eta, b_bulk, i_bulk, budget) in checks {
        out.assert_check(
            &format!("boundary bulk within budget at eta {eta}"),
            b_bulk < budget,
            format!("{b_bulk:.3e} vs {budget:.3e}"),
        );
        out.assert_check(
            &format!("initial bulk within budget at eta {eta}"),
            i_bulk < budget,
            format!("{i_bulk:.3e} vs {budget:.3e}"),
        );
    }
    for (i, w) in etas.windows(2).enumerate() {
        if (w[0] / w[1] - 2.0).abs() < 1e-12 {
            let ratio = boundary_l1[i] / boundary_l1[i + 1];
            out.assert_check(
                &format!("start-up layer halves from eta {} to {}", w[0], w[1]),
                (1.6..=2.4).contains(&ratio),
                format!("full-norm ratio {ratio:.3}"),
            );
        }
    }
    out.note("solve_wallclock_s", serde_json::json!(solve_s));

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "eta": etas,
        "p": p,
        "data": data_echo(&data),
        "budget_rule": "5 (h^2 + eta dt + solver_tolerance)",
        "solver_tolerance": SOLVER_TOLERANCE,
    }))
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn solve(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "vertical_inflow(2)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 2,
            a: 1.0,
            l: 1.0,
            h: 1.0 / 32.0,
            t_end: 0.5,
            dt: 1.0 / 32.0,
        },
        b.dimension,
    )?;
    let data = resolve_data(cfg, "pulse", rg.grid.dimension, rg.grid.l, rg.times.t_end)?;
    let p = data.spec.p;

    let h_data = data.spec.boundary.clone();
    let u0 = data.spec.initial.clone();
    let h_fn = move |xp: &[f64], t: f64| h_data(xp, t);
    let u0_fn = move |x: &[f64]| u0(x);
    let started = Instant::now();
    let u = solve_characteristics(&b, &h_fn, &u0_fn, &rg.grid, &rg.times)?;
    let solve_s = started.elapsed().as_secs_f64();

    let mut bin = Vec::new();
    u.write_binary(&mut bin)?;
    out.write_raw(
        "solution.bin",
        &bin,
        "solution samples, little-endian f64 after a JSON header line",
    )?;
    let mut node_csv = Vec::new();
    u.write_csv(&mut node_csv)?;
    let node_csv = String::from_utf8(node_csv).expect("ASCII CSV");
    out.write_table("solution", &node_csv, "solution samples, one row per node")?;

    let mut csv = String::from(
        "# transport solution by backward characteristics: slice norms over time\nt,lp_norm\n",
    );
    let mut norms = Vec::with_capacity(u.time_nodes());
    for k in 0..u.time_nodes() {
        let n = u.slice(k).lp_norm(p, halfmoll::Region::Full)?;
        norms.push(n);
        csv.push_str(&format!("{},{}\n", num(rg.times.time(k)), num(n)));
    }
    out.write_table("solve", &csv, "Lp norm of each time slice")?;

    out.assert_check(
        "solution values all finite",
        u.values().iter().all(|v| v.is_finite()),
        format!("{} samples", u.values().len()),
    );
    if b.solenoidal && data.quiet_boundary {
        let monotone = norms.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        out.assert_check(
            "slice norms nonincreasing (solenoidal field, quiet boundary)",
            monotone,
            format!("first {:.6e}, last {:.6e}", norms[0], norms[norms.len() - 1]),
        );
    }
    out.note("solve_wallclock_s", serde_json::json!(solve_s));

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "p": p,
        "data": data_echo(&data),
    }))
}

// ---------------------------------------------------------------------------
// renormalize
// ---------------------------------------------------------------------------

fn build_relabel(cfg: &ExperimentConfig) -> Result<(String, RelabelFunction), ConfigError> {
    let name = cfg
        .relabel
        .theta
        .clone()
        .unwrap_or_else(|| "tanh".to_string());
    let theta = match name.as_str() {
        "tanh" => RelabelFunction::smooth_given(
            |s: f64| s.tanh(),
            |s: f64| {
                let c = s.cosh();
                1.0 / (c * c)
            },
        ),
        "truncation" => {
            let m = check::positive("relabel.m", cfg.relabel.m.unwrap_or(1.0))?;
            let eta_r = check::positive("relabel.eta_r", cfg.relabel.eta_r.unwrap_or(0.01))?;
            let p = cfg.relabel.p.unwrap_or(2.0);
            truncation_relabel(m, eta_r, p)
                .map_err(|e| ConfigError(format!("relabel rejected: {e}")))?
        }
        other => {
            return config_error(format!(
                "relabel.theta {other:?} is not one of tanh, truncation"
            ))
        }
    };
    Ok((name, theta))
}

fn renormalize_experiment(
    cfg: &ExperimentConfig,
    out: &mut RunOutput,
) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "constant(1)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 1,
            a: 0.0,
            l: 1.0,
            h: 1.0 / 64.0,
            t_end: 0.5,
            dt: 1.0 / 64.0,
        },
        b.dimension,
    )?;
    let data = resolve_data(cfg, "front", rg.grid.dimension, rg.grid.l, rg.times.t_end)?;
    let (theta_name, theta) = build_relabel(cfg)?;
    // Scalar closures for the same relabeling, shareable by Arc: the data
    // wrappers, the inverse construction, and the roundtrip probe all need
    // independent handles, and RelabelFunction itself is not cloneable.
    let (th, dp) = scalar_theta_closures(cfg, &theta_name)?;
    let c = check::positive("relabel.c", cfg.relabel.c.unwrap_or(2.0))?;

    let h_data = data.spec.boundary.clone();
    let u0 = data.spec.initial.clone();
    let h_fn = move |xp: &[f64], t: f64| h_data(xp, t);
    let u0_fn = move |x: &[f64]| u0(x);
    let u = solve_characteristics(&b, &h_fn, &u0_fn, &rg.grid, &rg.times)?;
    let theta_u = renormalize(&u, &theta)?;

    let h_for_res = data.spec.boundary.clone();
    let u0_for_res = data.spec.initial.clone();
    let theta_h = {
        let th = th.clone();
        move |xp: &[f64], t: f64| th(h_for_res(xp, t))
    };
    let theta_u0 = {
        let th = th.clone();
        move |x: &[f64]| th(u0_for_res(x))
    };

    let corpus = corpus_test_functions(&rg.grid, rg.times.t_end);
    let scale = theta.derivative_bound.max(1.0);
    let mut csv = format!(
        "# weak-form residual of the relabeled solution theta(u) against data (theta(h), theta(u0))\n\
         # theta = {theta_name}, sup|theta'| <= {:.6}\n\
         test_function,residual,quadrature_error,budget\n",
        theta.derivative_bound
    );
    let mut all_within = true;
    let mut worst = (String::new(), 0.0f64, 0.0f64);
    for phi in &corpus {
        let report = weak_residual(&theta_u, &b, &theta_h, &theta_u0, phi)?;
        let budget = 10.0
            * (rg.grid.h * rg.grid.h + rg.times.dt * rg.times.dt)
            * phi.c1_norm
            * scale;
        if report.value.abs() >= budget {
            all_within = false;
        }
        if report.value.abs() / budget > worst.1 / worst.2.max(1e-300) {
            worst = (report.test_function_id.clone(), report.value.abs(), budget);
        }
        csv.push_str(&format!(
            "{},{},{},{}\n",
            report.test_function_id,
            num(report.value),
            num(report.quadrature_error_estimate),
            num(budget)
        ));
    }
    out.write_table(
        "renormalize",
        &csv,
        "relabeled weak residual per corpus test function",
    )?;
    out.assert_check(
        "relabeled weak residuals within scaled budget",
        all_within,
        format!("worst {} : {:.3e} vs {:.3e}", worst.0, worst.1, worst.2),
    );

    // Inverse construction audit on [-C, C] plus its linear tails.
    let th_c = th(c);
    let th_mc = th(-c);
    let dp_c = dp(c);
    let dp_mc = dp(-c);
    let inverse = {
        let th = th.clone();
        let dp = dp.clone();
        inverse_relabel(move |s| th(s), move |s| dp(s), c)?
    };

    let nodes = 2001usize;
    let mut max_err: f64 = 0.0;
    let mut inv_csv = String::from(
        "# inverse relabeling roundtrip: |inverse(theta(sigma)) - sigma| on [-C, C]\nsigma,roundtrip_error\n",
    );
    for i in 0..nodes {
        let sigma = -c + 2.0 * c * i as f64 / (nodes - 1) as f64;
        let err = (inverse.value(th(sigma)) - sigma).abs();
        max_err = max_err.max(err);
        if i % 50 == 0 || i == nodes - 1 {
            inv_csv.push_str(&format!("{},{}\n", num(sigma), num(err)));
        }
    }
    out.write_table(
        "inverse",
        &inv_csv,
        "inverse relabeling roundtrip error over the core interval",
    )?;
    out.assert_check(
        "inverse roundtrip < 1e-10 on [-C, C]",
        max_err < 1e-10,
        format!("max error {max_err:.3e}"),
    );
    // The tails are linear with slope 1/theta'(+-C): bit-exact formula match.
    let probes_hi = [th_c + 0.5, th_c + 1.25];
    let probes_lo = [th_mc - 0.5, th_mc - 1.25];
    let hi_exact = probes_hi
        .iter()
        .all(|&s| inverse.value(s) == (s - th_c) / dp_c + c);
    let lo_exact = probes_lo
        .iter()
        .all(|&s| inverse.value(s) == (s - th_mc) / dp_mc - c);
    out.assert_check(
        "linear tails match (sigma - theta(C))/theta'(C) + C exactly",
        hi_exact && lo_exact,
        format!("probed {probes_hi:?} and {probes_lo:?}"),
    );

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "data": data_echo(&data),
        "theta": theta_name,
        "derivative_bound": theta.derivative_bound,
        "inverse_c": c,
    }))
}

type SharedScalarFn = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// (θ, θ′) as plain shareable scalar closures, rebuilt from the same
/// configuration recipe that [`build_relabel`] used.
fn scalar_theta_closures(
    cfg: &ExperimentConfig,
    theta_name: &str,
) -> Result<(SharedScalarFn, SharedScalarFn), ConfigError> {
    match theta_name {
        "tanh" => Ok((
            std::sync::Arc::new(|s: f64| s.tanh()),
            std::sync::Arc::new(|s: f64| {
                let ch = s.cosh();
                1.0 / (ch * ch)
            }),
        )),
        _ => {
            let m = check::positive("relabel.m", cfg.relabel.m.unwrap_or(1.0))?;
            let eta_r = check::positive("relabel.eta_r", cfg.relabel.eta_r.unwrap_or(0.01))?;
            let pp = cfg.relabel.p.unwrap_or(2.0);
            let t1 = truncation_relabel(m, eta_r, pp)
                .map_err(|e| ConfigError(format!("relabel rejected: {e}")))?;
            let t2 = truncation_relabel(m, eta_r, pp)
                .map_err(|e| ConfigError(format!("relabel rejected: {e}")))?;
            Ok((
                std::sync::Arc::new(move |s: f64| t1.value(s)),
                std::sync::Arc::new(move |s: f64| t2.derivative(s)),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// uniqueness
// ---------------------------------------------------------------------------

fn uniqueness(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "vertical_inflow(2)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 2,
            a: 1.0,
            l: 1.0,
            h: 1.0 / 32.0,
            t_end: 0.25,
            dt: 1.0 / 32.0,
        },
        b.dimension,
    )?;
    let etas = resolve_etas(cfg, &[0.16, 0.08, 0.04, 0.02])?;
    if etas.len() < 2 {
        return Err(ConfigError(
            "uniqueness needs at least two scales in scales.eta to compare".into(),
        )
        .into());
    }
    let p = cfg.scales.p.unwrap_or(2.0);
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ConfigError(format!("scales.p must satisfy 1 <= p, got {p}")).into());
    }
    let data = resolve_data(
        cfg,
        "inflow-pulse",
        rg.grid.dimension,
        rg.grid.l,
        rg.times.t_end,
    )?;
    let opts = SolverOptions::default();

    let mut summary = String::from(
        "# two-scale stability: solve with data mollified at eta_hi and eta_lo,\n\
         # report max-over-time |u_hi - u_lo|_p; outflow_changed counts grid values\n\
         # altered by perturbing h where b.nu >= 0 (zero = outflow irrelevance)\n\
         eta_hi,eta_lo,max_diff_norm,outflow_changed\n",
    );
    let mut diffs = Vec::new();
    let mut pair_times = Vec::new();
    for (i, w) in etas.windows(2).enumerate() {
        let started = Instant::now();
        let mut report = uniqueness_experiment(
            &b, &data.spec, w[0], w[1], p, &rg.grid, &rg.times, &opts,
        )?;
        pair_times.push(started.elapsed().as_secs_f64());
        for row in &mut report.rows {
            row.wallclock_s = 0.0;
        }
        let max_diff = report
            .rows
            .iter()
            .map(|r| r.norm)
            .fold(0.0f64, f64::max);
        let changed = report
            .metadata
            .get("outflow_perturbation_changed_nodes")
            .and_then(|v| v.as_u64())
            .unwrap_or(u64::MAX);
        diffs.push(max_diff);
        summary.push_str(&format!(
            "{},{},{},{changed}\n",
            num(w[0]),
            num(w[1]),
            num(max_diff)
        ));
        let mut pair_csv = Vec::new();
        report.to_csv(
            &mut pair_csv,
            "per-slice difference of solutions with data mollified at two scales\n\
             (the eta column holds the slice time)",
        )?;
        out.write_table(
            &format!("uniqueness_pair{}", i + 1),
            &String::from_utf8(pair_csv).expect("ASCII CSV"),
            "slice-by-slice two-scale difference",
        )?;
        out.assert_check(
            &format!("outflow perturbation changes nothing (eta {})", w[0]),
            changed == 0,
            format!("{changed} grid values changed"),
        );
    }
    out.write_table("uniqueness", &summary, "two-scale difference summary")?;
    for i in 0..diffs.len().saturating_sub(1) {
        let ratio = if diffs[i + 1] > 0.0 {
            diffs[i] / diffs[i + 1]
        } else {
            f64::INFINITY
        };
        out.assert_check(
            &format!("difference decreases >= x1.5 from pair {} to {}", i + 1, i + 2),
            ratio >= 1.5,
            format!("ratio {ratio:.3}"),
        );
    }
    out.note("pair_wallclock_s", serde_json::json!(pair_times));

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "eta": etas,
        "p": p,
        "data": data_echo(&data),
    }))
}

// ---------------------------------------------------------------------------
// gronwall
// ---------------------------------------------------------------------------

fn gronwall(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let b = resolve_field(cfg, "constant(1)")?;
    let rg = resolve_grid(
        cfg,
        &GridDefaults {
            dimension: 1,
            a: 0.0,
            l: 1.0,
            h: 1.0 / 32.0,
            t_end: 0.5,
            dt: 1.0 / 32.0,
        },
        b.dimension,
    )?;
    let data = resolve_data(cfg, "front", rg.grid.dimension, rg.grid.l, rg.times.t_end)?;
    let p = cfg.scales.p.unwrap_or(2.0);
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ConfigError(format!("scales.p must satisfy 1 <= p, got {p}")).into());
    }

    let h_data = data.spec.boundary.clone();
    let u0 = data.spec.initial.clone();
    let h_fn = move |xp: &[f64], t: f64| h_data(xp, t);
    let u0_fn = move |x: &[f64]| u0(x);
    let u = solve_characteristics(&b, &h_fn, &u0_fn, &rg.grid, &rg.times)?;
    let h_field = boundary_field_from_data(&data.spec, &rg.grid, &rg.times)?;
    let report = gronwall_check(&u, &b, &h_field, p)?;

    let mut csv = Vec::new();
    report.to_csv(
        &mut csv,
        "integrated energy inequality |u(t)|_p^p <= (|u(0)|_p^p + M2 t) exp(M1 t)\n\
         with M1 = sup|div b| and M2 = sup|b| sup_t |h(t)|_p^p",
    )?;
    let csv = String::from_utf8(csv).expect("ASCII CSV");
    out.write_table("gronwall", &csv, "slice energy against the integrated bound")?;
    out.assert_check(
        "energy bound holds at every time node (5% slack)",
        report.ok,
        format!("repair factor {:.6}", report.repair_factor),
    );

    Ok(serde_json::json!({
        "field": b.name,
        "grid": grid_echo(&rg),
        "p": p,
        "data": data_echo(&data),
        "slack": report.slack,
    }))
}

// ---------------------------------------------------------------------------
// mollifier-defect
// ---------------------------------------------------------------------------

fn mollifier_defect(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let etas = resolve_etas(cfg, &[0.1])?;
    let eta = etas[0];
    let h = eta / 16.0;
    let l = (4.0 * eta).max(1.0);

    // Tailored path: the production one-sided convolution of u = 1 read at
    // the boundary point itself.
    let grid = StripGrid::new(1, 0.0, l, h)?;
    let ones = SampledField::from_fn(grid, |_| 1.0)?;
    let kernel = HalfSpaceKernel::new(1, eta)?;
    let tailored = convolve_half_space(&ones, &kernel, &[0.0])?;

    // Standard path: a symmetric kernel centered at the boundary only sees
    // half its mass inside the domain.
    let sym = Kernel1D::symmetric(eta)?;
    let mut standard = 0.0;
    for (x, w) in GL64.mapped(0.0, eta) {
        standard += w * sym.eval(x);
    }

    let mut csv = String::from(
        "# boundary value of the mollified constant u = 1 at x = 0:\n\
         # a symmetric kernel halves the data, the one-sided kernel preserves it\n\
         kernel,boundary_value,expected,abs_error,tolerance\n",
    );
    csv.push_str(&format!(
        "standard,{},{},{},{}\n",
        num(standard),
        num(0.5),
        num((standard - 0.5).abs()),
        num(1e-3)
    ));
    csv.push_str(&format!(
        "tailored,{},{},{},{}\n",
        num(tailored),
        num(1.0),
        num((tailored - 1.0).abs()),
        num(1e-8)
    ));
    out.write_table(
        "mollifier_defect",
        &csv,
        "boundary defect of symmetric vs one-sided mollification",
    )?;
    out.assert_check(
        "standard kernel halves the boundary value",
        (standard - 0.5).abs() <= 1e-3,
        format!("value {standard:.10}"),
    );
    out.assert_check(
        "tailored kernel preserves the boundary value",
        (tailored - 1.0).abs() <= 1e-8,
        format!("value {tailored:.14}"),
    );

    Ok(serde_json::json!({
        "eta": eta,
        "grid_h": h,
        "depth": l,
    }))
}

// ---------------------------------------------------------------------------
// curved-trace
// ---------------------------------------------------------------------------

fn curved_trace(cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<serde_json::Value> {
    let kind = cfg
        .domain
        .kind
        .clone()
        .unwrap_or_else(|| "disk".to_string());
    let (domain, side, boundary_radius) = match kind.as_str() {
        "disk" => {
            let r = check::positive("domain.radius", cfg.domain.radius.unwrap_or(1.0))?;
            let side = cfg.domain.side.clone().unwrap_or_else(|| "outer".to_string());
            if side != "outer" {
                return Err(ConfigError(format!(
                    "domain.side must be \"outer\" on a disk (its boundary is the rim), got {side:?}"
                ))
                .into());
            }
            let d = SmoothDomain2D::disk(r)
                .map_err(|e| ConfigError(format!("domain rejected: {e}")))?;
            (d, BandSide::Outer, r)
        }
        "annulus" => {
            let r1 = check::positive("domain.r1", cfg.domain.r1.unwrap_or(0.8))?;
            let r2 = check::positive("domain.r2", cfg.domain.r2.unwrap_or(2.0))?;
            if r1 >= r2 {
                return Err(ConfigError(format!(
                    "annulus needs r1 < r2, got r1 = {r1}, r2 = {r2}"
                ))
                .into());
            }
            let side_name = cfg.domain.side.clone().unwrap_or_else(|| "outer".to_string());
            let (side, radius) = match side_name.as_str() {
                "inner" => (BandSide::Inner, r1),
                "outer" => (BandSide::Outer, r2),
                other => {
                    return Err(ConfigError(format!(
                        "domain.side must be \"inner\" or \"outer\", got {other:?}"
                    ))
                    .into())
                }
            };
            let d = SmoothDomain2D::annulus(r1, r2)
                .map_err(|e| ConfigError(format!("domain rejected: {e}")))?;
            (d, side, radius)
        }
        other => {
            return Err(ConfigError(format!(
                "domain.kind {other:?} is not one of disk, annulus"
            ))
            .into())
        }
    };
    let delta = domain.delta();
    let s_max = check::positive("domain.s_max", cfg.domain.s_max.unwrap_or(1.5 * delta))?;
    if s_max >= 2.0 * delta {
        return Err(ConfigError(format!(
            "domain.s_max = {s_max} must stay below twice the curvature margin 2 delta = {}",
            2.0 * delta
        ))
        .into());
    }
    let arc_nodes = cfg.domain.arc_nodes.unwrap_or(96);
    let depth_nodes = cfg.domain.depth_nodes.unwrap_or(49);
    if arc_nodes < 8 {
        return Err(ConfigError(format!("domain.arc_nodes must be >= 8, got {arc_nodes}")).into());
    }
    if depth_nodes < 2 {
        return Err(
            ConfigError(format!("domain.depth_nodes must be >= 2, got {depth_nodes}")).into(),
        );
    }
    let t_end = check::positive("grid.t_end", cfg.grid.t_end.unwrap_or(0.25))?;
    let dt = check::positive("grid.dt", cfg.grid.dt.unwrap_or(0.01))?;
    let etas = resolve_etas(cfg, &[1.0 / 16.0])?;
    let eta = etas[0];
    if eta >= delta {
        return Err(ConfigError(format!(
            "scale eta = {eta} must stay below the curvature margin delta = {delta}"
        ))
        .into());
    }
    if eta > s_max {
        return Err(ConfigError(format!(
            "scale eta = {eta} exceeds the band depth s_max = {s_max}"
        ))
        .into());
    }
    if t_end < eta + dt {
        return Err(ConfigError(format!(
            "horizon t_end = {t_end} too short: need t_end >= eta + dt = {}",
            eta + dt
        ))
        .into());
    }
    let field_name = cfg.field.as_deref().unwrap_or("radial_inflow");
    let data = cfg
        .data
        .kind
        .clone()
        .unwrap_or_else(|| "front".to_string());
    if data != "front" && data != "zero" {
        return Err(ConfigError(format!(
            "curved-trace supports data.kind front or zero, got {data:?}"
        ))
        .into());
    }
    let amplitude = cfg.data.amplitude.unwrap_or(1.0);
    if !amplitude.is_finite() {
        return Err(ConfigError("data.amplitude must be finite".into()).into());
    }
    let h_amp = if data == "front" { amplitude } else { 0.0 };
    let h_fn = move |_: &[f64], _: f64| h_amp;
    let u0_fn = |_: &[f64]| 0.0;
    if field_name == "radial_inflow" && data == "front" && side == BandSide::Inner {
        return Err(ConfigError(
            "the radial inflow field exits through the annulus' inner circle (b.nu = +1 there), \
             so the front datum never enters the domain; use side = \"outer\" or the \
             rigid_rotation field"
                .into(),
        )
        .into());
    }

    let time = TimeAxis::new(t_end, dt).map_err(|e| ConfigError(format!("time axis: {e}")))?;
    let grid = TubularGrid::around(domain, side, s_max, arc_nodes, depth_nodes, Some(time))
        .map_err(|e| ConfigError(format!("band grid rejected: {e}")))?;

    // Band-measure audit: the weighted band integral of 1 against the
    // closed-form area of the annular band.
    let area = band_integral(&domain, side, s_max, &|_| 1.0)?;
    let area_exact = match side {
        BandSide::Outer => {
            std::f64::consts::PI
                * (boundary_radius * boundary_radius
                    - (boundary_radius - s_max) * (boundary_radius - s_max))
        }
        BandSide::Inner => {
            std::f64::consts::PI
                * ((boundary_radius + s_max) * (boundary_radius + s_max)
                    - boundary_radius * boundary_radius)
        }
    };
    let area_rel = ((area - area_exact) / area_exact).abs();
    out.assert_check(
        "band area matches the closed form",
        area_rel < 1e-8,
        format!("{area:.12} vs {area_exact:.12} (rel {area_rel:.3e})"),
    );

    let started = Instant::now();
    let (res, field_label) = match field_name {
        "radial_inflow" => {
            let u = solve_on_band(&RadialInflow, &grid, &u0_fn, &h_fn)?;
            let res = curved_trace_residual(&u, &RadialInflow, &h_fn, eta)?;
            (res, "radial_inflow".to_string())
        }
        "rigid_rotation" => {
            let rot = VelocityFieldSpec::rigid_rotation();
            // Any occupant works: the rotation flux b.nu vanishes on every
            // centered circle, so both trace terms are identically zero.
            let u = TubularField::from_fn_time(grid.clone(), |x, t| x[0] + t * x[1])?;
            let res = curved_trace_residual(&u, &rot, &h_fn, eta)?;
            (res, rot.name.clone())
        }
        other => {
            return Err(ConfigError(format!(
                "curved-trace supports field radial_inflow or rigid_rotation, got {other:?}"
            ))
            .into())
        }
    };
    let solve_s = started.elapsed().as_secs_f64();

    let circumference = 2.0 * std::f64::consts::PI * boundary_radius;
    let corner_mass = CORNER_LAYER_CONSTANT * eta * circumference * amplitude;
    let ratio = if corner_mass > 0.0 {
        res.l1_norm / corner_mass
    } else {
        0.0
    };

    let mut csv = format!(
        "# curved boundary trace: mollified solution trace against mollified\n\
         # boundary flux on the {kind} (band side {:?}, radius {boundary_radius})\n\
         # l1_norm {}  bulk_norm {}  start_up_layer_mass {}  ratio {}\n\
         t,slice_l1\n",
        side,
        num(res.l1_norm),
        num(res.bulk_norm),
        num(corner_mass),
        num(ratio)
    );
    let ns = res.sigma_nodes;
    for k in 0..res.window.nodes {
        let mut slice = 0.0;
        for i in 0..ns {
            slice += res.values[k * ns + i].abs() * res.h_sigma;
        }
        csv.push_str(&format!("{},{}\n", num(res.window.time(k)), num(slice)));
    }
    out.write_table(
        "curved_trace",
        &csv,
        "trace residual per retained time slice on the curved boundary",
    )?;

    match (field_label.as_str(), data.as_str()) {
        ("radial_inflow", "front") => {
            out.assert_check(
                "bulk residual vanishes past the start-up layer",
                res.bulk_norm < 1e-8,
                format!("bulk {:.3e}", res.bulk_norm),
            );
            out.assert_check(
                "start-up layer mass tracks the one-sided law",
                (0.5..2.0).contains(&ratio),
                format!("l1 {:.6e}, law {:.6e}, ratio {ratio:.4}", res.l1_norm, corner_mass),
            );
        }
        ("rigid_rotation", _) => {
            // At unit radius the node coordinates are exactly (cos, sin)
            // and the two flux products cancel bitwise; at other radii the
            // rounding of r*cos / r*sin leaves one ulp per product.
            let tol = if boundary_radius == 1.0 { 0.0 } else { 1e-12 };
            out.assert_check(
                "tangential flow leaves no boundary flux",
                res.l1_norm <= tol,
                format!("l1 {:.3e}, tolerance {tol:.1e}", res.l1_norm),
            );
        }
        (_, "zero") => {
            out.assert_check(
                "quiet data leaves exactly zero residual",
                res.l1_norm == 0.0,
                format!("l1 {:.3e}", res.l1_norm),
            );
        }
        _ => {}
    }
    out.note("solve_wallclock_s", serde_json::json!(solve_s));
    out.note("band_area", serde_json::json!(area));
    out.note("l1_norm", serde_json::json!(res.l1_norm));
    out.note("bulk_norm", serde_json::json!(res.bulk_norm));

    Ok(serde_json::json!({
        "domain": kind,
        "side": format!("{side:?}"),
        "boundary_radius": boundary_radius,
        "s_max": s_max,
        "arc_nodes": arc_nodes,
        "depth_nodes": depth_nodes,
        "t_end": t_end,
        "dt": dt,
        "eta": eta,
        "field": field_label,
        "data": data,
        "amplitude": amplitude,
    }))
}
